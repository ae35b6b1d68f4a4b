//! Background structures ψ̄ over which flow states are written.

use std::f64::consts::TAU;

use crate::algebra::{clifford_basis, threeform_of, Spinor8, StructureTables, Tensor2, Vec7, DIM};
use crate::dictionary::{spinor_edge_torsion, SpinorPair, PAIR_TOLERANCE};
use crate::error::{Error, Result};
use crate::grid::{
    div_tensor2, Field, GridShape, Layout, Order, Spinor8Field, Tensor2Field, ThreeFormField,
    Vec7Field,
};

/// Tolerance on ‖div T̄‖/‖T̄‖ below which a background counts as critical.
pub const CRITICAL_TOLERANCE: f64 = 1e-6;

/// ‖T̄‖ below which the relative divergence residual is not meaningful.
const TORSION_FLOOR: f64 = 1e-12;

/// A unit spinor field ψ̄ with its three-form and cached torsion.
#[derive(Clone, Debug)]
pub struct Background {
    kind: String,
    psi: Spinor8Field,
    phi: ThreeFormField,
    /// Staggered torsion, row a on the midpoint i + ½e_a.
    tbar_edge: Tensor2Field,
    /// Nodal torsion from central differences.
    tbar_node: Tensor2Field,
    /// (ψ̄_{i+e_a}, ψ̄_i) per axis a.
    overlap: Vec7Field,
    uniform: bool,
}

impl Background {
    /// ψ̄ ≡ (1, 0, …, 0), φ̄ = φ₀, T̄ = 0.
    pub fn constant(grid: GridShape) -> Self {
        let psi = Spinor8Field::constant(grid, Spinor8::reference());
        Self {
            kind: "constant".into(),
            phi: psi.map(threeform_of),
            tbar_edge: Tensor2Field::zeros(grid).with_layout(Layout::Edge),
            tbar_node: Tensor2Field::zeros(grid),
            overlap: Vec7Field::constant(grid, Vec7([1.0; 7])),
            psi,
            uniform: true,
        }
    }

    /// A background given by an arbitrary unit spinor field.
    pub fn from_spinor_field(kind: &str, psi: Spinor8Field) -> Result<Self> {
        for s in psi.values() {
            s.ensure_unit(PAIR_TOLERANCE)?;
        }
        let grid = *psi.grid();
        let t = StructureTables::standard();
        let tbar_edge = spinor_edge_torsion(&psi);
        let tbar_node = Field::from_fn(grid, |i| {
            let s = &psi.values()[i];
            let mut out = Tensor2::zero();
            for a in grid.active_axes() {
                let d = (psi.values()[grid.neighbor(i, a, 1)] - psi.values()[grid.neighbor(i, a, -1)])
                    * (0.5 / grid.spacing(a));
                for b in 0..DIM {
                    out.0[a][b] = d.dot(&t.gamma_apply(b, s));
                }
            }
            out
        });
        let overlap = Field::from_fn(grid, |i| {
            Vec7(std::array::from_fn(|a| {
                psi.values()[grid.neighbor(i, a, 1)].dot(&psi.values()[i])
            }))
        });
        let first = psi.values()[0];
        let uniform = psi.values().iter().all(|s| *s == first);
        Ok(Self {
            kind: kind.to_string(),
            phi: psi.map(threeform_of),
            tbar_edge,
            tbar_node,
            overlap,
            psi,
            uniform,
        })
    }

    /// ψ̄ = W·ψ₀ + wψ₀ with w = √(1 − |W|²).
    pub fn twisted(w_field: &Vec7Field) -> Result<Self> {
        let mut values = Vec::with_capacity(w_field.len());
        for w in w_field.values() {
            values.push(SpinorPair::from_chart(*w)?.to_spinor());
        }
        let psi = Field::from_values(*w_field.grid(), Layout::Node, values)?;
        Self::from_spinor_field("twisted", psi)
    }

    /// ψ̄ = cos θ ψ₀ + sin θ e_j·ψ₀ with θ = 2πk x_a / L_a. Its staggered
    /// torsion is constant, so div T̄ = 0 and it is a critical point.
    pub fn helical(grid: GridShape, axis: usize, direction: usize, wavenumber: i64) -> Result<Self> {
        if axis >= DIM || direction >= DIM {
            return Err(Error::Domain(format!(
                "helical axis {} / direction {} out of range",
                axis + 1,
                direction + 1
            )));
        }
        if !grid.is_active(axis) {
            return Err(Error::Domain(format!("helical axis {} is inert", axis + 1)));
        }
        let base = Spinor8::reference();
        let turned = clifford_basis(direction, &base);
        let period = grid.lengths()[axis];
        let psi = Field::from_position(grid, |x| {
            let theta = TAU * wavenumber as f64 * x[axis] / period;
            base * theta.cos() + turned * theta.sin()
        });
        Self::from_spinor_field("helical", psi)
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn grid(&self) -> &GridShape {
        self.psi.grid()
    }

    pub fn psi(&self) -> &Spinor8Field {
        &self.psi
    }

    pub fn phi(&self) -> &ThreeFormField {
        &self.phi
    }

    pub fn tbar_edge(&self) -> &Tensor2Field {
        &self.tbar_edge
    }

    pub fn tbar_node(&self) -> &Tensor2Field {
        &self.tbar_node
    }

    pub fn overlap(&self) -> &Vec7Field {
        &self.overlap
    }

    /// True when ψ̄ is the same spinor at every node.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn is_torsion_free(&self) -> bool {
        self.tbar_edge.max_abs() == 0.0
    }

    /// ‖div T̄‖/‖T̄‖, zero when ‖T̄‖ is at roundoff level.
    pub fn divergence_residual(&self) -> f64 {
        let norm = self.tbar_edge.norm_l2();
        if norm <= TORSION_FLOOR {
            return 0.0;
        }
        div_tensor2(&self.tbar_edge, Order::Second).norm_l2() / norm
    }

    /// Refuses non-critical backgrounds.
    pub fn ensure_critical(&self, tolerance: f64) -> Result<()> {
        let residual = self.divergence_residual();
        if !(residual <= tolerance) {
            return Err(Error::NotCritical { residual, tolerance });
        }
        Ok(())
    }

    /// ψ_i = U_i·ψ̄_i + u_iψ̄_i with u in the chart u > 0.
    pub fn spinor_of(&self, big: &Vec7Field) -> Result<Spinor8Field> {
        self.grid().ensure_same(big.grid())?;
        let mut values = Vec::with_capacity(big.len());
        for (w, s) in big.values().iter().zip(self.psi.values()) {
            values.push(SpinorPair::from_chart(*w)?.to_spinor_over(s));
        }
        Field::from_values(*self.grid(), Layout::Node, values)
    }

    /// Pair coordinates of a spinor field over ψ̄; fails if u ≤ 0 anywhere.
    pub fn pairs_of(&self, psi: &Spinor8Field) -> Result<Vec7Field> {
        self.grid().ensure_same(psi.grid())?;
        let mut values = Vec::with_capacity(psi.len());
        for (s, b) in psi.values().iter().zip(self.psi.values()) {
            let p = SpinorPair::from_spinor_over(s, b);
            if !(p.small > 0.0) {
                return Err(Error::OutsideChart { u: p.small });
            }
            values.push(p.big);
        }
        Field::from_values(*self.grid(), Layout::Node, values)
    }
}
