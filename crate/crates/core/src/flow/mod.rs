//! Time integration of the isometric flow.
//!
//! The flow ψ̇ = div T · ψ is integrated either directly on unit spinor
//! fields or on the vector field U of ψ = U·ψ̄ + uψ̄, where it reads
//! U̇ = u div T − div T ×̄ U. Torsion is sampled on the midpoints between
//! nodes, T_ab(i + ½e_a) = (ψ_{i+e_a} − ψ_i, e_b·ψ_i)/h_a, and its divergence
//! is the backward difference. With this pairing the flow is exactly the
//! negative gradient of the discrete energy (see [`crate::analysis`]).

mod background;
mod integrator;


use crate::algebra::{clifford_mul, Spinor8};
use crate::dictionary::{edge_torsion_row, spinor_edge_torsion, SpinorPair};
use crate::error::{Error, Result};
use crate::grid::{
    div_tensor2, Field, Layout, Order, ScalarField, Spinor8Field, Tensor2Field, Vec7Field,
};

pub use background::{Background, CRITICAL_TOLERANCE};
pub use integrator::{
    evolve, max_stable_dt, step_rk4, Diagnostics, EvolveOutcome, FlowState, IntegratorControls,
    RunStatus,
};

/// Default bound on |U|.
pub const DEFAULT_CLAMP: f64 = 0.99;

/// Unit-length tolerance on spinor states.
pub const SPINOR_TOLERANCE: f64 = 1e-8;

/// u = √(1 − |U|²), failing outside the chart.
pub fn small_field(big: &Vec7Field) -> Result<ScalarField> {
    if let Some(v) = big.values().iter().find(|v| !(v.norm_sq() < 1.0)) {
        return Err(Error::OutsideChart {
            u: 1.0 - v.norm_sq(),
        });
    }
    Ok(big.map(|v| (1.0 - v.norm_sq()).sqrt()))
}

fn max_norm(big: &Vec7Field) -> f64 {
    big.values().iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Staggered torsion of ψ = U·ψ̄ + uψ̄.
pub fn edge_torsion(big: &Vec7Field, bg: &Background) -> Result<Tensor2Field> {
    let grid = *bg.grid();
    grid.ensure_same(big.grid())?;
    let small = small_field(big)?;
    let pair = |i: usize| SpinorPair {
        big: big.values()[i],
        small: small.values()[i],
    };
    Ok(Field::from_fn_with_layout(grid, Layout::Edge, |i| {
        let p = pair(i);
        let phibar = &bg.phi().values()[i];
        let tau = &bg.tbar_edge().values()[i];
        let overlap = &bg.overlap().values()[i];
        let mut t = crate::algebra::Tensor2::zero();
        for a in grid.active_axes() {
            let next = pair(grid.neighbor(i, a, 1));
            t.0[a] = edge_torsion_row(&p, &next, grid.spacing(a), overlap[a], &tau.row(a), phibar).0;
        }
        t
    }))
}

/// div T of ψ = U·ψ̄ + uψ̄ on the nodes.
pub fn div_torsion(big: &Vec7Field, bg: &Background) -> Result<Vec7Field> {
    Ok(div_tensor2(&edge_torsion(big, bg)?, Order::Second))
}

/// Velocity of U: u div T − div T ×̄ U, with ×̄ the cross product of φ̄.
pub fn rhs_vector_flow(big: &Vec7Field, bg: &Background, clamp: f64) -> Result<Vec7Field> {
    let norm = max_norm(big);
    if !(norm <= clamp) {
        return Err(Error::ChartExit { norm, clamp });
    }
    let d = div_torsion(big, bg)?;
    Ok(Field::from_fn(*big.grid(), |i| {
        let u_vec = &big.values()[i];
        let u = (1.0 - u_vec.norm_sq()).sqrt();
        let dv = &d.values()[i];
        *dv * u - bg.phi().values()[i].cross(dv, u_vec)
    }))
}

/// div T of a unit spinor field, from its staggered torsion.
pub fn div_torsion_spinor(psi: &Spinor8Field) -> Vec7Field {
    div_tensor2(&spinor_edge_torsion(psi), Order::Second)
}

/// Velocity of ψ: div T · ψ.
pub fn rhs_spinor_flow(psi: &Spinor8Field) -> Result<Spinor8Field> {
    for s in psi.values() {
        s.ensure_unit(SPINOR_TOLERANCE)?;
    }
    let d = div_torsion_spinor(psi);
    psi.zip_map(&d, |s, v| clifford_mul(v, s))
}

/// The evolving unknown of a flow model.
#[derive(Clone, Debug, PartialEq)]
pub enum FlowVariable {
    Vector(Vec7Field),
    Spinor(Spinor8Field),
}

impl FlowVariable {
    /// self + s·k.
    pub fn axpy(&self, s: f64, k: &FlowVariable) -> Result<FlowVariable> {
        match (self, k) {
            (Self::Vector(a), Self::Vector(b)) => Ok(Self::Vector(a.lin_comb(1.0, b, s)?)),
            (Self::Spinor(a), Self::Spinor(b)) => Ok(Self::Spinor(a.lin_comb(1.0, b, s)?)),
            _ => Err(Error::Domain("mixed flow variables".into())),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Self::Vector(a) => a.is_finite(),
            Self::Spinor(a) => a.is_finite(),
        }
    }
}

/// A realization of the flow on some unknown.
pub trait FlowModel: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;

    /// Unknown for the initial vector field U₀ over the background.
    fn initialize(&self, big: &Vec7Field, bg: &Background) -> Result<FlowVariable>;

    /// Time derivative of the unknown at one RK stage.
    fn rhs(&self, y: &FlowVariable, bg: &Background) -> Result<FlowVariable>;

    /// Applied to every accepted step.
    fn finish_step(&self, _y: &mut FlowVariable) {}

    /// Spinor field of the state.
    fn spinor(&self, y: &FlowVariable, bg: &Background) -> Result<Spinor8Field>;

    /// Vector field U of the state over the background.
    fn vector(&self, y: &FlowVariable, bg: &Background) -> Result<Vec7Field>;
}

/// U̇ = u div T − div T ×̄ U with u recomputed from U.
#[derive(Clone, Copy, Debug)]
pub struct VectorFlow {
    pub clamp: f64,
}

impl Default for VectorFlow {
    fn default() -> Self {
        Self {
            clamp: DEFAULT_CLAMP,
        }
    }
}

impl FlowModel for VectorFlow {
    fn name(&self) -> &'static str {
        "vector"
    }

    fn initialize(&self, big: &Vec7Field, bg: &Background) -> Result<FlowVariable> {
        bg.grid().ensure_same(big.grid())?;
        let norm = max_norm(big);
        if !(norm <= self.clamp) {
            return Err(Error::ChartExit {
                norm,
                clamp: self.clamp,
            });
        }
        Ok(FlowVariable::Vector(big.clone()))
    }

    fn rhs(&self, y: &FlowVariable, bg: &Background) -> Result<FlowVariable> {
        match y {
            FlowVariable::Vector(big) => Ok(FlowVariable::Vector(rhs_vector_flow(big, bg, 1.0)?)),
            FlowVariable::Spinor(_) => Err(Error::Domain("vector flow given a spinor state".into())),
        }
    }

    fn spinor(&self, y: &FlowVariable, bg: &Background) -> Result<Spinor8Field> {
        bg.spinor_of(&self.vector(y, bg)?)
    }

    fn vector(&self, y: &FlowVariable, _bg: &Background) -> Result<Vec7Field> {
        match y {
            FlowVariable::Vector(big) => Ok(big.clone()),
            FlowVariable::Spinor(_) => Err(Error::Domain("vector flow given a spinor state".into())),
        }
    }
}

/// ψ̇ = div T · ψ, evaluated on normalized stage values and renormalized
/// after every step.
#[derive(Clone, Copy, Debug, Default)]
pub struct SpinorFlow;

fn normalized(psi: &Spinor8Field) -> Spinor8Field {
    psi.map(Spinor8::normalized)
}

impl FlowModel for SpinorFlow {
    fn name(&self) -> &'static str {
        "spinor"
    }

    fn initialize(&self, big: &Vec7Field, bg: &Background) -> Result<FlowVariable> {
        Ok(FlowVariable::Spinor(bg.spinor_of(big)?))
    }

    fn rhs(&self, y: &FlowVariable, _bg: &Background) -> Result<FlowVariable> {
        match y {
            FlowVariable::Spinor(psi) => Ok(FlowVariable::Spinor(rhs_spinor_flow(&normalized(psi))?)),
            FlowVariable::Vector(_) => Err(Error::Domain("spinor flow given a vector state".into())),
        }
    }

    fn finish_step(&self, y: &mut FlowVariable) {
        if let FlowVariable::Spinor(psi) = y {
            *psi = normalized(psi);
        }
    }

    fn spinor(&self, y: &FlowVariable, _bg: &Background) -> Result<Spinor8Field> {
        match y {
            FlowVariable::Spinor(psi) => Ok(psi.clone()),
            FlowVariable::Vector(_) => Err(Error::Domain("spinor flow given a vector state".into())),
        }
    }

    fn vector(&self, y: &FlowVariable, bg: &Background) -> Result<Vec7Field> {
        bg.pairs_of(&self.spinor(y, bg)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Vec7;
    use crate::dictionary::torsion_from_uu_central;
    use crate::grid::GridShape;

    fn wave(g: GridShape, eps: f64) -> Vec7Field {
        Vec7Field::from_position(g, |x| Vec7::basis(1) * (eps * x[0].sin()))
    }

    #[test]
    fn zero_and_constant_states_are_stationary() {
        let g = GridShape::collapsed(&[16, 4]).unwrap();
        let bg = Background::constant(g);
        assert_eq!(rhs_vector_flow(&Vec7Field::zeros(g), &bg, 0.99).unwrap().max_abs(), 0.0);
        let c = Vec7Field::constant(g, Vec7([0.1, 0.2, 0.0, -0.3, 0.0, 0.1, 0.2]));
        assert_eq!(rhs_vector_flow(&c, &bg, 0.99).unwrap().max_abs(), 0.0);
        let psi = Spinor8Field::constant(g, Spinor8::reference());
        assert_eq!(rhs_spinor_flow(&psi).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn clamp_is_enforced() {
        let g = GridShape::collapsed(&[8]).unwrap();
        let bg = Background::constant(g);
        let big = Vec7Field::constant(g, Vec7::basis(0) * 0.995);
        assert!(matches!(rhs_vector_flow(&big, &bg, 0.99), Err(Error::ChartExit { .. })));
    }

    #[test]
    fn edge_torsion_matches_spinor_route() {
        let g = GridShape::collapsed(&[12, 6]).unwrap();
        let w = Vec7Field::from_position(g, |x| {
            Vec7([0.2 * x[1].cos(), 0.1 * x[0].sin(), 0.0, 0.15 * (x[0] + x[1]).sin(), 0.0, 0.0, 0.05])
        });
        let bg = Background::twisted(&w).unwrap();
        let big = Vec7Field::from_position(g, |x| {
            Vec7([0.0, 0.3 * x[0].cos(), 0.1, 0.0, -0.2 * x[1].sin(), 0.0, 0.1 * (2.0 * x[0]).sin()])
        });
        let t1 = edge_torsion(&big, &bg).unwrap();
        let t2 = spinor_edge_torsion(&bg.spinor_of(&big).unwrap());
        assert!(t1.max_abs_diff(&t2).unwrap() < 1e-13);
    }

    #[test]
    fn spinor_velocity_is_tangent() {
        let g = GridShape::collapsed(&[10, 10]).unwrap();
        let bg = Background::constant(g);
        let big = Vec7Field::from_position(g, |x| Vec7([0.3 * x[0].sin(), 0.2 * x[1].cos(), 0.0, 0.1, 0.0, 0.0, 0.0]));
        let psi = bg.spinor_of(&big).unwrap();
        let v = rhs_spinor_flow(&psi).unwrap();
        for (a, b) in psi.values().iter().zip(v.values()) {
            assert!(a.dot(b).abs() < 1e-12);
        }
    }

    #[test]
    fn small_amplitude_flow_is_heat_equation() {
        let g = GridShape::collapsed(&[64]).unwrap();
        let bg = Background::constant(g);
        let mut prev = f64::INFINITY;
        for eps in [1e-2, 1e-3, 1e-4] {
            let big = wave(g, eps);
            let rhs = rhs_vector_flow(&big, &bg, 0.99).unwrap();
            let lin = big.laplacian(Order::Second);
            let rel = rhs.max_abs_diff(&lin).unwrap() / lin.max_abs();
            assert!(rel < prev);
            prev = rel;
        }
        assert!(prev < 1e-7);
    }

    #[test]
    fn twisted_torsion_matches_nodal_formula() {
        let g = GridShape::collapsed(&[64]).unwrap();
        let w = Vec7Field::from_position(g, |x| Vec7::basis(3) * (0.2 * x[0].cos()));
        let bg = Background::twisted(&w).unwrap();
        let small = small_field(&w).unwrap();
        let zero = crate::grid::Tensor2Field::zeros(g);
        let phi0s = crate::grid::ThreeFormField::constant(g, *crate::algebra::phi0());
        let nodal = torsion_from_uu_central(&w, &small, &zero, &phi0s, Order::Second).unwrap();
        assert!(nodal.max_abs_diff(bg.tbar_node()).unwrap() < 1e-14);
    }
}
