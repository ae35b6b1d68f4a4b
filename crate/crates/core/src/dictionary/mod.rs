//! Spinors, three-forms and torsion in one isometric class.
//!
//! A unit spinor over a background ψ̄ is written ψ = U·ψ̄ + uψ̄ with
//! |U|² + u² = 1. This module turns such pairs into three-forms, recovers
//! the metric of a three-form through its stable-form density, and computes
//! the full torsion T, defined by ∇_aφ_bcd = 2T_a^e(⋆φ)_ebcd, both from the
//! pair and directly from a sampled three-form field.

mod stable;

use serde::{Deserialize, Serialize};

use crate::algebra::{
    clifford_mul, hodge_star_3, interior3, star_of_wedge, wedge21, Spinor8, StructureTables,
    Tensor2, ThreeForm, Vec7, CONTRACTION_K, DIM, SPIN_DIM,
};
use crate::error::{Error, Result};
use crate::grid::{
    div_tensor2, DiffScheme, Field, Order, ScalarField, Tensor2Field, ThreeFormField, Vec7Field,
};

pub use stable::{metric_deviation, stable_form_analysis, StableFormReport};

/// Tolerance on |U|² + u² − 1.
pub const PAIR_TOLERANCE: f64 = 1e-10;

/// Largest metric deviation accepted by [`torsion_oracle`].
pub const ORACLE_METRIC_TOLERANCE: f64 = 1e-8;

/// Coordinates (U, u) of ψ = U·ψ̄ + uψ̄.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinorPair {
    pub big: Vec7,
    pub small: f64,
}

impl SpinorPair {
    pub fn new(big: Vec7, small: f64) -> Result<Self> {
        let residual = big.norm_sq() + small * small - 1.0;
        if residual.abs() > PAIR_TOLERANCE || !residual.is_finite() {
            return Err(Error::PairConstraint { residual });
        }
        Ok(Self { big, small })
    }

    /// The chart u = +√(1 − |U|²).
    pub fn from_chart(big: Vec7) -> Result<Self> {
        let n = big.norm_sq();
        if !(n < 1.0) {
            return Err(Error::OutsideChart { u: 1.0 - n });
        }
        Ok(Self {
            big,
            small: (1.0 - n).sqrt(),
        })
    }

    pub fn identity() -> Self {
        Self {
            big: Vec7::zero(),
            small: 1.0,
        }
    }

    pub fn antipode(&self) -> Self {
        Self {
            big: -self.big,
            small: -self.small,
        }
    }

    /// U·ψ̄ + uψ̄ for the given background spinor.
    pub fn to_spinor_over(&self, background: &Spinor8) -> Spinor8 {
        clifford_mul(&self.big, background) + *background * self.small
    }

    pub fn to_spinor(&self) -> Spinor8 {
        self.to_spinor_over(&Spinor8::reference())
    }

    /// Coordinates of ψ over ψ̄: U_a = (ψ, e_a·ψ̄), u = (ψ, ψ̄).
    pub fn from_spinor_over(psi: &Spinor8, background: &Spinor8) -> Self {
        let t = StructureTables::standard();
        Self {
            big: Vec7(std::array::from_fn(|a| psi.dot(&t.gamma_apply(a, background)))),
            small: psi.dot(background),
        }
    }
}

/// Φ(ψ) for ψ = U·ψ̄ + uψ̄:
/// (u² − |U|²)φ̄ + 2u⋆(φ̄ ∧ U) + 2(U ⨼ φ̄) ∧ U.
pub fn phi_from_uu(p: &SpinorPair, phibar: &ThreeForm) -> Result<ThreeForm> {
    SpinorPair::new(p.big, p.small)?;
    Ok(phi_from_uu_unchecked(p, phibar))
}

pub(crate) fn phi_from_uu_unchecked(p: &SpinorPair, phibar: &ThreeForm) -> ThreeForm {
    let (big, u) = (&p.big, p.small);
    *phibar * (u * u - big.norm_sq())
        + star_of_wedge(phibar, big) * (2.0 * u)
        + wedge21(&interior3(big, phibar), big) * 2.0
}

/// The vector (A·ψ̄ + aψ̄, e_b·(U·ψ̄ + uψ̄)) indexed by b, which equals
/// uA − aU + A ×̄ U with the cross product of φ̄.
#[inline]
pub fn pair_pairing(a_vec: &Vec7, a: f64, p: &SpinorPair, phibar: &ThreeForm) -> Vec7 {
    *a_vec * p.small - p.big * a + phibar.cross(a_vec, &p.big)
}

/// Pointwise torsion of ψ = U·ψ̄ + uψ̄ from first derivatives of (U, u) and
/// the background torsion T̄ of ψ̄:
/// T(X,Y) = u g(∇_X U, Y) − (∇_X u) g(U,Y) + φ̄(∇_X U, U, Y)
///        + (u² − |U|²) T̄(X,Y) + 2T̄(X,U) g(U,Y) − 2u φ̄(U, T̄(X), Y).
pub fn torsion_from_uu_point(
    p: &SpinorPair,
    grad_big: &Tensor2,
    grad_small: &Vec7,
    tbar: &Tensor2,
    phibar: &ThreeForm,
) -> Tensor2 {
    let (big, u) = (&p.big, p.small);
    let mut t = Tensor2::zero();
    let w = u * u - big.norm_sq();
    for a in 0..DIM {
        let mut row = pair_pairing(&grad_big.row(a), grad_small[a], p, phibar);
        let ta = tbar.row(a);
        if ta.max_abs() != 0.0 {
            row += ta * w + *big * (2.0 * ta.dot(big)) - phibar.cross(big, &ta) * (2.0 * u);
        }
        t.0[a] = row.0;
    }
    t
}

/// Field version of [`torsion_from_uu_point`] from supplied gradients.
pub fn torsion_from_uu(
    big: &Vec7Field,
    small: &ScalarField,
    grad_big: &Tensor2Field,
    grad_small: &Vec7Field,
    tbar: &Tensor2Field,
    phibar: &ThreeFormField,
) -> Result<Tensor2Field> {
    let grid = *big.grid();
    for g in [
        small.grid(),
        grad_big.grid(),
        grad_small.grid(),
        tbar.grid(),
        phibar.grid(),
    ] {
        grid.ensure_same(g)?;
    }
    let residual = big
        .values()
        .iter()
        .zip(small.values())
        .map(|(v, s)| (v.norm_sq() + s * s - 1.0).abs())
        .fold(0.0, f64::max);
    if residual > PAIR_TOLERANCE {
        return Err(Error::PairConstraint { residual });
    }
    Ok(Field::from_fn(grid, |i| {
        let p = SpinorPair {
            big: big.values()[i],
            small: small.values()[i],
        };
        torsion_from_uu_point(
            &p,
            &grad_big.values()[i],
            &grad_small.values()[i],
            &tbar.values()[i],
            &phibar.values()[i],
        )
    }))
}

/// Torsion from (U, u) with central differences of the requested order.
pub fn torsion_from_uu_central(
    big: &Vec7Field,
    small: &ScalarField,
    tbar: &Tensor2Field,
    phibar: &ThreeFormField,
    order: Order,
) -> Result<Tensor2Field> {
    let gb = crate::grid::grad_vec(big, DiffScheme::Central, order);
    let gs = crate::grid::grad_scalar(small, DiffScheme::Central, order);
    torsion_from_uu(big, small, &gb, &gs, tbar, phibar)
}

/// Torsion on the midpoint i + ½e_a from neighbouring pairs.
///
/// `p`, `p_next` are the pairs at i and i + e_a over the background spinors
/// ψ̄_i and ψ̄_{i+e_a}; `overlap` is (ψ̄_{i+e_a}, ψ̄_i) and `tau` the background
/// edge torsion, so that ψ̄_{i+e_a} = overlap·ψ̄_i + h τ·ψ̄_i. The result is
/// (ψ_{i+e_a} − ψ_i, e_b·ψ_i)/h exactly.
#[inline]
pub fn edge_torsion_row(
    p: &SpinorPair,
    p_next: &SpinorPair,
    h: f64,
    overlap: f64,
    tau: &Vec7,
    phibar: &ThreeForm,
) -> Vec7 {
    let inv_h = 1.0 / h;
    let d_big = (p_next.big - p.big) * inv_h;
    let d_small = (p_next.small - p.small) * inv_h;
    let mut row = pair_pairing(&d_big, d_small, p, phibar) * overlap;
    if tau.max_abs() != 0.0 {
        let a_vec = *tau * p_next.small - phibar.cross(&p_next.big, tau);
        row += pair_pairing(&a_vec, -p_next.big.dot(tau), p, phibar);
    }
    row
}

/// Staggered torsion straight from a unit spinor field:
/// T_ab(i + ½e_a) = (ψ_{i+e_a} − ψ_i, e_b·ψ_i)/h_a.
pub fn spinor_edge_torsion(psi: &Field<Spinor8>) -> Tensor2Field {
    let grid = *psi.grid();
    let t = StructureTables::standard();
    Field::from_fn_with_layout(grid, crate::grid::Layout::Edge, |i| {
        let s = &psi.values()[i];
        let mut out = Tensor2::zero();
        for a in grid.active_axes() {
            let next = &psi.values()[grid.neighbor(i, a, 1)];
            let d = (*next - *s) * (1.0 / grid.spacing(a));
            for b in 0..DIM {
                out.0[a][b] = d.dot(&t.gamma_apply(b, s));
            }
        }
        out
    })
}

/// Recovers T from a sampled three-form by contracting the defining relation:
/// T_af = (1/2K) (∇_aφ_bcd)(⋆φ)_fbcd, summed over ordered (b, c, d).
/// Every sample must induce the flat metric.
pub fn torsion_oracle(phi: &ThreeFormField, order: Order) -> Result<Tensor2Field> {
    let grid = *phi.grid();
    let deviation = phi
        .values()
        .iter()
        .map(metric_deviation)
        .fold(0.0, f64::max);
    if !(deviation <= ORACLE_METRIC_TOLERANCE) {
        return Err(Error::IncompatibleForm { deviation });
    }
    let derivs: Vec<ThreeFormField> = (0..DIM).map(|a| phi.partial(a, order)).collect();
    // Each sorted triple stands for its 6 orderings.
    let scale = 6.0 / (2.0 * CONTRACTION_K);
    let triples = ThreeForm::sorted_indices();
    Ok(Field::from_fn(grid, |i| {
        let star = hodge_star_3(&phi.values()[i]);
        let mut t = Tensor2::zero();
        for f in 0..DIM {
            let column: Vec<f64> = triples
                .iter()
                .map(|&[b, c, d]| star.get([f, b, c, d]))
                .collect();
            for a in grid.active_axes() {
                let dphi = &derivs[a].values()[i];
                t.0[a][f] = scale * dphi.0.iter().zip(&column).map(|(x, y)| x * y).sum::<f64>();
            }
        }
        t
    }))
}

/// (div T)_b = ∂_a T_ab.
pub fn divergence_t(t: &Tensor2Field, order: Order) -> Vec7Field {
    div_tensor2(t, order)
}

/// Three-form field Φ(ψ) of a unit spinor field.
pub fn threeform_field(psi: &Field<Spinor8>) -> Result<ThreeFormField> {
    for s in psi.values() {
        s.ensure_unit(1e-10)?;
    }
    Ok(psi.map(crate::algebra::threeform_of))
}

/// Orthonormal frame {ψ, e_1·ψ, …, e_7·ψ} of the spin module at ψ.
pub fn spinor_frame(psi: &Spinor8) -> [Spinor8; SPIN_DIM] {
    let t = StructureTables::standard();
    std::array::from_fn(|k| if k == 0 { *psi } else { t.gamma_apply(k - 1, psi) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{phi0, spinor_to_threeform};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pair(rng: &mut impl Rng) -> SpinorPair {
        let s = Spinor8(std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).normalized();
        SpinorPair::from_spinor_over(&s, &Spinor8::reference())
    }

    #[test]
    fn identity_pair_gives_background() {
        assert_eq!(phi_from_uu(&SpinorPair::identity(), phi0()).unwrap(), *phi0());
        let neg = SpinorPair::new(Vec7::zero(), -1.0).unwrap();
        assert_eq!(phi_from_uu(&neg, phi0()).unwrap(), *phi0());
    }

    #[test]
    fn constraint_is_enforced() {
        assert!(SpinorPair::new(Vec7::basis(0), 0.5).is_err());
        assert!(SpinorPair::from_chart(Vec7::basis(0) * 1.2).is_err());
    }

    #[test]
    fn spinor_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let p = random_pair(&mut rng);
            let q = SpinorPair::from_spinor_over(&p.to_spinor(), &Spinor8::reference());
            assert!((p.big - q.big).max_abs() < 1e-15);
            assert!((p.small - q.small).abs() < 1e-15);
        }
    }

    #[test]
    fn closed_form_matches_spinor_form_for_small_u() {
        let p = SpinorPair::from_chart(Vec7::basis(0) * 1e-3).unwrap();
        let a = phi_from_uu(&p, phi0()).unwrap();
        let b = spinor_to_threeform(&p.to_spinor()).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn pairing_matches_spinor_inner_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let t = StructureTables::standard();
        for _ in 0..50 {
            let p = random_pair(&mut rng);
            let av = Vec7(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
            let a: f64 = rng.gen_range(-1.0..1.0);
            let chi = SpinorPair { big: av, small: a }.to_spinor();
            let psi = p.to_spinor();
            let lhs = pair_pairing(&av, a, &p, phi0());
            for b in 0..DIM {
                assert!((lhs[b] - chi.dot(&t.gamma_apply(b, &psi))).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn torsion_of_identity_pair_is_background() {
        let mut tbar = Tensor2::zero();
        tbar.0[2][5] = 0.3;
        tbar.0[0][1] = -1.0;
        let t = torsion_from_uu_point(
            &SpinorPair::identity(),
            &Tensor2::zero(),
            &Vec7::zero(),
            &tbar,
            phi0(),
        );
        assert_eq!(t, tbar);
    }

    #[test]
    fn torsion_is_projective() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let p = random_pair(&mut rng);
            let gb = Tensor2(std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))));
            let gs = Vec7(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
            let tb = Tensor2(std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))));
            let t1 = torsion_from_uu_point(&p, &gb, &gs, &tb, phi0());
            let t2 = torsion_from_uu_point(&p.antipode(), &(gb * -1.0), &(gs * -1.0), &tb, phi0());
            assert!(t1.max_abs_diff(&t2) < 1e-14);
        }
    }
}
