//! Pointwise G2 / Spin(7) linear algebra for the flat metric on R^7.
//!
//! Vectors live in the orthonormal frame e_1..e_7 (indices 0..7 in code),
//! spinors in the real spin module R^8 realized on the octonions, with the
//! distinguished unit spinor psī = (1, 0, ..., 0).

mod forms;
mod tables;

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use forms::{
    hodge3, hodge4, interior3, interior4, lex2, lex3, lex4, permutation_sign, wedge11, wedge21,
    wedge31, FourForm, ThreeForm, TwoForm,
};
pub use tables::{
    CliffordRealization, IdentityFailure, SignedTerm, StructureTables, CONTRACTION_K,
    STANDARD_PHI_TERMS,
};

pub const DIM: usize = 7;
pub const SPIN_DIM: usize = 8;

/// Tolerance on |psi|^2 - 1 accepted by operations that require unit spinors.
pub const UNIT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec7(pub [f64; 7]);

impl Vec7 {
    pub const fn zero() -> Self {
        Self([0.0; 7])
    }

    pub fn basis(a: usize) -> Self {
        let mut v = [0.0; 7];
        v[a] = 1.0;
        Self(v)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Spinor8(pub [f64; 8]);

impl Spinor8 {
    pub const fn zero() -> Self {
        Self([0.0; 8])
    }

    /// The distinguished unit spinor psī.
    pub const fn reference() -> Self {
        Self([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn normalized(&self) -> Self {
        *self * (1.0 / self.norm())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn ensure_unit(&self, tol: f64) -> Result<()> {
        let n = self.norm_sq();
        if (n - 1.0).abs() > tol || !n.is_finite() {
            return Err(Error::NotUnit { norm_sq: n });
        }
        Ok(())
    }
}

/// A (0,2)-tensor T_ab with no symmetry assumed; row `a` is T(e_a, .).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tensor2(pub [[f64; 7]; 7]);

impl Tensor2 {
    pub const fn zero() -> Self {
        Self([[0.0; 7]; 7])
    }

    pub fn identity() -> Self {
        let mut t = Self::zero();
        for a in 0..DIM {
            t.0[a][a] = 1.0;
        }
        t
    }

    /// T(e_a) as a vector: the b-component is T_ab.
    pub fn row(&self, a: usize) -> Vec7 {
        Vec7(self.0[a])
    }

    /// T(X, Y) = X^a T_ab Y^b.
    pub fn pair(&self, x: &Vec7, y: &Vec7) -> f64 {
        let mut acc = 0.0;
        for a in 0..DIM {
            if x.0[a] == 0.0 {
                continue;
            }
            for b in 0..DIM {
                acc += x.0[a] * self.0[a][b] * y.0[b];
            }
        }
        acc
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zero();
        for a in 0..DIM {
            for b in 0..DIM {
                t.0[a][b] = self.0[b][a];
            }
        }
        t
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().flatten().map(|x| x * x).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

macro_rules! vector_ops {
    ($t:ty, $n:expr) => {
        impl Add for $t {
            type Output = Self;
            fn add(mut self, rhs: Self) -> Self {
                self += rhs;
                self
            }
        }

        impl AddAssign for $t {
            fn add_assign(&mut self, rhs: Self) {
                for i in 0..$n {
                    self.0[i] += rhs.0[i];
                }
            }
        }

        impl Sub for $t {
            type Output = Self;
            fn sub(mut self, rhs: Self) -> Self {
                self -= rhs;
                self
            }
        }

        impl SubAssign for $t {
            fn sub_assign(&mut self, rhs: Self) {
                for i in 0..$n {
                    self.0[i] -= rhs.0[i];
                }
            }
        }

        impl Neg for $t {
            type Output = Self;
            fn neg(self) -> Self {
                self * -1.0
            }
        }

        impl Mul<f64> for $t {
            type Output = Self;
            fn mul(mut self, s: f64) -> Self {
                for i in 0..$n {
                    self.0[i] *= s;
                }
                self
            }
        }

        impl Index<usize> for $t {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }

        impl IndexMut<usize> for $t {
            fn index_mut(&mut self, i: usize) -> &mut f64 {
                &mut self.0[i]
            }
        }
    };
}

vector_ops!(Vec7, 7);
vector_ops!(Spinor8, 8);

impl Add for Tensor2 {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for a in 0..DIM {
            for b in 0..DIM {
                self.0[a][b] += rhs.0[a][b];
            }
        }
        self
    }
}

impl Sub for Tensor2 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + rhs * -1.0
    }
}

impl Mul<f64> for Tensor2 {
    type Output = Self;
    fn mul(mut self, s: f64) -> Self {
        for row in self.0.iter_mut() {
            for x in row.iter_mut() {
                *x *= s;
            }
        }
        self
    }
}

/// Clifford multiplication X · s = Σ X^a γ_a s with the standard tables.
pub fn clifford_mul(x: &Vec7, s: &Spinor8) -> Spinor8 {
    StructureTables::standard().clifford_mul(x, s)
}

/// Clifford multiplication by the basis vector e_a.
pub fn clifford_basis(a: usize, s: &Spinor8) -> Spinor8 {
    StructureTables::standard().gamma_apply(a, s)
}

/// The reference cross product X ×̄ Y of φ₀.
pub fn cross(x: &Vec7, y: &Vec7) -> Vec7 {
    StructureTables::standard().cross(x, y)
}

/// The reference three-form φ₀.
pub fn phi0() -> &'static ThreeForm {
    &StructureTables::standard().phi
}

/// ⋆φ₀ for the calibrated orientation.
pub fn star_phi0() -> &'static FourForm {
    &StructureTables::standard().star_phi
}

/// The three-form φ(X, Y, Z) = (X·Y·Z·ψ, ψ) of a unit spinor.
pub fn spinor_to_threeform(psi: &Spinor8) -> Result<ThreeForm> {
    psi.ensure_unit(UNIT_TOLERANCE)?;
    Ok(threeform_of(psi))
}

/// Same as [`spinor_to_threeform`] without the unit-length check; the
/// result scales with |ψ|².
pub fn threeform_of(psi: &Spinor8) -> ThreeForm {
    let t = StructureTables::standard();
    let mut out = ThreeForm::zero();
    for (r, &[a, b, c]) in lex3().iter().enumerate() {
        let s = t.gamma_apply(a, &t.gamma_apply(b, &t.gamma_apply(c, psi)));
        out.0[r] = s.dot(psi);
    }
    out
}

/// Hodge star of a three-form with the calibrated orientation.
pub fn hodge_star_3(phi: &ThreeForm) -> FourForm {
    hodge3(phi, StructureTables::standard().orientation)
}

/// Inverse Hodge star (four-forms to three-forms).
pub fn hodge_star_4(psi: &FourForm) -> ThreeForm {
    hodge4(psi, StructureTables::standard().orientation)
}

/// ⋆(φ ∧ X).
pub fn star_of_wedge(phi: &ThreeForm, x: &Vec7) -> ThreeForm {
    hodge_star_4(&wedge31(phi, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut impl Rng) -> Vec7 {
        Vec7(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
    }

    fn random_spinor(rng: &mut impl Rng) -> Spinor8 {
        Spinor8(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn zero_vector_annihilates_spinors() {
        let s = Spinor8([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(clifford_mul(&Vec7::zero(), &s), Spinor8::zero());
    }

    #[test]
    fn unit_basis_vector_squares_to_minus_one() {
        let s = Spinor8([1.0, -2.0, 0.5, 4.0, 0.0, 6.0, -7.0, 8.0]);
        for a in 0..DIM {
            let e = Vec7::basis(a);
            assert_eq!(clifford_mul(&e, &clifford_mul(&e, &s)), -s);
        }
    }

    #[test]
    fn clifford_square_of_unit_vector_is_minus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x = random_vec(&mut rng);
            let x = x * (1.0 / x.norm());
            let s = random_spinor(&mut rng);
            let xx = clifford_mul(&x, &clifford_mul(&x, &s));
            let err = (xx + s).0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err < 1e-15, "err {err}");
        }
    }

    #[test]
    fn e1_cross_e2_is_e3() {
        assert_eq!(cross(&Vec7::basis(0), &Vec7::basis(1)), Vec7::basis(2));
        let x = Vec7([0.1, 0.2, -0.3, 0.4, 0.0, 1.0, 2.0]);
        assert!(cross(&x, &x).max_abs() < 1e-15);
    }

    #[test]
    fn e1_e2_on_reference_spinor() {
        let psi = Spinor8::reference();
        let lhs = clifford_basis(0, &clifford_basis(1, &psi));
        let rhs = -clifford_mul(&cross(&Vec7::basis(0), &Vec7::basis(1)), &psi);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn double_cross_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let u = random_vec(&mut rng);
            let v = random_vec(&mut rng);
            let vu = cross(&v, &u);
            let lhs = cross(&vu, &u).dot(&v);
            assert!((lhs + vu.norm_sq()).abs() < 1e-14);
        }
    }

    #[test]
    fn reference_spinor_gives_phi0() {
        let phi = spinor_to_threeform(&Spinor8::reference()).unwrap();
        assert_eq!(&phi, phi0());
        let phi_neg = spinor_to_threeform(&-Spinor8::reference()).unwrap();
        assert_eq!(&phi_neg, phi0());
        assert_eq!(phi0().norm_sq(), 7.0);
    }

    #[test]
    fn non_unit_spinor_is_rejected() {
        let s = Spinor8::reference() * 1.1;
        assert!(matches!(spinor_to_threeform(&s), Err(Error::NotUnit { .. })));
    }

    #[test]
    fn hodge_round_trip_and_zero() {
        assert_eq!(hodge_star_4(&hodge_star_3(phi0())), *phi0());
        assert_eq!(hodge_star_3(&ThreeForm::zero()), FourForm::zero());
    }

    #[test]
    fn star_of_wedge_is_interior_of_star() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let u = random_vec(&mut rng);
            let lhs = star_of_wedge(phi0(), &u);
            let rhs = interior4(&u, star_phi0());
            assert!(lhs.max_abs_diff(&rhs) < 1e-14);
        }
    }

    #[test]
    fn clifford_is_isometry_onto_complement() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let psi = Spinor8::reference();
        for _ in 0..100 {
            let x = random_vec(&mut rng);
            let xs = clifford_mul(&x, &psi);
            assert!((xs.norm() - x.norm()).abs() < 1e-14);
            assert!(xs.dot(&psi).abs() < 1e-15);
        }
    }
}
