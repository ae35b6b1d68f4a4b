//! Structure constants of the reference G2 structure and its spin module.
//!
//! Everything is generated from the component list of φ₀ and then
//! calibrated: the orientation is chosen so that
//! ⋆φ(X,Y,Z,W) = φ(X,Y,Z×W) − g(X,Z)g(Y,W) + g(X,W)g(Y,Z), and the Clifford
//! matrices are octonion right (or, failing that, left) multiplications
//! chosen so that X·Y·ψ̄ = −(X×Y)·ψ̄ − g(X,Y)ψ̄. All table entries are in
//! {−1, 0, 1} and the identity checks below run in integer arithmetic.

use std::sync::OnceLock;

use serde::Serialize;

use super::forms::{hodge3, lex3, lex4, FourForm, ThreeForm};
use super::{Spinor8, Vec7, DIM, SPIN_DIM};

/// φ₀ = e¹²³ + e¹⁴⁵ + e¹⁶⁷ + e²⁴⁶ − e²⁵⁷ − e³⁴⁷ − e³⁵⁶ (zero-based indices).
pub const STANDARD_PHI_TERMS: [([usize; 3], i8); 7] = [
    ([0, 1, 2], 1),
    ([0, 3, 4], 1),
    ([0, 5, 6], 1),
    ([1, 3, 5], 1),
    ([1, 4, 6], -1),
    ([2, 3, 6], -1),
    ([2, 4, 5], -1),
];

/// (⋆φ)_{ebcd} (⋆φ)_{fbcd} = K δ_ef, summed over all ordered (b, c, d).
pub const CONTRACTION_K: f64 = 24.0;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SignedTerm {
    pub indices: Vec<usize>,
    pub sign: i8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CliffordRealization {
    /// γ_a s = s · e_a in the octonions.
    OctonionRight,
    /// γ_a s = e_a · s in the octonions.
    OctonionLeft,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityFailure {
    pub identity: String,
    pub inputs: String,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StructureTables {
    pub phi_terms: Vec<SignedTerm>,
    pub star_phi_terms: Vec<SignedTerm>,
    /// e_a × e_b = sign · e_c stored as (c, sign); sign 0 on the diagonal.
    pub cross_table: [[(usize, i8); 7]; 7],
    /// γ_a[i][j], the Clifford matrices.
    pub gamma: [[[i8; 8]; 8]; 7],
    pub orientation: f64,
    pub realization: CliffordRealization,
    #[serde(skip)]
    pub phi: ThreeForm,
    #[serde(skip)]
    pub star_phi: FourForm,
    #[serde(skip)]
    gamma_perm: [[(usize, f64); 8]; 7],
}

fn dense_phi(terms: &[([usize; 3], i8)]) -> ThreeForm {
    let mut phi = ThreeForm::zero();
    for (idx, s) in terms {
        phi.set(*idx, *s as f64);
    }
    phi
}

fn int3(phi: &ThreeForm) -> Vec<i64> {
    let mut d = vec![0i64; 343];
    for a in 0..DIM {
        for b in 0..DIM {
            for c in 0..DIM {
                d[(a * 7 + b) * 7 + c] = phi.get([a, b, c]) as i64;
            }
        }
    }
    d
}

fn int4(psi: &FourForm) -> Vec<i64> {
    psi.to_dense().iter().map(|x| *x as i64).collect()
}

/// Octonion product of basis elements e_i e_j (e_0 = 1) for the algebra
/// whose imaginary part has cross product phi: returns (k, sign).
fn octonion_basis_product(phi: &[i64], i: usize, j: usize) -> (usize, i64) {
    match (i, j) {
        (0, _) => (j, 1),
        (_, 0) => (i, 1),
        _ if i == j => (0, -1),
        _ => {
            let (a, b) = (i - 1, j - 1);
            for c in 0..DIM {
                let s = phi[(a * 7 + b) * 7 + c];
                if s != 0 {
                    return (c + 1, s);
                }
            }
            // Not a G2 form; report a zero product so calibration fails.
            (0, 0)
        }
    }
}

fn gamma_from_octonions(phi: &[i64], realization: CliffordRealization) -> [[[i8; 8]; 8]; 7] {
    let mut gamma = [[[0i8; 8]; 8]; 7];
    for a in 0..DIM {
        for j in 0..SPIN_DIM {
            let (k, s) = match realization {
                CliffordRealization::OctonionRight => octonion_basis_product(phi, j, a + 1),
                CliffordRealization::OctonionLeft => octonion_basis_product(phi, a + 1, j),
            };
            gamma[a][k][j] = s as i8;
        }
    }
    gamma
}

fn gamma_times_basis(gamma: &[[[i8; 8]; 8]; 7], a: usize, v: &[i64; 8]) -> [i64; 8] {
    let mut out = [0i64; 8];
    for i in 0..SPIN_DIM {
        for j in 0..SPIN_DIM {
            out[i] += gamma[a][i][j] as i64 * v[j];
        }
    }
    out
}

impl StructureTables {
    /// The calibrated tables for φ₀; built once.
    pub fn standard() -> &'static StructureTables {
        static TABLES: OnceLock<StructureTables> = OnceLock::new();
        TABLES.get_or_init(|| {
            StructureTables::calibrated(&STANDARD_PHI_TERMS)
                .unwrap_or_else(|f| panic!("structure table calibration failed: {f:?}"))
        })
    }

    /// Builds tables from a three-form component list, choosing the orientation
    /// and Clifford realization that satisfy the calibration identities.
    pub fn calibrated(
        terms: &[([usize; 3], i8)],
    ) -> std::result::Result<StructureTables, Vec<IdentityFailure>> {
        let phi = dense_phi(terms);
        let mut failures = Vec::new();
        for orientation in [1.0, -1.0] {
            for realization in [
                CliffordRealization::OctonionRight,
                CliffordRealization::OctonionLeft,
            ] {
                let gamma = gamma_from_octonions(&int3(&phi), realization);
                let t = StructureTables::from_parts(phi, orientation, gamma, realization);
                let f = t.verify_exact();
                if f.is_empty() {
                    return Ok(t);
                }
                failures = f;
            }
        }
        Err(failures)
    }

    /// Assembles tables from explicit parts without calibration.
    pub fn from_parts(
        phi: ThreeForm,
        orientation: f64,
        gamma: [[[i8; 8]; 8]; 7],
        realization: CliffordRealization,
    ) -> StructureTables {
        let star_phi = hodge3(&phi, orientation);
        let phi_terms = lex3()
            .iter()
            .zip(phi.0.iter())
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| SignedTerm {
                indices: i.to_vec(),
                sign: *v as i8,
            })
            .collect();
        let star_phi_terms = lex4()
            .iter()
            .zip(star_phi.0.iter())
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| SignedTerm {
                indices: i.to_vec(),
                sign: *v as i8,
            })
            .collect();
        let mut cross_table = [[(0usize, 0i8); 7]; 7];
        for a in 0..DIM {
            for b in 0..DIM {
                for c in 0..DIM {
                    let v = phi.get([a, b, c]);
                    if v != 0.0 {
                        cross_table[a][b] = (c, v as i8);
                    }
                }
            }
        }
        let mut gamma_perm = [[(0usize, 0.0); 8]; 7];
        for a in 0..DIM {
            for j in 0..SPIN_DIM {
                for i in 0..SPIN_DIM {
                    if gamma[a][i][j] != 0 {
                        gamma_perm[a][j] = (i, gamma[a][i][j] as f64);
                    }
                }
            }
        }
        StructureTables {
            phi_terms,
            star_phi_terms,
            cross_table,
            gamma,
            orientation,
            realization,
            phi,
            star_phi,
            gamma_perm,
        }
    }

    /// A copy with φ replaced but ⋆φ and the Clifford matrices kept, used as a
    /// negative control for the calibration checks.
    pub fn with_replaced_phi(&self, terms: &[([usize; 3], i8)]) -> StructureTables {
        let mut t =
            StructureTables::from_parts(dense_phi(terms), self.orientation, self.gamma, self.realization);
        t.star_phi = self.star_phi;
        t.star_phi_terms = self.star_phi_terms.clone();
        t
    }

    /// γ_a s.
    #[inline]
    pub fn gamma_apply(&self, a: usize, s: &Spinor8) -> Spinor8 {
        let mut out = [0.0; 8];
        for (j, &(i, sign)) in self.gamma_perm[a].iter().enumerate() {
            out[i] += sign * s.0[j];
        }
        Spinor8(out)
    }

    #[inline]
    pub fn clifford_mul(&self, x: &Vec7, s: &Spinor8) -> Spinor8 {
        let mut out = [0.0; 8];
        for a in 0..DIM {
            let xa = x.0[a];
            if xa == 0.0 {
                continue;
            }
            for (j, &(i, sign)) in self.gamma_perm[a].iter().enumerate() {
                out[i] += sign * xa * s.0[j];
            }
        }
        Spinor8(out)
    }

    #[inline]
    pub fn cross(&self, x: &Vec7, y: &Vec7) -> Vec7 {
        let mut out = [0.0; 7];
        for a in 0..DIM {
            if x.0[a] == 0.0 {
                continue;
            }
            for b in 0..DIM {
                let (c, s) = self.cross_table[a][b];
                if s != 0 {
                    out[c] += s as f64 * x.0[a] * y.0[b];
                }
            }
        }
        Vec7(out)
    }

    /// Runs every exact identity on the tables; an empty list means all pass.
    pub fn verify_exact(&self) -> Vec<IdentityFailure> {
        let mut failures = Vec::new();
        let mut fail = |identity: &str, inputs: String, residual: i64| {
            failures.push(IdentityFailure {
                identity: identity.to_string(),
                inputs,
                residual: residual as f64,
            })
        };
        let phi = int3(&self.phi);
        let star = int4(&self.star_phi);
        let g = &self.gamma;

        let norm: i64 = self.phi.0.iter().map(|x| (*x as i64) * (*x as i64)).sum();
        if norm != 7 {
            fail("|phi|^2 = 7", String::new(), norm - 7);
        }

        for a in 0..DIM {
            for i in 0..SPIN_DIM {
                for j in 0..SPIN_DIM {
                    if g[a][i][j] != -g[a][j][i] {
                        fail("gamma antisymmetric", format!("a={a} i={i} j={j}"), 1);
                    }
                }
            }
            for b in 0..DIM {
                for i in 0..SPIN_DIM {
                    for k in 0..SPIN_DIM {
                        let mut acc = 0i64;
                        for j in 0..SPIN_DIM {
                            acc += g[a][i][j] as i64 * g[b][j][k] as i64
                                + g[b][i][j] as i64 * g[a][j][k] as i64;
                        }
                        let expected = if a == b && i == k { -2 } else { 0 };
                        if acc != expected {
                            fail(
                                "clifford relation",
                                format!("a={a} b={b} i={i} k={k}"),
                                acc - expected,
                            );
                        }
                    }
                }
            }
        }

        let psi = {
            let mut v = [0i64; 8];
            v[0] = 1;
            v
        };
        for a in 0..DIM {
            let ga = gamma_times_basis(g, a, &psi);
            if ga[0] != 0 {
                fail("clifford isometry onto psi-complement", format!("a={a}"), ga[0]);
            }
            for b in 0..DIM {
                let gb = gamma_times_basis(g, b, &psi);
                let ip: i64 = ga.iter().zip(gb.iter()).map(|(x, y)| x * y).sum();
                if ip != (a == b) as i64 {
                    fail("clifford isometry onto psi-complement", format!("a={a} b={b}"), ip);
                }
                // e_a·e_b·ψ̄ + (e_a×e_b)·ψ̄ + δ_ab ψ̄ = 0.
                let mut lhs = gamma_times_basis(g, a, &gb);
                for c in 0..DIM {
                    let s = phi[(a * 7 + b) * 7 + c];
                    if s != 0 {
                        let gc = gamma_times_basis(g, c, &psi);
                        for i in 0..SPIN_DIM {
                            lhs[i] += s * gc[i];
                        }
                    }
                }
                if a == b {
                    lhs[0] += 1;
                }
                if let Some(r) = lhs.iter().find(|x| **x != 0) {
                    fail("X.Y.psi = -(X x Y).psi - g(X,Y) psi", format!("a={a} b={b}"), *r);
                }
                for c in 0..DIM {
                    let v = gamma_times_basis(g, a, &gamma_times_basis(g, b, &gamma_times_basis(g, c, &psi)));
                    let val = v[0];
                    let expected = phi[(a * 7 + b) * 7 + c];
                    if val != expected {
                        fail(
                            "phi(X,Y,Z) = (X.Y.Z.psi, psi)",
                            format!("a={a} b={b} c={c}"),
                            val - expected,
                        );
                    }
                }
            }
        }

        for a in 0..DIM {
            for b in 0..DIM {
                for c in 0..DIM {
                    for d in 0..DIM {
                        let mut r = star[((a * 7 + b) * 7 + c) * 7 + d];
                        for k in 0..DIM {
                            r -= phi[(a * 7 + b) * 7 + k] * phi[(c * 7 + d) * 7 + k];
                        }
                        r += (a == c && b == d) as i64 - (a == d && b == c) as i64;
                        if r != 0 {
                            fail(
                                "*phi(X,Y,Z,W) = phi(X,Y,ZxW) - g(X,Z)g(Y,W) + g(X,W)g(Y,Z)",
                                format!("a={a} b={b} c={c} d={d}"),
                                r,
                            );
                        }
                    }
                }
            }
        }

        for e in 0..DIM {
            for f in 0..DIM {
                let mut acc = 0i64;
                for r in 0..343 {
                    acc += star[e * 343 + r] * star[f * 343 + r];
                }
                let expected = if e == f { CONTRACTION_K as i64 } else { 0 };
                if acc != expected {
                    fail("*phi contraction = K delta", format!("e={e} f={f}"), acc - expected);
                }
            }
        }

        let back = super::forms::hodge4(&self.star_phi, self.orientation);
        if back != self.phi {
            fail("** = id on three-forms", String::new(), 1);
        }
        failures
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_tables_pass_all_exact_checks() {
        let t = StructureTables::standard();
        assert!(t.verify_exact().is_empty());
        assert_eq!(t.orientation, 1.0);
        assert_eq!(t.realization, CliffordRealization::OctonionRight);
        assert_eq!(t.phi_terms.len(), 7);
        assert_eq!(t.star_phi_terms.len(), 7);
    }

    #[test]
    fn star_phi0_components() {
        // ⋆φ₀ = e⁴⁵⁶⁷ + e²³⁶⁷ + e²³⁴⁵ + e¹³⁵⁷ − e¹³⁴⁶ − e¹²⁵⁶ − e¹²⁴⁷
        let s = &StructureTables::standard().star_phi;
        let expect = [
            ([3, 4, 5, 6], 1.0),
            ([1, 2, 5, 6], 1.0),
            ([1, 2, 3, 4], 1.0),
            ([0, 2, 4, 6], 1.0),
            ([0, 2, 3, 5], -1.0),
            ([0, 1, 4, 5], -1.0),
            ([0, 1, 3, 6], -1.0),
        ];
        for (idx, v) in expect {
            assert_eq!(s.get(idx), v, "{idx:?}");
        }
        assert_eq!(s.norm_sq(), 7.0);
    }

    #[test]
    fn sign_flipped_phi_fails_calibration() {
        let flipped: Vec<_> = STANDARD_PHI_TERMS.iter().map(|(i, s)| (*i, -s)).collect();
        let bad = StructureTables::standard().with_replaced_phi(&flipped);
        let failures = bad.verify_exact();
        assert!(failures
            .iter()
            .any(|f| f.identity.starts_with("X.Y.psi")));
        assert!(failures.iter().any(|f| f.identity.starts_with("phi(X,Y,Z)")));
    }

    #[test]
    fn contraction_constant_by_enumeration() {
        let star = StructureTables::standard().star_phi.to_dense();
        let mut k = 0.0;
        for r in 0..343 {
            k += star[r] * star[r];
        }
        assert_eq!(k, CONTRACTION_K);
    }
}
