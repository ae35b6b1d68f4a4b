//! Pointwise contraction identities of the torsion used in the variational
//! formulas: T^{ab} T_a^n φ_mnb = 0 and symmetry of T_a^n T^{ap} in (n, p).

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::DIM;
use crate::dictionary::threeform_field;
use crate::error::Result;
use crate::flow::{edge_torsion, Background};
use crate::grid::{Tensor2Field, ThreeFormField, Vec7Field};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    pub points: usize,
    /// max_{i,m} |T^{ab} T_a^n φ_mnb|.
    pub contraction_residual: f64,
    /// max_{i,n,p} |S_np − S_pn| with S_np = T_a^n T^{ap}.
    pub symmetry_residual: f64,
    pub max_torsion: f64,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.contraction_residual.max(self.symmetry_residual)
    }
}

pub fn torsion_identity_checks(t: &Tensor2Field, phi: &ThreeFormField) -> Result<IdentityReport> {
    t.grid().ensure_same(phi.grid())?;
    let (contraction, symmetry) = t
        .values()
        .par_iter()
        .zip(phi.values())
        .map(|(t, phi)| {
            let phi = phi.to_dense();
            let mut s = [[0.0; DIM]; DIM];
            for n in 0..DIM {
                for p in 0..DIM {
                    s[n][p] = (0..DIM).map(|a| t.0[a][n] * t.0[a][p]).sum();
                }
            }
            let mut contraction = 0.0f64;
            for m in 0..DIM {
                let mut acc = 0.0;
                for a in 0..DIM {
                    for n in 0..DIM {
                        for b in 0..DIM {
                            acc += t.0[a][b] * t.0[a][n] * phi[m][n][b];
                        }
                    }
                }
                contraction = contraction.max(acc.abs());
            }
            let mut symmetry = 0.0f64;
            for n in 0..DIM {
                for p in 0..n {
                    symmetry = symmetry.max((s[n][p] - s[p][n]).abs());
                }
            }
            (contraction, symmetry)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    Ok(IdentityReport {
        points: t.len(),
        contraction_residual: contraction,
        symmetry_residual: symmetry,
        max_torsion: t.max_abs(),
    })
}

/// Checks the identities for the staggered torsion of a state, paired with
/// the three-form of the state at the edge base points.
pub fn state_identity_checks(big: &Vec7Field, bg: &Background) -> Result<IdentityReport> {
    let t = edge_torsion(big, bg)?;
    let phi = threeform_field(&bg.spinor_of(big)?)?;
    torsion_identity_checks(&t, &phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{phi0, Tensor2, Vec7};
    use crate::grid::{Field, GridShape};

    #[test]
    fn identity_tensor_gives_zero() {
        let g = GridShape::collapsed(&[4]).unwrap();
        let t = Field::constant(g, Tensor2::identity());
        let phi = Field::constant(g, phi0().clone());
        let r = torsion_identity_checks(&t, &phi).unwrap();
        assert_eq!(r.max_residual(), 0.0);
    }

    #[test]
    fn twisted_background_satisfies_identities() {
        let g = GridShape::collapsed(&[16, 8]).unwrap();
        let w = Vec7Field::from_position(g, |x| {
            Vec7([0.3 * x[0].sin(), 0.2 * x[1].cos(), 0.0, 0.1, 0.0, -0.2 * (x[0] + x[1]).sin(), 0.0])
        });
        let bg = Background::twisted(&w).unwrap();
        let r = torsion_identity_checks(bg.tbar_node(), bg.phi()).unwrap();
        assert!(r.max_torsion > 0.1);
        assert!(r.max_residual() <= 1e-12, "{r:?}");
    }
}
