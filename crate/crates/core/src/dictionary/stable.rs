//! Metric of a stable three-form.
//!
//! 6 b_φ(X, Y) vol = (X ⨼ φ) ∧ (Y ⨼ φ) ∧ φ, ε_φ = det(b_φ)^{1/9} and
//! g_φ = b_φ / ε_φ. The factor 1/6 makes g_{φ₀} the identity.

use std::sync::OnceLock;

use nalgebra::SMatrix;
use serde::Serialize;

use crate::algebra::{interior3, lex2, lex3, permutation_sign, Tensor2, ThreeForm, TwoForm, Vec7, DIM};

/// |det b| below this is treated as degenerate.
pub const DEGENERATE_DET: f64 = 1e-14;

/// Leading principal minors of g must exceed this to count as positive.
pub const POSITIVITY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StableFormReport {
    pub b: Tensor2,
    pub det_b: f64,
    pub eps: f64,
    pub g: Option<Tensor2>,
    pub is_positive: bool,
}

/// Partitions {0..7} = S1 ⊔ S2 ⊔ S3 into two sorted pairs and a sorted
/// triple, with the sign of the concatenated permutation.
struct Partition {
    first: usize,
    second: usize,
    third: usize,
    sign: f64,
}

fn partitions() -> &'static [Partition] {
    static P: OnceLock<Vec<Partition>> = OnceLock::new();
    P.get_or_init(|| {
        let pairs = lex2();
        let triples = lex3();
        let mut out = Vec::with_capacity(210);
        for (i, p) in pairs.iter().enumerate() {
            for (j, q) in pairs.iter().enumerate() {
                let used = [p[0], p[1], q[0], q[1]];
                let distinct = (0..4).all(|x| (x + 1..4).all(|y| used[x] != used[y]));
                if !distinct {
                    continue;
                }
                let rest: Vec<usize> = (0..DIM).filter(|k| !used.contains(k)).collect();
                let k = triples
                    .iter()
                    .position(|t| t[..] == rest[..])
                    .expect("sorted triple");
                let perm = [p[0], p[1], q[0], q[1], rest[0], rest[1], rest[2]];
                out.push(Partition {
                    first: i,
                    second: j,
                    third: k,
                    sign: permutation_sign(&perm),
                });
            }
        }
        out
    })
}

/// Coefficient of α ∧ β ∧ φ on e¹ ∧ … ∧ e⁷.
fn top_coefficient(alpha: &TwoForm, beta: &TwoForm, phi: &ThreeForm) -> f64 {
    partitions()
        .iter()
        .map(|p| p.sign * alpha.0[p.first] * beta.0[p.second] * phi.0[p.third])
        .sum()
}

fn det7(m: &Tensor2) -> f64 {
    SMatrix::<f64, 7, 7>::from_fn(|i, j| m.0[i][j]).determinant()
}

fn sylvester_positive(m: &Tensor2) -> bool {
    let full = SMatrix::<f64, 7, 7>::from_fn(|i, j| m.0[i][j]);
    (1..=DIM).all(|k| {
        full.view((0, 0), (k, k)).clone_owned().determinant() > POSITIVITY_TOLERANCE
    })
}

pub fn stable_form_analysis(phi: &ThreeForm) -> StableFormReport {
    let contractions: Vec<TwoForm> = (0..DIM).map(|a| interior3(&Vec7::basis(a), phi)).collect();
    let mut b = Tensor2::zero();
    for i in 0..DIM {
        for j in i..DIM {
            let v = top_coefficient(&contractions[i], &contractions[j], phi) / 6.0;
            b.0[i][j] = v;
            b.0[j][i] = v;
        }
    }
    let det_b = det7(&b);
    if !(det_b.abs() >= DEGENERATE_DET) {
        return StableFormReport {
            b,
            det_b,
            eps: 0.0,
            g: None,
            is_positive: false,
        };
    }
    let eps = det_b.signum() * det_b.abs().powf(1.0 / 9.0);
    let g = b * (1.0 / eps);
    let is_positive = sylvester_positive(&g);
    StableFormReport {
        b,
        det_b,
        eps,
        g: Some(g),
        is_positive,
    }
}

/// max |g_φ − δ| over all entries; infinite when φ is not a positive form.
pub fn metric_deviation(phi: &ThreeForm) -> f64 {
    let r = stable_form_analysis(phi);
    match (r.g, r.is_positive) {
        (Some(g), true) => g.max_abs_diff(&Tensor2::identity()),
        _ => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::phi0;

    #[test]
    fn partition_count() {
        assert_eq!(partitions().len(), 210);
    }

    #[test]
    fn reference_form_has_identity_metric() {
        let r = stable_form_analysis(phi0());
        assert!(r.is_positive);
        assert!((r.eps - 1.0).abs() < 1e-15);
        assert!(r.g.unwrap().max_abs_diff(&Tensor2::identity()) < 1e-15);
    }

    #[test]
    fn zero_form_is_not_stable() {
        let r = stable_form_analysis(&ThreeForm::zero());
        assert!(!r.is_positive);
        assert!(r.g.is_none());
    }

    #[test]
    fn scaled_form_scales_metric() {
        // b scales as λ³, ε as λ^{7/3}, so g scales as λ^{2/3}.
        let r = stable_form_analysis(&(*phi0() * 8.0));
        let g = r.g.unwrap();
        assert!((g.0[0][0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn negated_form_has_negative_density_and_same_metric() {
        // −φ₀ induces the same metric but the opposite orientation, so b
        // flips sign and the real ninth root keeps g = δ.
        let r = stable_form_analysis(&(-*phi0()));
        assert!(r.det_b < 0.0);
        assert!(r.g.unwrap().max_abs_diff(&Tensor2::identity()) < 1e-14);
    }
}
