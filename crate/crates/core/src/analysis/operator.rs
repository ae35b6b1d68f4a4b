//! The second variation of E at a critical background, as a matrix-free
//! operator on flat Vec7 fields (point-major, seven components per point).

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{clifford_basis, clifford_mul, Spinor8, Tensor2, Vec7, DIM};
use crate::error::Result;
use crate::flow::{Background, CRITICAL_TOLERANCE};
use crate::grid::GridShape;

/// A real symmetric operator on ℝⁿ.
pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            m.column_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        m
    }
}

/// −Σ_a D⁻_a D⁺_a on Vec7 fields, the discrete Bochner Laplacian Δ′.
#[derive(Clone, Debug)]
pub struct BochnerLaplacian {
    grid: GridShape,
}

impl BochnerLaplacian {
    pub fn new(grid: GridShape) -> Self {
        Self { grid }
    }
}

fn laplacian_into(grid: &GridShape, x: &[f64], y: &mut [f64]) {
    let axes: Vec<(usize, f64)> = grid
        .active_axes()
        .map(|a| (a, 1.0 / grid.spacing(a).powi(2)))
        .collect();
    y.par_chunks_mut(DIM).enumerate().for_each(|(i, out)| {
        out.fill(0.0);
        for &(a, w) in &axes {
            let p = grid.neighbor(i, a, 1) * DIM;
            let m = grid.neighbor(i, a, -1) * DIM;
            for c in 0..DIM {
                let xi = x[i * DIM + c];
                out[c] += w * ((xi - x[p + c]) + (xi - x[m + c]));
            }
        }
    });
}

impl LinearOperator for BochnerLaplacian {
    fn dim(&self) -> usize {
        self.grid.len() * DIM
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        laplacian_into(&self.grid, x, y);
    }
}

/// Δ′ + R at a critical background, realized as the exact Hessian of the
/// discrete energy along ψ ↦ normalize(ψ + V·ψ). Per edge (i, j = i + e_a)
/// with weight 1/h_a² the bilinear form is
/// ⟨U_jψ_j − U_iψ_i, V_jψ_j − V_iψ_i⟩ − (1 − (ψ_i, ψ_j)) (U_i·V_i + U_j·V_j).
#[derive(Clone, Debug)]
pub struct SecondVariationOperator {
    grid: GridShape,
    psi: Vec<Spinor8>,
    /// 1 − (ψ_i, ψ_{i+e_a}) per node and axis.
    defect: Vec<[f64; DIM]>,
    torsion_free: bool,
    divergence_residual: f64,
}

impl SecondVariationOperator {
    pub fn new(bg: &Background) -> Result<Self> {
        Self::with_tolerance(bg, CRITICAL_TOLERANCE)
    }

    pub fn with_tolerance(bg: &Background, tolerance: f64) -> Result<Self> {
        bg.ensure_critical(tolerance)?;
        let grid = *bg.grid();
        let defect = bg
            .overlap()
            .values()
            .iter()
            .map(|c| std::array::from_fn(|a| if grid.is_active(a) { 1.0 - c.0[a] } else { 0.0 }))
            .collect();
        Ok(Self {
            grid,
            psi: bg.psi().values().to_vec(),
            defect,
            torsion_free: bg.is_torsion_free(),
            divergence_residual: bg.divergence_residual(),
        })
    }

    pub fn grid(&self) -> &GridShape {
        &self.grid
    }

    /// Whether R vanishes identically.
    pub fn is_pure_laplacian(&self) -> bool {
        self.torsion_free
    }

    pub fn divergence_residual(&self) -> f64 {
        self.divergence_residual
    }
}

impl LinearOperator for SecondVariationOperator {
    fn dim(&self) -> usize {
        self.grid.len() * DIM
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        if self.torsion_free {
            return laplacian_into(&self.grid, x, y);
        }
        let grid = &self.grid;
        let lifted: Vec<Spinor8> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let v = Vec7(std::array::from_fn(|c| x[i * DIM + c]));
                clifford_mul(&v, &self.psi[i])
            })
            .collect();
        let axes: Vec<(usize, f64)> = grid
            .active_axes()
            .map(|a| (a, 1.0 / grid.spacing(a).powi(2)))
            .collect();
        y.par_chunks_mut(DIM).enumerate().for_each(|(i, out)| {
            let mut acc = Spinor8::zero();
            let mut diag = 0.0;
            for &(a, w) in &axes {
                let p = grid.neighbor(i, a, 1);
                let m = grid.neighbor(i, a, -1);
                // d_a(i − e_a) − d_a(i) with d_a(i) = V_{i+e_a}ψ_{i+e_a} − V_iψ_i.
                acc += (lifted[i] * 2.0 - lifted[p] - lifted[m]) * w;
                diag += w * (self.defect[i][a] + self.defect[m][a]);
            }
            let s = &self.psi[i];
            for (c, o) in out.iter_mut().enumerate() {
                *o = clifford_basis(c, s).dot(&acc) - diag * x[i * DIM + c];
            }
        });
    }
}

/// The second variation in its continuum form Δ′V + 2(∇^aV^m)T̄_a^n φ̄_mn·,
/// discretized with T̄ and φ̄ on edge midpoints and symmetrized. It agrees
/// with [`SecondVariationOperator`] up to O(h²).
#[derive(Clone, Debug)]
pub struct MidpointSecondVariation {
    grid: GridShape,
    /// M^a_mb = T̄_a^n φ̄_mnb per active axis, indexed by node i (edge i + ½e_a).
    coupling: Vec<(usize, Vec<Tensor2>)>,
}

impl MidpointSecondVariation {
    pub fn new(bg: &Background) -> Result<Self> {
        bg.ensure_critical(CRITICAL_TOLERANCE)?;
        let grid = *bg.grid();
        let coupling = grid
            .active_axes()
            .map(|a| {
                let m: Vec<Tensor2> = (0..grid.len())
                    .into_par_iter()
                    .map(|i| {
                        let j = grid.neighbor(i, a, 1);
                        let phi = bg.phi().values()[i].to_dense();
                        let next = bg.phi().values()[j].to_dense();
                        let tau = bg.tbar_edge().values()[i].row(a);
                        let mut out = Tensor2::zero();
                        for m in 0..DIM {
                            for b in 0..DIM {
                                out.0[m][b] = (0..DIM)
                                    .map(|n| tau.0[n] * 0.5 * (phi[m][n][b] + next[m][n][b]))
                                    .sum();
                            }
                        }
                        out
                    })
                    .collect();
                (a, m)
            })
            .collect();
        Ok(Self { grid, coupling })
    }

    /// R alone.
    pub fn apply_coupling(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        let grid = &self.grid;
        for (a, m) in &self.coupling {
            let a = *a;
            let inv_h = 1.0 / grid.spacing(a);
            // k_a(i)_b = 2 Σ_m (D⁺_aV)_m M_mb and w_a(i)_m = 2 Σ_b M_mb Ṽ_b.
            let (k, w): (Vec<[f64; DIM]>, Vec<[f64; DIM]>) = (0..grid.len())
                .into_par_iter()
                .map(|i| {
                    let j = grid.neighbor(i, a, 1);
                    let mut k = [0.0; DIM];
                    let mut w = [0.0; DIM];
                    for r in 0..DIM {
                        let dv = (x[j * DIM + r] - x[i * DIM + r]) * inv_h;
                        for c in 0..DIM {
                            k[c] += 2.0 * dv * m[i].0[r][c];
                            let vt = 0.5 * (x[i * DIM + c] + x[j * DIM + c]);
                            w[r] += 2.0 * m[i].0[r][c] * vt;
                        }
                    }
                    (k, w)
                })
                .unzip();
            y.par_chunks_mut(DIM).enumerate().for_each(|(i, out)| {
                let p = grid.neighbor(i, a, -1);
                for c in 0..DIM {
                    let sym = 0.5 * (k[i][c] + k[p][c]);
                    let adj = -(w[i][c] - w[p][c]) * inv_h;
                    out[c] += 0.5 * (sym + adj);
                }
            });
        }
    }
}

impl LinearOperator for MidpointSecondVariation {
    fn dim(&self) -> usize {
        self.grid.len() * DIM
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        laplacian_into(&self.grid, x, y);
        let mut r = vec![0.0; x.len()];
        self.apply_coupling(x, &mut r);
        y.iter_mut().zip(&r).for_each(|(a, b)| *a += b);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SelfAdjointness {
    pub trials: usize,
    /// max |⟨x, Ay⟩ − ⟨Ax, y⟩| / (‖x‖‖Ay‖ + ‖Ax‖‖y‖).
    pub max_relative_defect: f64,
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn self_adjointness(op: &dyn LinearOperator, trials: usize, seed: u64) -> SelfAdjointness {
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let (mut ax, mut ay) = (vec![0.0; n], vec![0.0; n]);
    for _ in 0..trials {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        op.apply(&x, &mut ax);
        op.apply(&y, &mut ay);
        let scale = dot(&x, &x).sqrt() * dot(&ay, &ay).sqrt() + dot(&ax, &ax).sqrt() * dot(&y, &y).sqrt();
        worst = worst.max((dot(&x, &ay) - dot(&ax, &y)).abs() / scale.max(f64::MIN_POSITIVE));
    }
    SelfAdjointness {
        trials,
        max_relative_defect: worst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Vec7;
    use crate::analysis::hessian_fd;
    use crate::error::Error;
    use crate::grid::Vec7Field;

    fn wave(g: GridShape, seed: f64) -> Vec7Field {
        Vec7Field::from_position(g, |x| {
            Vec7(std::array::from_fn(|c| {
                ((c as f64 + 1.0) * seed + x[0]).sin() * 0.3 + ((2.0 * x[0] + seed * c as f64).cos()) * 0.2
            }))
        })
    }

    #[test]
    fn constant_background_is_laplacian() {
        let g = GridShape::collapsed(&[8, 4]).unwrap();
        let op = SecondVariationOperator::new(&Background::constant(g)).unwrap();
        assert!(op.is_pure_laplacian());
        let x = wave(g, 0.7).to_flat();
        let mut y = vec![0.0; x.len()];
        op.apply(&x, &mut y);
        let expect = wave(g, 0.7).laplacian(crate::grid::Order::Second).scale(-1.0).to_flat();
        let err = y.iter().zip(&expect).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn helical_operator_is_symmetric() {
        let g = GridShape::collapsed(&[16, 4]).unwrap();
        let bg = Background::helical(g, 0, 1, 1).unwrap();
        let op = SecondVariationOperator::new(&bg).unwrap();
        assert!(!op.is_pure_laplacian());
        assert!(self_adjointness(&op, 4, 1).max_relative_defect < 1e-13);
        let dense = op.to_dense();
        assert!((&dense - dense.transpose()).amax() < 1e-11);
    }

    #[test]
    fn quadratic_form_matches_hessian() {
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = GridShape::collapsed(&[n]).unwrap();
            let bg = Background::helical(g, 0, 1, 1).unwrap();
            let op = SecondVariationOperator::new(&bg).unwrap();
            let v = wave(g, 0.4);
            let x = v.to_flat();
            let mut y = vec![0.0; x.len()];
            op.apply(&x, &mut y);
            let q = dot(&x, &y) * g.cell_volume();
            let fd = hessian_fd(bg.psi(), &v, &v, 1e-4).unwrap();
            let eps: f64 = 1e-4;
            assert!((q - fd).abs() <= f64::max(1e-5, 100.0 * eps * eps) * fd.abs(), "n = {n}: {q} vs {fd}");
            let mid = MidpointSecondVariation::new(&bg).unwrap();
            mid.apply(&x, &mut y);
            errs.push((dot(&x, &y) * g.cell_volume() - q).abs() / q.abs());
        }
        assert!((errs[0] / errs[1]).log2() > 1.8 && (errs[1] / errs[2]).log2() > 1.8, "{errs:?}");
    }

    #[test]
    fn constants_are_in_the_helical_kernel() {
        let g = GridShape::collapsed(&[16, 4]).unwrap();
        let bg = Background::helical(g, 0, 4, 2).unwrap();
        let op = SecondVariationOperator::new(&bg).unwrap();
        let x = Vec7Field::constant(g, Vec7([0.3, -1.0, 0.2, 0.5, 0.0, 0.7, -0.4])).to_flat();
        let mut y = vec![0.0; x.len()];
        op.apply(&x, &mut y);
        assert!(y.iter().all(|v| v.abs() < 1e-10), "{:?}", y.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }

    #[test]
    fn non_critical_background_is_refused() {
        let g = GridShape::collapsed(&[16]).unwrap();
        let w = Vec7Field::from_position(g, |x| Vec7([0.3 * x[0].sin(), 0.0, 0.1, 0.0, 0.0, 0.0, 0.0]));
        let bg = Background::twisted(&w).unwrap();
        assert!(matches!(SecondVariationOperator::new(&bg), Err(Error::NotCritical { .. })));
    }
}
