//! Smallest eigenpairs of symmetric operators.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::operator::{BochnerLaplacian, LinearOperator, SecondVariationOperator};
use crate::error::{Error, Result};
use crate::flow::Background;

/// Largest dimension the dense solver accepts.
pub const DENSE_LIMIT: usize = 5000;

/// Default kernel threshold relative to the largest computed eigenvalue.
pub const KERNEL_THRESHOLD: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct Eigenpairs {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column j belongs to values[j].
    pub vectors: DMatrix<f64>,
    /// ‖A x_j − λ_j x_j‖ per pair.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

pub trait EigenSolver: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;

    /// The k smallest eigenpairs.
    fn solve(&self, op: &dyn LinearOperator, k: usize) -> Result<Eigenpairs>;
}

fn residuals(op: &dyn LinearOperator, values: &[f64], vectors: &DMatrix<f64>) -> Vec<f64> {
    let n = op.dim();
    let mut ax = vec![0.0; n];
    values
        .iter()
        .enumerate()
        .map(|(j, &lambda)| {
            let x = &vectors.as_slice()[j * n..(j + 1) * n];
            op.apply(x, &mut ax);
            ax.iter().zip(x).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt()
        })
        .collect()
}

fn sorted_pairs(eig: SymmetricEigen<f64, nalgebra::Dyn>) -> (Vec<f64>, DMatrix<f64>) {
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(
        &order.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Assembles the operator and diagonalizes it.
#[derive(Clone, Copy, Debug, Default)]
pub struct DenseSolver;

impl EigenSolver for DenseSolver {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn solve(&self, op: &dyn LinearOperator, k: usize) -> Result<Eigenpairs> {
        let n = op.dim();
        if n > DENSE_LIMIT {
            return Err(Error::Domain(format!(
                "dense eigensolve refused for {n} unknowns (limit {DENSE_LIMIT})"
            )));
        }
        let m = op.to_dense();
        let m = (&m + m.transpose()) * 0.5;
        let (values, vectors) = sorted_pairs(SymmetricEigen::new(m));
        let k = k.min(n);
        let values = values[..k].to_vec();
        let vectors = vectors.columns(0, k).into_owned();
        Ok(Eigenpairs {
            residuals: residuals(op, &values, &vectors),
            values,
            vectors,
            iterations: 1,
        })
    }
}

/// Unpreconditioned block LOBPCG with Rayleigh–Ritz on span[X, R, P].
#[derive(Clone, Copy, Debug)]
pub struct Lobpcg {
    /// Block size; at least k.
    pub block: usize,
    /// Converged when ‖r_j‖ ≤ tolerance · max(1, |λ_j|) for the first k pairs.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for Lobpcg {
    fn default() -> Self {
        Self {
            block: 12,
            tolerance: 1e-8,
            max_iterations: 2000,
            seed: 0,
        }
    }
}

/// Orthonormalizes the columns of `cols` (each of length n) in order,
/// with one reorthogonalization pass, dropping dependent columns.
fn orthonormalize(cols: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    for mut v in cols {
        let before = dot(&v, &v).sqrt();
        if !(before > 0.0) || !before.is_finite() {
            continue;
        }
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
            }
        }
        let after = dot(&v, &v).sqrt();
        if after > 1e-10 * before {
            v.iter_mut().for_each(|a| *a /= after);
            basis.push(v);
        }
    }
    basis
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn combine(basis: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; basis[0].len()];
    for (q, &c) in basis.iter().zip(coeffs) {
        if c != 0.0 {
            out.iter_mut().zip(q).for_each(|(a, b)| *a += c * b);
        }
    }
    out
}

impl EigenSolver for Lobpcg {
    fn name(&self) -> &'static str {
        "lobpcg"
    }

    fn solve(&self, op: &dyn LinearOperator, k: usize) -> Result<Eigenpairs> {
        let n = op.dim();
        let m = self.block.max(k).min(n);
        if m * 3 >= n {
            return DenseSolver.solve(op, k);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let start: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let mut x = orthonormalize(start);
        let mut p: Vec<Vec<f64>> = Vec::new();
        let mut values = vec![0.0; m];
        let mut worst = f64::INFINITY;
        let mut scratch = vec![0.0; n];
        for iteration in 0..=self.max_iterations {
            // Rayleigh–Ritz on the current subspace.
            let mut subspace = x.clone();
            if iteration > 0 {
                let ax: Vec<Vec<f64>> = x
                    .iter()
                    .map(|v| {
                        op.apply(v, &mut scratch);
                        scratch.clone()
                    })
                    .collect();
                let mut residual = Vec::with_capacity(m);
                worst = 0.0;
                for j in 0..x.len() {
                    let r: Vec<f64> = ax[j].iter().zip(&x[j]).map(|(a, b)| a - values[j] * b).collect();
                    let norm = dot(&r, &r).sqrt();
                    if j < k {
                        worst = worst.max(norm / values[j].abs().max(1.0));
                    }
                    residual.push(r);
                }
                if worst <= self.tolerance {
                    let vectors = DMatrix::from_fn(n, k, |i, j| x[j][i]);
                    let values = values[..k].to_vec();
                    return Ok(Eigenpairs {
                        residuals: residuals(op, &values, &vectors),
                        values,
                        vectors,
                        iterations: iteration,
                    });
                }
                subspace.extend(residual);
                subspace.extend(p.iter().cloned());
            }
            let basis = orthonormalize(subspace);
            let images: Vec<Vec<f64>> = basis
                .iter()
                .map(|v| {
                    op.apply(v, &mut scratch);
                    scratch.clone()
                })
                .collect();
            let s = basis.len();
            let h = DMatrix::from_fn(s, s, |i, j| 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i])));
            let (ritz, coeffs) = sorted_pairs(SymmetricEigen::new(h));
            let x_old = std::mem::take(&mut x);
            x = (0..m).map(|j| combine(&basis, coeffs.column(j).as_slice())).collect();
            values = ritz[..m].to_vec();
            if iteration > 0 {
                // P = X_new − X_old (X_oldᵀ X_new).
                p = x
                    .iter()
                    .map(|xn| {
                        let c: Vec<f64> = x_old.iter().map(|xo| dot(xo, xn)).collect();
                        let proj = combine(&x_old, &c);
                        xn.iter().zip(&proj).map(|(a, b)| a - b).collect()
                    })
                    .collect();
            }
        }
        Err(Error::NoConvergence {
            iterations: self.max_iterations,
            residual: worst,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub solver: String,
    pub unknowns: usize,
    pub requested: usize,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// Relative kernel threshold; eigenvalues below threshold·max|λ| count as zero.
    pub kernel_threshold: f64,
    pub kernel_cutoff: f64,
    pub kernel_dimension: usize,
}

impl SpectrumReport {
    pub fn from_pairs(solver: &str, unknowns: usize, pairs: &Eigenpairs, threshold: f64) -> Self {
        let largest = pairs.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let cutoff = threshold * largest;
        Self {
            solver: solver.to_string(),
            unknowns,
            requested: pairs.values.len(),
            kernel_dimension: pairs.values.iter().filter(|v| v.abs() < cutoff).count(),
            eigenvalues: pairs.values.clone(),
            residuals: pairs.residuals.clone(),
            iterations: pairs.iterations,
            kernel_threshold: threshold,
            kernel_cutoff: cutoff,
        }
    }

    /// Whether every computed eigenvalue lies in the kernel, so the kernel
    /// may be larger than reported.
    pub fn is_saturated(&self) -> bool {
        self.kernel_dimension == self.requested
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,eigenvalue,residual\n");
        for (i, (v, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            out.push_str(&format!("{i},{v:.17e},{r:.17e}\n"));
        }
        out
    }
}

/// The k smallest eigenvalues of Δ′ + R at a critical background.
pub fn spectrum(
    bg: &Background,
    solver: &dyn EigenSolver,
    k: usize,
    threshold: f64,
) -> Result<SpectrumReport> {
    let op = SecondVariationOperator::new(bg)?;
    let pairs = solver.solve(&op, k)?;
    Ok(SpectrumReport::from_pairs(solver.name(), op.dim(), &pairs, threshold))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeformationReport {
    pub background: String,
    pub kernel_laplacian: usize,
    pub kernel_full: usize,
    /// dim Ker(Δ′ + R) − dim Ker(Δ′).
    pub obstruction_dimension: i64,
    pub saturated: bool,
    pub laplacian: SpectrumReport,
    pub full: SpectrumReport,
}

pub fn deformation_report(
    bg: &Background,
    solver: &dyn EigenSolver,
    k: usize,
    threshold: f64,
) -> Result<DeformationReport> {
    let full_op = SecondVariationOperator::new(bg)?;
    let lap_op = BochnerLaplacian::new(*bg.grid());
    let full = SpectrumReport::from_pairs(solver.name(), full_op.dim(), &solver.solve(&full_op, k)?, threshold);
    let laplacian = SpectrumReport::from_pairs(solver.name(), lap_op.dim(), &solver.solve(&lap_op, k)?, threshold);
    Ok(DeformationReport {
        background: bg.kind().to_string(),
        kernel_laplacian: laplacian.kernel_dimension,
        kernel_full: full.kernel_dimension,
        obstruction_dimension: full.kernel_dimension as i64 - laplacian.kernel_dimension as i64,
        saturated: full.is_saturated() || laplacian.is_saturated(),
        laplacian,
        full,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{discrete_laplacian_eigenvalue, GridShape, Order};

    #[test]
    fn dense_and_lobpcg_agree_on_laplacian() {
        let g = GridShape::collapsed(&[16, 8]).unwrap();
        let op = BochnerLaplacian::new(g);
        let dense = DenseSolver.solve(&op, 10).unwrap();
        let iter = Lobpcg::default().solve(&op, 10).unwrap();
        for (a, b) in dense.values.iter().zip(&iter.values) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        assert_eq!(dense.values.iter().filter(|v| v.abs() < 1e-8).count(), 7);
        let first = discrete_laplacian_eigenvalue(1, 8, g.spacing(1), Order::Second);
        assert!((dense.values[7] - first).abs() < 1e-10);
    }

    #[test]
    fn lobpcg_is_deterministic() {
        let g = GridShape::collapsed(&[24]).unwrap();
        let op = BochnerLaplacian::new(g);
        let a = Lobpcg::default().solve(&op, 9).unwrap();
        let b = Lobpcg::default().solve(&op, 9).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn dense_refuses_large_problems() {
        let g = GridShape::collapsed(&[32, 32]).unwrap();
        assert!(DenseSolver.solve(&BochnerLaplacian::new(g), 8).is_err());
    }

    #[test]
    fn constant_background_is_unobstructed() {
        let g = GridShape::collapsed(&[12]).unwrap();
        let r = deformation_report(&Background::constant(g), &DenseSolver, 10, KERNEL_THRESHOLD).unwrap();
        assert_eq!(r.kernel_laplacian, 7);
        assert_eq!(r.kernel_full, 7);
        assert_eq!(r.obstruction_dimension, 0);
    }

    #[test]
    fn helical_kernel_contains_laplacian_kernel() {
        let g = GridShape::collapsed(&[16]).unwrap();
        let bg = Background::helical(g, 0, 1, 1).unwrap();
        let r = deformation_report(&bg, &DenseSolver, 20, KERNEL_THRESHOLD).unwrap();
        assert!(r.kernel_full >= r.kernel_laplacian, "{r:?}");
    }
}
