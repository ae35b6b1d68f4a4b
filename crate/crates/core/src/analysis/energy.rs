use crate::algebra::clifford_mul;
use crate::error::Result;
use crate::flow::{edge_torsion, Background};
use crate::grid::{pairwise_sum, Field, Spinor8Field, Tensor2Field, Vec7Field};

/// E = ½ Σ_i Σ_a |ψ_{i+e_a} − ψ_i|² / h_a² · cell volume.
///
/// For unit spinors |D⁺_aψ|² = |T_a|² + h_a²|D⁺_aψ|⁴/4, so E agrees with
/// ½‖T‖² up to O(h²), and its gradient along δψ = V·ψ is exactly
/// −⟨div T, V⟩ for the staggered torsion.
pub fn dirichlet_energy(psi: &Spinor8Field) -> f64 {
    let grid = *psi.grid();
    let axes: Vec<usize> = grid.active_axes().collect();
    let terms: Vec<f64> = Field::from_fn(grid, |i| {
        let s = psi.values()[i];
        axes.iter()
            .map(|&a| {
                let d = psi.values()[grid.neighbor(i, a, 1)] - s;
                d.norm_sq() / grid.spacing(a).powi(2)
            })
            .sum::<f64>()
    })
    .into_values();
    0.5 * pairwise_sum(&terms) * grid.cell_volume()
}

/// ½ ‖T‖² in the discrete L² product.
pub fn torsion_energy(t: &Tensor2Field) -> f64 {
    0.5 * t.inner_l2(t).expect("same grid")
}

/// Energy of the state U over the background.
pub fn energy(big: &Vec7Field, bg: &Background) -> Result<f64> {
    Ok(dirichlet_energy(&bg.spinor_of(big)?))
}

/// ½‖T^U‖² of the state U over the background.
pub fn torsion_energy_of(big: &Vec7Field, bg: &Background) -> Result<f64> {
    Ok(torsion_energy(&edge_torsion(big, bg)?))
}

/// normalize(ψ + ε V·ψ) pointwise.
pub fn perturb_spinor(psi: &Spinor8Field, v: &Vec7Field, eps: f64) -> Result<Spinor8Field> {
    psi.zip_map(v, |s, x| (*s + clifford_mul(x, s) * eps).normalized())
}

/// The state U_ε of ψ_ε = normalize(ψ + εV·ψ).
pub fn perturb_state(big: &Vec7Field, v: &Vec7Field, eps: f64, bg: &Background) -> Result<Vec7Field> {
    bg.pairs_of(&perturb_spinor(&bg.spinor_of(big)?, v, eps)?)
}
