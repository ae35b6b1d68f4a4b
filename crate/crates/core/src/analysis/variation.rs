use serde::Serialize;

use super::energy::{dirichlet_energy, perturb_spinor};
use crate::algebra::{clifford_basis, clifford_mul, Tensor2, DIM};
use crate::dictionary::spinor_edge_torsion;
use crate::error::Result;
use crate::flow::{div_torsion, Background};
use crate::grid::{
    grad_vec, DiffScheme, Field, Layout, Order, Spinor8Field, Tensor2Field, Vec7Field,
};

/// DE(U)[V] = −⟨div T^U, V⟩ for the variation δψ = V·ψ.
pub fn first_variation(big: &Vec7Field, v: &Vec7Field, bg: &Background) -> Result<f64> {
    Ok(-div_torsion(big, bg)?.inner_l2(v)?)
}

/// Exact first-order change of the staggered torsion under δψ = V·ψ:
/// δT_ab = (T_a·ψ_i, [e_b, V_i]·ψ_i) − (ψ_{i+e_a}, (D⁺_aV)·e_b·ψ_i).
/// As h → 0 this tends to g(∇_a V, e_b) − 2φ(T_a, e_b, V).
pub fn delta_t_spinor(psi: &Spinor8Field, v: &Vec7Field) -> Result<Tensor2Field> {
    let grid = *psi.grid();
    grid.ensure_same(v.grid())?;
    let t = spinor_edge_torsion(psi);
    let dv: Vec<Vec7Field> = (0..DIM).map(|a| v.forward(a, Order::Second)).collect();
    Ok(Field::from_fn_with_layout(grid, Layout::Edge, |i| {
        let s = &psi.values()[i];
        let vi = &v.values()[i];
        let vs = clifford_mul(vi, s);
        let mut out = Tensor2::zero();
        for a in grid.active_axes() {
            let ta_psi = clifford_mul(&t.values()[i].row(a), s);
            let next = &psi.values()[grid.neighbor(i, a, 1)];
            let dva = &dv[a].values()[i];
            for b in 0..DIM {
                let eb_psi = clifford_basis(b, s);
                let comm = clifford_basis(b, &vs) - clifford_mul(vi, &eb_psi);
                out.0[a][b] = ta_psi.dot(&comm) - next.dot(&clifford_mul(dva, &eb_psi));
            }
        }
        out
    }))
}

pub fn delta_t(big: &Vec7Field, v: &Vec7Field, bg: &Background) -> Result<Tensor2Field> {
    delta_t_spinor(&bg.spinor_of(big)?, v)
}

/// The continuum expression g(∇_X V, Y) − 2φ(T(X), Y, V) on the nodes, with
/// central differences and the nodal torsion T_ab = (∂_aψ, e_b·ψ).
pub fn delta_t_continuum(psi: &Spinor8Field, v: &Vec7Field) -> Result<Tensor2Field> {
    let grid = *psi.grid();
    grid.ensure_same(v.grid())?;
    let gv = grad_vec(v, DiffScheme::Central, Order::Second);
    let dpsi: Vec<Spinor8Field> = (0..DIM).map(|a| psi.partial(a, Order::Second)).collect();
    Ok(Field::from_fn(grid, |i| {
        let s = &psi.values()[i];
        let phi = crate::algebra::threeform_of(s);
        let mut out = Tensor2::zero();
        for a in grid.active_axes() {
            let ta = crate::algebra::Vec7(std::array::from_fn(|b| {
                dpsi[a].values()[i].dot(&clifford_basis(b, s))
            }));
            let cross = phi.cross(&ta, &v.values()[i]);
            for b in 0..DIM {
                // φ(T_a, e_b, V) = −(T_a × V)_b.
                out.0[a][b] = gv.values()[i].0[a][b] + 2.0 * cross[b];
            }
        }
        out
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradientCheckRow {
    pub eps: f64,
    pub finite_difference: f64,
    pub analytic: f64,
    pub relative_error: f64,
}

/// Centered differences of E along ψ_ε = normalize(ψ + εV·ψ) against DE[V].
pub fn gradient_check(
    big: &Vec7Field,
    v: &Vec7Field,
    bg: &Background,
    eps: &[f64],
) -> Result<Vec<GradientCheckRow>> {
    let psi = bg.spinor_of(big)?;
    let analytic = first_variation(big, v, bg)?;
    eps.iter()
        .map(|&e| {
            let plus = dirichlet_energy(&perturb_spinor(&psi, v, e)?);
            let minus = dirichlet_energy(&perturb_spinor(&psi, v, -e)?);
            let fd = (plus - minus) / (2.0 * e);
            Ok(GradientCheckRow {
                eps: e,
                finite_difference: fd,
                analytic,
                relative_error: (fd - analytic).abs() / analytic.abs().max(f64::MIN_POSITIVE),
            })
        })
        .collect()
}

/// Polarized second difference of E along ψ(ε) = normalize(ψ + εW·ψ):
/// with S(W) = E(εW) + E(−εW), [S(X+Y) − S(X−Y)] / (4ε²) → ⟨X, H Y⟩ at a
/// critical point.
pub fn hessian_fd(
    psi: &Spinor8Field,
    x: &Vec7Field,
    y: &Vec7Field,
    eps: f64,
) -> Result<f64> {
    let plus = x.add(y)?;
    let minus = x.sub(y)?;
    let ep = dirichlet_energy(&perturb_spinor(psi, &plus, eps)?);
    let em = dirichlet_energy(&perturb_spinor(psi, &minus, eps)?);
    let ep2 = dirichlet_energy(&perturb_spinor(psi, &plus, -eps)?);
    let em2 = dirichlet_energy(&perturb_spinor(psi, &minus, -eps)?);
    Ok(((ep + ep2) - (em + em2)) / (4.0 * eps * eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Vec7;
    use crate::grid::GridShape;

    fn state(g: GridShape) -> Vec7Field {
        Vec7Field::from_position(g, |x| {
            Vec7([0.2 * x[0].sin(), 0.1 * (x[0] + 0.3).cos(), 0.0, 0.05 * (2.0 * x[0]).sin(), 0.1, 0.0, 0.0])
        })
    }

    fn direction(g: GridShape) -> Vec7Field {
        Vec7Field::from_position(g, |x| Vec7([0.3 * x[0].cos(), 0.0, 1.0, -(2.0 * x[0]).sin(), 0.0, 0.5, 0.2]))
    }

    #[test]
    fn zero_direction_gives_zero() {
        let g = GridShape::collapsed(&[16]).unwrap();
        let bg = Background::constant(g);
        assert_eq!(first_variation(&state(g), &Vec7Field::zeros(g), &bg).unwrap(), 0.0);
    }

    #[test]
    fn delta_t_matches_finite_difference() {
        let g = GridShape::collapsed(&[16]).unwrap();
        let bg = Background::constant(g);
        let psi = bg.spinor_of(&state(g)).unwrap();
        let v = direction(g);
        let dt = delta_t_spinor(&psi, &v).unwrap();
        let eps = 1e-5;
        let tp = spinor_edge_torsion(&perturb_spinor(&psi, &v, eps).unwrap());
        let tm = spinor_edge_torsion(&perturb_spinor(&psi, &v, -eps).unwrap());
        let fd = tp.lin_comb(0.5 / eps, &tm, -0.5 / eps).unwrap();
        assert!(fd.max_abs_diff(&dt).unwrap() < 1e-8);
    }

    #[test]
    fn delta_t_converges_to_continuum_form() {
        let mut errs = Vec::new();
        for n in [32, 64, 128] {
            let g = GridShape::collapsed(&[n]).unwrap();
            let bg = Background::constant(g);
            let psi = bg.spinor_of(&state(g)).unwrap();
            let v = direction(g);
            let edge = delta_t_spinor(&psi, &v).unwrap();
            // Average the midpoint values of row 0 back to the nodes.
            let nodal = edge.lin_comb(0.5, &edge.shifted(0, -1), 0.5).unwrap();
            let cont = delta_t_continuum(&psi, &v).unwrap();
            errs.push(nodal.max_abs_diff(&cont).unwrap());
        }
        assert!(errs[1] < errs[0] / 3.0 && errs[2] < errs[1] / 3.0, "{errs:?}");
    }
}
