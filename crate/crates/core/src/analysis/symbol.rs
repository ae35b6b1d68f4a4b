//! Principal symbols of the flow operator in the vector-field chart.
//!
//! σ_Q(V) = u|ξ|²V + u⁻¹|ξ|² g(U,V) U + |ξ|² V ×̄ U is the symbol of the
//! operator acting on the velocity of ψ. The flow composes it with the
//! inverse chart map V ↦ uV − V ×̄ U, which gives |ξ|²V exactly. Both the
//! composed symbol and the additive form −u|ξ|²V ×̄ U − |ξ|²(V ×̄ U) ×̄ U
//! added to σ_Q are reported.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::{cross, Vec7};
use crate::error::{Error, Result};
use crate::flow::{rhs_vector_flow, Background};
use crate::grid::{discrete_laplacian_eigenvalue, GridShape, Order, Vec7Field};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymbolReport {
    pub xi: Vec7,
    pub u_vec: Vec7,
    pub v: Vec7,
    /// σ_ξQ(V).
    pub symbol_q: Vec7,
    /// σ_Q(V) − u|ξ|²V ×̄ U − |ξ|²(V ×̄ U) ×̄ U.
    pub symbol_additive: Vec7,
    /// Composition of σ_Q with the chart map; equals |ξ|²V.
    pub symbol_composed: Vec7,
    pub coercivity_q: f64,
    pub coercivity_additive: f64,
    pub coercivity_composed: f64,
    /// (1 − |U|²)^{1/2} |ξ|² |V|².
    pub lower_bound: f64,
}

pub fn symbol_check(u_vec: &Vec7, xi: &Vec7, v: &Vec7) -> Result<SymbolReport> {
    let n = u_vec.norm_sq();
    if !(n < 1.0) {
        return Err(Error::Domain(format!("|U|^2 = {n} is not below 1")));
    }
    let u = (1.0 - n).sqrt();
    let xi2 = xi.norm_sq();
    let vxu = cross(v, u_vec);
    let symbol_q = (*v * u + *u_vec * (v.dot(u_vec) / u) + vxu) * xi2;
    let symbol_additive = symbol_q - (vxu * u + cross(&vxu, u_vec)) * xi2;
    // Chart map W ↦ uW − W ×̄ U applied to σ_Q(V).
    let symbol_composed = symbol_q * u - cross(&symbol_q, u_vec);
    Ok(SymbolReport {
        xi: *xi,
        u_vec: *u_vec,
        v: *v,
        coercivity_q: symbol_q.dot(v),
        coercivity_additive: symbol_additive.dot(v),
        coercivity_composed: symbol_composed.dot(v),
        lower_bound: u * xi2 * v.norm_sq(),
        symbol_q,
        symbol_additive,
        symbol_composed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymbolSampling {
    pub samples: usize,
    pub max_u: f64,
    pub threshold: f64,
    pub violations_additive: usize,
    pub violations_composed: usize,
    pub violations_q: usize,
    pub min_coercivity_additive: f64,
    pub min_coercivity_composed: f64,
    pub min_coercivity_q: f64,
    pub max_composed_defect: f64,
}

fn unit_vector(rng: &mut impl Rng) -> Vec7 {
    loop {
        let v = Vec7(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v * (1.0 / n);
        }
    }
}

/// Samples random (U, ξ, V) with |U| ≤ max_u and |ξ| = |V| = 1 and counts
/// coercivities below `threshold`.
pub fn sample_symbols(samples: usize, max_u: f64, threshold: f64, seed: u64) -> Result<SymbolSampling> {
    if !(max_u >= 0.0 && max_u < 1.0) {
        return Err(Error::Domain(format!("max |U| = {max_u} must lie in [0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SymbolSampling {
        samples,
        max_u,
        threshold,
        violations_additive: 0,
        violations_composed: 0,
        violations_q: 0,
        min_coercivity_additive: f64::INFINITY,
        min_coercivity_composed: f64::INFINITY,
        min_coercivity_q: f64::INFINITY,
        max_composed_defect: 0.0,
    };
    for _ in 0..samples {
        let radius = max_u * rng.gen_range(0.0f64..=1.0).powf(1.0 / 7.0);
        let u_vec = unit_vector(&mut rng) * radius;
        let xi = unit_vector(&mut rng);
        let v = unit_vector(&mut rng);
        let r = symbol_check(&u_vec, &xi, &v)?;
        out.violations_additive += (r.coercivity_additive < threshold) as usize;
        out.violations_composed += (r.coercivity_composed < threshold) as usize;
        out.violations_q += (r.coercivity_q < threshold) as usize;
        out.min_coercivity_additive = out.min_coercivity_additive.min(r.coercivity_additive);
        out.min_coercivity_composed = out.min_coercivity_composed.min(r.coercivity_composed);
        out.min_coercivity_q = out.min_coercivity_q.min(r.coercivity_q);
        out.max_composed_defect = out
            .max_composed_defect
            .max((r.symbol_composed - v * xi.norm_sq()).max_abs());
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscreteSymbol {
    pub n: usize,
    pub wavenumber: i64,
    /// −(linearized RHS) projected on the plane wave, per unit amplitude.
    pub measured: Vec7,
    pub composed: Vec7,
    pub relative_error: f64,
}

/// Applies the linearized vector-flow RHS at the constant state U to
/// V cos(k x_axis) on an n-point axis and compares the cos-coefficient
/// of −RHS with the composed analytic symbol at ξ = k e_axis.
pub fn discrete_symbol(
    u_vec: &Vec7,
    v: &Vec7,
    n: usize,
    axis: usize,
    wavenumber: i64,
) -> Result<DiscreteSymbol> {
    let mut sizes = [1; 7];
    sizes[axis] = n;
    let grid = GridShape::with_default_lengths(sizes)?;
    let bg = Background::constant(grid);
    let k = wavenumber as f64 * TAU / grid.lengths()[axis];
    let delta = 1e-6;
    let field = |s: f64| {
        Vec7Field::from_position(grid, |x| *u_vec + *v * (s * (k * x[axis]).cos()))
    };
    let plus = rhs_vector_flow(&field(delta), &bg, 1.0)?;
    let minus = rhs_vector_flow(&field(-delta), &bg, 1.0)?;
    let lin = plus.lin_comb(0.5 / delta, &minus, -0.5 / delta)?;
    let mut measured = Vec7::zero();
    for (i, val) in lin.values().iter().enumerate() {
        let c = (k * grid.position(i)[axis]).cos();
        measured += *val * (-2.0 * c / n as f64);
    }
    let xi = Vec7::basis(axis) * k;
    let composed = symbol_check(u_vec, &xi, v)?.symbol_composed;
    let relative_error = (measured - composed).norm() / composed.norm();
    Ok(DiscreteSymbol {
        n,
        wavenumber,
        measured,
        composed,
        relative_error,
    })
}

/// Ratio of the discrete to the continuous Laplacian eigenvalue, the exact
/// discrete symbol factor of the staggered scheme.
pub fn discrete_symbol_factor(n: usize, wavenumber: i64) -> f64 {
    let h = TAU / n as f64;
    discrete_laplacian_eigenvalue(wavenumber, n, h, Order::Second) / (wavenumber as f64).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_u_gives_heat_symbol() {
        let xi = Vec7([1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let v = Vec7([0.0, 0.0, 1.0, -1.0, 0.0, 0.5, 0.0]);
        let r = symbol_check(&Vec7::zero(), &xi, &v).unwrap();
        assert!((r.symbol_q - v * 5.0).max_abs() < 1e-15);
        assert!((r.symbol_composed - v * 5.0).max_abs() < 1e-15);
    }

    #[test]
    fn additive_coercivity_formula() {
        let u_vec = Vec7([0.3, -0.2, 0.1, 0.0, 0.4, 0.0, 0.1]);
        let xi = Vec7([0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let v = Vec7([1.0, 0.0, 0.0, 0.5, 0.0, 0.2, 0.0]);
        let r = symbol_check(&u_vec, &xi, &v).unwrap();
        let u = (1.0 - u_vec.norm_sq()).sqrt();
        let expected = xi.norm_sq()
            * (u * v.norm_sq() + v.dot(&u_vec).powi(2) / u + cross(&v, &u_vec).norm_sq());
        assert!((r.coercivity_additive - expected).abs() < 1e-14);
    }

    #[test]
    fn composed_symbol_is_heat_symbol() {
        let u_vec = Vec7([0.5, 0.1, -0.3, 0.2, 0.0, 0.1, 0.4]);
        let xi = Vec7::basis(3) * 2.0;
        let v = Vec7([0.2, 1.0, 0.0, 0.3, -0.7, 0.0, 0.1]);
        let r = symbol_check(&u_vec, &xi, &v).unwrap();
        assert!((r.symbol_composed - v * 4.0).max_abs() < 1e-14);
    }

    #[test]
    fn outside_unit_ball_is_rejected() {
        assert!(symbol_check(&Vec7::basis(0), &Vec7::basis(1), &Vec7::basis(2)).is_err());
    }

    #[test]
    fn discrete_symbol_converges() {
        let u_vec = Vec7([0.3, 0.0, 0.2, 0.1, 0.0, -0.2, 0.0]);
        let v = Vec7([0.0, 1.0, 0.0, 0.3, 0.2, 0.0, 0.1]);
        let d1 = discrete_symbol(&u_vec, &v, 16, 0, 1).unwrap();
        let e1 = d1.relative_error;
        let e2 = discrete_symbol(&u_vec, &v, 32, 0, 1).unwrap().relative_error;
        assert!(e1 < 0.02);
        // The defect is exactly the staggered Laplacian factor.
        let scaled = d1.composed * discrete_symbol_factor(16, 1);
        assert!((d1.measured - scaled).max_abs() < 1e-8, "{d1:?}");
        let order = (e1 / e2).log2();
        assert!(order > 1.9, "order {order}");
    }
}
