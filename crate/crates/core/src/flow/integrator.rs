//! Classical RK4 with a parabolic step bound and per-step diagnostics.

use serde::{Deserialize, Serialize};

use super::{Background, FlowModel, FlowVariable, DEFAULT_CLAMP};
use crate::analysis::{dirichlet_energy, torsion_energy};
use crate::dictionary::{metric_deviation, spinor_edge_torsion};
use crate::error::{Error, Result};
use crate::grid::{div_tensor2, GridShape, Order};

/// dt ≤ safety · min h² / (2 · 7).
pub fn max_stable_dt(grid: &GridShape, safety: f64) -> f64 {
    safety * grid.min_spacing().powi(2) / 14.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorControls {
    pub t_end: f64,
    /// Requested step; the parabolic bound is used when absent.
    pub dt: Option<f64>,
    pub dt_safety: f64,
    pub clamp_radius: f64,
    /// Relative per-step tolerance on energy increases.
    pub energy_tolerance: f64,
    /// Metric deviation is sampled every this many steps (0 disables it).
    pub metric_every: usize,
    /// Diagnostics are recorded every this many steps.
    pub record_every: usize,
}

impl Default for IntegratorControls {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            dt: None,
            dt_safety: 0.5,
            clamp_radius: DEFAULT_CLAMP,
            energy_tolerance: 1e-10,
            metric_every: 100,
            record_every: 1,
        }
    }
}

impl IntegratorControls {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Params {
            strategy: "integrator".into(),
            message: m.into(),
        });
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return bad("t_end must be finite and non-negative");
        }
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return bad("dt_safety must lie in (0, 1]");
        }
        if !(self.clamp_radius > 0.0 && self.clamp_radius < 1.0) {
            return bad("clamp_radius must lie in (0, 1)");
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return bad("dt must be positive");
            }
        }
        if !(self.energy_tolerance >= 0.0) {
            return bad("energy_tolerance must be non-negative");
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1");
        }
        Ok(())
    }

    /// Uniform step that lands on t_end and respects the stability bound.
    pub fn resolve_dt(&self, grid: &GridShape) -> Result<(f64, usize)> {
        let bound = max_stable_dt(grid, self.dt_safety);
        let requested = match self.dt {
            Some(dt) if dt > bound => return Err(Error::TimeStep { dt, bound }),
            Some(dt) => dt,
            None => bound,
        };
        if self.t_end == 0.0 {
            return Ok((0.0, 0));
        }
        if !requested.is_finite() {
            return Ok((self.t_end, 1));
        }
        let steps = (self.t_end / requested).ceil().max(1.0) as usize;
        Ok((self.t_end / steps as f64, steps))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub step: usize,
    pub t: f64,
    /// Discrete Dirichlet energy ½ Σ |D⁺ψ|² (the flow's Lyapunov function).
    pub energy: f64,
    /// ½ ‖T‖² over the midpoints.
    pub torsion_energy: f64,
    pub max_u: f64,
    pub div_t_l2: f64,
    pub metric_dev: Option<f64>,
    pub dt: f64,
}

#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub step: usize,
    pub variable: FlowVariable,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Stationary,
    ChartExit,
    EnergyIncrease,
    NonFinite,
}

impl RunStatus {
    pub fn is_abort(self) -> bool {
        matches!(self, Self::ChartExit | Self::EnergyIncrease | Self::NonFinite)
    }
}

#[derive(Clone, Debug)]
pub struct EvolveOutcome {
    pub status: RunStatus,
    pub message: Option<String>,
    pub state: FlowState,
    pub series: Vec<Diagnostics>,
    /// Largest (E_{n+1} − E_n)/E_n over accepted steps.
    pub max_relative_increase: f64,
}

fn diagnose(
    model: &dyn FlowModel,
    y: &FlowVariable,
    bg: &Background,
    step: usize,
    t: f64,
    dt: f64,
    with_metric: bool,
) -> Result<Diagnostics> {
    let psi = model.spinor(y, bg)?;
    let big = model.vector(y, bg)?;
    let t_edge = spinor_edge_torsion(&psi);
    let metric_dev = if with_metric {
        Some(
            psi.values()
                .iter()
                .map(|s| metric_deviation(&crate::algebra::threeform_of(&s.normalized())))
                .fold(0.0, f64::max),
        )
    } else {
        None
    };
    Ok(Diagnostics {
        step,
        t,
        energy: dirichlet_energy(&psi),
        torsion_energy: torsion_energy(&t_edge),
        max_u: big.values().iter().map(|v| v.norm()).fold(0.0, f64::max),
        div_t_l2: div_tensor2(&t_edge, Order::Second).norm_l2(),
        metric_dev,
        dt,
    })
}

/// One classical RK4 step.
pub fn step_rk4(
    model: &dyn FlowModel,
    y: &FlowVariable,
    bg: &Background,
    dt: f64,
) -> Result<FlowVariable> {
    let k1 = model.rhs(y, bg)?;
    let k2 = model.rhs(&y.axpy(0.5 * dt, &k1)?, bg)?;
    let k3 = model.rhs(&y.axpy(0.5 * dt, &k2)?, bg)?;
    let k4 = model.rhs(&y.axpy(dt, &k3)?, bg)?;
    let mut out = y
        .axpy(dt / 6.0, &k1)?
        .axpy(dt / 3.0, &k2)?
        .axpy(dt / 3.0, &k3)?
        .axpy(dt / 6.0, &k4)?;
    model.finish_step(&mut out);
    Ok(out)
}

fn state(y: FlowVariable, d: Diagnostics) -> FlowState {
    FlowState {
        t: d.t,
        step: d.step,
        variable: y,
        diagnostics: d,
    }
}

/// Integrates to `controls.t_end`, halting on chart exit, non-finite
/// values or two consecutive energy increases.
pub fn evolve(
    model: &dyn FlowModel,
    initial: FlowVariable,
    bg: &Background,
    controls: &IntegratorControls,
) -> Result<EvolveOutcome> {
    controls.validate()?;
    let (dt, steps) = controls.resolve_dt(bg.grid())?;
    let metric_at = |n: usize| controls.metric_every > 0 && n % controls.metric_every == 0;
    let first = diagnose(model, &initial, bg, 0, 0.0, dt, metric_at(0))?;
    let mut series = vec![first.clone()];

    if first.div_t_l2 == 0.0 {
        let mut last = first.clone();
        last.step = steps;
        last.t = controls.t_end;
        if last.metric_dev.is_none() && controls.metric_every > 0 {
            last.metric_dev = first.metric_dev;
        }
        if steps > 0 {
            series.push(last.clone());
        }
        return Ok(EvolveOutcome {
            status: RunStatus::Stationary,
            message: None,
            state: state(initial, last),
            series,
            max_relative_increase: 0.0,
        });
    }

    let mut y = initial;
    let mut current = first;
    let mut increases = 0;
    let mut max_rel = f64::NEG_INFINITY;
    let halt = |status, message: String, y, d: Diagnostics, series: Vec<Diagnostics>, max_rel| {
        Ok(EvolveOutcome {
            status,
            message: Some(message),
            state: state(y, d),
            series,
            max_relative_increase: max_rel,
        })
    };

    for n in 1..=steps {
        let t = if n == steps { controls.t_end } else { n as f64 * dt };
        let next = match step_rk4(model, &y, bg, dt) {
            Ok(v) => v,
            Err(Error::ChartExit { norm, .. }) | Err(Error::OutsideChart { u: norm }) => {
                return halt(
                    RunStatus::ChartExit,
                    format!("stage left the chart at step {n} ({norm})"),
                    y,
                    current,
                    series,
                    max_rel,
                );
            }
            Err(e) => return Err(e),
        };
        if !next.is_finite() {
            return halt(
                RunStatus::NonFinite,
                format!("non-finite state at step {n}"),
                y,
                current,
                series,
                max_rel,
            );
        }
        let d = match diagnose(model, &next, bg, n, t, dt, metric_at(n) || n == steps) {
            Ok(d) => d,
            Err(Error::OutsideChart { u }) => {
                return halt(
                    RunStatus::ChartExit,
                    format!("state left the chart at step {n} (u = {u})"),
                    y,
                    current,
                    series,
                    max_rel,
                );
            }
            Err(e) => return Err(e),
        };
        if !(d.energy.is_finite() && d.div_t_l2.is_finite()) {
            return halt(
                RunStatus::NonFinite,
                format!("non-finite diagnostics at step {n}"),
                y,
                current,
                series,
                max_rel,
            );
        }
        let rel = if current.energy > 0.0 {
            (d.energy - current.energy) / current.energy
        } else {
            d.energy - current.energy
        };
        max_rel = max_rel.max(rel);
        increases = if rel > controls.energy_tolerance { increases + 1 } else { 0 };
        let exited = d.max_u > controls.clamp_radius;
        if exited || increases >= 2 || n % controls.record_every == 0 || n == steps {
            series.push(d.clone());
        }
        if exited {
            let msg = format!("|U| = {} exceeds {} at t = {}", d.max_u, controls.clamp_radius, d.t);
            return halt(RunStatus::ChartExit, msg, next, d, series, max_rel);
        }
        if increases >= 2 {
            let msg = format!("energy increased on two consecutive steps ending at t = {}", d.t);
            return halt(RunStatus::EnergyIncrease, msg, next, d, series, max_rel);
        }
        y = next;
        current = d;
    }
    Ok(EvolveOutcome {
        status: RunStatus::Completed,
        message: None,
        state: state(y, current),
        series,
        max_relative_increase: max_rel.max(0.0),
    })
}
