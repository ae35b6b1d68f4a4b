//! One function per subcommand. Each writes its artifacts under the output
//! directory and returns how the run ended.

use std::path::Path;

use anyhow::Result;
use g2flow::algebra::{StructureTables, Vec7};
use g2flow::analysis::{deformation_report, discrete_symbol, gradient_check, sample_symbols, DiscreteSymbol};
use g2flow::config::RunConfig;
use g2flow::flow::{evolve, Background, RunStatus};
use g2flow::grid::{write_field, GridShape};
use g2flow::registry::{
    background_registry, eigensolver_registry, flow_registry, initial_registry, BandLimited, InitialData,
};
use g2flow::verify::run_verification;
use g2flow::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::manifest::RunDir;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    CheckFailed,
    Aborted,
}

/// An error in the configuration or in data it points to.
#[derive(Debug)]
pub struct ConfigError(pub anyhow::Error);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "configuration: {:#}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn setup<T>(r: g2flow::Result<T>) -> Result<T> {
    r.map_err(|e| ConfigError(e.into()).into())
}

fn background(config: &RunConfig, grid: &GridShape) -> Result<Background> {
    let family = setup(background_registry().build(&config.background, &config.context()))?;
    setup(family.build(grid))
}

fn status_name(status: RunStatus) -> String {
    serde_json::to_value(status)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_else(|| format!("{status:?}"))
}

pub fn verify(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let report = run_verification(StructureTables::standard(), config.seed, config.verify.samples);
    let mut run = RunDir::create(out, "verify", config)?;
    run.write_json("verify.json", &report)?;
    let checks = report.exact.len() + report.sampled.len();
    let failures: Vec<_> = report.failures().collect();
    for f in &failures {
        eprintln!(
            "FAIL {}: residual {:e} (tolerance {:e}) at {}",
            f.identity,
            f.max_residual,
            f.tolerance,
            f.worst_inputs.as_deref().unwrap_or("-")
        );
    }
    println!("verify: {} of {checks} checks passed", checks - failures.len());
    let (status, outcome) = if report.passed {
        ("passed", Outcome::Success)
    } else {
        ("failed", Outcome::CheckFailed)
    };
    let message = (!report.passed).then(|| format!("{} identity checks failed", failures.len()));
    run.finish(status, message)?;
    Ok(outcome)
}

pub fn evolve_cmd(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let ctx = config.context();
    let grid = setup(config.grid.shape())?;
    let bg = background(config, &grid)?;
    let u0 = setup(initial_registry().build(&config.initial, &ctx).and_then(|d| d.generate(&grid)))?;
    let model = setup(flow_registry().build(&config.flow, &ctx))?;
    let mut run = RunDir::create(out, "evolve", config)?;

    let initial = match model.initialize(&u0, &bg) {
        Ok(y) => y,
        Err(e @ (Error::ChartExit { .. } | Error::OutsideChart { .. })) => {
            println!("evolve: initial data outside the chart: {e}");
            run.finish("chart_exit", Some(e.to_string()))?;
            return Ok(Outcome::Aborted);
        }
        Err(e) => return Err(e.into()),
    };
    let outcome = match evolve(model.as_ref(), initial, &bg, &config.integrator) {
        Ok(o) => o,
        Err(e @ Error::NonFinite(_)) => {
            run.finish("non_finite", Some(e.to_string()))?;
            return Ok(Outcome::Aborted);
        }
        Err(e) => return Err(e.into()),
    };

    run.write_csv("series.csv", &outcome.series)?;
    if config.output.checkpoint {
        let big = model.vector(&outcome.state.variable, &bg)?;
        let (bin, json) = write_field(&run.path("final_state"), &big)?;
        run.record(&bin)?;
        run.record(&json)?;
    }
    run.start = outcome.series.first().map(serde_json::to_value).transpose()?;
    run.end = Some(serde_json::to_value(&outcome.state.diagnostics)?);

    let status = status_name(outcome.status);
    let end = &outcome.state.diagnostics;
    println!(
        "evolve: {status} at t = {} after {} steps; energy {:e} -> {:e}",
        end.t,
        end.step,
        outcome.series[0].energy,
        end.energy
    );
    if let Some(m) = &outcome.message {
        println!("evolve: {m}");
    }
    let aborted = outcome.status.is_abort();
    run.finish(&status, outcome.message)?;
    Ok(if aborted { Outcome::Aborted } else { Outcome::Success })
}

#[derive(Serialize)]
struct GradientRow {
    pair: usize,
    eps: f64,
    finite_difference: f64,
    analytic: f64,
    relative_error: f64,
}

#[derive(Serialize)]
struct GradientSummary {
    pairs: usize,
    eps: Vec<f64>,
    tolerance: f64,
    /// Largest relative error at the smallest step.
    max_relative_error: f64,
    /// Smallest observed convergence order between the two largest steps.
    min_observed_order: Option<f64>,
    passed: bool,
}

pub fn energy(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let cfg = &config.energy;
    let grid = setup(config.grid.shape())?;
    let bg = background(config, &grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut eps = cfg.eps.clone();
    eps.sort_by(|a, b| b.total_cmp(a));

    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    let mut min_order: Option<f64> = None;
    for pair in 0..cfg.pairs {
        let band = |amplitude, seed| BandLimited {
            amplitude,
            max_wavenumber: cfg.max_wavenumber,
            seed,
        };
        let big = band(cfg.amplitude, rng.gen()).generate(&grid)?;
        let v = band(0.5, rng.gen()).generate(&grid)?;
        let checks = gradient_check(&big, &v, &bg, &eps)?;
        worst = worst.max(checks.last().map_or(0.0, |r| r.relative_error));
        if let [a, b, ..] = checks.as_slice() {
            let order = (a.relative_error / b.relative_error).ln() / (a.eps / b.eps).ln();
            min_order = Some(min_order.map_or(order, |m| m.min(order)));
        }
        rows.extend(checks.into_iter().map(|r| GradientRow {
            pair,
            eps: r.eps,
            finite_difference: r.finite_difference,
            analytic: r.analytic,
            relative_error: r.relative_error,
        }));
    }
    let passed = worst <= cfg.tolerance;
    let summary = GradientSummary {
        pairs: cfg.pairs,
        eps,
        tolerance: cfg.tolerance,
        max_relative_error: worst,
        min_observed_order: min_order,
        passed,
    };

    let mut run = RunDir::create(out, "energy", config)?;
    run.write_csv("gradient_check.csv", &rows)?;
    run.write_json("gradient_check.json", &summary)?;
    run.end = Some(serde_json::to_value(&summary)?);
    println!(
        "energy: {} pairs, max relative error {worst:e} at the smallest step (tolerance {:e})",
        cfg.pairs, cfg.tolerance
    );
    if passed {
        run.finish("passed", None)?;
        Ok(Outcome::Success)
    } else {
        run.finish("failed", Some("gradient check above tolerance".into()))?;
        Ok(Outcome::CheckFailed)
    }
}

pub fn spectrum(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let cfg = &config.spectrum;
    let grid = setup(config.grid.shape())?;
    let bg = background(config, &grid)?;
    let solver = setup(eigensolver_registry().build(&cfg.solver, &config.context()))?;
    let report = match deformation_report(&bg, solver.as_ref(), cfg.count, cfg.kernel_threshold) {
        Ok(r) => r,
        Err(e @ Error::NotCritical { .. }) => return Err(ConfigError(e.into()).into()),
        Err(e @ Error::NoConvergence { .. }) => {
            let run = RunDir::create(out, "spectrum", config)?;
            eprintln!("spectrum: {e}");
            run.finish("no_convergence", Some(e.to_string()))?;
            return Ok(Outcome::Aborted);
        }
        Err(e) => return Err(e.into()),
    };

    let mut run = RunDir::create(out, "spectrum", config)?;
    run.write_json("spectrum.json", &report)?;
    run.write("eigenvalues.csv", report.full.to_csv().as_bytes())?;
    run.write("laplacian_eigenvalues.csv", report.laplacian.to_csv().as_bytes())?;
    run.end = Some(serde_json::json!({
        "kernel_full": report.kernel_full,
        "kernel_laplacian": report.kernel_laplacian,
        "obstruction_dimension": report.obstruction_dimension,
        "saturated": report.saturated,
    }));
    println!(
        "spectrum: {} unknowns, kernel dimension {} (Laplacian {}), obstruction {}",
        report.full.unknowns, report.kernel_full, report.kernel_laplacian, report.obstruction_dimension
    );
    let message = report.saturated.then(|| {
        "every computed eigenvalue is in the kernel; raise spectrum.count".to_string()
    });
    if let Some(m) = &message {
        println!("spectrum: {m}");
    }
    run.finish("completed", message)?;
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct SymbolOutput {
    sampling: g2flow::analysis::SymbolSampling,
    discrete: Vec<DiscreteSymbol>,
    /// log2 of successive relative-error ratios under grid doubling.
    discrete_orders: Vec<f64>,
    passed: bool,
}

pub fn symbol(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let cfg = &config.symbol;
    let sampling = sample_symbols(cfg.samples, cfg.max_u, cfg.threshold, config.seed)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut unit = || {
        let v = Vec7(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
        v * (1.0 / v.norm())
    };
    let u_vec = unit() * (0.5 * cfg.max_u);
    let v = unit();
    let discrete = cfg
        .discrete_sizes
        .iter()
        .map(|&n| discrete_symbol(&u_vec, &v, n, 0, 1))
        .collect::<g2flow::Result<Vec<_>>>()?;
    let discrete_orders = discrete
        .windows(2)
        .map(|w| (w[0].relative_error / w[1].relative_error).log2() / (w[1].n as f64 / w[0].n as f64).log2())
        .collect();

    let passed = sampling.violations_additive == 0 && sampling.violations_composed == 0;
    let output = SymbolOutput {
        sampling,
        discrete,
        discrete_orders,
        passed,
    };
    let mut run = RunDir::create(out, "symbol", config)?;
    run.write_json("symbol.json", &output)?;
    run.end = Some(serde_json::to_value(&output.sampling)?);
    println!(
        "symbol: {} samples, {} violations (composed {}), min coercivity {:.4}",
        output.sampling.samples,
        output.sampling.violations_additive,
        output.sampling.violations_composed,
        output.sampling.min_coercivity_additive
    );
    if passed {
        run.finish("passed", None)?;
        Ok(Outcome::Success)
    } else {
        run.finish("failed", Some("coercivity below threshold".into()))?;
        Ok(Outcome::CheckFailed)
    }
}

pub fn dump_tables(config: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    let tables = StructureTables::standard();
    match out {
        None => println!("{}", serde_json::to_string_pretty(tables)?),
        Some(dir) => {
            let mut run = RunDir::create(dir, "dump-tables", config)?;
            run.write_json("tables.json", tables)?;
            run.finish("completed", None)?;
        }
    }
    Ok(Outcome::Success)
}
