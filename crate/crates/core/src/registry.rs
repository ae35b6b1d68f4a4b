//! Named strategy registries: flow models, initial data, backgrounds and
//! eigensolvers are built from a name plus a parameter table.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::algebra::{Vec7, DIM};
use crate::analysis::{DenseSolver, EigenSolver, Lobpcg};
use crate::error::{Error, Result};
use crate::flow::{Background, FlowModel, SpinorFlow, VectorFlow};
use crate::grid::{read_field, GridShape, Vec7Field};

/// A strategy name with its parameters, as written in a config section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub name: String,
    #[serde(flatten)]
    pub params: toml::Table,
}

impl StrategySpec {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_string(),
            params: toml::Table::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<toml::Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }
}

/// Shared inputs of strategy construction.
#[derive(Clone, Copy, Debug, Default)]
pub struct BuildContext {
    pub seed: u64,
}

pub type Factory<T> = fn(&StrategySpec, &BuildContext) -> Result<Box<T>>;

/// Factories for one kind of strategy, keyed by name.
pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Factory<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, factory: Factory<T>) -> &mut Self {
        self.entries.insert(name, factory);
        self
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn build(&self, spec: &StrategySpec, ctx: &BuildContext) -> Result<Box<T>> {
        let factory = self.entries.get(spec.name.as_str()).ok_or_else(|| Error::UnknownStrategy {
            kind: self.kind,
            name: spec.name.clone(),
            available: self.names().join(", "),
        })?;
        factory(spec, ctx)
    }
}

/// Parses the parameter table of `spec` into `P`, rejecting unknown keys.
pub fn parse_params<P: DeserializeOwned>(spec: &StrategySpec) -> Result<P> {
    P::deserialize(toml::Value::Table(spec.params.clone())).map_err(|e| Error::Params {
        strategy: spec.name.clone(),
        message: e.to_string().trim().to_string(),
    })
}

fn no_params(spec: &StrategySpec) -> Result<()> {
    parse_params::<Empty>(spec).map(|_| ())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Empty {}

fn params_error(spec: &StrategySpec, message: impl Into<String>) -> Error {
    Error::Params {
        strategy: spec.name.clone(),
        message: message.into(),
    }
}

/// Converts a 1-based axis or direction index.
fn zero_based(spec: &StrategySpec, what: &str, value: usize) -> Result<usize> {
    if (1..=DIM).contains(&value) {
        Ok(value - 1)
    } else {
        Err(params_error(spec, format!("{what} must lie in 1..=7, got {value}")))
    }
}

// Flow models.

pub fn flow_registry() -> Registry<dyn FlowModel> {
    let mut r: Registry<dyn FlowModel> = Registry::new("flow");
    r.register("vector", |spec, _| {
        no_params(spec)?;
        Ok(Box::new(VectorFlow::default()))
    });
    r.register("spinor", |spec, _| {
        no_params(spec)?;
        Ok(Box::new(SpinorFlow))
    });
    r
}

// Initial data.

/// A family of vector fields U on a grid.
pub trait InitialData: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;

    fn generate(&self, grid: &GridShape) -> Result<Vec7Field>;
}

#[derive(Clone, Copy, Debug)]
pub struct ZeroData;

impl InitialData for ZeroData {
    fn name(&self) -> &'static str {
        "zero"
    }

    fn generate(&self, grid: &GridShape) -> Result<Vec7Field> {
        Ok(Vec7Field::zeros(*grid))
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantData {
    pub value: [f64; DIM],
}

impl InitialData for ConstantData {
    fn name(&self) -> &'static str {
        "constant"
    }

    fn generate(&self, grid: &GridShape) -> Result<Vec7Field> {
        Ok(Vec7Field::constant(*grid, Vec7(self.value)))
    }
}

/// U = amplitude · sin(2πk x_axis / L_axis + phase) e_direction (zero-based).
#[derive(Clone, Copy, Debug)]
pub struct FourierMode {
    pub amplitude: f64,
    pub axis: usize,
    pub direction: usize,
    pub wavenumber: i64,
    pub phase: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FourierParams {
    amplitude: f64,
    #[serde(default = "one")]
    axis: usize,
    #[serde(default = "two")]
    direction: usize,
    #[serde(default = "one_i")]
    wavenumber: i64,
    #[serde(default)]
    phase: f64,
}

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

fn one_i() -> i64 {
    1
}

impl InitialData for FourierMode {
    fn name(&self) -> &'static str {
        "fourier_mode"
    }

    fn generate(&self, grid: &GridShape) -> Result<Vec7Field> {
        let period = grid.lengths()[self.axis];
        let k = TAU * self.wavenumber as f64 / period;
        let e = Vec7::basis(self.direction) * self.amplitude;
        Ok(Vec7Field::from_position(*grid, |x| e * (k * x[self.axis] + self.phase).sin()))
    }
}

/// Random combination of modes with |k_a| ≤ max_wavenumber on the active
/// axes, rescaled so that max |U| = amplitude.
#[derive(Clone, Copy, Debug)]
pub struct BandLimited {
    pub amplitude: f64,
    pub max_wavenumber: i64,
    pub seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BandParams {
    amplitude: f64,
    #[serde(default = "two_i")]
    max_wavenumber: i64,
    seed: Option<u64>,
}

fn two_i() -> i64 {
    2
}

impl InitialData for BandLimited {
    fn name(&self) -> &'static str {
        "band_limited"
    }

    fn generate(&self, grid: &GridShape) -> Result<Vec7Field> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let axes: Vec<usize> = grid.active_axes().collect();
        let kmax = self.max_wavenumber;
        let mut modes: Vec<([i64; DIM], Vec7, Vec7)> = Vec::new();
        let mut k = [0i64; DIM];
        for &ax in &axes {
            k[ax] = -kmax;
        }
        loop {
            if k.iter().any(|&v| v != 0) {
                let a = Vec7(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
                let b = Vec7(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
                modes.push((k, a, b));
            }
            // Odometer over the active axes.
            let mut done = true;
            for &ax in &axes {
                if k[ax] < kmax {
                    k[ax] += 1;
                    done = false;
                    break;
                }
                k[ax] = -kmax;
            }
            if done {
                break;
            }
        }
        let lengths = grid.lengths();
        let field = Vec7Field::from_position(*grid, |x| {
            let mut u = Vec7::zero();
            for (k, a, b) in &modes {
                let theta: f64 = (0..DIM).map(|ax| TAU * k[ax] as f64 * x[ax] / lengths[ax]).sum();
                u += *a * theta.cos() + *b * theta.sin();
            }
            u
        });
        let peak = field.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return Ok(field);
        }
        Ok(field.scale(self.amplitude / peak))
    }
}

/// A Vec7 field read from a checkpoint stem (`<stem>.bin` + `<stem>.json`).
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub path: PathBuf,
}

impl InitialData for Checkpoint {
    fn name(&self) -> &'static str {
        "checkpoint"
    }

    fn generate(&self, grid: &GridShape) -> Result<Vec7Field> {
        let field: Vec7Field = read_field(&self.path)?;
        grid.ensure_same(field.grid())?;
        Ok(field)
    }
}

fn check_amplitude(spec: &StrategySpec, amplitude: f64) -> Result<()> {
    if !(amplitude.is_finite() && amplitude >= 0.0 && amplitude < 1.0) {
        return Err(params_error(spec, format!("amplitude must lie in [0, 1), got {amplitude}")));
    }
    Ok(())
}

pub fn initial_registry() -> Registry<dyn InitialData> {
    let mut r: Registry<dyn InitialData> = Registry::new("initial data");
    r.register("zero", |spec, _| {
        no_params(spec)?;
        Ok(Box::new(ZeroData))
    });
    r.register("constant", |spec, _| {
        let p: ConstantData = parse_params(spec)?;
        check_amplitude(spec, Vec7(p.value).norm())?;
        Ok(Box::new(p))
    });
    r.register("fourier_mode", |spec, _| {
        let p: FourierParams = parse_params(spec)?;
        check_amplitude(spec, p.amplitude.abs())?;
        Ok(Box::new(FourierMode {
            amplitude: p.amplitude,
            axis: zero_based(spec, "axis", p.axis)?,
            direction: zero_based(spec, "direction", p.direction)?,
            wavenumber: p.wavenumber,
            phase: p.phase,
        }))
    });
    r.register("band_limited", |spec, ctx| {
        let p: BandParams = parse_params(spec)?;
        check_amplitude(spec, p.amplitude)?;
        if p.max_wavenumber < 1 {
            return Err(params_error(spec, "max_wavenumber must be at least 1"));
        }
        Ok(Box::new(BandLimited {
            amplitude: p.amplitude,
            max_wavenumber: p.max_wavenumber,
            seed: p.seed.unwrap_or(ctx.seed),
        }))
    });
    r.register("checkpoint", |spec, _| Ok(Box::new(parse_params::<Checkpoint>(spec)?)));
    r
}

// Backgrounds.

/// A family of background structures ψ̄.
pub trait BackgroundFamily: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;

    fn build(&self, grid: &GridShape) -> Result<Background>;
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantBackground;

impl BackgroundFamily for ConstantBackground {
    fn name(&self) -> &'static str {
        "constant"
    }

    fn build(&self, grid: &GridShape) -> Result<Background> {
        Ok(Background::constant(*grid))
    }
}

/// ψ̄ = W·ψ₀ + wψ₀ with W drawn from an initial-data family.
#[derive(Debug)]
pub struct TwistedBackground {
    pub w: Box<dyn InitialData>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TwistedParams {
    w: StrategySpec,
}

impl BackgroundFamily for TwistedBackground {
    fn name(&self) -> &'static str {
        "twisted"
    }

    fn build(&self, grid: &GridShape) -> Result<Background> {
        Background::twisted(&self.w.generate(grid)?)
    }
}

/// The helical critical background (zero-based axis and direction).
#[derive(Clone, Copy, Debug)]
pub struct HelicalBackground {
    pub axis: usize,
    pub direction: usize,
    pub wavenumber: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HelicalParams {
    #[serde(default = "one")]
    axis: usize,
    #[serde(default = "two")]
    direction: usize,
    #[serde(default = "one_i")]
    wavenumber: i64,
}

impl BackgroundFamily for HelicalBackground {
    fn name(&self) -> &'static str {
        "helical"
    }

    fn build(&self, grid: &GridShape) -> Result<Background> {
        Background::helical(*grid, self.axis, self.direction, self.wavenumber)
    }
}

pub fn background_registry() -> Registry<dyn BackgroundFamily> {
    let mut r: Registry<dyn BackgroundFamily> = Registry::new("background");
    r.register("constant", |spec, _| {
        no_params(spec)?;
        Ok(Box::new(ConstantBackground))
    });
    r.register("twisted", |spec, ctx| {
        let p: TwistedParams = parse_params(spec)?;
        Ok(Box::new(TwistedBackground {
            w: initial_registry().build(&p.w, ctx)?,
        }))
    });
    r.register("helical", |spec, _| {
        let p: HelicalParams = parse_params(spec)?;
        Ok(Box::new(HelicalBackground {
            axis: zero_based(spec, "axis", p.axis)?,
            direction: zero_based(spec, "direction", p.direction)?,
            wavenumber: p.wavenumber,
        }))
    });
    r
}

// Eigensolvers.

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LobpcgParams {
    block: Option<usize>,
    tolerance: Option<f64>,
    max_iterations: Option<usize>,
    seed: Option<u64>,
}

pub fn eigensolver_registry() -> Registry<dyn EigenSolver> {
    let mut r: Registry<dyn EigenSolver> = Registry::new("eigensolver");
    r.register("dense", |spec, _| {
        no_params(spec)?;
        Ok(Box::new(DenseSolver))
    });
    r.register("lobpcg", |spec, ctx| {
        let p: LobpcgParams = parse_params(spec)?;
        let d = Lobpcg::default();
        let solver = Lobpcg {
            block: p.block.unwrap_or(d.block),
            tolerance: p.tolerance.unwrap_or(d.tolerance),
            max_iterations: p.max_iterations.unwrap_or(d.max_iterations),
            seed: p.seed.unwrap_or(ctx.seed),
        };
        if solver.block == 0 || !(solver.tolerance > 0.0) || solver.max_iterations == 0 {
            return Err(params_error(spec, "block, tolerance and max_iterations must be positive"));
        }
        Ok(Box::new(solver))
    });
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_names_list_alternatives() {
        let err = flow_registry().build(&StrategySpec::named("heat"), &BuildContext::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("heat") && msg.contains("spinor") && msg.contains("vector"), "{msg}");
    }

    #[test]
    fn unknown_params_are_rejected() {
        let spec = StrategySpec::named("fourier_mode").with("amplitude", 0.1).with("amplitud", 0.2);
        assert!(matches!(
            initial_registry().build(&spec, &BuildContext::default()),
            Err(Error::Params { .. })
        ));
    }

    #[test]
    fn fourier_mode_is_one_based() {
        let g = GridShape::collapsed(&[16]).unwrap();
        let spec = StrategySpec::named("fourier_mode").with("amplitude", 0.1);
        let u = initial_registry().build(&spec, &BuildContext::default()).unwrap().generate(&g).unwrap();
        let x = g.position(4)[0];
        assert!((u.values()[4].0[1] - 0.1 * x.sin()).abs() < 1e-15);
        assert!(initial_registry()
            .build(&spec.clone().with("axis", 0), &BuildContext::default())
            .is_err());
    }

    #[test]
    fn band_limited_is_seeded_and_scaled() {
        let g = GridShape::collapsed(&[12, 6]).unwrap();
        let spec = StrategySpec::named("band_limited").with("amplitude", 0.4);
        let ctx = BuildContext { seed: 5 };
        let a = initial_registry().build(&spec, &ctx).unwrap().generate(&g).unwrap();
        let b = initial_registry().build(&spec, &ctx).unwrap().generate(&g).unwrap();
        assert_eq!(a, b);
        let peak = a.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!((peak - 0.4).abs() < 1e-14);
        let c = initial_registry().build(&spec, &BuildContext { seed: 6 }).unwrap().generate(&g).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn twisted_background_takes_nested_spec() {
        let w: toml::Table = toml::from_str("name = \"fourier_mode\"\namplitude = 0.2\ndirection = 4").unwrap();
        let spec = StrategySpec::named("twisted").with("w", w);
        let g = GridShape::collapsed(&[8]).unwrap();
        let bg = background_registry().build(&spec, &BuildContext::default()).unwrap().build(&g).unwrap();
        assert_eq!(bg.kind(), "twisted");
        assert!(!bg.is_torsion_free());
    }

    #[test]
    fn registries_list_their_strategies() {
        assert_eq!(flow_registry().names(), ["spinor", "vector"]);
        assert_eq!(
            initial_registry().names(),
            ["band_limited", "checkpoint", "constant", "fourier_mode", "zero"]
        );
        assert_eq!(background_registry().names(), ["constant", "helical", "twisted"]);
        assert_eq!(eigensolver_registry().names(), ["dense", "lobpcg"]);
    }
}
