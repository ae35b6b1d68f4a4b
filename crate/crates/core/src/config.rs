//! Run configuration read from TOML. Every section is optional and every
//! table rejects unknown keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algebra::DIM;
use crate::analysis::KERNEL_THRESHOLD;
use crate::error::{Error, Result};
use crate::flow::IntegratorControls;
use crate::grid::GridShape;
use crate::registry::{
    background_registry, eigensolver_registry, flow_registry, initial_registry, BuildContext,
    StrategySpec,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Points per axis; missing trailing axes are inert (one point).
    pub sizes: Vec<usize>,
    /// Axis lengths; 2π on active axes and 1 on inert ones when absent.
    #[serde(default)]
    pub lengths: Option<Vec<f64>>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            sizes: vec![32],
            lengths: None,
        }
    }
}

impl GridConfig {
    pub fn shape(&self) -> Result<GridShape> {
        let invalid = |m: String| Error::Params {
            strategy: "grid".into(),
            message: m,
        };
        if self.sizes.is_empty() || self.sizes.len() > DIM {
            return Err(invalid(format!("sizes must list 1 to 7 axes, got {}", self.sizes.len())));
        }
        let mut sizes = [1usize; DIM];
        sizes[..self.sizes.len()].copy_from_slice(&self.sizes);
        match &self.lengths {
            None => GridShape::with_default_lengths(sizes),
            Some(l) => {
                if l.len() != self.sizes.len() {
                    return Err(invalid("lengths must match sizes".into()));
                }
                let mut lengths = GridShape::with_default_lengths(sizes)?.lengths();
                lengths[..l.len()].copy_from_slice(l);
                GridShape::new(sizes, lengths)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub solver: StrategySpec,
    /// Number of smallest eigenvalues.
    pub count: usize,
    /// Relative kernel threshold.
    pub kernel_threshold: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            solver: StrategySpec::named("lobpcg"),
            count: 12,
            kernel_threshold: KERNEL_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    /// Number of random (state, direction) pairs.
    pub pairs: usize,
    pub eps: Vec<f64>,
    /// Amplitude of the random states.
    pub amplitude: f64,
    pub max_wavenumber: i64,
    /// Largest accepted relative error at the smallest step.
    pub tolerance: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            pairs: 20,
            eps: vec![1e-2, 1e-3, 1e-4],
            amplitude: 0.3,
            max_wavenumber: 2,
            tolerance: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Random inputs per sampled identity.
    pub samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { samples: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SymbolConfig {
    pub samples: usize,
    pub max_u: f64,
    /// Coercivity bound counted as a violation when undershot.
    pub threshold: f64,
    /// Grid sizes for the discrete-symbol comparison.
    pub discrete_sizes: Vec<usize>,
}

impl Default for SymbolConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            max_u: 0.9,
            threshold: 0.43,
            discrete_sizes: vec![16, 32, 64],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write the final state as a checkpoint.
    pub checkpoint: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("run"),
            checkpoint: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub grid: GridConfig,
    pub background: StrategySpec,
    pub initial: StrategySpec,
    pub flow: StrategySpec,
    pub integrator: IntegratorControls,
    pub verify: VerifyConfig,
    pub energy: EnergyConfig,
    pub spectrum: SpectrumConfig,
    pub symbol: SymbolConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            grid: GridConfig::default(),
            background: StrategySpec::named("constant"),
            initial: StrategySpec::named("zero"),
            flow: StrategySpec::named("vector"),
            integrator: IntegratorControls::default(),
            verify: VerifyConfig::default(),
            energy: EnergyConfig::default(),
            spectrum: SpectrumConfig::default(),
            symbol: SymbolConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn context(&self) -> BuildContext {
        BuildContext { seed: self.seed }
    }

    /// Checks every section and strategy without allocating grid storage.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.shape()?;
        let ctx = self.context();
        background_registry().build(&self.background, &ctx)?;
        initial_registry().build(&self.initial, &ctx)?;
        flow_registry().build(&self.flow, &ctx)?;
        eigensolver_registry().build(&self.spectrum.solver, &ctx)?;
        self.integrator.validate()?;
        self.integrator.resolve_dt(&grid)?;
        let invalid = |section: &str, m: &str| {
            Err(Error::Params {
                strategy: section.into(),
                message: m.into(),
            })
        };
        if self.spectrum.count == 0 {
            return invalid("spectrum", "count must be positive");
        }
        if !(self.spectrum.kernel_threshold > 0.0 && self.spectrum.kernel_threshold < 1.0) {
            return invalid("spectrum", "kernel_threshold must lie in (0, 1)");
        }
        if self.energy.eps.is_empty() || self.energy.eps.iter().any(|e| !(*e > 0.0)) {
            return invalid("energy", "eps must be a non-empty list of positive steps");
        }
        if !(self.energy.amplitude > 0.0 && self.energy.amplitude < 1.0) {
            return invalid("energy", "amplitude must lie in (0, 1)");
        }
        if !(self.energy.tolerance > 0.0) {
            return invalid("energy", "tolerance must be positive");
        }
        if self.verify.samples == 0 {
            return invalid("verify", "samples must be positive");
        }
        if self.energy.max_wavenumber < 1 {
            return invalid("energy", "max_wavenumber must be at least 1");
        }
        if !(self.symbol.max_u >= 0.0 && self.symbol.max_u < 1.0) {
            return invalid("symbol", "max_u must lie in [0, 1)");
        }
        if self.symbol.discrete_sizes.iter().any(|&n| n < 4) {
            return invalid("symbol", "discrete_sizes must be at least 4");
        }
        Ok(())
    }
}
