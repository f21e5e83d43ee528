//! JSON run configurations, one per subcommand.
//!
//! Relative paths inside a config resolve against the config file's
//! directory. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use selfsim_core::compare::{default_collapse_spec, default_k_pairs, DEFAULT_EXPONENTS};
use selfsim_core::{ProcessModel, SessionSpec};

pub const DEFAULT_HISTORIES: usize = 1282;
pub const DEFAULT_BINS: usize = 40;
pub const DEFAULT_REPS: usize = 200;

/// A model given inline or as a path to a model JSON file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Path(PathBuf),
    Inline(ProcessModel),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelRef,
    #[serde(default = "default_histories")]
    pub histories: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    pub input: PathBuf,
    #[serde(default)]
    pub session: SessionSpec,
}

/// Exponent grids and index sets shared by `analyze` and `compare`.
#[derive(Debug, Clone)]
pub struct Grids {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub k_exponents: Vec<(f64, f64)>,
    pub k_pairs: Option<Vec<(usize, usize)>>,
}

impl Grids {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.betas.is_empty() {
            bail!("alpha and beta grids must be non-empty");
        }
        if let Some(x) = self.alphas.iter().chain(&self.betas).find(|x| x.is_nan() || **x <= 0.0) {
            bail!("grid exponents must be > 0, got {x}");
        }
        Ok(())
    }

    pub fn k_pairs(&self, horizon: usize) -> Vec<(usize, usize)> {
        self.k_pairs.clone().unwrap_or_else(|| default_k_pairs(horizon))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub ensemble: PathBuf,
    #[serde(default = "default_exponents")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_exponents")]
    pub betas: Vec<f64>,
    /// `(α, β)` pairs for the aggregated-return correlator K.
    #[serde(default = "default_k_exponents")]
    pub k_exponents: Vec<(f64, f64)>,
    /// `(t₁, t₂)` pairs; defaults depend on the horizon.
    #[serde(default)]
    pub k_pairs: Option<Vec<(usize, usize)>>,
    /// α grid of the D regression.
    #[serde(default = "default_exponents")]
    pub d_alphas: Vec<f64>,
    #[serde(default)]
    pub collapse: Option<Vec<(usize, usize)>>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Exponent used to rescale the collapse; the fitted D when absent.
    #[serde(default, rename = "D")]
    pub d_exponent: Option<f64>,
    #[serde(default = "yes")]
    pub detrend: bool,
}

impl AnalyzeConfig {
    pub fn grids(&self) -> Grids {
        Grids {
            alphas: self.alphas.clone(),
            betas: self.betas.clone(),
            k_exponents: self.k_exponents.clone(),
            k_pairs: self.k_pairs.clone(),
        }
    }

    pub fn collapse_spec(&self, horizon: usize) -> Vec<(usize, usize)> {
        self.collapse.clone().unwrap_or_else(|| default_collapse_spec(horizon))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub model: ModelRef,
    pub ensemble: PathBuf,
    #[serde(default = "default_exponents")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_exponents")]
    pub betas: Vec<f64>,
    /// `(α, β)` pairs for the aggregated-return correlator K.
    #[serde(default = "default_k_exponents")]
    pub k_exponents: Vec<(f64, f64)>,
    /// `(t₁, t₂)` pairs; defaults depend on the horizon.
    #[serde(default)]
    pub k_pairs: Option<Vec<(usize, usize)>>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "yes")]
    pub detrend: bool,
}

impl CompareConfig {
    pub fn grids(&self) -> Grids {
        Grids {
            alphas: self.alphas.clone(),
            betas: self.betas.clone(),
            k_exponents: self.k_exponents.clone(),
            k_pairs: self.k_pairs.clone(),
        }
    }
}

/// Tail index as a number, or `"inf"` for a point-mass ρ.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum TailIndex {
    Finite(f64),
    Named(InfiniteTag),
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub enum InfiniteTag {
    #[serde(rename = "inf")]
    Inf,
}

impl TailIndex {
    pub fn value(self) -> f64 {
        match self {
            TailIndex::Finite(x) => x,
            TailIndex::Named(InfiniteTag::Inf) => f64::INFINITY,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    pub variance: f64,
    pub tail_index: TailIndex,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default)]
    pub sigma_min: f64,
    /// Text file of g samples, one number per line.
    #[serde(default)]
    pub shape_samples: Option<PathBuf>,
    #[serde(default = "default_d", rename = "D")]
    pub d_exponent: f64,
    #[serde(default = "default_horizon")]
    pub horizon_n: usize,
}

fn default_histories() -> usize {
    DEFAULT_HISTORIES
}
fn default_exponents() -> Vec<f64> {
    DEFAULT_EXPONENTS.to_vec()
}
fn default_k_exponents() -> Vec<(f64, f64)> {
    vec![(1.0, 1.0)]
}
fn default_bins() -> usize {
    DEFAULT_BINS
}
fn default_reps() -> usize {
    DEFAULT_REPS
}
fn default_d() -> f64 {
    selfsim_core::theory::REFERENCE_D
}
fn default_horizon() -> usize {
    selfsim_core::process::DEFAULT_HORIZON
}
fn yes() -> bool {
    true
}
fn one() -> f64 {
    1.0
}

/// Parsed config plus the directory relative paths resolve against.
pub struct Loaded<T> {
    pub cfg: T,
    pub base: PathBuf,
}

impl<T> Loaded<T> {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<Loaded<T>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let cfg = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { cfg, base })
}

pub fn load_model<T>(loaded: &Loaded<T>, model: &ModelRef) -> Result<ProcessModel> {
    match model {
        ModelRef::Inline(m) => Ok(m.clone()),
        ModelRef::Path(p) => {
            let p = loaded.resolve(p);
            let text = fs::read_to_string(&p).with_context(|| format!("reading model {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing model {}", p.display()))
        }
    }
}
