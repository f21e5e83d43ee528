//! The joint return process: one volatility σ per history drawn from ρ, then
//! independent centered Gaussians `r_i ~ N(0, a_i² σ²)` with
//! `a_i = √(i^{2D} - (i-1)^{2D})`, so that `Σ_{i≤t} a_i² = t^{2D}`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{Ensemble, Provenance};
use crate::error::{invalid, Error, Result};
use crate::mixture::MixtureDensity;
use crate::rng::{history_stream, StreamRng};

pub const DEFAULT_HORIZON: usize = 17;

/// `a_i = √(i^{2D} - (i-1)^{2D})`, for `i ≥ 1`.
pub fn coefficient_a(d: f64, i: usize) -> f64 {
    assert!(i >= 1, "coefficient index starts at 1");
    let i = i as f64;
    (i.powf(2.0 * d) - (i - 1.0).powf(2.0 * d)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct ProcessModel {
    d_exponent: f64,
    mixture: MixtureDensity,
    horizon: usize,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    #[serde(rename = "D")]
    d_exponent: f64,
    mixture: MixtureDensity,
    #[serde(default = "default_horizon")]
    horizon_n: usize,
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

impl TryFrom<RawModel> for ProcessModel {
    type Error = Error;
    fn try_from(raw: RawModel) -> Result<Self> {
        ProcessModel::new(raw.d_exponent, raw.mixture, raw.horizon_n)
    }
}

impl From<ProcessModel> for RawModel {
    fn from(m: ProcessModel) -> Self {
        RawModel {
            d_exponent: m.d_exponent,
            mixture: m.mixture,
            horizon_n: m.horizon,
        }
    }
}

impl ProcessModel {
    pub fn new(d_exponent: f64, mixture: MixtureDensity, horizon: usize) -> Result<Self> {
        if !(d_exponent > 0.0 && d_exponent < 1.0) {
            return Err(invalid(format!(
                "scaling exponent D must lie in (0, 1), got {d_exponent}"
            )));
        }
        if horizon == 0 {
            return Err(invalid("horizon must be >= 1"));
        }
        Ok(Self {
            d_exponent,
            mixture,
            horizon,
        })
    }

    /// Scaling exponent D.
    pub fn d(&self) -> f64 {
        self.d_exponent
    }
    pub fn mixture(&self) -> &MixtureDensity {
        &self.mixture
    }
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn with_d(&self, d_exponent: f64) -> Result<Self> {
        Self::new(d_exponent, self.mixture.clone(), self.horizon)
    }

    pub fn coefficient(&self, i: usize) -> f64 {
        coefficient_a(self.d_exponent, i)
    }

    pub fn coefficients(&self) -> Vec<f64> {
        (1..=self.horizon).map(|i| self.coefficient(i)).collect()
    }

    /// `√(t^{2D} - (t-T)^{2D})`, the width of `R(t, T)` relative to g.
    pub fn return_scale(&self, t: usize, lag: usize) -> f64 {
        return_scale(self.d_exponent, t, lag)
    }
}

pub(crate) fn return_scale(d: f64, t: usize, lag: usize) -> f64 {
    let t_f = t as f64;
    let start = (t - lag) as f64;
    (t_f.powf(2.0 * d) - start.powf(2.0 * d)).sqrt()
}

/// Elementary returns `r_1..r_n` of one history.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub returns: Vec<f64>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.returns.len()
    }
    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }
}

fn fill_history<R: Rng + ?Sized>(coeffs: &[f64], mixture: &MixtureDensity, rng: &mut R, out: &mut [f64]) {
    let sigma = mixture.sample_one(rng);
    for (slot, &a) in out.iter_mut().zip(coeffs) {
        let z: f64 = rng.sample(StandardNormal);
        *slot = a * sigma * z;
    }
}

pub fn simulate_history<R: Rng + ?Sized>(model: &ProcessModel, rng: &mut R) -> Path {
    let coeffs = model.coefficients();
    let mut returns = vec![0.0; model.horizon];
    fill_history(&coeffs, &model.mixture, rng, &mut returns);
    Path { returns }
}

/// `M` independent histories; history `l` uses [`history_stream`]`(seed, l)`.
pub fn simulate_ensemble(model: &ProcessModel, histories: usize, seed: u64) -> Result<Ensemble> {
    if histories == 0 {
        return Err(invalid("ensemble needs at least one history"));
    }
    let n = model.horizon;
    let coeffs = model.coefficients();
    let mut returns = vec![0.0; histories * n];
    returns.par_chunks_mut(n).enumerate().for_each(|(l, row)| {
        let mut rng: StreamRng = history_stream(seed, l as u64);
        fill_history(&coeffs, &model.mixture, &mut rng, row);
    });
    Ensemble::new(
        returns,
        n,
        Provenance::Simulated {
            seed,
            model: model.clone(),
        },
    )
}

/// `r(t, T) = Σ_{i=t-T+1}^{t} r_i` (1-based indices).
pub fn aggregate_return(returns: &[f64], t: usize, lag: usize) -> Result<f64> {
    if lag < 1 || lag > t || t > returns.len() {
        return Err(Error::IndexOutOfRange(format!(
            "need 1 <= T <= t <= {}, got t={t}, T={lag}",
            returns.len()
        )));
    }
    Ok(returns[t - lag..t].iter().sum())
}
