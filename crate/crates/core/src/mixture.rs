//! The volatility measure ρ(σ): a normalized power-law density
//! `A σ^γ / (d + σ^δ)` on `[σ_min, ∞)`, or a point mass.
//!
//! All power-law integrals are carried out in the standardized variable
//! `u = σ / s` with `s = d^{1/δ}`, where the density shape is
//! `u^γ / (1 + u^δ)`. The region `u < 2^{-1/δ}` and the region
//! `u > 2^{1/δ}` are summed from their convergent power series; only the
//! compact middle piece goes through adaptive quadrature.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quad::{self, Tolerance};

/// Power-law volatility density. Construct with [`PowerLaw::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLaw {
    gamma: f64,
    delta: f64,
    d: f64,
    sigma_min: f64,
    /// `s = d^{1/δ}`
    scale: f64,
    /// `∫_{u_min}^∞ u^γ/(1+u^δ) du`
    shape_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureSpec", into = "MixtureSpec")]
pub enum MixtureDensity {
    PowerLaw(PowerLaw),
    Degenerate { sigma0: f64 },
}

/// On-disk form. The normalization is never stored.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum MixtureSpec {
    PowerLaw {
        gamma: f64,
        delta: f64,
        d: f64,
        #[serde(default)]
        sigma_min: f64,
    },
    Degenerate {
        sigma0: f64,
    },
}

impl TryFrom<MixtureSpec> for MixtureDensity {
    type Error = Error;

    fn try_from(spec: MixtureSpec) -> Result<Self> {
        match spec {
            MixtureSpec::PowerLaw {
                gamma,
                delta,
                d,
                sigma_min,
            } => PowerLaw::new(gamma, delta, d, sigma_min).map(MixtureDensity::PowerLaw),
            MixtureSpec::Degenerate { sigma0 } => MixtureDensity::degenerate(sigma0),
        }
    }
}

impl From<MixtureDensity> for MixtureSpec {
    fn from(m: MixtureDensity) -> Self {
        match m {
            MixtureDensity::PowerLaw(p) => MixtureSpec::PowerLaw {
                gamma: p.gamma,
                delta: p.delta,
                d: p.d,
                sigma_min: p.sigma_min,
            },
            MixtureDensity::Degenerate { sigma0 } => MixtureSpec::Degenerate { sigma0 },
        }
    }
}

/// Normalize a power-law density. Same as [`PowerLaw::new`], wrapped.
pub fn normalize(gamma: f64, delta: f64, d: f64, sigma_min: f64) -> Result<MixtureDensity> {
    PowerLaw::new(gamma, delta, d, sigma_min).map(MixtureDensity::PowerLaw)
}

// ---------------------------------------------------------------------------
// Standardized shape integrals
// ---------------------------------------------------------------------------

const SERIES_TERMS: usize = 200;

/// `∫_lo^hi u^a / (1 + u^δ) du` for `0 ≤ lo ≤ hi ≤ 2^{-1/δ}`, from the
/// expansion `1/(1+x) = Σ (-x)^k`.
pub(crate) fn head_series(a: f64, delta: f64, lo: f64, hi: f64) -> f64 {
    let mut sum = 0.0;
    for k in 0..SERIES_TERMS {
        let p = a + 1.0 + delta * k as f64;
        let lo_term = if lo > 0.0 { lo.powf(p) } else { 0.0 };
        let term = (hi.powf(p) - lo_term) / p;
        sum += if k % 2 == 0 { term } else { -term };
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// `∫_c^∞ u^a / (1 + u^δ) du` for `c^δ ≥ 2`, from
/// `1/(1+u^δ) = Σ (-1)^k u^{-δ(k+1)}`.
fn tail_series(a: f64, delta: f64, c: f64) -> f64 {
    let mut sum = 0.0;
    for k in 0..SERIES_TERMS {
        let p = delta * (k as f64 + 1.0) - a - 1.0;
        let term = c.powf(-p) / p;
        sum += if k % 2 == 0 { term } else { -term };
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// `∫_{u_min}^∞ u^a/(1+u^δ) du`, requires `-1 < a < δ - 1`.
pub(crate) fn shape_integral(a: f64, delta: f64, u_min: f64) -> f64 {
    let head_hi = 0.5f64.powf(1.0 / delta);
    let tail_lo = 2.0f64.powf(1.0 / delta);
    let mut total = 0.0;
    if u_min < head_hi {
        total += head_series(a, delta, u_min, head_hi);
    }
    let mid_lo = u_min.max(head_hi);
    if mid_lo < tail_lo {
        let f = |u: f64| u.powf(a) / (1.0 + u.powf(delta));
        total += quad::integrate(f, mid_lo, tail_lo, Tolerance::rel(1e-14))
            .expect("smooth integrand on a compact interval")
            .value;
    }
    total + tail_series(a, delta, u_min.max(tail_lo))
}

impl PowerLaw {
    pub fn new(gamma: f64, delta: f64, d: f64, sigma_min: f64) -> Result<Self> {
        if !(gamma.is_finite() && delta.is_finite() && d.is_finite() && sigma_min.is_finite()) {
            return Err(invalid("power-law parameters must be finite"));
        }
        if !(gamma > 0.0 && gamma < delta) {
            return Err(invalid(format!(
                "need 0 < gamma < delta, got gamma={gamma}, delta={delta}"
            )));
        }
        if d <= 0.0 {
            return Err(invalid(format!("need d > 0, got {d}")));
        }
        if sigma_min < 0.0 {
            return Err(invalid(format!("need sigma_min >= 0, got {sigma_min}")));
        }
        if delta - gamma <= 1.0 {
            return Err(Error::NonIntegrable { tail: delta - gamma });
        }
        let scale = d.powf(1.0 / delta);
        let shape_norm = shape_integral(gamma, delta, sigma_min / scale);
        Ok(Self {
            gamma,
            delta,
            d,
            sigma_min,
            scale,
            shape_norm,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn d(&self) -> f64 {
        self.d
    }
    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    /// Tail exponent `δ - γ`: ρ(σ) ~ σ^{-(δ-γ)}.
    pub fn tail_exponent(&self) -> f64 {
        self.delta - self.gamma
    }

    /// The normalization factor `A` in `A σ^γ / (d + σ^δ)`.
    pub fn norm_a(&self) -> f64 {
        ((self.delta - self.gamma - 1.0) * self.scale.ln() - self.shape_norm.ln()).exp()
    }

    pub(crate) fn scale(&self) -> f64 {
        self.scale
    }
    pub(crate) fn u_min(&self) -> f64 {
        self.sigma_min / self.scale
    }
    pub(crate) fn shape_norm(&self) -> f64 {
        self.shape_norm
    }
    /// Unnormalized standardized shape `u^γ/(1+u^δ)`.
    pub(crate) fn shape(&self, u: f64) -> f64 {
        if u < self.u_min() {
            return 0.0;
        }
        u.powf(self.gamma) / (1.0 + u.powf(self.delta))
    }

    pub fn density(&self, sigma: f64) -> f64 {
        if sigma < self.sigma_min || sigma <= 0.0 {
            return 0.0;
        }
        self.shape(sigma / self.scale) / (self.scale * self.shape_norm)
    }

    /// Largest finite moment order is strictly below this bound.
    pub fn moment_limit(&self) -> f64 {
        self.delta - self.gamma - 1.0
    }

    pub fn moment(&self, q: f64) -> Result<f64> {
        if !(q >= 0.0) {
            return Err(invalid(format!("moment order must be >= 0, got {q}")));
        }
        if q == 0.0 {
            return Ok(1.0);
        }
        if q >= self.moment_limit() {
            return Err(Error::DivergentMoment {
                order: q,
                limit: self.moment_limit(),
            });
        }
        let ratio = shape_integral(q + self.gamma, self.delta, self.u_min()) / self.shape_norm;
        Ok(self.scale.powf(q) * ratio)
    }

    /// Rejection sampler in `u`: uniform envelope on the core `[u_min, 1]`
    /// and a Pareto envelope `u^{γ-δ}` above `max(u_min, 1)`.
    fn sample_u<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (g, dl) = (self.gamma, self.delta);
        let u_min = self.u_min();
        let tail_start = u_min.max(1.0);
        let pareto_index = dl - g - 1.0;
        let core_width = (1.0 - u_min).max(0.0);
        let core_height = if core_width > 0.0 {
            let mode = (g / (dl - g)).powf(1.0 / dl);
            self.shape(mode.clamp(u_min, 1.0))
        } else {
            0.0
        };
        let core_mass = core_height * core_width;
        let tail_mass = tail_start.powf(-pareto_index) / pareto_index;
        let p_core = core_mass / (core_mass + tail_mass);
        loop {
            let pick: f64 = rng.random();
            let accept: f64 = rng.random();
            if pick < p_core {
                let u = u_min + core_width * rng.random::<f64>();
                if accept * core_height <= self.shape(u) {
                    return u;
                }
            } else {
                let v = 1.0 - rng.random::<f64>();
                let u = tail_start * v.powf(-1.0 / pareto_index);
                // envelope u^{γ-δ}; ratio reduces to u^δ/(1+u^δ)
                let ud = u.powf(dl);
                if accept * (1.0 + ud) <= ud {
                    return u;
                }
            }
        }
    }
}

impl MixtureDensity {
    pub fn degenerate(sigma0: f64) -> Result<Self> {
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(invalid(format!("point mass needs sigma0 > 0, got {sigma0}")));
        }
        Ok(MixtureDensity::Degenerate { sigma0 })
    }

    pub fn density(&self, sigma: f64) -> Result<f64> {
        if !(sigma >= 0.0) {
            return Err(invalid(format!("sigma must be >= 0, got {sigma}")));
        }
        match self {
            MixtureDensity::PowerLaw(p) => Ok(p.density(sigma)),
            MixtureDensity::Degenerate { .. } => Err(Error::DegenerateDensity),
        }
    }

    /// `⟨σ^q⟩_ρ`.
    pub fn moment(&self, q: f64) -> Result<f64> {
        match self {
            MixtureDensity::PowerLaw(p) => p.moment(q),
            MixtureDensity::Degenerate { sigma0 } => {
                if !(q >= 0.0) {
                    return Err(invalid(format!("moment order must be >= 0, got {q}")));
                }
                Ok(sigma0.powf(q))
            }
        }
    }

    /// Lower edge of the support.
    pub fn support_min(&self) -> f64 {
        match self {
            MixtureDensity::PowerLaw(p) => p.sigma_min,
            MixtureDensity::Degenerate { sigma0 } => *sigma0,
        }
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            MixtureDensity::PowerLaw(p) => p.scale * p.sample_u(rng),
            MixtureDensity::Degenerate { sigma0 } => *sigma0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<f64>> {
        if count == 0 {
            return Err(invalid("sample count must be >= 1"));
        }
        Ok((0..count).map(|_| self.sample_one(rng)).collect())
    }
}
