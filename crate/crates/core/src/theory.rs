//! Model predictions expressed through moments of ρ.
//!
//! With `r_i = a_i σ z_i`, every absolute-moment correlator factorizes into a
//! Gaussian part (`B_α`, `B⁽²⁾`) and a mixture part (`⟨σ^q⟩_ρ`):
//!
//! * `⟨|r₁|^α |r_n|^β⟩ = B_α B_β a₁^α a_n^β ⟨σ^{α+β}⟩`
//! * `κ_{α,β} = ⟨σ^{α+β}⟩ / (⟨σ^α⟩⟨σ^β⟩)`, independent of `n`
//! * `c(1,n) = B₁² a₁ a_n [⟨σ²⟩ - ⟨σ⟩²] / (a₁² [B₂⟨σ²⟩ - B₁²⟨σ⟩²])`
//! * `K_{α,β}(t₁,t₂) = B⁽²⁾(t₁,t₂) / (t₁^{αD} t₂^{βD} B_{α+β}) ·
//!    ⟨|r₁|^{α+β}⟩ / (⟨|r₁|^α⟩⟨|r₁|^β⟩)`

use statrs::function::gamma::gamma;

use crate::curve::{CorrelatorCurve, CurveKind, CurvePoint, Source};
use crate::error::{invalid, Error, Result};
use crate::mixture::{shape_integral, MixtureDensity, PowerLaw};
use crate::process::ProcessModel;
use crate::quad::{self, brent, Tolerance};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// Standard normal density is below e^{-98} beyond this many deviations.
const GAUSS_CUTOFF: f64 = 14.0;

fn std_normal(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// `(k - 1)!!` for even `k`, i.e. `E[Z^k]`.
fn even_gaussian_moment(k: u32) -> f64 {
    (1..k).step_by(2).map(|j| j as f64).product()
}

fn as_even_integer(x: f64) -> Option<u32> {
    ((0.0..=64.0).contains(&x) && x.fract() == 0.0 && (x as u32) % 2 == 0).then_some(x as u32)
}

/// Absolute moment of the standard normal:
/// `B_α = ∫ |r|^α e^{-r²/2}/√(2π) dr = 2^{α/2} Γ((α+1)/2) / √π`.
///
/// Even integer orders are returned as exact double factorials.
pub fn b_alpha(alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(invalid(format!("B_alpha needs alpha >= 0, got {alpha}")));
    }
    if let Some(k) = as_even_integer(alpha) {
        return Ok(even_gaussian_moment(k));
    }
    Ok(2f64.powf(0.5 * alpha) * gamma(0.5 * (alpha + 1.0)) / std::f64::consts::PI.sqrt())
}

/// Typed wrapper carrying `B_α` together with its order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsMomentCoefficient {
    pub alpha: f64,
    pub value: f64,
}

impl AbsMomentCoefficient {
    pub fn new(alpha: f64) -> Result<Self> {
        Ok(Self {
            alpha,
            value: b_alpha(alpha)?,
        })
    }
}

/// `κ_{α,β} = ⟨σ^{α+β}⟩ / (⟨σ^α⟩⟨σ^β⟩)`.
pub fn kappa(m: &MixtureDensity, alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha >= 0.0 && beta >= 0.0) {
        return Err(invalid(format!("kappa needs alpha, beta >= 0, got ({alpha}, {beta})")));
    }
    let joint = m.moment(alpha + beta)?;
    Ok(joint / (m.moment(alpha)? * m.moment(beta)?))
}

/// Volatility autocorrelation `c(1, n)`, exactly as the factorized formula
/// reads (the `a₁` factors are kept even though `a₁ = 1`).
pub fn vol_autocorr(model: &ProcessModel, n: usize) -> Result<f64> {
    if n < 2 || n > model.horizon() {
        return Err(Error::IndexOutOfRange(format!(
            "need 2 <= n <= {}, got {n}",
            model.horizon()
        )));
    }
    let m = model.mixture();
    let m1 = m.moment(1.0)?;
    let m2 = m.moment(2.0)?;
    let b1 = b_alpha(1.0)?;
    let b2 = b_alpha(2.0)?;
    let a1 = model.coefficient(1);
    let an = model.coefficient(n);
    Ok(b1 * b1 * a1 * an * (m2 - m1 * m1) / (a1 * a1 * (b2 * m2 - b1 * b1 * m1 * m1)))
}

/// `E|μ + τZ|^β` for standard normal `Z`.
fn shifted_abs_moment(mu: f64, tau: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        return 1.0;
    }
    if let Some(k) = as_even_integer(beta) {
        // binomial expansion; odd Gaussian moments vanish
        let mut total = 0.0;
        let mut binom = 1.0;
        for j in 0..=k {
            if j % 2 == 0 {
                total += binom * mu.powi((k - j) as i32) * tau.powi(j as i32) * even_gaussian_moment(j);
            }
            binom = binom * (k - j) as f64 / (j + 1) as f64;
        }
        return total;
    }
    let c = mu / tau;
    let f = |z: f64| (c + z).abs().powf(beta) * std_normal(z);
    let kink = -c;
    let mut breaks = vec![-GAUSS_CUTOFF];
    if kink > -GAUSS_CUTOFF && kink < GAUSS_CUTOFF {
        breaks.push(kink);
    }
    breaks.push(GAUSS_CUTOFF);
    let inner = quad::integrate_with_breaks(f, &breaks, Tolerance::rel(1e-11)).expect("inner Gaussian integral");
    tau.powf(beta) * inner.value
}

/// The nested Gaussian integral
/// `B⁽²⁾_{α,β}(t₁,t₂) = E[|X|^α |X + Y|^β]` with `X ~ N(0, t₁^{2D})` and
/// independent `Y ~ N(0, t₂^{2D} - t₁^{2D})`.
///
/// For `t₁ = t₂` the inner Gaussian is a point mass and
/// `B⁽²⁾ = B_{α+β} t₁^{(α+β)D}`; for `α = 0`, `X + Y ~ N(0, t₂^{2D})` and
/// `B⁽²⁾ = B_β t₂^{βD}`. Both reductions are returned in closed form.
pub fn b2(alpha: f64, beta: f64, t1: usize, t2: usize, d: f64) -> Result<f64> {
    if !(alpha >= 0.0 && beta >= 0.0) {
        return Err(invalid(format!("B2 needs alpha, beta >= 0, got ({alpha}, {beta})")));
    }
    if t1 < 1 || t1 > t2 {
        return Err(Error::IndexOutOfRange(format!("need 1 <= t1 <= t2, got ({t1}, {t2})")));
    }
    let (t1f, t2f) = (t1 as f64, t2 as f64);
    if t1 == t2 {
        return Ok(b_alpha(alpha + beta)? * t1f.powf((alpha + beta) * d));
    }
    if alpha == 0.0 {
        return Ok(t2f.powf(beta * d) * b_alpha(beta)?);
    }
    let v1 = t1f.powf(2.0 * d);
    let v2 = t2f.powf(2.0 * d) - v1;
    let sd1 = v1.sqrt();
    let tau = v2.sqrt();
    // integrand is even in x: fold onto [0, ∞)
    let outer = |x: f64| x.powf(alpha) * std_normal(x) * shifted_abs_moment(sd1 * x, tau, beta);
    let est = quad::integrate(outer, 0.0, GAUSS_CUTOFF, Tolerance::rel(1e-10))?;
    Ok(2.0 * sd1.powf(alpha) * est.value)
}

/// `K_{α,β}(t₁, t₂)` for aggregated returns `R(t,t)`.
#[allow(non_snake_case)]
pub fn K(model: &ProcessModel, alpha: f64, beta: f64, t1: usize, t2: usize) -> Result<f64> {
    let d = model.d();
    let m = model.mixture();
    let b2v = b2(alpha, beta, t1, t2, d)?;
    let gaussian_part = b2v / ((t1 as f64).powf(alpha * d) * (t2 as f64).powf(beta * d) * b_alpha(alpha + beta)?);
    // ⟨|r₁|^q⟩ = B_q ⟨σ^q⟩ since a₁ = 1
    let abs_r1 = |q: f64| -> Result<f64> { Ok(b_alpha(q)? * m.moment(q)?) };
    let ratio = abs_r1(alpha + beta)? / (abs_r1(alpha)? * abs_r1(beta)?);
    Ok(gaussian_part * ratio)
}

// ---------------------------------------------------------------------------
// Theory curves in the common curve schema
// ---------------------------------------------------------------------------

pub fn kappa_curve(model: &ProcessModel, alpha: f64, beta: f64) -> Result<CorrelatorCurve> {
    let k = kappa(model.mixture(), alpha, beta)?;
    let points = (2..=model.horizon()).map(|n| CurvePoint::at(n, k)).collect();
    Ok(CorrelatorCurve::new(
        CurveKind::Kappa,
        Source::Theory,
        Some(alpha),
        Some(beta),
        points,
    ))
}

pub fn vol_autocorr_curve(model: &ProcessModel) -> Result<CorrelatorCurve> {
    let points = (2..=model.horizon())
        .map(|n| vol_autocorr(model, n).map(|c| CurvePoint::at(n, c)))
        .collect::<Result<_>>()?;
    Ok(CorrelatorCurve::new(
        CurveKind::VolAutocorr,
        Source::Theory,
        None,
        None,
        points,
    ))
}

pub fn linear_corr_curve(model: &ProcessModel) -> CorrelatorCurve {
    let points = (2..=model.horizon()).map(|n| CurvePoint::at(n, 0.0)).collect();
    CorrelatorCurve::new(CurveKind::Linear, Source::Theory, None, None, points)
}

#[allow(non_snake_case)]
pub fn K_curve(model: &ProcessModel, alpha: f64, beta: f64, pairs: &[(usize, usize)]) -> Result<CorrelatorCurve> {
    let points = pairs
        .iter()
        .map(|&(t1, t2)| K(model, alpha, beta, t1, t2).map(|k| CurvePoint::pair(t1, t2, k)))
        .collect::<Result<_>>()?;
    Ok(CorrelatorCurve::new(
        CurveKind::K,
        Source::Theory,
        Some(alpha),
        Some(beta),
        points,
    ))
}

/// `⟨r_t²⟩ = ⟨σ²⟩ a_t²` for `t = 1..n`.
pub fn increment_m2_curve(model: &ProcessModel) -> Result<CorrelatorCurve> {
    let s2 = model.mixture().moment(2.0)?;
    let points = (1..=model.horizon())
        .map(|t| {
            let a = model.coefficient(t);
            CurvePoint::at(t, s2 * a * a)
        })
        .collect();
    Ok(CorrelatorCurve::new(
        CurveKind::IncrementM2,
        Source::Theory,
        None,
        None,
        points,
    ))
}

/// `⟨|R(t,t)|^α⟩ = B_α ⟨σ^α⟩ t^{αD}`.
pub fn moment_curve(model: &ProcessModel, alpha: f64) -> Result<CorrelatorCurve> {
    let base = b_alpha(alpha)? * model.mixture().moment(alpha)?;
    let points = (1..=model.horizon())
        .map(|t| CurvePoint::at(t, base * (t as f64).powf(alpha * model.d())))
        .collect();
    Ok(CorrelatorCurve::new(
        CurveKind::Moment,
        Source::Theory,
        Some(alpha),
        None,
        points,
    ))
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTargets {
    /// Target `⟨σ²⟩_ρ`, equal to the variance of g.
    pub variance: f64,
    /// Survival-function tail index `ν` of g, `P(|x| > X) ~ X^{-ν}`; sets
    /// `δ - γ = ν + 1`. `f64::INFINITY` selects a point mass.
    pub tail_index: f64,
    /// Optional samples of g used to fit `σ_min` through `⟨x²⟩ / ⟨|x|⟩²`.
    pub shape_samples: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawInit {
    pub gamma: f64,
    /// Kept fixed unless shape samples are supplied.
    pub sigma_min: f64,
}

impl Default for PowerLawInit {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            sigma_min: 0.0,
        }
    }
}

/// `⟨u²⟩ / ⟨u⟩²`-type ratio of the standardized shape with lower cut `u_min`.
fn shape_moment(q: f64, gamma: f64, delta: f64, u_min: f64) -> f64 {
    shape_integral(q + gamma, delta, u_min) / shape_integral(gamma, delta, u_min)
}

/// Fit a power-law ρ: `δ` from the tail index, the scale `d` (and, with
/// shape samples, `σ_min`) by root finding on the moment targets.
pub fn calibrate(targets: &CalibrationTargets, init: PowerLawInit) -> Result<MixtureDensity> {
    let v = targets.variance;
    if !(v > 0.0 && v.is_finite()) {
        return Err(invalid(format!("variance target must be positive, got {v}")));
    }
    if targets.tail_index == f64::INFINITY {
        return MixtureDensity::degenerate(v.sqrt());
    }
    let nu = targets.tail_index;
    if !(nu > 2.0) {
        return Err(invalid(format!("finite variance needs tail_index > 2, got {nu}")));
    }
    let gamma = init.gamma;
    if !(gamma > 0.0) {
        return Err(invalid(format!("gamma must be > 0, got {gamma}")));
    }
    let delta = gamma + nu + 1.0;

    let (sigma_min, scale) = match &targets.shape_samples {
        None => {
            let sigma_min = init.sigma_min;
            if sigma_min * sigma_min >= v {
                return Err(Error::CalibrationFailed(format!(
                    "variance target {v} is not above sigma_min^2 = {}",
                    sigma_min * sigma_min
                )));
            }
            let second = |ln_s: f64| {
                let s = ln_s.exp();
                (s * s * shape_moment(2.0, gamma, delta, sigma_min / s)).ln() - v.ln()
            };
            let s0 = (v / shape_moment(2.0, gamma, delta, 0.0)).sqrt().ln();
            let (lo, hi) = bracket(&second, s0, 1.0, 80)?;
            (sigma_min, brent(second, lo, hi, 1e-14)?.exp())
        }
        Some(samples) => {
            let target = sample_kappa(samples)?;
            let kappa_at = |ln_u: f64| {
                let u = ln_u.exp();
                let m1 = shape_moment(1.0, gamma, delta, u);
                let m2 = shape_moment(2.0, gamma, delta, u);
                m2 / (m1 * m1) - target
            };
            let (lo, hi) = (-30.0, 12.0);
            if kappa_at(lo).signum() == kappa_at(hi).signum() {
                return Err(Error::CalibrationFailed(format!(
                    "sample ratio <σ²>/<σ>² = {target} is outside the range reachable with gamma={gamma}, delta={delta}"
                )));
            }
            let u_min = brent(kappa_at, lo, hi, 1e-13)?.exp();
            let s = (v / shape_moment(2.0, gamma, delta, u_min)).sqrt();
            (u_min * s, s)
        }
    };
    let m = PowerLaw::new(gamma, delta, scale.powf(delta), sigma_min)?;
    Ok(MixtureDensity::PowerLaw(m))
}

/// `⟨σ²⟩/⟨σ⟩²` implied by samples of the Gaussian mixture g.
fn sample_kappa(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData("shape fit needs at least 2 samples".into()));
    }
    let n = samples.len() as f64;
    let m1 = samples.iter().map(|x| x.abs()).sum::<f64>() / n;
    let m2 = samples.iter().map(|x| x * x).sum::<f64>() / n;
    if m1 == 0.0 {
        return Err(Error::DegenerateVariance("all shape samples are zero".into()));
    }
    let b1 = b_alpha(1.0)?;
    Ok(b1 * b1 * m2 / (m1 * m1))
}

/// Expand `[x0 - step, x0 + step]` geometrically until `f` changes sign.
fn bracket<F: Fn(f64) -> f64>(f: &F, x0: f64, step: f64, tries: usize) -> Result<(f64, f64)> {
    let mut lo = x0 - step;
    let mut hi = x0 + step;
    let mut width = step;
    for _ in 0..tries {
        let (flo, fhi) = (f(lo), f(hi));
        if flo.is_finite() && fhi.is_finite() && flo.signum() != fhi.signum() {
            return Ok((lo, hi));
        }
        width *= 1.6;
        lo = x0 - width;
        hi = x0 + width;
    }
    Err(Error::CalibrationFailed("could not bracket the scale parameter".into()))
}

/// The stand-in ρ used when no fitted density is supplied: `γ = 1`,
/// tail index 9 (so `δ = 11`), `σ_min = 0`, scale solved for `⟨σ²⟩ = 2.3e-7`.
pub fn reference_mixture() -> Result<MixtureDensity> {
    calibrate(
        &CalibrationTargets {
            variance: REFERENCE_VARIANCE,
            tail_index: REFERENCE_TAIL_INDEX,
            shape_samples: None,
        },
        PowerLawInit::default(),
    )
}

pub const REFERENCE_VARIANCE: f64 = 2.3e-7;
pub const REFERENCE_TAIL_INDEX: f64 = 9.0;
pub const REFERENCE_D: f64 = 0.364;

pub fn reference_model() -> Result<ProcessModel> {
    ProcessModel::new(REFERENCE_D, reference_mixture()?, crate::process::DEFAULT_HORIZON)
}
