//! The scaling function `g(x) = ∫ ρ(σ) N(x; 0, σ²) dσ`, the
//! time-inhomogeneous return density
//! `p_{R(t,T)}(r) = g(r / s) / s` with `s = √(t^{2D} - (t-T)^{2D})`,
//! and characteristic functions of the joint process.
//!
//! Characteristic functions are real: g is even and the process is centered.

use crate::error::{Error, Result};
use crate::mixture::{head_series, shape_integral, MixtureDensity, PowerLaw};
use crate::process::{return_scale, ProcessModel};
use crate::quad::{self, Tolerance};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn tol() -> Tolerance {
    Tolerance {
        abs: 0.0,
        rel: 1e-12,
        max_panels: 20_000,
    }
}

fn gaussian(x: f64, sigma: f64) -> f64 {
    let z = x / sigma;
    INV_SQRT_2PI * (-0.5 * z * z).exp() / sigma
}

fn shape_between(a: f64, delta: f64, lo: f64, hi: f64) -> f64 {
    head_series(a, delta, lo, hi)
}

impl PowerLaw {
    /// `∫ shape(u) e^{-y²/(2u²)} / u du` over the support, in units where
    /// `g(x) = H(x/s) / (√(2π) s I₀)`.
    fn gaussian_mixture_integral(&self, y: f64) -> f64 {
        let (g, dl) = (self.gamma(), self.delta());
        let u_min = self.u_min();
        let y = y.abs();
        if y == 0.0 {
            return shape_integral(g - 1.0, dl, u_min);
        }
        // Below y/40 the Gaussian factor is < e^{-800}.
        let lo = u_min.max(y / 40.0);
        let hi = lo.max(1e3 * y.max(2f64.powf(1.0 / dl)));
        let integrand = |u: f64| {
            let v = y / u;
            self.shape(u) * (-0.5 * v * v).exp() / u
        };
        let middle = quad::integrate_log(integrand, lo.ln(), hi.ln(), tol())
            .expect("log-scale Gaussian mixture integral")
            .value;
        // Above `hi`: e^{-ε} = 1 - ε + ε²/2 with ε = y²/(2u²) ≤ 5e-7.
        let c = hi;
        let y2 = y * y;
        let tail = shape_integral(g - 1.0, dl, c) - 0.5 * y2 * shape_integral(g - 3.0, dl, c)
            + 0.125 * y2 * y2 * shape_integral(g - 5.0, dl, c);
        middle + tail
    }

    /// `∫ shape(u) e^{-λu²} du / I₀`.
    fn gaussian_transform(&self, lambda: f64) -> f64 {
        if lambda == 0.0 {
            return 1.0;
        }
        let (g, dl) = (self.gamma(), self.delta());
        let u_min = self.u_min();
        let head_hi = (1e-3 / lambda.sqrt()).min(0.5f64.powf(1.0 / dl));
        let mut total = 0.0;
        if u_min < head_hi {
            // e^{-λu²} = 1 - λu² + λ²u⁴/2 with λu² ≤ 1e-6
            total += shape_between(g, dl, u_min, head_hi) - lambda * shape_between(g + 2.0, dl, u_min, head_hi)
                + 0.5 * lambda * lambda * shape_between(g + 4.0, dl, u_min, head_hi);
        }
        let lo = u_min.max(head_hi);
        // e^{-λu²} < e^{-80} above
        let hi = (80.0 / lambda).sqrt();
        if hi > lo {
            let integrand = |u: f64| self.shape(u) * (-lambda * u * u).exp();
            total += quad::integrate_log(integrand, lo.ln(), hi.ln(), tol())
                .expect("log-scale Gaussian transform")
                .value;
        }
        total / self.shape_norm()
    }
}

/// The scaling function `g(x)`.
pub fn g_density(m: &MixtureDensity, x: f64) -> f64 {
    match m {
        MixtureDensity::Degenerate { sigma0 } => gaussian(x, *sigma0),
        MixtureDensity::PowerLaw(p) => {
            let s = p.scale();
            INV_SQRT_2PI * p.gaussian_mixture_integral(x / s) / (s * p.shape_norm())
        }
    }
}

/// `E[exp(-σ² w / 2)]` under ρ: the characteristic function of a centered
/// Gaussian mixture whose conditional variance is `w σ²`, evaluated at 1.
fn mixture_gaussian_transform(m: &MixtureDensity, w: f64) -> f64 {
    match m {
        MixtureDensity::Degenerate { sigma0 } => (-0.5 * w * sigma0 * sigma0).exp(),
        MixtureDensity::PowerLaw(p) => {
            let s = p.scale();
            p.gaussian_transform(0.5 * w * s * s)
        }
    }
}

/// Characteristic function of one elementary return with unit coefficient:
/// `p̃¹(k) = ∫ ρ(σ) e^{-k²σ²/2} dσ`.
pub fn char_fn_single(m: &MixtureDensity, k: f64) -> f64 {
    mixture_gaussian_transform(m, k * k)
}

/// Joint characteristic function `p̃ⁿ(k_1, …, k_n)` of the first `ks.len()`
/// elementary returns, `∫ ρ(σ) Π_i exp(-k_i² a_i² σ² / 2) dσ`.
pub fn joint_char_fn(model: &ProcessModel, ks: &[f64]) -> Result<f64> {
    if ks.is_empty() || ks.len() > model.horizon() {
        return Err(Error::IndexOutOfRange(format!(
            "joint characteristic function needs 1..={} arguments, got {}",
            model.horizon(),
            ks.len()
        )));
    }
    let w: f64 = ks
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let a = model.coefficient(i + 1);
            k * k * a * a
        })
        .sum();
    Ok(mixture_gaussian_transform(model.mixture(), w))
}

/// `p̃ⁿ(k, …, k)`, which by the telescoping of `a_i²` equals `p̃¹(n^D k)`.
pub fn char_fn_diag(model: &ProcessModel, n: usize, k: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::IndexOutOfRange("n must be >= 1".into()));
    }
    joint_char_fn(model, &vec![k; n])
}

/// `p̃ⁿ(0, …, k_i, …, 0)` for 1-based `i`.
pub fn char_fn_marginal(model: &ProcessModel, i: usize, k: f64) -> Result<f64> {
    if i == 0 || i > model.horizon() {
        return Err(Error::IndexOutOfRange(format!(
            "marginal index {i} outside 1..={}",
            model.horizon()
        )));
    }
    let mut ks = vec![0.0; i];
    ks[i - 1] = k;
    joint_char_fn(model, &ks)
}

/// Query for the density of `R(t, T)` at `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnPdfQuery {
    pub t: usize,
    pub lag: usize,
    pub r: f64,
}

pub fn return_pdf(model: &ProcessModel, q: ReturnPdfQuery) -> Result<f64> {
    if q.lag < 1 || q.lag > q.t {
        return Err(Error::IndexOutOfRange(format!(
            "need 1 <= T <= t, got t={}, T={}",
            q.t, q.lag
        )));
    }
    let s = return_scale(model.d(), q.t, q.lag);
    Ok(g_density(model.mixture(), q.r / s) / s)
}

/// `(x, g(x))` on a uniform grid of `points` nodes over `[-half_width, half_width]`.
pub fn tabulate_g(m: &MixtureDensity, half_width: f64, points: usize) -> Vec<(f64, f64)> {
    grid(half_width, points).map(|x| (x, g_density(m, x))).collect()
}

pub fn tabulate_return_pdf(
    model: &ProcessModel,
    t: usize,
    lag: usize,
    half_width: f64,
    points: usize,
) -> Result<Vec<(f64, f64)>> {
    grid(half_width, points)
        .map(|r| return_pdf(model, ReturnPdfQuery { t, lag, r }).map(|p| (r, p)))
        .collect()
}

fn grid(half_width: f64, points: usize) -> impl Iterator<Item = f64> {
    let points = points.max(2);
    let step = 2.0 * half_width / (points - 1) as f64;
    (0..points).map(move |j| -half_width + j as f64 * step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::normalize;
    use std::f64::consts::PI;

    /// Independent oracle: g by direct σ-quadrature of ρ(σ)·N(x; 0, σ²).
    fn g_oracle(m: &MixtureDensity, x: f64) -> f64 {
        let f = |sigma: f64| m.density(sigma).unwrap() * gaussian(x, sigma);
        quad::integrate_log(
            f,
            -60.0,
            60.0,
            Tolerance {
                abs: 0.0,
                rel: 1e-13,
                max_panels: 50_000,
            },
        )
        .unwrap()
        .value
    }

    #[test]
    fn degenerate_peak() {
        let m = MixtureDensity::degenerate(1.0).unwrap();
        assert!((g_density(&m, 0.0) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn g_matches_direct_quadrature() {
        for (gamma, delta, d, smin) in [
            (1.0, 4.0, 1.0, 0.0),
            (1.0, 11.0, 3.0, 0.0),
            (0.4, 3.0, 0.2, 0.1),
            (2.0, 6.0, 5.0, 0.5),
        ] {
            let m = normalize(gamma, delta, d, smin).unwrap();
            for x in [0.0, 1e-9, 0.3, 1.0, 4.0, 30.0, 500.0] {
                let got = g_density(&m, x);
                let want = g_oracle(&m, x);
                assert!(
                    ((got - want) / want).abs() < 1e-9,
                    "x={x} ({gamma},{delta},{d},{smin}): {got} vs {want}"
                );
                assert_eq!(got, g_density(&m, -x));
            }
        }
    }

    #[test]
    fn g_integrates_to_one() {
        let m = normalize(1.0, 4.0, 1.0, 0.0).unwrap();
        let half = quad::integrate_log(
            |x| g_density(&m, x),
            -40.0,
            40.0,
            Tolerance {
                abs: 0.0,
                rel: 1e-12,
                max_panels: 20_000,
            },
        )
        .unwrap()
        .value;
        assert!((2.0 * half - 1.0).abs() < 1e-8, "{}", 2.0 * half);
    }

    #[test]
    fn characteristic_function_basics() {
        let deg = ProcessModel::new(0.5, MixtureDensity::degenerate(2.0).unwrap(), 17).unwrap();
        for n in [1, 4, 17] {
            let k = 0.3;
            let want = (-(n as f64) * 4.0 * k * k / 2.0).exp();
            assert!((char_fn_diag(&deg, n, k).unwrap() - want).abs() < 1e-14);
        }
        let pl = ProcessModel::new(0.36, normalize(1.0, 5.0, 1.0, 0.0).unwrap(), 17).unwrap();
        assert_eq!(char_fn_diag(&pl, 5, 0.0).unwrap(), 1.0);
        assert!(char_fn_diag(&pl, 18, 1.0).is_err());
        assert!(char_fn_diag(&pl, 0, 1.0).is_err());
    }

    #[test]
    fn characteristic_function_against_direct_quadrature() {
        let m = normalize(1.0, 5.0, 1.0, 0.0).unwrap();
        for k in [1e-4, 0.1, 1.0, 10.0, 300.0] {
            let f = |sigma: f64| m.density(sigma).unwrap() * (-0.5 * k * k * sigma * sigma).exp();
            let want = quad::integrate_log(
                f,
                -60.0,
                60.0,
                Tolerance {
                    abs: 0.0,
                    rel: 1e-13,
                    max_panels: 50_000,
                },
            )
            .unwrap()
            .value;
            let got = char_fn_single(&m, k);
            assert!(((got - want) / want).abs() < 1e-9, "k={k}: {got} vs {want}");
        }
    }

    #[test]
    fn return_pdf_reductions() {
        let pl = ProcessModel::new(0.358, normalize(1.0, 5.0, 1.0, 0.0).unwrap(), 17).unwrap();
        let t = 7;
        let r = 0.8;
        let s = (t as f64).powf(pl.d());
        let direct = g_density(pl.mixture(), r / s) / s;
        let got = return_pdf(&pl, ReturnPdfQuery { t, lag: t, r }).unwrap();
        assert!(((got - direct) / direct).abs() < 1e-14);
        assert!((pl.return_scale(5, 1) - 0.683_697_453_133_056_1).abs() < 1e-12);
        assert!(return_pdf(&pl, ReturnPdfQuery { t: 2, lag: 3, r }).is_err());

        let bm = ProcessModel::new(0.5, MixtureDensity::degenerate(1.5).unwrap(), 17).unwrap();
        for (t, lag) in [(3, 2), (10, 2), (17, 2)] {
            let p = return_pdf(&bm, ReturnPdfQuery { t, lag, r: 0.4 }).unwrap();
            let want = gaussian(0.4, 1.5 * (lag as f64).sqrt());
            assert!((p - want).abs() < 1e-14);
        }
    }
}
