//! Ensemble estimators: averages over histories at fixed intra-session time.
//!
//! Every sum runs over histories with compensated (Neumaier) accumulation,
//! which keeps results stable under reordering of histories.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{CollapseEntry, CollapsePlotData, CorrelatorCurve, CurveKind, CurvePoint, Source};
use crate::ensemble::Ensemble;
use crate::error::{invalid, Error, Result};
use crate::process::{return_scale, simulate_ensemble, ProcessModel};
use crate::rng::replicate_seed;
use crate::theory;

fn neumaier<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn mean<I: IntoIterator<Item = f64>>(xs: I, n: usize) -> f64 {
    neumaier(xs) / n as f64
}

/// Population standard deviation.
fn pop_sd(xs: &[f64]) -> f64 {
    let m = mean(xs.iter().copied(), xs.len());
    mean(xs.iter().map(|x| (x - m) * (x - m)), xs.len()).sqrt()
}

fn check_index(e: &Ensemble, name: &str, i: usize, lo: usize) -> Result<()> {
    if i < lo || i > e.horizon() {
        return Err(Error::IndexOutOfRange(format!(
            "{name} = {i} outside {lo}..={}",
            e.horizon()
        )));
    }
    Ok(())
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(invalid(format!("{name} must be > 0, got {x}")));
    }
    Ok(())
}

/// Subtract each column's ensemble mean. Already-detrended ensembles are
/// returned unchanged, so the operation is idempotent bit for bit.
pub fn detrend(e: &Ensemble) -> Ensemble {
    if e.is_detrended() {
        return e.clone();
    }
    let n = e.horizon();
    let means: Vec<f64> = (1..=n).map(|i| mean(e.column(i), e.histories())).collect();
    let mut out = e.as_slice().to_vec();
    for row in out.chunks_exact_mut(n) {
        for (r, m) in row.iter_mut().zip(&means) {
            *r -= m;
        }
    }
    e.clone().set_detrended(out)
}

/// `m_α(t,t) = ⟨|r(t,t)|^α⟩` over histories.
pub fn emp_moment(e: &Ensemble, t: usize, alpha: f64) -> Result<f64> {
    check_index(e, "t", t, 1)?;
    check_positive("alpha", alpha)?;
    let agg = e.aggregated(t, t)?;
    Ok(mean(agg.iter().map(|r| r.abs().powf(alpha)), agg.len()))
}

/// `m₂(t,1)` for `t = 1..n`.
pub fn emp_increment_second_moment(e: &Ensemble) -> Vec<f64> {
    (1..=e.horizon())
        .map(|i| mean(e.column(i).map(|r| r * r), e.histories()))
        .collect()
}

/// `⟨r₁ r_n⟩ / √(m₂(1,1) m₂(n,1))`.
pub fn emp_linear_corr(e: &Ensemble, n: usize) -> Result<f64> {
    check_index(e, "n", n, 2)?;
    let m = e.histories();
    let cross = mean(e.rows().map(|row| row[0] * row[n - 1]), m);
    let v1 = mean(e.column(1).map(|r| r * r), m);
    let vn = mean(e.column(n).map(|r| r * r), m);
    if v1 == 0.0 || vn == 0.0 {
        return Err(Error::DegenerateVariance(format!(
            "zero second moment in column 1 or {n}"
        )));
    }
    Ok(cross / (v1 * vn).sqrt())
}

/// `κ^e = M Σ|r₁|^α|r_n|^β / (Σ|r₁|^α Σ|r_n|^β)`.
pub fn emp_kappa(e: &Ensemble, alpha: f64, beta: f64, n: usize) -> Result<f64> {
    check_index(e, "n", n, 2)?;
    check_positive("alpha", alpha)?;
    check_positive("beta", beta)?;
    let joint = neumaier(
        e.rows()
            .map(|row| row[0].abs().powf(alpha) * row[n - 1].abs().powf(beta)),
    );
    let s1 = neumaier(e.column(1).map(|r| r.abs().powf(alpha)));
    let sn = neumaier(e.column(n).map(|r| r.abs().powf(beta)));
    if s1 == 0.0 || sn == 0.0 {
        return Err(Error::ZeroDenominator(format!("kappa({alpha},{beta}) at n={n}")));
    }
    Ok(e.histories() as f64 * joint / (s1 * sn))
}

/// Empirical volatility autocorrelation, term by term as the sum form reads:
/// `[Σ|r₁||r_n| - (1/M)Σ|r₁|Σ|r_n|] / [Σ|r₁|² - (1/M)(Σ|r₁|)²]`.
pub fn emp_vol_autocorr(e: &Ensemble, n: usize) -> Result<f64> {
    check_index(e, "n", n, 2)?;
    let m = e.histories() as f64;
    let s11 = neumaier(e.rows().map(|row| row[0].abs() * row[n - 1].abs()));
    let s1 = neumaier(e.column(1).map(f64::abs));
    let sn = neumaier(e.column(n).map(f64::abs));
    let sq = neumaier(e.column(1).map(|r| r * r));
    let den = sq - s1 * s1 / m;
    if !(den > 0.0) {
        return Err(Error::DegenerateVariance("|r_1| has zero variance".into()));
    }
    Ok((s11 - s1 * sn / m) / den)
}

/// `K^e = M Σ|R(t₁)|^α|R(t₂)|^β / (Σ|R(t₁)|^α Σ|R(t₂)|^β)` with `R(t) = r(t,t)`.
#[allow(non_snake_case)]
pub fn emp_K(e: &Ensemble, alpha: f64, beta: f64, t1: usize, t2: usize) -> Result<f64> {
    if t1 < 1 || t1 > t2 || t2 > e.horizon() {
        return Err(Error::IndexOutOfRange(format!(
            "need 1 <= t1 <= t2 <= {}, got ({t1}, {t2})",
            e.horizon()
        )));
    }
    if !(alpha >= 0.0 && beta >= 0.0) {
        return Err(invalid(format!("alpha, beta must be >= 0, got ({alpha}, {beta})")));
    }
    let r1 = e.aggregated(t1, t1)?;
    let r2 = e.aggregated(t2, t2)?;
    let p1: Vec<f64> = r1.iter().map(|r| r.abs().powf(alpha)).collect();
    let p2: Vec<f64> = r2.iter().map(|r| r.abs().powf(beta)).collect();
    let joint = neumaier(p1.iter().zip(&p2).map(|(a, b)| a * b));
    let s1 = neumaier(p1.iter().copied());
    let s2 = neumaier(p2.iter().copied());
    if s1 == 0.0 || s2 == 0.0 {
        return Err(Error::ZeroDenominator(format!("K({alpha},{beta}) at ({t1},{t2})")));
    }
    Ok(e.histories() as f64 * joint / (s1 * s2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DEstimate {
    pub d: f64,
    /// Standard deviation of the per-α estimates.
    pub stderr: f64,
    /// `(α, slope/α)` for each α.
    pub per_alpha: Vec<(f64, f64)>,
}

/// Least-squares slope of `ln m_α(t,t)` against `ln t`, `t = 1..n`, divided
/// by α and averaged over the α grid.
pub fn estimate_d(e: &Ensemble, alphas: &[f64]) -> Result<DEstimate> {
    if alphas.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 alphas, got {}",
            alphas.len()
        )));
    }
    if e.horizon() < 3 {
        return Err(Error::InsufficientData(format!("need n >= 3, got {}", e.horizon())));
    }
    if e.histories() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 histories, got {}",
            e.histories()
        )));
    }
    let xs: Vec<f64> = (1..=e.horizon()).map(|t| (t as f64).ln()).collect();
    let xbar = mean(xs.iter().copied(), xs.len());
    let sxx = neumaier(xs.iter().map(|x| (x - xbar) * (x - xbar)));
    let mut per_alpha = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mut ys = Vec::with_capacity(xs.len());
        for t in 1..=e.horizon() {
            let m = emp_moment(e, t, alpha)?;
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::InsufficientData(format!(
                    "moment of order {alpha} vanishes at t={t}"
                )));
            }
            ys.push(m.ln());
        }
        let ybar = mean(ys.iter().copied(), ys.len());
        let sxy = neumaier(xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)));
        per_alpha.push((alpha, sxy / sxx / alpha));
    }
    let ds: Vec<f64> = per_alpha.iter().map(|p| p.1).collect();
    Ok(DEstimate {
        d: mean(ds.iter().copied(), ds.len()),
        stderr: pop_sd(&ds),
        per_alpha,
    })
}

/// Rescaled histograms of `r(t,T)/s` with `s = √(t^{2D} - (t-T)^{2D})`.
/// Each entry uses `bins` uniform bins over ±5 standard deviations of its own
/// rescaled sample; densities integrate to the in-range fraction.
pub fn collapse(e: &Ensemble, d: f64, spec: &[(usize, usize)], bins: usize) -> Result<CollapsePlotData> {
    if bins < 10 {
        return Err(invalid(format!("collapse needs at least 10 bins, got {bins}")));
    }
    if !(d > 0.0 && d < 1.0) {
        return Err(invalid(format!("D must lie in (0, 1), got {d}")));
    }
    let mut entries = Vec::with_capacity(spec.len());
    for &(t, lag) in spec {
        let raw = e.aggregated(t, lag)?;
        let s = return_scale(d, t, lag);
        let xs: Vec<f64> = raw.iter().map(|r| r / s).collect();
        let sd = pop_sd(&xs);
        let half = if sd > 0.0 { 5.0 * sd } else { 1.0 };
        let width = 2.0 * half / bins as f64;
        let mut counts = vec![0usize; bins];
        for x in &xs {
            let k = ((x + half) / width).floor();
            if k >= 0.0 && (k as usize) < bins {
                counts[k as usize] += 1;
            }
        }
        let norm = xs.len() as f64 * width;
        entries.push(CollapseEntry {
            t,
            lag,
            scale: s,
            samples: xs.len(),
            bin_width: width,
            bin_centers: (0..bins).map(|k| -half + (k as f64 + 0.5) * width).collect(),
            rescaled_density: counts.iter().map(|&c| c as f64 / norm).collect(),
        });
    }
    Ok(CollapsePlotData { entries })
}

/// Population standard deviation of the κ values across `n`.
pub fn kappa_error_bars(curve: &CorrelatorCurve) -> Result<f64> {
    if curve.kind != CurveKind::Kappa {
        return Err(invalid(format!("expected a kappa curve, got {}", curve.kind)));
    }
    if curve.points.len() < 2 {
        return Err(Error::InsufficientData(
            "kappa error bar needs at least 2 points".into(),
        ));
    }
    Ok(pop_sd(&curve.values()))
}

/// A statistic evaluated point by point on an ensemble; the same descriptor
/// produces the matching theory curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    Kappa {
        alpha: f64,
        beta: f64,
    },
    VolAutocorr,
    Linear,
    #[serde(rename = "K")]
    K {
        alpha: f64,
        beta: f64,
        pairs: Vec<(usize, usize)>,
    },
    IncrementM2,
    Moment {
        alpha: f64,
    },
}

impl Statistic {
    pub fn empirical(&self, e: &Ensemble) -> Result<CorrelatorCurve> {
        let n = e.horizon();
        let lagged = |f: &dyn Fn(usize) -> Result<f64>| -> Result<Vec<CurvePoint>> {
            (2..=n).map(|i| f(i).map(|v| CurvePoint::at(i, v))).collect()
        };
        let (kind, alpha, beta, points) = match self {
            Statistic::Kappa { alpha, beta } => (
                CurveKind::Kappa,
                Some(*alpha),
                Some(*beta),
                lagged(&|i| emp_kappa(e, *alpha, *beta, i))?,
            ),
            Statistic::VolAutocorr => (CurveKind::VolAutocorr, None, None, lagged(&|i| emp_vol_autocorr(e, i))?),
            Statistic::Linear => (CurveKind::Linear, None, None, lagged(&|i| emp_linear_corr(e, i))?),
            Statistic::K { alpha, beta, pairs } => {
                let points = pairs
                    .iter()
                    .map(|&(t1, t2)| emp_K(e, *alpha, *beta, t1, t2).map(|v| CurvePoint::pair(t1, t2, v)))
                    .collect::<Result<_>>()?;
                (CurveKind::K, Some(*alpha), Some(*beta), points)
            }
            Statistic::IncrementM2 => {
                let points = emp_increment_second_moment(e)
                    .into_iter()
                    .enumerate()
                    .map(|(k, v)| CurvePoint::at(k + 1, v))
                    .collect();
                (CurveKind::IncrementM2, None, None, points)
            }
            Statistic::Moment { alpha } => {
                let points = (1..=n)
                    .map(|t| emp_moment(e, t, *alpha).map(|v| CurvePoint::at(t, v)))
                    .collect::<Result<_>>()?;
                (CurveKind::Moment, Some(*alpha), None, points)
            }
        };
        Ok(CorrelatorCurve::new(kind, Source::Empirical, alpha, beta, points))
    }

    pub fn theory(&self, model: &ProcessModel) -> Result<CorrelatorCurve> {
        match self {
            Statistic::Kappa { alpha, beta } => theory::kappa_curve(model, *alpha, *beta),
            Statistic::VolAutocorr => theory::vol_autocorr_curve(model),
            Statistic::Linear => Ok(theory::linear_corr_curve(model)),
            Statistic::K { alpha, beta, pairs } => theory::K_curve(model, *alpha, *beta, pairs),
            Statistic::IncrementM2 => theory::increment_m2_curve(model),
            Statistic::Moment { alpha } => theory::moment_curve(model, *alpha),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Statistic::Kappa { alpha, beta } => format!("kappa({alpha},{beta})"),
            Statistic::VolAutocorr => "vol_autocorr".into(),
            Statistic::Linear => "linear".into(),
            Statistic::K { alpha, beta, .. } => format!("K({alpha},{beta})"),
            Statistic::IncrementM2 => "increment_m2".into(),
            Statistic::Moment { alpha } => format!("moment({alpha})"),
        }
    }
}

/// Parametric bootstrap settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bootstrap {
    /// Histories per synthetic ensemble.
    pub histories: usize,
    pub reps: usize,
    pub seed: u64,
    /// Detrend each synthetic ensemble, mirroring the treatment of the data.
    #[serde(default)]
    pub detrend: bool,
}

/// Per-point population standard deviation of each statistic over `reps`
/// synthetic ensembles simulated from `model`.
pub fn bootstrap_error_bars(model: &ProcessModel, cfg: Bootstrap, stats: &[Statistic]) -> Result<Vec<Vec<f64>>> {
    let seeds: Vec<u64> = (0..cfg.reps as u64).map(|r| replicate_seed(cfg.seed, r)).collect();
    bootstrap_with_seeds(model, cfg.histories, &seeds, cfg.detrend, stats)
}

/// Same as [`bootstrap_error_bars`] with explicit per-replicate seeds.
pub fn bootstrap_with_seeds(
    model: &ProcessModel,
    histories: usize,
    seeds: &[u64],
    detrend_each: bool,
    stats: &[Statistic],
) -> Result<Vec<Vec<f64>>> {
    if seeds.len() < 2 {
        return Err(invalid(format!("bootstrap needs reps >= 2, got {}", seeds.len())));
    }
    let replicates: Vec<Vec<Vec<f64>>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut e = simulate_ensemble(model, histories, seed)?;
            if detrend_each {
                e = detrend(&e);
            }
            stats.iter().map(|s| s.empirical(&e).map(|c| c.values())).collect()
        })
        .collect::<Result<_>>()?;
    Ok((0..stats.len())
        .map(|k| {
            let len = replicates[0][k].len();
            (0..len)
                .map(|p| pop_sd(&replicates.iter().map(|rep| rep[k][p]).collect::<Vec<_>>()))
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Provenance;
    use crate::mixture::MixtureDensity;

    fn ens(rows: &[Vec<f64>]) -> Ensemble {
        Ensemble::from_rows(rows, Provenance::External { source: "t".into() }).unwrap()
    }

    #[test]
    fn detrend_basics() {
        let e = ens(&[vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]]);
        let d = detrend(&e);
        assert_eq!(d.column(1).collect::<Vec<_>>(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(d.column(2).collect::<Vec<_>>(), vec![0.0; 3]);
        assert!(d.is_detrended());
        assert_eq!(detrend(&d), d);
    }

    #[test]
    fn small_fixtures() {
        let e = ens(&[vec![0.1, -0.1]]);
        assert_eq!(emp_moment(&e, 2, 2.0).unwrap(), 0.0);
        assert!(emp_moment(&e, 3, 2.0).is_err());
        assert!(emp_moment(&e, 1, 0.0).is_err());

        let same = ens(&[vec![1.0, 1.0], vec![-2.0, -2.0], vec![0.5, 0.5]]);
        assert!((emp_linear_corr(&same, 2).unwrap() - 1.0).abs() < 1e-15);
        assert!((emp_vol_autocorr(&same, 2).unwrap() - 1.0).abs() < 1e-15);
        let k = emp_kappa(&same, 1.0, 1.0, 2).unwrap();
        assert!(k >= 1.0);
        let opp = ens(&[vec![1.0, -1.0], vec![-2.0, 2.0], vec![0.5, -0.5]]);
        assert!((emp_linear_corr(&opp, 2).unwrap() + 1.0).abs() < 1e-15);

        let zeros = ens(&[vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(emp_increment_second_moment(&zeros), vec![0.0, 0.0]);
        assert!(matches!(emp_linear_corr(&zeros, 2), Err(Error::DegenerateVariance(_))));
        assert!(matches!(emp_kappa(&zeros, 1.0, 1.0, 2), Err(Error::ZeroDenominator(_))));
        assert!(matches!(emp_vol_autocorr(&zeros, 2), Err(Error::DegenerateVariance(_))));
    }

    #[test]
    fn k_alpha_zero_is_one() {
        let e = ens(&[vec![0.3, -0.1, 0.2], vec![-0.5, 0.4, 0.1], vec![0.2, 0.2, -0.7]]);
        for (t1, t2) in [(1, 1), (1, 3), (2, 3)] {
            assert_eq!(emp_K(&e, 0.0, 1.5, t1, t2).unwrap(), 1.0);
        }
        assert!(emp_K(&e, 1.0, 1.0, 3, 2).is_err());
    }

    #[test]
    fn kappa_error_bar_convention() {
        let c = CorrelatorCurve::new(
            CurveKind::Kappa,
            Source::Empirical,
            Some(1.0),
            Some(1.0),
            vec![CurvePoint::at(2, 1.0), CurvePoint::at(3, 3.0)],
        );
        assert_eq!(kappa_error_bars(&c).unwrap(), 1.0);
        let flat = CorrelatorCurve::new(
            CurveKind::Kappa,
            Source::Empirical,
            None,
            None,
            vec![CurvePoint::at(2, 1.2); 5],
        );
        assert_eq!(kappa_error_bars(&flat).unwrap(), 0.0);
        let one = CorrelatorCurve::new(
            CurveKind::Kappa,
            Source::Empirical,
            None,
            None,
            vec![CurvePoint::at(2, 1.2)],
        );
        assert!(matches!(kappa_error_bars(&one), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn estimate_d_preconditions() {
        let e = ens(&[vec![0.1, 0.2, 0.3]]);
        assert!(matches!(estimate_d(&e, &[1.0, 2.0]), Err(Error::InsufficientData(_))));
        let e = ens(&[vec![0.1, 0.2, 0.3], vec![0.2, -0.1, 0.4]]);
        assert!(matches!(estimate_d(&e, &[1.0]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn brownian_moments_and_d() {
        let model = ProcessModel::new(0.5, MixtureDensity::degenerate(1.0).unwrap(), 17).unwrap();
        let e = simulate_ensemble(&model, 20_000, 3).unwrap();
        let m4 = emp_moment(&e, 4, 2.0).unwrap();
        // Var(r(4,4)) = 4, SE of the mean of a scaled χ²₁ is 4√(2/M)
        assert!((m4 - 4.0).abs() < 3.0 * 4.0 * (2.0 / 20_000f64).sqrt());
        let est = estimate_d(&e, &[0.5, 1.0, 1.5, 2.0]).unwrap();
        assert!((est.d - 0.5).abs() < 0.02, "{est:?}");
    }

    #[test]
    fn collapse_identity_and_normalization() {
        let model = ProcessModel::new(0.5, MixtureDensity::degenerate(1.0).unwrap(), 17).unwrap();
        let e = simulate_ensemble(&model, 5_000, 9).unwrap();
        let c = collapse(&e, 0.5, &[(1, 1), (10, 10)], 40).unwrap();
        assert_eq!(c.entries[0].scale, 1.0);
        for entry in &c.entries {
            let mass: f64 = entry.rescaled_density.iter().sum::<f64>() * entry.bin_width;
            assert!((mass - 1.0).abs() < 1e-3);
            assert!(entry.rescaled_density.iter().all(|d| *d >= 0.0));
        }
        assert!(collapse(&e, 0.5, &[(1, 1)], 5).is_err());
        assert!(collapse(&e, 0.5, &[(18, 1)], 20).is_err());
    }

    #[test]
    fn bootstrap_identical_seeds_give_zero() {
        let model = ProcessModel::new(0.36, MixtureDensity::degenerate(1.0).unwrap(), 5).unwrap();
        let stats = [Statistic::VolAutocorr, Statistic::Kappa { alpha: 1.0, beta: 1.0 }];
        let errs = bootstrap_with_seeds(&model, 100, &[4, 4], false, &stats).unwrap();
        assert!(errs.iter().flatten().all(|e| *e == 0.0));
        assert!(bootstrap_with_seeds(&model, 100, &[4], false, &stats).is_err());
    }
}
