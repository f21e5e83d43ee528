//! Theory against empirics: per-point z-scores with parametric-bootstrap
//! error bars, plus the default statistic grids.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ensemble::Ensemble;
use crate::error::{invalid, Result};
use crate::estimators::{bootstrap_error_bars, Bootstrap, Statistic};
use crate::process::ProcessModel;

pub const DEFAULT_EXPONENTS: [f64; 4] = [0.5, 1.0, 1.5, 2.0];
pub const DEFAULT_COLLAPSE_TIMES: [usize; 4] = [1, 5, 10, 17];
pub const Z_THRESHOLD: f64 = 3.0;

/// `(t₁, t₂)` with `t₁ ∈ {1, 2, 5, 10}` and `t₁ < t₂ ≤ n`.
pub fn default_k_pairs(n: usize) -> Vec<(usize, usize)> {
    [1, 2, 5, 10]
        .into_iter()
        .filter(|&t1| t1 < n)
        .flat_map(|t1| (t1 + 1..=n).map(move |t2| (t1, t2)))
        .collect()
}

/// `(t,t)` and `(t,1)` for `t ∈ {1, 5, 10, 17}` up to `n`.
pub fn default_collapse_spec(n: usize) -> Vec<(usize, usize)> {
    let ts: Vec<usize> = DEFAULT_COLLAPSE_TIMES.into_iter().filter(|&t| t <= n).collect();
    ts.iter()
        .map(|&t| (t, t))
        .chain(ts.iter().filter(|&&t| t > 1).map(|&t| (t, 1)))
        .collect()
}

/// Every ordered `(α, β)` pair over the two grids.
pub fn kappa_statistics(alphas: &[f64], betas: &[f64]) -> Vec<Statistic> {
    alphas
        .iter()
        .flat_map(|&alpha| betas.iter().map(move |&beta| Statistic::Kappa { alpha, beta }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonPoint {
    pub statistic: String,
    pub i: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub j: Option<usize>,
    pub empirical: f64,
    pub err: f64,
    pub theory: f64,
    /// `(empirical - theory) / err`; `None` when `err = 0` and the values differ.
    pub z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub histories: usize,
    pub bootstrap: Bootstrap,
    pub points: Vec<ComparisonPoint>,
    pub total: usize,
    /// Points with `|z| > 3` or undefined `z`.
    pub outliers: usize,
}

impl ComparisonReport {
    pub fn outlier_fraction(&self) -> f64 {
        self.outliers as f64 / self.total.max(1) as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("statistic,i,j,empirical,err,theory,z\n");
        for p in &self.points {
            let j = p.j.map(|j| j.to_string()).unwrap_or_default();
            let z = p.z.map(|z| z.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p.statistic, p.i, j, p.empirical, p.err, p.theory, z
            );
        }
        out
    }
}

/// Evaluate each statistic on `e` and under `model`; error bars come from
/// `cfg.reps` synthetic ensembles of the same size as `e`.
pub fn compare(model: &ProcessModel, e: &Ensemble, stats: &[Statistic], cfg: Bootstrap) -> Result<ComparisonReport> {
    if stats.is_empty() {
        return Err(invalid("no statistics to compare"));
    }
    if model.horizon() != e.horizon() {
        return Err(invalid(format!(
            "model horizon {} differs from ensemble horizon {}",
            model.horizon(),
            e.horizon()
        )));
    }
    let cfg = Bootstrap {
        histories: e.histories(),
        detrend: cfg.detrend || e.is_detrended(),
        ..cfg
    };
    let errs = bootstrap_error_bars(model, cfg, stats)?;
    let mut points = Vec::new();
    for (stat, err) in stats.iter().zip(errs) {
        let emp = stat.empirical(e)?;
        let th = stat.theory(model)?;
        let label = stat.label();
        for ((pe, pt), err) in emp.points.iter().zip(&th.points).zip(err) {
            let diff = pe.value - pt.value;
            let z = if err > 0.0 {
                Some(diff / err)
            } else if diff == 0.0 {
                Some(0.0)
            } else {
                None
            };
            points.push(ComparisonPoint {
                statistic: label.clone(),
                i: pe.i,
                j: pe.j,
                empirical: pe.value,
                err,
                theory: pt.value,
                z,
            });
        }
    }
    let outliers = points
        .iter()
        .filter(|p| !matches!(p.z, Some(z) if z.abs() <= Z_THRESHOLD))
        .count();
    Ok(ComparisonReport {
        histories: e.histories(),
        bootstrap: cfg,
        total: points.len(),
        outliers,
        points,
    })
}
