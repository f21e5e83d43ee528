//! Labeled correlator series and collapse histograms, shared by theory and
//! empirical code paths.
//!
//! CSV schemas (one row per point, header always present):
//!
//! * curves: `kind,source,alpha,beta,i,j,value,err`. `i` is `n` for
//!   two-point increment correlators and `t` for per-time series; `j` is set
//!   only for `K` (as `t₂`, with `i = t₁`). Empty fields mean "not applicable".
//! * collapse: `t,T,scale,bin,center,density`, densities in rescaled units.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Kappa,
    VolAutocorr,
    #[serde(rename = "K")]
    K,
    Linear,
    /// `m_α(t,t)` of aggregated returns.
    Moment,
    /// `m_2(t,1)` of elementary returns.
    IncrementM2,
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveKind::Kappa => "kappa",
            CurveKind::VolAutocorr => "vol_autocorr",
            CurveKind::K => "K",
            CurveKind::Linear => "linear",
            CurveKind::Moment => "moment",
            CurveKind::IncrementM2 => "increment_m2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Theory,
    Empirical,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Theory => "theory",
            Source::Empirical => "empirical",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub i: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub j: Option<usize>,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub err: Option<f64>,
}

impl CurvePoint {
    pub fn at(i: usize, value: f64) -> Self {
        Self {
            i,
            j: None,
            value,
            err: None,
        }
    }
    pub fn pair(i: usize, j: usize, value: f64) -> Self {
        Self {
            i,
            j: Some(j),
            value,
            err: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorCurve {
    pub kind: CurveKind,
    pub source: Source,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub beta: Option<f64>,
    pub points: Vec<CurvePoint>,
}

impl CorrelatorCurve {
    pub fn new(
        kind: CurveKind,
        source: Source,
        alpha: Option<f64>,
        beta: Option<f64>,
        points: Vec<CurvePoint>,
    ) -> Self {
        Self {
            kind,
            source,
            alpha,
            beta,
            points,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    /// Error bars, if every point carries one.
    pub fn errors(&self) -> Option<Vec<f64>> {
        self.points.iter().map(|p| p.err).collect()
    }

    pub fn with_uniform_err(mut self, err: f64) -> Result<Self> {
        if !(err >= 0.0) {
            return Err(invalid(format!("error bar must be >= 0, got {err}")));
        }
        for p in &mut self.points {
            p.err = Some(err);
        }
        Ok(self)
    }

    pub fn with_errors(mut self, errs: &[f64]) -> Result<Self> {
        if errs.len() != self.points.len() {
            return Err(invalid(format!(
                "{} error bars for {} points",
                errs.len(),
                self.points.len()
            )));
        }
        if let Some(e) = errs.iter().find(|e| !(**e >= 0.0)) {
            return Err(invalid(format!("error bar must be >= 0, got {e}")));
        }
        for (p, &e) in self.points.iter_mut().zip(errs) {
            p.err = Some(e);
        }
        Ok(self)
    }

    /// Either every point has an error bar or none has.
    pub fn errors_consistent(&self) -> bool {
        let with = self.points.iter().filter(|p| p.err.is_some()).count();
        with == 0 || with == self.points.len()
    }
}

pub const CURVE_CSV_HEADER: &str = "kind,source,alpha,beta,i,j,value,err";

fn opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn curves_to_csv(curves: &[CorrelatorCurve]) -> String {
    let mut out = String::from(CURVE_CSV_HEADER);
    out.push('\n');
    for c in curves {
        for p in &c.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                c.kind,
                c.source,
                opt(c.alpha),
                opt(c.beta),
                p.i,
                opt(p.j),
                p.value,
                opt(p.err)
            );
        }
    }
    out
}

/// One rescaled histogram of `r(t, T) / s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseEntry {
    pub t: usize,
    #[serde(rename = "T")]
    pub lag: usize,
    /// `s = √(t^{2D} - (t-T)^{2D})`.
    pub scale: f64,
    /// Number of samples in the histogram.
    pub samples: usize,
    pub bin_width: f64,
    pub bin_centers: Vec<f64>,
    pub rescaled_density: Vec<f64>,
}

impl CollapseEntry {
    /// Left and right edges of bin `k`.
    pub fn bin_edges(&self, k: usize) -> (f64, f64) {
        let c = self.bin_centers[k];
        (c - 0.5 * self.bin_width, c + 0.5 * self.bin_width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapsePlotData {
    pub entries: Vec<CollapseEntry>,
}

pub const COLLAPSE_CSV_HEADER: &str = "t,T,scale,bin,center,density";

impl CollapsePlotData {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(COLLAPSE_CSV_HEADER);
        out.push('\n');
        for e in &self.entries {
            for (k, (c, d)) in e.bin_centers.iter().zip(&e.rescaled_density).enumerate() {
                let _ = writeln!(out, "{},{},{},{},{},{}", e.t, e.lag, e.scale, k, c, d);
            }
        }
        out
    }
}
