//! An ensemble of `M` daily histories of `n` elementary returns each.
//!
//! On disk an ensemble is a CSV file with header `history,r1,...,rn` and one
//! row per history, plus a JSON sidecar (same path, extension `.json`)
//! holding the shape, the detrended flag and the provenance.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::process::{aggregate_return, ProcessModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Simulated {
        seed: u64,
        model: ProcessModel,
    },
    Ingested {
        source: String,
        first_day: Option<String>,
        last_day: Option<String>,
        /// Days with data in the session window that failed the coverage rule.
        dropped_days: usize,
        /// Calendar days without a single record in the session window.
        empty_days: usize,
    },
    /// Read from a CSV file without a sidecar.
    External {
        source: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    returns: Vec<f64>,
    histories: usize,
    horizon: usize,
    provenance: Provenance,
    detrended: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Sidecar {
    pub histories: usize,
    pub horizon: usize,
    pub detrended: bool,
    pub provenance: Provenance,
}

impl Ensemble {
    /// Row-major `M × n` returns.
    pub fn new(returns: Vec<f64>, horizon: usize, provenance: Provenance) -> Result<Self> {
        if horizon == 0 {
            return Err(invalid("ensemble horizon must be >= 1"));
        }
        if returns.is_empty() || returns.len() % horizon != 0 {
            return Err(invalid(format!(
                "{} values do not form whole histories of length {horizon}",
                returns.len()
            )));
        }
        if let Some(bad) = returns.iter().find(|r| !r.is_finite()) {
            return Err(invalid(format!("non-finite return {bad}")));
        }
        Ok(Self {
            histories: returns.len() / horizon,
            returns,
            horizon,
            provenance,
            detrended: false,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], provenance: Provenance) -> Result<Self> {
        let horizon = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != horizon) {
            return Err(invalid("ragged ensemble rows"));
        }
        Self::new(rows.concat(), horizon, provenance)
    }

    /// Number of histories `M`.
    pub fn histories(&self) -> usize {
        self.histories
    }
    /// Returns per history `n`.
    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }
    pub fn is_detrended(&self) -> bool {
        self.detrended
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.returns
    }

    pub fn row(&self, l: usize) -> &[f64] {
        &self.returns[l * self.horizon..(l + 1) * self.horizon]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.returns.chunks_exact(self.horizon)
    }

    /// Elementary return `r_i` (1-based `i`) across histories.
    pub fn column(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |row| row[i - 1])
    }

    /// `r^l(t, T)` for every history.
    pub fn aggregated(&self, t: usize, lag: usize) -> Result<Vec<f64>> {
        // validate once, then sum without rechecking
        aggregate_return(self.row(0), t, lag)?;
        Ok(self.rows().map(|row| row[t - lag..t].iter().sum()).collect())
    }

    pub(crate) fn set_detrended(mut self, returns: Vec<f64>) -> Self {
        self.returns = returns;
        self.detrended = true;
        self
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub(crate) fn mark_detrended(mut self, flag: bool) -> Self {
        self.detrended = flag;
        self
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.returns.len() * 24);
        out.push_str("history");
        for i in 1..=self.horizon {
            let _ = write!(out, ",r{i}");
        }
        out.push('\n');
        for (l, row) in self.rows().enumerate() {
            let _ = write!(out, "{l}");
            for r in row {
                let _ = write!(out, ",{r}");
            }
            out.push('\n');
        }
        out
    }

    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            histories: self.histories,
            horizon: self.horizon,
            detrended: self.detrended,
            provenance: self.provenance.clone(),
        }
    }

    /// Write the CSV and its JSON sidecar.
    pub fn write(&self, csv_path: &Path) -> Result<PathBuf> {
        fs::write(csv_path, self.to_csv_string())?;
        let side = sidecar_path(csv_path);
        fs::write(&side, serde_json::to_string_pretty(&self.sidecar())? + "\n")?;
        Ok(side)
    }

    pub fn parse_csv(text: &str, source: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        if header.get(0) != Some("history") || header.len() < 2 {
            return Err(Error::Parse {
                line: 1,
                msg: "expected header `history,r1,...,rn`".into(),
            });
        }
        for (k, name) in header.iter().enumerate().skip(1) {
            if name != format!("r{k}") {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("column {k} should be `r{k}`, found `{name}`"),
                });
            }
        }
        let horizon = header.len() - 1;
        let mut returns = Vec::new();
        for (k, record) in reader.records().enumerate() {
            let line = k + 2;
            let record = record.map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
            if record.len() != horizon + 1 {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} fields, found {}", horizon + 1, record.len()),
                });
            }
            for field in record.iter().skip(1) {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("not a number: `{field}`"),
                })?;
                returns.push(v);
            }
        }
        if returns.is_empty() {
            return Err(Error::InsufficientData("ensemble file has no histories".into()));
        }
        Self::new(
            returns,
            horizon,
            Provenance::External {
                source: source.to_string(),
            },
        )
    }

    /// Read an ensemble CSV; the sidecar, when present, restores provenance
    /// and the detrended flag.
    pub fn read(csv_path: &Path) -> Result<Self> {
        let text = fs::read_to_string(csv_path)?;
        let mut ensemble = Self::parse_csv(&text, &csv_path.display().to_string())?;
        let side = sidecar_path(csv_path);
        if side.exists() {
            let meta: Sidecar = serde_json::from_str(&fs::read_to_string(&side)?)?;
            if meta.histories != ensemble.histories || meta.horizon != ensemble.horizon {
                return Err(invalid(format!(
                    "sidecar shape {}x{} disagrees with CSV {}x{}",
                    meta.histories, meta.horizon, ensemble.histories, ensemble.horizon
                )));
            }
            ensemble = ensemble.with_provenance(meta.provenance).mark_detrended(meta.detrended);
        }
        Ok(ensemble)
    }
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}
