//! Daily ensembles from intraday price records.
//!
//! Each calendar day (in the session's zone) contributes one history:
//! prices are sampled at `start + i·interval`, `i = 0..=bar_count`, taking the
//! last record at or before each grid point, and `r_i = ln S(t_i) - ln S(t_{i-1})`.
//! A grid point is covered when that record is at most one interval old.
//! Uncovered points carry the previous grid price forward.

use std::fs;
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime, NaiveTime, TimeZone, Utc};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::ensemble::{Ensemble, Provenance};
use crate::error::{invalid, Error, Result};
use crate::estimators::detrend;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceRecord {
    pub timestamp: DateTime<Utc>,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSpec {
    /// Wall-clock session start, `HH:MM` or `HH:MM:SS`.
    #[serde(default = "default_start")]
    pub session_start: String,
    /// IANA zone name the session start refers to.
    #[serde(default = "default_zone")]
    pub zone: String,
    #[serde(default = "default_interval")]
    pub bar_interval_minutes: u32,
    #[serde(default = "default_bars")]
    pub bar_count: usize,
    /// Fraction of the `bar_count + 1` grid points that must be covered.
    #[serde(default = "default_coverage")]
    pub min_coverage: f64,
    /// strptime-style pattern for zone-less timestamps, read in `zone`.
    /// RFC 3339 timestamps with offsets are expected when absent.
    #[serde(default)]
    pub timestamp_format: Option<String>,
}

fn default_start() -> String {
    "09:00".into()
}
fn default_zone() -> String {
    "America/New_York".into()
}
fn default_interval() -> u32 {
    10
}
fn default_bars() -> usize {
    17
}
fn default_coverage() -> f64 {
    1.0
}

impl Default for SessionSpec {
    fn default() -> Self {
        Self {
            session_start: default_start(),
            zone: default_zone(),
            bar_interval_minutes: default_interval(),
            bar_count: default_bars(),
            min_coverage: default_coverage(),
            timestamp_format: None,
        }
    }
}

impl SessionSpec {
    pub fn validate(&self) -> Result<()> {
        self.tz()?;
        self.start_time()?;
        if self.bar_count < 1 {
            return Err(invalid("bar_count must be >= 1"));
        }
        if self.bar_interval_minutes < 1 {
            return Err(invalid("bar_interval_minutes must be >= 1"));
        }
        if !(self.min_coverage > 0.0 && self.min_coverage <= 1.0) {
            return Err(invalid(format!(
                "min_coverage must lie in (0, 1], got {}",
                self.min_coverage
            )));
        }
        Ok(())
    }

    pub fn tz(&self) -> Result<Tz> {
        self.zone
            .parse()
            .map_err(|_| invalid(format!("unknown time zone `{}`", self.zone)))
    }

    fn start_time(&self) -> Result<NaiveTime> {
        NaiveTime::parse_from_str(&self.session_start, "%H:%M")
            .or_else(|_| NaiveTime::parse_from_str(&self.session_start, "%H:%M:%S"))
            .map_err(|_| invalid(format!("bad session_start `{}`", self.session_start)))
    }

    fn interval(&self) -> Duration {
        Duration::minutes(self.bar_interval_minutes as i64)
    }

    /// Grid instants for one local day, or `None` if the start time does not
    /// exist on that day (spring-forward gap).
    fn grid(&self, tz: &Tz, start: NaiveTime, day: NaiveDate) -> Option<Vec<DateTime<Utc>>> {
        let t0 = tz
            .from_local_datetime(&day.and_time(start))
            .earliest()?
            .with_timezone(&Utc);
        Some((0..=self.bar_count).map(|i| t0 + self.interval() * i as i32).collect())
    }
}

/// Parse `timestamp,price` CSV text. Records come back sorted by time; for
/// duplicated timestamps the later line wins.
pub fn parse_prices(text: &str, spec: &SessionSpec) -> Result<Vec<PriceRecord>> {
    let tz = spec.tz()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.len() != 2 || &header[0] != "timestamp" || &header[1] != "price" {
        return Err(Error::Parse {
            line: 1,
            msg: "expected header `timestamp,price`".into(),
        });
    }
    let mut records = Vec::new();
    for (k, row) in reader.records().enumerate() {
        let line = k + 2;
        let row = row.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        if row.len() != 2 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 2 fields, found {}", row.len()),
            });
        }
        let timestamp =
            parse_timestamp(&row[0], spec.timestamp_format.as_deref(), &tz).ok_or_else(|| Error::Parse {
                line,
                msg: format!("bad timestamp `{}`", &row[0]),
            })?;
        let price: f64 = row[1].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad price `{}`", &row[1]),
        })?;
        if !(price > 0.0 && price.is_finite()) {
            return Err(Error::NonPositivePrice { line, price });
        }
        records.push((timestamp, line, price));
    }
    records.sort_by_key(|&(t, line, _)| (t, line));
    let mut out: Vec<PriceRecord> = Vec::with_capacity(records.len());
    for (timestamp, line, price) in records {
        match out.last_mut() {
            Some(last) if last.timestamp == timestamp => {
                log::warn!("duplicate timestamp {timestamp} at line {line}; keeping the later record");
                last.price = price;
            }
            _ => out.push(PriceRecord { timestamp, price }),
        }
    }
    Ok(out)
}

fn parse_timestamp(s: &str, format: Option<&str>, tz: &Tz) -> Option<DateTime<Utc>> {
    match format {
        None => DateTime::parse_from_rfc3339(s).ok().map(|t| t.with_timezone(&Utc)),
        Some(f) => {
            let naive = NaiveDateTime::parse_from_str(s, f).ok()?;
            tz.from_local_datetime(&naive).earliest().map(|t| t.with_timezone(&Utc))
        }
    }
}

pub fn load_prices(path: &Path, spec: &SessionSpec) -> Result<Vec<PriceRecord>> {
    parse_prices(&fs::read_to_string(path)?, spec)
}

/// Sample each day's session grid, keep days meeting the coverage rule and
/// detrend the result.
pub fn build_ensemble(records: &[PriceRecord], spec: &SessionSpec, source: &str) -> Result<Ensemble> {
    spec.validate()?;
    if records.is_empty() {
        return Err(Error::InsufficientData("no price records".into()));
    }
    let tz = spec.tz()?;
    let start = spec.start_time()?;
    let interval = spec.interval();
    let first = records[0].timestamp.with_timezone(&tz).date_naive();
    let last = records[records.len() - 1].timestamp.with_timezone(&tz).date_naive();
    let needed = (spec.min_coverage * (spec.bar_count + 1) as f64 - 1e-9).ceil() as usize;

    let mut rows: Vec<f64> = Vec::new();
    let (mut kept, mut dropped, mut empty) = (Vec::new(), 0usize, 0usize);
    for day in first.iter_days().take_while(|d| *d <= last) {
        let Some(grid) = spec.grid(&tz, start, day) else {
            empty += 1;
            continue;
        };
        let window_lo = grid[0] - interval;
        let window_hi = grid[spec.bar_count];
        let in_window = records.partition_point(|r| r.timestamp <= window_hi)
            - records.partition_point(|r| r.timestamp < window_lo);
        if in_window == 0 {
            empty += 1;
            continue;
        }
        let mut prices = Vec::with_capacity(grid.len());
        let mut covered = 0usize;
        for &g in &grid {
            let idx = records.partition_point(|r| r.timestamp <= g);
            let fresh = idx > 0 && records[idx - 1].timestamp >= g - interval;
            if fresh {
                covered += 1;
                prices.push(Some(records[idx - 1].price));
            } else {
                prices.push(prices.last().copied().flatten());
            }
        }
        if covered < needed || prices[0].is_none() {
            dropped += 1;
            continue;
        }
        let logs: Vec<f64> = prices.iter().map(|p| p.expect("carried forward").ln()).collect();
        rows.extend(logs.windows(2).map(|w| w[1] - w[0]));
        kept.push(day);
    }
    log::info!(
        "ingest: {} sessions kept, {dropped} dropped, {empty} empty days",
        kept.len()
    );
    if kept.is_empty() {
        return Err(Error::NoCompleteSessions);
    }
    let provenance = Provenance::Ingested {
        source: source.to_string(),
        first_day: kept.first().map(|d| d.to_string()),
        last_day: kept.last().map(|d| d.to_string()),
        dropped_days: dropped,
        empty_days: empty,
    };
    let raw = Ensemble::new(rows, spec.bar_count, provenance)?;
    Ok(detrend(&raw))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub i: usize,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub histories: usize,
    pub horizon: usize,
    pub detrended: bool,
    pub columns: Vec<ColumnSummary>,
    pub provenance: Provenance,
}

pub fn ensemble_report(e: &Ensemble) -> EnsembleReport {
    let m = e.histories() as f64;
    let columns = (1..=e.horizon())
        .map(|i| {
            let mean = e.column(i).sum::<f64>() / m;
            let variance = e.column(i).map(|r| (r - mean) * (r - mean)).sum::<f64>() / m;
            ColumnSummary { i, mean, variance }
        })
        .collect();
    EnsembleReport {
        histories: e.histories(),
        horizon: e.horizon(),
        detrended: e.is_detrended(),
        columns,
        provenance: e.provenance().clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(bars: usize) -> SessionSpec {
        SessionSpec {
            bar_count: bars,
            ..SessionSpec::default()
        }
    }

    #[test]
    fn parses_rfc3339_rows() {
        let recs = parse_prices("timestamp,price\n2004-03-01T09:00:00-05:00,1.2500\n", &spec(2)).unwrap();
        assert_eq!(recs[0].price, 1.25);
        assert_eq!(recs[0].timestamp, Utc.with_ymd_and_hms(2004, 3, 1, 14, 0, 0).unwrap());
    }

    #[test]
    fn rejects_bad_rows_with_line_numbers() {
        let text = "timestamp,price\n2004-03-01T09:00:00-05:00,1.25\n2004-03-01T09:10:00-05:00,-1\n";
        assert!(matches!(
            parse_prices(text, &spec(2)),
            Err(Error::NonPositivePrice { line: 3, .. })
        ));
        let text = "timestamp,price\nyesterday,1.25\n";
        assert!(matches!(
            parse_prices(text, &spec(2)),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_prices("time,price\n", &spec(2)).is_err());
    }

    #[test]
    fn duplicate_keeps_last() {
        let text = "timestamp,price\n2004-03-01T09:00:00-05:00,1.0\n2004-03-01T09:00:00-05:00,2.0\n";
        let recs = parse_prices(text, &spec(2)).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].price, 2.0);
    }

    #[test]
    fn custom_format_is_read_in_zone() {
        let s = SessionSpec {
            timestamp_format: Some("%Y-%m-%d %H:%M".into()),
            ..spec(1)
        };
        // July: New York is on daylight time, UTC-4
        let recs = parse_prices("timestamp,price\n2004-07-01 09:00,1.0\n", &s).unwrap();
        assert_eq!(recs[0].timestamp, Utc.with_ymd_and_hms(2004, 7, 1, 13, 0, 0).unwrap());
    }

    #[test]
    fn single_step_return() {
        let text = "timestamp,price\n2004-03-01T09:00:00-05:00,1.0000\n2004-03-01T09:10:00-05:00,1.0010\n";
        let recs = parse_prices(text, &spec(1)).unwrap();
        let e = build_ensemble(&recs, &spec(1), "x").unwrap();
        assert_eq!(e.histories(), 1);
        // a single history is centered to zero by detrending
        assert_eq!(e.as_slice(), &[0.0]);
        let two = format!("{text}2004-03-02T09:00:00-05:00,1.0\n2004-03-02T09:10:00-05:00,1.0\n");
        let recs = parse_prices(&two, &spec(1)).unwrap();
        let e = build_ensemble(&recs, &spec(1), "x").unwrap();
        let half = 0.5 * 1.001f64.ln();
        assert!((e.row(0)[0] - half).abs() < 1e-15);
        assert!((e.row(1)[0] + half).abs() < 1e-15);
    }

    #[test]
    fn coverage_and_empty_days() {
        let text = "timestamp,price\n\
            2004-03-01T09:00:00-05:00,1.0\n2004-03-01T09:10:00-05:00,1.1\n\
            2004-03-01T09:20:00-05:00,1.2\n2004-03-01T09:30:00-05:00,1.2\n\
            2004-03-03T09:00:00-05:00,1.0\n2004-03-03T09:30:00-05:00,1.3\n";
        let recs = parse_prices(text, &spec(3)).unwrap();
        let e = build_ensemble(&recs, &spec(3), "x").unwrap();
        assert_eq!(e.histories(), 1);
        let Provenance::Ingested {
            dropped_days,
            empty_days,
            ..
        } = e.provenance()
        else {
            panic!()
        };
        assert_eq!((*dropped_days, *empty_days), (1, 1));

        let loose = SessionSpec {
            min_coverage: 0.7,
            ..spec(3)
        };
        let e = build_ensemble(&recs, &loose, "x").unwrap();
        assert_eq!(e.histories(), 2);

        let only_gap = parse_prices("timestamp,price\n2004-03-03T09:00:00-05:00,1.0\n", &spec(2)).unwrap();
        assert!(matches!(
            build_ensemble(&only_gap, &spec(2), "x"),
            Err(Error::NoCompleteSessions)
        ));
    }

    #[test]
    fn grid_follows_wall_clock_across_dst() {
        // 2004-04-04 is the spring-forward day in New York
        let text = "timestamp,price\n\
            2004-04-02T09:00:00-05:00,1.0\n2004-04-02T09:10:00-05:00,1.0\n\
            2004-04-05T09:00:00-04:00,1.0\n2004-04-05T09:10:00-04:00,2.0\n";
        let recs = parse_prices(text, &spec(1)).unwrap();
        let e = build_ensemble(&recs, &spec(1), "x").unwrap();
        assert_eq!(e.histories(), 2);
    }

    #[test]
    fn constant_day_and_additivity() {
        let mut text = String::from("timestamp,price\n");
        let prices = [1.2, 1.21, 1.205, 1.3];
        for (k, p) in prices.iter().enumerate() {
            text += &format!("2004-03-01T09:{:02}:00-05:00,{p}\n", k * 10);
            text += &format!("2004-03-02T09:{:02}:00-05:00,1.5\n", k * 10);
        }
        let recs = parse_prices(&text, &spec(3)).unwrap();
        let e = build_ensemble(&recs, &spec(3), "x").unwrap();
        let sum: f64 = e.row(0).iter().sum::<f64>() - e.row(1).iter().sum::<f64>();
        assert!((sum - (1.3f64.ln() - 1.2f64.ln())).abs() < 1e-15);
        let report = ensemble_report(&e);
        assert_eq!((report.histories, report.horizon), (2, 3));
        assert!(report.detrended);
    }
}
