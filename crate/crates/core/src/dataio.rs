//! Loading raw results, keeping each athlete's best run per discipline and
//! year, threshold selection by exceedance count, and mean-residual-life
//! curves.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ExceedanceSet, Observation, YearRange};
use crate::timefmt::parse_clock;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRecord {
    pub discipline: String,
    pub athlete: String,
    pub year: i32,
    /// Positive seconds.
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<String>,
}

/// Column names of the input CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub discipline: String,
    pub athlete: String,
    pub year: String,
    pub seconds: String,
    pub event: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            discipline: "discipline".into(),
            athlete: "athlete".into(),
            year: "year".into(),
            seconds: "seconds".into(),
            event: "event".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRow {
    /// 1-based line number in the source, header is line 1.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadOutcome {
    pub records: Vec<PerformanceRecord>,
    pub rejects: Vec<RejectedRow>,
}

/// Year from `YYYY` or an ISO-style date starting with `YYYY-`.
fn parse_year(s: &str) -> Option<i32> {
    let s = s.trim();
    let head = match s.find(['-', '/', 'T']) {
        Some(i) if i == 4 => &s[..4],
        Some(_) => return None,
        None => s,
    };
    head.parse().ok()
}

/// Parses results CSV. Rows that fail to parse, have non-positive times or
/// fall outside `horizon` are reported in `rejects`.
pub fn load_results<R: Read>(
    source: R,
    schema: &CsvSchema,
    horizon: Option<YearRange>,
) -> Result<LoadOutcome> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Schema("missing header row".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for h in headers.iter() {
        if !seen.insert(h) {
            return Err(Error::Schema(format!("duplicate column `{h}`")));
        }
    }
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing required column `{name}`")))
    };
    let i_disc = col(&schema.discipline)?;
    let i_ath = col(&schema.athlete)?;
    let i_year = col(&schema.year)?;
    let i_sec = col(&schema.seconds)?;
    let i_event = headers.iter().position(|h| h == schema.event);

    let mut out = LoadOutcome::default();
    for (idx, row) in reader.records().enumerate() {
        let line = idx as u64 + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                out.rejects.push(RejectedRow { line, reason: e.to_string() });
                continue;
            }
        };
        let field = |i: usize| row.get(i).unwrap_or("");
        let reject = |reason: String| RejectedRow { line, reason };
        let discipline = field(i_disc);
        let athlete = field(i_ath);
        if discipline.is_empty() || athlete.is_empty() {
            out.rejects.push(reject("empty discipline or athlete".into()));
            continue;
        }
        let Some(year) = parse_year(field(i_year)) else {
            out.rejects.push(reject(format!("unparseable year `{}`", field(i_year))));
            continue;
        };
        let seconds = match parse_clock(field(i_sec)) {
            Ok(s) if s > 0.0 => s,
            Ok(s) => {
                out.rejects.push(reject(format!("non-positive time {s}")));
                continue;
            }
            Err(_) => {
                out.rejects.push(reject(format!("unparseable seconds `{}`", field(i_sec))));
                continue;
            }
        };
        if let Some(h) = horizon {
            if !h.contains(year) {
                out.rejects.push(reject(format!("year {year} outside {}..={}", h.first, h.last)));
                continue;
            }
        }
        let event = i_event.map(field).filter(|e| !e.is_empty()).map(str::to_string);
        out.records.push(PerformanceRecord {
            discipline: discipline.to_string(),
            athlete: athlete.to_string(),
            year,
            seconds,
            event,
        });
    }
    Ok(out)
}

/// Writes records in the input CSV layout.
pub fn write_results<W: std::io::Write>(sink: W, records: &[PerformanceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["discipline", "athlete", "year", "seconds", "event"])?;
    for r in records {
        w.write_record([
            r.discipline.as_str(),
            r.athlete.as_str(),
            &r.year.to_string(),
            &r.seconds.to_string(),
            r.event.as_deref().unwrap_or(""),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Keeps the fastest run per (discipline, athlete, year), ordered by
/// discipline, year, then time.
pub fn dedup_best(records: Vec<PerformanceRecord>) -> Vec<PerformanceRecord> {
    let mut best: BTreeMap<(String, String, i32), PerformanceRecord> = BTreeMap::new();
    for r in records {
        let key = (r.discipline.clone(), r.athlete.clone(), r.year);
        match best.get(&key) {
            Some(cur) if cur.seconds <= r.seconds => {}
            _ => {
                best.insert(key, r);
            }
        }
    }
    let mut out: Vec<_> = best.into_values().collect();
    out.sort_by(|a, b| {
        (&a.discipline, a.year)
            .cmp(&(&b.discipline, b.year))
            .then(a.seconds.total_cmp(&b.seconds))
            .then_with(|| a.athlete.cmp(&b.athlete))
    });
    out
}

/// Places the threshold midway between the `target`-th and `target+1`-th
/// fastest times of `d`, so exactly `target` performances exceed it.
///
/// `records` should already be deduplicated. The horizon defaults to the span
/// of years present for `d`.
pub fn select_threshold_by_count(
    records: &[PerformanceRecord],
    d: &str,
    target: usize,
    horizon: Option<YearRange>,
) -> Result<ExceedanceSet> {
    let mut xs: Vec<(f64, i32)> = records
        .iter()
        .filter(|r| r.discipline == d && horizon.is_none_or(|h| h.contains(r.year)))
        .map(|r| (-r.seconds, r.year))
        .collect();
    if target == 0 || xs.len() < target + 1 {
        return Err(Error::InsufficientData {
            discipline: d.to_string(),
            needed: target + 1,
            available: xs.len(),
        });
    }
    // descending performance, ties broken by year for permutation invariance
    xs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let inside = xs[target - 1].0;
    let outside = xs[target].0;
    if inside == outside {
        return Err(Error::ThresholdTie {
            discipline: d.to_string(),
            seconds: -inside,
        });
    }
    let u = 0.5 * (inside + outside);
    let horizon = match horizon {
        Some(h) => h,
        None => {
            let first = xs.iter().map(|p| p.1).min().unwrap_or(0);
            let last = xs.iter().map(|p| p.1).max().unwrap_or(0);
            YearRange::new(first, last)?
        }
    };
    let mut observations: Vec<Observation> = xs[..target]
        .iter()
        .map(|&(x, year)| Observation { year, x })
        .collect();
    observations.sort_by(|a, b| a.year.cmp(&b.year).then(b.x.total_cmp(&a.x)));
    ExceedanceSet::new(d, u, horizon, observations)
}

/// How to lay out candidate thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridSpec {
    Explicit(Vec<f64>),
    /// `points` evenly spaced values from `from` to `to` inclusive.
    Linear { from: f64, to: f64, points: usize },
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        let mut v = match self {
            GridSpec::Explicit(v) => v.clone(),
            GridSpec::Linear { from, to, points } => match points {
                0 => Vec::new(),
                1 => vec![*from],
                n => (0..*n)
                    .map(|i| from + (to - from) * i as f64 / (*n - 1) as f64)
                    .collect(),
            },
        };
        v.sort_by(f64::total_cmp);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrlCurve {
    /// Candidate thresholds on the performance scale, ascending.
    pub grid: Vec<f64>,
    /// Mean excess in seconds; `None` where fewer than two points exceed.
    pub mean_excess: Vec<Option<f64>>,
    /// Half-width of the normal 95% interval.
    pub ci_half_width: Vec<Option<f64>>,
    pub counts: Vec<usize>,
}

/// Mean excess over each grid value of the performance-scale `values`.
pub fn mean_residual_life(values: &[f64], grid: &GridSpec) -> Result<MrlCurve> {
    let grid = grid.values();
    let Some(&lowest) = grid.first() else {
        return Err(Error::Domain("empty threshold grid".into()));
    };
    if values.iter().filter(|&&x| x > lowest).count() < 2 {
        return Err(Error::Domain(format!(
            "fewer than two values exceed the lowest grid point {lowest}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut curve = MrlCurve {
        grid: grid.clone(),
        mean_excess: Vec::with_capacity(grid.len()),
        ci_half_width: Vec::with_capacity(grid.len()),
        counts: Vec::with_capacity(grid.len()),
    };
    for &v in &grid {
        let above = sorted.partition_point(|&x| x > v);
        let ex = &sorted[..above];
        curve.counts.push(above);
        if above < 2 {
            curve.mean_excess.push(None);
            curve.ci_half_width.push(None);
            continue;
        }
        let n = above as f64;
        let mean = ex.iter().map(|x| x - v).sum::<f64>() / n;
        let var = ex.iter().map(|x| (x - v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        curve.mean_excess.push(Some(mean));
        curve.ci_half_width.push(Some(1.96 * var.sqrt() / n.sqrt()));
    }
    Ok(curve)
}
