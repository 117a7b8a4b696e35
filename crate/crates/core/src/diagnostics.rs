//! Goodness-of-fit diagnostics: exponential QQ of transformed excesses with a
//! simulation envelope, and yearly count calibration against Poisson bands.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{DiscreteCDF, Poisson};

use crate::error::{Error, Result};
use crate::inference::percentile;
use crate::model::{gpd_survival, poisson_measure_above, AftMode, ExceedanceSet, GlobalModel};
use crate::simgen::CounterRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqOptions {
    pub replicates: usize,
    pub seed: u64,
    /// Restrict to one discipline; `None` pools all of them.
    pub discipline: Option<String>,
    pub level: f64,
}

impl Default for QqOptions {
    fn default() -> Self {
        Self {
            replicates: 1000,
            seed: 0x99,
            discipline: None,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqSeries {
    pub discipline: Option<String>,
    /// Sorted transformed excesses.
    pub observed: Vec<f64>,
    /// Unit-exponential plotting positions `-ln(1 - i/(n+1))`.
    pub theoretical: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub ks_distance: f64,
    /// KS distance exceeded by 5% of replicates.
    pub ks_envelope_95: f64,
}

impl QqSeries {
    pub fn passes_ks(&self) -> bool {
        self.ks_distance <= self.ks_envelope_95
    }

    /// Share of points inside the pointwise envelope.
    pub fn envelope_coverage(&self) -> f64 {
        let inside = self
            .observed
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .filter(|(o, (l, u))| *o >= *l && *o <= *u)
            .count();
        inside as f64 / self.observed.len().max(1) as f64
    }
}

/// Maps each exceedance to `-ln S(x - u)` under the model, which is unit
/// exponential when the model is right.
pub fn transformed_excesses(model: &GlobalModel, data: &[ExceedanceSet]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for set in data {
        let d = &set.discipline;
        for o in &set.observations {
            let yp = model.year_params(d, o.year, AftMode::WithAft)?;
            let su = yp.threshold_scale(set.threshold);
            let s = gpd_survival(o.x - set.threshold, su, yp.xi);
            if !(s > 0.0 && su > 0.0) {
                return Err(Error::RecordOutsideSupport {
                    discipline: d.clone(),
                    year: o.year,
                    record_seconds: -o.x,
                });
            }
            out.push(-s.ln());
        }
    }
    Ok(out)
}

fn ks_exponential(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let f = -(-z).exp_m1();
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Exponential QQ series with a pointwise envelope and KS reference from
/// replicates holding the per-cell counts fixed.
pub fn qq_exponential(model: &GlobalModel, data: &[ExceedanceSet], options: &QqOptions) -> Result<QqSeries> {
    let chosen: Vec<ExceedanceSet> = match &options.discipline {
        Some(d) => data.iter().filter(|s| &s.discipline == d).cloned().collect(),
        None => data.to_vec(),
    };
    if let Some(d) = &options.discipline {
        if chosen.is_empty() {
            return Err(Error::UnknownDiscipline(d.clone()));
        }
    }
    if options.replicates < 20 {
        return Err(Error::Config("the QQ envelope needs at least 20 replicates".into()));
    }
    let mut observed = transformed_excesses(model, &chosen)?;
    let n = observed.len();
    if n == 0 {
        return Err(Error::Domain("no exceedances to compare".into()));
    }
    observed.sort_by(f64::total_cmp);
    let theoretical = (1..=n)
        .map(|i| -(-(i as f64) / (n as f64 + 1.0)).ln_1p())
        .collect();

    // With the counts held fixed the transformed replicate excesses are
    // independent unit exponentials whichever cell they come from.
    let samples: Vec<Vec<f64>> = (0..options.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = CounterRng::new(CounterRng::derive(options.seed, r as u64));
            let mut sample: Vec<f64> = (0..n).map(|_| rng.exponential()).collect();
            sample.sort_by(f64::total_cmp);
            sample
        })
        .collect();
    let mut ks: Vec<f64> = samples.iter().map(|s| ks_exponential(s)).collect();
    let mut columns = vec![Vec::with_capacity(options.replicates); n];
    for sample in &samples {
        for (c, &z) in columns.iter_mut().zip(sample) {
            c.push(z);
        }
    }
    let alpha = 0.5 * (1.0 - options.level);
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for c in &mut columns {
        c.sort_by(f64::total_cmp);
        lower.push(percentile(c, alpha));
        upper.push(percentile(c, 1.0 - alpha));
    }
    ks.sort_by(f64::total_cmp);
    Ok(QqSeries {
        discipline: options.discipline.clone(),
        ks_distance: ks_exponential(&observed),
        ks_envelope_95: percentile(&ks, 0.95),
        observed,
        theoretical,
        lower,
        upper,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub discipline: String,
    pub year: i32,
    pub observed: usize,
    pub expected: f64,
    pub lower: u64,
    pub upper: u64,
}

impl CountRow {
    pub fn inside(&self) -> bool {
        (self.lower..=self.upper).contains(&(self.observed as u64))
    }
}

/// Observed yearly exceedance counts against the model's expected counts and
/// central Poisson bands at `level`.
pub fn count_calibration(model: &GlobalModel, data: &[ExceedanceSet], level: f64) -> Result<Vec<CountRow>> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::Config(format!("level {level} must lie in [0, 1)")));
    }
    let alpha = 0.5 * (1.0 - level);
    let mut rows = Vec::new();
    for set in data {
        let d = &set.discipline;
        for (year, observed) in set.horizon.years().zip(set.yearly_counts()) {
            let expected = poisson_measure_above(model, d, year, set.threshold)?;
            let (lower, upper) = if expected > 0.0 {
                let p = Poisson::new(expected).map_err(|e| Error::Domain(e.to_string()))?;
                (p.inverse_cdf(alpha), p.inverse_cdf(1.0 - alpha))
            } else {
                (0, 0)
            };
            rows.push(CountRow {
                discipline: d.clone(),
                year,
                observed,
                expected,
                lower,
                upper,
            });
        }
    }
    Ok(rows)
}

pub fn coverage(rows: &[CountRow]) -> f64 {
    rows.iter().filter(|r| r.inside()).count() as f64 / rows.len().max(1) as f64
}

pub fn write_qq_csv<W: Write>(sink: W, series: &QqSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["theoretical", "observed", "lower", "upper"])?;
    for i in 0..series.observed.len() {
        w.serialize((
            series.theoretical[i],
            series.observed[i],
            series.lower[i],
            series.upper[i],
        ))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_counts_csv<W: Write>(sink: W, rows: &[CountRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Minimal standalone SVG of the QQ plot.
pub fn qq_svg(series: &QqSeries) -> String {
    const W: f64 = 480.0;
    const H: f64 = 480.0;
    const PAD: f64 = 40.0;
    let max = series
        .observed
        .iter()
        .chain(&series.theoretical)
        .chain(&series.upper)
        .copied()
        .fold(1.0, f64::max);
    let sx = |v: f64| PAD + v / max * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - v / max * (H - 2.0 * PAD);
    let poly = |ys: &[f64]| {
        series
            .theoretical
            .iter()
            .zip(ys)
            .map(|(t, y)| format!("{:.2},{:.2}", sx(*t), sy(*y)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999"/>"##,
        sx(0.0),
        sy(0.0),
        sx(max),
        sy(max)
    );
    for band in [&series.lower, &series.upper] {
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#4a7ab5" stroke-dasharray="4 3"/>"##,
            poly(band)
        );
    }
    for (t, o) in series.theoretical.iter().zip(&series.observed) {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2"/>"#, sx(*t), sy(*o));
    }
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="20" font-size="12">KS {:.4} (95% envelope {:.4})</text>"#,
        series.ks_distance, series.ks_envelope_95
    );
    s.push_str("</svg>\n");
    s
}

/// Step plot of observed against expected yearly counts for one discipline.
pub fn counts_svg(rows: &[CountRow], discipline: &str) -> String {
    const W: f64 = 560.0;
    const H: f64 = 320.0;
    const PAD: f64 = 40.0;
    let rows: Vec<&CountRow> = rows.iter().filter(|r| r.discipline == discipline).collect();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
        let top = rows
            .iter()
            .map(|r| (r.upper as f64).max(r.observed as f64))
            .fold(1.0, f64::max);
        let span = f64::from((last.year - first.year).max(1));
        let sx = |year: i32| PAD + f64::from(year - first.year) / span * (W - 2.0 * PAD);
        let sy = |v: f64| H - PAD - v / top * (H - 2.0 * PAD);
        for r in &rows {
            let x = sx(r.year);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#bbb" stroke-width="6"/>"##,
                sy(r.lower as f64),
                sy(r.upper as f64)
            );
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{:.2}" r="3"/>"#, sy(r.expected));
            let _ = writeln!(
                s,
                r##"<text x="{x:.2}" y="{:.2}" fill="#c00" font-size="12" text-anchor="middle">x</text>"##,
                sy(r.observed as f64) + 4.0
            );
        }
    }
    let _ = writeln!(s, r#"<text x="{PAD}" y="20" font-size="12">{discipline}: expected (dots), observed (x), 95% band</text>"#);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::YearRange;
    use crate::paper::paper_model;
    use crate::simgen::{simulate, SimConfig};

    fn data(seed: u64) -> Vec<ExceedanceSet> {
        simulate(&SimConfig {
            model: paper_model(),
            horizon: YearRange::new(2001, 2019).unwrap(),
            seed,
            athlete_pool: None,
        })
        .unwrap()
        .sets
    }

    #[test]
    fn ks_of_perfect_quantiles_is_small() {
        let n = 1000;
        let z: Vec<f64> = (1..=n).map(|i| -(-(i as f64 - 0.5) / n as f64).ln_1p()).collect();
        assert!((ks_exponential(&z) - 0.5 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn qq_under_true_model() {
        let m = paper_model();
        let opts = QqOptions { replicates: 200, ..QqOptions::default() };
        let q = qq_exponential(&m, &data(3), &opts).unwrap();
        assert_eq!(q.observed.len(), q.theoretical.len());
        assert!(q.lower.iter().zip(&q.upper).all(|(l, u)| l <= u));
        assert!(q.ks_envelope_95 > 0.0 && q.ks_envelope_95 < 0.1);
        assert!(q.envelope_coverage() > 0.8);
        assert!(qq_svg(&q).starts_with("<svg"));
    }

    #[test]
    fn qq_names_offending_observation() {
        let m = paper_model();
        let mut d = data(4);
        let endpoint = crate::model::upper_endpoint_time(&m, &d[0].discipline, 2010).unwrap();
        d[0].observations.push(crate::model::Observation { year: 2010, x: -endpoint + 5.0 });
        match qq_exponential(&m, &d, &QqOptions::default()) {
            Err(Error::RecordOutsideSupport { year: 2010, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn count_bands_contain_expectation() {
        let m = paper_model();
        let rows = count_calibration(&m, &data(5), 0.95).unwrap();
        assert_eq!(rows.len(), 6 * 19);
        for r in &rows {
            assert!((r.lower as f64) <= r.expected && r.expected <= r.upper as f64 + 1.0);
        }
        let c = coverage(&rows);
        assert!(c > 0.85, "{c}");
        assert!(counts_svg(&rows, "marM").contains("<circle"));
    }
}
