use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use runevt::dataio::{
    dedup_best, load_results, mean_residual_life, select_threshold_by_count, write_results, CsvSchema, GridSpec,
    MrlCurve, PerformanceRecord,
};
use runevt::diagnostics::{
    count_calibration, counts_svg, coverage, qq_exponential, qq_svg, write_counts_csv, write_qq_csv, CountRow, QqOptions,
};
use runevt::forecast::{ForecastQuery, ForecastResult, RecordRef};
use runevt::paper::world_record_2019;
use runevt::simgen::{simulate as run_simulation, with_expected_count_thresholds, SimConfig};
use runevt::timefmt::{format_clock, parse_clock};
use runevt::{aic, bootstrap, AftMode, Error, ExceedanceSet, FitResult, Observation, YearRange};

use crate::config::RunConfig;
use crate::output::{emit, load_model, load_sets, open_sink, read_input, LoadedModel};
use crate::{
    CorrectArgs, DiagnoseArgs, FitArgs, ForecastAction, ForecastArgs, IngestArgs, InputFormat, MrlArgs, OutputFormat,
    RecordArgs, SimulateArgs,
};

#[derive(Serialize)]
struct Provenance<'a, A: Serialize> {
    args: &'a A,
    effective: &'a RunConfig,
}

#[derive(Serialize)]
struct IngestResult {
    rows_read: usize,
    rows_rejected: usize,
    best_per_athlete_year: usize,
    sets: Vec<ExceedanceSet>,
}

pub fn ingest(args: &IngestArgs) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    cfg.horizon_override(args.from, args.to)?;
    if let Some(t) = args.target {
        cfg.target_exceedances = t;
    }
    let text = read_input(&args.input)?;
    let trimmed = text.trim_start();
    let json = match args.format {
        InputFormat::Json => true,
        InputFormat::Csv => false,
        InputFormat::Auto => trimmed.starts_with('{') || trimmed.starts_with('['),
    };
    let wanted = |d: &str| args.disciplines.is_empty() || args.disciplines.iter().any(|w| w == d);

    let result = if json {
        let sets = load_sets(&args.input)?;
        let rehydrated = sets
            .into_iter()
            .filter(|s| wanted(&s.discipline))
            .map(|s| reselect(s, cfg.horizon))
            .collect::<Result<Vec<_>, _>>()?;
        let n = rehydrated.iter().map(ExceedanceSet::len).sum();
        IngestResult {
            rows_read: n,
            rows_rejected: 0,
            best_per_athlete_year: n,
            sets: rehydrated,
        }
    } else {
        let loaded = load_results(text.as_bytes(), &CsvSchema::default(), cfg.horizon)?;
        if let Some(path) = &args.rejects {
            let mut w = csv::Writer::from_writer(open_sink(Some(path))?);
            for r in &loaded.rejects {
                w.serialize(r).map_err(Error::from)?;
            }
            w.flush()?;
        }
        let rows_read = loaded.records.len() + loaded.rejects.len();
        let rows_rejected = loaded.rejects.len();
        let best = dedup_best(loaded.records);
        let disciplines: BTreeSet<&str> =
            best.iter().map(|r| r.discipline.as_str()).filter(|d| wanted(d)).collect();
        if disciplines.is_empty() {
            return Err(Error::Schema("no usable rows for the requested disciplines".into()).into());
        }
        let sets = disciplines
            .into_iter()
            .map(|d| select_threshold_by_count(&best, d, cfg.target_exceedances, cfg.horizon))
            .collect::<Result<Vec<_>, _>>()?;
        IngestResult {
            rows_read,
            rows_rejected,
            best_per_athlete_year: best.len(),
            sets,
        }
    };
    emit("ingest", &Provenance { args, effective: &cfg }, &result, args.output.as_deref())
}

/// Keeps a stored set's observations above its own threshold and inside the
/// horizon, in canonical order.
fn reselect(set: ExceedanceSet, horizon: Option<YearRange>) -> runevt::Result<ExceedanceSet> {
    let horizon = horizon.unwrap_or(set.horizon);
    let mut obs: Vec<Observation> = set
        .observations
        .into_iter()
        .filter(|o| o.x > set.threshold && horizon.contains(o.year))
        .collect();
    obs.sort_by(|a, b| a.year.cmp(&b.year).then(b.x.total_cmp(&a.x)));
    ExceedanceSet::new(set.discipline, set.threshold, horizon, obs)
}

fn load_csv_records(path: &Path, horizon: Option<YearRange>) -> anyhow::Result<Vec<PerformanceRecord>> {
    let text = read_input(path)?;
    Ok(dedup_best(load_results(text.as_bytes(), &CsvSchema::default(), horizon)?.records))
}

#[derive(Serialize)]
struct MrlResult {
    discipline: String,
    points: usize,
    curve: MrlCurve,
}

pub fn mrl(args: &MrlArgs) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    cfg.horizon_override(args.from, args.to)?;
    let best = load_csv_records(&args.input, cfg.horizon)?;
    let values: Vec<f64> = best
        .iter()
        .filter(|r| r.discipline == args.discipline)
        .map(|r| -r.seconds)
        .collect();
    if values.is_empty() {
        return Err(Error::UnknownDiscipline(args.discipline.clone()).into());
    }
    let grid = GridSpec::Linear {
        from: -parse_clock(&args.slowest)?,
        to: -parse_clock(&args.fastest)?,
        points: args.points,
    };
    let curve = mean_residual_life(&values, &grid)?;
    if let Some(path) = &args.csv {
        let mut w = csv::Writer::from_writer(open_sink(Some(path))?);
        w.write_record(["threshold_seconds", "mean_excess", "ci_half_width", "count"])
            .map_err(Error::from)?;
        for i in 0..curve.grid.len() {
            w.serialize((-curve.grid[i], curve.mean_excess[i], curve.ci_half_width[i], curve.counts[i]))
                .map_err(Error::from)?;
        }
        w.flush()?;
    }
    let result = MrlResult {
        discipline: args.discipline.clone(),
        points: values.len(),
        curve,
    };
    emit("mrl", &Provenance { args, effective: &cfg }, &result, args.output.as_deref())
}

#[derive(Serialize)]
struct FitOutput<'a> {
    #[serde(flatten)]
    fit: &'a FitResult,
    aic: f64,
}

pub fn fit(args: &FitArgs) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    let f = &mut cfg.fit;
    if let Some(v) = args.starts {
        f.starts = v;
    }
    if let Some(v) = args.seed {
        f.seed = v;
    }
    if let Some(v) = args.max_evaluations {
        f.max_evaluations = v;
    }
    if let Some(v) = args.tolerance {
        f.tolerance = v;
    }
    f.gamma &= !args.no_gamma;
    f.delta &= !args.no_delta;
    f.shared_xi &= !args.per_discipline_xi;
    let sets = load_sets(&args.data)?;
    let result = runevt::fit(&sets, &cfg.fit)?;
    if !result.converged {
        eprintln!("warning: optimizer budget exhausted before convergence");
    }
    let out = FitOutput {
        aic: aic(&result),
        fit: &result,
    };
    emit("fit", &Provenance { args, effective: &cfg }, &out, args.output.as_deref())
}

#[derive(Serialize)]
struct QqSummary {
    n: usize,
    ks_distance: f64,
    ks_envelope_95: f64,
    passes: bool,
    envelope_coverage: f64,
}

#[derive(Serialize)]
struct DiagnoseResult {
    qq: QqSummary,
    count_band_coverage: f64,
    counts: Vec<CountRow>,
}

pub fn diagnose(args: &DiagnoseArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let loaded = load_model(args.model.as_deref())?;
    let sets = load_sets(&args.data)?;
    let opts = QqOptions {
        replicates: args.replicates.unwrap_or(cfg.diagnostics.replicates),
        seed: args.seed.unwrap_or(cfg.diagnostics.seed),
        discipline: args.discipline.clone(),
        level: 0.95,
    };
    let qq = qq_exponential(loaded.model(), &sets, &opts)?;
    let counts = count_calibration(loaded.model(), &sets, 0.95)?;
    if let Some(p) = &args.qq_csv {
        write_qq_csv(open_sink(Some(p))?, &qq)?;
    }
    if let Some(p) = &args.qq_svg {
        open_sink(Some(p))?.write_all(qq_svg(&qq).as_bytes())?;
    }
    if let Some(p) = &args.counts_csv {
        write_counts_csv(open_sink(Some(p))?, &counts)?;
    }
    if let Some(p) = &args.counts_svg {
        let d = args
            .discipline
            .clone()
            .or_else(|| sets.first().map(|s| s.discipline.clone()))
            .unwrap_or_default();
        open_sink(Some(p))?.write_all(counts_svg(&counts, &d).as_bytes())?;
    }
    let result = DiagnoseResult {
        qq: QqSummary {
            n: qq.observed.len(),
            ks_distance: qq.ks_distance,
            ks_envelope_95: qq.ks_envelope_95,
            passes: qq.passes_ks(),
            envelope_coverage: qq.envelope_coverage(),
        },
        count_band_coverage: coverage(&counts),
        counts,
    };
    emit("diagnose", &Provenance { args, effective: &cfg }, &result, args.output.as_deref())
}

fn record_ref(r: &RecordArgs, origin_year: i32) -> anyhow::Result<RecordRef> {
    match &r.record {
        Some(t) => Ok(RecordRef::new(
            r.discipline.clone(),
            parse_clock(t)?,
            r.record_year.unwrap_or(origin_year - 1),
        )),
        None => world_record_2019(&r.discipline).ok_or_else(|| {
            Error::Config(format!("no default record for `{}`; pass --record", r.discipline)).into()
        }),
    }
}

fn query_for(action: &ForecastAction, origin_year: i32) -> anyhow::Result<ForecastQuery> {
    Ok(match action {
        ForecastAction::Ultimate { discipline, year } => ForecastQuery::Ultimate {
            discipline: discipline.clone(),
            year: *year,
        },
        ForecastAction::ExpectedRecord { record, year } => ForecastQuery::ExpectedRecord {
            record: record_ref(record, origin_year)?,
            year: *year,
        },
        ForecastAction::RecordProb { record, year } => ForecastQuery::RecordProb {
            record: record_ref(record, origin_year)?,
            year: *year,
        },
        ForecastAction::RecordBefore { record, year } => ForecastQuery::RecordBefore {
            record: record_ref(record, origin_year)?,
            year: *year,
        },
        ForecastAction::EarliestYear { record, level } => ForecastQuery::EarliestYear {
            record: record_ref(record, origin_year)?,
            level: *level,
        },
        ForecastAction::WaitingTime { record } => ForecastQuery::WaitingTime {
            record: record_ref(record, origin_year)?,
        },
        ForecastAction::SubThreshold {
            discipline,
            target,
            year,
            cumulative,
        } => ForecastQuery::SubThreshold {
            discipline: discipline.clone(),
            target_seconds: parse_clock(target)?,
            year: *year,
            cumulative: *cumulative,
        },
        ForecastAction::Equivalent {
            source,
            target,
            time,
            year,
        } => ForecastQuery::Equivalent {
            source: source.clone(),
            target: target.clone(),
            seconds: parse_clock(time)?,
            year: *year,
        },
    })
}

/// Human rendering of a forecast number.
fn display(query: &ForecastQuery, v: f64) -> String {
    match query {
        ForecastQuery::Ultimate { .. }
        | ForecastQuery::ExpectedRecord { .. }
        | ForecastQuery::Equivalent { .. }
        | ForecastQuery::Corrected { .. } => format_clock(v),
        ForecastQuery::EarliestYear { .. } => format!("{v:.0}"),
        ForecastQuery::WaitingTime { .. } => format!("{v:.2} years"),
        _ => format!("{v:.4}"),
    }
}

#[derive(Serialize)]
struct ForecastOutput {
    #[serde(flatten)]
    forecast: ForecastResult,
    display: String,
}

fn render(out: &ForecastOutput, format: OutputFormat, command: &str, cfg: &impl Serialize) -> anyhow::Result<()> {
    match format {
        OutputFormat::Json => emit(command, cfg, out, None),
        OutputFormat::Text => {
            match out.forecast.interval {
                Some(i) => println!(
                    "{} ({:.0}% interval {} to {})",
                    out.display,
                    100.0 * i.level,
                    display(&out.forecast.query, i.lower),
                    display(&out.forecast.query, i.upper)
                ),
                None => println!("{}", out.display),
            }
            Ok(())
        }
    }
}

pub fn forecast(args: &ForecastArgs) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(y) = args.origin_year {
        cfg.forecast.origin_year = y;
    }
    if let Some(y) = args.horizon_cap {
        cfg.forecast.horizon_cap = y;
    }
    if let Some(n) = args.bootstrap {
        cfg.bootstrap.replicates = n;
    }
    if let Some(s) = args.seed {
        cfg.bootstrap.seed = s;
    }
    if let Some(l) = args.ci_level {
        cfg.bootstrap.level = l;
    }
    let mode: AftMode = args.mode.parse()?;
    let loaded = load_model(args.model.as_deref())?;
    let mut model = loaded.model().clone();
    model.thresholds.extend(cfg.thresholds.clone());
    let query = query_for(&args.action, cfg.forecast.origin_year)?;
    let mut result = query.evaluate(&model, mode, &cfg.forecast)?;

    if args.bootstrap.is_some() {
        let LoadedModel::Fit(fit) = &loaded else {
            return Err(Error::Config("--bootstrap needs a fit result as --model".into()).into());
        };
        let Some(data) = &args.data else {
            return Err(Error::Config("--bootstrap needs the fitted --data".into()).into());
        };
        let sets = load_sets(data)?;
        let boot = bootstrap(fit, &sets, &cfg.bootstrap)?;
        let settings = cfg.forecast;
        let (_, interval) = boot.interval_of(
            |m| query.evaluate(m, mode, &settings).map(|r| r.estimate),
            cfg.bootstrap.level,
        )?;
        result.interval = Some(interval);
    }
    let out = ForecastOutput {
        display: display(&query, result.estimate),
        forecast: result,
    };
    render(&out, args.format, "forecast", &Provenance { args, effective: &cfg })
}

pub fn correct(args: &CorrectArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::default();
    let loaded = load_model(args.model.as_deref())?;
    let query = ForecastQuery::Corrected {
        discipline: args.discipline.clone(),
        year: args.year,
        seconds: parse_clock(&args.time)?,
    };
    let result = query.evaluate(loaded.model(), AftMode::Corrected, &cfg.forecast)?;
    let out = ForecastOutput {
        display: display(&query, result.estimate),
        forecast: result,
    };
    render(&out, args.format, "correct", &Provenance { args, effective: &cfg })
}

#[derive(Serialize)]
struct SimulateResult {
    thresholds: std::collections::BTreeMap<String, f64>,
    raw_rows: Option<usize>,
    sets: Vec<ExceedanceSet>,
}

#[derive(Serialize)]
struct SimulateProvenance<'a> {
    args: &'a SimulateArgs,
    sim: &'a SimConfig,
}

pub fn simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    let horizon = YearRange::new(args.from, args.to)?;
    let mut model = load_model(args.model.as_deref())?.model().clone();
    if let Some(c) = args.expected_count {
        model = with_expected_count_thresholds(&model, horizon, c)?;
    }
    if args.csv.is_some() && args.pool.is_none() {
        return Err(Error::Config("--csv needs --pool".into()).into());
    }
    let sim = SimConfig {
        model,
        horizon,
        seed: args.seed,
        athlete_pool: args.pool,
    };
    let out = run_simulation(&sim)?;
    if let (Some(path), Some(records)) = (&args.csv, &out.records) {
        write_results(open_sink(Some(path))?, records)?;
    }
    let result = SimulateResult {
        thresholds: sim.model.thresholds.clone(),
        raw_rows: out.records.as_ref().map(Vec::len),
        sets: out.sets,
    };
    emit("simulate", &SimulateProvenance { args, sim: &sim }, &result, args.output.as_deref())
}
