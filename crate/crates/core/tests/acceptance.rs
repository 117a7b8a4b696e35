//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Runs under `cargo test`; the recovery study (criterion 6) dominates the
//! runtime at a few minutes on one core.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use runevt::diagnostics::{count_calibration, qq_exponential, CountRow, QqOptions};
use runevt::forecast::{
    aft_corrected_time, earliest_year_at_confidence, equivalent_time, expected_new_record, expected_waiting_time,
    prob_record_before_year, prob_record_in_year, prob_sub_threshold, prob_sub_threshold_before,
    sub_threshold_crossing_year, ultimate_time, ForecastSettings, RecordRef,
};
use runevt::inference::{bootstrap, BootstrapConfig};
use runevt::model::{intensity_at, poisson_measure_above};
use runevt::paper::{paper_model, world_record_2019, DISCIPLINES};
use runevt::simgen::{simulate, CounterRng, SimConfig};
use runevt::timefmt::{format_clock, parse_clock};
use runevt::{fit, AftMode, FitConfig, GlobalModel, YearRange};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

const MODES: [AftMode; 2] = [AftMode::WithAft, AftMode::Corrected];

fn secs(s: &str) -> f64 {
    parse_clock(s).expect("static clock string")
}

fn record(d: &str) -> RecordRef {
    world_record_2019(d).expect("known discipline")
}

fn criterion_1() -> Outcome {
    let table = [
        ("marM", "1:59:43", "1:58:13"),
        ("marW", "2:13:03", "2:12:55"),
        ("hmM", "57:28", "57:08"),
        ("hmW", "1:02:39", "1:01:38"),
        ("10kM", "26:22", "26:15"),
        ("10kW", "29:05", "28:49"),
    ];
    let t = Instant::now();
    let m = paper_model();
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for (d, a, b) in table {
        for (year, want) in [(2019, a), (2025, b)] {
            let got = ultimate_time(&m, d, year, AftMode::WithAft).unwrap();
            let err = (got - secs(want)).abs();
            worst = worst.max(err);
            if err > 3.0 {
                bad.push(format!("{d} {year}: {} vs {want}", format_clock(got)));
            }
        }
    }
    let elapsed = t.elapsed().as_secs_f64();
    check(
        bad.is_empty() && elapsed < 1.0,
        format!("12 entries, worst error {worst:.2} s, {elapsed:.4} s {bad:?}"),
    )
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let m = paper_model();
    let settings = ForecastSettings::default();
    let p = prob_sub_threshold(&m, "marM", 7200.0, 2020, AftMode::WithAft).unwrap();
    let year = sub_threshold_crossing_year(&m, "marM", 7200.0, 0.10, AftMode::WithAft, &settings).unwrap();
    let before = prob_sub_threshold_before(&m, "marM", 7200.0, year, AftMode::WithAft, &settings).unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    check(
        (0.0004..=0.003).contains(&p) && (2024..=2026).contains(&year) && elapsed < 1.0,
        format!("Pr(sub-2h in 2020) = {p:.5}, 10% crossed before {year} (p = {before:.3}), {elapsed:.4} s"),
    )
}

fn criterion_3() -> Outcome {
    // (discipline, with-AFT year, minus, plus, corrected year, minus, plus)
    let table = [
        ("marM", 2024, 0, 0, 2025, 0, 0),
        ("marW", 2042, 6, 0, 2048, 4, 0),
        ("hmM", 2027, 1, 1, 2027, 1, 1),
        ("hmW", 2022, 1, 0, 2022, 0, 0),
        ("10kM", 2036, 1, 1, 2040, 3, 0),
        ("10kW", 2029, 1, 1, 2033, 2, 0),
    ];
    let m = paper_model();
    let settings = ForecastSettings::default();
    let mut got_all = Vec::new();
    let mut pass = true;
    for (d, y0, m0, p0, y1, m1, p1) in table {
        for (mode, want, minus, plus) in [(AftMode::WithAft, y0, m0, p0), (AftMode::Corrected, y1, m1, p1)] {
            let got = earliest_year_at_confidence(&m, &record(d), 0.95, mode, &settings).unwrap();
            pass &= (want - minus..=want + plus).contains(&got);
            got_all.push(format!("{d}/{mode:?}={got}"));
        }
    }
    check(pass, got_all.join(" "))
}

fn criterion_4() -> Outcome {
    let table = [
        ("marM", 2.2, 2.5),
        ("marW", 15.4, 20.6),
        ("hmM", 3.7, 3.8),
        ("hmW", 1.1, 1.3),
        ("10kM", 8.7, 11.3),
        ("10kW", 4.3, 6.5),
    ];
    let m = paper_model();
    let settings = ForecastSettings::default();
    let mut pass = true;
    let mut got_all = Vec::new();
    for (d, a, c) in table {
        for (mode, want) in [(AftMode::WithAft, a), (AftMode::Corrected, c)] {
            let got = expected_waiting_time(&m, &record(d), mode, &settings).unwrap().years;
            pass &= (got - want).abs() <= f64::max(0.5, 0.15 * want);
            got_all.push(format!("{d}/{mode:?}={got:.2}"));
        }
    }
    check(pass, got_all.join(" "))
}

fn criterion_5() -> Outcome {
    let m = paper_model();
    let ten_k = aft_corrected_time(&m, "10kW", 2021, secs("29:38")).unwrap();
    let mar_m = aft_corrected_time(&m, "marM", 2018, secs("2:01:39")).unwrap();
    let mar_w = aft_corrected_time(&m, "marW", 2019, secs("2:14:04")).unwrap();
    let mut identity: f64 = 0.0;
    for (d, _) in DISCIPLINES {
        let mut g = m.clone();
        g.disciplines.get_mut(d).unwrap().gamma = 0.0;
        let ult = ultimate_time(&g, d, 2020, AftMode::WithAft).unwrap();
        for k in 0..5 {
            let x = ult + 5.0 + 20.0 * f64::from(k);
            identity = identity.max((aft_corrected_time(&g, d, 2020, x).unwrap() - x).abs());
        }
    }
    let pass = (ten_k - secs("29:44")).abs() <= 4.0
        && (mar_m - secs("2:01:48")).abs() <= 4.0
        && (mar_w - secs("2:14:17")).abs() <= 6.0
        && identity <= 1e-9;
    check(
        pass,
        format!(
            "10kW {} marM {} marW {}, gamma=0 identity error {identity:.1e} s",
            format_clock(ten_k),
            format_clock(mar_m),
            format_clock(mar_w)
        ),
    )
}

const RUNS: u64 = 100;
const HORIZON: (i32, i32) = (2001, 2019);

fn simulated(model: &GlobalModel, seed: u64) -> Vec<runevt::ExceedanceSet> {
    simulate(&SimConfig {
        model: model.clone(),
        horizon: YearRange::new(HORIZON.0, HORIZON.1).unwrap(),
        seed,
        athlete_pool: None,
    })
    .unwrap()
    .sets
}

fn param(m: &GlobalModel, d: &str, name: &str) -> f64 {
    let p = &m.disciplines[d];
    match name {
        "mu0" => p.mu0,
        "sigma0" => p.sigma0,
        "beta" => p.beta,
        "gamma" => p.gamma,
        "delta" => p.delta,
        _ => unreachable!(),
    }
}

const BOOTSTRAP_REPLICATES: usize = 100;

fn criterion_6() -> Outcome {
    let t = Instant::now();
    let truth = paper_model();
    let mut xi_hits = 0;
    let mut covered: BTreeMap<String, usize> = BTreeMap::new();
    for run in 0..RUNS {
        let data = simulated(&truth, CounterRng::derive(0xACCE, run));
        let fitted = fit(&data, &FitConfig::default()).unwrap();
        if (fitted.model.xi - truth.xi).abs() <= 0.05 {
            xi_hits += 1;
        }
        let boot = bootstrap(
            &fitted,
            &data,
            &BootstrapConfig {
                replicates: BOOTSTRAP_REPLICATES,
                level: 0.95,
                seed: CounterRng::derive(0xB007, run),
                ..BootstrapConfig::default()
            },
        )
        .unwrap();
        for pi in boot.parameter_intervals(0.95) {
            let Some(d) = &pi.discipline else { continue };
            let v = param(&truth, d, &pi.name);
            let hit = pi.interval.lower <= v && v <= pi.interval.upper;
            *covered.entry(format!("{d}/{}", pi.name)).or_default() += usize::from(hit);
        }
    }
    let short: Vec<String> = covered
        .iter()
        .filter(|(_, &c)| c < 90)
        .map(|(k, c)| format!("{k}={c}"))
        .collect();
    let min = covered.values().copied().min().unwrap_or(0);
    check(
        xi_hits >= 90 && short.is_empty(),
        format!(
            "xi within 0.05 in {xi_hits}/{RUNS}; {} parameters, min coverage {min}/{RUNS}, below 90: {short:?}; B={BOOTSTRAP_REPLICATES}, {:.0} s",
            covered.len(),
            t.elapsed().as_secs_f64()
        ),
    )
}

fn criterion_7() -> Outcome {
    let t = Instant::now();
    let truth = paper_model();
    let mut ks_pass = 0;
    let mut rows: Vec<CountRow> = Vec::new();
    for run in 0..RUNS {
        let data = simulated(&truth, CounterRng::derive(0xCA1B, run));
        let qq = qq_exponential(
            &truth,
            &data,
            &QqOptions {
                seed: CounterRng::derive(0x0E07, run),
                ..QqOptions::default()
            },
        )
        .unwrap();
        ks_pass += usize::from(qq.passes_ks());
        rows.extend(count_calibration(&truth, &data, 0.95).unwrap());
    }
    let inside = rows.iter().filter(|r| r.inside()).count() as f64 / rows.len() as f64;
    check(
        ks_pass >= 90 && (0.93..=0.99).contains(&inside),
        format!(
            "KS under envelope in {ks_pass}/{RUNS}; yearly counts inside Poisson 95% band {:.1}% of {} cells; {:.0} s",
            100.0 * inside,
            rows.len(),
            t.elapsed().as_secs_f64()
        ),
    )
}

fn forecast_battery(m: &GlobalModel) -> Vec<f64> {
    let settings = ForecastSettings::default();
    let mut out = Vec::new();
    for (d, _) in DISCIPLINES {
        let r = record(d);
        for mode in MODES {
            out.push(ultimate_time(m, d, 2025, mode).unwrap());
            out.push(expected_new_record(m, &r, 2021, mode).unwrap());
            out.push(prob_record_in_year(m, &r, 2021, mode).unwrap());
            out.push(prob_record_before_year(m, &r, 2030, mode, &settings).unwrap());
            out.push(f64::from(earliest_year_at_confidence(m, &r, 0.95, mode, &settings).unwrap()));
            out.push(expected_waiting_time(m, &r, mode, &settings).unwrap().years);
        }
        if d != "marM" {
            out.push(equivalent_time(m, "marM", d, 7200.0, 2020, AftMode::WithAft).unwrap());
        }
        out.push(aft_corrected_time(m, d, 2021, r.seconds + 30.0).unwrap());
    }
    out.push(prob_sub_threshold(m, "marM", 7200.0, 2024, AftMode::WithAft).unwrap());
    out
}

fn criterion_8() -> Outcome {
    let m = paper_model();

    let base = forecast_battery(&m);
    let mut worst_u: f64 = 0.0;
    for shift in [-4.0, 2.5, 11.0] {
        let mut p = m.clone();
        for u in p.thresholds.values_mut() {
            *u += shift;
        }
        for (a, b) in base.iter().zip(forecast_battery(&p)) {
            worst_u = worst_u.max((a - b).abs() / a.abs().max(1e-300));
        }
    }

    let mut worst_fd: f64 = 0.0;
    for (d, _) in DISCIPLINES {
        for year in [2005, 2019, 2024] {
            let end = -ultimate_time(&m, d, year, AftMode::WithAft).unwrap();
            for back in [3.0, 30.0, 120.0] {
                let x = end - back;
                let h = 1e-3;
                let fd = (poisson_measure_above(&m, d, year, x - h).unwrap()
                    - poisson_measure_above(&m, d, year, x + h).unwrap())
                    / (2.0 * h);
                let lam = intensity_at(&m, d, year, x).unwrap();
                worst_fd = worst_fd.max((fd - lam).abs() / lam);
            }
        }
    }

    let settings = ForecastSettings::default();
    let mut worst_prod: f64 = 0.0;
    for (d, _) in DISCIPLINES {
        let r = record(d);
        for mode in MODES {
            let mut survive = 1.0;
            for year in 2021..=2050 {
                survive *= 1.0 - prob_record_in_year(&m, &r, year - 1, mode).unwrap();
                let sum_form = prob_record_before_year(&m, &r, year, mode, &settings).unwrap();
                worst_prod = worst_prod.max((sum_form - (1.0 - survive)).abs());
            }
        }
    }

    let mut worst_trip: f64 = 0.0;
    for (a, b, t) in [("marM", "marW", "2:00:00"), ("hmW", "10kM", "1:03:00"), ("10kW", "hmM", "29:20")] {
        for mode in MODES {
            let x = secs(t);
            let there = equivalent_time(&m, a, b, x, 2021, mode).unwrap();
            let back = equivalent_time(&m, b, a, there, 2021, mode).unwrap();
            worst_trip = worst_trip.max((back - x).abs());
        }
    }

    check(
        worst_u <= 1e-9 && worst_fd <= 1e-5 && worst_prod <= 1e-12 && worst_trip <= 1e-6,
        format!(
            "threshold shift {worst_u:.1e} rel; intensity vs FD {worst_fd:.1e} rel; sum vs product {worst_prod:.1e}; equivalence round trip {worst_trip:.1e} s"
        ),
    )
}

fn criterion_9() -> Outcome {
    let m = paper_model();
    let settings = ForecastSettings::default();
    let eq = equivalent_time(&m, "marM", "marW", 7200.0, 2020, AftMode::WithAft).unwrap();
    let eq_ok = (eq - secs("2:12:56")).abs() <= 60.0;

    let mut ordered = true;
    for (d, _) in DISCIPLINES {
        let r = record(d);
        let ult: Vec<f64> = (2019..=2040).map(|y| ultimate_time(&m, d, y, AftMode::WithAft).unwrap()).collect();
        ordered &= ult.windows(2).all(|w| w[1] < w[0]);
        for mode in MODES {
            let cum: Vec<f64> = (2021..=2050)
                .map(|y| prob_record_before_year(&m, &r, y, mode, &settings).unwrap())
                .collect();
            ordered &= cum.windows(2).all(|w| w[1] >= w[0]);
            let years: Vec<i32> = [0.5, 0.8, 0.95]
                .iter()
                .map(|&l| earliest_year_at_confidence(&m, &r, l, mode, &settings).unwrap())
                .collect();
            ordered &= years.windows(2).all(|w| w[1] >= w[0]);
        }
        let with = earliest_year_at_confidence(&m, &r, 0.95, AftMode::WithAft, &settings).unwrap();
        let without = earliest_year_at_confidence(&m, &r, 0.95, AftMode::Corrected, &settings).unwrap();
        ordered &= without >= with;
    }
    check(
        eq_ok && ordered,
        format!(
            "not reproducible here: bootstrap CI endpoints of the published fit, exact Figure 3 probabilities, the 2:12:56 equivalence method; \
             checked instead: coverage (criterion 6), ordering invariants {}, sub-2h women's equivalent {} within 60 s of 2:12:56",
            if ordered { "hold" } else { "FAIL" },
            format_clock(eq)
        ),
    )
}

fn main() -> ExitCode {
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let criteria: [(usize, &str, fn() -> Outcome); 9] = [
        (1, "ultimate-time table", criterion_1),
        (2, "sub-2h probability", criterion_2),
        (3, "record horizons", criterion_3),
        (4, "waiting times", criterion_4),
        (5, "AFT corrections", criterion_5),
        (6, "parameter recovery", criterion_6),
        (7, "calibration", criterion_7),
        (8, "numerical identities", criterion_8),
        (9, "non-reproducible items", criterion_9),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let out = run();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!("criterion {id} [{tag}] {name}: {}", out.detail);
        failed += usize::from(!out.pass);
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
