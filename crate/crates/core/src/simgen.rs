//! Seeded synthetic seasons drawn from a [`GlobalModel`].
//!
//! Randomness comes from [`CounterRng`], a SplitMix64 counter stream:
//! the `i`-th output of a stream with key `k` is
//! `mix64(k + (i + 1) * 0x9E3779B97F4A7C15)` where `mix64` is the SplitMix64
//! finalizer. Each (discipline, year) pair gets its own key derived from the
//! master seed, the FNV-1a hash of the discipline id and the year, so output
//! does not depend on iteration order and is bit-identical on every
//! platform.
//!
//! Per discipline-year the count is Poisson with mean `Lambda(year, u)`
//! (inversion of the CDF), and each excess is an inverse-transform draw from
//! the generalized Pareto law with scale `sigma_u(year)`.

use serde::{Deserialize, Serialize};

use crate::dataio::PerformanceRecord;
use crate::error::{Error, Result};
use crate::model::{
    threshold_scale_at, AftMode, ExceedanceSet, GlobalModel, Observation, YearRange, XI_ZERO_EPS,
};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Counter-based SplitMix64 stream.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        Self { key, counter: 0 }
    }

    /// Stream for one (discipline, year) cell under `seed`.
    pub fn for_cell(seed: u64, discipline: &str, year: i32) -> Self {
        let k = mix64(seed ^ mix64(fnv1a(discipline.as_bytes())) ^ mix64(year as i64 as u64 ^ 0x5945_4152));
        Self::new(k)
    }

    /// Derived stream, e.g. one per bootstrap replicate.
    pub fn derive(seed: u64, index: u64) -> u64 {
        mix64(seed.wrapping_add(mix64(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Poisson draw by sequential CDF inversion; large means are split into
    /// independent chunks.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        const CHUNK: f64 = 64.0;
        let mut remaining = mean.max(0.0);
        let mut total = 0;
        while remaining > 0.0 {
            let m = remaining.min(CHUNK);
            remaining -= m;
            let u = self.uniform();
            let mut k = 0u64;
            let mut p = (-m).exp();
            let mut cdf = p;
            while u > cdf && k < 10_000 {
                k += 1;
                p *= m / k as f64;
                cdf += p;
                if p == 0.0 {
                    break;
                }
            }
            total += k;
        }
        total
    }

    /// Unit-exponential draw.
    pub fn exponential(&mut self) -> f64 {
        -(-self.uniform()).ln_1p()
    }
}

/// Inverse-transform draw of a generalized Pareto excess.
pub fn gpd_excess(u01: f64, scale: f64, xi: f64) -> f64 {
    if xi.abs() < XI_ZERO_EPS {
        -scale * (-u01).ln_1p()
    } else {
        scale * ((-xi * (-u01).ln_1p()).exp_m1()) / xi
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: GlobalModel,
    pub horizon: YearRange,
    pub seed: u64,
    /// Athletes available per discipline when emitting performance records.
    #[serde(default)]
    pub athlete_pool: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct SimOutput {
    pub sets: Vec<ExceedanceSet>,
    /// Raw records including slower duplicate runs; present when an athlete
    /// pool was configured.
    pub records: Option<Vec<PerformanceRecord>>,
}

/// Draws one discipline-year of exceedances.
pub fn simulate_cell(
    model: &GlobalModel,
    d: &str,
    year: i32,
    rng: &mut CounterRng,
) -> Result<Vec<f64>> {
    let u = model.threshold(d)?;
    let yp = model.year_params(d, year, AftMode::WithAft)?;
    let su = threshold_scale_at(model, d, year)?;
    let n = rng.poisson(yp.measure_above(u));
    draw_excesses(u, su, yp.xi, n as usize, rng)
}

/// `n` exceedances above `u`, strictly greater than `u`.
pub fn draw_excesses(u: f64, su: f64, xi: f64, n: usize, rng: &mut CounterRng) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = u + gpd_excess(rng.uniform(), su, xi);
        // an excess below one ulp of u rounds back onto the threshold
        if x > u {
            out.push(x);
        }
    }
    Ok(out)
}

/// Simulates every discipline that has a threshold.
pub fn simulate(config: &SimConfig) -> Result<SimOutput> {
    let model = &config.model;
    if model.thresholds.is_empty() {
        return Err(Error::Config("model has no thresholds to simulate above".into()));
    }
    model.check_feasible(config.horizon)?;
    let mut sets = Vec::new();
    let mut records = config.athlete_pool.map(|_| Vec::new());
    for d in model.thresholds.keys() {
        let u = model.threshold(d)?;
        let mut observations = Vec::new();
        for year in config.horizon.years() {
            let mut rng = CounterRng::for_cell(config.seed, d, year);
            let xs = simulate_cell(model, d, year, &mut rng)?;
            if let (Some(pool), Some(records)) = (config.athlete_pool, records.as_mut()) {
                emit_records(d, year, &xs, pool, &mut rng, records)?;
            }
            observations.extend(xs.into_iter().map(|x| Observation { year, x }));
        }
        sets.push(ExceedanceSet::new(d.clone(), u, config.horizon, observations)?);
    }
    Ok(SimOutput { sets, records })
}

fn emit_records(
    d: &str,
    year: i32,
    xs: &[f64],
    pool: usize,
    rng: &mut CounterRng,
    out: &mut Vec<PerformanceRecord>,
) -> Result<()> {
    if xs.len() > pool {
        return Err(Error::Config(format!(
            "athlete pool {pool} is smaller than the {} performances of `{d}` in {year}",
            xs.len()
        )));
    }
    // partial Fisher-Yates: distinct athletes within the year
    let mut ids: Vec<usize> = (0..pool).collect();
    for (i, &x) in xs.iter().enumerate() {
        let j = i + (rng.next_u64() % (pool - i) as u64) as usize;
        ids.swap(i, j);
        let athlete = format!("{d}-A{:04}", ids[i]);
        let seconds = -x;
        out.push(PerformanceRecord {
            discipline: d.to_string(),
            athlete: athlete.clone(),
            year,
            seconds,
            event: Some(format!("sim-{year}-{i}")),
        });
        // every third athlete also logs a slower run
        if rng.next_u64() % 3 == 0 {
            out.push(PerformanceRecord {
                discipline: d.to_string(),
                athlete,
                year,
                seconds: seconds + 1.0 + 60.0 * rng.uniform(),
                event: Some(format!("sim-{year}-{i}-b")),
            });
        }
    }
    Ok(())
}

/// Threshold at which the expected number of exceedances of `d` over
/// `horizon` equals `count`.
pub fn threshold_for_expected_count(
    model: &GlobalModel,
    d: &str,
    horizon: YearRange,
    count: f64,
) -> Result<f64> {
    if !(count > 0.0) {
        return Err(Error::Domain(format!("expected count {count} must be positive")));
    }
    let yearly: Vec<_> = horizon
        .years()
        .map(|y| model.year_params(d, y, AftMode::WithAft))
        .collect::<Result<_>>()?;
    let total = |u: f64| yearly.iter().map(|yp| yp.measure_above(u)).sum::<f64>();
    let spread = yearly.iter().map(|yp| yp.sigma).fold(0.0, f64::max);
    let centre = yearly[0].mu;
    let mut lo = centre - spread;
    let mut hi = centre + spread;
    let mut guard = 0;
    while total(lo) < count {
        lo -= 2.0 * (hi - lo);
        guard += 1;
        if guard > 200 {
            return Err(Error::Domain(format!("cannot reach expected count {count} for `{d}`")));
        }
    }
    while total(hi) > count {
        hi += 2.0 * (hi - lo);
        guard += 1;
        if guard > 400 {
            return Err(Error::Domain(format!("cannot reach expected count {count} for `{d}`")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > count {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Copy of `model` whose thresholds give `count` expected exceedances per
/// discipline over `horizon`.
pub fn with_expected_count_thresholds(
    model: &GlobalModel,
    horizon: YearRange,
    count: f64,
) -> Result<GlobalModel> {
    let mut m = model.clone();
    for d in model.disciplines.keys() {
        let u = threshold_for_expected_count(model, d, horizon, count)?;
        m.thresholds.insert(d.clone(), u);
    }
    Ok(m)
}
