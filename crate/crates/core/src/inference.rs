//! Joint maximum-likelihood fitting, AIC, and parametric-bootstrap intervals.
//!
//! The shared shape is handled by profiling: for a trial shape every
//! discipline is maximized independently (the likelihood factorizes across
//! disciplines once the shape is fixed), and a one-dimensional search runs
//! over the shape, squashed into `(-0.9, 0.9)` as `0.9 * tanh(eta)`.
//!
//! Inside a discipline one more direction is profiled in closed form.
//! Multiplying every yearly count measure `Lambda(y, u)` by the same factor
//! `rho` leaves the excess scale `sigma_u(y)` unchanged and stays inside the
//! model family:
//!
//! ```text
//! c = rho^xi,  e = (c - 1) / xi  (-> ln rho as xi -> 0)
//! sigma0' = c sigma0,  mu0' = mu0 + sigma0 e,  beta' = c beta + delta e,  gamma' = c gamma
//! ```
//!
//! The optimal `rho` is `N / sum_y Lambda(y, u)`, so the simplex search runs
//! over `(mu0, beta, gamma, delta)` with `sigma0` pinned and the returned
//! optimum always matches expected and observed exceedance totals exactly.

use std::cell::Cell;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::forecast::Interval;
use crate::model::{DisciplineParams, ExceedanceSet, GlobalModel, Observation, XI_ZERO_EPS};
use crate::optim::{minimize_1d, nelder_mead, NelderMeadOptions};
use crate::simgen::{simulate_cell, CounterRng};

/// Shape search is confined to `(-XI_BOUND, XI_BOUND)`.
pub const XI_BOUND: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitStrategy {
    /// Moment-matched start from mean excess and yearly rate.
    Moments,
    /// Start at a previously fitted model (bootstrap refits).
    Warm { model: GlobalModel },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Objective evaluations allowed per start.
    pub max_evaluations: usize,
    /// Convergence tolerance on the log-likelihood.
    pub tolerance: f64,
    pub starts: usize,
    pub init: InitStrategy,
    /// Initial shape for the first start.
    pub xi_start: f64,
    pub shared_xi: bool,
    pub gamma: bool,
    pub delta: bool,
    pub min_exceedances: usize,
    pub year_origin: i32,
    pub aft_start_year: i32,
    /// Seed for multi-start jitter.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_evaluations: 1_000_000,
            tolerance: 1e-7,
            starts: 8,
            init: InitStrategy::Moments,
            xi_start: -0.1,
            shared_xi: true,
            gamma: true,
            delta: true,
            min_exceedances: 30,
            year_origin: 2000,
            aft_start_year: 2018,
            seed: 0x5EED,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_evaluations < 1 {
            return Err(Error::Config("evaluation budget must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        if self.starts < 1 {
            return Err(Error::Config("at least one start is required".into()));
        }
        if !(self.xi_start.abs() < XI_BOUND) {
            return Err(Error::Config(format!("start shape must lie in (-{XI_BOUND}, {XI_BOUND})")));
        }
        Ok(())
    }

    /// Number of free parameters for `disciplines` disciplines.
    pub fn parameter_count(&self, disciplines: usize) -> usize {
        let per = 3 + usize::from(self.gamma) + usize::from(self.delta);
        let shape = if self.shared_xi { 1 } else { disciplines };
        per * disciplines + shape
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub start: usize,
    pub xi_initial: f64,
    pub log_likelihood: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: GlobalModel,
    pub log_likelihood: f64,
    pub parameter_count: usize,
    pub converged: bool,
    pub starts: Vec<StartSummary>,
    pub config: FitConfig,
}

/// `2k - 2 loglik`.
pub fn aic(result: &FitResult) -> f64 {
    2.0 * result.parameter_count as f64 - 2.0 * result.log_likelihood
}

/// Sufficient statistics of one discipline for fast likelihood evaluation.
#[derive(Debug, Clone)]
pub(crate) struct DisciplineData {
    pub name: String,
    pub threshold: f64,
    /// `y = year - origin` for every horizon year.
    years: Vec<f64>,
    aft: Vec<f64>,
    counts: Vec<f64>,
    total: f64,
    /// Excesses over the threshold grouped by horizon year.
    excess: Vec<Vec<f64>>,
    mean_excess: f64,
    max_excess: f64,
}

impl DisciplineData {
    pub fn new(set: &ExceedanceSet, year_origin: i32, aft_start_year: i32) -> Self {
        let mut excess = vec![Vec::new(); set.horizon.len()];
        for o in &set.observations {
            excess[(o.year - set.horizon.first) as usize].push(o.x - set.threshold);
        }
        for e in &mut excess {
            e.sort_by(f64::total_cmp);
        }
        let all: Vec<f64> = excess.iter().flatten().copied().collect();
        let total = all.len() as f64;
        Self {
            name: set.discipline.clone(),
            threshold: set.threshold,
            years: set.horizon.years().map(|y| f64::from(y - year_origin)).collect(),
            aft: set
                .horizon
                .years()
                .map(|y| if y >= aft_start_year { 1.0 } else { 0.0 })
                .collect(),
            counts: excess.iter().map(|e| e.len() as f64).collect(),
            total,
            mean_excess: if total > 0.0 { all.iter().sum::<f64>() / total } else { 0.0 },
            max_excess: all.iter().copied().fold(0.0, f64::max),
            excess,
        }
    }

    /// Likelihood pieces at `p`, or `None` outside the feasible region.
    fn pieces(&self, p: &DisciplineParams, xi: f64) -> Option<Pieces> {
        let u = self.threshold;
        let zero = xi.abs() < XI_ZERO_EPS;
        let mut sum_lambda = 0.0;
        let mut n_log_lambda = 0.0;
        let mut gpd = 0.0;
        for j in 0..self.years.len() {
            let y = self.years[j];
            let ind = self.aft[j];
            let mu = p.mu0 + p.beta * y + p.gamma * ind;
            let sigma = p.sigma0 + xi * (p.beta * y + p.gamma * ind) + p.delta * y;
            let su = sigma + xi * (u - mu);
            if !(sigma > 0.0 && su > 0.0) {
                return None;
            }
            let log_lambda = if zero {
                (mu - u) / sigma
            } else {
                -(su / sigma).ln() / xi
            };
            sum_lambda += log_lambda.exp();
            let n = self.counts[j];
            if n == 0.0 {
                continue;
            }
            n_log_lambda += n * log_lambda;
            gpd -= n * su.ln();
            let inv = 1.0 / su;
            if zero {
                gpd -= self.excess[j].iter().sum::<f64>() * inv;
            } else {
                let mut acc = 0.0;
                for &e in &self.excess[j] {
                    let b = 1.0 + xi * e * inv;
                    if !(b > 0.0) {
                        return None;
                    }
                    acc += b.ln();
                }
                gpd -= (1.0 / xi + 1.0) * acc;
            }
        }
        if !sum_lambda.is_finite() {
            return None;
        }
        Some(Pieces {
            sum_lambda,
            n_log_lambda,
            gpd,
        })
    }

    /// Full point-process log-likelihood.
    pub fn log_likelihood(&self, p: &DisciplineParams, xi: f64) -> f64 {
        match self.pieces(p, xi) {
            Some(q) => q.gpd + q.n_log_lambda - q.sum_lambda,
            None => f64::NEG_INFINITY,
        }
    }

    /// Log-likelihood maximized over the count-scaling direction.
    fn profiled(&self, p: &DisciplineParams, xi: f64) -> f64 {
        match self.pieces(p, xi) {
            Some(q) if self.total > 0.0 => {
                q.gpd + q.n_log_lambda + self.total * (self.total / q.sum_lambda).ln() - self.total
            }
            Some(q) => -q.sum_lambda.min(f64::MAX),
            None => f64::NEG_INFINITY,
        }
    }

    /// Moves `p` along the count-scaling direction to its optimum.
    fn rescale(&self, p: &DisciplineParams, xi: f64) -> DisciplineParams {
        let Some(q) = self.pieces(p, xi) else {
            return *p;
        };
        if self.total <= 0.0 || q.sum_lambda <= 0.0 {
            return *p;
        }
        let log_rho = (self.total / q.sum_lambda).ln();
        let (c, e) = if xi.abs() < XI_ZERO_EPS {
            (1.0, log_rho)
        } else {
            let t = (xi * log_rho).exp_m1();
            (1.0 + t, t / xi)
        };
        DisciplineParams {
            mu0: p.mu0 + p.sigma0 * e,
            sigma0: c * p.sigma0,
            beta: c * p.beta + p.delta * e,
            gamma: c * p.gamma,
            delta: p.delta,
            xi: p.xi,
        }
    }

    /// Feasible stationary start for a given shape.
    fn moment_start(&self, xi: f64) -> DisciplineParams {
        let u = self.threshold;
        let mut su = (self.mean_excess * (1.0 - xi)).max(1e-6);
        if xi < 0.0 {
            su = su.max(-xi * self.max_excess * 1.05 + 1e-6);
        }
        let rate = (self.total / self.years.len() as f64).max(1e-3);
        if xi.abs() < XI_ZERO_EPS {
            return DisciplineParams::new(u + su * rate.ln(), su, 0.0, 0.0, 0.0);
        }
        let sigma0 = su * rate.powf(xi);
        DisciplineParams::new(u - (su - sigma0) / xi, sigma0, 0.0, 0.0, 0.0)
    }

    fn mean_threshold_scale(&self, p: &DisciplineParams, xi: f64) -> f64 {
        let y = self.years.iter().sum::<f64>() / self.years.len() as f64;
        (p.sigma0 + xi * (self.threshold - p.mu0) + p.delta * y).abs().max(1e-3)
    }
}

struct Pieces {
    sum_lambda: f64,
    n_log_lambda: f64,
    gpd: f64,
}

#[derive(Debug, Clone, Copy)]
struct Variant {
    gamma: bool,
    delta: bool,
}

impl Variant {
    fn pack(&self, p: &DisciplineParams) -> Vec<f64> {
        let mut v = vec![p.mu0, p.beta];
        if self.gamma {
            v.push(p.gamma);
        }
        if self.delta {
            v.push(p.delta);
        }
        v
    }

    fn unpack(&self, v: &[f64], sigma0: f64) -> DisciplineParams {
        let mut it = v.iter().copied();
        let mu0 = it.next().unwrap_or(0.0);
        let beta = it.next().unwrap_or(0.0);
        let gamma = if self.gamma { it.next().unwrap_or(0.0) } else { 0.0 };
        let delta = if self.delta { it.next().unwrap_or(0.0) } else { 0.0 };
        DisciplineParams::new(mu0, sigma0, beta, gamma, delta)
    }

    fn steps(&self, scale: f64) -> Vec<f64> {
        let mut v = vec![0.5 * scale, 0.02 * scale];
        if self.gamma {
            v.push(0.25 * scale);
        }
        if self.delta {
            v.push(0.01 * scale);
        }
        v
    }

    fn restrict(&self, p: &DisciplineParams) -> DisciplineParams {
        DisciplineParams {
            gamma: if self.gamma { p.gamma } else { 0.0 },
            delta: if self.delta { p.delta } else { 0.0 },
            ..*p
        }
    }
}

struct Budget {
    used: Cell<usize>,
    limit: usize,
}

impl Budget {
    fn remaining(&self) -> usize {
        self.limit.saturating_sub(self.used.get())
    }
}

/// Maximizes one discipline at a fixed shape, starting from `start`.
fn fit_discipline_at(
    data: &DisciplineData,
    xi: f64,
    start: &DisciplineParams,
    variant: Variant,
    tolerance: f64,
    budget: &Budget,
) -> (DisciplineParams, f64, bool) {
    let start = variant.restrict(start);
    let sigma_ref = start.sigma0;
    let scale = data.mean_threshold_scale(&start, xi);
    let opts = NelderMeadOptions {
        max_evals: budget.remaining().clamp(1, 50_000),
        // NM's tolerance is relative; the objective is a few units per exceedance
        ftol: 0.01 * tolerance / (1.0 + 4.0 * data.total),
        restarts: 1,
    };
    let m = nelder_mead(
        |v| -data.profiled(&variant.unpack(v, sigma_ref), xi),
        &variant.pack(&start),
        &variant.steps(scale),
        &opts,
    );
    budget.used.set(budget.used.get() + m.evals);
    let best = data.rescale(&variant.unpack(&m.x, sigma_ref), xi);
    let ll = data.log_likelihood(&best, xi);
    (best, ll, m.converged)
}

struct GroupFit {
    xi: f64,
    params: Vec<DisciplineParams>,
    converged: bool,
}

/// Profiles the shared shape of a group of disciplines.
fn fit_group(
    group: &[&DisciplineData],
    xi0: f64,
    starts: Option<Vec<DisciplineParams>>,
    eta_step: f64,
    variant: Variant,
    tolerance: f64,
    budget: &Budget,
) -> GroupFit {
    let warm: Vec<Cell<Option<DisciplineParams>>> = match starts {
        Some(s) => s.into_iter().map(|p| Cell::new(Some(p))).collect(),
        None => group.iter().map(|_| Cell::new(None)).collect(),
    };
    let all_converged = Cell::new(true);
    let profile = |xi: f64, commit: bool| -> (f64, Vec<DisciplineParams>, bool) {
        let mut total = 0.0;
        let mut params = Vec::with_capacity(group.len());
        let mut ok = true;
        for (data, slot) in group.iter().zip(&warm) {
            let fresh = data.moment_start(xi);
            let start = match slot.get() {
                Some(prev) if data.profiled(&variant.restrict(&prev), xi) >= data.profiled(&fresh, xi) => prev,
                _ => fresh,
            };
            let (p, ll, conv) = fit_discipline_at(data, xi, &start, variant, tolerance, budget);
            ok &= conv;
            if commit && ll.is_finite() {
                slot.set(Some(p));
            }
            total += ll;
            params.push(p);
        }
        (total, params, ok)
    };
    let objective = |eta: f64| {
        if budget.remaining() == 0 {
            all_converged.set(false);
            return f64::INFINITY;
        }
        let xi = XI_BOUND * eta.tanh();
        let (ll, _, ok) = profile(xi, true);
        if !ok {
            all_converged.set(false);
        }
        if ll.is_finite() {
            -ll
        } else {
            f64::INFINITY
        }
    };
    let eta0 = (xi0 / XI_BOUND).atanh();
    // the profile curvature in xi is O(1e3) for a few hundred exceedances,
    // so this keeps the likelihood error well under `tolerance`
    let xtol = (0.01 * tolerance.sqrt()).max(1e-10);
    let m = minimize_1d(objective, eta0, eta_step, xtol, 400);
    let xi = XI_BOUND * m.x.tanh();
    // final polish at the accepted shape; inner warm starts are already there
    all_converged.set(true);
    let (_, params, ok) = profile(xi, true);
    GroupFit {
        xi,
        params,
        converged: m.converged && ok && all_converged.get() && budget.remaining() > 0,
    }
}

fn prepare(data: &[ExceedanceSet], config: &FitConfig) -> Result<Vec<DisciplineData>> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::InsufficientData {
            discipline: "<all>".into(),
            needed: config.min_exceedances,
            available: 0,
        });
    }
    let mut sorted: BTreeMap<&str, &ExceedanceSet> = BTreeMap::new();
    for set in data {
        set.validate()?;
        if sorted.insert(&set.discipline, set).is_some() {
            return Err(Error::Domain(format!("discipline `{}` appears twice", set.discipline)));
        }
        if set.len() < config.min_exceedances {
            return Err(Error::InsufficientData {
                discipline: set.discipline.clone(),
                needed: config.min_exceedances,
                available: set.len(),
            });
        }
    }
    Ok(sorted
        .values()
        .map(|s| DisciplineData::new(s, config.year_origin, config.aft_start_year))
        .collect())
}

/// Fits the model to `data` by maximum likelihood.
pub fn fit(data: &[ExceedanceSet], config: &FitConfig) -> Result<FitResult> {
    let prepared = prepare(data, config)?;
    let variant = Variant {
        gamma: config.gamma,
        delta: config.delta,
    };
    let warm = match &config.init {
        InitStrategy::Warm { model } => Some(model),
        InitStrategy::Moments => None,
    };
    let mut jitter = CounterRng::new(config.seed);
    let mut summaries = Vec::with_capacity(config.starts);
    let mut best: Option<(f64, GlobalModel, bool)> = None;

    for start in 0..config.starts {
        let budget = Budget {
            used: Cell::new(0),
            limit: config.max_evaluations,
        };
        let (xi_initial, eta_step, inner_starts) = match (start, warm) {
            (0, Some(m)) => {
                let starts = prepared
                    .iter()
                    .map(|d| m.params(&d.name).copied())
                    .collect::<Result<Vec<_>>>()?;
                (m.xi.clamp(-0.85, 0.85), 0.02, Some(starts))
            }
            (0, None) => (config.xi_start, 0.05, None),
            _ => {
                let xi = (config.xi_start + 0.6 * (jitter.uniform() - 0.5)).clamp(-0.8, 0.8);
                (xi, 0.05, None)
            }
        };
        let (model, converged) = if config.shared_xi {
            let refs: Vec<&DisciplineData> = prepared.iter().collect();
            let g = fit_group(&refs, xi_initial, inner_starts, eta_step, variant, config.tolerance, &budget);
            let mut disciplines = BTreeMap::new();
            let mut thresholds = BTreeMap::new();
            for (d, p) in prepared.iter().zip(g.params) {
                disciplines.insert(d.name.clone(), p);
                thresholds.insert(d.name.clone(), d.threshold);
            }
            let model = GlobalModel {
                xi: g.xi,
                disciplines,
                thresholds,
                aft_start_year: config.aft_start_year,
                year_origin: config.year_origin,
            };
            (model, g.converged)
        } else {
            let mut disciplines = BTreeMap::new();
            let mut thresholds = BTreeMap::new();
            let mut converged = true;
            let mut weighted = 0.0;
            for (i, d) in prepared.iter().enumerate() {
                let (xi0, s) = match &inner_starts {
                    Some(s) => (s[i].xi.unwrap_or(xi_initial).clamp(-0.85, 0.85), Some(vec![s[i]])),
                    None => (xi_initial, None),
                };
                let g = fit_group(&[d], xi0, s, eta_step, variant, config.tolerance, &budget);
                converged &= g.converged;
                let mut p = g.params[0];
                p.xi = Some(g.xi);
                weighted += g.xi * d.total;
                disciplines.insert(d.name.clone(), p);
                thresholds.insert(d.name.clone(), d.threshold);
            }
            let n: f64 = prepared.iter().map(|d| d.total).sum();
            let model = GlobalModel {
                xi: weighted / n,
                disciplines,
                thresholds,
                aft_start_year: config.aft_start_year,
                year_origin: config.year_origin,
            };
            (model, converged)
        };
        let ll = model_log_likelihood(&prepared, &model);
        summaries.push(StartSummary {
            start,
            xi_initial,
            log_likelihood: ll,
            evaluations: budget.used.get(),
            converged,
        });
        if ll.is_finite() && best.as_ref().is_none_or(|b| ll > b.0) {
            best = Some((ll, model, converged));
        }
    }

    let Some((ll, model, converged)) = best else {
        let trace = serde_json::to_string(&summaries).unwrap_or_default();
        return Err(Error::FitFailure(format!("no start reached a feasible optimum: {trace}")));
    };
    Ok(FitResult {
        parameter_count: config.parameter_count(prepared.len()),
        model,
        log_likelihood: ll,
        converged,
        starts: summaries,
        config: config.clone(),
    })
}

fn model_log_likelihood(prepared: &[DisciplineData], model: &GlobalModel) -> f64 {
    prepared
        .iter()
        .map(|d| {
            let p = &model.disciplines[&d.name];
            d.log_likelihood(p, p.xi.unwrap_or(model.xi))
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalMethod {
    /// Plain percentiles of the replicate estimates.
    Percentile,
    /// Percentiles shifted by the median bias of the replicates (Efron's BC).
    BiasCorrected,
    /// Percentiles reflected about the estimate, `2 theta - q`; offsets the
    /// shape bias that plain percentiles double.
    #[default]
    Basic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
    pub method: IntervalMethod,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 200,
            level: 0.95,
            seed: 0xB007,
            method: IntervalMethod::Basic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterInterval {
    /// `None` for the shared shape.
    pub discipline: Option<String>,
    pub name: String,
    pub estimate: f64,
    pub interval: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub estimate: GlobalModel,
    /// Successful replicate fits, in replicate-index order.
    pub replicates: Vec<GlobalModel>,
    pub failed: usize,
    pub config: BootstrapConfig,
}

/// Percentile of sorted `values` with linear interpolation between order
/// statistics.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Bootstrap interval at `level`; level 0 collapses onto the estimate.
pub fn bootstrap_interval(estimate: f64, mut values: Vec<f64>, level: f64, method: IntervalMethod) -> Interval {
    if level <= 0.0 || values.is_empty() {
        return Interval {
            level,
            lower: estimate,
            upper: estimate,
        };
    }
    values.sort_by(f64::total_cmp);
    let alpha = 0.5 * (1.0 - level);
    let (lo, hi) = match method {
        IntervalMethod::Percentile | IntervalMethod::Basic => (alpha, 1.0 - alpha),
        IntervalMethod::BiasCorrected => {
            let b = values.len() as f64;
            let below = values.iter().filter(|&&v| v < estimate).count() as f64;
            let ties = values.iter().filter(|&&v| v == estimate).count() as f64;
            let frac = ((below + 0.5 * ties) / b).clamp(0.5 / b, 1.0 - 0.5 / b);
            let z0 = std_normal().inverse_cdf(frac);
            let za = std_normal().inverse_cdf(alpha);
            (
                std_normal().cdf(2.0 * z0 + za),
                std_normal().cdf(2.0 * z0 - za),
            )
        }
    };
    if method == IntervalMethod::Basic {
        return Interval {
            level,
            lower: 2.0 * estimate - percentile(&values, hi),
            upper: 2.0 * estimate - percentile(&values, lo),
        };
    }
    Interval {
        level,
        lower: percentile(&values, lo),
        upper: percentile(&values, hi),
    }
}

fn std_normal() -> Normal {
    Normal::standard()
}

const PARAM_NAMES: [&str; 5] = ["mu0", "sigma0", "beta", "gamma", "delta"];

fn param_value(p: &DisciplineParams, name: &str) -> f64 {
    match name {
        "mu0" => p.mu0,
        "sigma0" => p.sigma0,
        "beta" => p.beta,
        "gamma" => p.gamma,
        _ => p.delta,
    }
}

impl BootstrapResult {
    /// Percentile interval of an arbitrary functional across replicates.
    /// Replicates where the functional fails are skipped; more than 20%
    /// failures is an error.
    pub fn interval_of<F>(&self, functional: F, level: f64) -> Result<(f64, Interval)>
    where
        F: Fn(&GlobalModel) -> Result<f64> + Sync,
    {
        let estimate = functional(&self.estimate)?;
        let values: Vec<f64> = self
            .replicates
            .par_iter()
            .map(|m| functional(m).ok().filter(|v| v.is_finite()))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect();
        let failed = self.replicates.len() - values.len();
        if failed * 5 > self.replicates.len() {
            return Err(Error::BootstrapFailure {
                failed,
                replicates: self.replicates.len(),
            });
        }
        Ok((estimate, bootstrap_interval(estimate, values, level, self.config.method)))
    }

    /// Intervals for the shape and every discipline parameter.
    pub fn parameter_intervals(&self, level: f64) -> Vec<ParameterInterval> {
        let mut out = Vec::new();
        let shared: Vec<f64> = self.replicates.iter().map(|m| m.xi).collect();
        out.push(ParameterInterval {
            discipline: None,
            name: "xi".into(),
            estimate: self.estimate.xi,
            interval: bootstrap_interval(self.estimate.xi, shared, level, self.config.method),
        });
        for (d, p) in &self.estimate.disciplines {
            let mut names: Vec<&str> = PARAM_NAMES.to_vec();
            if p.xi.is_some() {
                names.push("xi");
            }
            for name in names {
                let get = |q: &DisciplineParams| {
                    if name == "xi" { q.xi.unwrap_or(f64::NAN) } else { param_value(q, name) }
                };
                let values = self
                    .replicates
                    .iter()
                    .filter_map(|m| m.disciplines.get(d).map(get))
                    .collect();
                out.push(ParameterInterval {
                    discipline: Some(d.clone()),
                    name: name.to_string(),
                    estimate: get(p),
                    interval: bootstrap_interval(get(p), values, level, self.config.method),
                });
            }
        }
        out
    }
}

/// Simulates a dataset from `model` with the same thresholds and horizons as
/// `template`.
pub fn simulate_like(model: &GlobalModel, template: &[ExceedanceSet], seed: u64) -> Result<Vec<ExceedanceSet>> {
    template
        .iter()
        .map(|set| {
            let d = &set.discipline;
            let mut m = model.clone();
            m.thresholds.insert(d.clone(), set.threshold);
            let mut observations = Vec::new();
            for year in set.horizon.years() {
                let mut rng = CounterRng::for_cell(seed, d, year);
                let xs = simulate_cell(&m, d, year, &mut rng)?;
                observations.extend(xs.into_iter().map(|x| Observation { year, x }));
            }
            ExceedanceSet::new(d.clone(), set.threshold, set.horizon, observations)
        })
        .collect()
}

/// Parametric bootstrap: simulate from the fitted model, refit each replicate
/// (one warm start at the estimate), and keep the replicate models.
pub fn bootstrap(
    result: &FitResult,
    data: &[ExceedanceSet],
    boot: &BootstrapConfig,
) -> Result<BootstrapResult> {
    if boot.replicates < 50 {
        return Err(Error::Config(format!(
            "at least 50 replicates are required, got {}",
            boot.replicates
        )));
    }
    if !(0.0..1.0).contains(&boot.level) {
        return Err(Error::Config(format!("level {} must lie in [0, 1)", boot.level)));
    }
    // replicate spread dwarfs a 1e-5 likelihood error
    let refit = FitConfig {
        starts: 1,
        tolerance: result.config.tolerance.max(1e-5),
        init: InitStrategy::Warm {
            model: result.model.clone(),
        },
        ..result.config.clone()
    };
    let fits: Vec<Option<GlobalModel>> = (0..boot.replicates)
        .into_par_iter()
        .map(|r| {
            let seed = CounterRng::derive(boot.seed, r as u64);
            let sim = simulate_like(&result.model, data, seed).ok()?;
            fit(&sim, &refit).ok().map(|f| f.model)
        })
        .collect();
    let failed = fits.iter().filter(|f| f.is_none()).count();
    if failed * 5 > boot.replicates {
        return Err(Error::BootstrapFailure {
            failed,
            replicates: boot.replicates,
        });
    }
    Ok(BootstrapResult {
        estimate: result.model.clone(),
        replicates: fits.into_iter().flatten().collect(),
        failed,
        config: *boot,
    })
}
