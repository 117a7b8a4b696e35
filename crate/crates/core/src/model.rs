//! The non-stationary point-process model for yearly top performances.
//!
//! All values live on the *performance scale*: negated seconds, so that a
//! faster run is a larger number and "exceeding" a threshold means running
//! faster than it. Conversion to positive seconds happens only at the I/O
//! boundary.
//!
//! For discipline `d` and calendar year `t`, with `y = t - year_origin` and
//! `I = 1{t >= aft_start_year}`:
//!
//! ```text
//! mu(t)    = mu0 + beta*y + gamma*I
//! sigma(t) = sigma0 + xi*beta*y + xi*gamma*I + delta*y
//! Lambda(t, x) = [1 + xi*(x - mu(t))/sigma(t)]_+^(-1/xi)     expected count at or above x
//! lambda(t, x) = (1/sigma(t)) [ ... ]_+^(-1/xi - 1)          intensity
//! ```
//!
//! The yearly covariates are step functions, so the time integral of the
//! intensity over the horizon is a plain sum over integer years.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this magnitude the shape is treated as exactly zero and the
/// exponential limit forms are used.
pub const XI_ZERO_EPS: f64 = 1e-8;

/// Per-discipline parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisciplineParams {
    /// Location at `y = 0` (negated seconds).
    pub mu0: f64,
    /// Scale at `y = 0` (seconds).
    pub sigma0: f64,
    /// Era trend (negated seconds per year).
    pub beta: f64,
    /// Step effect of advanced footwear from `aft_start_year` on (negated seconds).
    pub gamma: f64,
    /// Trend of the threshold-excess scale (seconds per year).
    pub delta: f64,
    /// Discipline-specific shape; `None` means the model's shared shape.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
}

impl DisciplineParams {
    pub fn new(mu0: f64, sigma0: f64, beta: f64, gamma: f64, delta: f64) -> Self {
        Self {
            mu0,
            sigma0,
            beta,
            gamma,
            delta,
            xi: None,
        }
    }
}

/// Whether the footwear step effect is applied or removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AftMode {
    #[default]
    WithAft,
    /// `gamma` is dropped from both location and scale.
    Corrected,
}

impl std::str::FromStr for AftMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "with-aft" => Ok(AftMode::WithAft),
            "corrected" => Ok(AftMode::Corrected),
            other => Err(Error::Config(format!(
                "unknown mode `{other}` (expected with-aft or corrected)"
            ))),
        }
    }
}

/// Inclusive range of calendar years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearRange {
    pub first: i32,
    pub last: i32,
}

impl YearRange {
    pub fn new(first: i32, last: i32) -> Result<Self> {
        if last < first {
            return Err(Error::Domain(format!(
                "empty year range {first}..={last}"
            )));
        }
        Ok(Self { first, last })
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.first..=self.last).contains(&year)
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + Clone {
        self.first..=self.last
    }

    pub fn len(&self) -> usize {
        (self.last - self.first + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub year: i32,
    /// Performance-scale value (negated seconds).
    pub x: f64,
}

/// Exceedances of one discipline above its threshold over a horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceSet {
    pub discipline: String,
    /// Threshold on the performance scale.
    pub threshold: f64,
    pub horizon: YearRange,
    pub observations: Vec<Observation>,
}

impl ExceedanceSet {
    /// Builds a set, checking that every observation is inside the horizon and
    /// strictly above the threshold.
    pub fn new(
        discipline: impl Into<String>,
        threshold: f64,
        horizon: YearRange,
        observations: Vec<Observation>,
    ) -> Result<Self> {
        let set = Self {
            discipline: discipline.into(),
            threshold,
            horizon,
            observations,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite threshold for `{}`",
                self.discipline
            )));
        }
        for obs in &self.observations {
            if !self.horizon.contains(obs.year) {
                return Err(Error::Domain(format!(
                    "`{}` observation in {} lies outside horizon {}..={}",
                    self.discipline, obs.year, self.horizon.first, self.horizon.last
                )));
            }
            if !(obs.x > self.threshold) {
                return Err(Error::Domain(format!(
                    "`{}` observation {} in {} does not exceed threshold {}",
                    self.discipline, obs.x, obs.year, self.threshold
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Observed count per horizon year, in horizon order.
    pub fn yearly_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.horizon.len()];
        for obs in &self.observations {
            counts[(obs.year - self.horizon.first) as usize] += 1;
        }
        counts
    }

    /// Best (largest) performance-scale value in the set.
    pub fn best(&self) -> Option<f64> {
        self.observations.iter().map(|o| o.x).reduce(f64::max)
    }
}

/// Parameters of the Poisson process in one discipline-year.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YearParams {
    pub mu: f64,
    pub sigma: f64,
    pub xi: f64,
}

impl YearParams {
    fn bracket(&self, x: f64) -> f64 {
        1.0 + self.xi * (x - self.mu) / self.sigma
    }

    /// Expected yearly count of performances at or above `x`.
    ///
    /// Zero beyond a finite upper endpoint; infinite below the lower endpoint
    /// of a positive-shape model.
    pub fn measure_above(&self, x: f64) -> f64 {
        if self.xi.abs() < XI_ZERO_EPS {
            return (-(x - self.mu) / self.sigma).exp();
        }
        let b = self.bracket(x);
        if b <= 0.0 {
            return if self.xi < 0.0 { 0.0 } else { f64::INFINITY };
        }
        (-b.ln() / self.xi).exp()
    }

    /// Intensity `-d/dx measure_above(x)`.
    pub fn intensity(&self, x: f64) -> f64 {
        if self.xi.abs() < XI_ZERO_EPS {
            return (-(x - self.mu) / self.sigma).exp() / self.sigma;
        }
        let b = self.bracket(x);
        if b <= 0.0 {
            return 0.0;
        }
        (-(1.0 / self.xi + 1.0) * b.ln()).exp() / self.sigma
    }

    /// Log-intensity, `-inf` outside the support.
    pub fn log_intensity(&self, x: f64) -> f64 {
        if self.xi.abs() < XI_ZERO_EPS {
            return -self.sigma.ln() - (x - self.mu) / self.sigma;
        }
        let b = self.bracket(x);
        if b <= 0.0 {
            return f64::NEG_INFINITY;
        }
        -self.sigma.ln() - (1.0 / self.xi + 1.0) * b.ln()
    }

    /// Scale of the excess distribution above `u`.
    pub fn threshold_scale(&self, u: f64) -> f64 {
        self.sigma + self.xi * (u - self.mu)
    }

    /// Upper endpoint on the performance scale, `None` when `xi >= 0`.
    pub fn upper_endpoint(&self) -> Option<f64> {
        (self.xi <= -XI_ZERO_EPS).then(|| self.mu - self.sigma / self.xi)
    }

    /// Solves `measure_above(x) = level` for `x`.
    pub fn level_for_measure(&self, level: f64) -> f64 {
        if self.xi.abs() < XI_ZERO_EPS {
            self.mu - self.sigma * level.ln()
        } else {
            self.mu + self.sigma * ((-self.xi * level.ln()).exp() - 1.0) / self.xi
        }
    }
}

/// Survival function of the generalized Pareto excess law.
pub fn gpd_survival(excess: f64, scale: f64, xi: f64) -> f64 {
    if xi.abs() < XI_ZERO_EPS {
        return (-excess / scale).exp();
    }
    let b = 1.0 + xi * excess / scale;
    if b <= 0.0 {
        return 0.0;
    }
    (-b.ln() / xi).exp()
}

/// Parameters shared across disciplines plus each discipline's block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalModel {
    /// Shared shape.
    pub xi: f64,
    pub disciplines: BTreeMap<String, DisciplineParams>,
    /// Threshold per discipline on the performance scale.
    #[serde(default)]
    pub thresholds: BTreeMap<String, f64>,
    pub aft_start_year: i32,
    /// Calendar year mapped to `y = 0`.
    pub year_origin: i32,
}

impl GlobalModel {
    pub fn params(&self, d: &str) -> Result<&DisciplineParams> {
        self.disciplines
            .get(d)
            .ok_or_else(|| Error::UnknownDiscipline(d.to_string()))
    }

    pub fn threshold(&self, d: &str) -> Result<f64> {
        self.params(d)?;
        self.thresholds
            .get(d)
            .copied()
            .ok_or_else(|| Error::MissingThreshold(d.to_string()))
    }

    pub fn xi_for(&self, d: &str) -> Result<f64> {
        Ok(self.params(d)?.xi.unwrap_or(self.xi))
    }

    fn aft_indicator(&self, year: i32, mode: AftMode) -> f64 {
        match mode {
            AftMode::WithAft if year >= self.aft_start_year => 1.0,
            _ => 0.0,
        }
    }

    fn invalid(d: &str, year: i32, reason: String) -> Error {
        Error::InvalidParameter {
            discipline: d.to_string(),
            year,
            reason,
        }
    }

    /// Process parameters for `d` in `year`, failing when the scale is not
    /// positive.
    pub fn year_params(&self, d: &str, year: i32, mode: AftMode) -> Result<YearParams> {
        let p = self.params(d)?;
        let xi = p.xi.unwrap_or(self.xi);
        let y = f64::from(year - self.year_origin);
        let ind = self.aft_indicator(year, mode);
        let mu = p.mu0 + p.beta * y + p.gamma * ind;
        let sigma = p.sigma0 + xi * p.beta * y + xi * p.gamma * ind + p.delta * y;
        if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
            return Err(Self::invalid(d, year, format!("scale {sigma} is not positive")));
        }
        Ok(YearParams { mu, sigma, xi })
    }

    /// Copy with `gamma` zeroed, i.e. the parameter set the `corrected`
    /// mode evaluates.
    pub fn without_aft(&self) -> GlobalModel {
        let mut m = self.clone();
        for p in m.disciplines.values_mut() {
            p.gamma = 0.0;
        }
        m
    }

    /// Checks that scales and threshold scales are positive for every year of
    /// `horizon` and every discipline that has a threshold.
    pub fn check_feasible(&self, horizon: YearRange) -> Result<()> {
        if !(self.xi < 1.0) {
            return Err(Error::Domain(format!("shape {} must be below 1", self.xi)));
        }
        for d in self.disciplines.keys() {
            for year in horizon.years() {
                self.year_params(d, year, AftMode::WithAft)?;
                if self.thresholds.contains_key(d) {
                    threshold_scale_at(self, d, year)?;
                }
            }
        }
        Ok(())
    }
}

/// Location `mu(year)`.
pub fn location_at(model: &GlobalModel, d: &str, year: i32) -> Result<f64> {
    Ok(model.year_params(d, year, AftMode::WithAft)?.mu)
}

/// Scale `sigma(year)`; errors when not positive.
pub fn scale_at(model: &GlobalModel, d: &str, year: i32) -> Result<f64> {
    Ok(model.year_params(d, year, AftMode::WithAft)?.sigma)
}

/// Excess scale `sigma_u(year) = sigma(year) + xi (u - mu(year))`.
pub fn threshold_scale_at(model: &GlobalModel, d: &str, year: i32) -> Result<f64> {
    let u = model.threshold(d)?;
    let su = model.year_params(d, year, AftMode::WithAft)?.threshold_scale(u);
    if !(su > 0.0) {
        return Err(GlobalModel::invalid(
            d,
            year,
            format!("threshold scale {su} is not positive"),
        ));
    }
    Ok(su)
}

/// Same quantity through the collapsed linear form
/// `sigma0 + xi (u - mu0) + delta y`, in which the footwear step cancels.
pub fn threshold_scale_linear(model: &GlobalModel, d: &str, year: i32) -> Result<f64> {
    let u = model.threshold(d)?;
    let p = model.params(d)?;
    let xi = model.xi_for(d)?;
    let y = f64::from(year - model.year_origin);
    let su = p.sigma0 + xi * (u - p.mu0) + p.delta * y;
    if !(su > 0.0) {
        return Err(GlobalModel::invalid(
            d,
            year,
            format!("threshold scale {su} is not positive"),
        ));
    }
    Ok(su)
}

/// Expected count in `year` of performances at or above `x`. Does not read the
/// threshold.
pub fn poisson_measure_above(model: &GlobalModel, d: &str, year: i32, x: f64) -> Result<f64> {
    Ok(model.year_params(d, year, AftMode::WithAft)?.measure_above(x))
}

pub fn intensity_at(model: &GlobalModel, d: &str, year: i32, x: f64) -> Result<f64> {
    Ok(model.year_params(d, year, AftMode::WithAft)?.intensity(x))
}

/// Conditional survival of the excess above the threshold, `P(X > x | X > u)`.
pub fn gpd_excess_survival(model: &GlobalModel, d: &str, year: i32, x: f64) -> Result<f64> {
    let u = model.threshold(d)?;
    if x < u {
        return Err(Error::Domain(format!(
            "{x} lies below the threshold {u} of `{d}`"
        )));
    }
    let su = threshold_scale_at(model, d, year)?;
    Ok(gpd_survival(x - u, su, model.xi_for(d)?))
}

/// Fastest achievable time in `year`, in positive seconds.
pub fn upper_endpoint_time(model: &GlobalModel, d: &str, year: i32) -> Result<f64> {
    endpoint_seconds(model, d, year, AftMode::WithAft)
}

pub(crate) fn endpoint_seconds(
    model: &GlobalModel,
    d: &str,
    year: i32,
    mode: AftMode,
) -> Result<f64> {
    let yp = model.year_params(d, year, mode)?;
    yp.upper_endpoint()
        .map(|x| -x)
        .ok_or(Error::NoFiniteEndpoint { xi: yp.xi })
}

/// Point-process log-likelihood summed over disciplines.
///
/// Returns `-inf` (not an error) when an observation falls outside the
/// support or a scale turns non-positive inside the horizon.
pub fn log_likelihood(model: &GlobalModel, data: &[ExceedanceSet]) -> Result<f64> {
    let mut total = 0.0;
    for set in data {
        let u = model.threshold(&set.discipline)?;
        if (u - set.threshold).abs() > 1e-9 * u.abs().max(1.0) {
            return Err(Error::Domain(format!(
                "data threshold {} for `{}` does not match model threshold {u}",
                set.threshold, set.discipline
            )));
        }
        let mut yearly = Vec::with_capacity(set.horizon.len());
        for year in set.horizon.years() {
            match model.year_params(&set.discipline, year, AftMode::WithAft) {
                Ok(yp) => yearly.push(yp),
                Err(Error::InvalidParameter { .. }) => return Ok(f64::NEG_INFINITY),
                Err(e) => return Err(e),
            }
        }
        for yp in &yearly {
            total -= yp.measure_above(u);
        }
        for obs in &set.observations {
            let yp = &yearly[(obs.year - set.horizon.first) as usize];
            total += yp.log_intensity(obs.x);
        }
        if !total.is_finite() {
            return Ok(f64::NEG_INFINITY);
        }
    }
    Ok(total)
}
