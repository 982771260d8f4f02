//! Survival data generators for the benchmark scenarios.
//!
//! Covariates are equicorrelated Gaussians, `Corr(z_l, z_l') = v`, drawn through
//! the one-factor form `z = sqrt(1-v) e + sqrt(v) g 1`. Event times follow a
//! shape-2 Weibull proportional hazards model and are drawn by inverting the
//! cumulative hazard against a unit exponential. Each subject has its own
//! ChaCha8 stream, so generation is reproducible and order-independent.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{validate_dataset, SurvivalDataset, SurvivalRecord};
use crate::error::{CoxError, Result};
use crate::scalar::Real;

/// Baseline rate of the time-independent scenarios: `Lambda(t) = 0.5 e^eta t^2`.
pub const TI_BASELINE: f64 = 0.5;
/// Baseline rate of the time-dependent scenario: `Lambda(t) = 0.05 e^eta t^2`.
pub const TD_BASELINE: f64 = 0.05;
/// Rate of the exponential censoring time, `exp(0.5)`.
pub const TI_CENSOR_RATE_LOG: f64 = 0.5;
/// Administrative censoring time of the time-dependent scenario.
pub const TD_ADMIN_CENSOR: f64 = 4.0;
/// Interval boundaries on which time-dependent covariates are constant.
pub const TD_BREAKS: [f64; 3] = [1.0, 2.0, 3.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    I,
    II,
    III,
    IV,
}

impl Scenario {
    pub fn is_time_dependent(self) -> bool {
        self == Scenario::IV
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::I => "I",
            Scenario::II => "II",
            Scenario::III => "III",
            Scenario::IV => "IV",
        })
    }
}

impl FromStr for Scenario {
    type Err = CoxError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Scenario::I),
            "II" | "2" => Ok(Scenario::II),
            "III" | "3" => Ok(Scenario::III),
            "IV" | "4" => Ok(Scenario::IV),
            other => Err(CoxError::InvalidArgument(format!("unknown scenario '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n0: usize,
    /// Total covariate dimension of the fitted model.
    pub p: usize,
    /// Time-dependent part of `p` (scenario IV only, otherwise 0).
    pub p_dep: usize,
    /// Equicorrelation.
    pub v: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn time_independent(scenario: Scenario, n0: usize, p: usize, v: f64, seed: u64) -> Self {
        Self { scenario, n0, p, p_dep: 0, v, seed }
    }

    pub fn time_dependent(n0: usize, p_ind: usize, p_dep: usize, v: f64, seed: u64) -> Self {
        Self { scenario: Scenario::IV, n0, p: p_ind + p_dep, p_dep, v, seed }
    }

    pub fn p_ind(&self) -> usize {
        self.p - self.p_dep
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CoxError::InvalidArgument(msg));
        if self.n0 < 2 {
            return bad(format!("n0 must be at least 2, got {}", self.n0));
        }
        if !(0.0..1.0).contains(&self.v) {
            return bad(format!("correlation v must be in [0, 1), got {}", self.v));
        }
        let need = match self.scenario {
            Scenario::I => 9,
            Scenario::II => 16,
            Scenario::III => 11,
            Scenario::IV => {
                if self.p_dep < 9 || self.p_ind() < 9 || self.p_dep > self.p {
                    return bad(format!(
                        "scenario IV needs p_ind >= 9 and p_dep >= 9, got {} and {}",
                        self.p_ind(),
                        self.p_dep
                    ));
                }
                return Ok(());
            }
        };
        if self.p_dep != 0 {
            return bad(format!("scenario {} has no time-dependent covariates", self.scenario));
        }
        if self.p < need {
            return bad(format!("scenario {} needs p >= {need}, got {}", self.scenario, self.p));
        }
        Ok(())
    }

    /// `(b - b0)' V (b - b0)` with `V = (1-v) I + v 11'`.
    pub fn gmse(&self, beta_hat: &[f64], beta0: &[f64]) -> f64 {
        let (mut sq, mut sum) = (0.0, 0.0);
        for (b, b0) in beta_hat.iter().zip(beta0) {
            let d = b - b0;
            sq += d * d;
            sum += d;
        }
        (1.0 - self.v) * sq + self.v * sum * sum
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueBeta {
    pub values: Vec<f64>,
    pub active_set: Vec<usize>,
}

fn pattern(groups: &[(f64, usize)], len: usize) -> Vec<f64> {
    let mut v: Vec<f64> = groups.iter().flat_map(|&(x, n)| std::iter::repeat_n(x, n)).collect();
    v.resize(len, 0.0);
    v
}

/// Coefficient vector of a scenario.
pub fn true_beta(config: &ScenarioConfig) -> Result<TrueBeta> {
    config.validate()?;
    let values = match config.scenario {
        Scenario::I => pattern(&[(0.8, 3), (0.4, 3), (0.2, 3)], config.p),
        Scenario::II => pattern(&[(0.4, 4), (0.2, 4), (0.1, 4), (0.05, 4)], config.p),
        Scenario::III => pattern(&[(1.0, 1), (0.5, 1), (0.2, 2), (0.1, 2), (0.05, 2), (0.035, 3)], config.p),
        Scenario::IV => {
            let block = [(0.08, 3), (0.04, 3), (0.02, 3)];
            let mut v = pattern(&block, config.p_ind());
            v.extend(pattern(&block, config.p_dep));
            v
        }
    };
    let active_set = values.iter().enumerate().filter(|(_, &b)| b != 0.0).map(|(j, _)| j).collect();
    Ok(TrueBeta { values, active_set })
}

/// Latent draws of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectDraw {
    /// `p` covariates, or `p_ind + 4 p_dep` for scenario IV (one block per interval).
    pub z: Vec<f64>,
    /// Unit exponential inverted through the cumulative hazard.
    pub exp_draw: f64,
    pub event_time: f64,
    pub censor_time: f64,
}

fn subject_rng(seed: u64, subject: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(subject);
    rng
}

fn equicorrelated(rng: &mut ChaCha8Rng, dim: usize, v: f64) -> Vec<f64> {
    let common: f64 = rng.sample(StandardNormal);
    let (a, b) = ((1.0 - v).sqrt(), v.sqrt());
    (0..dim)
        .map(|_| {
            let e: f64 = rng.sample(StandardNormal);
            a * e + b * common
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Linear predictors of a time-dependent subject on each of the four intervals.
pub fn interval_predictors(z: &[f64], beta: &[f64], p_ind: usize, p_dep: usize) -> [f64; 4] {
    let base = dot(&z[..p_ind], &beta[..p_ind]);
    let mut eta = [0.0; 4];
    for (m, e) in eta.iter_mut().enumerate() {
        let off = p_ind + m * p_dep;
        *e = base + dot(&z[off..off + p_dep], &beta[p_ind..]);
    }
    eta
}

fn interval_bounds(m: usize) -> (f64, f64) {
    let lo = if m == 0 { 0.0 } else { TD_BREAKS[m - 1] };
    let hi = if m < TD_BREAKS.len() { TD_BREAKS[m] } else { f64::INFINITY };
    (lo, hi)
}

/// `Lambda(t) = 0.05 sum_m e^{eta_m} (min(t, hi_m)^2 - lo_m^2)` over intervals entered.
pub fn piecewise_cumulative_hazard(eta: &[f64; 4], t: f64) -> f64 {
    let mut total = 0.0;
    for (m, &e) in eta.iter().enumerate() {
        let (lo, hi) = interval_bounds(m);
        if t <= lo {
            break;
        }
        let upper = t.min(hi);
        total += TD_BASELINE * e.exp() * (upper * upper - lo * lo);
    }
    total
}

/// Solves `Lambda(t) = target` for the piecewise Weibull hazard.
pub fn invert_piecewise_cumulative_hazard(eta: &[f64; 4], target: f64) -> f64 {
    let mut cum = 0.0;
    for (m, &e) in eta.iter().enumerate() {
        let (lo, hi) = interval_bounds(m);
        let rate = TD_BASELINE * e.exp();
        let seg = rate * (hi * hi - lo * lo);
        if cum + seg >= target {
            return (lo * lo + (target - cum) / rate).sqrt();
        }
        cum += seg;
    }
    unreachable!("last interval is unbounded")
}

/// Latent draws of subject `i` under `config`.
pub fn draw_subject(config: &ScenarioConfig, beta: &[f64], i: u64) -> SubjectDraw {
    let mut rng = subject_rng(config.seed, i);
    if config.scenario.is_time_dependent() {
        let (p_ind, p_dep) = (config.p_ind(), config.p_dep);
        let z = equicorrelated(&mut rng, p_ind + 4 * p_dep, config.v);
        let exp_draw: f64 = rng.sample(Exp1);
        let eta = interval_predictors(&z, beta, p_ind, p_dep);
        let event_time = invert_piecewise_cumulative_hazard(&eta, exp_draw);
        SubjectDraw { z, exp_draw, event_time, censor_time: TD_ADMIN_CENSOR }
    } else {
        let z = equicorrelated(&mut rng, config.p, config.v);
        let exp_draw: f64 = rng.sample(Exp1);
        let censor_draw: f64 = rng.sample(Exp1);
        let event_time = (exp_draw / (TI_BASELINE * dot(&z, beta).exp())).sqrt();
        let censor_time = censor_draw / TI_CENSOR_RATE_LOG.exp();
        SubjectDraw { z, exp_draw, event_time, censor_time }
    }
}

fn records_for<T: Real>(config: &ScenarioConfig, i: u64, draw: &SubjectDraw) -> Vec<SurvivalRecord<T>> {
    let x = draw.event_time.min(draw.censor_time);
    let event = draw.event_time <= draw.censor_time;
    let lit = |v: &[f64]| v.iter().map(|&z| T::lit(z)).collect::<Vec<T>>();
    if !config.scenario.is_time_dependent() {
        return vec![SurvivalRecord::new(i, T::lit(x), event, lit(&draw.z))];
    }
    let (p_ind, p_dep) = (config.p_ind(), config.p_dep);
    let mut rows = Vec::with_capacity(4);
    for m in 0..4 {
        let (lo, hi) = interval_bounds(m);
        if lo >= x {
            break;
        }
        let stop = hi.min(x);
        let mut cov = lit(&draw.z[..p_ind]);
        let off = p_ind + m * p_dep;
        cov.extend(lit(&draw.z[off..off + p_dep]));
        rows.push(SurvivalRecord::interval(i, T::lit(lo), T::lit(stop), event && stop == x, cov));
    }
    rows
}

/// Generates a scenario with an explicit coefficient vector.
pub fn generate_with_beta<T: Real>(config: &ScenarioConfig, beta: &[f64]) -> Result<SurvivalDataset<T>> {
    config.validate()?;
    if beta.len() != config.p {
        return Err(CoxError::InvalidArgument(format!(
            "beta has length {}, scenario has p = {}",
            beta.len(),
            config.p
        )));
    }
    let records: Vec<SurvivalRecord<T>> = (0..config.n0 as u64)
        .into_par_iter()
        .flat_map_iter(|i| records_for(config, i, &draw_subject(config, beta, i)))
        .collect();
    validate_dataset(records)
}

/// Time-independent data for scenarios I to III.
pub fn gen_time_independent<T: Real>(config: &ScenarioConfig) -> Result<SurvivalDataset<T>> {
    if config.scenario.is_time_dependent() {
        return Err(CoxError::InvalidArgument("scenario IV is time-dependent".into()));
    }
    generate_with_beta(config, &true_beta(config)?.values)
}

/// Start-stop data for scenario IV.
pub fn gen_time_dependent<T: Real>(config: &ScenarioConfig) -> Result<SurvivalDataset<T>> {
    if !config.scenario.is_time_dependent() {
        return Err(CoxError::InvalidArgument(format!(
            "scenario {} is time-independent",
            config.scenario
        )));
    }
    generate_with_beta(config, &true_beta(config)?.values)
}

/// Dispatches on the scenario kind.
pub fn generate<T: Real>(config: &ScenarioConfig) -> Result<SurvivalDataset<T>> {
    if config.scenario.is_time_dependent() {
        gen_time_dependent(config)
    } else {
        gen_time_independent(config)
    }
}

pub const SCHEMA_VERSION: u32 = 1;

/// JSON sidecar written next to a simulated CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioManifest {
    pub schema_version: u32,
    pub kind: String,
    pub scenario: Scenario,
    pub n0: usize,
    pub p: usize,
    pub p_ind: usize,
    pub p_dep: usize,
    pub v: f64,
    pub seed: u64,
    pub true_beta: Vec<f64>,
    pub n_rows: usize,
    pub n_events: usize,
    pub censoring_fraction: f64,
    pub data_file: String,
}

impl ScenarioManifest {
    pub fn new<T: Real>(config: &ScenarioConfig, data: &SurvivalDataset<T>, data_file: &str) -> Result<Self> {
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            kind: "scenario_manifest".into(),
            scenario: config.scenario,
            n0: config.n0,
            p: config.p,
            p_ind: config.p_ind(),
            p_dep: config.p_dep,
            v: config.v,
            seed: config.seed,
            true_beta: true_beta(config)?.values,
            n_rows: data.n_rows(),
            n_events: data.d0(),
            censoring_fraction: 1.0 - data.d0() as f64 / data.n_subjects() as f64,
            data_file: data_file.to_string(),
        })
    }
}
