//! Monte Carlo replication harness.
//!
//! Each replicate simulates a fresh dataset from a seed derived from the base
//! seed and the replicate index, fits every requested estimator on it, and
//! records coefficients, interval coverage and wall time. Aggregation runs in
//! replicate order, so the numeric payload does not depend on whether
//! replicates ran concurrently.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dac::with_threads;
use crate::error::{CoxError, Result};
use crate::full_penalized::fit_full_penalized_pl;
use crate::inference::{confidence_intervals, fit_dac, fit_full_adaptive_lasso_oracle, oracle_se, FitConfig};
use crate::simgen::{generate, true_beta, ScenarioConfig};

pub const BENCH_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchEstimator {
    DacI1,
    DacI2,
    DacI3,
    /// Direct penalized partial likelihood on the full data.
    Full,
    /// Full-sample MPLE followed by the surrogate adaptive LASSO.
    FullLin,
}

impl BenchEstimator {
    pub const ALL: [BenchEstimator; 5] =
        [Self::DacI1, Self::DacI2, Self::DacI3, Self::Full, Self::FullLin];

    pub fn tag(self) -> &'static str {
        match self {
            Self::DacI1 => "dac_i1",
            Self::DacI2 => "dac_i2",
            Self::DacI3 => "dac_i3",
            Self::Full => "full",
            Self::FullLin => "full_lin",
        }
    }

    fn dac_rounds(self) -> Option<usize> {
        match self {
            Self::DacI1 => Some(1),
            Self::DacI2 => Some(2),
            Self::DacI3 => Some(3),
            _ => None,
        }
    }
}

impl fmt::Display for BenchEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for BenchEstimator {
    type Err = CoxError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.tag() == s.trim())
            .ok_or_else(|| CoxError::InvalidArgument(format!("unknown estimator '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Scenario template; its seed is the base seed of the run.
    pub scenario: ScenarioConfig,
    pub replicates: usize,
    pub estimators: Vec<BenchEstimator>,
    pub k_shards: usize,
    pub gamma: f64,
    pub alpha: f64,
    /// Worker threads inside each fit.
    pub threads: Option<usize>,
    /// Run replicates concurrently.
    pub parallel_reps: bool,
}

impl BenchConfig {
    pub fn new(scenario: ScenarioConfig, replicates: usize) -> Self {
        Self {
            scenario,
            replicates,
            estimators: BenchEstimator::ALL.to_vec(),
            k_shards: 10,
            gamma: 1.0,
            alpha: 0.05,
            threads: None,
            parallel_reps: false,
        }
    }

    fn fit_config(&self, seed: u64) -> FitConfig {
        FitConfig {
            k_shards: self.k_shards,
            gamma: self.gamma,
            alpha: self.alpha,
            threads: self.threads,
            seed,
            ..FitConfig::default()
        }
    }
}

/// Seed of replicate `r` (splitmix64 of the base seed and index).
pub fn replicate_seed(base: u64, r: usize) -> u64 {
    let mut z = base.wrapping_add((r as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One estimator on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub seed: u64,
    pub estimator: BenchEstimator,
    pub beta_hat: Vec<f64>,
    pub beta_tilde: Vec<f64>,
    /// Per coefficient: whether its interval covered the truth. Unselected
    /// coefficients have no interval and count as not covered.
    pub covered: Vec<bool>,
    pub wall_seconds: f64,
}

fn fit_one(config: &BenchConfig, est: BenchEstimator, data: &crate::Dataset, seed: u64, beta0: &[f64]) -> Result<ReplicateOutcome> {
    let fit_cfg = config.fit_config(seed);
    let covered_from = |beta_hat: &[f64], active: &[usize], lo: &[f64], hi: &[f64]| {
        let mut covered = vec![false; beta0.len()];
        for (a, &j) in active.iter().enumerate() {
            covered[j] = lo[a] <= beta0[j] && beta0[j] <= hi[a];
        }
        let _ = beta_hat;
        covered
    };
    let clock = Instant::now();
    let (beta_hat, beta_tilde, covered) = match est.dac_rounds() {
        Some(rounds) => {
            let fit = fit_dac(data, &FitConfig { n_iter: rounds, ..fit_cfg })?;
            let b: Vec<f64> = fit.beta_hat.iter().copied().collect();
            let c = covered_from(&b, &fit.active_set, &fit.ci_lower, &fit.ci_upper);
            (b, fit.beta_tilde.iter().copied().collect(), c)
        }
        None if est == BenchEstimator::FullLin => {
            let fit = fit_full_adaptive_lasso_oracle(data, &fit_cfg)?;
            let b: Vec<f64> = fit.beta_hat.iter().copied().collect();
            let c = covered_from(&b, &fit.active_set, &fit.ci_lower, &fit.ci_upper);
            (b, fit.beta_tilde.iter().copied().collect(), c)
        }
        None => {
            let fit = with_threads(config.threads, || fit_full_penalized_pl(data, &fit_cfg))??;
            let (lo, hi) = if fit.active_set.is_empty() {
                (Vec::new(), Vec::new())
            } else {
                let se = oracle_se(&fit.info, &fit.active_set, data.n_subjects())?;
                confidence_intervals(&fit.beta_hat, &fit.active_set, &se, config.alpha)?
            };
            let b: Vec<f64> = fit.beta_hat.iter().copied().collect();
            let c = covered_from(&b, &fit.active_set, &lo, &hi);
            (b, fit.beta_tilde.iter().copied().collect(), c)
        }
    };
    Ok(ReplicateOutcome {
        replicate: 0,
        seed,
        estimator: est,
        beta_hat,
        beta_tilde,
        covered,
        wall_seconds: clock.elapsed().as_secs_f64(),
    })
}

/// Simulates replicate `r` and fits every configured estimator on it.
pub fn run_replicate(config: &BenchConfig, r: usize) -> Result<Vec<ReplicateOutcome>> {
    let seed = replicate_seed(config.scenario.seed, r);
    let scenario = config.scenario.with_seed(seed);
    let beta0 = true_beta(&scenario)?.values;
    let data: crate::Dataset = generate(&scenario)?;
    config
        .estimators
        .iter()
        .map(|&est| {
            let mut out = fit_one(config, est, &data, seed, &beta0)?;
            out.replicate = r;
            Ok(out)
        })
        .collect()
}

/// Coefficients sharing one true value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub true_value: f64,
    pub size: usize,
    pub bias: f64,
    pub mse: f64,
    /// Percentage of estimates exactly zero.
    pub pct_zero: f64,
    /// Percentage of intervals covering the truth; absent for the zero group.
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRow {
    pub estimator: BenchEstimator,
    /// Median over replicates.
    pub wall_seconds: f64,
    pub gmse: f64,
    /// GMSE of the unpenalized estimate the weights came from.
    pub gmse_tilde: f64,
    pub groups: Vec<GroupMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineInfo {
    pub os: String,
    pub arch: String,
    pub available_threads: usize,
}

impl MachineInfo {
    pub fn current() -> Self {
        Self {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            available_threads: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub kind: String,
    pub config: BenchConfig,
    pub true_beta: Vec<f64>,
    /// Replicates aggregated so far.
    pub completed_replicates: usize,
    pub replicate_seeds: Vec<u64>,
    pub machine: MachineInfo,
    pub rows: Vec<EstimatorRow>,
    pub outcomes: Vec<ReplicateOutcome>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// True-value groups in display order: nonzero values descending, then zero.
fn coefficient_groups(beta0: &[f64]) -> Vec<(f64, Vec<usize>)> {
    let mut values: Vec<f64> = Vec::new();
    for &b in beta0 {
        if !values.contains(&b) {
            values.push(b);
        }
    }
    values.sort_by(|a, b| b.total_cmp(a));
    if let Some(z) = values.iter().position(|&v| v == 0.0) {
        let zero = values.remove(z);
        values.push(zero);
    }
    values
        .into_iter()
        .map(|v| (v, (0..beta0.len()).filter(|&j| beta0[j] == v).collect()))
        .collect()
}

/// Aggregates outcomes, in the order given, into per-estimator rows.
pub fn aggregate(config: &BenchConfig, beta0: &[f64], outcomes: &[ReplicateOutcome]) -> Vec<EstimatorRow> {
    let groups = coefficient_groups(beta0);
    config
        .estimators
        .iter()
        .map(|&est| {
            let mine: Vec<&ReplicateOutcome> = outcomes.iter().filter(|o| o.estimator == est).collect();
            let group_rows = groups
                .iter()
                .map(|(value, idx)| {
                    let cells = || mine.iter().flat_map(|o| idx.iter().map(move |&j| (o, j)));
                    GroupMetrics {
                        true_value: *value,
                        size: idx.len(),
                        bias: mean(cells().map(|(o, j)| o.beta_hat[j] - value)),
                        mse: mean(cells().map(|(o, j)| (o.beta_hat[j] - value).powi(2))),
                        pct_zero: 100.0 * mean(cells().map(|(o, j)| f64::from(u8::from(o.beta_hat[j] == 0.0)))),
                        coverage: (*value != 0.0)
                            .then(|| 100.0 * mean(cells().map(|(o, j)| f64::from(u8::from(o.covered[j]))))),
                    }
                })
                .collect();
            EstimatorRow {
                estimator: est,
                wall_seconds: median(mine.iter().map(|o| o.wall_seconds).collect()),
                gmse: mean(mine.iter().map(|o| config.scenario.gmse(&o.beta_hat, beta0))),
                gmse_tilde: mean(mine.iter().map(|o| config.scenario.gmse(&o.beta_tilde, beta0))),
                groups: group_rows,
            }
        })
        .collect()
}

fn build_report(config: &BenchConfig, beta0: &[f64], outcomes: Vec<ReplicateOutcome>, done: usize) -> BenchReport {
    BenchReport {
        schema_version: BENCH_SCHEMA_VERSION,
        kind: "bench_report".into(),
        config: config.clone(),
        true_beta: beta0.to_vec(),
        completed_replicates: done,
        replicate_seeds: (0..done).map(|r| replicate_seed(config.scenario.seed, r)).collect(),
        machine: MachineInfo::current(),
        rows: aggregate(config, beta0, &outcomes),
        outcomes,
    }
}

/// Runs the benchmark. `on_progress` receives the report over every completed
/// prefix of replicates, which lets callers persist partial results.
pub fn run_bench(config: &BenchConfig, mut on_progress: impl FnMut(&BenchReport) -> Result<()>) -> Result<BenchReport> {
    if config.replicates == 0 {
        return Err(CoxError::InvalidArgument("at least one replicate is required".into()));
    }
    if config.estimators.is_empty() {
        return Err(CoxError::InvalidArgument("no estimators selected".into()));
    }
    let beta0 = true_beta(&config.scenario)?.values;
    let mut outcomes = Vec::new();
    if config.parallel_reps {
        let all: Vec<Vec<ReplicateOutcome>> = (0..config.replicates)
            .into_par_iter()
            .map(|r| run_replicate(config, r))
            .collect::<Result<_>>()?;
        outcomes = all.into_iter().flatten().collect();
    } else {
        for r in 0..config.replicates {
            outcomes.extend(run_replicate(config, r)?);
            on_progress(&build_report(config, &beta0, outcomes.clone(), r + 1))?;
        }
    }
    let report = build_report(config, &beta0, outcomes, config.replicates);
    if config.parallel_reps {
        on_progress(&report)?;
    }
    Ok(report)
}

/// Fixed-width table with estimators as columns and metrics as rows.
pub fn render_table(report: &BenchReport) -> String {
    let mut out = String::new();
    let s = &report.config.scenario;
    let _ = writeln!(
        out,
        "scenario {}  n0={}  p={}  v={}  K={}  replicates={}",
        s.scenario, s.n0, s.p, s.v, report.config.k_shards, report.completed_replicates
    );
    let _ = write!(out, "{:<24}", "metric");
    for row in &report.rows {
        let _ = write!(out, "{:>12}", row.estimator.tag());
    }
    out.push('\n');
    let mut line = |label: String, cell: &dyn Fn(&EstimatorRow) -> String| {
        let _ = write!(out, "{label:<24}");
        for row in &report.rows {
            let _ = write!(out, "{:>12}", cell(row));
        }
        out.push('\n');
    };
    line("time (s, median)".into(), &|r| format!("{:.3}", r.wall_seconds));
    line("GMSE x1e3".into(), &|r| format!("{:.4}", 1e3 * r.gmse));
    line("GMSE unpenalized x1e3".into(), &|r| format!("{:.4}", 1e3 * r.gmse_tilde));
    let n_groups = report.rows.first().map_or(0, |r| r.groups.len());
    for g in 0..n_groups {
        let value = report.rows[0].groups[g].true_value;
        line(format!("b={value} bias x1e3"), &|r| format!("{:.3}", 1e3 * r.groups[g].bias));
        line(format!("b={value} MSE x1e3"), &|r| format!("{:.4}", 1e3 * r.groups[g].mse));
        line(format!("b={value} %zero"), &|r| format!("{:.1}", r.groups[g].pct_zero));
        if value != 0.0 {
            line(format!("b={value} CovP"), &|r| {
                r.groups[g].coverage.map_or_else(|| "-".into(), |c| format!("{c:.1}"))
            });
        }
    }
    out
}
