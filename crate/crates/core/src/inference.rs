//! End-to-end pipelines and oracle-property standard errors.
//!
//! [`fit_dac`] runs the three divide-and-conquer steps: shard-1 MPLE, averaged
//! one-step rounds over all shards, then the adaptive LASSO on the quadratic
//! surrogate. [`fit_full_adaptive_lasso_oracle`] applies the same surrogate
//! machinery to the full-sample MPLE and is the comparison target in tests.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dac::{fit_dac_unpenalized, with_threads, ShardedData};
use crate::data::{make_shard_plan, SurvivalDataset};
use crate::error::{CoxError, Result};
use crate::lsa::{select_by_bic, solve_lsa_path, LsaProblem, PathConfig, PathResult};
use crate::mple::{fit_mple, NewtonConfig};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub k_shards: usize,
    /// Number of one-step rounds.
    pub n_iter: usize,
    pub gamma: f64,
    /// Confidence intervals have level `1 - alpha`.
    pub alpha: f64,
    /// Worker threads for the shard map; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Seed of the random shard partition.
    pub seed: u64,
    pub newton: NewtonConfig,
    pub path: PathConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            k_shards: 10,
            n_iter: 2,
            gamma: 1.0,
            alpha: 0.05,
            threads: None,
            seed: 0,
            newton: NewtonConfig::default(),
            path: PathConfig::default(),
        }
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTimings {
    /// Shard-1 MPLE (DAC) or full-sample MPLE (oracle).
    pub step_i: f64,
    pub step_ii_rounds: Vec<f64>,
    /// Pooled information at the final iterate.
    pub final_info: f64,
    /// Surrogate construction and the coordinate-descent path.
    pub step_iii: f64,
    /// BIC evaluation and selection.
    pub tuning: f64,
    pub inference: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Dac,
    FullLin,
}

impl Estimator {
    pub fn tag(self) -> &'static str {
        match self {
            Estimator::Dac => "dac",
            Estimator::FullLin => "full_lin",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DacFitResult<T: Real> {
    pub estimator: Estimator,
    pub beta_hat: DVector<T>,
    /// Indices of the nonzero entries of `beta_hat`, ascending.
    pub active_set: Vec<usize>,
    pub beta_tilde: DVector<T>,
    /// Information matrix the surrogate and standard errors were built from.
    pub info: DMatrix<T>,
    /// Standard errors, confidence bounds: one entry per active coordinate.
    pub se: Vec<T>,
    pub ci_lower: Vec<T>,
    pub ci_upper: Vec<T>,
    pub alpha: f64,
    pub lambda_selected: T,
    pub path: PathResult<T>,
    /// Unpenalized iterates; a single entry for the full-sample oracle.
    pub iterate_history: Vec<DVector<T>>,
    pub k_shards: usize,
    pub n_iter: usize,
    pub n0: usize,
    pub d0: usize,
    pub timings: StageTimings,
}

/// Two-sided standard normal quantile `z_{1 - alpha/2}`.
pub fn normal_quantile(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CoxError::InvalidArgument(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let n = Normal::standard();
    Ok(n.inverse_cdf(1.0 - alpha / 2.0))
}

/// Standard errors `sqrt(diag((A^act)^{-1}) / n0)` for the active coordinates.
pub fn oracle_se<T: Real>(info: &DMatrix<T>, active: &[usize], n0: usize) -> Result<Vec<T>> {
    if active.is_empty() {
        return Err(CoxError::InvalidArgument("active set is empty".into()));
    }
    if active.iter().any(|&j| j >= info.nrows()) {
        return Err(CoxError::InvalidArgument("active index out of range".into()));
    }
    let sub = DMatrix::from_fn(active.len(), active.len(), |a, b| info[(active[a], active[b])]);
    let inverse = sub.cholesky().ok_or(CoxError::Singular("active-set information"))?.inverse();
    let n0 = T::count(n0);
    Ok((0..active.len()).map(|a| (inverse[(a, a)] / n0).sqrt()).collect())
}

/// `beta_hat_j -/+ z_{1-alpha/2} se_j` over the active coordinates.
pub fn confidence_intervals<T: Real>(
    beta_hat: &DVector<T>,
    active: &[usize],
    se: &[T],
    alpha: f64,
) -> Result<(Vec<T>, Vec<T>)> {
    let z = T::lit(normal_quantile(alpha)?);
    Ok(active
        .iter()
        .zip(se)
        .map(|(&j, &s)| (beta_hat[j] - z * s, beta_hat[j] + z * s))
        .unzip())
}

fn active_indices<T: Real>(beta: &DVector<T>) -> Vec<usize> {
    beta.iter().enumerate().filter(|(_, &b)| b != T::zero()).map(|(j, _)| j).collect()
}

struct Unpenalized<T: Real> {
    beta_tilde: DVector<T>,
    info: DMatrix<T>,
    history: Vec<DVector<T>>,
    k_shards: usize,
    n_iter: usize,
    n0: usize,
    d0: usize,
}

fn penalize<T: Real>(
    estimator: Estimator,
    base: Unpenalized<T>,
    config: &FitConfig,
    mut timings: StageTimings,
) -> Result<DacFitResult<T>> {
    let clock = Instant::now();
    let problem = LsaProblem::new(&base.beta_tilde, &base.info, config.gamma, base.n0, base.d0)?;
    let (lambdas, betas) = solve_lsa_path(&problem, &config.path)?;
    timings.step_iii = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let path = select_by_bic(&problem, lambdas, betas);
    timings.tuning = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let beta_hat = path.selected_beta().clone();
    let active_set = active_indices(&beta_hat);
    let (se, ci_lower, ci_upper) = if active_set.is_empty() {
        (Vec::new(), Vec::new(), Vec::new())
    } else {
        let se = oracle_se(&base.info, &active_set, base.n0)?;
        let (lo, hi) = confidence_intervals(&beta_hat, &active_set, &se, config.alpha)?;
        (se, lo, hi)
    };
    timings.inference = clock.elapsed().as_secs_f64();

    Ok(DacFitResult {
        estimator,
        lambda_selected: path.selected_lambda(),
        beta_hat,
        active_set,
        beta_tilde: base.beta_tilde,
        info: base.info,
        se,
        ci_lower,
        ci_upper,
        alpha: config.alpha,
        path,
        iterate_history: base.history,
        k_shards: base.k_shards,
        n_iter: base.n_iter,
        n0: base.n0,
        d0: base.d0,
        timings,
    })
}

fn check_config(config: &FitConfig) -> Result<()> {
    normal_quantile(config.alpha)?;
    if !(config.gamma > 0.0) {
        return Err(CoxError::InvalidArgument("gamma must be positive".into()));
    }
    config.newton.validate()
}

/// The divide-and-conquer estimator on `dataset`.
pub fn fit_dac<T: Real>(dataset: &SurvivalDataset<T>, config: &FitConfig) -> Result<DacFitResult<T>> {
    check_config(config)?;
    let total = Instant::now();
    let plan = make_shard_plan(dataset, config.k_shards, config.seed)?;
    let sharded = ShardedData::new(dataset, &plan)?;
    let unpen = with_threads(config.threads, || {
        fit_dac_unpenalized(&sharded, config.n_iter, &config.newton)
    })??;
    let timings = StageTimings {
        step_i: unpen.timings.step_i,
        step_ii_rounds: unpen.timings.step_ii_rounds.clone(),
        final_info: unpen.timings.final_info,
        ..Default::default()
    };
    let base = Unpenalized {
        beta_tilde: unpen.beta_tilde,
        info: unpen.info_dac,
        history: unpen.iterate_history,
        k_shards: unpen.k_shards,
        n_iter: unpen.n_iter,
        n0: unpen.n0,
        d0: unpen.d0,
    };
    let mut fit = penalize(Estimator::Dac, base, config, timings)?;
    fit.timings.total = total.elapsed().as_secs_f64();
    Ok(fit)
}

/// Full-sample MPLE followed by the same surrogate adaptive LASSO.
///
/// `k_shards`, `n_iter`, `threads` and `seed` in `config` are ignored.
pub fn fit_full_adaptive_lasso_oracle<T: Real>(
    dataset: &SurvivalDataset<T>,
    config: &FitConfig,
) -> Result<DacFitResult<T>> {
    check_config(config)?;
    let total = Instant::now();
    let clock = Instant::now();
    let mple = fit_mple(dataset, &config.newton, None)?;
    let timings = StageTimings { step_i: clock.elapsed().as_secs_f64(), ..Default::default() };
    let base = Unpenalized {
        beta_tilde: mple.beta.clone(),
        info: mple.derivs.info,
        history: vec![mple.beta],
        k_shards: 1,
        n_iter: 0,
        n0: dataset.n_subjects(),
        d0: dataset.d0(),
    };
    let mut fit = penalize(Estimator::FullLin, base, config, timings)?;
    fit.timings.total = total.elapsed().as_secs_f64();
    Ok(fit)
}
