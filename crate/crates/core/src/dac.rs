//! Iterated divide-and-conquer one-step estimation of the unpenalized MPLE.
//!
//! Shard derivatives are computed in parallel (map) and combined by a
//! sequential sum in shard-index order (reduce), so results do not depend on
//! how many worker threads ran the map.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::{ShardPlan, SurvivalDataset};
use crate::error::{CoxError, Result};
use crate::linalg::{spd_solve, symmetrize};
use crate::mple::{fit_mple, NewtonConfig};
use crate::partial_likelihood::{pl_derivatives, DerivativeOrder};
use crate::scalar::Real;

/// A dataset materialized as its `K` shards.
#[derive(Debug, Clone)]
pub struct ShardedData<T: Real> {
    shards: Vec<SurvivalDataset<T>>,
    n0: usize,
    d0: usize,
}

impl<T: Real> ShardedData<T> {
    pub fn new(dataset: &SurvivalDataset<T>, plan: &ShardPlan) -> Result<Self> {
        Ok(Self { shards: dataset.split(plan)?, n0: dataset.n_subjects(), d0: dataset.d0() })
    }

    pub fn shards(&self) -> &[SurvivalDataset<T>] {
        &self.shards
    }

    pub fn k_shards(&self) -> usize {
        self.shards.len()
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn d0(&self) -> usize {
        self.d0
    }
}

/// Pooled quantities of one one-step round.
#[derive(Debug, Clone)]
pub struct RoundOutput<T: Real> {
    pub beta_next: DVector<T>,
    /// Average of the shard information matrices at the input `beta`.
    pub info_dac: DMatrix<T>,
    /// Average of the shard scores at the input `beta`.
    pub mean_score: DVector<T>,
}

/// Averaged shard score and information at `beta`.
pub fn pooled_derivatives<T: Real>(
    sharded: &ShardedData<T>,
    beta: &DVector<T>,
) -> Result<(DVector<T>, DMatrix<T>)> {
    let per_shard: Vec<_> = sharded
        .shards
        .par_iter()
        .map(|s| pl_derivatives(s, beta, DerivativeOrder::Information))
        .collect::<Result<_>>()?;

    let p = beta.len();
    let mut score = DVector::zeros(p);
    let mut info = DMatrix::zeros(p, p);
    for d in &per_shard {
        score += &d.score;
        info += &d.info;
    }
    let inv_k = T::one() / T::count(per_shard.len());
    score *= inv_k;
    info *= inv_k;
    symmetrize(&mut info);
    Ok((score, info))
}

/// One linearized update: the average over shards of
/// `beta + info_dac(beta)^{-1} score_k(beta)`, which collapses to a single solve
/// against the average score.
pub fn dac_onestep_round<T: Real>(
    sharded: &ShardedData<T>,
    beta: &DVector<T>,
    ridge: T,
) -> Result<RoundOutput<T>> {
    let (mean_score, info_dac) = pooled_derivatives(sharded, beta)?;
    let step = spd_solve(&info_dac, &mean_score, ridge).ok_or(CoxError::Singular("dac_onestep_round"))?;
    Ok(RoundOutput { beta_next: beta + step, info_dac, mean_score })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DacTimings {
    /// Shard-1 MPLE.
    pub step_i: f64,
    /// One entry per one-step round.
    pub step_ii_rounds: Vec<f64>,
    /// Pooled information at the final iterate.
    pub final_info: f64,
}

/// Output of steps (i) and (ii).
#[derive(Debug, Clone)]
pub struct DacUnpenalized<T: Real> {
    pub beta_tilde: DVector<T>,
    /// Pooled information at `beta_tilde`.
    pub info_dac: DMatrix<T>,
    /// Iterates `0..=n_iter`; entry 0 is the shard-1 MPLE.
    pub iterate_history: Vec<DVector<T>>,
    pub k_shards: usize,
    pub n_iter: usize,
    pub n0: usize,
    pub d0: usize,
    pub timings: DacTimings,
}

/// Shard-1 MPLE followed by `n_iter` one-step rounds over all shards.
pub fn fit_dac_unpenalized<T: Real>(
    sharded: &ShardedData<T>,
    n_iter: usize,
    newton: &NewtonConfig,
) -> Result<DacUnpenalized<T>> {
    if n_iter == 0 {
        return Err(CoxError::InvalidArgument("at least one one-step round is required".into()));
    }
    let ridge = T::lit(newton.ridge_fallback);
    let clock = Instant::now();
    let first = fit_mple(&sharded.shards[0], newton, None)?;
    let mut timings = DacTimings { step_i: clock.elapsed().as_secs_f64(), ..Default::default() };

    let mut history = Vec::with_capacity(n_iter + 1);
    history.push(first.beta);
    for _ in 0..n_iter {
        let clock = Instant::now();
        let round = dac_onestep_round(sharded, history.last().expect("nonempty"), ridge)?;
        timings.step_ii_rounds.push(clock.elapsed().as_secs_f64());
        history.push(round.beta_next);
    }

    let clock = Instant::now();
    let beta_tilde = history.last().expect("nonempty").clone();
    let (_, info_dac) = pooled_derivatives(sharded, &beta_tilde)?;
    timings.final_info = clock.elapsed().as_secs_f64();
    if info_dac.clone().cholesky().is_none() {
        return Err(CoxError::Singular("pooled information at the final iterate"));
    }

    Ok(DacUnpenalized {
        beta_tilde,
        info_dac,
        iterate_history: history,
        k_shards: sharded.k_shards(),
        n_iter,
        n0: sharded.n0,
        d0: sharded.d0,
        timings,
    })
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| CoxError::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
