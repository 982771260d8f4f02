//! Direct adaptive-LASSO maximization of the full-sample partial likelihood.
//!
//! This is the expensive reference the divide-and-conquer estimator is meant to
//! replace: every lambda on the path needs repeated full-data passes. It solves
//! `max l(b) - lambda sum_j |b_j| / |bt_j|^gamma` by proximal Newton steps (the
//! penalized quadratic model is solved with the same coordinate descent as the
//! surrogate problem) and tunes lambda with the full-likelihood BIC
//! `-2 n0 l(b) + log(d0) df`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::data::SurvivalDataset;
use crate::error::{CoxError, Result};
use crate::lsa::{argmin_first, coordinate_descent, lambda_grid, PathResult};
use crate::mple::fit_mple;
use crate::partial_likelihood::{pl_derivatives, DerivativeOrder};
use crate::inference::FitConfig;
use crate::scalar::Real;

const MAX_OUTER: usize = 50;
const STEP_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct PenalizedPlFit<T: Real> {
    pub beta_hat: DVector<T>,
    pub active_set: Vec<usize>,
    /// Full-sample MPLE supplying the adaptive weights.
    pub beta_tilde: DVector<T>,
    /// Full-sample information at `beta_tilde`.
    pub info: DMatrix<T>,
    /// Path with full-likelihood BIC values in `bics`.
    pub path: PathResult<T>,
    pub seconds: f64,
}

/// Full-likelihood BIC `-2 n0 l(b) + log(d0) df`.
pub fn bic_v<T: Real>(data: &SurvivalDataset<T>, beta: &DVector<T>) -> Result<T> {
    let l = pl_derivatives(data, beta, DerivativeOrder::Value)?.loglik;
    let df = beta.iter().filter(|&&b| b != T::zero()).count();
    Ok(-T::lit(2.0) * T::count(data.n_subjects()) * l + T::count(data.d0()).ln() * T::count(df))
}

fn penalty<T: Real>(weights: &[Option<T>], beta: &DVector<T>) -> T {
    weights
        .iter()
        .zip(beta.iter())
        .filter_map(|(w, &b)| w.map(|w| w * b.magnitude()))
        .fold(T::zero(), |a, b| a + b)
}

fn solve_at_lambda<T: Real>(
    data: &SurvivalDataset<T>,
    weights: &[Option<T>],
    lambda: T,
    beta: &mut DVector<T>,
    config: &FitConfig,
) -> Result<()> {
    let tol = T::lit(config.path.tol).max(T::default_epsilon() * T::lit(64.0));
    let step_tol = T::lit(STEP_TOL);
    for _ in 0..MAX_OUTER {
        let d = pl_derivatives(data, beta, DerivativeOrder::Information)?;
        let objective = -d.loglik + lambda * penalty(weights, beta);
        let linear = &d.info * &*beta + &d.score;
        let mut target = beta.clone();
        coordinate_descent(&d.info, &linear, weights, lambda, &mut target, tol, config.path.max_sweeps)?;
        let direction = &target - &*beta;
        if direction.amax() <= step_tol {
            return Ok(());
        }
        // predicted decrease of the penalized model
        let decrease = -d.score.dot(&direction) + lambda * (penalty(weights, &target) - penalty(weights, beta));

        let mut t = T::one();
        let mut moved = false;
        for _ in 0..30 {
            let candidate = &*beta + &direction * t;
            if let Ok(v) = pl_derivatives(data, &candidate, DerivativeOrder::Value) {
                let value = -v.loglik + lambda * penalty(weights, &candidate);
                if value <= objective + T::lit(1e-4) * t * decrease.min(T::zero()) {
                    *beta = candidate;
                    moved = objective - value > T::lit(8.0) * T::default_epsilon() * objective.magnitude();
                    break;
                }
            }
            t *= T::lit(0.5);
        }
        if !moved {
            // no further decrease is resolvable in floating point
            return Ok(());
        }
    }
    Err(CoxError::NonConvergence { stage: "penalized partial likelihood", iterations: MAX_OUTER })
}

/// Path of direct penalized fits on the full data, tuned by full-likelihood BIC.
pub fn fit_full_penalized_pl<T: Real>(
    data: &SurvivalDataset<T>,
    config: &FitConfig,
) -> Result<PenalizedPlFit<T>> {
    let clock = Instant::now();
    let mple = fit_mple(data, &config.newton, None)?;
    let gamma = T::lit(config.gamma);
    let weights: Vec<Option<T>> = mple
        .beta
        .iter()
        .map(|&b| (b != T::zero()).then(|| b.magnitude().powf(-gamma)))
        .collect();

    let p = data.p();
    let at_zero = pl_derivatives(data, &DVector::zeros(p), DerivativeOrder::Score)?;
    let lambda_max = weights
        .iter()
        .zip(at_zero.score.iter())
        .filter_map(|(w, &u)| w.map(|w| u.magnitude() / w))
        .fold(T::zero(), |m, x| m.max(x))
        * (T::one() + T::default_epsilon() * T::lit(4.0));
    let lambdas = lambda_grid(lambda_max, config.path.n_lambda, config.path.lambda_min_ratio);

    let mut beta = DVector::zeros(p);
    let mut betas = Vec::with_capacity(lambdas.len());
    let mut bics = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        solve_at_lambda(data, &weights, lambda, &mut beta, config)?;
        bics.push(bic_v(data, &beta)?);
        betas.push(beta.clone());
    }
    let dfs = betas.iter().map(|b| b.iter().filter(|&&x| x != T::zero()).count()).collect();
    let selected_index = argmin_first(&bics);
    let beta_hat = betas[selected_index].clone();
    let active_set = beta_hat.iter().enumerate().filter(|(_, &b)| b != T::zero()).map(|(j, _)| j).collect();
    Ok(PenalizedPlFit {
        beta_hat,
        active_set,
        beta_tilde: mple.beta,
        info: mple.derivs.info,
        path: PathResult { lambdas, betas, dfs, bics, selected_index },
        seconds: clock.elapsed().as_secs_f64(),
    })
}
