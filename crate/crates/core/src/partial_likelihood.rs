//! Cox log partial likelihood with its score and observed information.
//!
//! All three quantities are per-subject averages over the subset, so shard
//! results combine by plain averaging. Ties among event times use the Breslow
//! convention.

use nalgebra::{DMatrix, DVector};

use crate::data::SurvivalDataset;
use crate::error::{CoxError, Result};
use crate::scalar::Real;

/// Largest admissible `|beta'z|` before the evaluation is refused.
pub const LINEAR_PREDICTOR_LIMIT: f64 = 700.0;

/// Which outputs of [`pl_derivatives`] to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DerivativeOrder {
    Value,
    Score,
    Information,
}

/// Log partial likelihood, score and negative Hessian at one `beta`.
///
/// Outputs above the requested order are left at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PlDerivatives<T: Real> {
    pub loglik: T,
    pub score: DVector<T>,
    /// Symmetric positive semi-definite `p x p` matrix.
    pub info: DMatrix<T>,
    /// Number of subjects the averages are taken over.
    pub n_omega: usize,
    pub order: DerivativeOrder,
}

/// Evaluates the partial likelihood on `data` at `beta`.
///
/// A single sweep over rows in descending stop time keeps running sums of
/// `exp(eta)`, `z exp(eta)` and `z z' exp(eta)`; counting-process rows leave the
/// risk set once the sweep passes their start time. Cost is `O(n p^2)`.
pub fn pl_derivatives<T: Real>(
    data: &SurvivalDataset<T>,
    beta: &DVector<T>,
    order: DerivativeOrder,
) -> Result<PlDerivatives<T>> {
    sweep(data, beta, order, data.start_order())
}

/// Same as [`pl_derivatives`] but always runs the counting-process bookkeeping,
/// even when every row starts at 0.
pub fn pl_derivatives_general<T: Real>(
    data: &SurvivalDataset<T>,
    beta: &DVector<T>,
    order: DerivativeOrder,
) -> Result<PlDerivatives<T>> {
    match data.start_order() {
        Some(o) => sweep(data, beta, order, Some(o)),
        None => {
            let identity: Vec<u32> = (0..data.n_rows() as u32).collect();
            sweep(data, beta, order, Some(&identity))
        }
    }
}

/// Linear predictors `z_i' beta` for every row in storage order.
pub fn linear_predictors<T: Real>(data: &SurvivalDataset<T>, beta: &DVector<T>) -> Result<Vec<T>> {
    let p = data.p();
    if beta.len() != p {
        return Err(CoxError::InvalidArgument(format!(
            "beta has length {}, data has {p} covariates",
            beta.len()
        )));
    }
    let limit = T::lit(LINEAR_PREDICTOR_LIMIT);
    let b = beta.as_slice();
    let mut eta = Vec::with_capacity(data.n_rows());
    for i in 0..data.n_rows() {
        let e = data.row(i).iter().zip(b).fold(T::zero(), |acc, (&z, &bj)| acc + z * bj);
        if !(e.magnitude() <= limit) {
            return Err(CoxError::LinearPredictorOverflow {
                value: e.as_f64(),
                limit: LINEAR_PREDICTOR_LIMIT,
            });
        }
        eta.push(e);
    }
    Ok(eta)
}

fn sweep<T: Real>(
    data: &SurvivalDataset<T>,
    beta: &DVector<T>,
    order: DerivativeOrder,
    leave_order: Option<&[u32]>,
) -> Result<PlDerivatives<T>> {
    let p = data.p();
    let n = data.n_rows();
    let eta = linear_predictors(data, beta)?;
    let shift = eta.iter().copied().fold(T::lit(f64::NEG_INFINITY), |a, b| a.max(b));
    let weight: Vec<T> = eta.iter().map(|&e| (e - shift).exp()).collect();

    let want_score = order >= DerivativeOrder::Score;
    let want_info = order >= DerivativeOrder::Information;
    let start = data.start();
    let stop = data.stop();
    let event = data.event();

    let mut s0 = T::zero();
    let mut s1 = vec![T::zero(); if want_score { p } else { 0 }];
    // upper triangle, row-major
    let mut s2 = vec![T::zero(); if want_info { p * p } else { 0 }];

    let mut loglik = T::zero();
    let mut score = vec![T::zero(); p];
    let mut info = vec![T::zero(); if want_info { p * p } else { 0 }];
    let mut mean = vec![T::zero(); p];

    let accumulate = |row: usize, sign: T, s0: &mut T, s1: &mut [T], s2: &mut [T]| {
        let w = sign * weight[row];
        *s0 += w;
        if want_score {
            let z = data.row(row);
            for j in 0..p {
                let a = w * z[j];
                s1[j] += a;
                if want_info {
                    let dst = &mut s2[j * p..(j + 1) * p];
                    for k in j..p {
                        dst[k] += a * z[k];
                    }
                }
            }
        }
    };

    let mut i = 0;
    let mut leave_ptr = 0;
    while i < n {
        let t = stop[i];
        let mut j = i;
        while j < n && stop[j] == t {
            accumulate(j, T::one(), &mut s0, &mut s1, &mut s2);
            j += 1;
        }
        if let Some(leave) = leave_order {
            while leave_ptr < n && start[leave[leave_ptr] as usize] >= t {
                accumulate(leave[leave_ptr] as usize, -T::one(), &mut s0, &mut s1, &mut s2);
                leave_ptr += 1;
            }
        }

        let mut deaths = 0usize;
        for r in i..j {
            if event[r] {
                deaths += 1;
                loglik += eta[r];
                if want_score {
                    for (sc, &z) in score.iter_mut().zip(data.row(r)) {
                        *sc += z;
                    }
                }
            }
        }
        if deaths > 0 {
            let d = T::count(deaths);
            loglik -= d * (s0.ln() + shift);
            if want_score {
                for k in 0..p {
                    mean[k] = s1[k] / s0;
                    score[k] -= d * mean[k];
                }
            }
            if want_info {
                for a in 0..p {
                    for b in a..p {
                        info[a * p + b] += d * (s2[a * p + b] / s0 - mean[a] * mean[b]);
                    }
                }
            }
        }
        i = j;
    }

    let n_omega = data.n_subjects();
    let scale = T::one() / T::count(n_omega);
    let info = if want_info {
        DMatrix::from_fn(p, p, |a, b| {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            info[lo * p + hi] * scale
        })
    } else {
        DMatrix::zeros(p, p)
    };
    Ok(PlDerivatives {
        loglik: loglik * scale,
        score: DVector::from_iterator(p, score.into_iter().map(|s| s * scale)),
        info,
        n_omega,
        order,
    })
}
