//! Newton-Raphson maximization of the unpenalized partial likelihood.

use nalgebra::DVector;

use crate::data::SurvivalDataset;
use crate::error::{CoxError, Result};
use crate::linalg::{max_abs, spd_solve};
use crate::partial_likelihood::{pl_derivatives, DerivativeOrder, PlDerivatives};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonConfig {
    pub max_iter: usize,
    /// Converged once `max_j |score_j| <= grad_tol`. The tolerance is floored at
    /// `1e4` machine epsilons of the scalar type, which only matters for `f32`.
    pub grad_tol: f64,
    pub step_halving_max: usize,
    /// Diagonal shift tried once when the information matrix fails to factor.
    pub ridge_fallback: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { max_iter: 100, grad_tol: 1e-9, step_halving_max: 20, ridge_fallback: 1e-8 }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0
            || self.step_halving_max == 0
            || !(self.grad_tol > 0.0)
            || !(self.ridge_fallback > 0.0)
        {
            return Err(CoxError::InvalidArgument("Newton settings must all be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MpleFit<T: Real> {
    pub beta: DVector<T>,
    /// Derivatives at `beta`.
    pub derivs: PlDerivatives<T>,
    pub iterations: usize,
    /// Log partial likelihood of every accepted iterate, starting with `init`;
    /// non-decreasing up to rounding in the last few digits.
    pub loglik_trace: Vec<T>,
}

/// Maximum partial likelihood estimate on `data`, starting from `init` (zero by default).
///
/// Each Newton direction solves `info * d = score` by Cholesky; the step is
/// halved until the log partial likelihood does not decrease.
pub fn fit_mple<T: Real>(
    data: &SurvivalDataset<T>,
    config: &NewtonConfig,
    init: Option<&DVector<T>>,
) -> Result<MpleFit<T>> {
    config.validate()?;
    if data.d0() == 0 {
        return Err(CoxError::InvalidData("no events: partial likelihood is flat".into()));
    }
    let p = data.p();
    let mut beta = match init {
        Some(b) if b.len() != p => {
            return Err(CoxError::InvalidArgument(format!(
                "initial value has length {}, expected {p}",
                b.len()
            )))
        }
        Some(b) => b.clone(),
        None => DVector::zeros(p),
    };
    let tol = T::lit(config.grad_tol).max(T::default_epsilon() * T::lit(1e4));
    let ridge = T::lit(config.ridge_fallback);
    let step_tol = tol.sqrt();
    // rounding slack for the ascent check
    let slack = T::default_epsilon() * T::lit(4.0);
    let noise_floor = T::default_epsilon() * T::lit(1e3);

    let mut derivs = pl_derivatives(data, &beta, DerivativeOrder::Information)?;
    let mut trace = vec![derivs.loglik];
    for iteration in 0..=config.max_iter {
        let small_score = max_abs(derivs.score.iter().copied()) <= tol;
        let direction = spd_solve(&derivs.info, &derivs.score, ridge);
        // a vanishing score with a non-vanishing Newton step means the
        // likelihood is still rising toward infinity (monotone likelihood)
        let step_bound = step_tol * (T::one() + max_abs(beta.iter().copied()));
        let settled = direction.as_ref().is_none_or(|d| max_abs(d.iter().copied()) <= step_bound);
        if small_score && settled {
            return Ok(MpleFit { beta, derivs, iterations: iteration, loglik_trace: trace });
        }
        if iteration == config.max_iter {
            break;
        }
        let direction = direction.ok_or(CoxError::Singular("fit_mple"))?;

        // once the predicted gain is below what the log likelihood can resolve,
        // the comparison is rounding noise and the full Newton step is taken
        let gain = derivs.score.dot(&direction) * T::lit(0.5);
        if gain <= noise_floor * (T::one() + derivs.loglik.magnitude()) {
            let candidate = &beta + &direction;
            if let Ok(next) = pl_derivatives(data, &candidate, DerivativeOrder::Information) {
                beta = candidate;
                derivs = next;
                trace.push(derivs.loglik);
                continue;
            }
        }

        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..=config.step_halving_max {
            let candidate = &beta + &direction * step;
            if let Ok(next) = pl_derivatives(data, &candidate, DerivativeOrder::Information) {
                if next.loglik >= derivs.loglik - slack * derivs.loglik.magnitude() {
                    accepted = Some((candidate, next));
                    break;
                }
            }
            step *= T::lit(0.5);
        }
        let (candidate, next) = accepted.ok_or(CoxError::NonConvergence {
            stage: "fit_mple line search",
            iterations: iteration + 1,
        })?;
        beta = candidate;
        derivs = next;
        trace.push(derivs.loglik);
    }
    Err(CoxError::NonConvergence { stage: "fit_mple", iterations: config.max_iter })
}
