//! Least-squares approximation of the penalized partial likelihood.
//!
//! Given an unpenalized estimate `beta_tilde` and its information matrix `A`,
//! the adaptive LASSO becomes the `p`-dimensional problem
//!
//! ```text
//! minimize  1/2 |y0 - X0 b|^2 + lambda * sum_j w_j |b_j|
//! X0 = A^{1/2},  y0 = X0 beta_tilde,  w_j = |beta_tilde_j|^{-gamma}
//! ```
//!
//! solved by cyclic coordinate descent along a log-spaced lambda path and tuned
//! with the LSA form of the event-count BIC.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{CoxError, Result};
use crate::linalg::symmetrize;
use crate::scalar::Real;

/// `S(z, t) = sign(z) max(|z| - t, 0)`.
#[inline]
pub fn soft_threshold<T: Real>(z: T, t: T) -> T {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        T::zero()
    }
}

fn rel_tol<T: Real>(base: f64) -> T {
    T::lit(base).max(T::default_epsilon() * T::lit(64.0))
}

/// Symmetric positive semi-definite square root by spectral decomposition.
///
/// Eigenvalues down to `-1e-10` (relative to the largest entry) are clamped to zero.
pub fn matrix_sqrt_spd<T: Real>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    if !a.is_square() {
        return Err(CoxError::InvalidArgument("matrix square root of a non-square matrix".into()));
    }
    let scale = a.amax().max(T::one());
    let tol = rel_tol::<T>(1e-10) * scale;
    let n = a.nrows();
    for i in 0..n {
        for j in i + 1..n {
            if (a[(i, j)] - a[(j, i)]).magnitude() > tol {
                return Err(CoxError::InvalidArgument(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let mut sym = a.clone();
    symmetrize(&mut sym);
    let eig = SymmetricEigen::new(sym);
    let mut roots = eig.eigenvalues.clone();
    for ev in roots.iter_mut() {
        if *ev < -tol {
            return Err(CoxError::InvalidArgument(format!(
                "matrix is not positive semi-definite (eigenvalue {:.3e})",
                ev.as_f64()
            )));
        }
        *ev = ev.max(T::zero()).sqrt();
    }
    let v = &eig.eigenvectors;
    let mut root = v * DMatrix::from_diagonal(&roots) * v.transpose();
    symmetrize(&mut root);
    Ok(root)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathConfig {
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    /// Coordinate descent stops when the largest coordinate change is below this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self { n_lambda: 100, lambda_min_ratio: 1e-4, tol: 1e-10, max_sweeps: 10_000 }
    }
}

/// The quadratic surrogate built from `(beta_tilde, A)`.
#[derive(Debug, Clone)]
pub struct LsaProblem<T: Real> {
    pub x0: DMatrix<T>,
    pub y0: DVector<T>,
    pub beta_tilde: DVector<T>,
    /// The information matrix `A` the surrogate was built from.
    pub info: DMatrix<T>,
    /// Adaptive weights; `None` marks an infinite weight (coordinate pinned at 0).
    pub weights: Vec<Option<T>>,
    pub gamma: f64,
    pub n0: usize,
    pub d0: usize,
    gram: DMatrix<T>,
    xty: DVector<T>,
}

impl<T: Real> LsaProblem<T> {
    pub fn new(
        beta_tilde: &DVector<T>,
        info: &DMatrix<T>,
        gamma: f64,
        n0: usize,
        d0: usize,
    ) -> Result<Self> {
        let p = beta_tilde.len();
        if info.shape() != (p, p) {
            return Err(CoxError::InvalidArgument("information matrix does not match beta".into()));
        }
        if !(gamma > 0.0) {
            return Err(CoxError::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        let x0 = matrix_sqrt_spd(info)?;
        let y0 = &x0 * beta_tilde;
        let weights = beta_tilde
            .iter()
            .map(|&b| (b != T::zero()).then(|| b.magnitude().powf(T::lit(-gamma))))
            .collect();
        let x0t = x0.transpose();
        let gram = &x0t * &x0;
        let xty = &x0t * &y0;
        Ok(Self {
            x0,
            y0,
            beta_tilde: beta_tilde.clone(),
            info: info.clone(),
            weights,
            gamma,
            n0,
            d0,
            gram,
            xty,
        })
    }

    pub fn p(&self) -> usize {
        self.beta_tilde.len()
    }

    /// `X0' X0`.
    pub fn gram(&self) -> &DMatrix<T> {
        &self.gram
    }

    /// `X0' y0`.
    pub fn xty(&self) -> &DVector<T> {
        &self.xty
    }

    /// Smallest lambda whose solution is identically zero.
    pub fn lambda_max(&self) -> T {
        let raw = self
            .weights
            .iter()
            .zip(self.xty.iter())
            .filter_map(|(w, &c)| w.map(|w| c.magnitude() / w))
            .fold(T::zero(), |m, x| m.max(x));
        raw * (T::one() + T::default_epsilon() * T::lit(4.0))
    }

    /// Gradient of the quadratic part, `X0'(X0 b - y0)`.
    pub fn gradient(&self, beta: &DVector<T>) -> DVector<T> {
        &self.gram * beta - &self.xty
    }

    /// Largest violation of the optimality conditions at `beta`.
    pub fn kkt_violation(&self, lambda: T, beta: &DVector<T>) -> T {
        kkt_violation(&self.gram, &self.xty, &self.weights, lambda, beta)
    }

    /// `n0 (bt - b)' A (bt - b) + log(d0) df`.
    pub fn bic_vl(&self, beta: &DVector<T>) -> T {
        let diff = &self.beta_tilde - beta;
        let quad = diff.dot(&(&self.info * &diff));
        let df = beta.iter().filter(|&&b| b != T::zero()).count();
        T::count(self.n0) * quad + T::count(self.d0).ln() * T::count(df)
    }
}

pub(crate) fn kkt_violation<T: Real>(
    gram: &DMatrix<T>,
    linear: &DVector<T>,
    weights: &[Option<T>],
    lambda: T,
    beta: &DVector<T>,
) -> T {
    let grad = gram * beta - linear;
    let mut worst = T::zero();
    for (j, w) in weights.iter().enumerate() {
        let Some(w) = *w else { continue };
        let g = grad[j];
        let v = if beta[j] == T::zero() {
            (g.magnitude() - lambda * w).max(T::zero())
        } else {
            let sign = if beta[j] > T::zero() { T::one() } else { -T::one() };
            (g + lambda * w * sign).magnitude()
        };
        worst = worst.max(v);
    }
    worst
}

/// Cyclic coordinate descent on `1/2 b'G b - c'b + lambda sum w_j |b_j|`,
/// updating `beta` in place. Returns the number of sweeps.
pub(crate) fn coordinate_descent<T: Real>(
    gram: &DMatrix<T>,
    linear: &DVector<T>,
    weights: &[Option<T>],
    lambda: T,
    beta: &mut DVector<T>,
    tol: T,
    max_sweeps: usize,
) -> Result<usize> {
    let p = beta.len();
    for (j, w) in weights.iter().enumerate() {
        if w.is_none() {
            beta[j] = T::zero();
        }
    }
    let mut g = gram * &*beta;
    for sweep in 1..=max_sweeps {
        let mut max_change = T::zero();
        for j in 0..p {
            let Some(w) = weights[j] else { continue };
            let gjj = gram[(j, j)];
            let old = beta[j];
            let new = if gjj > T::zero() {
                let r = linear[j] - (g[j] - gjj * old);
                soft_threshold(r, lambda * w) / gjj
            } else {
                T::zero()
            };
            let delta = new - old;
            if delta != T::zero() {
                beta[j] = new;
                g.axpy(delta, &gram.column(j), T::one());
                max_change = max_change.max(delta.magnitude());
            }
        }
        if max_change <= tol {
            return Ok(sweep);
        }
    }
    Err(CoxError::NonConvergence { stage: "coordinate descent", iterations: max_sweeps })
}

/// Minimizer of the surrogate at one `lambda`, optionally warm-started.
pub fn solve_weighted_lasso<T: Real>(
    problem: &LsaProblem<T>,
    lambda: T,
    config: &PathConfig,
    warm_start: Option<&DVector<T>>,
) -> Result<DVector<T>> {
    if lambda < T::zero() || !lambda.is_finite_value() {
        return Err(CoxError::InvalidArgument("lambda must be finite and non-negative".into()));
    }
    let mut beta = warm_start.cloned().unwrap_or_else(|| DVector::zeros(problem.p()));
    coordinate_descent(
        &problem.gram,
        &problem.xty,
        &problem.weights,
        lambda,
        &mut beta,
        rel_tol(config.tol),
        config.max_sweeps,
    )?;
    Ok(beta)
}

/// Descending log-spaced grid from `lambda_max` to `lambda_max * min_ratio`.
pub fn lambda_grid<T: Real>(lambda_max: T, n_lambda: usize, min_ratio: f64) -> Vec<T> {
    if n_lambda == 1 {
        return vec![lambda_max];
    }
    let log_ratio = T::lit(min_ratio.ln());
    (0..n_lambda)
        .map(|i| lambda_max * (log_ratio * T::count(i) / T::count(n_lambda - 1)).exp())
        .collect()
}

/// Coefficients along a lambda path with their BIC values.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult<T: Real> {
    /// Descending.
    pub lambdas: Vec<T>,
    pub betas: Vec<DVector<T>>,
    pub dfs: Vec<usize>,
    pub bics: Vec<T>,
    pub selected_index: usize,
}

impl<T: Real> PathResult<T> {
    pub fn selected_beta(&self) -> &DVector<T> {
        &self.betas[self.selected_index]
    }

    pub fn selected_lambda(&self) -> T {
        self.lambdas[self.selected_index]
    }
}

/// Warm-started coordinate descent over the lambda grid.
pub fn solve_lsa_path<T: Real>(
    problem: &LsaProblem<T>,
    config: &PathConfig,
) -> Result<(Vec<T>, Vec<DVector<T>>)> {
    if config.n_lambda == 0 || !(config.lambda_min_ratio > 0.0 && config.lambda_min_ratio < 1.0) {
        return Err(CoxError::InvalidArgument(
            "path needs n_lambda >= 1 and lambda_min_ratio in (0, 1)".into(),
        ));
    }
    let lambdas = lambda_grid(problem.lambda_max(), config.n_lambda, config.lambda_min_ratio);
    let mut betas = Vec::with_capacity(lambdas.len());
    let mut beta = DVector::zeros(problem.p());
    for &lambda in &lambdas {
        beta = solve_weighted_lasso(problem, lambda, config, Some(&beta))?;
        betas.push(beta.clone());
    }
    Ok((lambdas, betas))
}

/// Scores each path point by BIC and picks the minimum, ties going to the
/// larger lambda.
pub fn select_by_bic<T: Real>(
    problem: &LsaProblem<T>,
    lambdas: Vec<T>,
    betas: Vec<DVector<T>>,
) -> PathResult<T> {
    let dfs: Vec<usize> = betas.iter().map(|b| b.iter().filter(|&&x| x != T::zero()).count()).collect();
    let bics: Vec<T> = betas.iter().map(|b| problem.bic_vl(b)).collect();
    let selected_index = argmin_first(&bics);
    PathResult { lambdas, betas, dfs, bics, selected_index }
}

pub(crate) fn argmin_first<T: Real>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

pub fn fit_lsa_path<T: Real>(problem: &LsaProblem<T>, config: &PathConfig) -> Result<PathResult<T>> {
    let (lambdas, betas) = solve_lsa_path(problem, config)?;
    Ok(select_by_bic(problem, lambdas, betas))
}
