//! Divide-and-conquer adaptive LASSO for Cox proportional hazards models.
//!
//! The full sample is split into `K` subject-level shards. A one-step
//! linearization pools shard scores and information matrices into an estimate of
//! the full-sample MPLE, and a least-squares approximation of the partial
//! likelihood turns variable selection into a weighted LASSO that never touches
//! the raw data again. Tuning uses a BIC computed from the same quadratic form.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar for the common case.

pub mod bench;
pub mod dac;
pub mod data;
pub mod error;
pub mod full_penalized;
pub mod inference;
mod linalg;
pub mod lsa;
pub mod mple;
pub mod partial_likelihood;
pub mod report;
pub mod scalar;
pub mod simgen;

pub use dac::{dac_onestep_round, fit_dac_unpenalized, pooled_derivatives, with_threads, ShardedData};
pub use data::{
    make_shard_plan, read_csv, read_csv_path, validate_dataset, write_csv, write_csv_path, ShardPlan,
    SurvivalDataset, SurvivalRecord,
};
pub use error::{CoxError, Result};
pub use full_penalized::{bic_v, fit_full_penalized_pl, PenalizedPlFit};
pub use inference::{
    confidence_intervals, fit_dac, fit_full_adaptive_lasso_oracle, normal_quantile, oracle_se, DacFitResult,
    Estimator, FitConfig, StageTimings,
};
pub use lsa::{fit_lsa_path, lambda_grid, select_by_bic, solve_lsa_path, solve_weighted_lasso, LsaProblem, PathConfig, PathResult};
pub use mple::{fit_mple, MpleFit, NewtonConfig};
pub use partial_likelihood::{linear_predictors, pl_derivatives, DerivativeOrder, PlDerivatives};
pub use scalar::Real;
pub use simgen::{gen_time_dependent, gen_time_independent, true_beta, Scenario, ScenarioConfig, TrueBeta};

pub type Record = SurvivalRecord<f64>;
pub type Dataset = SurvivalDataset<f64>;
pub type Derivatives = PlDerivatives<f64>;
pub type FitResult = DacFitResult<f64>;
pub type Path = PathResult<f64>;

pub type Record32 = SurvivalRecord<f32>;
pub type Dataset32 = SurvivalDataset<f32>;
pub type FitResult32 = DacFitResult<f32>;
