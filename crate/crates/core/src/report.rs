//! Serializable views of fit results.
//!
//! Reports are always written in `f64` regardless of the scalar the fit ran in.

use serde::{Deserialize, Serialize};

use crate::inference::{DacFitResult, StageTimings};
use crate::lsa::PathResult;
use crate::scalar::Real;

pub const FIT_SCHEMA_VERSION: u32 = 1;

fn to_f64<T: Real>(v: impl IntoIterator<Item = T>) -> Vec<f64> {
    v.into_iter().map(|x| x.as_f64()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub step_i: f64,
    pub step_ii_rounds: Vec<f64>,
    pub final_info: f64,
    pub step_iii: f64,
    pub tuning: f64,
    pub inference: f64,
    pub total: f64,
}

impl From<&StageTimings> for TimingReport {
    fn from(t: &StageTimings) -> Self {
        Self {
            step_i: t.step_i,
            step_ii_rounds: t.step_ii_rounds.clone(),
            final_info: t.final_info,
            step_iii: t.step_iii,
            tuning: t.tuning,
            inference: t.inference,
            total: t.total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub lambdas: Vec<f64>,
    pub dfs: Vec<usize>,
    pub bics: Vec<f64>,
    pub selected_index: usize,
}

impl<T: Real> From<&PathResult<T>> for PathReport {
    fn from(p: &PathResult<T>) -> Self {
        Self {
            lambdas: to_f64(p.lambdas.iter().copied()),
            dfs: p.dfs.clone(),
            bics: to_f64(p.bics.iter().copied()),
            selected_index: p.selected_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientInterval {
    pub index: usize,
    pub estimate: f64,
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub kind: String,
    pub estimator: String,
    pub n0: usize,
    pub d0: usize,
    pub p: usize,
    pub k_shards: usize,
    pub n_iter: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub seed: u64,
    pub beta_hat: Vec<f64>,
    pub active_set: Vec<usize>,
    pub beta_tilde: Vec<f64>,
    /// One entry per active coordinate.
    pub se: Vec<f64>,
    pub ci: Vec<CoefficientInterval>,
    pub lambda_selected: f64,
    pub path: PathReport,
    pub iterate_history: Vec<Vec<f64>>,
    pub timings: TimingReport,
}

impl FitReport {
    pub fn from_fit<T: Real>(fit: &DacFitResult<T>, gamma: f64, seed: u64) -> Self {
        let ci = fit
            .active_set
            .iter()
            .enumerate()
            .map(|(a, &j)| CoefficientInterval {
                index: j,
                estimate: fit.beta_hat[j].as_f64(),
                se: fit.se[a].as_f64(),
                lower: fit.ci_lower[a].as_f64(),
                upper: fit.ci_upper[a].as_f64(),
            })
            .collect();
        Self {
            schema_version: FIT_SCHEMA_VERSION,
            kind: "fit_result".into(),
            estimator: fit.estimator.tag().into(),
            n0: fit.n0,
            d0: fit.d0,
            p: fit.beta_hat.len(),
            k_shards: fit.k_shards,
            n_iter: fit.n_iter,
            gamma,
            alpha: fit.alpha,
            seed,
            beta_hat: to_f64(fit.beta_hat.iter().copied()),
            active_set: fit.active_set.clone(),
            beta_tilde: to_f64(fit.beta_tilde.iter().copied()),
            se: to_f64(fit.se.iter().copied()),
            ci,
            lambda_selected: fit.lambda_selected.as_f64(),
            path: PathReport::from(&fit.path),
            iterate_history: fit.iterate_history.iter().map(|b| to_f64(b.iter().copied())).collect(),
            timings: TimingReport::from(&fit.timings),
        }
    }
}

/// JSON Schema of [`FitReport`].
pub const FIT_RESULT_SCHEMA: &str = include_str!("../schemas/fit_result.schema.json");
/// JSON Schema of [`crate::simgen::ScenarioManifest`].
pub const SCENARIO_MANIFEST_SCHEMA: &str = include_str!("../schemas/scenario_manifest.schema.json");
/// JSON Schema of [`crate::bench::BenchReport`].
pub const BENCH_REPORT_SCHEMA: &str = include_str!("../schemas/bench_report.schema.json");
