//! Moment-ratio experiments on the extremal families.
//!
//! Numerator and denominator of every ratio are computed from the same
//! per-sample draw (common random numbers).

use thiserror::Error;

use super::{draw_samples, Estimate, EstimateError, EstimatorMethod, RatioEstimate};
use crate::constructions::{
    ceil_to_grid, ln_gtilde, sample_full_extremal_with, ConstructionError, ExtremalParams,
    Proposal, TailMode,
};
use crate::paths::Side;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

/// Observes the `z` used for each side of each sample.
pub trait DrawRecorder: Sync {
    fn record(&self, index: usize, side: Side, z: f64);
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    Full,
    Monotone,
    Discrete(u32),
}

fn run(
    params: &ExtremalParams,
    family: Family,
    n_samples: usize,
    method: EstimatorMethod,
    proposal: Proposal,
    recorder: Option<&dyn DrawRecorder>,
) -> Result<RatioEstimate, ExperimentError> {
    params.validate()?;
    method.validate()?;
    let p = params.p;
    let n = params.n as f64;
    let draws = draw_samples(n_samples, params.seed, |i, rng| {
        let w = sample_full_extremal_with(params, TailMode::ExactLaw, proposal, rng)
            .expect("params validated");
        let r = w.value;
        let ln_x = match family {
            Family::Full | Family::Discrete(_) => r.ln_sup_x_full(),
            Family::Monotone => r.ln_x_tilde_n(),
        };
        let ln_g = match family {
            Family::Full | Family::Monotone => r.ln_sup_g(),
            Family::Discrete(level) => ln_gtilde(p, ceil_to_grid(r.z, level).min(n)),
        };
        if let Some(rec) = recorder {
            rec.record(i, Side::X, r.z);
            rec.record(i, Side::G, r.z);
        }
        ((w.ln_weight + p * ln_x).exp(), (w.ln_weight + p * ln_g).exp())
    });
    let (num, den): (Vec<f64>, Vec<f64>) = draws.into_iter().unzip();
    let numerator = Estimate::from_values(&num, method)?.with_seed(params.seed);
    let denominator = Estimate::from_values(&den, method)?.with_seed(params.seed);
    Ok(RatioEstimate::new(numerator, denominator)?)
}

/// `E[(sup X^(n))^p] / E[(sup G^(n))^p]` with the exact Brownian-tail law.
pub fn ratio_experiment(
    params: &ExtremalParams,
    n_samples: usize,
    method: EstimatorMethod,
    proposal: Proposal,
) -> Result<RatioEstimate, ExperimentError> {
    run(params, Family::Full, n_samples, method, proposal, None)
}

pub fn ratio_experiment_recorded(
    params: &ExtremalParams,
    n_samples: usize,
    method: EstimatorMethod,
    proposal: Proposal,
    recorder: &dyn DrawRecorder,
) -> Result<RatioEstimate, ExperimentError> {
    run(params, Family::Full, n_samples, method, proposal, Some(recorder))
}

/// `E[(X~_n)^p] / E[(G~_n)^p]` for the pair without Brownian tail.
pub fn monotone_ratio_experiment(
    p: f64,
    n: u32,
    n_samples: usize,
    method: EstimatorMethod,
    seed: u64,
    proposal: Proposal,
) -> Result<RatioEstimate, ExperimentError> {
    let params = ExtremalParams::new(p, n, seed)?;
    run(&params, Family::Monotone, n_samples, method, proposal, None)
}

/// Ratio for the discretized pair at dyadic level `level`. Uses the same
/// draws as [`ratio_experiment`] for equal params and seed.
pub fn discrete_ratio_experiment(
    params: &ExtremalParams,
    level: u32,
    n_samples: usize,
    method: EstimatorMethod,
    proposal: Proposal,
) -> Result<RatioEstimate, ExperimentError> {
    run(params, Family::Discrete(level), n_samples, method, proposal, None)
}
