//! Regression surrogates made conservative, either by an additive shift
//! certified on a held-out test set or by fitting under a stochastic
//! dominance constraint.

mod certify;
mod fsd;
mod io;
mod model;

pub use certify::{
    bernstein_bound, conservative_shift, lambda_crossing, lambda_curve, lambda_risk, log_grid,
    model_q2, q2, shift_below, shift_from_residuals, Certificate, LambdaPoint, ShiftedSurrogate, DEFAULT_C,
};
pub use fsd::{
    check_fsd, fsd_fit, fsd_violations, Direction, FSDFitResult, RelaxationConfig, RelaxationStep,
};
pub use io::{load_model, save_model};
pub use model::{
    fit, fit_weighted, monomial_exponents, Dataset, RegressionSurrogate, SurrogateFamily,
    TrainOptions,
};

use crate::error::Result;
use crate::estimate::surrogate_mc_estimate;
use crate::rng::RandomStream;

/// One end-to-end shift replication: train, validate, shift, estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftConfig {
    pub family: SurrogateFamily,
    /// Training points per input dimension.
    pub train_per_dim: usize,
    pub n_test: usize,
    pub n_validation: usize,
    /// Networks below this validation Q² are refit from a new initialization.
    pub q2_min: f64,
    pub max_refits: usize,
    pub alpha: f64,
    pub c: f64,
    /// Surrogate Monte Carlo sample size for `p̂`.
    pub mc_samples: u64,
    pub train: TrainOptions,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        Self {
            family: SurrogateFamily::SmallFeedforward { hidden: vec![4, 4] },
            train_per_dim: 50,
            n_test: 5,
            n_validation: 200,
            q2_min: 0.9,
            max_refits: 4,
            alpha: 0.05,
            c: DEFAULT_C,
            mc_samples: 20_000,
            train: TrainOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShiftReplication {
    pub model: ShiftedSurrogate,
    /// Validation Q² of the unshifted and shifted surrogate.
    pub q2_unshifted: f64,
    pub q2_shifted: f64,
    /// `P(ĝ(X) + θ < y)` by surrogate Monte Carlo.
    pub p_hat: f64,
    pub refits: usize,
    /// True-function evaluations spent on training, test and validation.
    pub queries: u64,
}

/// Train on `train_per_dim · d` uniform points, refit while the validation
/// Q² is below `q2_min`, shift on a fresh test set and estimate `p̂`.
pub fn shift_replication<G: Fn(&[f64]) -> f64>(
    g: G,
    d: usize,
    threshold: f64,
    config: &ShiftConfig,
    rng: &mut RandomStream,
) -> Result<ShiftReplication> {
    let train = Dataset::sample(d, config.train_per_dim * d, &g, rng);
    let validation = Dataset::sample(d, config.n_validation, &g, rng);
    let weights = vec![1.0 / train.len() as f64; train.len()];
    let mut refits = 0;
    let mut best: Option<(RegressionSurrogate, f64)> = None;
    loop {
        let model = fit_weighted(&config.family, &train, &weights, &config.train, rng)?;
        let score = model_q2(&model, &validation)?;
        if best.as_ref().is_none_or(|(_, s)| score > *s) {
            best = Some((model, score));
        }
        if score >= config.q2_min || refits >= config.max_refits {
            break;
        }
        refits += 1;
    }
    let (model, q2_unshifted) = best.expect("at least one fit");
    let test = Dataset::sample(d, config.n_test, &g, rng);
    let shifted = conservative_shift(&model, &test, config.alpha, config.c)?;
    let shifted_preds: Vec<f64> = validation.x.iter().map(|x| shifted.predict(x)).collect();
    let q2_shifted = q2(&validation.y, &shifted_preds)?;
    let est = surrogate_mc_estimate(|x: &[f64]| shifted.predict(x), d, threshold, config.mc_samples, rng)?;
    Ok(ShiftReplication {
        model: shifted,
        q2_unshifted,
        q2_shifted,
        p_hat: est.p_hat,
        refits,
        queries: (train.len() + validation.len() + test.len()) as u64,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FsdReplication {
    pub fit: FSDFitResult,
    pub p_hat: f64,
    pub queries: u64,
}

/// Fit under the dominance constraint on `m` uniform equally weighted
/// points and estimate `p̂ = P(g_η(X) + θ < y)` by surrogate Monte Carlo.
#[allow(clippy::too_many_arguments)]
pub fn fsd_replication<G: Fn(&[f64]) -> f64>(
    g: G,
    d: usize,
    threshold: f64,
    m: usize,
    family: &SurrogateFamily,
    relaxation: &RelaxationConfig,
    mc_samples: u64,
    rng: &mut RandomStream,
) -> Result<FsdReplication> {
    let train = Dataset::sample(d, m, &g, rng);
    let weights = vec![1.0 / m as f64; m];
    let fit = fsd_fit(family, &train, &weights, Direction::ConservativeLow, relaxation, rng)?;
    let est = surrogate_mc_estimate(|x: &[f64]| fit.predict(x), d, threshold, mc_samples, rng)?;
    Ok(FsdReplication {
        fit,
        p_hat: est.p_hat,
        queries: m as u64,
    })
}
