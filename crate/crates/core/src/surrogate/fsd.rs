//! First-order stochastic dominance constrained fitting.
//!
//! Feasibility is always judged with exact indicators on weighted empirical
//! CDFs; the logistic relaxation only steers the parameters.

use crate::error::{invalid, Error, Result};
use crate::rng::RandomStream;
use crate::scalar::Scalar;

use super::model::{fit_weighted, Adam, Dataset, RegressionSurrogate, SurrogateFamily, TrainOptions};

/// Which way the shifted surrogate must dominate the data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Direction {
    /// Surrogate stochastically smaller: `F_pred(t) >= F_y(t)` for all `t`,
    /// so `P(pred < y0) >= P(g < y0)` overstates failure.
    #[default]
    ConservativeLow,
    /// Surrogate stochastically larger: `F_pred(t) <= F_y(t)` for all `t`.
    ConservativeHigh,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Self::ConservativeLow => 1.0,
            Self::ConservativeHigh => -1.0,
        }
    }
}

fn sorted_weighted<T: Scalar>(v: &[T], w: &[T]) -> Vec<(T, T)> {
    let mut s: Vec<(T, T)> = v.iter().copied().zip(w.iter().copied()).collect();
    s.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite sample values"));
    s
}

/// Largest signed dominance violation over the anchors `A ∪ B`.
///
/// Under `ConservativeLow` `A` must be stochastically smaller than `B`, so the
/// violation at `t` is `F_B(t) - F_A(t)`; `<= 0` means dominance holds.
pub fn check_fsd<T: Scalar>(a: &[T], b: &[T], weights: &[T], direction: Direction) -> Result<T> {
    if a.len() != weights.len() || b.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            found: if a.len() != weights.len() { a.len() } else { b.len() },
        });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(invalid("dominance check needs finite samples"));
    }
    let sa = sorted_weighted(a, weights);
    let sb = sorted_weighted(b, weights);
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (T::zero(), T::zero());
    let mut worst = T::neg_infinity();
    while i < sa.len() || j < sb.len() {
        let t = match (sa.get(i), sb.get(j)) {
            (Some(x), Some(y)) => x.0.min(y.0),
            (Some(x), None) => x.0,
            (None, Some(y)) => y.0,
            (None, None) => unreachable!(),
        };
        while i < sa.len() && sa[i].0 <= t {
            fa += sa[i].1;
            i += 1;
        }
        while j < sb.len() && sb[j].0 <= t {
            fb += sb[j].1;
            j += 1;
        }
        let v = match direction {
            Direction::ConservativeLow => fb - fa,
            Direction::ConservativeHigh => fa - fb,
        };
        worst = worst.max(v);
    }
    Ok(if worst.is_finite() { worst } else { T::zero() })
}

/// Signed violation `F_B(t) - F_A(t)` (or its mirror) at each anchor.
pub fn fsd_violations(a: &[f64], b: &[f64], weights: &[f64], direction: Direction, anchors: &[f64]) -> Vec<f64> {
    let cdf = |v: &[f64], t: f64| -> f64 {
        v.iter().zip(weights).filter(|(x, _)| **x <= t).map(|(_, w)| w).sum()
    };
    anchors
        .iter()
        .map(|&t| match direction {
            Direction::ConservativeLow => cdf(b, t) - cdf(a, t),
            Direction::ConservativeHigh => cdf(a, t) - cdf(b, t),
        })
        .collect()
}

/// Exact feasibility of shifts, in the space where the requested direction
/// reads as `ConservativeLow`.
struct ShiftOracle {
    preds: Vec<(f64, f64)>,
    ys: Vec<(f64, f64)>,
}

impl ShiftOracle {
    fn new(preds: &[f64], y: &[f64], w: &[f64], sign: f64) -> Self {
        let p: Vec<f64> = preds.iter().map(|v| sign * v).collect();
        let q: Vec<f64> = y.iter().map(|v| sign * v).collect();
        Self {
            preds: sorted_weighted(&p, w),
            ys: sorted_weighted(&q, w),
        }
    }

    /// `F_{pred+θ}(t) >= F_y(t)` at every jump of `F_y`.
    fn feasible(&self, theta: f64) -> bool {
        let tol = 1e-12;
        let mut i = 0;
        let mut fp = 0.0;
        let mut fy = 0.0;
        let mut j = 0;
        while j < self.ys.len() {
            let t = self.ys[j].0;
            while j < self.ys.len() && self.ys[j].0 <= t {
                fy += self.ys[j].1;
                j += 1;
            }
            while i < self.preds.len() && self.preds[i].0 + theta <= t {
                fp += self.preds[i].1;
                i += 1;
            }
            if fy > fp + tol {
                return false;
            }
        }
        true
    }

    /// Largest feasible shift (attained at some `y_k - pred_i`).
    fn max_feasible(&self) -> f64 {
        let mut cands: Vec<f64> = Vec::with_capacity(self.preds.len() * self.ys.len());
        for &(y, _) in &self.ys {
            for &(p, _) in &self.preds {
                cands.push(y - p);
            }
        }
        cands.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        cands.dedup();
        // feasibility is monotone: true up to the answer, false after
        let (mut lo, mut hi) = (0usize, cands.len());
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.feasible(cands[mid]) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        cands[lo]
    }
}

/// Relaxation and repair settings.
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxationConfig {
    /// Smoothing temperatures in units of the weighted std of `y`.
    pub taus: Vec<f64>,
    pub initial_penalty: f64,
    pub max_doublings: usize,
    pub inner_iterations: usize,
    pub learning_rate: f64,
    /// Smoothed violation accepted at each temperature.
    pub tolerance: f64,
    /// Coordinate pattern-search sweeps on the exact profile objective.
    pub polish_sweeps: usize,
    pub train: TrainOptions,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        Self {
            taus: vec![0.1, 0.03, 0.01],
            initial_penalty: 1.0,
            max_doublings: 12,
            inner_iterations: 300,
            learning_rate: 0.01,
            tolerance: 1e-3,
            polish_sweeps: 30,
            train: TrainOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaxationStep {
    pub tau: f64,
    pub penalty: f64,
    pub objective: f64,
    pub smoothed_violation: f64,
    pub exact_violation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FSDFitResult {
    /// Surrogate with `η*`.
    pub model: RegressionSurrogate,
    pub theta: f64,
    /// `Σ ωᵢ (yᵢ - g_η(xᵢ) - θ)²`.
    pub objective: f64,
    /// Exact signed violation at each anchor `g_η(xⱼ) + θ`; all `<= 0`.
    pub constraint_violations: Vec<f64>,
    /// Exact violation over all anchors of both samples.
    pub max_violation: f64,
    pub trace: Vec<RelaxationStep>,
    /// The returned shift was set by the exact feasibility search because
    /// the relaxed solution still violated some anchor.
    pub repaired: bool,
    /// Every temperature met its smoothed tolerance.
    pub converged: bool,
}

impl FSDFitResult {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.model.predict(x) + self.theta
    }
}

fn objective(preds: &[f64], y: &[f64], w: &[f64], theta: f64) -> f64 {
    preds
        .iter()
        .zip(y)
        .zip(w)
        .map(|((p, yi), wi)| wi * (yi - p - theta).powi(2))
        .sum()
}

/// Best feasible shift for fixed predictions and its objective.
fn profile(preds: &[f64], y: &[f64], w: &[f64], sign: f64) -> (f64, f64) {
    let oracle = ShiftOracle::new(preds, y, w, sign);
    // in the mirrored space feasible shifts are (-∞, θmax]
    let theta_max = sign * oracle.max_feasible();
    let theta_ls: f64 = preds.iter().zip(y).zip(w).map(|((p, yi), wi)| wi * (yi - p)).sum();
    let theta = if sign > 0.0 {
        theta_ls.min(theta_max)
    } else {
        theta_ls.max(theta_max)
    };
    (theta, objective(preds, y, w, theta))
}

/// Smoothed violations `c_j` and `∂P/∂s_k` for `P = μ Σ max(0, c_j)²`, where
/// `s = sign · (pred + θ)` are the mirrored shifted predictions.
fn smoothed_penalty(s: &[f64], y: &[f64], w: &[f64], tau: f64, mu: f64) -> (f64, f64, Vec<f64>) {
    let m = s.len();
    let sig = |u: f64| 1.0 / (1.0 + (-u).exp());
    let mut grad = vec![0.0; m];
    let mut value = 0.0;
    let mut worst = f64::NEG_INFINITY;
    for j in 0..m {
        let mut fy = 0.0;
        let mut dfy = 0.0;
        for i in 0..m {
            let g = sig((s[j] - y[i]) / tau);
            fy += w[i] * g;
            dfy += w[i] * g * (1.0 - g) / tau;
        }
        let mut fp = 0.0;
        let mut dfp_j = 0.0;
        for i in 0..m {
            let g = sig((s[j] - s[i]) / tau);
            fp += w[i] * g;
            if i != j {
                dfp_j += w[i] * g * (1.0 - g) / tau;
            }
        }
        let c = fy - fp;
        worst = worst.max(c);
        if c > 0.0 {
            value += mu * c * c;
            let coef = 2.0 * mu * c;
            grad[j] += coef * (dfy - dfp_j);
            for i in 0..m {
                if i != j {
                    let g = sig((s[j] - s[i]) / tau);
                    grad[i] += coef * w[i] * g * (1.0 - g) / tau;
                }
            }
        }
    }
    (value, worst, grad)
}

/// Weighted least squares under a first-order stochastic dominance
/// constraint between `g_η(x) + θ` and `y`.
///
/// Starts from the unconstrained fit; if that is already dominant it is
/// returned with `θ = 0`. Otherwise a logistic relaxation with temperature
/// continuation and penalty doubling moves `(η, θ)`, after which `θ` is set
/// to the best exactly feasible shift and `η` is polished by a coordinate
/// pattern search on that exact profile. The least-squares fit with its own
/// best feasible shift is kept as a fallback candidate.
pub fn fsd_fit(
    family: &SurrogateFamily,
    data: &Dataset,
    weights: &[f64],
    direction: Direction,
    config: &RelaxationConfig,
    rng: &mut RandomStream,
) -> Result<FSDFitResult> {
    let m = data.len();
    if weights.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: weights.len(),
        });
    }
    if weights.iter().any(|&v| !(v >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(invalid("fsd weights must be non-negative and sum to 1"));
    }
    let sign = direction.sign();
    let y = &data.y;
    let mut model = fit_weighted(family, data, weights, &config.train, rng)?;
    let preds = model.predict_all(&data.x);
    let finish = |model: RegressionSurrogate, theta: f64, trace, repaired, converged| {
        let preds = model.predict_all(&data.x);
        let shifted: Vec<f64> = preds.iter().map(|p| p + theta).collect();
        let max_violation = check_fsd(&shifted, y, weights, direction)?;
        let constraint_violations = fsd_violations(&shifted, y, weights, direction, &shifted);
        Ok(FSDFitResult {
            objective: objective(&preds, y, weights, theta),
            model,
            theta,
            constraint_violations,
            max_violation,
            trace,
            repaired,
            converged,
        })
    };
    if check_fsd(&preds, y, weights, direction)? <= 0.0 {
        return finish(model, 0.0, Vec::new(), false, true);
    }

    let mean: f64 = weights.iter().zip(y).map(|(a, b)| a * b).sum();
    let sd = weights
        .iter()
        .zip(y)
        .map(|(a, b)| a * (b - mean).powi(2))
        .sum::<f64>()
        .sqrt()
        .max(1e-12);
    let ys: Vec<f64> = y.iter().map(|v| sign * v).collect();
    let n = model.params.len();
    let param_scale = match family {
        SurrogateFamily::PolynomialTotalDegree { .. } => sd,
        SurrogateFamily::SmallFeedforward { .. } => 1.0,
    };
    // θ starts at its exact profile value for the unconstrained fit
    let ls_model = model.clone();
    let (ls_theta, ls_objective) = profile(&preds, y, weights, sign);
    let mut theta = ls_theta;
    let mut trace = Vec::new();
    let mut converged = true;
    let mut grad = vec![0.0; n + 1];
    for &tau_rel in &config.taus {
        let tau = tau_rel * sd;
        let mut mu = config.initial_penalty;
        let mut met = false;
        for _ in 0..=config.max_doublings {
            let mut adam = Adam::new(n + 1, config.learning_rate);
            let mut packed: Vec<f64> = model.params.iter().map(|p| p / param_scale).collect();
            packed.push(theta / sd);
            let mut worst = f64::INFINITY;
            for _ in 0..config.inner_iterations {
                let preds = model.predict_all(&data.x);
                let s: Vec<f64> = preds.iter().map(|p| sign * (p + theta)).collect();
                let (_, w_now, dpen) = smoothed_penalty(&s, &ys, weights, tau, mu);
                worst = w_now;
                grad.iter_mut().for_each(|g| *g = 0.0);
                let mut dtheta = 0.0;
                for i in 0..m {
                    // objective normalized by the variance of y
                    let dobj = -2.0 * weights[i] * (y[i] - preds[i] - theta) / (sd * sd);
                    let up = dobj + sign * dpen[i];
                    dtheta += up;
                    model.accumulate_gradient(&data.x[i], up, &mut grad[..n]);
                }
                grad[..n].iter_mut().for_each(|g| *g *= param_scale);
                grad[n] = dtheta * sd;
                adam.step(&mut packed, &grad);
                for (p, q) in model.params.iter_mut().zip(&packed) {
                    *p = q * param_scale;
                }
                theta = packed[n] * sd;
            }
            let preds = model.predict_all(&data.x);
            let shifted: Vec<f64> = preds.iter().map(|p| p + theta).collect();
            trace.push(RelaxationStep {
                tau: tau_rel,
                penalty: mu,
                objective: objective(&preds, y, weights, theta),
                smoothed_violation: worst,
                exact_violation: check_fsd(&shifted, y, weights, direction)?,
            });
            if worst <= config.tolerance {
                met = true;
                break;
            }
            mu *= 2.0;
        }
        converged &= met;
    }

    let preds = model.predict_all(&data.x);
    let shifted: Vec<f64> = preds.iter().map(|p| p + theta).collect();
    let repaired = check_fsd(&shifted, y, weights, direction)? > 0.0;
    let (mut theta, mut best) = profile(&preds, y, weights, sign);
    polish(&mut model, data, weights, sign, config.polish_sweeps, &mut theta, &mut best);
    // the shifted least-squares fit is feasible too; keep whichever is better
    if ls_objective <= best {
        return finish(ls_model, ls_theta, trace, true, converged);
    }
    finish(model, theta, trace, repaired, converged)
}

/// Coordinate pattern search on `η ↦ min_θ feasible objective`.
fn polish(
    model: &mut RegressionSurrogate,
    data: &Dataset,
    w: &[f64],
    sign: f64,
    sweeps: usize,
    theta: &mut f64,
    best: &mut f64,
) {
    let n = model.params.len();
    let mut steps: Vec<f64> = model.params.iter().map(|p| 0.05 * p.abs().max(0.05)).collect();
    for _ in 0..sweeps {
        let mut improved = false;
        #[allow(clippy::needless_range_loop)]
        for k in 0..n {
            for dir in [1.0, -1.0] {
                let old = model.params[k];
                model.params[k] = old + dir * steps[k];
                let preds = model.predict_all(&data.x);
                let (t, obj) = profile(&preds, &data.y, w, sign);
                if obj < *best - 1e-15 {
                    *best = obj;
                    *theta = t;
                    improved = true;
                    steps[k] *= 1.5;
                    break;
                }
                model.params[k] = old;
            }
        }
        if !improved {
            steps.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_fsd_examples() {
        let b = [0.3, 1.2, -0.4, 2.0];
        let w = [0.25; 4];
        let lower: Vec<f64> = b.iter().map(|v| v - 1.0).collect();
        let upper: Vec<f64> = b.iter().map(|v| v + 1.0).collect();
        assert!(check_fsd(&lower, &b, &w, Direction::ConservativeLow).unwrap() <= 0.0);
        assert_eq!(check_fsd(&b, &b, &w, Direction::ConservativeLow).unwrap(), 0.0);
        assert!(check_fsd(&upper, &b, &w, Direction::ConservativeLow).unwrap() > 0.0);
        assert!(check_fsd(&upper, &b, &w, Direction::ConservativeHigh).unwrap() <= 0.0);
        assert!(fsd_violations(&b, &b, &w, Direction::ConservativeLow, &b).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn max_feasible_shift_equal_weights() {
        // equal weights: θmax = min over order statistics of y(k) - p(k)
        let p = [0.0, 1.0, 2.0];
        let y = [0.5, 0.7, 3.0];
        let w = [1.0 / 3.0; 3];
        let o = ShiftOracle::new(&p, &y, &w, 1.0);
        assert!((o.max_feasible() - (-0.3)).abs() < 1e-12);
    }

    #[test]
    fn inactive_constraints_return_least_squares() {
        let mut rng = RandomStream::new(3, 0);
        let data = Dataset::sample(2, 30, |x| 0.5 + x[0] - 2.0 * x[1], &mut rng);
        let w = vec![1.0 / 30.0; 30];
        let fam = SurrogateFamily::PolynomialTotalDegree { degree: 1 };
        let ls = fit_weighted(&fam, &data, &w, &TrainOptions::default(), &mut rng).unwrap();
        let r = fsd_fit(&fam, &data, &w, Direction::ConservativeLow, &RelaxationConfig::default(), &mut rng).unwrap();
        assert!(r.theta.abs() <= 1e-6, "theta {}", r.theta);
        assert_eq!(r.model.params, ls.params);
        assert!(r.max_violation <= 0.0);
    }

    #[test]
    fn both_directions_end_feasible() {
        let mut rng = RandomStream::new(5, 0);
        let data = Dataset::sample(1, 25, |x| (3.0 * x[0]).sin(), &mut rng);
        let w = vec![1.0 / 25.0; 25];
        let fam = SurrogateFamily::PolynomialTotalDegree { degree: 1 };
        for dir in [Direction::ConservativeLow, Direction::ConservativeHigh] {
            let r = fsd_fit(&fam, &data, &w, dir, &RelaxationConfig::default(), &mut rng).unwrap();
            assert!(r.max_violation <= 0.0, "{dir:?}");
            assert!(r.constraint_violations.iter().all(|v| *v <= 0.0));
            let s: Vec<f64> = data.x.iter().map(|x| r.predict(x)).collect();
            assert_eq!(check_fsd(&s, &data.y, &w, dir).unwrap(), r.max_violation);
        }
    }

    #[test]
    fn rejects_bad_weights() {
        let mut rng = RandomStream::new(1, 0);
        let data = Dataset::sample(1, 5, |x| x[0], &mut rng);
        let fam = SurrogateFamily::PolynomialTotalDegree { degree: 1 };
        let cfg = RelaxationConfig::default();
        assert!(fsd_fit(&fam, &data, &[0.2; 5], Direction::ConservativeLow, &cfg, &mut rng).is_ok());
        assert!(fsd_fit(&fam, &data, &[0.3; 5], Direction::ConservativeLow, &cfg, &mut rng).is_err());
        assert!(fsd_fit(&fam, &data, &[0.5, 0.5, 0.5, -0.5, 0.0], Direction::ConservativeLow, &cfg, &mut rng).is_err());
    }
}
