//! Conservative shifts, their Bernstein certificates and risk curves.

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

use super::model::{Dataset, RegressionSurrogate};

/// Default Bernstein constant, the worst case of its admissible range.
pub const DEFAULT_C: f64 = 6.0;

/// Q² predictivity `1 - Σ(y - ŷ)² / Σ(y - ȳ)²`.
pub fn q2<T: Scalar>(y: &[T], y_hat: &[T]) -> Result<T> {
    if y.len() != y_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: y_hat.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::ZeroVariance);
    }
    let n = T::lit(y.len() as f64);
    let mean = y.iter().copied().sum::<T>() / n;
    let ss_tot: T = y.iter().map(|&v| (v - mean) * (v - mean)).sum();
    // spreads at the level of the rounding error of the mean count as zero
    let scale = y.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let floor = n * (n * T::epsilon() * scale).powi(2);
    if ss_tot <= floor {
        return Err(Error::ZeroVariance);
    }
    let ss_res: T = y.iter().zip(y_hat).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok(T::one() - ss_res / ss_tot)
}

/// Q² of `model` on a validation set.
pub fn model_q2(model: &RegressionSurrogate, validation: &Dataset) -> Result<f64> {
    q2(&validation.y, &model.predict_all(&validation.x))
}

/// `B(n, α) = (C/n) log(n/α)`.
pub fn bernstein_bound<T: Scalar>(n: u64, alpha: T, c: T) -> Result<T> {
    if n < 2 {
        return Err(invalid(format!("Bernstein bound needs n >= 2, got {n}")));
    }
    if !(alpha > T::zero()) || !(c > T::zero()) {
        return Err(invalid("Bernstein bound needs alpha > 0 and C > 0"));
    }
    let n = T::lit(n as f64);
    Ok(c / n * (n / alpha).ln())
}

/// `λ(n, p) = min(1, n exp(-np/C))`.
pub fn lambda_risk<T: Scalar>(n: u64, p: T, c: T) -> Result<T> {
    if n < 1 {
        return Err(invalid("lambda needs n >= 1"));
    }
    if !(p > T::zero() && p < T::one()) || !(c > T::zero()) {
        return Err(invalid("lambda needs p in (0, 1) and C > 0"));
    }
    let n = T::lit(n as f64);
    Ok((n * (-n * p / c).exp()).min(T::one()))
}

/// The real `n` beyond the mode `C/p` where `n exp(-np/C) = p`.
pub fn lambda_crossing(p: f64, c: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) || !(c > 0.0) {
        return Err(invalid("lambda crossing needs p in (0, 1) and C > 0"));
    }
    // h is strictly decreasing on [C/p, ∞)
    let h = |n: f64| n.ln() - n * p / c - p.ln();
    let mut lo = c / p;
    if h(lo) <= 0.0 {
        return Ok(lo);
    }
    let mut hi = 2.0 * lo;
    while h(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaPoint {
    pub p: f64,
    pub n: u64,
    pub lambda: f64,
}

/// `λ(n, p)` on the grid `p_list × n_grid`.
pub fn lambda_curve(p_list: &[f64], n_grid: &[u64], c: f64) -> Result<Vec<LambdaPoint>> {
    let mut out = Vec::with_capacity(p_list.len() * n_grid.len());
    for &p in p_list {
        for &n in n_grid {
            out.push(LambdaPoint {
                p,
                n,
                lambda: lambda_risk(n, p, c)?,
            });
        }
    }
    Ok(out)
}

/// Log-spaced integer grid from `lo` to `hi`.
pub fn log_grid(lo: u64, hi: u64, points: usize) -> Vec<u64> {
    let (a, b) = ((lo.max(1) as f64).ln(), (hi.max(lo.max(1)) as f64).ln());
    let mut v: Vec<u64> = (0..points.max(2))
        .map(|i| (a + (b - a) * i as f64 / (points.max(2) - 1) as f64).exp().round() as u64)
        .collect();
    v.dedup();
    v
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Certificate {
    pub n_test: u64,
    pub alpha: f64,
    pub c: f64,
    pub bernstein_bound: f64,
}

/// A surrogate moved down by `theta <= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedSurrogate {
    pub base: RegressionSurrogate,
    pub theta: f64,
    pub certificate: Option<Certificate>,
}

impl ShiftedSurrogate {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.base.predict(x) + self.theta
    }
}

/// `θ* = min(0, -max(ĝ(xᵢ) - g(xᵢ)))`, the smallest downward shift making
/// the surrogate under-predict every test point.
pub fn shift_from_residuals(residuals: &[f64]) -> f64 {
    let worst = residuals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if worst.is_finite() {
        (-worst).min(0.0)
    } else {
        0.0
    }
}

/// The shift of [`shift_from_residuals`], lowered by a few ulps where
/// rounding would otherwise leave some `pred + θ` above its target.
pub fn shift_below(preds: &[f64], targets: &[f64]) -> f64 {
    let residuals: Vec<f64> = preds.iter().zip(targets).map(|(p, g)| p - g).collect();
    let mut theta = shift_from_residuals(&residuals);
    while preds.iter().zip(targets).any(|(p, g)| p + theta > *g) {
        theta = theta.next_down();
    }
    theta
}

/// Shift `model` so that it lies below `g` on the test set, with the
/// Bernstein certificate at level `alpha` and constant `c`.
pub fn conservative_shift(
    model: &RegressionSurrogate,
    test: &Dataset,
    alpha: f64,
    c: f64,
) -> Result<ShiftedSurrogate> {
    let n = test.len() as u64;
    if n < 2 {
        return Err(invalid(format!("conservative shift needs at least 2 test points, got {n}")));
    }
    let preds = model.predict_all(&test.x);
    let theta = shift_below(&preds, &test.y);
    Ok(ShiftedSurrogate {
        base: model.clone(),
        theta,
        certificate: Some(Certificate {
            n_test: n,
            alpha,
            c,
            bernstein_bound: bernstein_bound(n, alpha, c)?,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q2_hand_values() {
        assert_eq!(q2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(q2(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert!((q2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap() - 0.5f64).abs() < 1e-15);
        assert_eq!(q2(&[2.0, 2.0], &[1.0, 3.0]), Err(Error::ZeroVariance));
        assert!((q2(&[1.0f32, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn shift_examples() {
        assert_eq!(shift_from_residuals(&[-0.2, 0.1, 0.3]), -0.3);
        assert_eq!(shift_from_residuals(&[-0.2, -0.1]), 0.0);
    }

    #[test]
    fn bernstein_values() {
        assert_eq!(bernstein_bound(20, 20.0, 6.0).unwrap(), 0.0);
        let b = bernstein_bound(1000, 0.05f64, 6.0).unwrap();
        assert!((b - 0.006 * 20000f64.ln()).abs() < 1e-15);
        assert!(bernstein_bound(1, 0.1f64, 6.0).is_err());
    }

    #[test]
    fn lambda_values() {
        let l = lambda_risk(1, 0.1f64, 6.0).unwrap();
        assert!((l - (-0.1f64 / 6.0).exp()).abs() < 1e-15 && l < 1.0);
        assert_eq!(lambda_risk(10, 0.1f64, 6.0).unwrap(), 1.0);
        let n = lambda_crossing(0.01, 6.0).unwrap();
        assert!((7800.0..=8700.0).contains(&n), "{n}");
    }
}
