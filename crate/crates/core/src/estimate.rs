//! Black-box harness, Monte Carlo estimators and probability-bound algebra.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::scalar::Scalar;

type Evaluator<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// A deterministic map `[0,1]^d -> R` with a failure threshold and an exact
/// query counter.
///
/// Failure is the strict event `g(x) < y`; ties count as safe.
pub struct BlackBoxFunction<T: Scalar> {
    dimension: usize,
    threshold: T,
    evaluator: Evaluator<T>,
    queries: AtomicU64,
}

impl<T: Scalar> BlackBoxFunction<T> {
    pub fn new<F>(dimension: usize, threshold: T, evaluator: F) -> Self
    where
        F: Fn(&[T]) -> T + Send + Sync + 'static,
    {
        assert!(dimension > 0, "dimension must be positive");
        Self {
            dimension,
            threshold,
            evaluator: Arc::new(evaluator),
            queries: AtomicU64::new(0),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn threshold(&self) -> T {
        self.threshold
    }

    /// Evaluate `g(x)`, counting one query.
    pub fn eval(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.dimension);
        self.queries.fetch_add(1, Ordering::Relaxed);
        (self.evaluator)(x)
    }

    /// Evaluate and classify: `true` when `g(x) < y`.
    pub fn fails(&self, x: &[T]) -> bool {
        self.is_failure(self.eval(x))
    }

    #[inline]
    pub fn is_failure(&self, value: T) -> bool {
        value < self.threshold
    }

    /// Evaluate without touching the counter. Reserved for oracles in tests
    /// and reference computations that must not consume budget.
    pub fn eval_uncounted(&self, x: &[T]) -> T {
        (self.evaluator)(x)
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn reset_queries(&self) {
        self.queries.store(0, Ordering::Relaxed);
    }

    /// Same evaluator and threshold with an independent zeroed counter.
    pub fn fresh(&self) -> Self {
        Self {
            dimension: self.dimension,
            threshold: self.threshold,
            evaluator: Arc::clone(&self.evaluator),
            queries: AtomicU64::new(0),
        }
    }

    /// Same evaluator against a different threshold, zeroed counter.
    pub fn with_threshold(&self, threshold: T) -> Self {
        Self {
            threshold,
            ..self.fresh()
        }
    }
}

impl<T: Scalar> fmt::Debug for BlackBoxFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlackBoxFunction")
            .field("dimension", &self.dimension)
            .field("threshold", &self.threshold)
            .field("queries", &self.queries())
            .finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundKind<T> {
    /// Holds with certainty under the method's assumptions.
    Deterministic,
    /// Holds with probability at least `1 - alpha`.
    HighProbability { alpha: T },
}

impl<T: Scalar> BoundKind<T> {
    pub fn is_deterministic(&self) -> bool {
        matches!(self, BoundKind::Deterministic)
    }

    fn alpha(&self) -> T {
        match *self {
            BoundKind::Deterministic => T::zero(),
            BoundKind::HighProbability { alpha } => alpha,
        }
    }
}

/// Certified pair `lower <= p <= upper`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbabilityBounds<T> {
    pub lower: T,
    pub upper: T,
    pub kind: BoundKind<T>,
    pub queries_used: u64,
}

impl<T: Scalar> ProbabilityBounds<T> {
    pub fn new(lower: T, upper: T, kind: BoundKind<T>, queries_used: u64) -> Result<Self> {
        if !(lower >= T::zero() && upper <= T::one()) {
            return Err(Error::InvalidArgument(format!(
                "bounds [{lower}, {upper}] leave [0, 1]"
            )));
        }
        if lower > upper {
            return Err(Error::InconsistentBounds {
                lower: lower.to_f64_lossy(),
                upper: upper.to_f64_lossy(),
            });
        }
        if let BoundKind::HighProbability { alpha } = kind {
            if !(alpha > T::zero() && alpha < T::one()) {
                return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
            }
        }
        Ok(Self {
            lower,
            upper,
            kind,
            queries_used,
        })
    }

    /// Build from computed volumes, absorbing floating-point round-off.
    ///
    /// Values are clamped to `[0, 1]`; a crossing within `1e-12` is collapsed
    /// onto the midpoint. Larger crossings remain an error.
    pub fn from_computed(lower: T, upper: T, kind: BoundKind<T>, queries_used: u64) -> Result<Self> {
        let zero = T::zero();
        let one = T::one();
        let mut lower = lower.max(zero).min(one);
        let mut upper = upper.max(zero).min(one);
        if lower > upper && lower - upper <= T::lit(1e-12) {
            let mid = (lower + upper) / T::lit(2.0);
            lower = mid;
            upper = mid;
        }
        Self::new(lower, upper, kind, queries_used)
    }

    /// The vacuous bound `[0, 1]`.
    pub fn trivial() -> Self {
        Self {
            lower: T::zero(),
            upper: T::one(),
            kind: BoundKind::Deterministic,
            queries_used: 0,
        }
    }

    pub fn width(&self) -> T {
        self.upper - self.lower
    }

    pub fn contains(&self, p: T) -> bool {
        self.lower <= p && p <= self.upper
    }

    /// `(upper - lower) / p`.
    pub fn relative_precision(&self, p: T) -> T {
        self.width() / p
    }
}

/// Intersect two bounds on the same probability.
///
/// The result is deterministic only when both inputs are; otherwise the
/// failure probabilities add (union bound). Queries add.
pub fn intersect_bounds<T: Scalar>(
    a: &ProbabilityBounds<T>,
    b: &ProbabilityBounds<T>,
) -> Result<ProbabilityBounds<T>> {
    let lower = a.lower.max(b.lower);
    let upper = a.upper.min(b.upper);
    if lower > upper {
        return Err(Error::InconsistentBounds {
            lower: lower.to_f64_lossy(),
            upper: upper.to_f64_lossy(),
        });
    }
    let kind = if a.kind.is_deterministic() && b.kind.is_deterministic() {
        BoundKind::Deterministic
    } else {
        let alpha = (a.kind.alpha() + b.kind.alpha()).min(T::lit(1.0 - 1e-12));
        BoundKind::HighProbability { alpha }
    };
    Ok(ProbabilityBounds {
        lower,
        upper,
        kind,
        queries_used: a.queries_used + b.queries_used,
    })
}

/// Plain Monte Carlo estimate with its normal-approximation interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MCEstimate<T> {
    pub p_hat: T,
    pub n: u64,
    pub std_err: T,
    pub ci95: (T, T),
}

impl<T: Scalar> MCEstimate<T> {
    pub fn from_counts(failures: u64, n: u64) -> Self {
        assert!(n > 0, "sample size must be positive");
        let p_hat = T::lit(failures as f64 / n as f64);
        let std_err = (p_hat * (T::one() - p_hat) / T::lit(n as f64)).sqrt();
        let half = T::lit(1.96) * std_err;
        let ci95 = (
            (p_hat - half).max(T::zero()),
            (p_hat + half).min(T::one()),
        );
        Self {
            p_hat,
            n,
            std_err,
            ci95,
        }
    }

    pub fn covers(&self, p: T) -> bool {
        self.ci95.0 <= p && p <= self.ci95.1
    }
}

pub(crate) fn uniform_point<T: Scalar, R: Rng + ?Sized>(rng: &mut R, d: usize, out: &mut [T]) {
    debug_assert_eq!(out.len(), d);
    for v in out.iter_mut() {
        *v = T::lit(rng.random::<f64>());
    }
}

/// `(1/n) sum 1{g(X_i) < y}` with `X_i` iid uniform; counts `n` queries.
pub fn mc_estimate<T: Scalar>(
    f: &BlackBoxFunction<T>,
    n: u64,
    rng: &mut RandomStream,
) -> Result<MCEstimate<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    let d = f.dimension();
    let mut x = vec![T::zero(); d];
    let mut failures = 0u64;
    for _ in 0..n {
        uniform_point(rng, d, &mut x);
        if f.fails(&x) {
            failures += 1;
        }
    }
    Ok(MCEstimate::from_counts(failures, n))
}

/// Monte Carlo on a cheap predictor: `(1/n) sum 1{predictor(X_i) < y}`.
///
/// Consumes the random stream exactly like [`mc_estimate`], so with the same
/// stream and `predictor == g` both return the same estimate.
pub fn surrogate_mc_estimate<T, P>(
    predictor: P,
    dimension: usize,
    threshold: T,
    n: u64,
    rng: &mut RandomStream,
) -> Result<MCEstimate<T>>
where
    T: Scalar,
    P: Fn(&[T]) -> T,
{
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    let mut x = vec![T::zero(); dimension];
    let mut failures = 0u64;
    for _ in 0..n {
        uniform_point(rng, dimension, &mut x);
        if predictor(&x) < threshold {
            failures += 1;
        }
    }
    Ok(MCEstimate::from_counts(failures, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(lower: f64, upper: f64) -> ProbabilityBounds<f64> {
        ProbabilityBounds::new(lower, upper, BoundKind::Deterministic, 0).unwrap()
    }

    #[test]
    fn constant_function_never_fails() {
        let f = BlackBoxFunction::new(3, 0.0, |_: &[f64]| 1.0);
        let est = mc_estimate(&f, 100, &mut RandomStream::new(1, 0)).unwrap();
        assert_eq!(est.p_hat, 0.0);
        assert_eq!(est.std_err, 0.0);
        assert_eq!(f.queries(), 100);
    }

    #[test]
    fn first_coordinate_below_threshold() {
        let f = BlackBoxFunction::new(2, 0.3, |x: &[f64]| x[0]);
        let est = mc_estimate(&f, 100_000, &mut RandomStream::new(2, 0)).unwrap();
        assert!((est.p_hat - 0.3).abs() <= 3.0 * est.std_err, "{est:?}");
        let expected_se = (est.p_hat * (1.0 - est.p_hat) / 1e5).sqrt();
        assert!((est.std_err - expected_se).abs() < 1e-15);
    }

    #[test]
    fn single_precision_estimator() {
        let f = BlackBoxFunction::new(1, 0.25f32, |x: &[f32]| x[0]);
        let est = mc_estimate(&f, 20_000, &mut RandomStream::new(5, 0)).unwrap();
        assert!((est.p_hat - 0.25).abs() <= 4.0 * est.std_err);
    }

    #[test]
    fn identity_surrogate_matches_true_estimator() {
        let f = BlackBoxFunction::new(2, 0.3, |x: &[f64]| x[0] * x[1] + 0.1);
        let a = mc_estimate(&f, 5_000, &mut RandomStream::new(9, 4)).unwrap();
        let b = surrogate_mc_estimate(
            |x: &[f64]| x[0] * x[1] + 0.1,
            2,
            0.3,
            5_000,
            &mut RandomStream::new(9, 4),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negative_shift_raises_estimate() {
        let g = |x: &[f64]| x[0] + x[1];
        let base = surrogate_mc_estimate(g, 2, 0.6, 10_000, &mut RandomStream::new(3, 0)).unwrap();
        let shifted =
            surrogate_mc_estimate(|x: &[f64]| g(x) - 0.05, 2, 0.6, 10_000, &mut RandomStream::new(3, 0))
                .unwrap();
        assert!(shifted.p_hat >= base.p_hat);
    }

    #[test]
    fn shifted_linear_predictor() {
        let est = surrogate_mc_estimate(
            |x: &[f64]| x[0] - 0.3 - 0.1,
            2,
            0.0,
            100_000,
            &mut RandomStream::new(4, 0),
        )
        .unwrap();
        assert!((est.p_hat - 0.4).abs() <= 3.0 * est.std_err);
    }

    #[test]
    fn surrogate_does_not_touch_true_counter() {
        let f = BlackBoxFunction::new(1, 0.5, |x: &[f64]| x[0]);
        let mut rng = RandomStream::new(0, 0);
        mc_estimate(&f, 37, &mut rng).unwrap();
        surrogate_mc_estimate(|x: &[f64]| x[0], 1, 0.5, 1000, &mut rng).unwrap();
        assert_eq!(f.queries(), 37);
    }

    #[test]
    fn ci_is_clamped() {
        let est = MCEstimate::<f64>::from_counts(1, 10);
        assert_eq!(est.ci95.0, 0.0);
        let est = MCEstimate::<f64>::from_counts(10, 10);
        assert_eq!(est.ci95, (1.0, 1.0));
    }

    #[test]
    fn intersect_examples() {
        let r = intersect_bounds(&det(0.0, 0.5), &det(0.1, 1.0)).unwrap();
        assert_eq!((r.lower, r.upper), (0.1, 0.5));
        let r = intersect_bounds(&det(0.0, 1.0), &det(0.2, 0.3)).unwrap();
        assert_eq!((r.lower, r.upper), (0.2, 0.3));
        assert!(r.kind.is_deterministic());
        assert!(matches!(
            intersect_bounds(&det(0.0, 0.1), &det(0.2, 1.0)),
            Err(Error::InconsistentBounds { .. })
        ));
    }

    #[test]
    fn intersect_downgrades_kind() {
        let hp = ProbabilityBounds::new(0.1, 0.4, BoundKind::HighProbability { alpha: 0.05 }, 3).unwrap();
        let r = intersect_bounds(&det(0.0, 0.5), &hp).unwrap();
        assert_eq!(r.kind, BoundKind::HighProbability { alpha: 0.05 });
        assert_eq!(r.queries_used, 3);
    }

    #[test]
    fn bound_construction_rejects_bad_pairs() {
        assert!(ProbabilityBounds::new(0.5, 0.4, BoundKind::Deterministic, 0).is_err());
        assert!(ProbabilityBounds::new(-0.1, 0.4, BoundKind::Deterministic, 0).is_err());
        assert!(ProbabilityBounds::new(0.1, 0.4, BoundKind::HighProbability { alpha: 1.5 }, 0).is_err());
        let b = ProbabilityBounds::from_computed(0.2 + 1e-14, 0.2, BoundKind::Deterministic, 0).unwrap();
        assert!(b.lower <= b.upper);
    }
}
