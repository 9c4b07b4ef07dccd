//! Deterministic bounds for globally increasing functions.
//!
//! For increasing `g`, every point below a failing design point fails and
//! every point above a safe one is safe, so
//! `vol(U [0, fail]) <= p <= 1 - vol(U [safe, 1])`. The limit state lies in
//! the staircase region between the two unions; the sequential bounder keeps
//! drawing design points uniformly from that region.

pub mod cpwl;
pub mod design_io;
pub mod volume;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::estimate::{BlackBoxFunction, BoundKind, ProbabilityBounds};
use crate::mcmc::{SemiAdaptiveConfig, SemiAdaptiveSampler};
use crate::rng::RandomStream;
use crate::scalar::{ExactRing, Scalar};
use crate::trace::TracePoint;

pub use cpwl::{cpwl_monotone_regions, Box as CpwlBox, CPWLFunction, MonotonicityReport, Sign};
pub use volume::{
    lower_orthant_volume, lower_orthant_volume_auto, upper_orthant_volume, OrthantUnion,
    VolumeEstimate, MAX_EXACT_DIMENSION,
};

/// Pareto order: `u <= v` componentwise.
pub fn dominates<T: PartialOrd>(u: &[T], v: &[T]) -> Result<bool> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    Ok(u.iter().zip(v).all(|(a, b)| a <= b))
}

#[inline]
fn le<T: PartialOrd>(u: &[T], v: &[T]) -> bool {
    u.iter().zip(v).all(|(a, b)| a <= b)
}

/// No point is strictly dominated by another.
pub fn is_antichain<T: PartialOrd>(points: &[Vec<T>]) -> bool {
    for (i, u) in points.iter().enumerate() {
        for (j, v) in points.iter().enumerate() {
            if i != j && le(u, v) && u != v {
                return false;
            }
        }
    }
    true
}

/// Antichain whose lower-orthant union has volume `alpha` (within `tol`).
pub fn is_alpha_monotonic(points: &[Vec<f64>], alpha: f64, tol: f64) -> bool {
    is_antichain(points) && (lower_orthant_volume(points) - alpha).abs() <= tol
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    /// `g(x) < y`
    Fail,
    /// `g(x) >= y`
    Safe,
}

/// Evaluated design points with their failure labels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledDesign<T> {
    pub points: Vec<Vec<T>>,
    pub values: Vec<T>,
    pub labels: Vec<Label>,
}

impl<T: Scalar> LabeledDesign<T> {
    pub fn new() -> Self {
        Self {
            points: Vec::new(),
            values: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.points.first().map(Vec::len)
    }

    /// Append a point, rejecting it when it contradicts monotonicity with an
    /// existing point.
    pub fn push(&mut self, point: Vec<T>, value: T, label: Label) -> Result<()> {
        if let Some(d) = self.dimension() {
            if point.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: point.len(),
                });
            }
        }
        let new = self.points.len();
        for (i, (p, l)) in self.points.iter().zip(&self.labels).enumerate() {
            match (label, *l) {
                (Label::Fail, Label::Safe) if le(p, &point) => {
                    return Err(Error::MonotonicityViolation { fail: new, safe: i })
                }
                (Label::Safe, Label::Fail) if le(&point, p) => {
                    return Err(Error::MonotonicityViolation { fail: i, safe: new })
                }
                _ => {}
            }
        }
        self.points.push(point);
        self.values.push(value);
        self.labels.push(label);
        Ok(())
    }

    /// Evaluate `f` at each point and label the result.
    pub fn evaluate(f: &BlackBoxFunction<T>, points: Vec<Vec<T>>) -> Result<Self> {
        let mut design = Self::new();
        for p in points {
            let v = f.eval(&p);
            let label = if f.is_failure(v) { Label::Fail } else { Label::Safe };
            design.push(p, v, label)?;
        }
        Ok(design)
    }

    pub fn fail_points(&self) -> Vec<Vec<T>> {
        self.select(Label::Fail)
    }

    pub fn safe_points(&self) -> Vec<Vec<T>> {
        self.select(Label::Safe)
    }

    fn select(&self, which: Label) -> Vec<Vec<T>> {
        self.points
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| **l == which)
            .map(|(p, _)| p.clone())
            .collect()
    }

    /// First pair `(fail, safe)` with the safe point below the failing one.
    pub fn find_violation(&self) -> Option<(usize, usize)> {
        for (i, (p, l)) in self.points.iter().zip(&self.labels).enumerate() {
            if *l != Label::Fail {
                continue;
            }
            for (j, (q, m)) in self.points.iter().zip(&self.labels).enumerate() {
                if *m == Label::Safe && le(q, p) {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

/// Deterministic bounds `vol(U [0, fail]) <= p <= 1 - vol(U [safe, 1])`.
///
/// Exact up to [`MAX_EXACT_DIMENSION`]; beyond that both volumes are Monte
/// Carlo estimates widened by three standard errors and the bound kind is
/// downgraded to high-probability.
pub fn bounds_from_design(design: &LabeledDesign<f64>) -> Result<ProbabilityBounds<f64>> {
    let mut rng = RandomStream::new(0x5eed, design.len() as u64);
    bounds_from_design_with(design, 200_000, &mut rng)
}

pub fn bounds_from_design_with<R: Rng + ?Sized>(
    design: &LabeledDesign<f64>,
    mc_samples: u64,
    rng: &mut R,
) -> Result<ProbabilityBounds<f64>> {
    if let Some((fail, safe)) = design.find_violation() {
        return Err(Error::MonotonicityViolation { fail, safe });
    }
    let queries = design.len() as u64;
    let fail = design.fail_points();
    let safe: Vec<Vec<f64>> = design
        .safe_points()
        .into_iter()
        .map(|p| p.into_iter().map(|v| 1.0 - v).collect())
        .collect();
    let lower = lower_orthant_volume_auto(&fail, mc_samples, rng);
    let upper = lower_orthant_volume_auto(&safe, mc_samples, rng);
    if lower.exact && upper.exact {
        ProbabilityBounds::from_computed(
            lower.value,
            1.0 - upper.value,
            BoundKind::Deterministic,
            queries,
        )
    } else {
        high_probability_bounds(lower, upper, queries)
    }
}

const MC_Z: f64 = 3.0;
// two one-sided 3-sigma tails
const MC_ALPHA: f64 = 2.0 * 1.349_898_031_630_094_6e-3;

fn high_probability_bounds(
    lower: VolumeEstimate<f64>,
    upper: VolumeEstimate<f64>,
    queries: u64,
) -> Result<ProbabilityBounds<f64>> {
    let lo = (lower.value - MC_Z * lower.std_err).max(0.0);
    let hi = (1.0 - upper.value + MC_Z * upper.std_err).min(1.0);
    ProbabilityBounds::from_computed(
        lo,
        hi.max(lo),
        BoundKind::HighProbability { alpha: MC_ALPHA },
        queries,
    )
}

/// The set between the failing lower-orthant union and the safe
/// upper-orthant union, where the limit state of an increasing function lies.
#[derive(Clone, Debug)]
pub struct StaircaseRegion<T> {
    dimension: usize,
    fail: OrthantUnion<T>,
    /// Safe generators stored reflected, `1 - x`.
    safe: OrthantUnion<T>,
}

impl<T: ExactRing> StaircaseRegion<T> {
    /// The whole cube.
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            fail: OrthantUnion::new(dimension),
            safe: OrthantUnion::new(dimension),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn add(&mut self, point: &[T], label: Label) {
        match label {
            Label::Fail => {
                self.fail.insert(point);
            }
            Label::Safe => {
                let r = reflect(point);
                self.safe.insert(&r);
            }
        }
    }

    pub fn from_points(dimension: usize, fail: &[Vec<T>], safe: &[Vec<T>]) -> Self {
        let mut region = Self::new(dimension);
        for p in fail {
            region.add(p, Label::Fail);
        }
        for p in safe {
            region.add(p, Label::Safe);
        }
        region
    }

    /// `x` is below some failing generator.
    pub fn in_fail_union(&self, x: &[T]) -> bool {
        self.fail.covers(x)
    }

    /// `x` is above some safe generator.
    pub fn in_safe_union(&self, x: &[T]) -> bool {
        let r = reflect(x);
        self.safe.covers(&r)
    }

    /// `x` lies in neither orthant union.
    pub fn contains(&self, x: &[T]) -> bool {
        !self.in_fail_union(x) && !self.in_safe_union(x)
    }

    /// Maximal failing generators (pruned).
    pub fn fail_generators(&self) -> Vec<Vec<T>> {
        self.fail.generators().to_vec()
    }

    /// Minimal safe generators (pruned).
    pub fn safe_generators(&self) -> Vec<Vec<T>> {
        self.safe.generators().iter().map(|g| reflect(g)).collect()
    }

    /// Volume of the failing union, a lower bound on `p`.
    pub fn fail_volume(&self) -> T {
        self.fail.volume()
    }

    /// Volume of the safe union; `1 -` this is an upper bound on `p`.
    pub fn safe_volume(&self) -> T {
        self.safe.volume()
    }

    /// Volume the failing union would gain if `x` were labeled failing.
    pub fn fail_gain(&self, x: &[T]) -> T {
        self.fail.contribution(x)
    }

    /// Volume the safe union would gain if `x` were labeled safe.
    pub fn safe_gain(&self, x: &[T]) -> T {
        self.safe.contribution(&reflect(x))
    }

    /// Volume of the region itself.
    pub fn volume(&self) -> T {
        T::one() - self.fail.volume() - self.safe.volume()
    }
}

fn reflect<T: ExactRing>(x: &[T]) -> Vec<T> {
    x.iter().map(|v| T::one() - v.clone()).collect()
}

/// Produces points uniformly distributed on a staircase region.
pub trait RegionSampler {
    fn draw(&mut self, region: &StaircaseRegion<f64>, rng: &mut RandomStream) -> Result<Vec<f64>>;

    /// `count` candidates for a single query.
    fn draw_candidates(
        &mut self,
        region: &StaircaseRegion<f64>,
        count: usize,
        rng: &mut RandomStream,
    ) -> Result<Vec<Vec<f64>>> {
        (0..count.max(1)).map(|_| self.draw(region, rng)).collect()
    }
}

/// Uniform draws on the cube, kept when they land in the region.
#[derive(Clone, Debug)]
pub struct RejectionSampler {
    pub max_draws: u64,
    pub draws: u64,
}

impl Default for RejectionSampler {
    fn default() -> Self {
        Self {
            max_draws: 100_000_000,
            draws: 0,
        }
    }
}

impl RegionSampler for RejectionSampler {
    fn draw(&mut self, region: &StaircaseRegion<f64>, rng: &mut RandomStream) -> Result<Vec<f64>> {
        let d = region.dimension();
        let mut x = vec![0.0; d];
        for _ in 0..self.max_draws {
            self.draws += 1;
            for v in x.iter_mut() {
                *v = rng.random::<f64>();
            }
            if region.contains(&x) {
                return Ok(x);
            }
        }
        Err(Error::SamplerStalled(format!(
            "no point of the region in {} uniform draws",
            self.max_draws
        )))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SamplerKind {
    RejectionUniform,
    SemiAdaptiveMCMC(SemiAdaptiveConfig),
}

/// How the next design point is picked among sampled candidates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    /// Take the first uniform draw.
    Uniform,
    /// Draw `candidates` points and keep the one farthest from the design.
    Maximin { candidates: usize },
    /// Draw `candidates` points and keep the one whose upper orthant removes
    /// the most volume from the region if it turns out safe.
    MaxSafeGain { candidates: usize },
}

/// Candidate count of the default selection rule.
pub const DEFAULT_CANDIDATES: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct BounderOptions {
    pub selection: Selection,
    /// Region volume below which sampling is abandoned.
    pub min_volume: f64,
    /// Monte Carlo draws per volume beyond [`MAX_EXACT_DIMENSION`].
    pub mc_samples: u64,
}

impl Default for BounderOptions {
    fn default() -> Self {
        Self {
            selection: Selection::MaxSafeGain {
                candidates: DEFAULT_CANDIDATES,
            },
            min_volume: 1e-300,
            mc_samples: 200_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SequentialRun {
    /// Bounds after each query.
    pub bounds: Vec<ProbabilityBounds<f64>>,
    pub trace: Vec<TracePoint<f64>>,
    pub design: LabeledDesign<f64>,
    pub region: StaircaseRegion<f64>,
}

impl SequentialRun {
    pub fn final_bounds(&self) -> ProbabilityBounds<f64> {
        self.bounds
            .last()
            .copied()
            .unwrap_or_else(ProbabilityBounds::trivial)
    }
}

/// Query `f` at `budget` points drawn uniformly from the current staircase
/// region, tightening the bounds after each query.
pub fn sequential_bounder(
    f: &BlackBoxFunction<f64>,
    budget: u64,
    sampler: SamplerKind,
    rng: &mut RandomStream,
) -> Result<SequentialRun> {
    let options = BounderOptions::default();
    match sampler {
        SamplerKind::RejectionUniform => {
            sequential_bounder_with(f, budget, &mut RejectionSampler::default(), &options, rng)
        }
        SamplerKind::SemiAdaptiveMCMC(config) => {
            let mut s = SemiAdaptiveSampler::new(config, f.dimension())?;
            sequential_bounder_with(f, budget, &mut s, &options, rng)
        }
    }
}

pub fn sequential_bounder_with(
    f: &BlackBoxFunction<f64>,
    budget: u64,
    sampler: &mut dyn RegionSampler,
    options: &BounderOptions,
    rng: &mut RandomStream,
) -> Result<SequentialRun> {
    if budget == 0 {
        return Err(invalid("budget must be at least 1"));
    }
    let d = f.dimension();
    let exact = d <= MAX_EXACT_DIMENSION;
    let start = f.queries();
    let mut region = StaircaseRegion::new(d);
    let mut design = LabeledDesign::new();
    let mut bounds = Vec::with_capacity(budget as usize);
    let mut trace = Vec::with_capacity(budget as usize);

    for step in 1..=budget {
        if exact && region.volume() <= options.min_volume {
            return Err(Error::SamplerStalled(format!(
                "staircase region volume {} underflows",
                region.volume()
            )));
        }
        let x = match options.selection {
            Selection::Uniform => sampler.draw(&region, rng)?,
            Selection::Maximin { candidates } => {
                let pool = sampler.draw_candidates(&region, candidates, rng)?;
                pick_best(pool, |c| min_distance(c, &design.points))
            }
            Selection::MaxSafeGain { candidates } => {
                let pool = sampler.draw_candidates(&region, candidates, rng)?;
                pick_best(pool, |c| region.safe_gain(c))
            }
        };
        let value = f.eval(&x);
        let label = if f.is_failure(value) { Label::Fail } else { Label::Safe };
        design.push(x.clone(), value, label)?;
        region.add(&x, label);
        let queries = f.queries() - start;
        let b = if exact {
            ProbabilityBounds::from_computed(
                region.fail_volume(),
                1.0 - region.safe_volume(),
                BoundKind::Deterministic,
                queries,
            )?
        } else {
            let mut b = bounds_from_design_with(&design, options.mc_samples, rng)?;
            b.queries_used = queries;
            b
        };
        trace.push(TracePoint {
            step: step as usize,
            queries,
            p_lower: b.lower,
            p_upper: b.upper,
            unknown_mass: b.width(),
        });
        bounds.push(b);
    }
    Ok(SequentialRun {
        bounds,
        trace,
        design,
        region,
    })
}

/// First candidate with the largest score.
fn pick_best(pool: Vec<Vec<f64>>, score: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, c) in pool.iter().enumerate() {
        let s = score(c);
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    pool.into_iter().nth(best).expect("candidate pool is non-empty")
}

fn min_distance(x: &[f64], points: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .map(|p| p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dominance_examples() {
        assert!(dominates(&[0.1, 0.2], &[0.3, 0.2]).unwrap());
        assert!(!dominates(&[0.1, 0.5], &[0.3, 0.2]).unwrap());
        assert!(dominates(&[0.4, 0.4], &[0.4, 0.4]).unwrap());
        assert!(matches!(
            dominates(&[0.1], &[0.1, 0.2]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn antichain_examples() {
        assert!(is_antichain(&[vec![0.2, 0.8], vec![0.8, 0.2]]));
        assert!(!is_antichain(&[vec![0.2, 0.2], vec![0.8, 0.8]]));
        let diag: Vec<Vec<f64>> = (0..=20).map(|i| vec![i as f64 / 20.0, 1.0 - i as f64 / 20.0]).collect();
        assert!(is_antichain(&diag));
        assert!(is_alpha_monotonic(&[vec![0.5, 0.2], vec![0.2, 0.5]], 0.16, 1e-12));
    }

    fn design(fail: &[&[f64]], safe: &[&[f64]]) -> LabeledDesign<f64> {
        let mut d = LabeledDesign::new();
        for p in fail {
            d.push(p.to_vec(), -1.0, Label::Fail).unwrap();
        }
        for p in safe {
            d.push(p.to_vec(), 1.0, Label::Safe).unwrap();
        }
        d
    }

    #[test]
    fn single_orthant_bounds() {
        let b = bounds_from_design(&design(&[&[0.2, 0.3]], &[&[0.6, 0.7]])).unwrap();
        assert!((b.lower - 0.06).abs() < 1e-15);
        assert!((b.upper - 0.88).abs() < 1e-15);
        assert!(b.kind.is_deterministic());
    }

    #[test]
    fn whole_cube_safe_design() {
        let b = bounds_from_design(&design(&[], &[&[0.0, 0.0, 0.0]])).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 0.0));
    }

    #[test]
    fn violation_detected() {
        let mut d = design(&[], &[&[0.2, 0.2]]);
        let err = d.push(vec![0.5, 0.5], -1.0, Label::Fail).unwrap_err();
        assert_eq!(err, Error::MonotonicityViolation { fail: 1, safe: 0 });
        // a hand-built inconsistent design is caught by the bounder as well
        let bad = LabeledDesign {
            points: vec![vec![0.2, 0.2], vec![0.5, 0.5]],
            values: vec![1.0, -1.0],
            labels: vec![Label::Safe, Label::Fail],
        };
        assert!(matches!(
            bounds_from_design(&bad),
            Err(Error::MonotonicityViolation { fail: 1, safe: 0 })
        ));
    }

    #[test]
    fn region_membership() {
        let region = StaircaseRegion::<f64>::from_points(2, &[vec![0.3, 0.3]], &[vec![0.6, 0.6]]);
        assert!(!region.contains(&[0.1, 0.2]));
        assert!(!region.contains(&[0.7, 0.9]));
        assert!(region.contains(&[0.5, 0.5]));
        assert!(region.contains(&[0.1, 0.9]));
        assert!((region.volume() - (1.0 - 0.09 - 0.16)).abs() < 1e-15);
        assert_eq!(region.safe_generators(), vec![vec![0.6, 0.6]]);
    }

    #[test]
    fn first_query_tightens() {
        let f = BlackBoxFunction::new(2, 1.0, |x: &[f64]| x[0] + x[1]);
        let mut rng = RandomStream::new(5, 0);
        let run = sequential_bounder(&f, 5, SamplerKind::RejectionUniform, &mut rng).unwrap();
        assert!(run.bounds[0].width() < 1.0);
        assert_eq!(f.queries(), 5);
        for w in run.bounds.windows(2) {
            assert!(w[1].lower >= w[0].lower && w[1].upper <= w[0].upper);
        }
        for b in &run.bounds {
            assert!(b.contains(0.5));
        }
    }

    #[test]
    fn maximin_selection_runs() {
        let f = BlackBoxFunction::new(2, 1.0, |x: &[f64]| x[0] + x[1]);
        let mut rng = RandomStream::new(6, 0);
        let options = BounderOptions {
            selection: Selection::Maximin { candidates: 8 },
            ..Default::default()
        };
        let run = sequential_bounder_with(&f, 20, &mut RejectionSampler::default(), &options, &mut rng)
            .unwrap();
        assert!(run.final_bounds().contains(0.5));
        assert_eq!(f.queries(), 20);
    }
}
