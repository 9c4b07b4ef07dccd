//! Semi-adaptive MCMC for uniform sampling on shrinking staircase regions.
//!
//! Points are moved in the Gaussian-transformed space `z = ψ(x)` with
//! `ψ = (Φ⁻¹, …, Φ⁻¹)`, which preserves the Pareto order. A random-walk
//! proposal `z + ε`, `ε ~ N(0, αΣ̂/d)`, is accepted with probability
//! `min(1, 1{x̃ ∈ region} Π φ(z̃ᵢ)/φ(zᵢ))`, which makes the uniform law on the
//! region stationary in `x`-space. The proposal covariance `Σ̂` is re-estimated
//! only between windows, so each chain is an ordinary Metropolis chain.
//!
//! Per window, a converged chain is thinned into a nearly independent batch;
//! the next `l` design points are drawn from the batch by accept-reject
//! against the current region, and region volumes are tracked by the
//! telescoping proportions of the chain still inside the region.

use std::io::{self, Write};

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::bench::special::{normal_cdf, normal_quantile};
use crate::error::{invalid, Error, Result};
use crate::estimate::{BlackBoxFunction, BoundKind, ProbabilityBounds};
use crate::monotone::{Label, LabeledDesign, RegionSampler, StaircaseRegion, MAX_EXACT_DIMENSION};
use crate::rng::RandomStream;

/// Inputs at exactly 0 or 1 are clamped this far inside before transforming.
pub const BOUNDARY_EPS: f64 = 1e-15;
/// Ridge added to empirical proposal covariances.
pub const COVARIANCE_RIDGE: f64 = 1e-8;

/// A membership oracle for a subset of the unit cube.
pub trait Region {
    fn dimension(&self) -> usize;
    fn contains(&self, x: &[f64]) -> bool;
}

impl Region for StaircaseRegion<f64> {
    fn dimension(&self) -> usize {
        StaircaseRegion::dimension(self)
    }

    fn contains(&self, x: &[f64]) -> bool {
        StaircaseRegion::contains(self, x)
    }
}

/// A region given by a predicate.
pub struct FnRegion<F> {
    pub dimension: usize,
    pub predicate: F,
}

impl<F: Fn(&[f64]) -> bool> Region for FnRegion<F> {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn contains(&self, x: &[f64]) -> bool {
        (self.predicate)(x)
    }
}

/// Componentwise standard-normal quantile.
pub fn psi(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let c = v.clamp(BOUNDARY_EPS, 1.0 - BOUNDARY_EPS);
            if c != v {
                warn!("psi input {v} clamped to {c}");
            }
            normal_quantile(c).unwrap_or(f64::NAN)
        })
        .collect()
}

/// Componentwise standard-normal CDF, the inverse of [`psi`].
pub fn psi_inv(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| normal_cdf(v)).collect()
}

/// Current point of a transformed random walk with its frozen proposal.
#[derive(Clone, Debug)]
pub struct TransformedWalkState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub covariance: DMatrix<f64>,
    /// Proposal scale `α`; increments have covariance `αΣ̂/d`.
    pub scale: f64,
    pub window: usize,
    chol: DMatrix<f64>,
}

impl TransformedWalkState {
    pub fn new(x: Vec<f64>, covariance: DMatrix<f64>, scale: f64, window: usize) -> Result<Self> {
        let d = x.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: covariance.nrows(),
            });
        }
        if !(scale > 0.0) {
            return Err(invalid("proposal scale must be positive"));
        }
        let z = psi(&x);
        let chol = cholesky_factor(&covariance);
        Ok(Self {
            x,
            z,
            covariance,
            scale,
            window,
            chol,
        })
    }

    pub fn dimension(&self) -> usize {
        self.x.len()
    }

    /// Replace the proposal covariance (between windows only).
    pub fn set_covariance(&mut self, covariance: DMatrix<f64>) {
        self.chol = cholesky_factor(&covariance);
        self.covariance = covariance;
    }
}

fn cholesky_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let d = cov.nrows();
    let mut ridge = 0.0;
    for _ in 0..20 {
        let m = cov + DMatrix::identity(d, d) * ridge;
        if let Some(c) = m.cholesky() {
            return c.l();
        }
        ridge = if ridge == 0.0 { COVARIANCE_RIDGE } else { ridge * 10.0 };
    }
    DMatrix::identity(d, d)
}

/// One Metropolis step; returns whether the proposal was accepted.
pub fn mh_step<R: Region + ?Sized>(
    state: &mut TransformedWalkState,
    region: &R,
    rng: &mut RandomStream,
) -> bool {
    let d = state.dimension();
    let factor = (state.scale / d as f64).sqrt();
    let xi = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let eps = &state.chol * xi * factor;
    let z_new: Vec<f64> = state.z.iter().zip(eps.iter()).map(|(z, e)| z + e).collect();
    let x_new = psi_inv(&z_new);
    if !region.contains(&x_new) {
        return false;
    }
    // uniform target in x: density in z is proportional to prod φ(z_i)
    let log_ratio = 0.5
        * (state.z.iter().map(|v| v * v).sum::<f64>() - z_new.iter().map(|v| v * v).sum::<f64>());
    let u: f64 = rng.random();
    if log_ratio >= 0.0 || u < log_ratio.exp() {
        state.x = x_new;
        state.z = z_new;
        true
    } else {
        false
    }
}

/// Unbiased empirical covariance of transformed points plus a
/// [`COVARIANCE_RIDGE`] ridge.
pub fn adapt_covariance(trajectory: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = trajectory.len();
    if n < 2 {
        return Err(Error::InsufficientChain { len: n, needed: 2 });
    }
    let d = trajectory[0].len();
    let mut mean = vec![0.0; d];
    for z in trajectory {
        for (m, v) in mean.iter_mut().zip(z) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for z in trajectory {
        for j in 0..d {
            let dj = z[j] - mean[j];
            for k in j..d {
                cov[(j, k)] += dj * (z[k] - mean[k]);
            }
        }
    }
    for j in 0..d {
        for k in j..d {
            let v = cov[(j, k)] / (n - 1) as f64;
            cov[(j, k)] = v;
            cov[(k, j)] = v;
        }
        cov[(j, j)] += COVARIANCE_RIDGE;
    }
    Ok(cov)
}

/// Number of leading states discarded as burn-in.
pub fn burn_in_len(len: usize, fraction: f64) -> usize {
    (len as f64 * fraction).ceil() as usize
}

/// Every `gap`-th state after the first `burn_in`.
pub fn batch_decorrelate<T: Clone>(chain: &[T], gap: usize, burn_in: usize) -> Result<Vec<T>> {
    if gap == 0 {
        return Err(invalid("gap must be at least 1"));
    }
    if chain.len() < burn_in + gap {
        return Err(Error::InsufficientChain {
            len: chain.len(),
            needed: burn_in + gap,
        });
    }
    Ok(chain[burn_in..].iter().step_by(gap).cloned().collect())
}

/// Lag-`k` autocorrelation of a scalar series.
pub fn autocorrelation(series: &[f64], lag: usize) -> f64 {
    let n = series.len();
    if lag >= n {
        return 0.0;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    if var == 0.0 {
        return 0.0;
    }
    let cov: f64 = series[..n - lag]
        .iter()
        .zip(&series[lag..])
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum();
    cov / var
}

/// Integrated autocorrelation time `1 + 2 Σ ρ_k` with Sokal's adaptive
/// window (smallest `M` with `M >= 5 τ(M)`).
pub fn integrated_autocorrelation_time(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 4 {
        return 1.0;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let var: f64 = centered.iter().map(|v| v * v).sum();
    if var == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for lag in 1..n / 4 {
        let cov: f64 = centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum();
        tau += 2.0 * cov / var;
        if lag as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

/// Thinning gap `⌈1.5 τ⌉` from the worst coordinate, capped at `max_gap`.
///
/// For geometrically mixing chains `ρ^{1.5τ} ≈ e^{-3}`, well under 0.1.
pub fn decorrelation_gap(chain: &[Vec<f64>], max_gap: usize) -> usize {
    let Some(first) = chain.first() else { return 1 };
    let mut tau: f64 = 1.0;
    for k in 0..first.len() {
        let series: Vec<f64> = chain.iter().map(|s| s[k]).collect();
        tau = tau.max(integrated_autocorrelation_time(&series));
    }
    ((1.5 * tau).ceil() as usize).clamp(1, max_gap.max(1))
}

/// How each window's uniform batch is produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchSource {
    /// Transformed random-walk Metropolis chain.
    Mcmc,
    /// Independent uniform draws on the cube kept when inside the region.
    Rejection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemiAdaptiveConfig {
    /// Chain length `N` per window.
    pub chain_length: usize,
    /// Design points drawn per window, `l`.
    pub window: usize,
    /// Proposal scale `α`.
    pub scale: f64,
    pub burn_in_fraction: f64,
    /// Chain acceptance rate below which sampling is declared stalled.
    pub min_acceptance: f64,
    /// Acceptance band outside of which `α` is rescaled for the next window.
    pub target_acceptance: (f64, f64),
    pub max_gap: usize,
    /// Smallest acceptance rate tolerated by rejection initialization.
    pub init_min_acceptance: f64,
    pub batch_source: BatchSource,
    /// Candidates drawn per query by [`run_semi_adaptive`]; the one with the
    /// largest estimated safe-orthant gain is queried.
    pub candidates: usize,
}

impl Default for SemiAdaptiveConfig {
    fn default() -> Self {
        Self {
            chain_length: 10_000,
            window: 10,
            scale: 2.38 * 2.38,
            burn_in_fraction: 0.2,
            min_acceptance: 1e-3,
            target_acceptance: (0.1, 0.5),
            max_gap: 100,
            init_min_acceptance: 1e-6,
            batch_source: BatchSource::Mcmc,
            candidates: crate::monotone::DEFAULT_CANDIDATES,
        }
    }
}

impl SemiAdaptiveConfig {
    fn validate(&self) -> Result<()> {
        if self.chain_length < 10 {
            return Err(invalid("chain_length must be at least 10"));
        }
        if self.window == 0 {
            return Err(invalid("window must be at least 1"));
        }
        if !(self.scale > 0.0) {
            return Err(invalid("scale must be positive"));
        }
        if !(0.0..0.9).contains(&self.burn_in_fraction) {
            return Err(invalid("burn_in_fraction must lie in [0, 0.9)"));
        }
        Ok(())
    }
}

/// Per-window chain statistics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowStats {
    pub acceptance_rate: f64,
    pub gap: usize,
    pub batch_size: usize,
    pub steps: usize,
}

struct Window {
    /// Second half of the post-burn-in states, used for volume proportions.
    chain: Vec<Vec<f64>>,
    /// Thinned batch, used to draw design points.
    batch: Vec<Vec<f64>>,
    draws: usize,
    stats: WindowStats,
}

/// Draws design points uniformly on the current staircase region by the
/// semi-adaptive scheme.
pub struct SemiAdaptiveSampler {
    config: SemiAdaptiveConfig,
    dimension: usize,
    scale: f64,
    covariance: Option<DMatrix<f64>>,
    window: Option<Window>,
    history: Vec<WindowStats>,
    total_steps: u64,
}

impl SemiAdaptiveSampler {
    pub fn new(config: SemiAdaptiveConfig, dimension: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            scale: config.scale,
            config,
            dimension,
            covariance: None,
            window: None,
            history: Vec::new(),
            total_steps: 0,
        })
    }

    pub fn config(&self) -> &SemiAdaptiveConfig {
        &self.config
    }

    pub fn history(&self) -> &[WindowStats] {
        &self.history
    }

    /// Chain steps (or rejection draws) spent so far.
    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn current_stats(&self) -> Option<WindowStats> {
        self.window.as_ref().map(|w| w.stats)
    }

    /// Thinned draw batch of the current window.
    pub fn window_batch(&self) -> &[Vec<f64>] {
        self.window.as_ref().map_or(&[], |w| &w.batch)
    }

    /// Post-burn-in states of the current window reserved for volume
    /// estimation (disjoint from the draw batch).
    pub fn window_chain(&self) -> &[Vec<f64>] {
        self.window.as_ref().map_or(&[], |w| &w.chain)
    }

    fn needs_rebuild(&self) -> bool {
        match &self.window {
            None => true,
            Some(w) => w.draws >= self.config.window,
        }
    }

    fn rejection_points(
        &mut self,
        region: &dyn Region,
        count: usize,
        rng: &mut RandomStream,
    ) -> Result<Vec<Vec<f64>>> {
        let d = self.dimension;
        let mut out = Vec::with_capacity(count);
        let mut drawn = 0u64;
        let floor = self.config.init_min_acceptance;
        while out.len() < count {
            let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            drawn += 1;
            if region.contains(&x) {
                out.push(x);
            } else if drawn as f64 * floor >= 10.0 && (out.len() as f64) < floor * drawn as f64 {
                return Err(Error::SamplerStalled(format!(
                    "rejection acceptance {} below {floor}",
                    out.len() as f64 / drawn as f64
                )));
            }
        }
        self.total_steps += drawn;
        Ok(out)
    }

    /// Start a new window on `region`.
    pub fn rebuild(&mut self, region: &dyn Region, rng: &mut RandomStream) -> Result<()> {
        let n = self.config.chain_length;
        let first = self.covariance.is_none();
        if first || self.config.batch_source == BatchSource::Rejection {
            // exact uniform sample: no burn-in or thinning needed
            let mut batch = self.rejection_points(region, n, rng)?;
            let z: Vec<Vec<f64>> = batch.iter().map(|x| psi(x)).collect();
            self.covariance = Some(adapt_covariance(&z)?);
            let chain = batch.split_off(n / 2);
            let stats = WindowStats {
                acceptance_rate: 1.0,
                gap: 1,
                batch_size: batch.len(),
                steps: n,
            };
            self.history.push(stats);
            self.window = Some(Window {
                batch,
                chain,
                draws: 0,
                stats,
            });
            return Ok(());
        }

        let start = self.start_point(region, rng)?;
        let cov = self.covariance.clone().expect("covariance set after first window");
        let mut state = TransformedWalkState::new(start, cov, self.scale, self.config.window)?;
        let mut xs = Vec::with_capacity(n);
        let mut zs = Vec::with_capacity(n);
        let mut accepted = 0usize;
        for _ in 0..n {
            if mh_step(&mut state, region, rng) {
                accepted += 1;
            }
            xs.push(state.x.clone());
            zs.push(state.z.clone());
        }
        self.total_steps += n as u64;
        let rate = accepted as f64 / n as f64;
        if rate < self.config.min_acceptance {
            return Err(Error::SamplerStalled(format!(
                "chain acceptance rate {rate} below {}",
                self.config.min_acceptance
            )));
        }
        let (lo, hi) = self.config.target_acceptance;
        if rate < lo {
            self.scale = (self.scale * 0.5).max(1e-4);
        } else if rate > hi {
            self.scale = (self.scale * 1.5).min(100.0);
        }
        let burn = burn_in_len(n, self.config.burn_in_fraction);
        let post_z = &zs[burn..];
        let gap = decorrelation_gap(post_z, self.config.max_gap);
        self.covariance = Some(adapt_covariance(post_z)?);
        // the first half feeds the draw batch and the second half, a gap
        // later, estimates volumes, so queried points do not bias the ledger
        let half = burn + (n - burn) / 2;
        let batch = batch_decorrelate(&xs[..half], gap, burn)?;
        let chain = xs.split_off((half + gap).min(n - 1));
        let stats = WindowStats {
            acceptance_rate: rate,
            gap,
            batch_size: batch.len(),
            steps: n,
        };
        self.history.push(stats);
        self.window = Some(Window {
            chain,
            batch,
            draws: 0,
            stats,
        });
        Ok(())
    }

    fn start_point(&mut self, region: &dyn Region, rng: &mut RandomStream) -> Result<Vec<f64>> {
        if let Some(w) = &self.window {
            let inside: Vec<&Vec<f64>> = w.chain.iter().filter(|x| region.contains(x)).collect();
            if !inside.is_empty() {
                return Ok(inside[rng.random_range(0..inside.len())].clone());
            }
        }
        Ok(self.rejection_points(region, 1, rng)?.remove(0))
    }

    fn draw_from_batch(
        &mut self,
        region: &dyn Region,
        count: usize,
        rng: &mut RandomStream,
    ) -> Option<Vec<Vec<f64>>> {
        let w = self.window.as_mut()?;
        let inside: Vec<usize> = (0..w.batch.len()).filter(|&i| region.contains(&w.batch[i])).collect();
        let rate = inside.len() as f64 / w.batch.len().max(1) as f64;
        if inside.is_empty() || rate < self.config.min_acceptance {
            return None;
        }
        w.draws += 1;
        // distinct batch points while they last
        let k = count.max(1);
        let mut picks: Vec<Vec<f64>> = rand::seq::index::sample(rng, inside.len(), k.min(inside.len()))
            .into_iter()
            .map(|i| w.batch[inside[i]].clone())
            .collect();
        while picks.len() < k {
            picks.push(w.batch[inside[rng.random_range(0..inside.len())]].clone());
        }
        Some(picks)
    }

    /// Draw `count` points approximately uniform on `region`; they count as
    /// a single draw of the window.
    pub fn draw_many(
        &mut self,
        region: &dyn Region,
        count: usize,
        rng: &mut RandomStream,
    ) -> Result<Vec<Vec<f64>>> {
        if self.needs_rebuild() {
            self.rebuild(region, rng)?;
        }
        if let Some(xs) = self.draw_from_batch(region, count, rng) {
            return Ok(xs);
        }
        // batch exhausted by the shrinking region: start the next window early
        self.rebuild(region, rng)?;
        self.draw_from_batch(region, count, rng).ok_or_else(|| {
            Error::SamplerStalled("fresh batch has no point in the region".into())
        })
    }

    /// Draw one point approximately uniform on `region`.
    pub fn draw_in(&mut self, region: &dyn Region, rng: &mut RandomStream) -> Result<Vec<f64>> {
        Ok(self.draw_many(region, 1, rng)?.remove(0))
    }
}

impl RegionSampler for SemiAdaptiveSampler {
    fn draw(&mut self, region: &StaircaseRegion<f64>, rng: &mut RandomStream) -> Result<Vec<f64>> {
        self.draw_in(region, rng)
    }

    fn draw_candidates(
        &mut self,
        region: &StaircaseRegion<f64>,
        count: usize,
        rng: &mut RandomStream,
    ) -> Result<Vec<Vec<f64>>> {
        self.draw_many(region, count, rng)
    }
}

/// Telescoping volume estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeLedger {
    /// `λ̂(U_n)` at the start of each window.
    pub base_volumes: Vec<f64>,
    /// Fraction of the window chain still inside the region after each query.
    pub proportions: Vec<f64>,
    /// `λ̂(U_{n+k})` after each query.
    pub region_volumes: Vec<f64>,
    /// Estimated mass of the safe union after each query.
    pub safe_volumes: Vec<f64>,
    /// Estimated mass of the failing union after each query.
    pub fail_volumes: Vec<f64>,
    /// Standard errors of `region_volumes`.
    pub region_std_errs: Vec<f64>,
    /// Standard errors of `fail_volumes`.
    pub fail_std_errs: Vec<f64>,
}

impl VolumeLedger {
    fn new() -> Self {
        Self {
            base_volumes: Vec::new(),
            proportions: Vec::new(),
            region_volumes: Vec::new(),
            safe_volumes: Vec::new(),
            fail_volumes: Vec::new(),
            region_std_errs: Vec::new(),
            fail_std_errs: Vec::new(),
        }
    }

    pub fn current_volume(&self) -> f64 {
        self.region_volumes.last().copied().unwrap_or(1.0)
    }
}

/// One row of the chain diagnostics export.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainDiagnostic {
    pub step: usize,
    pub acceptance_rate: f64,
    pub est_volume: f64,
    pub p_lower: f64,
    pub p_upper: f64,
}

pub const DIAGNOSTICS_HEADER: &str = "step,acceptance_rate,est_volume,p_lower,p_upper";

pub fn write_diagnostics_csv<W: Write>(rows: &[ChainDiagnostic], mut out: W) -> io::Result<()> {
    writeln!(out, "{DIAGNOSTICS_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.step, r.acceptance_rate, r.est_volume, r.p_lower, r.p_upper
        )?;
    }
    Ok(())
}

#[derive(Debug)]
pub struct SemiAdaptiveRun {
    /// Ledger bounds after each query, widened by [`LEDGER_Z`] standard errors.
    pub bounds: Vec<ProbabilityBounds<f64>>,
    /// Unwidened ledger estimates `(p̂⁻, p̂⁺)` after each query.
    pub point_bounds: Vec<(f64, f64)>,
    pub ledger: VolumeLedger,
    pub diagnostics: Vec<ChainDiagnostic>,
    pub design: LabeledDesign<f64>,
    pub region: StaircaseRegion<f64>,
    pub windows: Vec<WindowStats>,
    pub total_steps: u64,
}

/// Nominal level of the ledger bounds, which are widened by
/// [`LEDGER_Z`] standard errors.
pub const LEDGER_ALPHA: f64 = 0.05;
pub const LEDGER_Z: f64 = 2.0;

/// Semi-adaptive bounding run with ledger-estimated volumes.
///
/// Starts from the whole cube, and per window: builds a chain on the current
/// region, draws up to `l` design points from its thinned batch, queries `f`,
/// and updates the volume estimates from the proportion of the window's
/// chain falling in the new region and in the new safe/failing orthants.
pub fn run_semi_adaptive(
    f: &BlackBoxFunction<f64>,
    config: SemiAdaptiveConfig,
    budget: u64,
    rng: &mut RandomStream,
) -> Result<SemiAdaptiveRun> {
    if budget == 0 {
        return Err(invalid("budget must be at least 1"));
    }
    let d = f.dimension();
    let start = f.queries();
    let candidates = config.candidates.max(1);
    let mut sampler = SemiAdaptiveSampler::new(config, d)?;
    let mut region = StaircaseRegion::<f64>::new(d);
    let mut design = LabeledDesign::new();
    let mut ledger = VolumeLedger::new();
    let mut bounds = Vec::new();
    let mut point_bounds = Vec::new();
    let mut diagnostics = Vec::new();

    // estimates at the start of the current window
    // estimates and their variances at the start of the current window
    let mut base_volume = 1.0;
    let mut base_fail = 0.0;
    let mut base_var_volume = 0.0;
    let mut base_var_fail = 0.0;
    let mut window_chain: Vec<Vec<f64>> = Vec::new();
    let mut window_ess = 1.0;
    let mut window_id = usize::MAX;

    for step in 1..=budget as usize {
        let pool = sampler.draw_many(&region, candidates, rng)?;
        if sampler.history().len() != window_id {
            // a new window began: carry the estimates over and freeze its chain
            if let (Some(&v), Some(&fv), Some(&sv), Some(&sf)) = (
                ledger.region_volumes.last(),
                ledger.fail_volumes.last(),
                ledger.region_std_errs.last(),
                ledger.fail_std_errs.last(),
            ) {
                base_volume = v;
                base_fail = fv;
                base_var_volume = sv * sv;
                base_var_fail = sf * sf;
            }
            window_id = sampler.history().len();
            window_chain = sampler.window_chain().to_vec();
            let stats = sampler.current_stats().expect("window present after draw");
            window_ess = (window_chain.len() as f64 / stats.gap as f64).max(1.0);
            ledger.base_volumes.push(base_volume);
        }
        let x = if pool.len() == 1 {
            pool.into_iter().next().expect("one candidate")
        } else {
            // exact safe gain where orthant volumes are exact, otherwise
            // estimated on the draw batch (never on the estimation chain)
            let batch = sampler.window_batch();
            let score = |c: &Vec<f64>| -> f64 {
                if d <= MAX_EXACT_DIMENSION {
                    region.safe_gain(c)
                } else {
                    batch
                        .iter()
                        .filter(|y| y.iter().zip(c).all(|(a, b)| a >= b) && region.contains(y))
                        .count() as f64
                }
            };
            let scores: Vec<f64> = pool.iter().map(score).collect();
            let best = (0..pool.len())
                .fold(0, |b, i| if scores[i] > scores[b] { i } else { b });
            pool.into_iter().nth(best).expect("non-empty pool")
        };
        let value = f.eval(&x);
        let label = if f.is_failure(value) { Label::Fail } else { Label::Safe };
        design.push(x.clone(), value, label)?;
        region.add(&x, label);

        let m = window_chain.len().max(1) as f64;
        let mut still_inside = 0usize;
        let mut newly_failing = 0usize;
        for y in &window_chain {
            if region.contains(y) {
                still_inside += 1;
            } else if region.in_fail_union(y) {
                newly_failing += 1;
            }
        }
        let r = still_inside as f64 / m;
        let q = newly_failing as f64 / m;
        let volume = r * base_volume;
        let fail = base_fail + q * base_volume;
        ledger.proportions.push(r);
        ledger.region_volumes.push(volume);
        ledger.fail_volumes.push(fail);
        ledger.safe_volumes.push((1.0 - fail - volume).max(0.0));

        // delta method; windows use independent chains, so variances add
        let binom = |t: f64| {
            let t = t.clamp(1.0 / m, 1.0 - 1.0 / m);
            t * (1.0 - t) / window_ess
        };
        let sd_volume = (r * r * base_var_volume + base_volume * base_volume * binom(r)).sqrt();
        let sd_fail = (base_var_fail + q * q * base_var_volume + base_volume * base_volume * binom(q)).sqrt();
        ledger.region_std_errs.push(sd_volume);
        point_bounds.push((fail, fail + volume));
        ledger.fail_std_errs.push(sd_fail);

        let b = ProbabilityBounds::from_computed(
            fail - LEDGER_Z * sd_fail,
            fail + volume + LEDGER_Z * (sd_fail + sd_volume),
            BoundKind::HighProbability { alpha: LEDGER_ALPHA },
            f.queries() - start,
        )?;
        diagnostics.push(ChainDiagnostic {
            step,
            acceptance_rate: sampler.current_stats().map_or(1.0, |s| s.acceptance_rate),
            est_volume: volume,
            p_lower: b.lower,
            p_upper: b.upper,
        });
        bounds.push(b);
    }
    Ok(SemiAdaptiveRun {
        bounds,
        point_bounds,
        ledger,
        diagnostics,
        design,
        region,
        windows: sampler.history().to_vec(),
        total_steps: sampler.total_steps(),
    })
}
