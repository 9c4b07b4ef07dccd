//! Replication drivers for each method and the auxiliary studies.

use std::time::Instant;

use rarebound::bench::{from_name, ToyProblem};
use rarebound::dyadic;
use rarebound::mcmc::{run_semi_adaptive, BatchSource, SemiAdaptiveConfig, SemiAdaptiveSampler};
use rarebound::monotone::{sequential_bounder_with, BounderOptions, RejectionSampler};
use rarebound::surrogate::{fsd_replication, lambda_crossing, lambda_curve, shift_replication, LambdaPoint};
use rarebound::RandomStream;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Method};
use crate::report::ReportRow;
use crate::CliError;

/// One replication on a fresh copy of the benchmark with stream `replication`.
pub fn replicate(config: &ExperimentConfig, problem: &ToyProblem, replication: u64) -> Result<ReportRow, CliError> {
    let toy = problem.replicate();
    let f = &toy.function;
    let mut rng = RandomStream::new(config.seed, replication);
    let method = config.method.name();
    let start = Instant::now();
    let (queries, bounds, p_hat) = match config.method {
        Method::Dyadic => {
            let lipschitz = config.dyadic.lipschitz.or(toy.lipschitz).ok_or_else(|| {
                CliError::Config(format!(
                    "benchmark `{}` has no known Lipschitz constant; set [dyadic] lipschitz",
                    toy.name
                ))
            })?;
            let run = dyadic::refine(f, lipschitz, config.budget, config.dyadic.max_depth)?;
            (run.bounds.queries_used, Some((run.bounds.lower, run.bounds.upper)), None)
        }
        Method::MonotoneExact | Method::MonotoneMcmc => {
            let b = if config.monotone.ledger {
                let mut chain = config.monotone.chain.clone();
                if config.method == Method::MonotoneExact {
                    chain.batch_source = BatchSource::Rejection;
                }
                let run = run_semi_adaptive(f, chain, config.budget, &mut rng)?;
                *run.bounds.last().expect("budget >= 1 gives one bound per query")
            } else {
                let options = BounderOptions {
                    selection: config.monotone.selection,
                    ..BounderOptions::default()
                };
                let run = if config.method == Method::MonotoneExact {
                    sequential_bounder_with(f, config.budget, &mut RejectionSampler::default(), &options, &mut rng)?
                } else {
                    let mut sampler = SemiAdaptiveSampler::new(config.monotone.chain.clone(), toy.d)?;
                    sequential_bounder_with(f, config.budget, &mut sampler, &options, &mut rng)?
                };
                run.final_bounds()
            };
            (b.queries_used, Some((b.lower, b.upper)), None)
        }
        Method::Shift => {
            let g = |x: &[f64]| f.eval(x);
            let rep = shift_replication(g, toy.d, f.threshold(), &config.shift, &mut rng)?;
            debug_assert_eq!(rep.queries, f.queries());
            (rep.queries, None, Some(rep.p_hat))
        }
        Method::Fsd => {
            let g = |x: &[f64]| f.eval(x);
            let knobs = &config.fsd;
            let rep = fsd_replication(
                g,
                toy.d,
                f.threshold(),
                knobs.train,
                &knobs.family,
                &knobs.relaxation,
                knobs.mc_samples,
                &mut rng,
            )?;
            (rep.queries, None, Some(rep.p_hat))
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    let mut row = ReportRow::new(method, &toy.name, toy.d, toy.p_exact, replication, queries, bounds, p_hat);
    if config.wall_time {
        row.wall_time_s = Some(elapsed);
    }
    Ok(row)
}

/// All replications on a pool of `config.threads` workers; rows come back
/// in replication order whatever the completion order.
pub fn run_replications(config: &ExperimentConfig) -> Result<Vec<ReportRow>, CliError> {
    let problem = from_name(&config.benchmark).map_err(|e| CliError::Config(format!("benchmark: {e}")))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| CliError::Method(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..config.replications)
            .into_par_iter()
            .map(|r| {
                let row = replicate(config, &problem, r);
                log::debug!("replication {r} done");
                row
            })
            .collect()
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing {
    pub p: f64,
    pub c: f64,
    pub n: f64,
}

/// `λ(n, p)` on the grid and the crossing `λ = p` beyond the mode.
pub fn lambda_table(p_list: &[f64], n_grid: &[u64], c: f64) -> Result<(Vec<LambdaPoint>, Vec<Crossing>), CliError> {
    let curve = lambda_curve(p_list, n_grid, c)?;
    let crossings = p_list
        .iter()
        .map(|&p| Ok(Crossing { p, c, n: lambda_crossing(p, c)? }))
        .collect::<Result<Vec<_>, rarebound::Error>>()?;
    Ok((curve, crossings))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub method: &'static str,
    pub d: usize,
    pub budget: u64,
    pub replications: u64,
    pub mean_wall_time_s: f64,
    pub mean_rel_precision: f64,
}

/// Paired timing of the semi-adaptive run with chain batches against
/// rejection batches on the Gamma-ratio benchmark. Both sources see the
/// same seeds.
pub fn timing_study(
    methods: &[BatchSource],
    dims: &[usize],
    p: f64,
    budget: u64,
    replications: u64,
    seed: u64,
) -> Result<Vec<TimingRow>, CliError> {
    let mut out = Vec::with_capacity(methods.len() * dims.len());
    for &d in dims {
        let problem = rarebound::bench::make_example1(d, p).map_err(|e| CliError::Config(e.to_string()))?;
        for &source in methods {
            let config = SemiAdaptiveConfig {
                batch_source: source,
                ..SemiAdaptiveConfig::default()
            };
            let (mut time, mut precision) = (0.0, 0.0);
            for r in 0..replications {
                let toy = problem.replicate();
                let mut rng = RandomStream::new(seed, r);
                let start = Instant::now();
                let run = run_semi_adaptive(&toy.function, config.clone(), budget, &mut rng)?;
                time += start.elapsed().as_secs_f64();
                let b = run.bounds.last().expect("budget >= 1");
                precision += (b.upper - b.lower) / p;
            }
            let n = replications.max(1) as f64;
            out.push(TimingRow {
                method: match source {
                    BatchSource::Mcmc => "mcmc",
                    BatchSource::Rejection => "rejection",
                },
                d,
                budget,
                replications,
                mean_wall_time_s: time / n,
                mean_rel_precision: precision / n,
            });
        }
    }
    Ok(out)
}
