use std::time::Instant;

use rand::Rng;

use rarebound::bench::make_example1;
use rarebound::mcmc::{run_semi_adaptive, BatchSource, FnRegion, SemiAdaptiveConfig, SemiAdaptiveSampler};
use rarebound::RandomStream;

// window chains are correlated, so the long run uses 10^6 states
#[test]
fn band_region_histogram_matches_rejection() {
    let region = FnRegion {
        dimension: 2,
        predicate: |x: &[f64]| x[0] + x[1] > 0.5 && x[0] + x[1] < 1.5,
    };
    let mut sampler = SemiAdaptiveSampler::new(SemiAdaptiveConfig::default(), 2).unwrap();
    let mut rng = RandomStream::new(13, 0);
    let bin = |x: &[f64]| ((x[0] * 20.0) as usize).min(19) * 20 + ((x[1] * 20.0) as usize).min(19);
    let mut h = vec![0.0f64; 400];
    let mut n = 0.0f64;
    while n < 1_000_000.0 {
        sampler.rebuild(&region, &mut rng).unwrap();
        for x in sampler.window_chain() {
            h[bin(x)] += 1.0;
            n += 1.0;
        }
    }
    let mut r = vec![0.0f64; 400];
    let mut kept = 0.0f64;
    while kept < 1e6 {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        if (region.predicate)(&x) {
            r[bin(&x)] += 1.0;
            kept += 1.0;
        }
    }
    let tv: f64 = 0.5 * h.iter().zip(&r).map(|(a, b)| (a / n - b / kept).abs()).sum::<f64>();
    eprintln!("band region TV {tv:.4}");
    assert!(tv < 0.05, "tv {tv}");
}

#[test]
fn ledger_is_consistent() {
    let toy = make_example1(3, 5e-3).unwrap();
    let mut rng = RandomStream::new(17, 0);
    let run = run_semi_adaptive(&toy.function, SemiAdaptiveConfig::default(), 120, &mut rng).unwrap();
    let v = &run.ledger.region_volumes;
    assert_eq!(v.len(), 120);
    assert!(v.windows(2).all(|w| w[1] <= w[0]));
    assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
    assert!(run.bounds.iter().all(|b| b.lower <= b.upper));
    assert!(run.point_bounds.iter().all(|(l, u)| l <= u));
}

#[test]
fn mcmc_beats_rejection_at_d5() {
    let toy = make_example1(5, 5e-4).unwrap();
    let time = |source: BatchSource| {
        let config = SemiAdaptiveConfig { batch_source: source, ..Default::default() };
        let f = toy.replicate();
        let mut rng = RandomStream::new(23, 0);
        let start = Instant::now();
        run_semi_adaptive(&f.function, config, 100, &mut rng).unwrap();
        start.elapsed().as_secs_f64()
    };
    let mcmc = time(BatchSource::Mcmc);
    let rejection = time(BatchSource::Rejection);
    assert!(mcmc < rejection, "mcmc {mcmc:.2}s vs rejection {rejection:.2}s");
}
