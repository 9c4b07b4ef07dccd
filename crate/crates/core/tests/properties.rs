//! Property tests for invariants that hold for every input.

use proptest::prelude::*;

use rarebound::bench::{beta_cdf, beta_quantile, gamma_cdf, gamma_quantile, irwin_hall_cdf, make_linear_toy};
use rarebound::dyadic::refine;
use rarebound::mcmc::{psi, psi_inv, Region};
use rarebound::monotone::{
    dominates, lower_orthant_volume, sequential_bounder_with, BounderOptions, Label, RejectionSampler,
    Selection, StaircaseRegion,
};
use rarebound::surrogate::{
    check_fsd, load_model, q2, save_model, shift_below, shift_from_residuals, Certificate, Direction,
    RegressionSurrogate, ShiftedSurrogate, SurrogateFamily,
};
use rarebound::RandomStream;

fn points(d: usize, max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0..=1.0f64, d), 1..=max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adding_a_point_never_shrinks_the_union(
        (pts, extra) in (1usize..=4).prop_flat_map(|d| (points(d, 8), prop::collection::vec(0.0..=1.0f64, d)))
    ) {
        let before: f64 = lower_orthant_volume(&pts);
        let mut more = pts.clone();
        more.push(extra);
        let after: f64 = lower_orthant_volume(&more);
        prop_assert!(after >= before - 1e-15);
        prop_assert!((0.0..=1.0 + 1e-15).contains(&after));
    }

    #[test]
    fn psi_preserves_order_and_membership(
        u in prop::collection::vec(1e-9..1.0 - 1e-9f64, 3),
        t in prop::collection::vec(0.0..1.0f64, 3),
        fail in points(3, 3),
        safe in points(3, 3),
    ) {
        let v: Vec<f64> = u.iter().zip(&t).map(|(a, s)| a + (1.0 - a) * s * 0.999).collect();
        prop_assert!(dominates(&u, &v).unwrap());
        prop_assert!(dominates(&psi(&u), &psi(&v)).unwrap());
        let region = StaircaseRegion::from_points(3, &fail, &safe);
        let back = psi_inv(&psi(&u));
        for (a, b) in u.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        prop_assert_eq!(Region::contains(&region, &u), Region::contains(&region, &back));
    }

    #[test]
    fn q2_ignores_common_offsets(
        y in prop::collection::vec(-5.0..5.0f64, 3..20),
        noise in prop::collection::vec(-1.0..1.0f64, 20),
        c in -100.0..100.0f64,
    ) {
        prop_assume!(y.iter().any(|v| (v - y[0]).abs() > 1e-3));
        let y_hat: Vec<f64> = y.iter().zip(&noise).map(|(a, e)| a + e).collect();
        let base = q2(&y, &y_hat).unwrap();
        let ys: Vec<f64> = y.iter().map(|v| v + c).collect();
        let hs: Vec<f64> = y_hat.iter().map(|v| v + c).collect();
        prop_assert!((q2(&ys, &hs).unwrap() - base).abs() < 1e-8 * (1.0 + base.abs()));
    }

    #[test]
    fn uniform_shifts_decide_dominance(
        b in prop::collection::vec(-3.0..3.0f64, 1..30),
        c in 1e-6..2.0f64,
    ) {
        let w = vec![1.0 / b.len() as f64; b.len()];
        let lower: Vec<f64> = b.iter().map(|v| v - c).collect();
        let upper: Vec<f64> = b.iter().map(|v| v + c).collect();
        prop_assert!(check_fsd(&lower, &b, &w, Direction::ConservativeLow).unwrap() <= 0.0);
        prop_assert_eq!(check_fsd(&b, &b, &w, Direction::ConservativeLow).unwrap(), 0.0);
        prop_assert!(check_fsd(&upper, &b, &w, Direction::ConservativeLow).unwrap() > 0.0);
        prop_assert!(check_fsd(&upper, &b, &w, Direction::ConservativeHigh).unwrap() <= 0.0);
    }

    #[test]
    fn shifted_predictions_lie_below_targets(
        pairs in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 2..50),
    ) {
        let (preds, targets): (Vec<f64>, Vec<f64>) = pairs.iter().cloned().unzip();
        let theta = shift_below(&preds, &targets);
        let residuals: Vec<f64> = pairs.iter().map(|(p, g)| p - g).collect();
        prop_assert!(theta <= 0.0);
        prop_assert!(shift_from_residuals(&residuals) - theta <= 1e-12);
        for (p, g) in &pairs {
            prop_assert!(p + theta <= *g);
        }
    }

    #[test]
    fn model_files_round_trip(
        params in prop::collection::vec(-1e6..1e6f64, 6),
        offset in -10.0..10.0f64,
        scale in 1e-3..10.0f64,
        theta in -5.0..=0.0f64,
        n_test in 2u64..100_000,
    ) {
        let base = RegressionSurrogate::from_parts(
            SurrogateFamily::PolynomialTotalDegree { degree: 2 }, 2, params, offset, scale,
        ).unwrap();
        let m = ShiftedSurrogate {
            base,
            theta,
            certificate: Some(Certificate { n_test, alpha: 0.05, c: 6.0, bernstein_bound: 0.5 }),
        };
        prop_assert_eq!(load_model(&save_model(&m)).unwrap(), m);
    }

    #[test]
    fn quantiles_invert_cdfs(u in 1e-6..1.0 - 1e-6f64, a in 1.0..8.0f64, b in 1.0..20.0f64) {
        let x = gamma_quantile(u, a).unwrap();
        prop_assert!((gamma_cdf(x, a).unwrap() - u).abs() < 1e-8);
        let x = beta_quantile(u, a, b).unwrap();
        prop_assert!((beta_cdf(x, a, b).unwrap() - u).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dyadic_bounds_contain_and_nest(y in 0.05..1.95f64, budget in 1u64..400) {
        let toy = make_linear_toy(2, y).unwrap();
        let run = refine(&toy.function, 2.0, budget, 12).unwrap();
        let p = irwin_hall_cdf(2, y);
        prop_assert!(run.bounds.contains(p));
        for w in run.trace.windows(2) {
            prop_assert!(w[1].p_lower >= w[0].p_lower && w[1].p_upper <= w[0].p_upper);
        }
    }

    #[test]
    fn sequential_bounds_nest_and_sandwich(y in 0.1..1.9f64, seed in 0u64..1000) {
        let toy = make_linear_toy(2, y).unwrap();
        let mut rng = RandomStream::new(seed, 0);
        let options = BounderOptions { selection: Selection::Uniform, ..Default::default() };
        let run = sequential_bounder_with(&toy.function, 25, &mut RejectionSampler::default(), &options, &mut rng).unwrap();
        for w in run.bounds.windows(2) {
            prop_assert!(w[1].lower >= w[0].lower && w[1].upper <= w[0].upper);
        }
        prop_assert!(run.final_bounds().contains(toy.p_exact));
        // sample each union and check the sign of g - y
        let mut probe = RandomStream::new(seed, 1);
        use rand::Rng;
        for _ in 0..500 {
            let x = [probe.random::<f64>(), probe.random::<f64>()];
            let g = x[0] + x[1];
            if run.region.in_fail_union(&x) {
                prop_assert!(g <= y);
            }
            if run.region.in_safe_union(&x) {
                prop_assert!(g >= y);
            }
        }
        prop_assert!(run.design.labels.iter().zip(&run.design.values).all(|(l, v)| (*l == Label::Fail) == (*v < y)));
    }
}
