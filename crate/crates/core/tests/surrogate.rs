use rarebound::bench::make_example1;
use rarebound::surrogate::{
    conservative_shift, fit, load_model, model_q2, q2, save_model, Dataset, SurrogateFamily,
};
use rarebound::{surrogate_mc_estimate, Error, RandomStream};

#[test]
fn realizable_quadratic_is_recovered() {
    let mut rng = RandomStream::new(1, 0);
    let g = |x: &[f64]| 1.0 - 2.0 * x[0] + 0.5 * x[1] + 3.0 * x[0] * x[1] - x[1] * x[1];
    let data = Dataset::sample(2, 40, g, &mut rng);
    let model = fit(&SurrogateFamily::PolynomialTotalDegree { degree: 2 }, &data, &mut rng).unwrap();
    for (x, y) in data.x.iter().zip(&data.y) {
        assert!((model.predict(x) - y).abs() < 1e-8);
    }
}

#[test]
fn constant_targets_fit_a_constant_and_flag_q2() {
    let mut rng = RandomStream::new(2, 0);
    let data = Dataset::sample(2, 30, |_| 0.7, &mut rng);
    let model = fit(&SurrogateFamily::PolynomialTotalDegree { degree: 2 }, &data, &mut rng).unwrap();
    for x in [[0.1, 0.9], [0.5, 0.5], [1.0, 0.0]] {
        assert!((model.predict(&x) - 0.7).abs() < 1e-10);
    }
    assert_eq!(model_q2(&model, &data), Err(Error::ZeroVariance));
}

#[test]
fn small_networks_reach_q2_of_point_nine() {
    let toy = make_example1(2, 0.1).unwrap();
    let g = |x: &[f64]| toy.function.eval_uncounted(x);
    let family = SurrogateFamily::SmallFeedforward { hidden: vec![4, 4] };
    let seeds = 10;
    let good = (0..seeds)
        .filter(|&s| {
            let mut rng = RandomStream::new(40, s);
            let train = Dataset::sample(2, 100, g, &mut rng);
            let valid = Dataset::sample(2, 500, g, &mut rng);
            let model = fit(&family, &train, &mut rng).unwrap();
            model_q2(&model, &valid).unwrap() >= 0.9
        })
        .count();
    assert!(good * 10 >= seeds as usize * 8, "{good}/{seeds} seeds reach Q2 0.9");
}

#[test]
fn shifted_surrogate_certifies_and_estimates_monotonically() {
    let toy = make_example1(2, 0.1).unwrap();
    let g = |x: &[f64]| toy.function.eval_uncounted(x);
    let mut rng = RandomStream::new(3, 0);
    let train = Dataset::sample(2, 100, g, &mut rng);
    let test = Dataset::sample(2, 200, g, &mut rng);
    let model = fit(&SurrogateFamily::PolynomialTotalDegree { degree: 4 }, &train, &mut rng).unwrap();
    let shifted = conservative_shift(&model, &test, 0.05, 6.0).unwrap();
    assert!(shifted.theta <= 0.0);
    for (x, y) in test.x.iter().zip(&test.y) {
        assert!(shifted.predict(x) <= *y);
    }
    // P(ĝ + θ < 0) on a common stream grows as θ decreases
    let mut last = -1.0;
    for k in 0..=20 {
        let theta = -0.01 * k as f64;
        let mut stream = RandomStream::new(9, 9);
        let est = surrogate_mc_estimate(|x: &[f64]| model.predict(x) + theta, 2, 0.0, 20_000, &mut stream).unwrap();
        assert!(est.p_hat >= last);
        last = est.p_hat;
    }
    let back = load_model(&save_model(&shifted)).unwrap();
    for x in &test.x {
        assert_eq!(back.predict(x).to_bits(), shifted.predict(x).to_bits());
    }
    let preds: Vec<f64> = test.x.iter().map(|x| shifted.predict(x)).collect();
    assert!(q2(&test.y, &preds).unwrap() < model_q2(&model, &test).unwrap());
}
