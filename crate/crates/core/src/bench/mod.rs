//! Benchmark problems with exactly known failure probability.
//!
//! Benchmarks are addressable by name, e.g. `example1:d=3:p=5e-3`,
//! `linear:d=2:y=0.5` or `lipschitz1d:p=2.1e-3`.

pub mod special;

use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::estimate::BlackBoxFunction;

pub use special::{
    beta_cdf, beta_quantile, gamma_cdf, gamma_quantile, normal_cdf, normal_pdf, normal_quantile,
};

/// A black-box problem whose failure probability is known by construction.
pub struct ToyProblem {
    pub name: String,
    pub d: usize,
    pub p_exact: f64,
    pub function: BlackBoxFunction<f64>,
    /// `+1` for coordinates used as-is, `-1` for coordinates reflected
    /// `x -> 1 - x` to make the function globally increasing.
    pub orientation: Vec<i8>,
    /// Sup-norm Lipschitz constant, when one is known in closed form.
    pub lipschitz: Option<f64>,
    pub description: String,
}

impl fmt::Debug for ToyProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ToyProblem")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("p_exact", &self.p_exact)
            .field("orientation", &self.orientation)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl ToyProblem {
    /// A copy with a fresh query counter, for independent replications.
    pub fn replicate(&self) -> Self {
        Self {
            name: self.name.clone(),
            d: self.d,
            p_exact: self.p_exact,
            function: self.function.fresh(),
            orientation: self.orientation.clone(),
            lipschitz: self.lipschitz,
            description: self.description.clone(),
        }
    }
}

/// Shape parameters `(2, (d+1)(d+2)/2 - 3)` of the Beta law of
/// `Z_1 / (Z_1 + ... + Z_d)` with `Z_i ~ Gamma(i + 1, 1)`.
pub fn example1_beta_shapes(d: usize) -> (f64, f64) {
    (2.0, ((d + 1) * (d + 2)) as f64 / 2.0 - 3.0)
}

/// `Z_1 / (Z_1 + sum_{i>=2} Z_i)` with the usual conventions at infinities.
fn gamma_ratio(z: &[f64]) -> f64 {
    let z1 = z[0];
    let rest: f64 = z[1..].iter().sum();
    if z1 == 0.0 {
        0.0
    } else if z1.is_infinite() {
        if rest.is_infinite() {
            0.5
        } else {
            1.0
        }
    } else if rest.is_infinite() {
        0.0
    } else {
        z1 / (z1 + rest)
    }
}

/// The Gamma-ratio benchmark in dimension `d` at failure level `p`.
///
/// `g(x) = V(T^{-1}(x')) - q` where `Z_i = F^{-1}_{Gamma(i+1)}`, coordinates
/// `2..d` are reflected so `g` is globally increasing, `q` is the `p`-quantile
/// of the Beta law of `V`, and the threshold is 0.
pub fn make_example1(d: usize, p: f64) -> Result<ToyProblem> {
    if d < 2 {
        return Err(invalid(format!("example1 needs d >= 2, got {d}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("example1 needs p in (0, 1), got {p}")));
    }
    let (a, b) = example1_beta_shapes(d);
    let q = beta_quantile(p, a, b)?;
    let shapes: Vec<f64> = (1..=d).map(|i| (i + 1) as f64).collect();
    let evaluator = move |x: &[f64]| {
        let mut z = [0.0f64; 32];
        let z = &mut z[..x.len().min(32)];
        if z.len() < x.len() {
            return f64::NAN;
        }
        for (i, (zi, &xi)) in z.iter_mut().zip(x).enumerate() {
            let u = if i == 0 { xi } else { 1.0 - xi };
            *zi = gamma_quantile(u.clamp(0.0, 1.0), shapes[i]).unwrap_or(f64::NAN);
        }
        gamma_ratio(z) - q
    };
    let mut orientation = vec![-1i8; d];
    orientation[0] = 1;
    Ok(ToyProblem {
        name: format!("example1:d={d}:p={p:e}"),
        d,
        p_exact: p,
        function: BlackBoxFunction::new(d, 0.0, evaluator),
        orientation,
        lipschitz: None,
        description: format!(
            "Gamma-ratio benchmark, V ~ Beta({a}, {b}), threshold at its {p:e}-quantile {q:.6}"
        ),
    })
}

/// CDF of the sum of `d` iid uniforms (Irwin-Hall) at `y`.
pub fn irwin_hall_cdf(d: usize, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y >= d as f64 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut binom = 1.0;
    let mut fact = 1.0;
    for k in 1..=d {
        fact *= k as f64;
    }
    for k in 0..=(y.floor() as usize).min(d) {
        if k > 0 {
            binom *= (d - k + 1) as f64 / k as f64;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * binom * (y - k as f64).powi(d as i32);
    }
    (sum / fact).clamp(0.0, 1.0)
}

/// `g(x) = x_1 + ... + x_d` against threshold `y`; sup-norm Lipschitz constant `d`.
pub fn make_linear_toy(d: usize, y: f64) -> Result<ToyProblem> {
    if d == 0 {
        return Err(invalid("linear toy needs d >= 1"));
    }
    let p = irwin_hall_cdf(d, y);
    Ok(ToyProblem {
        name: format!("linear:d={d}:y={y}"),
        d,
        p_exact: p,
        function: BlackBoxFunction::new(d, y, |x: &[f64]| x.iter().sum()),
        orientation: vec![1; d],
        lipschitz: Some(d as f64),
        description: format!("sum of coordinates below {y}"),
    })
}

/// `g(x) = x` on `[0, 1]` with threshold `p`, so the failure probability is `p`.
pub fn make_lipschitz_toy_1d(p: f64) -> Result<ToyProblem> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("lipschitz1d needs p in (0, 1), got {p}")));
    }
    Ok(ToyProblem {
        name: format!("lipschitz1d:p={p:e}"),
        d: 1,
        p_exact: p,
        function: BlackBoxFunction::new(1, p, |x: &[f64]| x[0]),
        orientation: vec![1],
        lipschitz: Some(1.0),
        description: format!("identity on [0, 1] below {p:e}"),
    })
}

/// Benchmark families known to [`from_name`], with their parameter syntax.
pub fn registry() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "example1:d=<int>=2..:p=<real in (0,1)>",
            "Gamma-ratio benchmark, globally increasing after reflection",
        ),
        (
            "linear:d=<int>:y=<real>",
            "sum of coordinates, Lipschitz constant d, Irwin-Hall exact p",
        ),
        (
            "lipschitz1d:p=<real in (0,1)>",
            "identity on [0,1], Lipschitz constant 1",
        ),
    ]
}

/// Build a benchmark from its registry name.
pub fn from_name(name: &str) -> Result<ToyProblem> {
    let mut parts = name.trim().split(':');
    let family = parts.next().unwrap_or_default();
    let mut d: Option<usize> = None;
    let mut p: Option<f64> = None;
    let mut y: Option<f64> = None;
    for part in parts {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| invalid(format!("benchmark parameter `{part}` is not key=value")))?;
        let bad = || invalid(format!("benchmark parameter `{part}` has a bad value"));
        match key.trim() {
            "d" => d = Some(value.trim().parse().map_err(|_| bad())?),
            "p" => p = Some(value.trim().parse().map_err(|_| bad())?),
            "y" => y = Some(value.trim().parse().map_err(|_| bad())?),
            other => return Err(invalid(format!("unknown benchmark parameter `{other}`"))),
        }
    }
    let need = |what: &str| -> Error { invalid(format!("benchmark `{name}` is missing `{what}`")) };
    match family {
        "example1" => make_example1(d.ok_or_else(|| need("d"))?, p.ok_or_else(|| need("p"))?),
        "linear" => make_linear_toy(d.ok_or_else(|| need("d"))?, y.ok_or_else(|| need("y"))?),
        "lipschitz1d" => make_lipschitz_toy_1d(p.ok_or_else(|| need("p"))?),
        other => Err(invalid(format!("unknown benchmark family `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;
    use rand::Rng;

    #[test]
    fn example1_shapes() {
        assert_eq!(example1_beta_shapes(2), (2.0, 3.0));
        assert_eq!(example1_beta_shapes(3), (2.0, 7.0));
        assert_eq!(example1_beta_shapes(4), (2.0, 12.0));
    }

    #[test]
    fn linear_toy_exact_values() {
        assert!((make_linear_toy(2, 0.5).unwrap().p_exact - 0.125).abs() < 1e-15);
        assert!((make_linear_toy(3, 1.0).unwrap().p_exact - 1.0 / 6.0).abs() < 1e-15);
        assert!((make_linear_toy(2, 1.5).unwrap().p_exact - 0.875).abs() < 1e-15);
    }

    #[test]
    fn example1_is_increasing_on_dominated_pairs() {
        let mut rng = RandomStream::new(11, 0);
        for d in 2..=4 {
            let toy = make_example1(d, 5e-3).unwrap();
            let mut violations = 0;
            for _ in 0..10_000 {
                let u: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                let v: Vec<f64> = u.iter().map(|&ui| ui + (1.0 - ui) * rng.random::<f64>()).collect();
                if toy.function.eval_uncounted(&u) > toy.function.eval_uncounted(&v) {
                    violations += 1;
                }
            }
            assert_eq!(violations, 0, "d={d}");
        }
    }

    #[test]
    fn example1_edges_are_finite() {
        let toy = make_example1(3, 0.05).unwrap();
        for x in [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 1.0]] {
            assert!(toy.function.eval_uncounted(&x).is_finite());
        }
    }

    #[test]
    fn registry_round_trip() {
        let toy = from_name("example1:d=3:p=5e-3").unwrap();
        assert_eq!(toy.d, 3);
        assert_eq!(toy.p_exact, 5e-3);
        assert_eq!(toy.orientation, vec![1, -1, -1]);
        let toy = from_name("lipschitz1d:p=2.1e-3").unwrap();
        assert_eq!(toy.lipschitz, Some(1.0));
        assert!(from_name("linear:d=2").is_err());
        assert!(from_name("nosuch:d=2").is_err());
        assert!(from_name("example1:d=1:p=0.1").is_err());
    }
}
