//! Regression surrogate families and their fitting.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::rng::RandomStream;

/// A labelled training or test set.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        if let Some(first) = x.first() {
            if let Some(bad) = x.iter().find(|p| p.len() != first.len()) {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    found: bad.len(),
                });
            }
        }
        Ok(Self { x, y })
    }

    /// `n` uniform points on the cube labelled by `f`.
    pub fn sample<F: Fn(&[f64]) -> f64>(d: usize, n: usize, f: F, rng: &mut RandomStream) -> Self {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
            .collect();
        let y = x.iter().map(|p| f(p)).collect();
        Self { x, y }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.x.first().map(Vec::len)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SurrogateFamily {
    /// All monomials of total degree at most `degree` in `2x - 1`.
    PolynomialTotalDegree { degree: usize },
    /// Logistic hidden layers of the given widths and a linear output.
    SmallFeedforward { hidden: Vec<usize> },
}

impl SurrogateFamily {
    pub fn param_count(&self, d: usize) -> usize {
        match self {
            Self::PolynomialTotalDegree { degree } => binomial(d + degree, *degree),
            Self::SmallFeedforward { hidden } => {
                let mut prev = d;
                let mut n = 0;
                for &h in hidden.iter().chain(std::iter::once(&1)) {
                    n += h * prev + h;
                    prev = h;
                }
                n
            }
        }
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Exponent vectors of all monomials of total degree `<= degree`, by
/// increasing degree.
pub fn monomial_exponents(d: usize, degree: usize) -> Vec<Vec<u32>> {
    fn rec(d: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == d - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for e in (0..=left).rev() {
            cur.push(e);
            rec(d, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for total in 0..=degree as u32 {
        rec(d, total, &mut Vec::with_capacity(d), &mut out);
    }
    out
}

fn poly_features(x: &[f64], exps: &[Vec<u32>]) -> Vec<f64> {
    let u: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
    exps.iter()
        .map(|e| e.iter().zip(&u).map(|(&k, &ui)| ui.powi(k as i32)).product())
        .collect()
}

/// Options for gradient training of the network family.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Stop once the standardized weighted MSE falls below this.
    pub tolerance: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 4000,
            learning_rate: 0.02,
            tolerance: 1e-6,
        }
    }
}

/// A fitted member of a [`SurrogateFamily`].
///
/// Predictions are `offset + scale * h_η(x)` where `h_η` is the raw family
/// output; the affine part standardizes network targets and is the identity
/// for polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionSurrogate {
    pub family: SurrogateFamily,
    pub dimension: usize,
    pub params: Vec<f64>,
    pub offset: f64,
    pub scale: f64,
    pub fitted: bool,
    exps: Vec<Vec<u32>>,
}

impl RegressionSurrogate {
    /// Unfitted model with zero parameters.
    pub fn new(family: SurrogateFamily, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(invalid("surrogate dimension must be positive"));
        }
        if let SurrogateFamily::SmallFeedforward { hidden } = &family {
            if hidden.contains(&0) {
                return Err(invalid("hidden layers must be non-empty"));
            }
        }
        let exps = match &family {
            SurrogateFamily::PolynomialTotalDegree { degree } => monomial_exponents(dimension, *degree),
            SurrogateFamily::SmallFeedforward { .. } => Vec::new(),
        };
        let n = family.param_count(dimension);
        Ok(Self {
            family,
            dimension,
            params: vec![0.0; n],
            offset: 0.0,
            scale: 1.0,
            fitted: false,
            exps,
        })
    }

    /// Rebuild from stored parts.
    pub fn from_parts(
        family: SurrogateFamily,
        dimension: usize,
        params: Vec<f64>,
        offset: f64,
        scale: f64,
    ) -> Result<Self> {
        let mut m = Self::new(family, dimension)?;
        if params.len() != m.params.len() {
            return Err(Error::DimensionMismatch {
                expected: m.params.len(),
                found: params.len(),
            });
        }
        m.params = params;
        m.offset = offset;
        m.scale = scale;
        m.fitted = true;
        Ok(m)
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.offset + self.scale * self.raw(x)
    }

    pub fn predict_all(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    fn raw(&self, x: &[f64]) -> f64 {
        match &self.family {
            SurrogateFamily::PolynomialTotalDegree { .. } => poly_features(x, &self.exps)
                .iter()
                .zip(&self.params)
                .map(|(f, b)| f * b)
                .sum(),
            SurrogateFamily::SmallFeedforward { hidden } => {
                forward(&self.params, self.dimension, hidden, x).0
            }
        }
    }

    /// Adds `upstream * ∂predict(x)/∂params` to `grad`.
    pub fn accumulate_gradient(&self, x: &[f64], upstream: f64, grad: &mut [f64]) {
        let g = upstream * self.scale;
        match &self.family {
            SurrogateFamily::PolynomialTotalDegree { .. } => {
                for (gi, f) in grad.iter_mut().zip(poly_features(x, &self.exps)) {
                    *gi += g * f;
                }
            }
            SurrogateFamily::SmallFeedforward { hidden } => {
                backward(&self.params, self.dimension, hidden, x, g, grad);
            }
        }
    }
}

fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Output and per-layer activations (input first).
fn forward(params: &[f64], d: usize, hidden: &[usize], x: &[f64]) -> (f64, Vec<Vec<f64>>) {
    let mut acts: Vec<Vec<f64>> = vec![x.iter().map(|v| 2.0 * v - 1.0).collect()];
    let mut off = 0;
    let mut prev = d;
    for &h in hidden {
        let a = acts.last().expect("input layer");
        let w = &params[off..off + h * prev];
        let b = &params[off + h * prev..off + h * prev + h];
        let next: Vec<f64> = (0..h)
            .map(|j| logistic(b[j] + (0..prev).map(|k| w[j * prev + k] * a[k]).sum::<f64>()))
            .collect();
        off += h * prev + h;
        prev = h;
        acts.push(next);
    }
    let a = acts.last().expect("last layer");
    let out = params[off + prev] + (0..prev).map(|k| params[off + k] * a[k]).sum::<f64>();
    (out, acts)
}

fn backward(params: &[f64], d: usize, hidden: &[usize], x: &[f64], upstream: f64, grad: &mut [f64]) {
    let (_, acts) = forward(params, d, hidden, x);
    // offsets of each layer's block
    let mut offs = Vec::with_capacity(hidden.len() + 1);
    let mut off = 0;
    let mut prev = d;
    for &h in hidden {
        offs.push((off, prev, h));
        off += h * prev + h;
        prev = h;
    }
    offs.push((off, prev, 1));
    // output layer
    let (o, n_in, _) = offs[hidden.len()];
    let a = &acts[hidden.len()];
    for k in 0..n_in {
        grad[o + k] += upstream * a[k];
    }
    grad[o + n_in] += upstream;
    let mut back: Vec<f64> = (0..n_in).map(|k| upstream * params[o + k]).collect();
    for l in (0..hidden.len()).rev() {
        let (o, n_in, h) = offs[l];
        let out = &acts[l + 1];
        let inp = &acts[l];
        let delta: Vec<f64> = (0..h).map(|j| back[j] * out[j] * (1.0 - out[j])).collect();
        for j in 0..h {
            for k in 0..n_in {
                grad[o + j * n_in + k] += delta[j] * inp[k];
            }
            grad[o + h * n_in + j] += delta[j];
        }
        back = (0..n_in)
            .map(|k| (0..h).map(|j| delta[j] * params[o + j * n_in + k]).sum())
            .collect();
    }
}

/// Adam optimizer state.
pub(crate) struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    pub lr: f64,
}

impl Adam {
    pub(crate) fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    pub(crate) fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

fn check_weights(w: &[f64], n: usize) -> Result<()> {
    if w.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: w.len(),
        });
    }
    if w.iter().any(|&v| !(v >= 0.0)) || !(w.iter().sum::<f64>() > 0.0) {
        return Err(invalid("weights must be non-negative with positive sum"));
    }
    Ok(())
}

/// Fit with equal weights and default training options.
pub fn fit(family: &SurrogateFamily, data: &Dataset, rng: &mut RandomStream) -> Result<RegressionSurrogate> {
    let w = vec![1.0 / data.len().max(1) as f64; data.len()];
    fit_weighted(family, data, &w, &TrainOptions::default(), rng)
}

/// Weighted least-squares fit.
///
/// Polynomials are solved exactly; networks are trained by full-batch Adam
/// from a Glorot-uniform initialization drawn from `rng`.
pub fn fit_weighted(
    family: &SurrogateFamily,
    data: &Dataset,
    weights: &[f64],
    options: &TrainOptions,
    rng: &mut RandomStream,
) -> Result<RegressionSurrogate> {
    let d = data.dimension().ok_or_else(|| invalid("training set is empty"))?;
    check_weights(weights, data.len())?;
    let mut model = RegressionSurrogate::new(family.clone(), d)?;
    match family {
        SurrogateFamily::PolynomialTotalDegree { .. } => {
            let cols = model.params.len();
            let rows = data.len();
            let design = DMatrix::from_fn(rows, cols, |i, j| {
                weights[i].sqrt() * poly_features(&data.x[i], &model.exps)[j]
            });
            let rhs = DVector::from_fn(rows, |i, _| weights[i].sqrt() * data.y[i]);
            model.params = least_squares(design, rhs)?;
        }
        SurrogateFamily::SmallFeedforward { hidden } => {
            let total: f64 = weights.iter().sum();
            let w: Vec<f64> = weights.iter().map(|v| v / total).collect();
            let mean: f64 = w.iter().zip(&data.y).map(|(a, b)| a * b).sum();
            let var: f64 = w.iter().zip(&data.y).map(|(a, b)| a * (b - mean).powi(2)).sum();
            model.offset = mean;
            model.scale = if var > 0.0 { var.sqrt() } else { 1.0 };
            init_glorot(&mut model.params, d, hidden, rng);
            train_network(&mut model, data, &w, options);
        }
    }
    model.fitted = true;
    Ok(model)
}

fn least_squares(design: DMatrix<f64>, rhs: DVector<f64>) -> Result<Vec<f64>> {
    let (rows, cols) = design.shape();
    let svd = design.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = smax * 1e-10 * rows.max(cols) as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < cols {
        return Err(Error::SingularDesign { rank, columns: cols });
    }
    let sol = svd
        .solve(&rhs, tol)
        .map_err(|e| invalid(format!("least squares failed: {e}")))?;
    Ok(sol.iter().cloned().collect())
}

fn init_glorot(params: &mut [f64], d: usize, hidden: &[usize], rng: &mut RandomStream) {
    let mut off = 0;
    let mut prev = d;
    for &h in hidden.iter().chain(std::iter::once(&1)) {
        let limit = (6.0 / (prev + h) as f64).sqrt();
        for p in &mut params[off..off + h * prev] {
            *p = rng.random_range(-limit..limit);
        }
        for p in &mut params[off + h * prev..off + h * prev + h] {
            *p = 0.0;
        }
        off += h * prev + h;
        prev = h;
    }
}

/// Minimizes the standardized weighted MSE.
fn train_network(model: &mut RegressionSurrogate, data: &Dataset, w: &[f64], options: &TrainOptions) {
    let n = model.params.len();
    let mut adam = Adam::new(n, options.learning_rate);
    let mut grad = vec![0.0; n];
    let inv_scale = 1.0 / model.scale;
    for _ in 0..options.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for ((x, &y), &wi) in data.x.iter().zip(&data.y).zip(w) {
            let r = (model.predict(x) - y) * inv_scale;
            loss += wi * r * r;
            // derivative of the standardized loss w.r.t. the prediction
            model.accumulate_gradient(x, 2.0 * wi * r * inv_scale, &mut grad);
        }
        if loss < options.tolerance {
            break;
        }
        adam.step(&mut model.params, &grad);
    }
}
