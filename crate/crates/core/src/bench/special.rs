//! Gamma, Beta and standard normal distribution functions and their inverses.
//!
//! Incomplete gamma uses the series for `x < a + 1` and a Lentz continued
//! fraction otherwise; the incomplete beta uses the continued fraction with
//! the usual symmetry switch. Quantiles run safeguarded Newton iterations
//! inside a shrinking bracket.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAX_ITER: usize = 1000;
const QUANTILE_ITER: usize = 200;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn tiny<T: Scalar>() -> T {
    T::min_positive_value() / T::epsilon()
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma<T: Scalar>(x: T) -> T {
    let half = T::lit(0.5);
    if x < half {
        // reflection
        let pi = T::lit(std::f64::consts::PI);
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::lit(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += T::lit(c) / (x + T::lit(i as f64));
    }
    let t = x + T::lit(LANCZOS_G) + half;
    T::lit(0.5 * (2.0 * std::f64::consts::PI).ln()) + (x + half) * t.ln() - t + acc.ln()
}

pub fn ln_beta<T: Scalar>(a: T, b: T) -> T {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete gamma pair `(P(a, x), Q(a, x))`.
pub fn gamma_pq<T: Scalar>(a: T, x: T) -> Result<(T, T)> {
    if !(a > T::zero()) || x < T::zero() || x.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "incomplete gamma needs a > 0, x >= 0 (a = {a}, x = {x})"
        )));
    }
    if x == T::zero() {
        return Ok((T::zero(), T::one()));
    }
    if x.is_infinite() {
        return Ok((T::one(), T::zero()));
    }
    let eps = T::epsilon();
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + T::one() {
        let mut ap = a;
        let mut term = T::one() / a;
        let mut sum = term;
        for _ in 0..MAX_ITER {
            ap += T::one();
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * eps {
                let p = (sum.ln() + log_prefactor).exp().min(T::one());
                return Ok((p, T::one() - p));
            }
        }
        Err(Error::NonConvergence {
            what: "incomplete gamma series",
            iterations: MAX_ITER,
        })
    } else {
        let tiny = tiny::<T>();
        let mut b = x + T::one() - a;
        let mut c = T::one() / tiny;
        let mut d = T::one() / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let an = -T::lit(i as f64) * (T::lit(i as f64) - a);
            b += T::lit(2.0);
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = T::one() / d;
            let delta = d * c;
            h *= delta;
            if (delta - T::one()).abs() < eps {
                let q = (log_prefactor + h.ln()).exp().min(T::one());
                return Ok((T::one() - q, q));
            }
        }
        Err(Error::NonConvergence {
            what: "incomplete gamma continued fraction",
            iterations: MAX_ITER,
        })
    }
}

/// Gamma(shape, 1) CDF, the regularized lower incomplete gamma `P(shape, x)`.
pub fn gamma_cdf<T: Scalar>(x: T, shape: T) -> Result<T> {
    gamma_pq(shape, x).map(|(p, _)| p)
}

pub fn gamma_pdf<T: Scalar>(x: T, shape: T) -> T {
    if x <= T::zero() {
        return if shape == T::one() && x == T::zero() { T::one() } else { T::zero() };
    }
    ((shape - T::one()) * x.ln() - x - ln_gamma(shape)).exp()
}

/// Inverse of [`gamma_cdf`] in `x`.
pub fn gamma_quantile<T: Scalar>(u: T, shape: T) -> Result<T> {
    if !(shape > T::zero()) || !(u >= T::zero() && u <= T::one()) {
        return Err(Error::InvalidArgument(format!(
            "gamma quantile needs shape > 0 and u in [0, 1] (shape = {shape}, u = {u})"
        )));
    }
    if u == T::zero() {
        return Ok(T::zero());
    }
    if u == T::one() {
        return Ok(T::infinity());
    }
    // Wilson-Hilferty start
    let z = normal_quantile(u)?;
    let nine_a = T::lit(9.0) * shape;
    let wh = shape * (T::one() - T::one() / nine_a + z / nine_a.sqrt()).powi(3);
    let mut x = if wh > T::zero() {
        wh
    } else {
        // small-x regime: P(a, x) ~ x^a / Γ(a + 1)
        ((u.ln() + ln_gamma(shape + T::one())) / shape).exp()
    };
    let mut lo = T::zero();
    let mut hi = T::infinity();
    let tol = T::lit(4.0) * T::epsilon();
    for _ in 0..QUANTILE_ITER {
        let (p, q) = gamma_pq(shape, x)?;
        // residual computed on the smaller tail for relative accuracy
        let resid = if u < T::lit(0.5) { p - u } else { (T::one() - u) - q };
        if resid == T::zero() {
            return Ok(x);
        }
        if resid > T::zero() {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        let dens = gamma_pdf(x, shape);
        let mut next = if dens > T::zero() { x - resid / dens } else { T::nan() };
        if !(next > lo && next < hi) || next.is_nan() {
            next = if hi.is_finite() {
                (lo + hi) / T::lit(2.0)
            } else {
                x * T::lit(2.0) + T::one()
            };
        }
        if (next - x).abs() <= tol * next.abs() {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NonConvergence {
        what: "gamma quantile",
        iterations: QUANTILE_ITER,
    })
}

fn beta_cf<T: Scalar>(x: T, a: T, b: T) -> Result<T> {
    let tiny = tiny::<T>();
    let eps = T::epsilon();
    let one = T::one();
    let qab = a + b;
    let qap = a + one;
    let qam = a - one;
    let mut c = one;
    let mut d = one - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = one / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = T::lit(m as f64);
        let m2 = T::lit(2.0) * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = one + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = one + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = one / d;
        let delta = d * c;
        h *= delta;
        if (delta - one).abs() < eps {
            return Ok(h);
        }
    }
    Err(Error::NonConvergence {
        what: "incomplete beta continued fraction",
        iterations: MAX_ITER,
    })
}

/// Beta(a, b) CDF, the regularized incomplete beta `I_x(a, b)`.
pub fn beta_cdf<T: Scalar>(x: T, a: T, b: T) -> Result<T> {
    if !(a > T::zero() && b > T::zero()) || x.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "incomplete beta needs a, b > 0 (a = {a}, b = {b})"
        )));
    }
    if x <= T::zero() {
        return Ok(T::zero());
    }
    if x >= T::one() {
        return Ok(T::one());
    }
    let one = T::one();
    let ln_front = a * x.ln() + b * (one - x).ln() - ln_beta(a, b);
    if x < (a + one) / (a + b + T::lit(2.0)) {
        Ok((ln_front.exp() * beta_cf(x, a, b)? / a).min(one))
    } else {
        Ok((one - ln_front.exp() * beta_cf(one - x, b, a)? / b).max(T::zero()))
    }
}

pub fn beta_pdf<T: Scalar>(x: T, a: T, b: T) -> T {
    if x <= T::zero() || x >= T::one() {
        return T::zero();
    }
    ((a - T::one()) * x.ln() + (b - T::one()) * (T::one() - x).ln() - ln_beta(a, b)).exp()
}

/// Inverse of [`beta_cdf`] in `x`.
pub fn beta_quantile<T: Scalar>(u: T, a: T, b: T) -> Result<T> {
    if !(a > T::zero() && b > T::zero()) || !(u >= T::zero() && u <= T::one()) {
        return Err(Error::InvalidArgument(format!(
            "beta quantile needs a, b > 0 and u in [0, 1] (a = {a}, b = {b}, u = {u})"
        )));
    }
    if u == T::zero() {
        return Ok(T::zero());
    }
    if u == T::one() {
        return Ok(T::one());
    }
    let mut lo = T::zero();
    let mut hi = T::one();
    let mut x = (a / (a + b)).max(T::lit(1e-3)).min(T::lit(1.0 - 1e-3));
    let tol = T::lit(4.0) * T::epsilon();
    for _ in 0..QUANTILE_ITER {
        let resid = beta_cdf(x, a, b)? - u;
        if resid == T::zero() {
            return Ok(x);
        }
        if resid > T::zero() {
            hi = x;
        } else {
            lo = x;
        }
        let dens = beta_pdf(x, a, b);
        let mut next = if dens > T::zero() { x - resid / dens } else { T::nan() };
        if !(next > lo && next < hi) || next.is_nan() {
            next = (lo + hi) / T::lit(2.0);
        }
        if (next - x).abs() <= tol * next.abs().max(T::min_positive_value()) {
            return Ok(next);
        }
        if hi - lo <= tol * hi {
            return Ok((lo + hi) / T::lit(2.0));
        }
        x = next;
    }
    Err(Error::NonConvergence {
        what: "beta quantile",
        iterations: QUANTILE_ITER,
    })
}

/// Standard normal CDF `Φ(z)`.
pub fn normal_cdf<T: Scalar>(z: T) -> T {
    if z.is_nan() {
        return z;
    }
    if z.is_infinite() {
        return if z > T::zero() { T::one() } else { T::zero() };
    }
    let half = T::lit(0.5);
    // Φ(z) = Q(1/2, z²/2) / 2 for z < 0; the pair never fails for finite input
    let (p, q) = gamma_pq(half, z * z * half).unwrap_or((T::one(), T::zero()));
    if z < T::zero() {
        half * q
    } else {
        half + half * p
    }
}

pub fn normal_pdf<T: Scalar>(z: T) -> T {
    T::lit(1.0 / (2.0 * std::f64::consts::PI).sqrt()) * (-z * z / T::lit(2.0)).exp()
}

/// Standard normal quantile `Φ⁻¹(u)`: Acklam's rational start refined by
/// Halley steps on [`normal_cdf`].
pub fn normal_quantile<T: Scalar>(u: T) -> Result<T> {
    if !(u >= T::zero() && u <= T::one()) {
        return Err(Error::InvalidArgument(format!("normal quantile of {u}")));
    }
    if u == T::zero() {
        return Ok(T::neg_infinity());
    }
    if u == T::one() {
        return Ok(T::infinity());
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let uf = u.to_f64_lossy();
    let p_low = 0.02425;
    let z0 = if uf < p_low {
        let q = (-2.0 * uf.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if uf <= 1.0 - p_low {
        let q = uf - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - uf).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let mut z = T::lit(z0);
    for _ in 0..3 {
        // residual on the smaller tail keeps relative accuracy near 0 and 1
        let e = if z < T::zero() {
            normal_cdf(z) - u
        } else {
            (T::one() - u) - normal_cdf(-z)
        };
        let dens = normal_pdf(z);
        if dens <= T::zero() || e == T::zero() {
            break;
        }
        let step = e / dens;
        z -= step / (T::one() + z * step / T::lit(2.0));
    }
    Ok(z)
}
