//! Exact volumes of unions of orthants anchored at the origin (or at the
//! top corner, by reflection).
//!
//! The union `U [0, x_i]` is measured by slab decomposition on the last
//! coordinate: between consecutive sorted values the cross-section is a
//! fixed union in one dimension less, whose area is maintained incrementally
//! from exclusive contributions of the points entering the sweep. Dominated
//! generators are pruned at every level. Only ring operations and
//! comparisons are used, so the result is exact over rationals.

use std::cmp::Ordering;

use rand::Rng;

use crate::scalar::{ExactRing, Scalar};

/// Largest dimension handled exactly by default; beyond it callers fall back
/// to Monte Carlo.
pub const MAX_EXACT_DIMENSION: usize = 6;

fn cmp<T: PartialOrd>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// `u <= v` in the first `dim` coordinates.
#[inline]
fn le_prefix<T: PartialOrd>(u: &[T], v: &[T], dim: usize) -> bool {
    u[..dim].iter().zip(&v[..dim]).all(|(a, b)| a <= b)
}

fn clamp_unit<T: ExactRing>(v: &T) -> T {
    if *v < T::zero() {
        T::zero()
    } else if *v > T::one() {
        T::one()
    } else {
        v.clone()
    }
}

/// Keep only generators not dominated by another in the first `dim`
/// coordinates (one copy of duplicates).
fn prune<T: ExactRing>(points: &mut Vec<Vec<T>>, dim: usize) {
    let mut keep = vec![true; points.len()];
    for i in 0..points.len() {
        if !keep[i] {
            continue;
        }
        for j in 0..points.len() {
            if i == j || !keep[j] {
                continue;
            }
            if le_prefix(&points[j], &points[i], dim) {
                // i covers j
                keep[j] = false;
            }
        }
    }
    let mut k = 0;
    points.retain(|_| {
        let r = keep[k];
        k += 1;
        r
    });
}

fn box_volume<T: ExactRing>(p: &[T], dim: usize) -> T {
    p[..dim].iter().fold(T::one(), |acc, v| acc * v.clone())
}

/// Volume of `U [0, p]` over the first `dim` coordinates; inputs already
/// clamped to the unit cube.
fn union_volume<T: ExactRing>(mut points: Vec<Vec<T>>, dim: usize) -> T {
    match points.len() {
        0 => return T::zero(),
        1 => return box_volume(&points[0], dim),
        _ => {}
    }
    if dim == 1 {
        return points
            .iter()
            .map(|p| p[0].clone())
            .fold(T::zero(), |a, b| if b > a { b } else { a });
    }
    prune(&mut points, dim);
    let last = dim - 1;
    points.sort_by(|a, b| cmp(&b[last], &a[last]));
    if dim == 2 {
        let mut vol = T::zero();
        let mut reach = T::zero();
        for i in 0..points.len() {
            if points[i][0] > reach {
                reach = points[i][0].clone();
            }
            let next = points.get(i + 1).map(|p| p[1].clone()).unwrap_or_else(T::zero);
            vol = vol + reach.clone() * (points[i][1].clone() - next);
        }
        return vol;
    }
    let mut vol = T::zero();
    let mut area = T::zero();
    for i in 0..points.len() {
        area = area + exclusive_contribution(&points[..i], &points[i], last);
        let next = points.get(i + 1).map(|p| p[last].clone()).unwrap_or_else(T::zero);
        vol = vol + area.clone() * (points[i][last].clone() - next);
    }
    vol
}

/// Volume of `[0, p]` not covered by `U_{q in others} [0, q]`, over the first
/// `dim` coordinates.
fn exclusive_contribution<T: ExactRing>(others: &[Vec<T>], p: &[T], dim: usize) -> T {
    let limited: Vec<Vec<T>> = others
        .iter()
        .map(|q| {
            q[..dim]
                .iter()
                .zip(&p[..dim])
                .map(|(a, b)| if a < b { a.clone() } else { b.clone() })
                .collect()
        })
        .collect();
    box_volume(p, dim) - union_volume(limited, dim)
}

/// Exact Lebesgue volume of `U_i [0, x_i]` inside `[0,1]^d`.
pub fn lower_orthant_volume<T: ExactRing>(points: &[Vec<T>]) -> T {
    let Some(first) = points.first() else {
        return T::zero();
    };
    let d = first.len();
    let pts: Vec<Vec<T>> = points
        .iter()
        .map(|p| {
            assert_eq!(p.len(), d, "points must share one dimension");
            p.iter().map(clamp_unit).collect()
        })
        .collect();
    union_volume(pts, d)
}

/// Exact Lebesgue volume of `U_i [x_i, 1]` inside `[0,1]^d`, by the
/// reflection `x -> 1 - x`.
pub fn upper_orthant_volume<T: ExactRing>(points: &[Vec<T>]) -> T {
    let reflected: Vec<Vec<T>> = points
        .iter()
        .map(|p| p.iter().map(|v| T::one() - v.clone()).collect())
        .collect();
    lower_orthant_volume(&reflected)
}

/// Incrementally maintained union of lower orthants `[0, g]`.
///
/// Generators dominated by another are dropped, so the stored set is an
/// antichain and its volume is updated by exclusive contributions.
#[derive(Clone, Debug)]
pub struct OrthantUnion<T> {
    dimension: usize,
    generators: Vec<Vec<T>>,
    volume: T,
}

impl<T: ExactRing> OrthantUnion<T> {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            generators: Vec::new(),
            volume: T::zero(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn generators(&self) -> &[Vec<T>] {
        &self.generators
    }

    pub fn volume(&self) -> T {
        self.volume.clone()
    }

    /// `x` lies in some `[0, g]`.
    pub fn covers(&self, x: &[T]) -> bool {
        let d = self.dimension;
        self.generators.iter().any(|g| le_prefix(x, g, d))
    }

    /// Add a generator; returns the volume it adds.
    pub fn insert(&mut self, point: &[T]) -> T {
        assert_eq!(point.len(), self.dimension);
        let p: Vec<T> = point.iter().map(clamp_unit).collect();
        if self.covers(&p) {
            return T::zero();
        }
        let gain = exclusive_contribution(&self.generators, &p, self.dimension);
        let d = self.dimension;
        self.generators.retain(|g| !le_prefix(g, &p, d));
        self.generators.push(p);
        self.volume = self.volume.clone() + gain.clone();
        gain
    }

    /// Volume gained if `point` were inserted.
    pub fn contribution(&self, point: &[T]) -> T {
        let p: Vec<T> = point.iter().map(clamp_unit).collect();
        if self.covers(&p) {
            return T::zero();
        }
        exclusive_contribution(&self.generators, &p, self.dimension)
    }
}

/// Monte Carlo estimate of a union volume.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolumeEstimate<T> {
    pub value: T,
    pub std_err: T,
    pub exact: bool,
}

/// Lower-orthant volume: exact up to [`MAX_EXACT_DIMENSION`], Monte Carlo
/// with `samples` uniform draws beyond.
pub fn lower_orthant_volume_auto<T: Scalar, R: Rng + ?Sized>(
    points: &[Vec<T>],
    samples: u64,
    rng: &mut R,
) -> VolumeEstimate<T> {
    let d = points.first().map_or(0, |p| p.len());
    if d <= MAX_EXACT_DIMENSION {
        return VolumeEstimate {
            value: lower_orthant_volume(points),
            std_err: T::zero(),
            exact: true,
        };
    }
    let mut union = points.to_vec();
    prune(&mut union, d);
    let mut x = vec![T::zero(); d];
    let mut hits = 0u64;
    for _ in 0..samples {
        for v in x.iter_mut() {
            *v = T::lit(rng.random::<f64>());
        }
        if union.iter().any(|g| le_prefix(&x, g, d)) {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    VolumeEstimate {
        value: T::lit(p),
        std_err: T::lit((p * (1.0 - p) / samples as f64).sqrt()),
        exact: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    type Q = Ratio<i64>;

    fn q(n: i64, d: i64) -> Q {
        Ratio::new(n, d)
    }

    #[test]
    fn single_box_and_pair() {
        assert_eq!(lower_orthant_volume(&[vec![0.5, 0.5]]), 0.25);
        let v: f64 = lower_orthant_volume(&[vec![0.5, 0.2], vec![0.2, 0.5]]);
        assert!((v - 0.16).abs() < 1e-15);
    }

    #[test]
    fn pair_is_exact_over_rationals() {
        let v = lower_orthant_volume(&[vec![q(1, 2), q(1, 5)], vec![q(1, 5), q(1, 2)]]);
        assert_eq!(v, q(4, 25));
    }

    #[test]
    fn inclusion_exclusion_three_points_3d_rational() {
        let pts = vec![
            vec![q(1, 2), q(1, 3), q(3, 4)],
            vec![q(1, 4), q(2, 3), q(1, 2)],
            vec![q(3, 5), q(1, 5), q(1, 3)],
        ];
        // brute inclusion-exclusion over subsets
        let mut expected = q(0, 1);
        for mask in 1u32..8 {
            let mut corner = [q(1, 1); 3];
            for (i, p) in pts.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    for k in 0..3 {
                        if p[k] < corner[k] {
                            corner[k] = p[k];
                        }
                    }
                }
            }
            let vol = corner.iter().fold(q(1, 1), |a, b| a * *b);
            if mask.count_ones() % 2 == 1 {
                expected += vol;
            } else {
                expected -= vol;
            }
        }
        assert_eq!(lower_orthant_volume(&pts), expected);
    }

    #[test]
    fn empty_and_degenerate() {
        assert_eq!(lower_orthant_volume::<f64>(&[]), 0.0);
        assert_eq!(upper_orthant_volume(&[vec![0.0, 0.0, 0.0]]), 1.0);
        assert_eq!(lower_orthant_volume(&[vec![0.0, 1.0], vec![1.0, 0.0]]), 0.0);
        assert_eq!(lower_orthant_volume(&[vec![1.5, 2.0]]), 1.0);
    }

    #[test]
    fn upper_is_reflected_lower() {
        let v: f64 = upper_orthant_volume(&[vec![0.6, 0.7]]);
        assert!((v - 0.12).abs() < 1e-15);
    }

    #[test]
    fn incremental_matches_batch() {
        let pts = [
            vec![0.3, 0.8, 0.5, 0.2],
            vec![0.7, 0.1, 0.6, 0.9],
            vec![0.2, 0.2, 0.2, 0.2],
            vec![0.5, 0.5, 0.9, 0.4],
            vec![0.9, 0.3, 0.1, 0.8],
        ];
        let mut union = OrthantUnion::<f64>::new(4);
        for (i, p) in pts.iter().enumerate() {
            union.insert(p);
            let batch = lower_orthant_volume(&pts[..=i]);
            assert!((union.volume() - batch).abs() < 1e-14);
        }
        // (0.2,...) is dominated by (0.5,0.5,0.9,0.4)
        assert_eq!(union.generators().len(), 4);
    }

    #[test]
    fn monte_carlo_fallback_above_six_dimensions() {
        let mut rng = crate::rng::RandomStream::new(1, 0);
        let pts = vec![vec![0.9; 7]];
        let est = lower_orthant_volume_auto(&pts, 100_000, &mut rng);
        assert!(!est.exact);
        assert!((est.value - 0.9f64.powi(7)).abs() < 4.0 * est.std_err);
        let est = lower_orthant_volume_auto(&[vec![0.5, 0.5]], 10, &mut rng);
        assert!(est.exact);
        assert_eq!(est.value, 0.25);
    }
}
