//! Continuous piecewise-linear functions on box partitions and their
//! per-region monotonicity.

use crate::error::{invalid, Error, Result};

/// Axis-aligned box `prod [lower_i, upper_i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Box {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Box {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(invalid("box lower corner exceeds upper corner"));
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// Volume of the part inside the unit cube.
    pub fn unit_volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u.min(1.0) - l.max(0.0)).max(0.0))
            .product()
    }

    fn interior_overlap(&self, other: &Box) -> bool {
        self.lower
            .iter()
            .zip(&self.upper)
            .zip(other.lower.iter().zip(&other.upper))
            .all(|((l1, u1), (l2, u2))| l1.max(*l2) < u1.min(*u2))
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l.max(0.0) + u.min(1.0)))
            .collect()
    }
}

/// `g(x) = sum_k (a_k . x + b_k) 1{x in A_k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CPWLFunction {
    pub regions: Vec<Box>,
    pub coefficients: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
}

impl CPWLFunction {
    pub fn new(regions: Vec<Box>, coefficients: Vec<Vec<f64>>, intercepts: Vec<f64>) -> Result<Self> {
        if regions.is_empty() {
            return Err(invalid("CPWL function needs at least one region"));
        }
        if regions.len() != coefficients.len() || regions.len() != intercepts.len() {
            return Err(invalid("one coefficient vector and intercept per region"));
        }
        let d = regions[0].lower.len();
        for (r, a) in regions.iter().zip(&coefficients) {
            for n in [r.lower.len(), a.len()] {
                if n != d {
                    return Err(Error::DimensionMismatch { expected: d, found: n });
                }
            }
        }
        Ok(Self {
            regions,
            coefficients,
            intercepts,
        })
    }

    pub fn dimension(&self) -> usize {
        self.regions[0].lower.len()
    }

    /// Interior-disjoint regions covering the unit cube.
    pub fn validate(&self) -> Result<()> {
        for i in 0..self.regions.len() {
            for j in i + 1..self.regions.len() {
                if self.regions[i].interior_overlap(&self.regions[j]) {
                    return Err(Error::OverlappingRegions { first: i, second: j });
                }
            }
        }
        let covered: f64 = self.regions.iter().map(Box::unit_volume).sum();
        if (covered - 1.0).abs() > 1e-9 {
            return Err(Error::IncompleteCover { covered });
        }
        Ok(())
    }

    /// Value on the first region containing `x`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.regions
            .iter()
            .position(|r| r.contains(x))
            .map(|k| {
                self.coefficients[k]
                    .iter()
                    .zip(x)
                    .map(|(a, v)| a * v)
                    .sum::<f64>()
                    + self.intercepts[k]
            })
            .unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Positive,
    Negative,
    Zero,
}

impl Sign {
    pub fn of(v: f64) -> Self {
        if v > 0.0 {
            Sign::Positive
        } else if v < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionSigns {
    pub signs: Vec<Sign>,
    /// Reflection vector (`+1` keep, `-1` flip) that makes the region's
    /// affine piece non-decreasing.
    pub orientation: Vec<i8>,
    /// All non-zero signs agree.
    pub uniform: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityReport {
    pub regions: Vec<RegionSigns>,
    /// Every region is non-decreasing in every coordinate.
    pub globally_increasing: bool,
    /// Every region is non-increasing in every coordinate.
    pub globally_decreasing: bool,
    /// All regions share one orientation, under which `g` is increasing.
    pub common_orientation: Option<Vec<i8>>,
}

/// Coefficient signs per region.
pub fn cpwl_monotone_regions(f: &CPWLFunction) -> Result<MonotonicityReport> {
    f.validate()?;
    let regions: Vec<RegionSigns> = f
        .coefficients
        .iter()
        .map(|a| {
            let signs: Vec<Sign> = a.iter().map(|&v| Sign::of(v)).collect();
            let orientation = signs
                .iter()
                .map(|s| if *s == Sign::Negative { -1 } else { 1 })
                .collect();
            let has_pos = signs.contains(&Sign::Positive);
            let has_neg = signs.contains(&Sign::Negative);
            RegionSigns {
                signs,
                orientation,
                uniform: !(has_pos && has_neg),
            }
        })
        .collect();
    let globally_increasing = regions
        .iter()
        .all(|r| !r.signs.contains(&Sign::Negative));
    let globally_decreasing = regions
        .iter()
        .all(|r| !r.signs.contains(&Sign::Positive));
    // a coordinate is compatible when no two regions disagree strictly on it
    let d = f.dimension();
    let mut common = vec![0i8; d];
    let mut compatible = true;
    for r in &regions {
        for (c, s) in common.iter_mut().zip(&r.signs) {
            let v = match s {
                Sign::Positive => 1,
                Sign::Negative => -1,
                Sign::Zero => 0,
            };
            if v != 0 {
                if *c == 0 {
                    *c = v;
                } else if *c != v {
                    compatible = false;
                }
            }
        }
    }
    let common_orientation = compatible.then(|| common.iter().map(|&c| if c < 0 { -1 } else { 1 }).collect());
    Ok(MonotonicityReport {
        regions,
        globally_increasing,
        globally_decreasing,
        common_orientation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(d: usize) -> Box {
        Box::new(vec![0.0; d], vec![1.0; d]).unwrap()
    }

    #[test]
    fn single_region_signs() {
        let f = CPWLFunction::new(vec![unit(2)], vec![vec![1.0, -2.0]], vec![0.0]).unwrap();
        let r = cpwl_monotone_regions(&f).unwrap();
        assert_eq!(r.regions[0].signs, vec![Sign::Positive, Sign::Negative]);
        assert_eq!(r.regions[0].orientation, vec![1, -1]);
        assert!(!r.regions[0].uniform);
        assert!(!r.globally_increasing);
        assert_eq!(r.common_orientation, Some(vec![1, -1]));
    }

    #[test]
    fn two_increasing_regions() {
        let left = Box::new(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap();
        let right = Box::new(vec![0.5, 0.0], vec![1.0, 1.0]).unwrap();
        // continuous at x1 = 0.5: 0.5 + x2 + 0 = 1.0 + 3 x2 + b  needs same slope in x2;
        // continuity is not checked, only signs
        let f = CPWLFunction::new(vec![left, right], vec![vec![1.0, 1.0], vec![2.0, 3.0]], vec![0.0, -0.5])
            .unwrap();
        let r = cpwl_monotone_regions(&f).unwrap();
        assert!(r.globally_increasing);
        assert!(r.regions.iter().all(|s| s.uniform));
    }

    #[test]
    fn overlap_and_cover_errors() {
        let a = Box::new(vec![0.0, 0.0], vec![0.6, 1.0]).unwrap();
        let b = Box::new(vec![0.4, 0.0], vec![1.0, 1.0]).unwrap();
        let f = CPWLFunction::new(vec![a, b], vec![vec![1.0, 1.0]; 2], vec![0.0; 2]).unwrap();
        assert_eq!(
            cpwl_monotone_regions(&f).unwrap_err(),
            Error::OverlappingRegions { first: 0, second: 1 }
        );
        let half = Box::new(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap();
        let f = CPWLFunction::new(vec![half], vec![vec![1.0, 1.0]], vec![0.0]).unwrap();
        assert!(matches!(
            cpwl_monotone_regions(&f),
            Err(Error::IncompleteCover { .. })
        ));
    }

    #[test]
    fn eval_picks_region() {
        let left = Box::new(vec![0.0], vec![0.5]).unwrap();
        let right = Box::new(vec![0.5], vec![1.0]).unwrap();
        let f = CPWLFunction::new(vec![left, right], vec![vec![2.0], vec![-2.0]], vec![0.0, 2.0]).unwrap();
        assert_eq!(f.eval(&[0.25]), 0.5);
        assert_eq!(f.eval(&[0.75]), 0.5);
        assert_eq!(f.eval(&[0.5]), 1.0);
    }
}
