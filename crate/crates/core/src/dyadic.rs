//! Deterministic bounds for Lipschitz functions by dyadic-cube labeling.
//!
//! A cube `Q` of depth `j` is labeled from one query at its center:
//! Inside when `g(c) > y + L 2^{-j-1}`, Outside when `g(c) < y - L 2^{-j-1}`,
//! Unknown otherwise. With `L` a valid sup-norm Lipschitz constant,
//! `p <= 1 - mass(Inside)` and `p >= mass(Outside)`.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::{invalid, Result};
use crate::estimate::{BlackBoxFunction, BoundKind, ProbabilityBounds};
use crate::scalar::Scalar;
use crate::trace::TracePoint;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DyadicCube {
    pub depth: u32,
    pub index: Vec<u64>,
}

impl DyadicCube {
    /// `[0,1]^d`.
    pub fn root(d: usize) -> Self {
        Self {
            depth: 0,
            index: vec![0; d],
        }
    }

    pub fn new(depth: u32, index: Vec<u64>) -> Result<Self> {
        if depth >= 63 {
            return Err(invalid(format!("depth {depth} too large")));
        }
        let side = 1u64 << depth;
        if let Some(bad) = index.iter().find(|&&i| i >= side) {
            return Err(invalid(format!("index {bad} out of range for depth {depth}")));
        }
        Ok(Self { depth, index })
    }

    pub fn dimension(&self) -> usize {
        self.index.len()
    }

    pub fn sidelength<T: Scalar>(&self) -> T {
        T::lit(2.0).powi(-(self.depth as i32))
    }

    pub fn center<T: Scalar>(&self) -> Vec<T> {
        let side = self.sidelength::<T>();
        self.index
            .iter()
            .map(|&i| (T::lit(i as f64) + T::lit(0.5)) * side)
            .collect()
    }

    /// The `2^d` children in lexicographic index order.
    pub fn children(&self) -> Vec<DyadicCube> {
        let d = self.dimension();
        (0..1u64 << d)
            .map(|mask| {
                let index = self
                    .index
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| 2 * i + ((mask >> (d - 1 - k)) & 1))
                    .collect();
                DyadicCube {
                    depth: self.depth + 1,
                    index,
                }
            })
            .collect()
    }

    pub fn ancestor(&self, depth: u32) -> DyadicCube {
        assert!(depth <= self.depth);
        let shift = self.depth - depth;
        DyadicCube {
            depth,
            index: self.index.iter().map(|&i| i >> shift).collect(),
        }
    }
}

impl Ord for DyadicCube {
    fn cmp(&self, other: &Self) -> Ordering {
        self.depth
            .cmp(&other.depth)
            .then_with(|| self.index.cmp(&other.index))
    }
}

impl PartialOrd for DyadicCube {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `2^{-dj}`, the uniform measure of a depth-`j` cube.
pub fn cube_measure<T: Scalar>(cube: &DyadicCube) -> T {
    T::lit(2.0).powi(-((cube.depth as i32) * cube.dimension() as i32))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CubeLabel {
    Inside,
    Outside,
    Unknown,
}

/// Label a cube from the value at its center.
pub fn classify<T: Scalar>(value: T, threshold: T, lipschitz: T, depth: u32) -> CubeLabel {
    let margin = lipschitz * T::lit(2.0).powi(-(depth as i32) - 1);
    if value > threshold + margin {
        CubeLabel::Inside
    } else if value < threshold - margin {
        CubeLabel::Outside
    } else {
        CubeLabel::Unknown
    }
}

/// One query at the cube center.
pub fn label_cube<T: Scalar>(f: &BlackBoxFunction<T>, lipschitz: T, cube: &DyadicCube) -> CubeLabel {
    let value = f.eval(&cube.center::<T>());
    classify(value, f.threshold(), lipschitz, cube.depth)
}

/// Depth needed for the Unknown band `L 2^{-k-1}` to fall below `eps_target / 2`.
pub fn default_max_depth(lipschitz: f64, eps_target: f64) -> u32 {
    (lipschitz / eps_target).log2().ceil().max(1.0) as u32
}

#[derive(Clone, Debug)]
pub struct DyadicRun<T> {
    pub inside: Vec<DyadicCube>,
    pub outside: Vec<DyadicCube>,
    /// Cubes labeled Unknown at the maximal depth.
    pub unknown: Vec<DyadicCube>,
    /// Children of split cubes the budget did not reach; they count as unknown.
    pub pending: Vec<DyadicCube>,
    pub bounds: ProbabilityBounds<T>,
    pub trace: Vec<TracePoint<T>>,
}

impl<T: Scalar> DyadicRun<T> {
    pub fn inside_mass(&self) -> T {
        self.inside.iter().map(cube_measure::<T>).sum()
    }

    pub fn outside_mass(&self) -> T {
        self.outside.iter().map(cube_measure::<T>).sum()
    }

    pub fn unknown_mass(&self) -> T {
        self.unknown
            .iter()
            .chain(&self.pending)
            .map(cube_measure::<T>)
            .sum()
    }
}

/// Refine dyadic cubes from `[0,1]^d`, largest unlabeled cube first.
///
/// Each label costs one query. Unknown cubes shallower than `max_depth` are
/// replaced by their children; the run stops when `budget` is spent or no
/// unlabeled cube remains. Bounds are deterministic whenever `lipschitz` is
/// valid for `f`.
pub fn refine<T: Scalar>(
    f: &BlackBoxFunction<T>,
    lipschitz: T,
    budget: u64,
    max_depth: u32,
) -> Result<DyadicRun<T>> {
    if !(lipschitz > T::zero()) {
        return Err(invalid("Lipschitz constant must be positive"));
    }
    if budget == 0 {
        return Err(invalid("budget must be at least 1"));
    }
    if max_depth == 0 {
        return Err(invalid("max_depth must be at least 1"));
    }
    let d = f.dimension();
    if (max_depth as usize) * d >= 1000 {
        return Err(invalid("max_depth * dimension exceeds floating-point range"));
    }
    let start = f.queries();
    let mut queue = BinaryHeap::new();
    queue.push(Reverse(DyadicCube::root(d)));

    let mut inside = Vec::new();
    let mut outside = Vec::new();
    let mut unknown = Vec::new();
    let mut inside_mass = T::zero();
    let mut outside_mass = T::zero();
    let mut trace = Vec::new();
    let mut used = 0u64;

    while used < budget {
        let Some(Reverse(cube)) = queue.pop() else { break };
        let label = label_cube(f, lipschitz, &cube);
        used += 1;
        let mass = cube_measure::<T>(&cube);
        match label {
            CubeLabel::Inside => {
                inside_mass += mass;
                inside.push(cube);
            }
            CubeLabel::Outside => {
                outside_mass += mass;
                outside.push(cube);
            }
            CubeLabel::Unknown if cube.depth < max_depth => {
                for child in cube.children() {
                    queue.push(Reverse(child));
                }
            }
            CubeLabel::Unknown => unknown.push(cube),
        }
        let p_upper = (T::one() - inside_mass).max(T::zero());
        let p_lower = outside_mass.min(p_upper);
        trace.push(TracePoint {
            step: trace.len() + 1,
            queries: f.queries() - start,
            p_lower,
            p_upper,
            unknown_mass: p_upper - p_lower,
        });
    }

    let pending: Vec<DyadicCube> = queue.into_sorted_vec().into_iter().rev().map(|r| r.0).collect();
    let p_upper = T::one() - inside_mass;
    let bounds = ProbabilityBounds::from_computed(
        outside_mass,
        p_upper,
        BoundKind::Deterministic,
        f.queries() - start,
    )?;
    Ok(DyadicRun {
        inside,
        outside,
        unknown,
        pending,
        bounds,
        trace,
    })
}
