//! Edge weights: plain Euclidean distance and the HDBSCAN* mutual
//! reachability distance `max(core(u), core(v), |u - v|)`.

use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::bvh::{Bvh, NearestQuery};
use crate::error::{EmstError, Result};
use crate::geometry::{distance_slices, Point, PointSet};

/// Distance from every point to its `k_pts`-th nearest neighbor, counting
/// the point itself. Indexed by original point index.
#[derive(Clone, Debug, PartialEq)]
pub struct CoreDistances {
    k_pts: usize,
    values: Vec<f64>,
}

impl CoreDistances {
    pub fn new(k_pts: usize, values: Vec<f64>) -> Result<Self> {
        if k_pts == 0 {
            return Err(EmstError::InvalidParameter("k_pts must be at least 1".into()));
        }
        if values.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(EmstError::InvalidParameter("core distances must be non-negative".into()));
        }
        Ok(Self { k_pts, values })
    }

    pub fn k_pts(&self) -> usize {
        self.k_pts
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// How edge weights are derived from point coordinates.
#[derive(Clone, Debug, PartialEq)]
pub enum Metric {
    Euclidean,
    MutualReachability(CoreDistances),
}

impl Metric {
    pub(crate) fn core_values(&self) -> Option<&[f64]> {
        match self {
            Metric::Euclidean => None,
            Metric::MutualReachability(c) => Some(c.values()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::MutualReachability(_) => "mrd",
        }
    }
}

/// Weight of an edge given its Euclidean length and optional core distances.
#[inline]
pub(crate) fn weight_from_euclidean(euclidean: f64, core: Option<&[f64]>, u: usize, v: usize) -> f64 {
    match core {
        None => euclidean,
        Some(c) => euclidean.max(c[u]).max(c[v]),
    }
}

/// Weight of the edge between points `u` and `v` under `metric`.
pub fn edge_weight(metric: &Metric, u: usize, v: usize, points: &PointSet) -> Result<f64> {
    let n = points.len();
    for index in [u, v] {
        if index >= n {
            return Err(EmstError::InvalidIndex { index, len: n });
        }
    }
    if u == v {
        return Err(EmstError::InvalidParameter(format!("self edge at {u}")));
    }
    if let Metric::MutualReachability(c) = metric {
        if c.len() != n {
            return Err(EmstError::DimensionMismatch { expected: n, found: c.len() });
        }
    }
    let d = distance_slices(points.point(u), points.point(v))?;
    Ok(weight_from_euclidean(d, metric.core_values(), u, v))
}

/// Bounded max-heap of the `k` best `(distance bits, point)` keys seen so far.
struct KnnQuery<'a> {
    k: usize,
    perm: &'a [u32],
    heap: BinaryHeap<(u64, u32)>,
}

impl NearestQuery for KnnQuery<'_> {
    fn radius(&self) -> f64 {
        if self.heap.len() < self.k {
            f64::INFINITY
        } else {
            f64::from_bits(self.heap.peek().expect("heap holds k entries").0)
        }
    }

    fn visit_leaf(&mut self, slot: usize, distance: f64) {
        // Non-negative f64 bit patterns order like the values.
        let key = (distance.to_bits(), self.perm[slot]);
        if self.heap.len() < self.k {
            self.heap.push(key);
        } else if key < *self.heap.peek().expect("heap holds k entries") {
            self.heap.pop();
            self.heap.push(key);
        }
    }
}

/// Exact core distances by a bounded k-nearest-neighbor search per point.
pub fn compute_core_distances<const D: usize>(bvh: &Bvh<D>, k_pts: usize) -> Result<CoreDistances> {
    let n = bvh.num_points();
    if k_pts == 0 || k_pts > n {
        return Err(EmstError::InvalidParameter(format!("k_pts = {k_pts} must lie in [1, {n}]")));
    }
    let perm = bvh.leaf_permutation();
    let by_slot: Vec<f64> = if k_pts == 1 {
        vec![0.0; n]
    } else {
        bvh.leaf_points()
            .par_iter()
            .map(|p: &Point<D>| {
                let mut q = KnnQuery { k: k_pts, perm, heap: BinaryHeap::with_capacity(k_pts + 1) };
                bvh.traverse_nearest(p, &mut q);
                q.radius()
            })
            .collect()
    };
    let mut values = vec![0.0; n];
    for (slot, &point) in perm.iter().enumerate() {
        values[point as usize] = by_slot[slot];
    }
    CoreDistances::new(k_pts, values)
}
