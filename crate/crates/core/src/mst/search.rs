use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::bvh::{Bvh, NearestQuery, TraversalStats};
use crate::error::{EmstError, Result};
use crate::metric::{weight_from_euclidean, Metric};
use crate::mst::components::ComponentState;
use crate::mst::edge::WeightedEdge;

/// Which pruning rules the edge search applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pruning {
    /// Skip subtrees whose leaves all share the query's component.
    pub subtree_skipping: bool,
    /// Start each query at its component's upper bound instead of `+inf`.
    pub upper_bounds: bool,
}

impl Default for Pruning {
    fn default() -> Self {
        Self { subtree_skipping: true, upper_bounds: true }
    }
}

/// `(weight bits, u, v)` of the lightest edge a query found.
type EdgeKey = (u64, u32, u32);

/// Constrained nearest neighbor for one point: the lightest edge, under
/// the edge total order, to a point of another component.
struct OutgoingQuery<'a> {
    point: u32,
    component: u32,
    leaf_labels: &'a [u32],
    internal_labels: &'a [u32],
    perm: &'a [u32],
    core: Option<&'a [f64]>,
    subtree_skipping: bool,
    radius: f64,
    best: Option<EdgeKey>,
}

impl NearestQuery for OutgoingQuery<'_> {
    #[inline]
    fn radius(&self) -> f64 {
        self.radius
    }

    #[inline]
    fn skip_internal(&self, internal: usize) -> bool {
        self.subtree_skipping && self.internal_labels[internal] == self.component
    }

    #[inline]
    fn skip_leaf(&self, slot: usize) -> bool {
        self.leaf_labels[slot] == self.component
    }

    #[inline]
    fn visit_leaf(&mut self, slot: usize, distance: f64) {
        let other = self.perm[slot];
        let w = weight_from_euclidean(distance, self.core, self.point as usize, other as usize);
        if w > self.radius {
            return;
        }
        let key = (w.to_bits(), self.point.min(other), self.point.max(other));
        if self.best.is_none_or(|b| key < b) {
            self.best = Some(key);
            self.radius = w;
        }
    }
}

/// Finds every live component's lightest outgoing edge.
///
/// One query per point, issued in Z-order. The per-component minimum is an
/// atomic min under the edge total order, taken lexicographically: first
/// over weights, then over the endpoint pair among the queries that hit
/// the minimum weight. Results are independent of scheduling.
pub fn find_component_outgoing_edges<const D: usize>(
    bvh: &Bvh<D>,
    state: &mut ComponentState,
    metric: &Metric,
    pruning: Pruning,
) -> Result<TraversalStats> {
    if state.num_components() < 2 {
        return Err(EmstError::NothingToFind);
    }
    let n = bvh.num_points();
    let perm = bvh.leaf_permutation();
    let core = metric.core_values();
    let leaf_labels = &state.leaf_labels;
    let internal_labels = &state.internal_labels;
    let upper_bounds = &state.upper_bounds;

    let (found, stats): (Vec<Option<EdgeKey>>, Vec<TraversalStats>) = bvh
        .leaf_points()
        .par_iter()
        .enumerate()
        .map(|(slot, p)| {
            let component = leaf_labels[slot];
            let mut q = OutgoingQuery {
                point: perm[slot],
                component,
                leaf_labels,
                internal_labels,
                perm,
                core,
                subtree_skipping: pruning.subtree_skipping,
                radius: if pruning.upper_bounds { upper_bounds[component as usize] } else { f64::INFINITY },
                best: None,
            };
            let stats = bvh.traverse_nearest(p, &mut q);
            (q.best, stats)
        })
        .unzip();

    let min_weight: Vec<AtomicU64> = (0..n).map(|_| AtomicU64::new(u64::MAX)).collect();
    found.par_iter().enumerate().for_each(|(slot, f)| {
        if let Some((w, _, _)) = f {
            min_weight[leaf_labels[slot] as usize].fetch_min(*w, Ordering::Relaxed);
        }
    });
    let min_pair: Vec<AtomicU64> = (0..n).map(|_| AtomicU64::new(u64::MAX)).collect();
    found.par_iter().enumerate().for_each(|(slot, f)| {
        if let Some((w, u, v)) = *f {
            let c = leaf_labels[slot] as usize;
            if w == min_weight[c].load(Ordering::Relaxed) {
                min_pair[c].fetch_min((u64::from(u) << 32) | u64::from(v), Ordering::Relaxed);
            }
        }
    });

    for &c in &state.components {
        let c = c as usize;
        let w = min_weight[c].load(Ordering::Relaxed);
        if w == u64::MAX {
            return Err(EmstError::NoOutgoingEdge { component: c });
        }
        let pair = min_pair[c].load(Ordering::Relaxed);
        state.best_out_edge[c] = Some(WeightedEdge::from_key((w, (pair >> 32) as u32, pair as u32)));
    }

    let mut total = TraversalStats::default();
    for s in stats {
        total += s;
    }
    Ok(total)
}
