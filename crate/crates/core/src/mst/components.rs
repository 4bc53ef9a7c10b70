use std::ops::ControlFlow;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::bvh::Bvh;
use crate::error::{EmstError, Result};
use crate::geometry::distance;
use crate::metric::{weight_from_euclidean, Metric};
use crate::mst::edge::WeightedEdge;

/// Internal-node label for subtrees whose leaves span several components.
pub const MIXED: u32 = u32::MAX;

/// Component bookkeeping for one Borůvka run.
///
/// A component is identified by its representative, the smallest original
/// point index it contains. `leaf_labels` is indexed by leaf slot;
/// `upper_bounds` and `best_out_edge` by representative.
#[derive(Clone, Debug)]
pub struct ComponentState {
    pub(crate) leaf_labels: Vec<u32>,
    pub(crate) internal_labels: Vec<u32>,
    pub(crate) upper_bounds: Vec<f64>,
    pub(crate) best_out_edge: Vec<Option<WeightedEdge>>,
    pub(crate) components: Vec<u32>,
}

impl ComponentState {
    /// Every point in its own component.
    pub fn singletons<const D: usize>(bvh: &Bvh<D>) -> Self {
        let n = bvh.num_points();
        let components: Vec<u32> = (0..n as u32).collect();
        Self {
            leaf_labels: bvh.leaf_permutation().to_vec(),
            internal_labels: vec![MIXED; bvh.num_internal()],
            upper_bounds: vec![f64::INFINITY; n],
            best_out_edge: vec![None; n],
            components,
        }
    }

    /// State for an arbitrary partition given as a class id per original
    /// point. Classes are relabeled to their smallest member index.
    pub fn from_point_labels<const D: usize>(bvh: &Bvh<D>, classes: &[u32]) -> Result<Self> {
        let n = bvh.num_points();
        if classes.len() != n {
            return Err(EmstError::DimensionMismatch { expected: n, found: classes.len() });
        }
        let mut smallest = std::collections::HashMap::new();
        for (i, &c) in classes.iter().enumerate() {
            smallest.entry(c).or_insert(i as u32);
        }
        let leaf_labels = bvh.leaf_permutation().iter().map(|&p| smallest[&classes[p as usize]]).collect();
        let mut components: Vec<u32> = smallest.into_values().collect();
        components.sort_unstable();
        Ok(Self {
            leaf_labels,
            internal_labels: vec![MIXED; bvh.num_internal()],
            upper_bounds: vec![f64::INFINITY; n],
            best_out_edge: vec![None; n],
            components,
        })
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    /// Live representatives, ascending.
    pub fn components(&self) -> &[u32] {
        &self.components
    }

    /// Component label of each leaf slot.
    pub fn leaf_labels(&self) -> &[u32] {
        &self.leaf_labels
    }

    /// Component label of each original point.
    pub fn labels_by_point<const D: usize>(&self, bvh: &Bvh<D>) -> Vec<u32> {
        let mut out = vec![0; self.leaf_labels.len()];
        for (slot, &p) in bvh.leaf_permutation().iter().enumerate() {
            out[p as usize] = self.leaf_labels[slot];
        }
        out
    }

    /// Label per internal node, [`MIXED`] where the subtree spans components.
    pub fn internal_labels(&self) -> &[u32] {
        &self.internal_labels
    }

    pub fn upper_bound(&self, component: u32) -> f64 {
        self.upper_bounds[component as usize]
    }

    pub fn best_out_edge(&self, component: u32) -> Option<WeightedEdge> {
        self.best_out_edge[component as usize]
    }

    /// Overwrites leaf labels in slot order (used to replay examples).
    pub fn set_leaf_labels(&mut self, labels: Vec<u32>) -> Result<()> {
        if labels.len() != self.leaf_labels.len() {
            return Err(EmstError::DimensionMismatch { expected: self.leaf_labels.len(), found: labels.len() });
        }
        let mut components = labels.clone();
        components.sort_unstable();
        components.dedup();
        self.components = components;
        self.leaf_labels = labels;
        Ok(())
    }
}

/// Propagates leaf labels to internal nodes in one bottom-up sweep. A node
/// keeps a label only when both children carry the same one.
pub fn reduce_labels<const D: usize>(bvh: &Bvh<D>, state: &mut ComponentState) {
    let labels = &state.leaf_labels;
    let reduced = bvh.for_each_leaf_to_root(
        |slot| labels[slot],
        |_, &a, &b| if a == b && a != MIXED { ControlFlow::Continue(a) } else { ControlFlow::Break(()) },
    );
    state.internal_labels = reduced.into_iter().map(|l| l.unwrap_or(MIXED)).collect();
}

/// Seeds each component's search radius with the lightest edge between
/// Z-order neighbors carrying different labels; `+inf` where none exists.
pub fn compute_upper_bounds<const D: usize>(bvh: &Bvh<D>, state: &mut ComponentState, metric: &Metric) {
    let n = bvh.num_points();
    let bounds: Vec<AtomicU64> = (0..n).map(|_| AtomicU64::new(f64::INFINITY.to_bits())).collect();
    let labels = &state.leaf_labels;
    let points = bvh.leaf_points();
    let perm = bvh.leaf_permutation();
    let core = metric.core_values();
    (0..n.saturating_sub(1)).into_par_iter().for_each(|s| {
        let (a, b) = (labels[s], labels[s + 1]);
        if a != b {
            let d = distance(&points[s], &points[s + 1]);
            let w = weight_from_euclidean(d, core, perm[s] as usize, perm[s + 1] as usize);
            bounds[a as usize].fetch_min(w.to_bits(), Ordering::Relaxed);
            bounds[b as usize].fetch_min(w.to_bits(), Ordering::Relaxed);
        }
    });
    state.upper_bounds = bounds.into_iter().map(|b| f64::from_bits(b.into_inner())).collect();
}

/// Outcome of one merge step.
#[derive(Clone, Debug, PartialEq)]
pub struct MergeOutcome {
    pub num_components: usize,
    pub edges: Vec<WeightedEdge>,
}

/// Merges components along their selected edges.
///
/// Each component points at the component across its best edge. Chains end
/// in a mutual pair; pointer jumping takes every component to the smaller
/// member of its terminal pair, and the merged component is relabeled to
/// the smallest representative in it. A mutual pair selected the same edge
/// from both sides, so it is added once.
pub fn merge_components<const D: usize>(bvh: &Bvh<D>, state: &mut ComponentState) -> Result<MergeOutcome> {
    let n = bvh.num_points();
    let comps = &state.components;
    let k = comps.len();
    let mut dense_of = vec![u32::MAX; n];
    for (i, &c) in comps.iter().enumerate() {
        dense_of[c as usize] = i as u32;
    }
    let slot_of = bvh.slot_of_point();
    let labels = &state.leaf_labels;
    let best = &state.best_out_edge;
    let succ: Vec<u32> = comps
        .par_iter()
        .map(|&c| {
            let e = best[c as usize].ok_or(EmstError::NoOutgoingEdge { component: c as usize })?;
            let lu = labels[slot_of[e.u as usize] as usize];
            let lv = labels[slot_of[e.v as usize] as usize];
            let target = match (lu == c, lv == c) {
                (true, false) => lv,
                (false, true) => lu,
                _ => {
                    return Err(EmstError::InternalInvariantViolation(format!(
                        "edge ({}, {}) selected by component {c} does not leave it",
                        e.u, e.v
                    )))
                }
            };
            Ok(dense_of[target as usize])
        })
        .collect::<Result<_>>()?;

    let mutual: Vec<bool> = (0..k).map(|i| succ[succ[i] as usize] as usize == i).collect();
    let mut next: Vec<u32> =
        (0..k).map(|i| if mutual[i] { (i as u32).min(succ[i]) } else { succ[i] }).collect();
    let max_rounds = usize::BITS - k.leading_zeros() + 1;
    let mut rounds = 0;
    loop {
        let jumped: Vec<u32> = next.par_iter().map(|&j| next[j as usize]).collect();
        if jumped == next {
            break;
        }
        next = jumped;
        rounds += 1;
        if rounds > max_rounds {
            return Err(EmstError::InternalInvariantViolation(
                "component chain does not end in a mutual pair".into(),
            ));
        }
    }

    // Dense indices ascend with representatives, so the first member seen
    // for a root is the smallest.
    let mut new_rep = vec![u32::MAX; k];
    for i in 0..k {
        let r = next[i] as usize;
        if new_rep[r] == u32::MAX {
            new_rep[r] = comps[i];
        }
    }
    let edges: Vec<WeightedEdge> = (0..k)
        .filter(|&i| !(mutual[i] && (succ[i] as usize) < i))
        .map(|i| best[comps[i] as usize].expect("checked above"))
        .collect();
    let new_components: Vec<u32> = (0..k).filter(|&i| next[i] as usize == i).map(|i| new_rep[i]).collect();
    if new_components.len() + edges.len() != k {
        return Err(EmstError::InternalInvariantViolation(format!(
            "{k} components, {} edges, {} merged components",
            edges.len(),
            new_components.len()
        )));
    }

    let relabel: Vec<u32> = next.iter().map(|&r| new_rep[r as usize]).collect();
    state.leaf_labels.par_iter_mut().for_each(|l| *l = relabel[dense_of[*l as usize] as usize]);
    let mut new_components = new_components;
    new_components.sort_unstable();
    state.components = new_components;
    Ok(MergeOutcome { num_components: state.components.len(), edges })
}
