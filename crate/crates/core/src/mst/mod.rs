//! Single-tree Borůvka: every iteration reduces component labels onto the
//! tree, seeds search radii from Z-order neighbors, runs one constrained
//! nearest-neighbor query per point, and merges components along the
//! selected edges.

mod components;
mod edge;
mod search;

use std::time::{Duration, Instant};

use rayon::prelude::*;

pub use components::{
    compute_upper_bounds, merge_components, reduce_labels, ComponentState, MergeOutcome, MIXED,
};
pub use edge::WeightedEdge;
pub use search::{find_component_outgoing_edges, Pruning};

use crate::bvh::Bvh;
use crate::error::{EmstError, Result};
use crate::geometry::{with_points, Point, PointSet};
use crate::metric::{compute_core_distances, Metric};

/// Which distance the spanning tree is built over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    Euclidean,
    /// Mutual reachability with core distances to the `k_pts`-th neighbor.
    MutualReachability { k_pts: usize },
}

/// Engine configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[derive(Default)]
pub struct EmstOptions {
    pub pruning: Pruning,
    /// Worker threads; 0 uses the ambient rayon pool.
    pub threads: usize,
}


/// Wall time of each phase of one Borůvka iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IterationTimings {
    pub reduce_labels: Duration,
    pub upper_bounds: Duration,
    pub find_edges: Duration,
    pub merge: Duration,
}

impl IterationTimings {
    pub fn sum(&self) -> Duration {
        self.reduce_labels + self.upper_bounds + self.find_edges + self.merge
    }
}

/// Phase breakdown of a full run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    /// Morton sort and hierarchy construction.
    pub tree: Duration,
    pub core_distances: Duration,
    pub iterations: Vec<IterationTimings>,
    /// Edge sorting and bookkeeping after the last iteration.
    pub finalize: Duration,
    pub total: Duration,
}

impl PhaseTimings {
    /// Time spent in Borůvka proper (iterations plus finalization).
    pub fn boruvka(&self) -> Duration {
        self.iterations.iter().map(IterationTimings::sum).sum::<Duration>() + self.finalize
    }

    /// Sum of all timed phases; never exceeds `total`.
    pub fn phase_sum(&self) -> Duration {
        self.tree + self.core_distances + self.boruvka()
    }
}

/// Counters gathered during a run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    /// Component count before each iteration, then the final count.
    pub component_counts: Vec<usize>,
    /// Leaf distance evaluations over all edge searches.
    pub leaf_evaluations: u64,
    pub nodes_visited: u64,
}

/// A spanning tree and how it was obtained.
#[derive(Clone, Debug)]
pub struct MstResult {
    /// The `n - 1` tree edges sorted by the edge total order.
    pub edges: Vec<WeightedEdge>,
    pub total_weight: f64,
    pub iterations: usize,
    pub timings: PhaseTimings,
    pub stats: RunStats,
}

impl MstResult {
    pub(crate) fn from_edges(mut edges: Vec<WeightedEdge>) -> Self {
        edges.sort_unstable();
        let total_weight = edges.iter().map(|e| e.weight).sum();
        Self { edges, total_weight, iterations: 0, timings: PhaseTimings::default(), stats: RunStats::default() }
    }

    /// Canonical `(u, v)` pairs in edge order.
    pub fn pairs(&self) -> Vec<(u32, u32)> {
        self.edges.iter().map(WeightedEdge::endpoints).collect()
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| EmstError::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Minimum spanning tree of the complete graph on `points` under `metric`.
pub fn boruvka_emst(points: &PointSet, metric: MetricKind, options: &EmstOptions) -> Result<MstResult> {
    if points.is_empty() {
        return Err(EmstError::EmptyDataset);
    }
    in_pool(options.threads, || with_points!(points, |p| emst_typed(p, metric, options)))?
}

fn emst_typed<const D: usize>(points: &[Point<D>], metric: MetricKind, options: &EmstOptions) -> Result<MstResult> {
    let start = Instant::now();
    let bvh = Bvh::build(points)?;
    let tree = start.elapsed();
    let metric = match metric {
        MetricKind::Euclidean => Metric::Euclidean,
        MetricKind::MutualReachability { k_pts } => Metric::MutualReachability(compute_core_distances(&bvh, k_pts)?),
    };
    let core_distances = start.elapsed() - tree;
    let mut result = run_boruvka(&bvh, &metric, options.pruning)?;
    result.timings.tree = tree;
    result.timings.core_distances = core_distances;
    result.timings.total = start.elapsed();
    Ok(result)
}

/// Borůvka iterations over an existing hierarchy with a resolved metric.
pub fn boruvka_on_tree<const D: usize>(bvh: &Bvh<D>, metric: &Metric, options: &EmstOptions) -> Result<MstResult> {
    if let Metric::MutualReachability(c) = metric {
        if c.len() != bvh.num_points() {
            return Err(EmstError::DimensionMismatch { expected: bvh.num_points(), found: c.len() });
        }
    }
    in_pool(options.threads, || {
        let start = Instant::now();
        let mut result = run_boruvka(bvh, metric, options.pruning)?;
        result.timings.total = start.elapsed();
        Ok(result)
    })?
}

fn run_boruvka<const D: usize>(bvh: &Bvh<D>, metric: &Metric, pruning: Pruning) -> Result<MstResult> {
    let n = bvh.num_points();
    let mut state = ComponentState::singletons(bvh);
    let mut edges: Vec<WeightedEdge> = Vec::with_capacity(n.saturating_sub(1));
    let mut timings = PhaseTimings::default();
    let mut stats = RunStats { component_counts: vec![n], ..RunStats::default() };

    while state.num_components() > 1 {
        let mut it = IterationTimings::default();
        let t = Instant::now();
        if pruning.subtree_skipping {
            reduce_labels(bvh, &mut state);
        }
        it.reduce_labels = t.elapsed();

        let t = Instant::now();
        if pruning.upper_bounds {
            compute_upper_bounds(bvh, &mut state, metric);
        }
        it.upper_bounds = t.elapsed();

        let t = Instant::now();
        let search = find_component_outgoing_edges(bvh, &mut state, metric, pruning)?;
        stats.leaf_evaluations += search.leaf_evaluations;
        stats.nodes_visited += search.nodes_visited;
        it.find_edges = t.elapsed();

        let t = Instant::now();
        let before = state.num_components();
        let merged = merge_components(bvh, &mut state)?;
        if merged.num_components >= before {
            return Err(EmstError::InternalInvariantViolation(format!(
                "no progress: {before} components before merge, {} after",
                merged.num_components
            )));
        }
        edges.extend(merged.edges);
        stats.component_counts.push(merged.num_components);
        it.merge = t.elapsed();
        timings.iterations.push(it);
    }

    let t = Instant::now();
    if edges.len() + 1 != n {
        return Err(EmstError::InternalInvariantViolation(format!(
            "{} edges for {n} points",
            edges.len()
        )));
    }
    edges.par_sort_unstable();
    let total_weight = edges.iter().map(|e| e.weight).sum();
    timings.finalize = t.elapsed();

    Ok(MstResult { edges, total_weight, iterations: timings.iterations.len(), timings, stats })
}
