//! Linear bounding volume hierarchy over Z-ordered points.
//!
//! Leaves are the points in Morton order (leaf *slots*); the `n - 1`
//! internal nodes follow Karras' numbering, where internal node `i` covers
//! a contiguous slot range with one end at `i` and the root is node 0.
//! Boxes are filled by a bottom-up rendezvous sweep.

use std::ops::ControlFlow;
use std::sync::atomic::{AtomicU8, Ordering};
use std::sync::OnceLock;

use arrayvec::ArrayVec;
use rayon::prelude::*;

use crate::error::{EmstError, Result};
use crate::geometry::{distance, distance_point_box, morton_order, Aabb, Point};

/// Traversal stack capacity. Parent-to-child steps strictly increase the
/// common prefix length of the disambiguated 64 + 32 bit keys, so tree
/// depth stays below 96.
pub const STACK_CAPACITY: usize = 128;

const NONE: u32 = u32::MAX;

/// Reference to a leaf slot or an internal node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeRef(u32);

impl NodeRef {
    const LEAF_BIT: u32 = 1 << 31;

    pub fn leaf(slot: usize) -> Self {
        debug_assert!(slot < Self::LEAF_BIT as usize);
        NodeRef(slot as u32 | Self::LEAF_BIT)
    }

    pub fn internal(index: usize) -> Self {
        debug_assert!(index < Self::LEAF_BIT as usize);
        NodeRef(index as u32)
    }

    #[inline]
    pub fn is_leaf(self) -> bool {
        self.0 & Self::LEAF_BIT != 0
    }

    #[inline]
    pub fn index(self) -> usize {
        (self.0 & !Self::LEAF_BIT) as usize
    }
}

/// Binary linear BVH: `n` leaves and `n - 1` internal nodes.
#[derive(Clone, Debug)]
pub struct Bvh<const D: usize> {
    leaf_permutation: Vec<u32>,
    slot_of_point: Vec<u32>,
    leaf_points: Vec<Point<D>>,
    left: Vec<NodeRef>,
    right: Vec<NodeRef>,
    parent: Vec<u32>,
    leaf_parent: Vec<u32>,
    boxes: Vec<Aabb<D>>,
    root: NodeRef,
}

// Length of the common prefix of the keys at slots i and j, with the slot
// index appended below the code to break ties; -1 outside [0, n).
#[inline]
fn common_prefix(codes: &[u64], i: usize, j: i64) -> i64 {
    if j < 0 || j >= codes.len() as i64 {
        return -1;
    }
    let j = j as usize;
    let (a, b) = (codes[i], codes[j]);
    if a != b {
        i64::from((a ^ b).leading_zeros())
    } else {
        64 + i64::from(((i as u32) ^ (j as u32)).leading_zeros())
    }
}

// Children of internal node `i` (Karras 2012).
fn internal_children(codes: &[u64], i: usize) -> (NodeRef, NodeRef) {
    let ii = i as i64;
    let dir: i64 = if common_prefix(codes, i, ii + 1) > common_prefix(codes, i, ii - 1) {
        1
    } else {
        -1
    };
    let delta_min = common_prefix(codes, i, ii - dir);
    let mut l_max: i64 = 2;
    while common_prefix(codes, i, ii + l_max * dir) > delta_min {
        l_max *= 2;
    }
    let mut l: i64 = 0;
    let mut t = l_max / 2;
    while t >= 1 {
        if common_prefix(codes, i, ii + (l + t) * dir) > delta_min {
            l += t;
        }
        t /= 2;
    }
    let j = ii + l * dir;
    let delta_node = common_prefix(codes, i, j);
    let mut s: i64 = 0;
    let mut t = l;
    loop {
        t = (t + 1) / 2;
        if common_prefix(codes, i, ii + (s + t) * dir) > delta_node {
            s += t;
        }
        if t <= 1 {
            break;
        }
    }
    let gamma = ii + s * dir + dir.min(0);
    let (lo, hi) = (ii.min(j), ii.max(j));
    let left = if lo == gamma {
        NodeRef::leaf(gamma as usize)
    } else {
        NodeRef::internal(gamma as usize)
    };
    let right = if hi == gamma + 1 {
        NodeRef::leaf(gamma as usize + 1)
    } else {
        NodeRef::internal(gamma as usize + 1)
    };
    (left, right)
}

impl<const D: usize> Bvh<D> {
    /// Builds the hierarchy over `points`, ordered along the Z-curve.
    pub fn build(points: &[Point<D>]) -> Result<Self> {
        if points.is_empty() {
            return Err(EmstError::EmptyDataset);
        }
        let (perm, codes) = morton_order(points)?;
        let leaf_points = perm.par_iter().map(|&i| points[i as usize]).collect();
        Ok(Self::from_sorted(perm, &codes, leaf_points))
    }

    /// Builds the hierarchy from points already arranged by `codes`, which
    /// must be non-decreasing. `leaf_permutation[slot]` is the original
    /// index of the point in that slot.
    pub fn from_sorted_codes(
        leaf_permutation: Vec<u32>,
        codes: &[u64],
        leaf_points: Vec<Point<D>>,
    ) -> Result<Self> {
        let n = leaf_points.len();
        if n == 0 {
            return Err(EmstError::EmptyDataset);
        }
        if codes.len() != n || leaf_permutation.len() != n {
            return Err(EmstError::InvalidParameter("codes, permutation and points differ in length".into()));
        }
        if codes.windows(2).any(|w| w[0] > w[1]) {
            return Err(EmstError::InvalidParameter("codes are not sorted".into()));
        }
        let mut seen = vec![false; n];
        for &p in &leaf_permutation {
            match seen.get_mut(p as usize) {
                Some(s) if !*s => *s = true,
                _ => return Err(EmstError::InvalidParameter("leaf permutation is not a bijection".into())),
            }
        }
        Ok(Self::from_sorted(leaf_permutation, codes, leaf_points))
    }

    fn from_sorted(leaf_permutation: Vec<u32>, codes: &[u64], leaf_points: Vec<Point<D>>) -> Self {
        let n = leaf_points.len();
        let mut slot_of_point = vec![0u32; n];
        for (slot, &p) in leaf_permutation.iter().enumerate() {
            slot_of_point[p as usize] = slot as u32;
        }
        if n == 1 {
            return Self {
                leaf_permutation,
                slot_of_point,
                leaf_points,
                left: Vec::new(),
                right: Vec::new(),
                parent: Vec::new(),
                leaf_parent: vec![NONE],
                boxes: Vec::new(),
                root: NodeRef::leaf(0),
            };
        }
        let (left, right): (Vec<NodeRef>, Vec<NodeRef>) =
            (0..n - 1).into_par_iter().map(|i| internal_children(codes, i)).unzip();
        let mut parent = vec![NONE; n - 1];
        let mut leaf_parent = vec![NONE; n];
        for i in 0..n - 1 {
            for child in [left[i], right[i]] {
                if child.is_leaf() {
                    leaf_parent[child.index()] = i as u32;
                } else {
                    parent[child.index()] = i as u32;
                }
            }
        }
        let mut bvh = Self {
            leaf_permutation,
            slot_of_point,
            leaf_points,
            left,
            right,
            parent,
            leaf_parent,
            boxes: Vec::new(),
            root: NodeRef::internal(0),
        };
        let boxes = bvh.for_each_leaf_to_root(
            |slot| Aabb::from_point(&bvh.leaf_points[slot]),
            |_, a, b| ControlFlow::Continue(a.union(b)),
        );
        bvh.boxes = boxes.into_iter().map(|b| b.expect("every internal node is combined")).collect();
        bvh
    }

    pub fn num_points(&self) -> usize {
        self.leaf_points.len()
    }

    pub fn num_internal(&self) -> usize {
        self.left.len()
    }

    pub fn root(&self) -> NodeRef {
        self.root
    }

    /// Original point index of each leaf slot (the Z-order).
    pub fn leaf_permutation(&self) -> &[u32] {
        &self.leaf_permutation
    }

    /// Leaf slot holding each original point.
    pub fn slot_of_point(&self) -> &[u32] {
        &self.slot_of_point
    }

    /// Coordinates in leaf-slot order.
    pub fn leaf_points(&self) -> &[Point<D>] {
        &self.leaf_points
    }

    pub fn children(&self, internal: usize) -> (NodeRef, NodeRef) {
        (self.left[internal], self.right[internal])
    }

    pub fn parent(&self, node: NodeRef) -> Option<usize> {
        let p = if node.is_leaf() { self.leaf_parent[node.index()] } else { self.parent[node.index()] };
        (p != NONE).then_some(p as usize)
    }

    pub fn bounds(&self, node: NodeRef) -> Aabb<D> {
        if node.is_leaf() {
            Aabb::from_point(&self.leaf_points[node.index()])
        } else {
            self.boxes[node.index()]
        }
    }

    /// Bottom-up rendezvous sweep.
    ///
    /// Every leaf computes `leaf(slot)` and climbs toward the root. The first
    /// of two siblings to reach their parent stops there; the second runs
    /// `combine(parent, left_value, right_value)` and keeps climbing with the
    /// result, or stops if `combine` breaks. Each internal node is therefore
    /// combined at most once, after both children. Returns the value of every
    /// internal node, `None` where the climb never completed.
    pub fn for_each_leaf_to_root<T, L, C>(&self, leaf: L, combine: C) -> Vec<Option<T>>
    where
        T: Send + Sync,
        L: Fn(usize) -> T + Sync,
        C: Fn(usize, &T, &T) -> ControlFlow<(), T> + Sync,
    {
        let n = self.num_points();
        let m = self.num_internal();
        let leaf_values: Vec<OnceLock<T>> = (0..n).map(|_| OnceLock::new()).collect();
        let node_values: Vec<OnceLock<T>> = (0..m).map(|_| OnceLock::new()).collect();
        let arrivals: Vec<AtomicU8> = (0..m).map(|_| AtomicU8::new(0)).collect();
        let value_of = |r: NodeRef| -> &T {
            let cell = if r.is_leaf() { &leaf_values[r.index()] } else { &node_values[r.index()] };
            cell.get().expect("child value published before rendezvous")
        };
        (0..n).into_par_iter().for_each(|slot| {
            let _ = leaf_values[slot].set(leaf(slot));
            let mut node = self.leaf_parent[slot];
            while node != NONE {
                let i = node as usize;
                // AcqRel: the second arrival observes the first one's value.
                if arrivals[i].fetch_add(1, Ordering::AcqRel) == 0 {
                    return;
                }
                let value = match combine(i, value_of(self.left[i]), value_of(self.right[i])) {
                    ControlFlow::Continue(v) => v,
                    ControlFlow::Break(()) => return,
                };
                let _ = node_values[i].set(value);
                node = self.parent[i];
            }
        });
        node_values.into_iter().map(OnceLock::into_inner).collect()
    }

    /// Top-down nearest-neighbor style traversal from `point`.
    ///
    /// Internal nodes farther than the query's current radius, or rejected by
    /// [`NearestQuery::skip_internal`], are pruned together with their
    /// subtree. Leaves not rejected by [`NearestQuery::skip_leaf`] and within
    /// the radius are handed to [`NearestQuery::visit_leaf`]. The nearer
    /// child is explored first.
    pub fn traverse_nearest<Q: NearestQuery>(&self, point: &Point<D>, query: &mut Q) -> TraversalStats {
        let mut stats = TraversalStats::default();
        if self.root.is_leaf() {
            if !query.skip_leaf(0) {
                stats.leaf_evaluations += 1;
                let d = distance(point, &self.leaf_points[0]);
                if d <= query.radius() {
                    query.visit_leaf(0, d);
                }
            }
            return stats;
        }
        let mut stack: ArrayVec<(u32, f64), STACK_CAPACITY> = ArrayVec::new();
        stack.push((0, distance_point_box(point, &self.boxes[0])));
        while let Some((node, node_distance)) = stack.pop() {
            if node_distance > query.radius() {
                continue;
            }
            stats.nodes_visited += 1;
            let i = node as usize;
            let mut pending: [(u32, f64); 2] = [(NONE, 0.0); 2];
            for (k, child) in [self.left[i], self.right[i]].into_iter().enumerate() {
                if child.is_leaf() {
                    let slot = child.index();
                    if query.skip_leaf(slot) {
                        continue;
                    }
                    stats.leaf_evaluations += 1;
                    let d = distance(point, &self.leaf_points[slot]);
                    if d <= query.radius() {
                        query.visit_leaf(slot, d);
                    }
                } else {
                    let c = child.index();
                    if query.skip_internal(c) {
                        continue;
                    }
                    let d = distance_point_box(point, &self.boxes[c]);
                    if d <= query.radius() {
                        pending[k] = (c as u32, d);
                    }
                }
            }
            let [a, b] = pending;
            // Push the farther child first so the nearer one pops next.
            let (first, second) = if a.1 <= b.1 { (b, a) } else { (a, b) };
            for entry in [first, second] {
                if entry.0 != NONE
                    && stack.try_push(entry).is_err() {
                        panic!("BVH traversal stack overflow (capacity {STACK_CAPACITY})");
                    }
            }
        }
        stats
    }
}

/// Query-local state driven by [`Bvh::traverse_nearest`].
pub trait NearestQuery {
    /// Current cutoff radius; may shrink as leaves are accepted.
    fn radius(&self) -> f64;

    /// Whether the subtree under an internal node can be skipped outright.
    fn skip_internal(&self, _internal: usize) -> bool {
        false
    }

    /// Whether a leaf can be skipped without evaluating its distance.
    fn skip_leaf(&self, _slot: usize) -> bool {
        false
    }

    /// Called for a leaf within the radius with its Euclidean distance.
    fn visit_leaf(&mut self, slot: usize, distance: f64);
}

/// Work counters for one traversal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TraversalStats {
    pub nodes_visited: u64,
    pub leaf_evaluations: u64,
}

impl std::ops::AddAssign for TraversalStats {
    fn add_assign(&mut self, rhs: Self) {
        self.nodes_visited += rhs.nodes_visited;
        self.leaf_evaluations += rhs.leaf_evaluations;
    }
}
