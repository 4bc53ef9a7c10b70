//! Brute-force references: dense Prim, Kruskal, k-nearest neighbors and
//! bichromatic minima over the implicit complete graph.
//!
//! Nothing here touches the hierarchy or the Borůvka machinery; the only
//! shared code is the pairwise distance and the edge total order.

use crate::error::{EmstError, Result};
use crate::geometry::{distance_slices, PointSet};
use crate::metric::{CoreDistances, Metric};
use crate::mst::{MstResult, WeightedEdge};

/// Largest input the quadratic oracles accept by default.
pub const DEFAULT_ORACLE_CAP: usize = 5_000;

fn pair_distance(points: &PointSet, u: usize, v: usize) -> f64 {
    distance_slices(points.point(u), points.point(v)).expect("points of one set share a dimension")
}

fn weight(points: &PointSet, metric: &Metric, u: usize, v: usize) -> f64 {
    let d = pair_distance(points, u, v);
    match metric {
        Metric::Euclidean => d,
        Metric::MutualReachability(c) => d.max(c.values()[u]).max(c.values()[v]),
    }
}

fn check(points: &PointSet, metric: &Metric, cap: usize) -> Result<usize> {
    let n = points.len();
    if n == 0 {
        return Err(EmstError::EmptyDataset);
    }
    if n > cap {
        return Err(EmstError::OracleCapExceeded { n, cap });
    }
    if let Metric::MutualReachability(c) = metric {
        if c.len() != n {
            return Err(EmstError::DimensionMismatch { expected: n, found: c.len() });
        }
    }
    Ok(n)
}

/// Dense O(n²) Prim over the complete graph, ties broken by the edge order.
pub fn prim_mst(points: &PointSet, metric: &Metric, cap: usize) -> Result<MstResult> {
    let n = check(points, metric, cap)?;
    let mut in_tree = vec![false; n];
    let mut best: Vec<Option<WeightedEdge>> = vec![None; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0usize;
    in_tree[0] = true;
    for _ in 1..n {
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let e = WeightedEdge::new(current as u32, v as u32, weight(points, metric, current, v));
            if best[v].is_none_or(|b| e < b) {
                best[v] = Some(e);
            }
        }
        let next = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by_key(|&v| best[v].expect("every outside vertex has a candidate").key())
            .expect("vertices remain");
        edges.push(best[next].expect("candidate exists"));
        in_tree[next] = true;
        current = next;
    }
    Ok(MstResult::from_edges(edges))
}

/// Kruskal over all n(n-1)/2 edges; a second, independent reference.
pub fn kruskal_mst(points: &PointSet, metric: &Metric, cap: usize) -> Result<MstResult> {
    let n = check(points, metric, cap)?;
    let mut all = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in u + 1..n {
            all.push(WeightedEdge::new(u as u32, v as u32, weight(points, metric, u, v)));
        }
    }
    all.sort_unstable();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut edges = Vec::with_capacity(n - 1);
    for e in all {
        let (a, b) = (find(&mut parent, e.u as usize), find(&mut parent, e.v as usize));
        if a != b {
            parent[a.max(b)] = a.min(b);
            edges.push(e);
            if edges.len() + 1 == n {
                break;
            }
        }
    }
    Ok(MstResult::from_edges(edges))
}

/// The `k` smallest distances from `query` to all points, itself included.
pub fn brute_knn(points: &PointSet, query: usize, k: usize) -> Result<Vec<f64>> {
    let n = points.len();
    if query >= n {
        return Err(EmstError::InvalidIndex { index: query, len: n });
    }
    if k == 0 || k > n {
        return Err(EmstError::InvalidParameter(format!("k = {k} must lie in [1, {n}]")));
    }
    let mut row: Vec<f64> = (0..n).map(|j| pair_distance(points, query, j)).collect();
    row.sort_unstable_by(f64::total_cmp);
    row.truncate(k);
    Ok(row)
}

/// Core distances from full distance rows.
pub fn brute_core_distances(points: &PointSet, k_pts: usize) -> Result<CoreDistances> {
    let values = (0..points.len())
        .map(|i| brute_knn(points, i, k_pts).map(|row| row[k_pts - 1]))
        .collect::<Result<Vec<_>>>()?;
    CoreDistances::new(k_pts, values)
}

/// Lightest edge leaving `component`, where `labels[i]` is the component
/// of point `i`.
pub fn brute_bichromatic_min(
    points: &PointSet,
    labels: &[u32],
    component: u32,
    metric: &Metric,
) -> Result<WeightedEdge> {
    let n = points.len();
    if labels.len() != n {
        return Err(EmstError::DimensionMismatch { expected: n, found: labels.len() });
    }
    let mut best: Option<WeightedEdge> = None;
    for u in (0..n).filter(|&u| labels[u] == component) {
        for v in (0..n).filter(|&v| labels[v] != component) {
            let e = WeightedEdge::new(u as u32, v as u32, weight(points, metric, u, v));
            if best.is_none_or(|b| e < b) {
                best = Some(e);
            }
        }
    }
    best.ok_or(EmstError::NoOutgoingEdge { component: component as usize })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points() {
        let ps = PointSet::new_2d(vec![[0.0, 0.0], [3.0, 4.0]]).unwrap();
        let r = prim_mst(&ps, &Metric::Euclidean, DEFAULT_ORACLE_CAP).unwrap();
        assert_eq!(r.edges, vec![WeightedEdge::new(0, 1, 5.0)]);
    }

    #[test]
    fn triangle_keeps_two_shortest_sides() {
        let ps = PointSet::new_2d(vec![[0.0, 0.0], [4.0, 0.0], [0.0, 3.0]]).unwrap();
        let r = prim_mst(&ps, &Metric::Euclidean, DEFAULT_ORACLE_CAP).unwrap();
        assert_eq!(r.pairs(), vec![(0, 2), (0, 1)]);
        assert_eq!(r.total_weight, 7.0);
    }

    #[test]
    fn cap_is_enforced() {
        let ps = PointSet::new_2d(vec![[0.0, 0.0]; 10]).unwrap();
        assert!(matches!(
            prim_mst(&ps, &Metric::Euclidean, 5),
            Err(EmstError::OracleCapExceeded { n: 10, cap: 5 })
        ));
    }

    #[test]
    fn knn_basics() {
        let ps = PointSet::new_2d(vec![[0.0, 0.0], [3.0, 4.0]]).unwrap();
        assert_eq!(brute_knn(&ps, 0, 1).unwrap(), vec![0.0]);
        assert_eq!(brute_knn(&ps, 0, 2).unwrap(), vec![0.0, 5.0]);
        assert!(matches!(brute_knn(&ps, 0, 3), Err(EmstError::InvalidParameter(_))));
    }

    #[test]
    fn bichromatic() {
        let ps = PointSet::new_2d(vec![[0.0, 0.0], [3.0, 4.0]]).unwrap();
        let e = brute_bichromatic_min(&ps, &[0, 1], 0, &Metric::Euclidean).unwrap();
        assert_eq!(e, WeightedEdge::new(0, 1, 5.0));
        assert!(matches!(
            brute_bichromatic_min(&ps, &[0, 0], 0, &Metric::Euclidean),
            Err(EmstError::NoOutgoingEdge { component: 0 })
        ));
    }

    #[test]
    fn prim_and_kruskal_agree_with_ties() {
        // Lattice points: many equal weights.
        let pts: Vec<[f32; 2]> = (0..49).map(|i| [(i % 7) as f32, (i / 7) as f32]).collect();
        let ps = PointSet::new_2d(pts).unwrap();
        let p = prim_mst(&ps, &Metric::Euclidean, DEFAULT_ORACLE_CAP).unwrap();
        let k = kruskal_mst(&ps, &Metric::Euclidean, DEFAULT_ORACLE_CAP).unwrap();
        assert_eq!(p.edges, k.edges);
        assert_eq!(p.total_weight, 48.0);
    }
}
