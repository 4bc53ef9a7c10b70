//! Points, axis-aligned boxes, distances and Morton (Z-curve) ordering.
//!
//! Coordinates are stored as `f32`. Every distance is evaluated in `f64`
//! from the exact `f64` images of those coordinates, so two routes that
//! compute the distance between the same pair of points always agree bit
//! for bit.

use rayon::prelude::*;

use crate::error::{EmstError, Result};

/// A point with `D` coordinates.
pub type Point<const D: usize> = [f32; D];

/// Dimensions supported by the engine.
pub const SUPPORTED_DIMS: [usize; 2] = [2, 3];

/// An owned set of 2D or 3D points with finite coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    repr: Repr,
}

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    D2(Vec<Point<2>>),
    D3(Vec<Point<3>>),
}

/// Borrowed, dimension-typed view of a [`PointSet`].
#[derive(Clone, Copy, Debug)]
pub enum PointsRef<'a> {
    D2(&'a [Point<2>]),
    D3(&'a [Point<3>]),
}

/// Runs `$body` with `$p` bound to the typed coordinate slice of a point set.
macro_rules! with_points {
    ($set:expr, |$p:ident| $body:expr) => {
        match $set.view() {
            $crate::geometry::PointsRef::D2($p) => $body,
            $crate::geometry::PointsRef::D3($p) => $body,
        }
    };
}
pub(crate) use with_points;

fn check_finite<const D: usize>(points: &[Point<D>]) -> Result<()> {
    for (i, p) in points.iter().enumerate() {
        if let Some(axis) = p.iter().position(|c| !c.is_finite()) {
            return Err(EmstError::InvalidCoordinate { point: i, axis });
        }
    }
    Ok(())
}

impl PointSet {
    pub fn new_2d(points: Vec<Point<2>>) -> Result<Self> {
        check_finite(&points)?;
        Ok(Self { repr: Repr::D2(points) })
    }

    pub fn new_3d(points: Vec<Point<3>>) -> Result<Self> {
        check_finite(&points)?;
        Ok(Self { repr: Repr::D3(points) })
    }

    /// Builds a point set from row-major coordinates.
    pub fn from_flat(dim: usize, coords: &[f32]) -> Result<Self> {
        if !SUPPORTED_DIMS.contains(&dim) {
            return Err(EmstError::UnsupportedDimension(dim));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(EmstError::InvalidParameter(format!(
                "{} coordinates is not a multiple of dimension {dim}",
                coords.len()
            )));
        }
        match dim {
            2 => Self::new_2d(coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect()),
            _ => Self::new_3d(coords.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()),
        }
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            Repr::D2(_) => 2,
            Repr::D3(_) => 3,
        }
    }

    pub fn len(&self) -> usize {
        match &self.repr {
            Repr::D2(p) => p.len(),
            Repr::D3(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn view(&self) -> PointsRef<'_> {
        match &self.repr {
            Repr::D2(p) => PointsRef::D2(p),
            Repr::D3(p) => PointsRef::D3(p),
        }
    }

    /// Coordinates of point `i`.
    pub fn point(&self, i: usize) -> &[f32] {
        match &self.repr {
            Repr::D2(p) => &p[i],
            Repr::D3(p) => &p[i],
        }
    }

    /// Row-major copy of all coordinates.
    pub fn to_flat(&self) -> Vec<f32> {
        with_points!(self, |p| p.iter().flatten().copied().collect())
    }

    /// Subset of the points in the order given by `indices`.
    pub fn select(&self, indices: &[usize]) -> PointSet {
        let repr = match &self.repr {
            Repr::D2(p) => Repr::D2(indices.iter().map(|&i| p[i]).collect()),
            Repr::D3(p) => Repr::D3(indices.iter().map(|&i| p[i]).collect()),
        };
        PointSet { repr }
    }
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb<const D: usize> {
    pub min: Point<D>,
    pub max: Point<D>,
}

impl<const D: usize> Aabb<D> {
    pub fn from_point(p: &Point<D>) -> Self {
        Self { min: *p, max: *p }
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut out = *self;
        for k in 0..D {
            out.min[k] = out.min[k].min(other.min[k]);
            out.max[k] = out.max[k].max(other.max[k]);
        }
        out
    }

    pub fn contains_point(&self, p: &Point<D>) -> bool {
        (0..D).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }

    pub fn contains(&self, other: &Self) -> bool {
        (0..D).all(|k| self.min[k] <= other.min[k] && other.max[k] <= self.max[k])
    }
}

/// Tight bounding box of a non-empty point slice.
pub fn scene_bounds<const D: usize>(points: &[Point<D>]) -> Result<Aabb<D>> {
    let first = points.first().ok_or(EmstError::EmptyDataset)?;
    Ok(points
        .par_iter()
        .fold(|| Aabb::from_point(first), |b, p| b.union(&Aabb::from_point(p)))
        .reduce(|| Aabb::from_point(first), |a, b| a.union(&b)))
}

#[inline]
pub(crate) fn distance_squared<const D: usize>(u: &Point<D>, v: &Point<D>) -> f64 {
    let mut sum = 0.0f64;
    for k in 0..D {
        let diff = f64::from(u[k]) - f64::from(v[k]);
        sum += diff * diff;
    }
    sum
}

/// Euclidean distance, evaluated in `f64`.
#[inline]
pub fn distance<const D: usize>(u: &Point<D>, v: &Point<D>) -> f64 {
    distance_squared(u, v).sqrt()
}

/// Euclidean distance between two coordinate slices of equal length.
pub fn distance_slices(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(EmstError::DimensionMismatch { expected: u.len(), found: v.len() });
    }
    let sum: f64 = u
        .iter()
        .zip(v)
        .map(|(&a, &b)| {
            let diff = f64::from(a) - f64::from(b);
            diff * diff
        })
        .sum();
    Ok(sum.sqrt())
}

/// Distance from `p` to the nearest point of `b`; zero inside the box.
///
/// Uses the same per-axis arithmetic as [`distance`], and rounding is
/// monotone, so the result never exceeds the distance to any point of `b`.
#[inline]
#[allow(clippy::needless_range_loop)]
pub fn distance_point_box<const D: usize>(p: &Point<D>, b: &Aabb<D>) -> f64 {
    let mut sum = 0.0f64;
    for k in 0..D {
        let x = f64::from(p[k]);
        let lo = f64::from(b.min[k]);
        let hi = f64::from(b.max[k]);
        let diff = if x < lo {
            lo - x
        } else if x > hi {
            x - hi
        } else {
            0.0
        };
        sum += diff * diff;
    }
    sum.sqrt()
}

/// Bit-interleaved quantized coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MortonCode(pub u64);

/// Grid bits per axis: 31 in 2D, 21 in 3D.
pub const fn morton_bits_per_axis(dim: usize) -> u32 {
    if dim == 2 {
        31
    } else {
        21
    }
}

// Largest f64 strictly below 1.
const ONE_MINUS_EPS: f64 = 1.0 - f64::EPSILON / 2.0;

fn quantize(x: f32, lo: f32, hi: f32, bits: u32) -> u64 {
    let extent = f64::from(hi) - f64::from(lo);
    if extent <= 0.0 {
        return 0;
    }
    let t = ((f64::from(x) - f64::from(lo)) / extent).clamp(0.0, ONE_MINUS_EPS);
    (t * (1u64 << bits) as f64) as u64
}

// Spread the low 31 bits of `x` to the even bit positions.
fn spread_by_1(x: u64) -> u64 {
    let mut x = x & 0x7fff_ffff;
    x = (x | (x << 16)) & 0x0000_ffff_0000_ffff;
    x = (x | (x << 8)) & 0x00ff_00ff_00ff_00ff;
    x = (x | (x << 4)) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

// Spread the low 21 bits of `x` to every third bit position.
fn spread_by_2(x: u64) -> u64 {
    let mut x = x & 0x1f_ffff;
    x = (x | (x << 32)) & 0x001f_0000_0000_ffff;
    x = (x | (x << 16)) & 0x001f_0000_ff00_00ff;
    x = (x | (x << 8)) & 0x100f_00f0_0f00_f00f;
    x = (x | (x << 4)) & 0x10c3_0c30_c30c_30c3;
    x = (x | (x << 2)) & 0x1249_2492_4924_9249;
    x
}

#[inline]
#[allow(clippy::needless_range_loop)]
pub(crate) fn morton_encode_unchecked<const D: usize>(p: &Point<D>, bounds: &Aabb<D>) -> u64 {
    let bits = morton_bits_per_axis(D);
    let mut code = 0u64;
    for k in 0..D {
        let cell = quantize(p[k], bounds.min[k], bounds.max[k], bits);
        let spread = if D == 2 { spread_by_1(cell) } else { spread_by_2(cell) };
        // x occupies the most significant lane of each group.
        code |= spread << (D - 1 - k);
    }
    code
}

/// Morton code of `p` on the grid spanned by `bounds`. Points outside the
/// box are clamped onto it; axes with zero extent quantize to cell 0.
pub fn morton_encode<const D: usize>(p: &Point<D>, bounds: &Aabb<D>) -> Result<MortonCode> {
    if let Some(axis) = p.iter().position(|c| !c.is_finite()) {
        return Err(EmstError::InvalidCoordinate { point: 0, axis });
    }
    Ok(MortonCode(morton_encode_unchecked(p, bounds)))
}

/// Z-order permutation and the matching sorted codes.
pub(crate) fn morton_order<const D: usize>(points: &[Point<D>]) -> Result<(Vec<u32>, Vec<u64>)> {
    let bounds = scene_bounds(points)?;
    let n = u32::try_from(points.len())
        .ok()
        .filter(|&n| n < u32::MAX)
        .ok_or_else(|| EmstError::InvalidParameter("too many points".into()))?;
    let mut keyed: Vec<(u64, u32)> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| (morton_encode_unchecked(p, &bounds), i as u32))
        .collect();
    debug_assert_eq!(keyed.len(), n as usize);
    // Keys are unique, so the unstable sort is still a pure function of the input.
    keyed.par_sort_unstable();
    Ok(keyed.into_par_iter().map(|(c, i)| (i, c)).unzip())
}

/// Point indices ordered by `(Morton code, index)`.
pub fn sort_by_morton<const D: usize>(points: &[Point<D>]) -> Result<Vec<u32>> {
    Ok(morton_order(points)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference interleaver: one bit at a time, x first within each group.
    fn naive_interleave(cells: &[u64], bits: u32) -> u64 {
        let d = cells.len() as u32;
        let mut code = 0u64;
        for b in 0..bits {
            for (k, &c) in cells.iter().enumerate() {
                let bit = (c >> b) & 1;
                code |= bit << (b * d + (d - 1 - k as u32));
            }
        }
        code
    }

    #[test]
    fn bounds_of_two_points() {
        let b = scene_bounds(&[[0.0, 0.0], [1.0, 2.0]]).unwrap();
        assert_eq!(b.min, [0.0, 0.0]);
        assert_eq!(b.max, [1.0, 2.0]);
    }

    #[test]
    fn bounds_of_single_point_is_degenerate() {
        let b = scene_bounds(&[[5.0, 5.0, 5.0]]).unwrap();
        assert_eq!(b.min, b.max);
        assert_eq!(b.min, [5.0; 3]);
    }

    #[test]
    fn bounds_of_nothing_is_an_error() {
        let empty: [Point<2>; 0] = [];
        assert!(matches!(scene_bounds(&empty), Err(EmstError::EmptyDataset)));
    }

    #[test]
    fn morton_corners() {
        let b = Aabb { min: [0.0, 0.0], max: [1.0, 1.0] };
        assert_eq!(morton_encode(&b.min, &b).unwrap(), MortonCode(0));
        assert_eq!(morton_encode(&b.max, &b).unwrap(), MortonCode((1u64 << 62) - 1));
        let b3 = Aabb { min: [-1.0; 3], max: [2.0; 3] };
        assert_eq!(morton_encode(&b3.min, &b3).unwrap(), MortonCode(0));
        assert_eq!(morton_encode(&b3.max, &b3).unwrap(), MortonCode((1u64 << 63) - 1));
    }

    #[test]
    fn morton_lowest_x_lane() {
        // Cell (1, 0) on the 2^31 grid.
        let b = Aabb { min: [0.0f32, 0.0], max: [1.0, 1.0] };
        let x = 1.5 / (1u64 << 31) as f64;
        let code = morton_encode(&[x as f32, 0.0], &b).unwrap();
        assert_eq!(code, MortonCode(naive_interleave(&[1, 0], 31)));
        assert_eq!(code, MortonCode(0b10));
    }

    #[test]
    fn spreading_matches_reference_on_small_grids() {
        for x in 0..64u64 {
            for y in 0..64u64 {
                let fast = (spread_by_1(x) << 1) | spread_by_1(y);
                assert_eq!(fast, naive_interleave(&[x, y], 31));
                for z in [0u64, 1, 5, 63] {
                    let fast = (spread_by_2(x) << 2) | (spread_by_2(y) << 1) | spread_by_2(z);
                    assert_eq!(fast, naive_interleave(&[x, y, z], 21));
                }
            }
        }
        let top31 = (1u64 << 31) - 1;
        assert_eq!(spread_by_1(top31), naive_interleave(&[top31, 0], 31) >> 1);
        let top21 = (1u64 << 21) - 1;
        assert_eq!(spread_by_2(top21), naive_interleave(&[top21, 0, 0], 21) >> 2);
    }

    #[test]
    fn degenerate_axis_quantizes_to_zero() {
        let b = Aabb { min: [0.0, 3.0], max: [1.0, 3.0] };
        let code = morton_encode(&[0.0, 3.0], &b).unwrap();
        assert_eq!(code.0, 0);
    }

    #[test]
    fn non_finite_coordinate_is_rejected() {
        let b = Aabb { min: [0.0, 0.0], max: [1.0, 1.0] };
        assert!(matches!(
            morton_encode(&[f32::NAN, 0.0], &b),
            Err(EmstError::InvalidCoordinate { axis: 0, .. })
        ));
        assert!(PointSet::new_2d(vec![[0.0, f32::INFINITY]]).is_err());
    }

    #[test]
    fn sort_identity_cases() {
        assert_eq!(sort_by_morton(&[[3.0f32, 4.0]]).unwrap(), vec![0]);
        // Already in Z-order: corners of the unit square.
        let pts = [[0.0f32, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        assert_eq!(sort_by_morton(&pts).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn coincident_points_sort_by_index() {
        let pts = vec![[2.0f32, 2.0]; 7];
        assert_eq!(sort_by_morton(&pts).unwrap(), (0..7).collect::<Vec<u32>>());
    }

    #[test]
    fn distances() {
        assert_eq!(distance(&[0.0, 0.0], &[3.0, 4.0]), 5.0);
        assert_eq!(distance(&[1.5, -2.0, 7.0], &[1.5, -2.0, 7.0]), 0.0);
        assert_eq!(distance_slices(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert!(matches!(
            distance_slices(&[0.0, 0.0], &[1.0, 1.0, 1.0]),
            Err(EmstError::DimensionMismatch { expected: 2, found: 3 })
        ));
        let b = Aabb { min: [0.0, 0.0], max: [1.0, 1.0] };
        assert_eq!(distance_point_box(&[0.5, 0.5], &b), 0.0);
        assert_eq!(distance_point_box(&[2.0, 0.0], &b), 1.0);
    }

    #[test]
    fn flat_round_trip_and_errors() {
        let ps = PointSet::from_flat(3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(ps.len(), 2);
        assert_eq!(ps.point(1), &[4.0, 5.0, 6.0]);
        assert_eq!(ps.to_flat(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert!(matches!(PointSet::from_flat(4, &[]), Err(EmstError::UnsupportedDimension(4))));
        assert!(PointSet::from_flat(2, &[1.0, 2.0, 3.0]).is_err());
    }
}
