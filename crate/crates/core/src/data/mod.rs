//! Synthetic datasets, subsampling and point/edge file formats.
//!
//! # Random streams
//!
//! All randomness comes from SplitMix64 (Steele, Lea and Flood, 2014): the
//! state starts at the seed, advances by `0x9E3779B97F4A7C15` per draw and
//! each output is mixed with the constants `0xBF58476D1CE4E5B9` and
//! `0x94D049BB133111EB`. From an output `x`:
//!
//! * a uniform `f64` in `[0, 1)` is `(x >> 11) * 2^-53`;
//! * a standard normal pair comes from Box–Muller on two uniforms `a, b`:
//!   `r = sqrt(-2 ln(1 - a))`, values `r cos(2πb)` then `r sin(2πb)`;
//! * an index below `m` is `x % m`.
//!
//! Coordinates are drawn point by point, axis by axis, and rounded to `f32`
//! last. Any port that follows these rules reproduces the same files.

mod io;

use std::f64::consts::TAU;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

pub use io::{read_bin, read_csv, read_edges, read_points, write_bin, write_csv, write_edges, write_points, Format};

use crate::error::{EmstError, Result};
use crate::geometry::{PointSet, SUPPORTED_DIMS};

/// Seeded stream of uniforms and normals.
pub struct Stream {
    rng: SplitMix64,
    spare_normal: Option<f64>,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self { rng: SplitMix64::seed_from_u64(seed), spare_normal: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let a = self.uniform();
        let b = self.uniform();
        let r = (-2.0 * (1.0 - a).ln()).sqrt();
        self.spare_normal = Some(r * (TAU * b).sin());
        r * (TAU * b).cos()
    }

    /// Index in `[0, bound)`.
    pub fn below(&mut self, bound: u64) -> u64 {
        self.next_u64() % bound
    }
}

/// Point distributions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DatasetKind {
    /// Uniform in the unit cube centered at the origin.
    Uniform,
    /// Independent standard normal coordinates.
    Normal,
    /// Equal-weight isotropic Gaussian blobs. Point `i` belongs to blob
    /// `i % blobs`; centers are uniform in `[-1, 1]^d`, drawn first.
    ClusteredBlobs { blobs: usize, spread: f64 },
}

/// Everything needed to regenerate a dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(EmstError::InvalidParameter("n must be at least 1".into()));
        }
        if !SUPPORTED_DIMS.contains(&self.dim) {
            return Err(EmstError::UnsupportedDimension(self.dim));
        }
        if let DatasetKind::ClusteredBlobs { blobs, spread } = self.kind {
            if blobs == 0 || !(spread >= 0.0 && spread.is_finite()) {
                return Err(EmstError::InvalidParameter(format!(
                    "blobs = {blobs}, spread = {spread} (need blobs >= 1, finite spread >= 0)"
                )));
            }
        }
        Ok(())
    }

    /// Short identifier used in reports, e.g. `uniform-2d-n1000-s7`.
    pub fn id(&self) -> String {
        let kind = match self.kind {
            DatasetKind::Uniform => "uniform".to_string(),
            DatasetKind::Normal => "normal".to_string(),
            DatasetKind::ClusteredBlobs { blobs, .. } => format!("blobs{blobs}"),
        };
        format!("{kind}-{}d-n{}-s{}", self.dim, self.n, self.seed)
    }
}

/// Generates the dataset described by `spec`.
pub fn generate(spec: &DatasetSpec) -> Result<PointSet> {
    spec.validate()?;
    let mut s = Stream::new(spec.seed);
    let d = spec.dim;
    let mut coords = Vec::with_capacity(spec.n * d);
    match spec.kind {
        DatasetKind::Uniform => {
            for _ in 0..spec.n * d {
                coords.push((s.uniform() - 0.5) as f32);
            }
        }
        DatasetKind::Normal => {
            for _ in 0..spec.n * d {
                coords.push(s.normal() as f32);
            }
        }
        DatasetKind::ClusteredBlobs { blobs, spread } => {
            let centers: Vec<f64> = (0..blobs * d).map(|_| 2.0 * s.uniform() - 1.0).collect();
            for i in 0..spec.n {
                let c = &centers[(i % blobs) * d..][..d];
                for &ck in c {
                    coords.push((ck + spread * s.normal()) as f32);
                }
            }
        }
    }
    PointSet::from_flat(d, &coords)
}

/// Uniform sample of `m` distinct points without replacement (partial
/// Fisher–Yates: for `i` in `0..m`, swap `i` with `i + below(n - i)`).
pub fn sample(points: &PointSet, m: usize, seed: u64) -> Result<PointSet> {
    Ok(points.select(&sample_indices(points.len(), m, seed)?))
}

/// Indices selected by [`sample`].
pub fn sample_indices(n: usize, m: usize, seed: u64) -> Result<Vec<usize>> {
    if m > n {
        return Err(EmstError::InvalidParameter(format!("cannot sample {m} of {n} points")));
    }
    let mut s = Stream::new(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = i + s.below((n - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(m);
    Ok(idx)
}
