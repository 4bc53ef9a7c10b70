//! Euclidean minimum spanning trees with single-tree Borůvka over a linear
//! bounding volume hierarchy.
//!
//! ```
//! use emst::{boruvka_emst, EmstOptions, MetricKind, PointSet};
//!
//! let points = PointSet::new_2d(vec![[0.0, 0.0], [4.0, 0.0], [0.0, 3.0]])?;
//! let tree = boruvka_emst(&points, MetricKind::Euclidean, &EmstOptions::default())?;
//! assert_eq!(tree.pairs(), vec![(0, 2), (0, 1)]);
//! assert_eq!(tree.total_weight, 7.0);
//! # Ok::<(), emst::EmstError>(())
//! ```
//!
//! The guide in `book/` walks through each stage; its code blocks are
//! compiled and run as doc-tests of this crate.

pub mod bvh;
pub mod cli;
pub mod data;
mod error;
pub mod geometry;
pub mod metric;
pub mod mst;
pub mod oracle;

pub use error::{EmstError, Result};
pub use geometry::{Aabb, Point, PointSet, PointsRef};
pub use metric::{compute_core_distances, CoreDistances, Metric};
pub use mst::{boruvka_emst, EmstOptions, MetricKind, MstResult, Pruning, WeightedEdge};

macro_rules! book_chapters {
    ($($name:ident => $file:literal),* $(,)?) => {
        $(
            #[cfg(doctest)]
            #[doc = include_str!(concat!("../../../book/src/", $file))]
            mod $name {}
        )*
    };
}

book_chapters! {
    readme => "../../README.md",
    book_intro => "introduction.md",
    book_geometry => "geometry.md",
    book_bvh => "bvh.md",
    book_boruvka => "boruvka.md",
    book_mrd => "mutual-reachability.md",
    book_data => "data.md",
    book_cli => "cli.md",
}
