use std::cmp::Ordering;

/// An undirected weighted edge stored with `u < v`.
///
/// Edges are totally ordered by `(weight, u, v)`: equal weights are broken
/// by the smaller endpoint, then the larger one. Every minimum in the
/// engine and the oracles is taken under this order, which makes the
/// spanning tree unique.
#[derive(Clone, Copy, Debug)]
pub struct WeightedEdge {
    pub u: u32,
    pub v: u32,
    pub weight: f64,
}

impl WeightedEdge {
    /// Canonicalizes the endpoint order. Weights must be finite and
    /// non-negative.
    pub fn new(a: u32, b: u32, weight: f64) -> Self {
        debug_assert!(a != b, "self edge");
        debug_assert!(weight >= 0.0 && weight.is_finite(), "bad weight {weight}");
        let (u, v) = if a < b { (a, b) } else { (b, a) };
        Self { u, v, weight }
    }

    /// Sort key realizing the total order. Bit patterns of non-negative
    /// floats order like their values.
    #[inline]
    pub fn key(&self) -> (u64, u32, u32) {
        (self.weight.to_bits(), self.u, self.v)
    }

    pub(crate) fn from_key((w, u, v): (u64, u32, u32)) -> Self {
        Self { u, v, weight: f64::from_bits(w) }
    }

    pub fn endpoints(&self) -> (u32, u32) {
        (self.u, self.v)
    }
}

impl PartialEq for WeightedEdge {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for WeightedEdge {}

impl PartialOrd for WeightedEdge {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for WeightedEdge {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}
