//! Axis-aligned boxes over a list of local dimensions.

use serde::{Deserialize, Serialize};

use crate::data::{Schema, VarId, VarKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extent {
    Interval { lo: f64, hi: f64 },
    /// Admissible discrete values, sorted and non-empty.
    Values(Vec<u32>),
}

impl Extent {
    pub fn is_continuous(&self) -> bool {
        matches!(self, Extent::Interval { .. })
    }

    pub fn contains(&self, x: f64) -> bool {
        match self {
            Extent::Interval { lo, hi } => *lo <= x && x <= *hi,
            Extent::Values(vs) => x >= 0.0 && x.fract() == 0.0 && vs.binary_search(&(x as u32)).is_ok(),
        }
    }

    /// Interval length, or the number of admissible values.
    pub fn measure(&self) -> f64 {
        match self {
            Extent::Interval { lo, hi } => hi - lo,
            Extent::Values(vs) => vs.len() as f64,
        }
    }

    pub fn interval(&self) -> (f64, f64) {
        match self {
            Extent::Interval { lo, hi } => (*lo, *hi),
            Extent::Values(_) => panic!("interval() on a discrete extent"),
        }
    }

    pub fn values(&self) -> &[u32] {
        match self {
            Extent::Values(vs) => vs,
            Extent::Interval { .. } => panic!("values() on a continuous extent"),
        }
    }

    pub fn midpoint(&self) -> f64 {
        let (lo, hi) = self.interval();
        0.5 * (lo + hi)
    }

    /// Whether the two extents share a set of positive measure.
    pub fn overlaps(&self, other: &Extent) -> bool {
        match (self, other) {
            (Extent::Interval { lo: a, hi: b }, Extent::Interval { lo: c, hi: d }) => a.max(*c) < b.min(*d),
            (Extent::Values(x), Extent::Values(y)) => x.iter().any(|v| y.binary_search(v).is_ok()),
            _ => false,
        }
    }

    /// Whether `self` lies inside `other`.
    pub fn within(&self, other: &Extent) -> bool {
        match (self, other) {
            (Extent::Interval { lo: a, hi: b }, Extent::Interval { lo: c, hi: d }) => c <= a && b <= d,
            (Extent::Values(x), Extent::Values(y)) => x.iter().all(|v| y.binary_search(v).is_ok()),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub dims: Vec<Extent>,
}

impl Region {
    pub fn new(dims: Vec<Extent>) -> Self {
        Region { dims }
    }

    pub fn unit(d: usize) -> Self {
        Region {
            dims: vec![Extent::Interval { lo: 0.0, hi: 1.0 }; d],
        }
    }

    /// Bounding region of the schema variables `vars`, in that order.
    pub fn from_schema(schema: &Schema, vars: &[VarId]) -> Self {
        Region {
            dims: vars
                .iter()
                .map(|&v| match schema.kind(v) {
                    VarKind::Continuous { lo, hi } => Extent::Interval { lo: *lo, hi: *hi },
                    VarKind::Discrete { arity, .. } => Extent::Values((0..*arity).collect()),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dims.len() && self.dims.iter().zip(point).all(|(e, &x)| e.contains(x))
    }

    /// Product of interval lengths over the continuous dimensions.
    pub fn volume(&self) -> f64 {
        self.dims
            .iter()
            .filter(|e| e.is_continuous())
            .map(Extent::measure)
            .product()
    }

    /// Product of interval lengths and value counts over all dimensions: the
    /// normalizer of the uniform distribution on the region.
    pub fn total_measure(&self) -> f64 {
        self.dims.iter().map(Extent::measure).product()
    }

    /// The two halves of a continuous dimension, split at its midpoint.
    pub fn halves(&self, dim: usize) -> (f64, Region, Region) {
        let (lo, hi) = self.dims[dim].interval();
        let mid = 0.5 * (lo + hi);
        let mut low = self.clone();
        let mut high = self.clone();
        low.dims[dim] = Extent::Interval { lo, hi: mid };
        high.dims[dim] = Extent::Interval { lo: mid, hi };
        (mid, low, high)
    }

    pub fn with_value(&self, dim: usize, value: u32) -> Region {
        let mut r = self.clone();
        r.dims[dim] = Extent::Values(vec![value]);
        r
    }

    pub fn center(&self) -> Vec<f64> {
        self.dims
            .iter()
            .map(|e| match e {
                Extent::Interval { lo, hi } => 0.5 * (lo + hi),
                Extent::Values(vs) => f64::from(vs[vs.len() / 2]),
            })
            .collect()
    }

    pub fn overlaps(&self, other: &Region) -> bool {
        self.dims.iter().zip(&other.dims).all(|(a, b)| a.overlaps(b))
    }

    pub fn within(&self, other: &Region) -> bool {
        self.dims.iter().zip(&other.dims).all(|(a, b)| a.within(b))
    }

    /// Whether a dimension can still be branched on.
    pub fn splittable(&self, dim: usize) -> bool {
        match &self.dims[dim] {
            Extent::Interval { lo, hi } => {
                let mid = 0.5 * (lo + hi);
                *lo < mid && mid < *hi
            }
            Extent::Values(vs) => vs.len() > 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halves_partition_interval() {
        let r = Region::new(vec![
            Extent::Interval { lo: 0.0, hi: 2.0 },
            Extent::Values(vec![0, 1, 2]),
        ]);
        let (mid, low, high) = r.halves(0);
        assert_eq!(mid, 1.0);
        assert_eq!(low.volume() + high.volume(), r.volume());
        assert!(!low.overlaps(&high));
        assert!(low.within(&r) && high.within(&r));
        assert_eq!(r.total_measure(), 6.0);
        assert!(!r.with_value(1, 2).splittable(1));
    }
}
