//! Closed symmetric intervals and canonical finite unions of closed intervals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed interval `[center - half_width, center + half_width]`.
///
/// `half_width` may be `+inf`; such an interval covers the whole real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub center: f64,
    pub half_width: f64,
}

impl Interval {
    pub fn new(center: f64, half_width: f64) -> Self {
        debug_assert!(half_width >= 0.0, "negative half-width {half_width}");
        Self { center, half_width }
    }

    /// Length `2 * half_width`, `+inf` for an unbounded interval.
    pub fn length(&self) -> f64 {
        2.0 * self.half_width
    }

    pub fn contains(&self, y: f64) -> bool {
        (y - self.center).abs() <= self.half_width
    }

    pub fn lower(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.center + self.half_width
    }

    /// `self ⊆ other` as sets.
    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.half_width == f64::INFINITY
            || (self.lower() >= other.lower() && self.upper() <= other.upper())
    }
}

/// Length of an interval; free-function form of [`Interval::length`].
pub fn interval_length(iv: &Interval) -> f64 {
    iv.length()
}

/// A finite union of disjoint closed intervals `[lo, hi]`, sorted by `lo`.
///
/// Overlapping or touching parts are always merged, so the representation is
/// canonical: two unions are equal as sets iff their `parts` are equal.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IntervalUnion {
    parts: Vec<(f64, f64)>,
}

impl IntervalUnion {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parts(&self) -> &[(f64, f64)] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Lebesgue measure (sum of part lengths).
    pub fn measure(&self) -> f64 {
        self.parts.iter().map(|(lo, hi)| hi - lo).sum()
    }

    pub fn contains(&self, y: f64) -> bool {
        self.parts.iter().any(|&(lo, hi)| lo <= y && y <= hi)
    }

    /// Inserts `[left, right]`, merging with every part it overlaps or touches.
    pub fn insert(&mut self, left: f64, right: f64) -> Result<()> {
        if !(left <= right) {
            return Err(Error::InvalidInterval { left, right });
        }
        // First part whose right end reaches `left`.
        let start = self.parts.partition_point(|&(_, hi)| hi < left);
        // One past the last part whose left end is within `right`.
        let end = self.parts.partition_point(|&(lo, _)| lo <= right);
        let (mut lo, mut hi) = (left, right);
        if start < end {
            lo = lo.min(self.parts[start].0);
            hi = hi.max(self.parts[end - 1].1);
        }
        self.parts.splice(start..end, std::iter::once((lo, hi)));
        Ok(())
    }

    pub fn insert_interval(&mut self, iv: &Interval) -> Result<()> {
        self.insert(iv.lower(), iv.upper())
    }
}

/// Functional form of [`IntervalUnion::insert`].
pub fn union_insert(u: &IntervalUnion, left: f64, right: f64) -> Result<IntervalUnion> {
    let mut out = u.clone();
    out.insert(left, right)?;
    Ok(out)
}
