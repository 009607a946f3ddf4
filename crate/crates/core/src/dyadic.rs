//! Dyadic intervals `(j 2^-n, (j+1) 2^-n]` and half-open real intervals.
//!
//! Dyadic intervals are stored as the integer pair `(j, n)`; endpoints are only
//! materialized as floats on request, so containment and disjointness between
//! dyadic intervals are decided exactly.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported |scale|. Keeps `2^-n` a normal double.
pub const MAX_SCALE: i32 = 1000;

const INDEX_LIMIT: f64 = 4_503_599_627_370_496.0; // 2^52

/// Exact power of two for `|e| <= MAX_SCALE`.
pub(crate) fn pow2(e: i32) -> f64 {
    assert!(e.abs() <= 1022);
    f64::from_bits(((1023 + e as i64) as u64) << 52)
}

/// Half-open interval `(lo, hi]`. Either end may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidArgument(format!("bad interval ({lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    /// The whole real line.
    pub const fn real_line() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x <= self.hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Intersection, possibly empty (`lo >= hi`).
    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.max(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}]", self.lo, self.hi)
    }
}

/// The dyadic interval `(j 2^-n, (j+1) 2^-n]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub j: i64,
    pub n: i32,
}

fn check_scale(n: i64) -> Result<i32> {
    if n.abs() > MAX_SCALE as i64 {
        Err(Error::ScaleOutOfRange(n))
    } else {
        Ok(n as i32)
    }
}

impl DyadicInterval {
    pub fn new(j: i64, n: i32) -> Result<Self> {
        check_scale(n as i64)?;
        Ok(Self { j, n })
    }

    /// The unique interval of scale `n` containing `x` (left-open, right-closed).
    pub fn containing(x: f64, n: i32) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::NonFinite("DyadicInterval::containing"));
        }
        check_scale(n as i64)?;
        // Multiplication by a power of two is exact away from overflow. Beyond
        // 2^52 the neighbouring indices are no longer representable, so the
        // float endpoints could not separate x from the interval boundary.
        let scaled = x * pow2(n);
        if !scaled.is_finite() || scaled.abs() >= INDEX_LIMIT {
            return Err(Error::IndexOverflow { x, scale: n });
        }
        let j = scaled.ceil() as i64 - 1;
        Ok(Self { j, n })
    }

    pub fn parent(&self) -> Result<Self> {
        let n = check_scale(self.n as i64 - 1)?;
        Ok(Self {
            j: self.j.div_euclid(2),
            n,
        })
    }

    pub fn children(&self) -> Result<[Self; 2]> {
        let n = check_scale(self.n as i64 + 1)?;
        let j = self
            .j
            .checked_mul(2)
            .ok_or(Error::ScaleOutOfRange(n as i64))?;
        Ok([Self { j, n }, Self { j: j + 1, n }])
    }

    pub fn left(&self) -> f64 {
        self.j as f64 * pow2(-self.n)
    }

    pub fn right(&self) -> f64 {
        (self.j as f64 + 1.0) * pow2(-self.n)
    }

    /// `|Q| = 2^-n`, exact.
    pub fn length(&self) -> f64 {
        pow2(-self.n)
    }

    pub fn center(&self) -> f64 {
        (self.j as f64 + 0.5) * pow2(-self.n)
    }

    pub fn as_interval(&self) -> Interval {
        Interval {
            lo: self.left(),
            hi: self.right(),
        }
    }

    /// `2Q = (c(Q) - |Q|, c(Q) + |Q|]`.
    pub fn scaled_double(&self) -> Interval {
        let c = self.center();
        let l = self.length();
        Interval {
            lo: c - l,
            hi: c + l,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.as_interval().contains(x)
    }

    /// Exact nesting test: `other ⊆ self`.
    pub fn contains_interval(&self, other: &DyadicInterval) -> bool {
        if other.n < self.n {
            return false;
        }
        let shift = (other.n - self.n) as u32;
        if shift >= 63 {
            // `other` is far finer; compare through its ancestor at scale self.n.
            return other.ancestor_at(self.n) == Some(*self);
        }
        other.j >> shift == self.j
    }

    /// The ancestor of `self` at a coarser (or equal) scale.
    pub fn ancestor_at(&self, n: i32) -> Option<Self> {
        if n > self.n {
            return None;
        }
        let shift = (self.n - n) as u32;
        let j = if shift >= 63 {
            if self.j < 0 {
                -1
            } else {
                0
            }
        } else {
            self.j >> shift
        };
        Some(Self { j, n })
    }

    pub fn is_disjoint(&self, other: &DyadicInterval) -> bool {
        !self.contains_interval(other) && !other.contains_interval(self)
    }
}

impl PartialOrd for DyadicInterval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Orders by left endpoint, then coarser scale first.
impl Ord for DyadicInterval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.left()
            .total_cmp(&other.left())
            .then(self.n.cmp(&other.n))
    }
}

impl fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}] [j={}, n={}]", self.left(), self.right(), self.j, self.n)
    }
}
