use std::fmt;

use crate::error::{Error, Result};

/// Ambient dimensions of the phase space: base dimension `n` and order `k`.
///
/// The coordinates are `x(1)..x(n)` at level 0 and `y(m,1)..y(m,n)` at levels
/// `m = 1..k`, for a total of `(k + 1) * n` slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Context {
    pub n: usize,
    pub k: usize,
}

impl Context {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::Invalid(format!(
                "context requires n >= 1 and k >= 1, got n = {n}, k = {k}"
            )));
        }
        Ok(Context { n, k })
    }

    /// Total number of coordinates, `(k + 1) * n`.
    pub fn slots(&self) -> usize {
        (self.k + 1) * self.n
    }

    /// Same order, `extra` additional base coordinates (used for auxiliary
    /// parameters such as a curve parameter or a scaling constant).
    pub fn extended(&self, extra: usize) -> Context {
        Context {
            n: self.n + extra,
            k: self.k,
        }
    }

    pub fn contains(&self, c: CoordId) -> bool {
        c.level <= self.k && c.index >= 1 && c.index <= self.n
    }

    pub fn check(&self, c: CoordId) -> Result<()> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(Error::CoordOutOfRange(format!(
                "{c} not valid for n = {}, k = {}",
                self.n, self.k
            )))
        }
    }

    /// Natural-frame slot of a coordinate: levels are laid out consecutively,
    /// `x(i)` first, then `y(1,i)`, ..., `y(k,i)`.
    pub fn slot_of(&self, c: CoordId) -> usize {
        c.level * self.n + (c.index - 1)
    }

    pub fn coord_of_slot(&self, slot: usize) -> CoordId {
        CoordId {
            level: slot / self.n,
            index: slot % self.n + 1,
        }
    }

    /// All coordinates in slot order.
    pub fn coords(&self) -> impl Iterator<Item = CoordId> + '_ {
        (0..self.slots()).map(|s| self.coord_of_slot(s))
    }
}

/// One coordinate of the phase space: `level` 0 is the base coordinate
/// `x(index)`, level `m >= 1` is `y(m, index)`. Indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CoordId {
    pub level: usize,
    pub index: usize,
}

impl CoordId {
    pub fn base(index: usize) -> Self {
        CoordId { level: 0, index }
    }

    pub fn velocity(level: usize, index: usize) -> Self {
        CoordId { level, index }
    }
}

impl fmt::Display for CoordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.level == 0 {
            write!(f, "x({})", self.index)
        } else {
            write!(f, "y({},{})", self.level, self.index)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slot_layout_roundtrips() {
        let ctx = Context::new(2, 3).unwrap();
        assert_eq!(ctx.slots(), 8);
        for s in 0..ctx.slots() {
            assert_eq!(ctx.slot_of(ctx.coord_of_slot(s)), s);
        }
        assert_eq!(ctx.slot_of(CoordId::base(1)), 0);
        assert_eq!(ctx.slot_of(CoordId::velocity(1, 1)), 2);
        assert_eq!(ctx.slot_of(CoordId::velocity(3, 2)), 7);
    }

    #[test]
    fn rejects_degenerate_dimensions() {
        assert!(Context::new(0, 2).is_err());
        assert!(Context::new(1, 0).is_err());
    }

    #[test]
    fn bound_checks() {
        let ctx = Context::new(1, 2).unwrap();
        assert!(ctx.check(CoordId::velocity(2, 1)).is_ok());
        assert!(ctx.check(CoordId::velocity(3, 1)).is_err());
        assert!(ctx.check(CoordId::base(2)).is_err());
    }
}
