//! Deterministic sampling of admissible phase points.

use crate::context::Context;
use crate::error::{Error, Result};
use crate::phase::PhasePoint;

/// Margin around the null section: a point is admissible when
/// `max_i |y(1,i)| >= margin`, which keeps inverse metrics and homogeneity
/// checks well-conditioned on the slit bundle.
pub const DEFAULT_MARGIN: f64 = 0.1;

/// Per-level coordinate bounds: one interval for the base coordinates and
/// one per velocity level (shared across indices).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    pub x: (f64, f64),
    pub y: Vec<(f64, f64)>,
}

impl SampleBox {
    /// Default desk-scale box: x in [-1, 1], every y-level in [0.5, 1.5].
    pub fn default_for(ctx: Context) -> SampleBox {
        SampleBox {
            x: (-1.0, 1.0),
            y: vec![(0.5, 1.5); ctx.k],
        }
    }

    pub fn validate(&self, ctx: Context) -> Result<()> {
        if self.y.len() != ctx.k {
            return Err(Error::InvalidDomain(format!(
                "box has {} y-levels, context needs {}",
                self.y.len(),
                ctx.k
            )));
        }
        for &(lo, hi) in std::iter::once(&self.x).chain(self.y.iter()) {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::InvalidDomain(format!(
                    "bad interval [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    fn level_bounds(&self, level: usize) -> (f64, f64) {
        if level == 0 {
            self.x
        } else {
            self.y[level - 1]
        }
    }
}

/// Multiplicative congruential generator (MINSTD), kept tiny and exactly
/// reproducible from a single integer seed.
#[derive(Debug, Clone)]
pub struct Minstd(u64);

const MINSTD_MOD: u64 = 2_147_483_647;

impl Minstd {
    pub fn new(seed: u64) -> Minstd {
        Minstd(seed % (MINSTD_MOD - 1) + 1)
    }

    pub fn next_u32(&mut self) -> u32 {
        self.0 = self.0 * 48_271 % MINSTD_MOD;
        self.0 as u32
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u32() - 1) as f64 / (MINSTD_MOD - 1) as f64
    }

    pub fn in_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// Deterministic quasi-uniform admissible points. The y(1) block is redrawn
/// until it clears the slit margin.
pub fn sample_points(
    domain: &SampleBox,
    ctx: Context,
    count: usize,
    seed: u64,
    margin: f64,
) -> Result<Vec<PhasePoint>> {
    domain.validate(ctx)?;
    let (lo, hi) = domain.level_bounds(1);
    let reachable = lo.abs().max(hi.abs());
    if reachable < margin {
        return Err(Error::InvalidDomain(format!(
            "y(1) box [{lo}, {hi}] lies inside the null-section margin {margin}"
        )));
    }
    let mut rng = Minstd::new(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let x = (0..ctx.n).map(|_| rng.in_range(domain.x.0, domain.x.1)).collect();
        let mut y: Vec<Vec<f64>> = Vec::with_capacity(ctx.k);
        for level in 1..=ctx.k {
            let (lo, hi) = domain.level_bounds(level);
            y.push((0..ctx.n).map(|_| rng.in_range(lo, hi)).collect());
        }
        let mut attempts = 0;
        while y[0].iter().fold(0.0f64, |m, v| m.max(v.abs())) < margin {
            let (lo, hi) = domain.level_bounds(1);
            y[0] = (0..ctx.n).map(|_| rng.in_range(lo, hi)).collect();
            attempts += 1;
            if attempts > 10_000 {
                return Err(Error::InvalidDomain(
                    "could not draw an admissible y(1) block".to_string(),
                ));
            }
        }
        out.push(PhasePoint { x, y });
    }
    Ok(out)
}
