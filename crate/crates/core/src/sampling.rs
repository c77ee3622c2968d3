//! Irregular sampling sets on the circle `[0, 1)` with adaptive weights.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSource {
    Theoretical,
    Empirical,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrameBounds<T> {
    pub lower: T,
    pub upper: T,
    pub source: BoundSource,
}

/// Strictly increasing points in `[0, 1)`, extended periodically.
///
/// Weights are `w_j = (t_{j+1} - t_{j-1}) / 2` with wrap-around, so they
/// partition the circle: `Σ w_j = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingSet<T> {
    points: Vec<T>,
    weights: Vec<T>,
    gaps: Vec<T>,
    max_gap: T,
    gap_sigma: T,
}

impl<T: Real> SamplingSet<T> {
    pub fn new(points: Vec<T>) -> Result<Self> {
        let r = points.len();
        if r < 2 {
            return Err(Error::TooFewPoints(r));
        }
        for (index, &p) in points.iter().enumerate() {
            if !p.is_finite() || p < T::zero() || p >= T::one() {
                return Err(Error::OutOfDomain { index, value: p.to_f64().unwrap_or(f64::NAN) });
            }
        }
        if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NotSorted(i + 1));
        }

        // gaps[j] = t_{j+1} - t_j, last one wraps through 1.
        let gaps: Vec<T> = (0..r)
            .map(|j| if j + 1 < r { points[j + 1] - points[j] } else { points[0] + T::one() - points[j] })
            .collect();
        let weights = (0..r).map(|j| (gaps[(j + r - 1) % r] + gaps[j]) / T::lit(2.0)).collect();
        let max_gap = gaps.iter().copied().fold(T::zero(), T::max);

        let count = T::from_count(r);
        let mean = gaps.iter().copied().fold(T::zero(), |a, b| a + b) / count;
        let var = gaps.iter().map(|&g| (g - mean) * (g - mean)).fold(T::zero(), |a, b| a + b)
            / T::from_count(r - 1);

        Ok(Self { points, weights, gaps, max_gap, gap_sigma: var.sqrt() })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Periodic gaps `t_{j+1} - t_j`.
    pub fn gaps(&self) -> &[T] {
        &self.gaps
    }

    pub fn max_gap(&self) -> T {
        self.max_gap
    }

    /// Sample standard deviation of the periodic gaps (divisor `r - 1`).
    pub fn gap_sigma(&self) -> T {
        self.gap_sigma
    }

    /// `γ` expressed in grid steps of an `len`-point grid.
    pub fn max_gap_grid_units(&self, len: usize) -> T {
        self.max_gap * T::from_count(len)
    }

    pub fn gap_sigma_grid_units(&self, len: usize) -> T {
        self.gap_sigma * T::from_count(len)
    }

    /// Every `stride`-th point, starting with the first.
    pub fn decimate(&self, stride: usize) -> Result<Self> {
        assert!(stride > 0, "stride must be positive");
        Self::new(self.points.iter().copied().step_by(stride).collect())
    }

    /// Density `(2N+1)·γ`; the frame guarantee needs it below one.
    pub fn density(&self, level: usize) -> T {
        T::from_count(2 * level + 1) * self.max_gap
    }

    pub fn is_admissible(&self, level: usize) -> bool {
        admissible(self.density(level))
    }

    /// Reads one point per line; blank lines and `#` comments are skipped.
    /// Points are sorted before validation.
    pub fn read_points<R: BufRead>(input: R) -> Result<Self> {
        let mut points = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let v: f64 = trimmed
                .parse()
                .map_err(|e| Error::Parse { line: i + 1, msg: format!("{trimmed:?}: {e}") })?;
            points.push(T::lit(v));
        }
        points.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        Self::new(points)
    }

    pub fn write_points<W: Write>(&self, mut out: W) -> Result<()> {
        for p in &self.points {
            writeln!(out, "{p}")?;
        }
        Ok(())
    }
}

// Values within a few ulps of one count as touching the Nyquist limit.
fn admissible<T: Real>(density: T) -> bool {
    density < T::one() - T::lit(16.0) * T::epsilon()
}

/// Largest `N >= 0` with `(2N+1)·γ < 1`.
pub fn nyquist_level<T: Real>(s: &SamplingSet<T>) -> usize {
    let gamma = s.max_gap().as_f64();
    let mut level = ((1.0 / gamma - 1.0) / 2.0).floor().max(0.0) as usize;
    while level > 0 && !s.is_admissible(level) {
        level -= 1;
    }
    while s.is_admissible(level + 1) {
        level += 1;
    }
    level
}

/// Adaptive-weights frame bounds on the circle:
/// `A = (1 - γ(2N+1))²`, `B = (1 + γ(2N+1))²`.
pub fn theoretical_frame_bounds<T: Real>(s: &SamplingSet<T>, level: usize) -> Result<FrameBounds<T>> {
    let density = s.density(level);
    if !admissible(density) {
        return Err(Error::NyquistViolated { level, density: density.as_f64() });
    }
    let one = T::one();
    Ok(FrameBounds {
        lower: (one - density) * (one - density),
        upper: (one + density) * (one + density),
        source: BoundSource::Theoretical,
    })
}

/// `r` points `j/r` each shifted by `U(-ρ/(2r), ρ/(2r))`, wrapped into
/// `[0, 1)` and sorted. Deterministic for a fixed seed.
pub fn generate_jittered_set<T: Real>(count: usize, irregularity: f64, seed: u64) -> Result<SamplingSet<T>> {
    if count < 2 {
        return Err(Error::TooFewPoints(count));
    }
    if !(0.0..1.0).contains(&irregularity) {
        return Err(Error::InvalidIrregularity(irregularity));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = count as f64;
    let half_width = irregularity / (2.0 * r);
    let mut points: Vec<f64> = (0..count)
        .map(|j| {
            let jitter = if half_width > 0.0 { rng.random_range(-half_width..half_width) } else { 0.0 };
            let p = (j as f64 / r + jitter).rem_euclid(1.0);
            if p >= 1.0 {
                0.0
            } else {
                p
            }
        })
        .collect();
    points.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
    SamplingSet::new(points.into_iter().map(T::lit).collect())
}
