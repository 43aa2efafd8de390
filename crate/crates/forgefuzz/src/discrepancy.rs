//! Star discrepancy of point sets in the unit cube.
//!
//! The star discrepancy of `n` points is the supremum over origin-anchored
//! axis-parallel boxes `[0, b]` of the absolute difference between the
//! fraction of points inside the box and the box volume. Low values mean
//! the points cover the cube evenly.
//!
//! Two evaluators are provided. [`star_discrepancy_approx`] restricts the
//! supremum to a corner grid and is cheap enough for the inner loop of the
//! evolutionary search; it is a deterministic lower bound on the true value.
//! [`star_discrepancy_exact`] enumerates every critical corner (coordinates
//! drawn from the point coordinates plus 1) and is exact, but its cost grows
//! as `(n+1)^d · n`, so it is guarded to small inputs and serves as the
//! reference the approximation is validated against.

use crate::error::{Error, Result};

/// Maximum point count accepted by the exact evaluator.
pub const EXACT_GUARD: usize = 64;

/// A set of points in `[0,1]^d`, `d` in 1..=3, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    /// Builds a point set from row-major coordinates. Every coordinate must
    /// lie in the unit interval.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<PointSet> {
        if !(1..=3).contains(&dim) {
            return Err(Error::BadDimension(dim));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::LengthMismatch {
                left: coords.len(),
                right: dim,
            });
        }
        if let Some(&bad) = coords.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::CoordinateRange(bad));
        }
        Ok(PointSet { dim, coords })
    }

    pub fn from_points3(points: &[[f64; 3]]) -> Result<PointSet> {
        PointSet::from_flat(3, points.iter().flatten().copied().collect())
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }
}

/// Evaluation parameters for the grid-restricted approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiscrepancyConfig {
    /// Corners are placed at `{i/G : i = 1..=G}` per dimension.
    pub grid_divisions: u32,
    /// Also test every point coordinate as a corner coordinate. With this
    /// set the restricted supremum covers all critical corners and the
    /// approximation coincides with the exact value.
    pub include_point_coordinates: bool,
}

impl Default for DiscrepancyConfig {
    fn default() -> Self {
        DiscrepancyConfig {
            grid_divisions: 16,
            include_point_coordinates: false,
        }
    }
}

impl DiscrepancyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_divisions == 0 {
            return Err(Error::Config("grid_divisions must be >= 1".into()));
        }
        Ok(())
    }
}

/// Walks the cross product of per-dimension corner coordinates, feeding
/// every corner's deviation into a running maximum.
///
/// At each corner `b` the closed count (all coordinates `<= b`) and the open
/// count (strict `<`) are both evaluated; `scorer` turns the two counts and
/// the box volume into the corner's contribution.
fn max_over_corners(
    points: &PointSet,
    axes: &[Vec<f64>],
    scorer: impl Fn(usize, usize, f64) -> f64,
) -> f64 {
    let d = points.dim();
    let n = points.len();
    let mut idx = vec![0usize; d];
    let mut best = 0.0f64;
    loop {
        let mut volume = 1.0;
        for k in 0..d {
            volume *= axes[k][idx[k]];
        }
        let mut closed = 0usize;
        let mut open = 0usize;
        for i in 0..n {
            let p = points.point(i);
            let mut all_closed = true;
            let mut all_open = true;
            for k in 0..d {
                let c = axes[k][idx[k]];
                if p[k] > c {
                    all_closed = false;
                    all_open = false;
                    break;
                }
                if p[k] >= c {
                    all_open = false;
                }
            }
            if all_closed {
                closed += 1;
            }
            if all_open {
                open += 1;
            }
        }
        let score = scorer(closed, open, volume);
        if score > best {
            best = score;
        }

        // odometer increment
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == d {
                return best;
            }
        }
    }
}

fn sorted_dedup(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    v
}

/// Grid-restricted star discrepancy: the maximum over the configured test
/// corners of `max(|closed/n - vol|, |open/n - vol|)`.
///
/// This is a restricted supremum and therefore a lower bound on the exact
/// star discrepancy; with `include_point_coordinates` it equals it.
pub fn star_discrepancy_approx(points: &PointSet, cfg: &DiscrepancyConfig) -> Result<f64> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let n = points.len() as f64;
    let g = cfg.grid_divisions;
    let axes: Vec<Vec<f64>> = (0..points.dim())
        .map(|k| {
            let mut axis: Vec<f64> = (1..=g).map(|i| i as f64 / g as f64).collect();
            if cfg.include_point_coordinates {
                axis.extend((0..points.len()).map(|i| points.point(i)[k]));
            }
            sorted_dedup(axis)
        })
        .collect();
    Ok(max_over_corners(points, &axes, |closed, open, vol| {
        let dc = (closed as f64 / n - vol).abs();
        let do_ = (open as f64 / n - vol).abs();
        dc.max(do_)
    }))
}

/// Exact star discrepancy by critical-corner enumeration.
///
/// Candidate corner coordinates per dimension are the point coordinates
/// plus 1; the exact value is the maximum over those corners of
/// `max(closed/n - vol, vol - open/n)`. Guarded to [`EXACT_GUARD`] points.
///
/// Deliberately written as a plain standalone enumeration, sharing no code
/// with the grid evaluator it serves as the reference for.
pub fn star_discrepancy_exact(points: &PointSet) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if points.len() > EXACT_GUARD {
        return Err(Error::ExactGuard {
            n: points.len(),
            max: EXACT_GUARD,
        });
    }
    let d = points.dim();
    let n = points.len();
    let nf = n as f64;

    let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(d);
    for k in 0..d {
        let mut axis: Vec<f64> = (0..n).map(|i| points.point(i)[k]).collect();
        axis.push(1.0);
        axis.sort_by(|a, b| a.partial_cmp(b).unwrap());
        axis.dedup();
        candidates.push(axis);
    }

    let mut best = 0.0f64;
    let mut idx = vec![0usize; d];
    'corners: loop {
        let mut volume = 1.0;
        for k in 0..d {
            volume *= candidates[k][idx[k]];
        }
        let mut closed = 0usize;
        let mut open = 0usize;
        for i in 0..n {
            let p = points.point(i);
            let inside_closed = (0..d).all(|k| p[k] <= candidates[k][idx[k]]);
            let inside_open = (0..d).all(|k| p[k] < candidates[k][idx[k]]);
            if inside_closed {
                closed += 1;
            }
            if inside_open {
                open += 1;
            }
        }
        let over = closed as f64 / nf - volume;
        let under = volume - open as f64 / nf;
        best = best.max(over).max(under);

        for k in 0..d {
            idx[k] += 1;
            if idx[k] < candidates[k].len() {
                continue 'corners;
            }
            idx[k] = 0;
        }
        break;
    }
    Ok(best)
}
