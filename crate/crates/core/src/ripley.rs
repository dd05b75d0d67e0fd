//! Empirical G, F and J functions and nearest-neighbour summaries.
//!
//! Indicators use strict inequality, `1(d_i < d)`, and no edge correction
//! is applied. Observed and simulated patterns go through the same raw
//! estimator, so comparisons between them stay like-for-like.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::geometry::{nearest_neighbor_distances, GridIndex, Point, PointPattern, Window};
use crate::rng::stream;

/// Strictly increasing, nonnegative abscissae at which curves are sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceGrid {
    values: Vec<f64>,
}

/// Number of abscissae in the default grid.
pub const DEFAULT_GRID_STEPS: usize = 100;

impl DistanceGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return invalid("distance grid is empty");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("distance grid contains non-finite values");
        }
        if values[0] < 0.0 {
            return invalid("distance grid starts below zero");
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("distance grid must be strictly increasing");
        }
        Ok(Self { values })
    }

    /// `steps` evenly spaced distances from 0 to `max` inclusive.
    pub fn linspace(max: f64, steps: usize) -> Result<Self> {
        if !(max.is_finite() && max > 0.0) {
            return invalid(format!("grid maximum must be positive, got {max}"));
        }
        if steps < 2 {
            return invalid("grid needs at least 2 steps");
        }
        let last = (steps - 1) as f64;
        Self::new((0..steps).map(|i| max * i as f64 / last).collect())
    }

    /// 100 distances from 0 to half the shorter window side.
    pub fn default_for(window: &Window) -> Self {
        Self::linspace(
            window.width().min(window.height()) / 2.0,
            DEFAULT_GRID_STEPS,
        )
        .expect("window sides are positive")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A statistic sampled on a distance grid. `None` marks abscissae where
/// the statistic is undefined (J where F reaches 1).
#[derive(Debug, Clone, PartialEq)]
pub struct RipleyCurve {
    grid: DistanceGrid,
    values: Vec<Option<f64>>,
}

impl RipleyCurve {
    pub fn new(grid: DistanceGrid, values: Vec<Option<f64>>) -> Result<Self> {
        if grid.len() != values.len() {
            return invalid(format!(
                "curve has {} values for a grid of {}",
                values.len(),
                grid.len()
            ));
        }
        Ok(Self { grid, values })
    }

    fn defined(grid: DistanceGrid, values: Vec<f64>) -> Self {
        Self {
            grid,
            values: values.into_iter().map(Some).collect(),
        }
    }

    pub fn grid(&self) -> &DistanceGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    /// All values, or `None` if any entry is undefined.
    pub fn dense(&self) -> Option<Vec<f64>> {
        self.values.iter().copied().collect()
    }
}

/// Fraction of `sorted` strictly below each grid value.
fn empirical_cdf(sorted: &[f64], grid: &DistanceGrid) -> Vec<f64> {
    let n = sorted.len() as f64;
    grid.values()
        .iter()
        .map(|&d| sorted.partition_point(|&x| x < d) as f64 / n)
        .collect()
}

/// G(d): share of points whose nearest-neighbour distance is below d.
pub fn g_function(pattern: &PointPattern, grid: &DistanceGrid) -> Result<RipleyCurve> {
    let mut nn: Vec<f64> = nearest_neighbor_distances(pattern, 1)?
        .into_iter()
        .map(|d| d[0])
        .collect();
    nn.sort_by(f64::total_cmp);
    Ok(RipleyCurve::defined(grid.clone(), empirical_cdf(&nn, grid)))
}

/// Default reference-point count for F: `max(1000, n)`.
pub fn default_n_ref(n_points: usize) -> usize {
    n_points.max(1000)
}

/// The uniform reference locations F uses for a given seed. Drawn
/// sequentially from one stream before any parallel work.
pub fn reference_points(window: &Window, n_ref: usize, seed: u64) -> Vec<Point> {
    let mut rng = stream(seed);
    (0..n_ref)
        .map(|_| window.sample_uniform(&mut rng))
        .collect()
}

/// F(d): share of uniform reference locations within distance below d of
/// the nearest observed point.
pub fn f_function(
    pattern: &PointPattern,
    grid: &DistanceGrid,
    n_ref: usize,
    seed: u64,
) -> Result<RipleyCurve> {
    if pattern.is_empty() {
        return invalid("F needs at least one observed point");
    }
    if n_ref == 0 {
        return invalid("F needs at least one reference point");
    }
    let refs = reference_points(pattern.window(), n_ref, seed);
    let index = GridIndex::new(pattern.points());
    let mut empty: Vec<f64> = refs.par_iter().map(|&q| index.nearest(q)).collect();
    empty.sort_by(f64::total_cmp);
    Ok(RipleyCurve::defined(
        grid.clone(),
        empirical_cdf(&empty, grid),
    ))
}

/// J(d) = (1 − G(d)) / (1 − F(d)), undefined where F(d) = 1.
pub fn j_function(g: &RipleyCurve, f: &RipleyCurve) -> Result<RipleyCurve> {
    if g.grid() != f.grid() {
        return invalid("G and F curves are sampled on different grids");
    }
    let values = g
        .values()
        .iter()
        .zip(f.values())
        .map(|(&gv, &fv)| match (gv, fv) {
            (Some(gv), Some(fv)) if fv < 1.0 => Some((1.0 - gv) / (1.0 - fv)),
            _ => None,
        })
        .collect();
    RipleyCurve::new(g.grid().clone(), values)
}

/// Equal-width histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `counts.len() + 1` ascending edges; the last bin is closed.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn from_values(values: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 {
            return invalid("histogram needs at least one bin");
        }
        if values.is_empty() {
            return invalid("histogram of no values");
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins)
            .map(|i| if i == bins { hi } else { lo + width * i as f64 })
            .collect();
        let mut counts = vec![0usize; bins];
        for &v in values {
            let bin = if width > 0.0 {
                (((v - lo) / width) as usize).min(bins - 1)
            } else {
                bins - 1
            };
            counts[bin] += 1;
        }
        Ok(Self { edges, counts })
    }
}

/// Summary of per-point mean k-nearest-neighbour distances.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborStats {
    pub k: usize,
    /// Per-point mean of the k nearest distances, in pattern order.
    pub per_point: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std: f64,
    pub histogram: Histogram,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Sample standard deviation; zero for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Average distance to the k nearest neighbours for every point, then
/// summarised. `k = 1` is the plain nearest-neighbour distribution.
pub fn nn_stats(pattern: &PointPattern, k: usize, bins: usize) -> Result<NeighborStats> {
    if bins == 0 {
        return invalid("histogram needs at least one bin");
    }
    let per_point: Vec<f64> = nearest_neighbor_distances(pattern, k)?
        .iter()
        .map(|d| mean(d))
        .collect();
    Ok(NeighborStats {
        k,
        mean: mean(&per_point),
        median: median(&per_point),
        std: sample_std(&per_point),
        histogram: Histogram::from_values(&per_point, bins)?,
        per_point,
    })
}
