//! Bimodal (Poisson-Gaussian) reproduction simulator and the grid search
//! that fits its parameters to an observed pattern.
//!
//! A simulated pattern grows one point at a time. Each new point picks a
//! uniformly random parent among the points placed so far. With
//! probability `p` the offspring is drawn from an isotropic Gaussian of
//! standard deviation `sigma` around that parent; otherwise it is placed
//! uniformly over the window. Larger `p` therefore means *more* local
//! clustering.
//!
//! The fit compares each simulated pattern with the observed one through
//! the trapezoid-integrated absolute differences of their G and F curves,
//! sums that discrepancy over `n_trials` simulations per candidate pair,
//! and keeps the pair with the smallest total.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::geometry::{Point, PointPattern, Window};
use crate::ripley::{default_n_ref, f_function, g_function, DistanceGrid, RipleyCurve};
use crate::rng::{derive_seed, stream};

/// Gaussian draws attempted before an offspring falls back to uniform.
pub const MAX_GAUSSIAN_ATTEMPTS: usize = 1000;
/// Trials per candidate pair unless configured otherwise.
pub const DEFAULT_TRIALS: usize = 10;

const STREAM_OBSERVED_REF: u64 = 0;
const STREAM_TRIAL_PATTERN: u64 = 1;
const STREAM_TRIAL_REF: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReproductionParams {
    p: f64,
    sigma: f64,
}

impl ReproductionParams {
    pub fn new(p: f64, sigma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return invalid(format!("p must lie in [0, 1], got {p}"));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return invalid(format!("sigma must be positive, got {sigma}"));
        }
        Ok(Self { p, sigma })
    }

    /// Probability of the local Gaussian branch.
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Composite trapezoid rule over strictly increasing abscissae.
pub fn trapezoid_integrate(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return invalid(format!("{} abscissae but {} ordinates", xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return invalid("trapezoid rule needs at least two samples");
    }
    if xs.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("abscissae must be strictly increasing");
    }
    Ok(xs
        .windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
        .sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPattern {
    pub pattern: PointPattern,
    /// Offspring whose Gaussian draws kept leaving the window and were
    /// placed uniformly instead.
    pub uniform_fallbacks: usize,
}

/// Grows a pattern of exactly `n` points inside `window`.
pub fn simulate_reproduction(
    window: &Window,
    n: usize,
    params: ReproductionParams,
    seed: u64,
) -> Result<SimulatedPattern> {
    if n == 0 {
        return invalid("simulation needs at least one point");
    }
    let mut rng = stream(seed);
    let mut points: Vec<Point> = Vec::with_capacity(n);
    let mut uniform_fallbacks = 0;
    points.push(window.sample_uniform(&mut rng));
    while points.len() < n {
        let parent = points[rng.random_range(0..points.len())];
        let draw: f64 = rng.random();
        let child = if draw < params.p {
            let mut placed = None;
            for _ in 0..MAX_GAUSSIAN_ATTEMPTS {
                let dx: f64 = rng.sample(StandardNormal);
                let dy: f64 = rng.sample(StandardNormal);
                let candidate =
                    Point::new(parent.x + params.sigma * dx, parent.y + params.sigma * dy);
                if window.contains(candidate) {
                    placed = Some(candidate);
                    break;
                }
            }
            placed.unwrap_or_else(|| {
                uniform_fallbacks += 1;
                window.sample_uniform(&mut rng)
            })
        } else {
            window.sample_uniform(&mut rng)
        };
        points.push(child);
    }
    Ok(SimulatedPattern {
        pattern: PointPattern::new(*window, points)?,
        uniform_fallbacks,
    })
}

/// Integrated absolute G and F differences between the observed curves
/// and a simulated pattern evaluated on the same grid.
pub fn discrepancy(
    observed_g: &RipleyCurve,
    observed_f: &RipleyCurve,
    simulated: &PointPattern,
    grid: &DistanceGrid,
    n_ref: usize,
    seed: u64,
) -> Result<f64> {
    if observed_g.grid() != grid || observed_f.grid() != grid {
        return invalid("observed curves were sampled on a different grid");
    }
    let g_sim = g_function(simulated, grid)?;
    let f_sim = f_function(simulated, grid, n_ref, seed)?;
    Ok(integrated_gap(observed_g, &g_sim)? + integrated_gap(observed_f, &f_sim)?)
}

fn integrated_gap(a: &RipleyCurve, b: &RipleyCurve) -> Result<f64> {
    let (Some(av), Some(bv)) = (a.dense(), b.dense()) else {
        return invalid("cannot integrate a curve with undefined values");
    };
    let gap: Vec<f64> = av.iter().zip(&bv).map(|(x, y)| (x - y).abs()).collect();
    trapezoid_integrate(a.grid().values(), &gap)
}

/// Inputs of a grid-search fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub p_candidates: Vec<f64>,
    pub sigma_candidates: Vec<f64>,
    pub n_trials: usize,
    pub grid: DistanceGrid,
    pub n_ref: usize,
    pub seed: u64,
}

impl FitConfig {
    /// Candidates with default trial count, grid and reference count for
    /// `observed`.
    pub fn new(
        observed: &PointPattern,
        p_candidates: Vec<f64>,
        sigma_candidates: Vec<f64>,
        seed: u64,
    ) -> Self {
        Self {
            p_candidates,
            sigma_candidates,
            n_trials: DEFAULT_TRIALS,
            grid: DistanceGrid::default_for(observed.window()),
            n_ref: default_n_ref(observed.len()),
            seed,
        }
    }
}

/// One candidate pair and its discrepancies.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub params: ReproductionParams,
    /// Sum of `trials`, accumulated in trial order.
    pub total: f64,
    pub trials: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub best: ReproductionParams,
    pub d_min: f64,
    /// Rows in scan order: `p` outer, `sigma` inner.
    pub table: Vec<FitRow>,
}

/// Exhaustive search over `p_candidates x sigma_candidates`.
///
/// Observed G and F are computed once. Every (p, sigma, trial) task owns
/// seeds derived from the master seed and its indices, so tasks may run in
/// any order on any number of threads. The minimiser is the first row in
/// scan order whose total is strictly below every earlier total.
pub fn fit(observed: &PointPattern, config: &FitConfig) -> Result<FitResult> {
    if config.p_candidates.is_empty() || config.sigma_candidates.is_empty() {
        return invalid("candidate lists must not be empty");
    }
    if config.n_trials == 0 {
        return invalid("at least one trial per candidate is required");
    }
    if config.n_ref == 0 {
        return invalid("at least one reference point is required");
    }
    let params: Vec<ReproductionParams> = config
        .p_candidates
        .iter()
        .flat_map(|&p| config.sigma_candidates.iter().map(move |&s| (p, s)))
        .map(|(p, s)| ReproductionParams::new(p, s))
        .collect::<Result<_>>()?;

    let grid = &config.grid;
    let observed_g = g_function(observed, grid)?;
    let observed_f = f_function(
        observed,
        grid,
        config.n_ref,
        derive_seed(config.seed, &[STREAM_OBSERVED_REF]),
    )?;

    let n_sigma = config.sigma_candidates.len();
    let n_trials = config.n_trials;
    let n = observed.len();
    let per_task: Vec<f64> = (0..params.len() * n_trials)
        .into_par_iter()
        .map(|task| {
            let row = task / n_trials;
            let trial = task % n_trials;
            let path = [(row / n_sigma) as u64, (row % n_sigma) as u64, trial as u64];
            let pattern_seed = derive_seed(
                config.seed,
                &[STREAM_TRIAL_PATTERN, path[0], path[1], path[2]],
            );
            let ref_seed = derive_seed(config.seed, &[STREAM_TRIAL_REF, path[0], path[1], path[2]]);
            let sim = simulate_reproduction(observed.window(), n, params[row], pattern_seed)?;
            discrepancy(
                &observed_g,
                &observed_f,
                &sim.pattern,
                grid,
                config.n_ref,
                ref_seed,
            )
        })
        .collect::<Result<_>>()?;

    let table: Vec<FitRow> = params
        .iter()
        .zip(per_task.chunks(n_trials))
        .map(|(&params, trials)| FitRow {
            params,
            total: trials.iter().sum(),
            trials: trials.to_vec(),
        })
        .collect();

    let mut best = 0;
    let mut d_min = f64::INFINITY;
    for (i, row) in table.iter().enumerate() {
        if row.total < d_min {
            d_min = row.total;
            best = i;
        }
    }
    Ok(FitResult {
        best: table[best].params,
        d_min,
        table,
    })
}
