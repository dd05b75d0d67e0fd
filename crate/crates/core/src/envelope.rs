//! Monte Carlo envelope tests against complete spatial randomness.
//!
//! The null model is the binomial process: the observed number of points
//! placed independently and uniformly in the observed window. Each of the
//! `m` simulations draws from its own derived seed, so the result does not
//! depend on how many threads run them.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::{PointPattern, Window};
use crate::ripley::{default_n_ref, f_function, g_function, j_function, DistanceGrid, RipleyCurve};
use crate::rng::{derive_seed, stream};

/// Default number of null simulations; the smallest attainable p-value is
/// then 1/200 = 0.005.
pub const DEFAULT_SIMULATIONS: usize = 199;
/// Fewest simulations for which 2.5%/97.5% quantiles are meaningful.
pub const MIN_SIMULATIONS: usize = 19;

const STREAM_OBSERVED_REF: u64 = 0;
const STREAM_SIM_PATTERN: u64 = 1;
const STREAM_SIM_REF: u64 = 2;

/// `n` independent uniform points in `window`.
pub fn simulate_csr(window: &Window, n: usize, seed: u64) -> PointPattern {
    let mut rng = stream(seed);
    let points = (0..n).map(|_| window.sample_uniform(&mut rng)).collect();
    PointPattern::new(*window, points).expect("uniform draws lie inside the window")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistic {
    G,
    F,
    J,
}

impl Statistic {
    /// Evaluates the statistic; `ref_seed` feeds F's reference points.
    pub fn evaluate(
        self,
        pattern: &PointPattern,
        grid: &DistanceGrid,
        n_ref: usize,
        ref_seed: u64,
    ) -> Result<RipleyCurve> {
        match self {
            Statistic::G => g_function(pattern, grid),
            Statistic::F => f_function(pattern, grid, n_ref, ref_seed),
            Statistic::J => j_function(
                &g_function(pattern, grid)?,
                &f_function(pattern, grid, n_ref, ref_seed)?,
            ),
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::G => "g",
            Statistic::F => "f",
            Statistic::J => "j",
        })
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "g" => Ok(Statistic::G),
            "f" => Ok(Statistic::F),
            "j" => Ok(Statistic::J),
            other => invalid(format!("unknown statistic '{other}', expected g, f or j")),
        }
    }
}

/// Observed curve, pointwise null band and rank p-values.
///
/// Entries are `None` wherever the statistic is undefined for the observed
/// pattern or for every simulation (J beyond the distance where F hits 1).
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeResult {
    pub grid: DistanceGrid,
    pub statistic: Statistic,
    pub simulations: usize,
    pub observed: Vec<Option<f64>>,
    pub sim_mean: Vec<Option<f64>>,
    pub lo95: Vec<Option<f64>>,
    pub hi95: Vec<Option<f64>>,
    /// Two-sided pointwise p-values `(1 + #{sims at least as far from the
    /// simulation mean as the observation}) / (m + 1)`.
    pub p_values: Vec<Option<f64>>,
    /// Single-number p-value of the maximum absolute deviation over the
    /// grid, ranked among the observed pattern and the simulations.
    pub deviation_p_value: f64,
}

impl EnvelopeResult {
    /// Whether the maximum-deviation test rejects randomness at `alpha`.
    pub fn rejects_csr(&self, alpha: f64) -> bool {
        self.deviation_p_value <= alpha
    }

    /// Share of defined grid points where the observed value lies inside
    /// the closed band. `None` when no point is defined.
    pub fn coverage(&self) -> Option<f64> {
        let mut inside = 0usize;
        let mut total = 0usize;
        for i in 0..self.observed.len() {
            if let (Some(o), Some(lo), Some(hi)) = (self.observed[i], self.lo95[i], self.hi95[i]) {
                total += 1;
                if lo <= o && o <= hi {
                    inside += 1;
                }
            }
        }
        (total > 0).then(|| inside as f64 / total as f64)
    }
}

/// Linear-interpolation quantile of sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pointwise band and rank p-value at one abscissa. Returns
/// `(mean, lo95, hi95, p)`; the band is widened to contain the mean when a
/// skewed sample puts the mean outside the central quantiles.
pub fn pointwise_summary(observed: Option<f64>, sims: &[f64]) -> (f64, f64, f64, Option<f64>) {
    let mut sorted = sims.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let mean = sims.iter().sum::<f64>() / m as f64;
    let lo = quantile_sorted(&sorted, 0.025).min(mean);
    let hi = quantile_sorted(&sorted, 0.975).max(mean);
    let p = observed.map(|o| {
        let dev = (o - mean).abs();
        let extreme = sims.iter().filter(|&&s| (s - mean).abs() >= dev).count();
        (1 + extreme) as f64 / (m + 1) as f64
    });
    (mean, lo, hi, p)
}

/// Rank p-value of the observed curve's maximum absolute deviation from
/// the pooled mean of observed and simulated curves. Only abscissae where
/// every curve is defined take part. Ties count against the observation.
pub fn deviation_p_value(observed: &[Option<f64>], sims: &[Vec<Option<f64>>]) -> f64 {
    let len = observed.len();
    let usable: Vec<usize> = (0..len)
        .filter(|&i| observed[i].is_some() && sims.iter().all(|s| s[i].is_some()))
        .collect();
    if usable.is_empty() {
        return 1.0;
    }
    let total = (sims.len() + 1) as f64;
    let pooled: Vec<f64> = usable
        .iter()
        .map(|&i| (observed[i].unwrap() + sims.iter().map(|s| s[i].unwrap()).sum::<f64>()) / total)
        .collect();
    let max_dev = |curve: &[Option<f64>]| {
        usable
            .iter()
            .zip(&pooled)
            .map(|(&i, &mu)| (curve[i].unwrap() - mu).abs())
            .fold(0.0, f64::max)
    };
    let obs = max_dev(observed);
    let extreme = sims.iter().filter(|s| max_dev(s) >= obs).count();
    (1 + extreme) as f64 / total
}

/// Envelope test with the default reference-point count for F.
pub fn envelope(
    pattern: &PointPattern,
    grid: &DistanceGrid,
    statistic: Statistic,
    m: usize,
    seed: u64,
) -> Result<EnvelopeResult> {
    envelope_with_n_ref(
        pattern,
        grid,
        statistic,
        m,
        default_n_ref(pattern.len()),
        seed,
    )
}

pub fn envelope_with_n_ref(
    pattern: &PointPattern,
    grid: &DistanceGrid,
    statistic: Statistic,
    m: usize,
    n_ref: usize,
    seed: u64,
) -> Result<EnvelopeResult> {
    if m < MIN_SIMULATIONS {
        return invalid(format!(
            "envelope needs at least {MIN_SIMULATIONS} simulations, got {m}"
        ));
    }
    let n = pattern.len();
    let observed = statistic
        .evaluate(
            pattern,
            grid,
            n_ref,
            derive_seed(seed, &[STREAM_OBSERVED_REF]),
        )?
        .values()
        .to_vec();

    let sims: Vec<Vec<Option<f64>>> = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let sim = simulate_csr(
                pattern.window(),
                n,
                derive_seed(seed, &[STREAM_SIM_PATTERN, i]),
            );
            statistic
                .evaluate(&sim, grid, n_ref, derive_seed(seed, &[STREAM_SIM_REF, i]))
                .map(|c| c.values().to_vec())
        })
        .collect::<Result<_>>()?;

    let len = grid.len();
    let mut sim_mean = Vec::with_capacity(len);
    let mut lo95 = Vec::with_capacity(len);
    let mut hi95 = Vec::with_capacity(len);
    let mut p_values = Vec::with_capacity(len);
    for i in 0..len {
        let column: Vec<f64> = sims.iter().filter_map(|s| s[i]).collect();
        if column.is_empty() {
            sim_mean.push(None);
            lo95.push(None);
            hi95.push(None);
            p_values.push(None);
            continue;
        }
        let (mu, lo, hi, p) = pointwise_summary(observed[i], &column);
        sim_mean.push(Some(mu));
        lo95.push(Some(lo));
        hi95.push(Some(hi));
        p_values.push(p);
    }

    Ok(EnvelopeResult {
        grid: grid.clone(),
        statistic,
        simulations: m,
        deviation_p_value: deviation_p_value(&observed, &sims),
        observed,
        sim_mean,
        lo95,
        hi95,
        p_values,
    })
}
