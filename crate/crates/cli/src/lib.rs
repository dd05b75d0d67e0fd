//! The `palmpat` command line.
//!
//! Each subcommand wraps one library operation and exchanges data through
//! CSV files, so every step of an analysis can be inspected and rerun.
//! All randomness comes from `--seed`; the default is [`DEFAULT_SEED`].

pub mod error;
pub mod io;
pub mod svg;
pub mod values;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use palmpat::detections::{centers, match_counts, merge_nms, TileLayout};
use palmpat::envelope::{envelope_with_n_ref, simulate_csr, Statistic, MIN_SIMULATIONS};
use palmpat::reproduction::{fit, simulate_reproduction, FitConfig, ReproductionParams};
use palmpat::ripley::{
    default_n_ref, f_function, g_function, j_function, nn_stats, DistanceGrid, Histogram,
    DEFAULT_GRID_STEPS,
};
use palmpat::{PointPattern, Window};

use crate::error::{usage, CliError, Result};
use crate::io::{fmt_opt, read_detections, read_pattern, read_points, write_csv, write_points};
use crate::svg::{line_chart, Band, Series};
use crate::values::{parse_candidates, parse_point, parse_window};

pub const DEFAULT_SEED: u64 = 20_241_018;
/// Caps the rayon worker count; 0 or unset lets rayon decide.
pub const THREADS_ENV: &str = "PALMPAT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "palmpat",
    version,
    about = "Spatial point-pattern analysis of detected palm centres"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Master random seed.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Also write SVG line charts where available.
    #[arg(long, global = true)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct PointsInput {
    /// Points CSV with an `x,y` header.
    #[arg(long)]
    pub points: PathBuf,
    /// Input units per meter (pixels per meter for image coordinates).
    #[arg(long, default_value_t = 1.0)]
    pub units_per_meter: f64,
    /// Observation window `x_min,y_min,x_max,y_max` in input units;
    /// defaults to the points' bounding box.
    #[arg(long)]
    pub window: Option<String>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Largest evaluation distance in meters; defaults to half the shorter
    /// window side.
    #[arg(long)]
    pub grid_max: Option<f64>,
    /// Number of evaluation distances, from 0 to the maximum inclusive.
    #[arg(long, default_value_t = DEFAULT_GRID_STEPS)]
    pub grid_steps: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Empirical G, F or J curve (`d,value`).
    Ripley {
        #[command(flatten)]
        input: PointsInput,
        #[command(flatten)]
        grid: GridArgs,
        /// g, f or j.
        #[arg(long, default_value = "g")]
        stat: String,
        /// Reference points for F (default max(1000, n)).
        #[arg(long)]
        n_ref: Option<usize>,
    },
    /// Monte Carlo envelope and pointwise p-values under randomness.
    Envelope {
        #[command(flatten)]
        input: PointsInput,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value = "g")]
        stat: String,
        /// Number of null simulations.
        #[arg(long, default_value_t = palmpat::envelope::DEFAULT_SIMULATIONS)]
        sims: usize,
        #[arg(long)]
        n_ref: Option<usize>,
    },
    /// Simulate a pattern from the bimodal reproduction model.
    Simulate {
        /// Window `x_min,y_min,x_max,y_max` in meters.
        #[arg(long, required_unless_present = "like")]
        window: Option<String>,
        /// Number of points.
        #[arg(long, required_unless_present = "like")]
        n: Option<usize>,
        /// Take window and count from this observed points file instead.
        #[arg(long)]
        like: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        units_per_meter: f64,
        /// Probability of the local Gaussian branch (0 gives pure randomness).
        #[arg(long)]
        p: f64,
        /// Gaussian spread in meters.
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
    },
    /// Grid-search fit of (p, sigma) to an observed pattern.
    Fit {
        #[command(flatten)]
        input: PointsInput,
        #[command(flatten)]
        grid: GridArgs,
        /// p candidates: start:stop:step or a comma list.
        #[arg(long, default_value = "0.30:0.70:0.05")]
        p: String,
        /// sigma candidates in meters: start:stop:step or a comma list.
        #[arg(long, default_value = "40:80:10")]
        sigma: String,
        /// Simulations per candidate pair.
        #[arg(long, default_value_t = palmpat::reproduction::DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long)]
        n_ref: Option<usize>,
    },
    /// Map tile detections to global coordinates and suppress duplicates.
    Merge {
        /// Detections CSV `tile_row,tile_col,x_min,y_min,x_max,y_max,confidence`.
        #[arg(long)]
        detections: PathBuf,
        /// Boxes are already global; tile columns are ignored.
        #[arg(long)]
        global: bool,
        #[arg(long, default_value_t = palmpat::detections::DEFAULT_PATCH_SIZE)]
        patch_size: u32,
        #[arg(long, default_value_t = palmpat::detections::DEFAULT_STRIDE)]
        stride: u32,
        /// Global position of tile (0, 0) as `x,y`.
        #[arg(long, default_value = "0,0")]
        origin: String,
        #[arg(long, default_value_t = palmpat::detections::DEFAULT_IOU_THRESHOLD)]
        iou: f64,
    },
    /// Counting accuracy and localisation shift against labelled centres.
    Count {
        #[arg(long)]
        detected: PathBuf,
        #[arg(long)]
        labeled: PathBuf,
        /// Matching radius in meters.
        #[arg(long, default_value_t = palmpat::detections::DEFAULT_MATCH_RADIUS)]
        radius: f64,
        #[arg(long, default_value_t = 1.0)]
        units_per_meter: f64,
        /// Bins of the shift histogram.
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
    /// Mean distance to the k nearest neighbours: summary and histogram.
    NnStats {
        #[command(flatten)]
        input: PointsInput,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
}

/// Installs the global rayon pool according to [`THREADS_ENV`].
pub fn configure_threads() -> Result<()> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a nonnegative integer")))?,
        _ => 0,
    };
    if threads > 0 {
        // a second call within one process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    Ok(())
}

fn positive(value: f64, flag: &str) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        usage(format!("{flag} must be positive, got {value}"))
    }
}

fn statistic(text: &str) -> Result<Statistic> {
    text.parse()
        .or_else(|e: palmpat::Error| usage(format!("--stat: {e}")))
}

fn load(input: &PointsInput) -> Result<PointPattern> {
    let upm = positive(input.units_per_meter, "--units-per-meter")?;
    let window = input.window.as_deref().map(parse_window).transpose()?;
    read_pattern(&input.points, upm, window)
}

fn grid_for(args: &GridArgs, window: &Window) -> Result<DistanceGrid> {
    if args.grid_steps < 2 {
        return usage("--grid-steps must be at least 2");
    }
    let max = match args.grid_max {
        Some(m) => positive(m, "--grid-max")?,
        None => window.width().min(window.height()) / 2.0,
    };
    DistanceGrid::linspace(max, args.grid_steps).or_else(|e| usage(e.to_string()))
}

fn n_ref_for(n_ref: Option<usize>, pattern: &PointPattern) -> Result<usize> {
    match n_ref {
        Some(0) => usage("--n-ref must be positive"),
        Some(n) => Ok(n),
        None => Ok(default_n_ref(pattern.len())),
    }
}

fn histogram_rows(h: &Histogram) -> Vec<Vec<String>> {
    h.counts
        .iter()
        .enumerate()
        .map(|(i, c)| {
            vec![
                h.edges[i].to_string(),
                h.edges[i + 1].to_string(),
                c.to_string(),
            ]
        })
        .collect()
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn write_svg(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Runs one parsed invocation. Returns the lines meant for standard output.
pub fn run(cli: Cli) -> Result<Vec<String>> {
    let Common { seed, out, svg } = cli.common;
    std::fs::create_dir_all(&out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    let mut stdout = Vec::new();

    match cli.command {
        Command::Ripley {
            input,
            grid,
            stat,
            n_ref,
        } => {
            let stat = statistic(&stat)?;
            let pattern = load(&input)?;
            let grid = grid_for(&grid, pattern.window())?;
            let n_ref = n_ref_for(n_ref, &pattern)?;
            let curve = match stat {
                Statistic::G => g_function(&pattern, &grid)?,
                Statistic::F => f_function(&pattern, &grid, n_ref, seed)?,
                Statistic::J => j_function(
                    &g_function(&pattern, &grid)?,
                    &f_function(&pattern, &grid, n_ref, seed)?,
                )?,
            };
            let rows: Vec<Vec<String>> = grid
                .values()
                .iter()
                .zip(curve.values())
                .map(|(d, v)| vec![d.to_string(), fmt_opt(*v)])
                .collect();
            let path = out.join(format!("ripley_{stat}.csv"));
            write_csv(&path, &header(&["d", "value"]), &rows)?;
            if svg {
                let ones = vec![Some(1.0); grid.len()];
                let mut series = vec![Series {
                    label: "observed",
                    color: "black",
                    dashed: false,
                    values: curve.values(),
                }];
                if stat == Statistic::J {
                    series.push(Series {
                        label: "J = 1",
                        color: "gray",
                        dashed: true,
                        values: &ones,
                    });
                }
                let chart = line_chart(
                    &format!("{} function", stat.to_string().to_uppercase()),
                    grid.values(),
                    &series,
                    None,
                );
                write_svg(&out.join(format!("ripley_{stat}.svg")), &chart)?;
            }
            stdout.push(format!("wrote {}", path.display()));
        }

        Command::Envelope {
            input,
            grid,
            stat,
            sims,
            n_ref,
        } => {
            let stat = statistic(&stat)?;
            if sims < MIN_SIMULATIONS {
                return usage(format!("--sims must be at least {MIN_SIMULATIONS}"));
            }
            let pattern = load(&input)?;
            let grid = grid_for(&grid, pattern.window())?;
            let n_ref = n_ref_for(n_ref, &pattern)?;
            let r = envelope_with_n_ref(&pattern, &grid, stat, sims, n_ref, seed)?;
            let rows: Vec<Vec<String>> = (0..grid.len())
                .map(|i| {
                    vec![
                        grid.values()[i].to_string(),
                        fmt_opt(r.observed[i]),
                        fmt_opt(r.sim_mean[i]),
                        fmt_opt(r.lo95[i]),
                        fmt_opt(r.hi95[i]),
                        fmt_opt(r.p_values[i]),
                    ]
                })
                .collect();
            let path = out.join(format!("envelope_{stat}.csv"));
            write_csv(
                &path,
                &header(&["d", "observed", "mean", "lo95", "hi95", "p"]),
                &rows,
            )?;
            if svg {
                let ones = vec![Some(1.0); grid.len()];
                let mut series = vec![
                    Series {
                        label: "simulation mean",
                        color: "black",
                        dashed: false,
                        values: &r.sim_mean,
                    },
                    Series {
                        label: "observed",
                        color: "#d62728",
                        dashed: false,
                        values: &r.observed,
                    },
                ];
                if stat == Statistic::J {
                    series.push(Series {
                        label: "J = 1",
                        color: "gray",
                        dashed: true,
                        values: &ones,
                    });
                }
                let chart = line_chart(
                    &format!(
                        "{} envelope ({} simulations)",
                        stat.to_string().to_uppercase(),
                        sims
                    ),
                    grid.values(),
                    &series,
                    Some(Band {
                        lo: &r.lo95,
                        hi: &r.hi95,
                    }),
                );
                write_svg(&out.join(format!("envelope_{stat}.svg")), &chart)?;
            }
            let below = |alpha: f64| r.p_values.iter().flatten().filter(|&&p| p < alpha).count();
            stdout.push(format!(
                "deviation_p={} points_below_0.05={} points_below_0.01={}",
                r.deviation_p_value,
                below(0.05),
                below(0.01)
            ));
        }

        Command::Simulate {
            window,
            n,
            like,
            units_per_meter,
            p,
            sigma,
        } => {
            let (window, n) = match like {
                Some(path) => {
                    let upm = positive(units_per_meter, "--units-per-meter")?;
                    let w = window.as_deref().map(parse_window).transpose()?;
                    let observed = read_pattern(&path, upm, w)?;
                    (*observed.window(), n.unwrap_or(observed.len()))
                }
                None => (
                    parse_window(window.as_deref().unwrap_or_default())?,
                    n.unwrap_or_default(),
                ),
            };
            if n == 0 {
                return usage("--n must be positive");
            }
            let params = ReproductionParams::new(p, sigma).or_else(|e| usage(e.to_string()))?;
            let pattern = if p == 0.0 {
                simulate_csr(&window, n, seed)
            } else {
                let sim = simulate_reproduction(&window, n, params, seed)?;
                if sim.uniform_fallbacks > 0 {
                    eprintln!(
                        "notice: {} offspring fell back to uniform placement",
                        sim.uniform_fallbacks
                    );
                }
                sim.pattern
            };
            let path = out.join("simulated.csv");
            write_points(&path, pattern.points())?;
            stdout.push(format!(
                "wrote {} points to {}",
                pattern.len(),
                path.display()
            ));
        }

        Command::Fit {
            input,
            grid,
            p,
            sigma,
            trials,
            n_ref,
        } => {
            let p_candidates = parse_candidates(&p, "--p")?;
            let sigma_candidates = parse_candidates(&sigma, "--sigma")?;
            if p_candidates.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return usage("--p candidates must lie in [0, 1]");
            }
            if sigma_candidates.iter().any(|&v| v <= 0.0) {
                return usage("--sigma candidates must be positive");
            }
            if trials == 0 {
                return usage("--trials must be positive");
            }
            let pattern = load(&input)?;
            let config = FitConfig {
                grid: grid_for(&grid, pattern.window())?,
                n_ref: n_ref_for(n_ref, &pattern)?,
                p_candidates,
                sigma_candidates,
                n_trials: trials,
                seed,
            };
            let r = fit(&pattern, &config)?;
            let mut names = vec!["p".to_string(), "sigma".to_string(), "d_total".to_string()];
            names.extend((1..=trials).map(|i| format!("d_{i}")));
            let rows: Vec<Vec<String>> = r
                .table
                .iter()
                .map(|row| {
                    let mut v = vec![
                        row.params.p().to_string(),
                        row.params.sigma().to_string(),
                        row.total.to_string(),
                    ];
                    v.extend(row.trials.iter().map(|d| d.to_string()));
                    v
                })
                .collect();
            write_csv(&out.join("fit_table.csv"), &names, &rows)?;
            write_csv(
                &out.join("fit_best.csv"),
                &header(&["p", "sigma", "d_min"]),
                &[vec![
                    r.best.p().to_string(),
                    r.best.sigma().to_string(),
                    r.d_min.to_string(),
                ]],
            )?;
            stdout.push(format!(
                "p*={} sigma*={} d_min={}",
                r.best.p(),
                r.best.sigma(),
                r.d_min
            ));
        }

        Command::Merge {
            detections,
            global,
            patch_size,
            stride,
            origin,
            iou,
        } => {
            if !(iou > 0.0 && iou <= 1.0) {
                return usage("--iou must lie in (0, 1]");
            }
            let layout = if global {
                None
            } else {
                let origin = parse_point(&origin, "--origin")?;
                Some(
                    TileLayout::new(patch_size, stride, origin)
                        .or_else(|e| usage(e.to_string()))?,
                )
            };
            let set = read_detections(&detections, layout)?;
            let merged = merge_nms(&set.to_global_boxes(), iou)?;
            let rows: Vec<Vec<String>> = merged
                .iter()
                .map(|b| {
                    [b.x_min, b.y_min, b.x_max, b.y_max, b.confidence]
                        .iter()
                        .map(f64::to_string)
                        .collect()
                })
                .collect();
            write_csv(
                &out.join("merged.csv"),
                &header(&["x_min", "y_min", "x_max", "y_max", "confidence"]),
                &rows,
            )?;
            write_points(&out.join("centers.csv"), &centers(&merged))?;
            stdout.push(format!(
                "kept {} of {} boxes",
                merged.len(),
                set.boxes().len()
            ));
        }

        Command::Count {
            detected,
            labeled,
            radius,
            units_per_meter,
            bins,
        } => {
            let upm = positive(units_per_meter, "--units-per-meter")?;
            let radius = positive(radius, "--radius")?;
            if bins == 0 {
                return usage("--bins must be positive");
            }
            let detected = read_points(&detected, upm)?;
            let labeled = read_points(&labeled, upm)?;
            let r = match_counts(&detected, &labeled, radius)?;
            write_csv(
                &out.join("count_report.csv"),
                &header(&[
                    "n_labeled",
                    "n_detected",
                    "n_matched",
                    "accuracy",
                    "detected_rate",
                    "shift_mean",
                    "shift_median",
                    "shift_std",
                ]),
                &[vec![
                    r.n_labeled.to_string(),
                    r.n_detected.to_string(),
                    r.matched.len().to_string(),
                    fmt_opt(r.accuracy),
                    fmt_opt(r.detected_rate),
                    fmt_opt(r.shift_mean),
                    fmt_opt(r.shift_median),
                    fmt_opt(r.shift_std),
                ]],
            )?;
            let rows: Vec<Vec<String>> = r
                .matched
                .iter()
                .map(|m| {
                    vec![
                        m.detected_index.to_string(),
                        m.labeled_index.to_string(),
                        m.distance.to_string(),
                    ]
                })
                .collect();
            write_csv(
                &out.join("matches.csv"),
                &header(&["detected_index", "labeled_index", "distance"]),
                &rows,
            )?;
            let shifts: Vec<f64> = r.matched.iter().map(|m| m.distance).collect();
            if !shifts.is_empty() {
                let h = Histogram::from_values(&shifts, bins)?;
                write_csv(
                    &out.join("shift_hist.csv"),
                    &header(&["lo", "hi", "count"]),
                    &histogram_rows(&h),
                )?;
            }
            stdout.push(format!(
                "accuracy={} mean={} median={} std={}",
                fmt_opt(r.accuracy),
                fmt_opt(r.shift_mean),
                fmt_opt(r.shift_median),
                fmt_opt(r.shift_std)
            ));
        }

        Command::NnStats { input, k, bins } => {
            if k == 0 || bins == 0 {
                return usage("--k and --bins must be positive");
            }
            let pattern = load(&input)?;
            let s = nn_stats(&pattern, k, bins)?;
            write_csv(
                &out.join(format!("nn_stats_k{k}.csv")),
                &header(&["k", "n", "mean", "median", "std"]),
                &[vec![
                    k.to_string(),
                    s.per_point.len().to_string(),
                    s.mean.to_string(),
                    s.median.to_string(),
                    s.std.to_string(),
                ]],
            )?;
            write_csv(
                &out.join(format!("nn_hist_k{k}.csv")),
                &header(&["lo", "hi", "count"]),
                &histogram_rows(&s.histogram),
            )?;
            stdout.push(format!("mean={} median={} std={}", s.mean, s.median, s.std));
        }
    }
    Ok(stdout)
}
