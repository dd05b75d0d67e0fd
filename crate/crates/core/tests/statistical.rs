//! Monte Carlo properties checked over many seeded repetitions.

use palmpat::envelope::{envelope, simulate_csr, Statistic};
use palmpat::reproduction::{simulate_reproduction, ReproductionParams};
use palmpat::ripley::{g_function, DistanceGrid};
use palmpat::rng::derive_seed;
use palmpat::Window;

const TRIALS: u64 = 100;

fn window() -> Window {
    Window::new(0.0, 0.0, 100.0, 100.0).unwrap()
}

#[test]
fn j_envelope_covers_csr_patterns() {
    let w = window();
    let grid = DistanceGrid::linspace(10.0, 40).unwrap();
    let mut total = 0.0;
    for t in 0..TRIALS {
        let pattern = simulate_csr(&w, 100, derive_seed(11, &[t, 0]));
        let r = envelope(&pattern, &grid, Statistic::J, 39, derive_seed(11, &[t, 1])).unwrap();
        total += r.coverage().unwrap();
    }
    let mean = total / TRIALS as f64;
    assert!(mean >= 0.90, "mean coverage {mean}");
}

#[test]
fn reproduction_with_p_zero_looks_random() {
    let w = window();
    let grid = DistanceGrid::linspace(10.0, 40).unwrap();
    let params = ReproductionParams::new(0.0, 1.0).unwrap();
    let mut rejections = 0;
    for t in 0..TRIALS {
        let sim = simulate_reproduction(&w, 100, params, derive_seed(12, &[t, 0])).unwrap();
        assert_eq!(sim.uniform_fallbacks, 0);
        let r = envelope(&sim.pattern, &grid, Statistic::G, 39, derive_seed(12, &[t, 1])).unwrap();
        rejections += usize::from(r.rejects_csr(0.05));
    }
    assert!(rejections <= 10, "{rejections} of {TRIALS} rejected");
}

#[test]
fn p_zero_and_csr_share_mean_g_curve() {
    let w = window();
    let grid = DistanceGrid::linspace(10.0, 20).unwrap();
    let params = ReproductionParams::new(0.0, 1.0).unwrap();
    let mut a = vec![0.0; grid.len()];
    let mut b = vec![0.0; grid.len()];
    for t in 0..TRIALS {
        let sim = simulate_reproduction(&w, 200, params, derive_seed(13, &[t, 0])).unwrap();
        let csr = simulate_csr(&w, 200, derive_seed(13, &[t, 1]));
        let ga = g_function(&sim.pattern, &grid).unwrap().dense().unwrap();
        let gb = g_function(&csr, &grid).unwrap().dense().unwrap();
        for i in 0..grid.len() {
            a[i] += ga[i] / TRIALS as f64;
            b[i] += gb[i] / TRIALS as f64;
        }
    }
    // per-pattern G values at n = 200 have sd near 0.035; the mean of 100
    // differs by about 0.005, so 0.02 is roughly four standard errors
    let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst < 0.02, "max mean difference {worst}");
}
