use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use palmpat::envelope::simulate_csr;
use palmpat::reproduction::{fit, FitConfig};
use palmpat::ripley::DistanceGrid;
use palmpat::Window;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_palmpat"))
}

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = bin();
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("PALMPAT_THREADS", t),
        None => cmd.env_remove("PALMPAT_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args, None);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_points(dir: &Path, name: &str, n: usize, seed: u64) -> PathBuf {
    let w = Window::new(0.0, 0.0, 100.0, 100.0).unwrap();
    let pattern = simulate_csr(&w, n, seed);
    let mut body = String::from("x,y\n");
    for p in pattern.points() {
        body.push_str(&format!("{},{}\n", p.x, p.y));
    }
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn ripley_output_contract() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write_points(dir.path(), "p.csv", 80, 1);
    let out = dir.path().join("out");
    for stat in ["g", "f", "j"] {
        ok(&[
            "ripley",
            "--points",
            s(&pts),
            "--window",
            "0,0,100,100",
            "--stat",
            stat,
            "--out",
            s(&out),
            "--svg",
        ]);
        let text = read(out.join(format!("ripley_{stat}.csv")));
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("d,value"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 100);
        assert!(rows[0].starts_with("0,"));
        assert!(rows[99].starts_with("50,"));
        assert!(out.join(format!("ripley_{stat}.svg")).exists());
    }
    // G and F both vanish at d = 0, so J starts at 1
    let j = read(out.join("ripley_j.csv"));
    assert!(j.lines().nth(1).unwrap().ends_with(",1"));
}

#[test]
fn envelope_output_contract() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write_points(dir.path(), "p.csv", 60, 2);
    let stdout = ok(&[
        "envelope",
        "--points",
        s(&pts),
        "--window",
        "0,0,100,100",
        "--sims",
        "19",
        "--grid-steps",
        "20",
        "--out",
        s(dir.path()),
    ]);
    assert!(stdout.starts_with("deviation_p="), "{stdout}");
    let text = read(dir.path().join("envelope_g.csv"));
    assert_eq!(text.lines().next(), Some("d,observed,mean,lo95,hi95,p"));
    assert_eq!(text.lines().count(), 21);
}

#[test]
fn outputs_are_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write_points(dir.path(), "p.csv", 60, 3);
    let mut seen: Vec<(String, String, String)> = Vec::new();
    for threads in ["1", "4", "16", "4"] {
        let out = dir.path().join(format!("t{threads}_{}", seen.len()));
        let common = [
            "--points",
            s(&pts),
            "--window",
            "0,0,100,100",
            "--out",
            s(&out),
        ];
        let mut fit_args = vec!["fit", "--p", "0.3,0.6", "--sigma", "5,10", "--trials", "3"];
        fit_args.extend(common);
        let mut env_args = vec![
            "envelope",
            "--stat",
            "j",
            "--sims",
            "19",
            "--grid-steps",
            "30",
        ];
        env_args.extend(common);
        let a = run(&fit_args, Some(threads));
        let b = run(&env_args, Some(threads));
        assert!(a.status.success() && b.status.success());
        seen.push((
            String::from_utf8(a.stdout).unwrap(),
            read(out.join("fit_table.csv")),
            read(out.join("envelope_j.csv")),
        ));
    }
    for other in &seen[1..] {
        assert_eq!(other, &seen[0]);
    }
}

#[test]
fn fit_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write_points(dir.path(), "p.csv", 50, 4);
    let stdout = ok(&[
        "fit",
        "--points",
        s(&pts),
        "--window",
        "0,0,100,100",
        "--p",
        "0.2:0.6:0.2",
        "--sigma",
        "4,8",
        "--trials",
        "2",
        "--grid-steps",
        "25",
        "--seed",
        "99",
        "--out",
        s(dir.path()),
    ]);

    let w = Window::new(0.0, 0.0, 100.0, 100.0).unwrap();
    let observed = simulate_csr(&w, 50, 4);
    let mut config = FitConfig::new(&observed, vec![0.2, 0.4, 0.6], vec![4.0, 8.0], 99);
    config.n_trials = 2;
    config.grid = DistanceGrid::linspace(50.0, 25).unwrap();
    let r = fit(&observed, &config).unwrap();
    assert_eq!(
        stdout.trim(),
        format!(
            "p*={} sigma*={} d_min={}",
            r.best.p(),
            r.best.sigma(),
            r.d_min
        )
    );
    let table = read(dir.path().join("fit_table.csv"));
    assert_eq!(table.lines().next(), Some("p,sigma,d_total,d_1,d_2"));
    assert_eq!(table.lines().count(), 7);
    let best = read(dir.path().join("fit_best.csv"));
    assert_eq!(best.lines().next(), Some("p,sigma,d_min"));
}

#[test]
fn simulate_writes_requested_points() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "simulate",
        "--window",
        "0,0,50,20",
        "--n",
        "40",
        "--p",
        "0.5",
        "--sigma",
        "2",
        "--out",
        s(dir.path()),
    ]);
    let text = read(dir.path().join("simulated.csv"));
    assert_eq!(text.lines().next(), Some("x,y"));
    let pts: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (x, y) = l.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect();
    assert_eq!(pts.len(), 40);
    assert!(pts
        .iter()
        .all(|&(x, y)| (0.0..=50.0).contains(&x) && (0.0..=20.0).contains(&y)));
}

#[test]
fn merge_and_count_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let det = dir.path().join("det.csv");
    // the same palm seen by two overlapping tiles, plus one separate palm
    std::fs::write(
        &det,
        "tile_row,tile_col,x_min,y_min,x_max,y_max,confidence\n\
         0,0,500,100,540,140,0.9\n\
         0,1,100,100,140,140,0.8\n\
         0,0,10,10,30,30,0.7\n",
    )
    .unwrap();
    let stdout = ok(&["merge", "--detections", s(&det), "--out", s(dir.path())]);
    assert_eq!(stdout.trim(), "kept 2 of 3 boxes");
    let centers = read(dir.path().join("centers.csv"));
    assert_eq!(centers, "x,y\n520,120\n20,20\n");

    let labeled = dir.path().join("lab.csv");
    std::fs::write(&labeled, "x,y\n523,124\n20,20\n300,300\n").unwrap();
    let stdout = ok(&[
        "count",
        "--detected",
        s(&dir.path().join("centers.csv")),
        "--labeled",
        s(&labeled),
        "--radius",
        "5",
        "--out",
        s(dir.path()),
    ]);
    assert!(
        stdout.starts_with("accuracy=0.6666666666666666 mean=2.5"),
        "{stdout}"
    );
    let report = read(dir.path().join("count_report.csv"));
    assert_eq!(
        report.lines().next(),
        Some("n_labeled,n_detected,n_matched,accuracy,detected_rate,shift_mean,shift_median,shift_std")
    );
    assert_eq!(read(dir.path().join("matches.csv")).lines().count(), 3);
}

#[test]
fn nn_stats_contract() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("p.csv");
    std::fs::write(&pts, "x,y\n0,0\n3,4\n10,0\n").unwrap();
    let stdout = ok(&[
        "nn-stats",
        "--points",
        s(&pts),
        "--bins",
        "2",
        "--out",
        s(dir.path()),
    ]);
    assert!(stdout.starts_with("mean="));
    let stats = read(dir.path().join("nn_stats_k1.csv"));
    assert_eq!(stats.lines().next(), Some("k,n,mean,median,std"));
    // nearest distances 5, 5 and 7.2801...
    assert!(stats.lines().nth(1).unwrap().starts_with("1,3,"));
    assert_eq!(read(dir.path().join("nn_hist_k1.csv")).lines().count(), 3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let pts = write_points(dir.path(), "p.csv", 20, 5);
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "x,y\n").unwrap();
    let out = s(dir.path());

    let code = |args: &[&str]| run(args, None).status.code();
    assert_eq!(code(&["no-such-command"]), Some(2));
    assert_eq!(
        code(&["ripley", "--points", s(&pts), "--stat", "k", "--out", out]),
        Some(2)
    );
    assert_eq!(
        code(&[
            "fit",
            "--points",
            s(&pts),
            "--p",
            "0.7:0.3:0.1",
            "--out",
            out
        ]),
        Some(2)
    );
    assert_eq!(
        code(&["envelope", "--points", s(&pts), "--sims", "5", "--out", out]),
        Some(2)
    );
    assert_eq!(
        code(&["ripley", "--points", s(&empty), "--out", out]),
        Some(3)
    );
    assert_eq!(
        code(&[
            "ripley",
            "--points",
            s(&dir.path().join("missing.csv")),
            "--out",
            out
        ]),
        Some(3)
    );
    // points outside the declared window
    assert_eq!(
        code(&[
            "ripley",
            "--points",
            s(&pts),
            "--window",
            "0,0,10,10",
            "--out",
            out
        ]),
        Some(3)
    );
    let bad = run(&["ripley", "--points", s(&pts), "--out", out], Some("many"));
    assert_eq!(bad.status.code(), Some(2));
}
