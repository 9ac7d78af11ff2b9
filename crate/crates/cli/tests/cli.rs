use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use poisson_deconv::io::{read_curve_csv, read_points_csv, write_report_json};
use poisson_deconv::selection::default_eta_grid;
use poisson_deconv::{
    default_grid, estimate_naive, estimate_tilde, run_benchmark, simulate_observation, BenchmarkOptions,
    BenchmarkScenario, BetaShape, KernelSpec, Method, ObservationSet, Scenario, SelectionWorkspace,
};

fn pdeconv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdeconv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = pdeconv(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn error_line(args: &[&str]) -> String {
    let out = pdeconv(args);
    assert_eq!(out.status.code(), Some(1), "{args:?} should fail");
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "multi-line error: {err}");
    err
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn curve_values(p: &Path) -> Vec<f64> {
    read_curve_csv(p).unwrap().into_iter().map(|(_, v)| v).collect()
}

#[test]
fn simulate_matches_library_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&p1, &p2] {
        ok(&[
            "simulate",
            "--scenario",
            "beta-biasym",
            "--n",
            "800",
            "--a",
            "0.05",
            "--seed",
            "11",
            "--out",
            s(p),
        ]);
    }
    assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    let lib = simulate_observation(&Scenario::Beta(BetaShape::Biasym).model(), 800, 0.05, 11).unwrap();
    assert_eq!(read_points_csv(&p1).unwrap(), lib.points());
}

#[test]
fn unknown_scenario_lists_the_valid_ones() {
    let err = error_line(&[
        "simulate",
        "--scenario",
        "gamma",
        "--n",
        "10",
        "--a",
        "0.1",
        "--seed",
        "1",
        "--out",
        "x.csv",
    ]);
    assert!(err.starts_with("error[usage]:"), "{err}");
    for name in ["beta-unisym", "beta-bisym", "beta-biasym", "laplace"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn estimate_equals_library() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("y.csv");
    let out = dir.path().join("f.csv");
    ok(&[
        "simulate",
        "--scenario",
        "beta-unisym",
        "--n",
        "500",
        "--a",
        "0.1",
        "--seed",
        "4",
        "--out",
        s(&pts),
    ]);
    ok(&[
        "estimate",
        "--points",
        s(&pts),
        "--n",
        "500",
        "--a",
        "0.1",
        "--h",
        "0.07",
        "--out",
        s(&out),
    ]);
    let obs = ObservationSet::new(read_points_csv(&pts).unwrap(), 500, 0.1, 1.0).unwrap();
    let lib = estimate_tilde(&obs, &KernelSpec::epanechnikov(), 0.07, 512).unwrap();
    assert_eq!(curve_values(&out), lib.values());

    let err = error_line(&[
        "estimate",
        "--points",
        s(&pts),
        "--n",
        "500",
        "--a",
        "0.1",
        "--h",
        "0.2",
        "--out",
        s(&out),
    ]);
    assert!(err.starts_with("error[bandwidth]:"), "{err}");
}

#[test]
fn tuned_estimate_uses_adaptive_selection() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("y.csv");
    let out = dir.path().join("f.csv");
    ok(&[
        "simulate",
        "--scenario",
        "beta-bisym",
        "--n",
        "1000",
        "--a",
        "0.1",
        "--seed",
        "8",
        "--out",
        s(&pts),
    ]);
    let stdout = ok(&[
        "estimate",
        "--points",
        s(&pts),
        "--n",
        "1000",
        "--a",
        "0.1",
        "--tune",
        "adaptive-gamma",
        "--out",
        s(&out),
    ]);
    let h: f64 = stdout.trim().strip_prefix("h\t").unwrap().parse().unwrap();

    let k = KernelSpec::epanechnikov();
    let obs = ObservationSet::new(read_points_csv(&pts).unwrap(), 1000, 0.1, 1.0).unwrap();
    let grid = default_grid(1000, 0.1, 1.0, &k, 30).unwrap();
    let ws = SelectionWorkspace::build(&obs, &k, &grid, 512).unwrap();
    let sel = ws.select_adaptive_gamma(&k, &default_eta_grid(), 0.01).unwrap();
    assert_eq!(h, sel.chosen_h);
    assert_eq!(curve_values(&out), estimate_tilde(&obs, &k, h, 512).unwrap().values());

    let select_out = ok(&["select", "--points", s(&pts), "--n", "1000", "--a", "0.1"]);
    assert!(select_out.starts_with(&format!("h\t{h}\n")), "{select_out}");
}

#[test]
fn benchmark_report_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let stdout = ok(&[
        "benchmark",
        "--scenario",
        "beta-unisym,laplace",
        "--n",
        "300",
        "--a",
        "0.1",
        "--R",
        "2",
        "--seed",
        "3",
        "--grid-points",
        "5",
        "--m",
        "128",
        "--out",
        s(&json),
    ]);
    // Header plus two scenarios times three methods.
    assert_eq!(stdout.lines().count(), 7, "{stdout}");

    let scen = [
        BenchmarkScenario::new(Scenario::Beta(BetaShape::Unisym), 300, 0.1),
        BenchmarkScenario::new(Scenario::Laplace, 300, 0.1),
    ];
    let methods = [Method::fixed_default(), Method::adaptive_default(), Method::Oracle];
    let opts = BenchmarkOptions {
        grid_points: 5,
        grid_size: Some(128),
        ..Default::default()
    };
    let lib = dir.path().join("lib.json");
    write_report_json(&run_benchmark(&scen, &methods, 2, 3, &opts).unwrap(), &lib).unwrap();
    assert_eq!(fs::read(&json).unwrap(), fs::read(&lib).unwrap());
}

#[test]
fn benchmark_rejects_mixed_scenario_flags() {
    let err = error_line(&[
        "benchmark",
        "--paper-suite",
        "--n",
        "100",
        "--seed",
        "1",
        "--out",
        "r.json",
    ]);
    assert!(err.starts_with("error[usage]:"), "{err}");
}

#[test]
fn deconvolve_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let bed = dir.path().join("peaks.bed");
    let obs = simulate_observation(&Scenario::Beta(BetaShape::Unisym).model(), 600, 0.02, 5).unwrap();
    let mut text = String::from("track name=test\n");
    for chrom in ["chrA", "chrB"] {
        for &y in obs.points() {
            // A 0..1000 window; width 40 gives a = 0.02 after scaling.
            let c = 1000.0 * (y + 0.1) / 1.2;
            text += &format!("{chrom}\t{:.3}\t{:.3}\tpeak\n", c - 20.0, c + 20.0);
        }
    }
    fs::write(&bed, text).unwrap();
    let out = dir.path().join("curve.csv");
    let naive = dir.path().join("naive.csv");
    let stdout = ok(&[
        "deconvolve",
        "--intervals",
        s(&bed),
        "--scale",
        "1000",
        "--T",
        "1",
        "--out",
        s(&out),
        "--naive",
        s(&naive),
    ]);
    let rows: Vec<&str> = stdout.lines().collect();
    assert_eq!(rows.len(), 3, "{stdout}");
    for chrom in ["chrA", "chrB"] {
        let curve = curve_values(&dir.path().join(format!("curve.{chrom}.csv")));
        assert!(curve.iter().all(|v| v.is_finite()));

        // The naive curve is plain kernel smoothing at the reported bandwidth.
        let row = rows.iter().find(|r| r.starts_with(chrom)).unwrap();
        let fields: Vec<&str> = row.split('\t').collect();
        let (a, h): (f64, f64) = (fields[2].parse().unwrap(), fields[4].parse().unwrap());
        let recs = poisson_deconv::io::read_intervals(&bed).unwrap();
        let mine: Vec<_> = recs.into_iter().filter(|r| r.chrom.as_deref() == Some(chrom)).collect();
        let (o, a_lib) = poisson_deconv::io::intervals_to_observations_with(
            &mine,
            1.0,
            mine.len() as u64,
            Default::default(),
            1000.0,
        )
        .unwrap();
        assert_eq!(a, a_lib);
        let m = read_curve_csv(dir.path().join(format!("naive.{chrom}.csv")))
            .unwrap()
            .len();
        let lib = estimate_naive(&o, &KernelSpec::epanechnikov(), h, m).unwrap();
        assert_eq!(
            curve_values(&dir.path().join(format!("naive.{chrom}.csv"))),
            lib.values()
        );
    }

    let only = ok(&[
        "deconvolve",
        "--intervals",
        s(&bed),
        "--scale",
        "1000",
        "--T",
        "1",
        "--chrom",
        "chrB",
        "--out",
        s(&out),
    ]);
    assert_eq!(only.lines().count(), 2);
    assert!(out.exists());

    let err = error_line(&[
        "deconvolve",
        "--intervals",
        s(&dir.path().join("missing.bed")),
        "--out",
        s(&out),
    ]);
    assert!(err.starts_with("error[io]:"), "{err}");
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(
        &cfg,
        "# simulation defaults\nscenario = laplace\nn = 50\na = 0.5\nseed = 9\n",
    )
    .unwrap();
    let from_cfg = dir.path().join("c.csv");
    let overridden = dir.path().join("o.csv");
    let direct = dir.path().join("d.csv");
    ok(&["simulate", "--config", s(&cfg), "--out", s(&from_cfg)]);
    ok(&["simulate", "--config", s(&cfg), "--n", "400", "--out", s(&overridden)]);
    ok(&[
        "simulate",
        "--scenario",
        "laplace",
        "--n",
        "400",
        "--a",
        "0.5",
        "--seed",
        "9",
        "--out",
        s(&direct),
    ]);
    assert_eq!(fs::read(&overridden).unwrap(), fs::read(&direct).unwrap());
    let lib = simulate_observation(&Scenario::Laplace.model(), 50, 0.5, 9).unwrap();
    assert_eq!(read_points_csv(&from_cfg).unwrap(), lib.points());

    let err = error_line(&[
        "simulate",
        "--config",
        s(&dir.path().join("nope.conf")),
        "--out",
        "x.csv",
    ]);
    assert!(err.starts_with("error[config]:"), "{err}");
}
