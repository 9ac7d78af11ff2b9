//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. `ACCEPTANCE=1,3` runs a subset.

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use poisson_deconv::estimator::{double_smooth, smooth_truth, tilde_value};
use poisson_deconv::io::{group_by_chrom, intervals_to_observations, read_intervals};
use poisson_deconv::metrics::{
    bias_variance_check, l2_sq_values, median, rate_slope_check, replicate_moments, simulation_suite, variance_check,
    ScenarioResult,
};
use poisson_deconv::selection::{default_eta_grid, SelectionWorkspace};
use poisson_deconv::simulate::replicate_rng;
use poisson_deconv::{
    default_grid, estimate_tilde, oracle_bandwidth, run_benchmark, truth_curve, BenchmarkOptions, BetaShape,
    KernelSpec, Method, ObservationSet, Scenario,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn epa() -> KernelSpec {
    KernelSpec::epanechnikov()
}

/// 1. Integrated variance of f~_h against v_h = 0.3.
fn variance_closed_form() -> Outcome {
    let model = Scenario::Beta(BetaShape::Unisym).model();
    let v = variance_check(&model, &epa(), 1000, 0.05, 0.05, 2000, SEED, 512).unwrap();
    outcome(
        (0.95..=1.05).contains(&v.ratio) && (v.theoretical - 0.3).abs() < 1e-12,
        format!(
            "empirical {:.5}, v_h {:.5}, ratio {:.4} (need [0.95, 1.05])",
            v.empirical, v.theoretical, v.ratio
        ),
    )
}

/// 2. Monte Carlo mean of f~_h against K_h * f_X.
fn unbiasedness() -> Outcome {
    let model = Scenario::Beta(BetaShape::Unisym).model();
    let k = epa();
    let h = 0.05;
    let mom = replicate_moments(&model, &k, 1000, 0.05, h, 5000, SEED + 1, 512).unwrap();
    let target = smooth_truth(&model, &k, h, 512).unwrap();
    let worst = mom
        .mean
        .iter()
        .zip(&mom.variance)
        .zip(target.values())
        .map(|((m, v), t)| (m - t).abs() / (v / mom.replicates as f64).sqrt())
        .fold(0.0, f64::max);
    outcome(
        worst <= 4.0,
        format!("largest |mean - K_h*f| = {worst:.3} standard errors over 512 points (need <= 4)"),
    )
}

fn random_instance(rng: &mut ChaCha8Rng) -> (ObservationSet, f64) {
    let a = rng.random_range(0.02..0.5);
    let n = rng.random_range(1..50usize);
    let points: Vec<f64> = (0..n).map(|_| rng.random_range(-0.3..1.3)).collect();
    (
        ObservationSet::new(points, rng.random_range(1..2000), a, 1.0).unwrap(),
        a,
    )
}

/// 3. f~_{h,t} = f~_{t,h}.
fn symmetry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (obs, a) = random_instance(&mut rng);
        let h = a * rng.random_range(0.05..1.0);
        let t = a * rng.random_range(0.05..1.0);
        let ht = double_smooth(&obs, &epa(), h, t, 256).unwrap();
        let th = double_smooth(&obs, &epa(), t, h, 256).unwrap();
        let scale = ht.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let sup = ht
            .values()
            .iter()
            .zip(th.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        worst = worst.max(sup / scale);
    }
    outcome(
        worst <= 1e-6,
        format!("largest relative sup difference {worst:.2e} over 50 instances (need <= 1e-6)"),
    )
}

/// 4. Truncated shifts equal a brute-force wide sum bit for bit.
fn truncation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
    let k = epa();
    let mut mismatches = 0;
    for _ in 0..100 {
        let (obs, a) = random_instance(&mut rng);
        let h = a * rng.random_range(0.05..=1.0);
        let x = rng.random_range(-0.1..1.1);
        let mut total = 0.0;
        for &y in obs.points() {
            for j in -100_000i64..=100_000 {
                let u = (x - (2 * j + 1) as f64 * a - y) / h;
                if u.abs() <= 1.0 {
                    total += if j >= 0 { 1.0 } else { -1.0 } * k.deriv(u);
                }
            }
        }
        let brute = a / (obs.scaling_n() as f64 * h * h) * total;
        mismatches += (tilde_value(&obs, &k, h, x).unwrap() != brute) as usize;
    }
    outcome(mismatches == 0, format!("{mismatches} of 100 instances differ"))
}

fn aggregate(results: &[ScenarioResult], method: &Method, beta_only: bool) -> f64 {
    let ratios: Vec<f64> = results
        .iter()
        .filter(|r| !beta_only || r.scenario.label.starts_with("beta"))
        .map(|r| {
            let rep = r.report(method).unwrap();
            rep.median_mse / rep.oracle_median_mse
        })
        .collect();
    ratios.iter().sum::<f64>() / ratios.len() as f64
}

/// 5 and 6 share one run of the simulation grid.
fn suite() -> Vec<ScenarioResult> {
    let mut methods = vec![Method::adaptive_default(), Method::fixed_default(), Method::Oracle];
    methods.extend(default_eta_grid().into_iter().map(|eta| Method::FixedEta { eta }));
    run_benchmark(
        &simulation_suite(),
        &methods,
        30,
        SEED + 5,
        &BenchmarkOptions::default(),
    )
    .unwrap()
}

fn oracle_surrogate(results: &[ScenarioResult]) -> Outcome {
    let mut worst = (0.0, String::new());
    let mut failures = 0;
    for r in results {
        let rep = r.report(&Method::adaptive_default()).unwrap();
        let ratio = rep.median_mse / rep.oracle_median_mse;
        failures += (ratio > 3.0) as usize;
        if ratio > worst.0 {
            worst = (
                ratio,
                format!("{} n={} a={}", r.scenario.label, r.scenario.n, r.scenario.a),
            );
        }
    }
    outcome(
        failures == 0 && results.len() == 20,
        format!(
            "{failures} of {} scenarios above 3x; worst ratio {:.3} ({})",
            results.len(),
            worst.0,
            worst.1
        ),
    )
}

fn tuning_reproduction(results: &[ScenarioResult]) -> Outcome {
    let at_default = aggregate(results, &Method::fixed_default(), true);
    let (best_eta, best) = std::iter::once(-0.6)
        .chain(default_eta_grid())
        .map(|eta| (eta, aggregate(results, &Method::FixedEta { eta }, true)))
        .fold((f64::NAN, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    let part_a = at_default <= 2.0 * best;
    let adaptive = aggregate(results, &Method::adaptive_default(), false);
    let fixed = aggregate(results, &Method::fixed_default(), false);
    let part_b = adaptive <= fixed;
    outcome(
        part_a && part_b,
        format!(
            "(a) Beta aggregate at eta=-0.6 {at_default:.3} vs best {best:.3} at eta={best_eta:.3} [{}]; \
             (b) adaptive {adaptive:.3} vs fixed {fixed:.3} [{}]",
            if part_a { "ok" } else { "fail" },
            if part_b { "ok" } else { "fail" }
        ),
    )
}

/// 7. Oracle risk decays like n^{-2 beta/(2 beta + 3)}.
fn rate_slope() -> Outcome {
    let model = Scenario::Beta(BetaShape::Unisym).model();
    let ns = [250, 500, 1000, 2000, 4000];
    let r = rate_slope_check(&model, &epa(), 0.5, &ns, 100, SEED + 7, 30, None).unwrap();
    outcome(
        (-0.75..=-0.30).contains(&r.slope),
        format!(
            "slope {:.3} (need [-0.75, -0.30]); oracle h {:?}",
            r.slope,
            r.oracle_bandwidths
                .iter()
                .map(|h| format!("{h:.3}"))
                .collect::<Vec<_>>()
        ),
    )
}

/// 8. Fixed-h risk equals squared bias plus v_h.
fn bias_variance() -> Outcome {
    let cases = [
        (Scenario::Beta(BetaShape::Bisym), 1000, 0.1),
        (Scenario::Laplace, 1000, 1.0),
    ];
    let mut worst: f64 = 0.0;
    let mut rows = 0;
    for (i, (s, n, a)) in cases.into_iter().enumerate() {
        let model = s.model();
        let grid = default_grid(n, a, model.window_end(), &epa(), 30).unwrap();
        let hs: Vec<f64> = [0, 7, 14, 22, 29].iter().map(|&j| grid.bandwidths()[j]).collect();
        let m = poisson_deconv::default_grid_size(model.window_end());
        for row in bias_variance_check(&model, &epa(), n, a, &hs, 400, SEED + 80 + i as u64, m).unwrap() {
            worst = worst.max(row.z_score().abs());
            rows += 1;
        }
    }
    outcome(
        worst <= 4.0,
        format!("largest |z| {worst:.2} over {rows} (scenario, h) pairs (need <= 4)"),
    )
}

/// 9. Interval files through the library's real-data path.
fn real_data_path() -> Outcome {
    let k = epa();
    let s = Scenario::Beta(BetaShape::Bisym);
    let model = s.model();
    let (n, a) = (1000u64, 0.05);
    let m = 512;
    let grid = default_grid(n, a, 1.0, &k, 30).unwrap();
    let truth = truth_curve(&model, m).unwrap();
    let oracle = oracle_bandwidth(&model, n, a, &k, &grid, 30, SEED + 90, m).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut mses = Vec::new();
    for rep in 0..5u64 {
        // Interval widths vary around 2a; midpoints are the noisy points.
        let mut rng = replicate_rng(SEED + 91, rep);
        let obs = poisson_deconv::simulate::simulate_observation_with(&model, n, a, &mut rng).unwrap();
        let path = dir.path().join(format!("rep{rep}.tsv"));
        let mut f = std::fs::File::create(&path).unwrap();
        for &y in obs.points() {
            let half = a * rng.random_range(0.5..1.5);
            writeln!(f, "seq\t{}\t{}", y - half + 1.0, y + half + 1.0).unwrap();
        }
        drop(f);
        // Interval files cannot hold negative starts, so the data sit one
        // unit to the right and are moved back after parsing.
        let records = read_intervals(&path).unwrap();
        let (raw, a_hat) = intervals_to_observations(&records, 2.0, n).unwrap();
        let pts: Vec<f64> = raw.points().iter().map(|y| y - 1.0).collect();
        let obs = ObservationSet::new(pts, n, a_hat, 1.0).unwrap();
        let g = default_grid(n, a_hat, 1.0, &k, 30).unwrap();
        let ws = SelectionWorkspace::build(&obs, &k, &g, m).unwrap();
        let sel = ws.select_adaptive_gamma(&k, &default_eta_grid(), 0.01).unwrap();
        let curve = estimate_tilde(&obs, &k, sel.chosen_h, m).unwrap();
        mses.push(l2_sq_values(curve.values(), truth.values(), truth.grid().spacing()));
    }
    let med = median(&mses);
    let oracle_mse = oracle.risks[oracle.index];
    let recovered = med <= 3.0 * oracle_mse;

    // Chromosome-style input: two sequences, genomic coordinates.
    let bed = dir.path().join("peaks.bed");
    let mut f = std::fs::File::create(&bed).unwrap();
    writeln!(f, "track name=peaks").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 92);
    for chrom in ["chr1", "chr2"] {
        for _ in 0..400 {
            let centre: f64 = rng.random_range(1.0e6..4.9e7);
            let half: f64 = rng.random_range(200.0..800.0);
            writeln!(
                f,
                "{chrom}\t{}\t{}\tpeak",
                (centre - half).round(),
                (centre + half).round()
            )
            .unwrap();
        }
    }
    drop(f);
    let records = read_intervals(&bed).unwrap();
    let mut finite = true;
    let groups = group_by_chrom(&records);
    for (_, recs) in &groups {
        let scaled: Vec<_> = recs
            .iter()
            .map(|r| poisson_deconv::io::IntervalRecord::new(r.chrom.clone(), r.start / 1e6, r.end / 1e6).unwrap())
            .collect();
        let (obs, a_hat) = intervals_to_observations(&scaled, 50.0, scaled.len() as u64).unwrap();
        let g = default_grid(obs.scaling_n(), a_hat, 50.0, &k, 10).unwrap();
        let m = (4.0 * 50.0 / g.min()).ceil() as usize + 1;
        let ws = SelectionWorkspace::build(&obs, &k, &g, m).unwrap();
        let sel = ws.select_adaptive_gamma(&k, &default_eta_grid(), 0.01).unwrap();
        let curve = estimate_tilde(&obs, &k, sel.chosen_h, m).unwrap();
        finite &= curve.values().iter().all(|v| v.is_finite()) && curve.values().iter().any(|v| *v != 0.0);
    }
    outcome(
        recovered && finite && groups.len() == 2,
        format!(
            "median MSE {med:.4} vs oracle {oracle_mse:.4} (ratio {:.3}, need <= 3); chromosome input: {} sequences, finite curves: {finite}",
            med / oracle_mse,
            groups.len()
        ),
    )
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags such as `--nocapture`; only the
    // ACCEPTANCE variable is consulted.
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |i: u32| only.as_ref().is_none_or(|v| v.contains(&i));
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }

    let mut lines = Vec::new();
    let mut run = |id: &str, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let line = format!(
            "[{}] {id}. {name}: {} ({:.0}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        println!("{line}");
        lines.push((o.pass, line));
    };

    if wanted(1) {
        run("1", "variance closed form", &mut variance_closed_form);
    }
    if wanted(2) {
        run("2", "unbiasedness", &mut unbiasedness);
    }
    if wanted(3) {
        run("3", "double-smoothing symmetry", &mut symmetry);
    }
    if wanted(4) {
        run("4", "truncation exactness", &mut truncation);
    }
    if wanted(5) || wanted(6) {
        let results = suite();
        if wanted(5) {
            run("5", "adaptive selection within 3x of oracle", &mut || {
                oracle_surrogate(&results)
            });
        }
        if wanted(6) {
            run("6", "tuning reproduction", &mut || tuning_reproduction(&results));
        }
    }
    if wanted(7) {
        run("7", "rate slope", &mut rate_slope);
    }
    if wanted(8) {
        run("8", "bias-variance decomposition", &mut bias_variance);
    }
    if wanted(9) {
        run("9", "real-data path", &mut real_data_path);
    }

    let failed = lines.iter().filter(|(p, _)| !p).count();
    println!("acceptance: {} passed, {failed} failed", lines.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
