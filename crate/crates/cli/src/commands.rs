use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use poisson_deconv::io::{
    group_by_chrom, intervals_to_observations_with, read_intervals, read_points_csv, write_curve_csv, write_points_csv,
    write_report_json, WidthConvention,
};
use poisson_deconv::metrics::{replicate_curve, simulation_suite, SUITE_REPLICATES};
use poisson_deconv::selection::eta_grid;
use poisson_deconv::{
    default_grid, default_grid_size, estimate_naive, estimate_tilde, higher_order_kernel, run_benchmark,
    simulate_observation, theory_grid, truth_curve, BandwidthGrid, BenchmarkOptions, BenchmarkScenario, EstimateCurve,
    KernelSpec, Method, ObservationSet, SelectionResult, SelectionWorkspace,
};

use crate::{
    AConvention, BenchmarkArgs, Command, DeconvolveArgs, EstimateArgs, GridKind, InputArgs, MethodKind, SelectArgs,
    SimulateArgs, Tune, TuneArgs,
};

/// Upper bound on the evaluation grid picked automatically for interval data.
const MAX_AUTO_GRID: usize = 1 << 20;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::Estimate(args) => estimate(args),
        Command::Select(args) => select(args),
        Command::Benchmark(args) => benchmark(args),
        Command::Deconvolve(args) => deconvolve(args),
    }
}

pub fn kernel_from_name(name: &str) -> Result<KernelSpec> {
    if name == "epanechnikov" {
        return Ok(KernelSpec::epanechnikov());
    }
    if let Some(order) = name.strip_prefix("order-") {
        let ell: usize = order.parse().with_context(|| format!("bad kernel order in `{name}`"))?;
        return Ok(higher_order_kernel(ell)?);
    }
    bail!("unknown kernel `{name}`; use `epanechnikov` or `order-L`")
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let model = args.scenario.model();
    let obs = simulate_observation(&model, args.n, args.a, args.seed)?;
    write_points_csv(obs.points(), &args.out)?;
    eprintln!("wrote {} points to {}", obs.count(), args.out.display());
    Ok(())
}

fn load_points(input: &InputArgs) -> Result<ObservationSet> {
    let points = read_points_csv(&input.points)?;
    Ok(ObservationSet::new(points, input.n, input.a, input.t_end)?)
}

fn bandwidth_grid(n: u64, a: f64, t_end: f64, kernel: &KernelSpec, tuning: &TuneArgs) -> Result<BandwidthGrid> {
    Ok(match tuning.grid {
        GridKind::Geometric => default_grid(n, a, t_end, kernel, tuning.grid_points)?,
        GridKind::Theory => theory_grid(n, tuning.delta, a, kernel)?,
    })
}

fn run_selection(
    obs: &ObservationSet,
    kernel: &KernelSpec,
    grid: &BandwidthGrid,
    tuning: &TuneArgs,
    tune: Tune,
    m: usize,
) -> Result<SelectionResult> {
    let ws = SelectionWorkspace::build(obs, kernel, grid, m)?;
    Ok(match tune {
        Tune::FixedEta => ws.select_fixed_eta(kernel, tuning.eta)?,
        Tune::AdaptiveGamma => ws.select_adaptive_gamma(kernel, &eta_grid(tuning.eta_points), tuning.gamma)?,
    })
}

fn write_curve(curve: EstimateCurve, clip: bool, path: &Path) -> Result<()> {
    let curve = if clip { curve.clip_nonnegative() } else { curve };
    write_curve_csv(&curve, path)?;
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let kernel = kernel_from_name(&args.kernel.kernel)?;
    let obs = load_points(&args.input)?;
    let m = args.kernel.m.unwrap_or_else(|| default_grid_size(obs.window_end()));
    let h = match args.h {
        Some(h) => h,
        None => {
            let grid = bandwidth_grid(
                obs.scaling_n(),
                obs.noise_half_width(),
                obs.window_end(),
                &kernel,
                &args.tuning,
            )?;
            let tune = args.tune.unwrap_or(Tune::AdaptiveGamma);
            let sel = run_selection(&obs, &kernel, &grid, &args.tuning, tune, m)?;
            if sel.degenerate {
                eprintln!("no observations: estimate is identically zero");
            }
            println!("h\t{}", sel.chosen_h);
            sel.chosen_h
        }
    };
    let curve = estimate_tilde(&obs, &kernel, h, m)?;
    write_curve(curve, args.clip_nonnegative, &args.out)
}

fn select(args: SelectArgs) -> Result<()> {
    let kernel = kernel_from_name(&args.kernel.kernel)?;
    let obs = load_points(&args.input)?;
    let m = args.kernel.m.unwrap_or_else(|| default_grid_size(obs.window_end()));
    let grid = bandwidth_grid(
        obs.scaling_n(),
        obs.noise_half_width(),
        obs.window_end(),
        &kernel,
        &args.tuning,
    )?;
    let sel = run_selection(&obs, &kernel, &grid, &args.tuning, args.tune, m)?;
    println!("h\t{}", sel.chosen_h);
    println!("index\t{}", sel.chosen_index);
    println!("eta\t{}", sel.criterion[sel.chosen_index].eta);
    if let Some(out) = &args.out {
        let text = serde_json::to_string_pretty(&sel)?;
        fs::write(out, text + "\n").with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn benchmark_methods(args: &BenchmarkArgs) -> Vec<Method> {
    let mut methods = Vec::new();
    let mut push = |m: Method| {
        if !methods.contains(&m) {
            methods.push(m);
        }
    };
    for kind in &args.methods {
        match kind {
            MethodKind::FixedEta => args.eta.iter().for_each(|&eta| push(Method::FixedEta { eta })),
            MethodKind::AdaptiveGamma => push(Method::AdaptiveGamma { gamma: args.gamma }),
            MethodKind::Oracle => push(Method::Oracle),
        }
    }
    if args.eta_sweep {
        for eta in eta_grid(args.eta_points) {
            push(Method::FixedEta { eta });
        }
    }
    methods
}

fn benchmark(args: BenchmarkArgs) -> Result<()> {
    let kernel = kernel_from_name(&args.kernel.kernel)?;
    let scenarios: Vec<BenchmarkScenario> = if args.paper_suite {
        simulation_suite()
    } else {
        if args.scenario.is_empty() || args.n.is_empty() || args.a.is_empty() {
            bail!("give --paper-suite, or at least one each of --scenario, --n and --a");
        }
        let mut out = Vec::new();
        for &s in &args.scenario {
            for &a in &args.a {
                for &n in &args.n {
                    out.push(BenchmarkScenario::new(s, n, a));
                }
            }
        }
        out
    };
    let replicates = args.replicates.unwrap_or(SUITE_REPLICATES);
    let methods = benchmark_methods(&args);
    let options = BenchmarkOptions {
        kernel: kernel.clone(),
        grid_points: args.grid_points,
        grid_size: args.kernel.m,
        eta_grid: eta_grid(args.eta_points),
    };
    let results = run_benchmark(&scenarios, &methods, replicates, args.seed, &options)?;
    write_report_json(&results, &args.out)?;

    println!("scenario\tn\ta\tmethod\tmedian_mse\tmean_mse\toracle_median_mse\toracle_h");
    for res in &results {
        for r in &res.reports {
            println!(
                "{}\t{}\t{}\t{}\t{:.6e}\t{:.6e}\t{:.6e}\t{:.6}",
                r.scenario.label,
                r.scenario.n,
                r.scenario.a,
                r.method.label(),
                r.median_mse,
                r.mean_mse,
                r.oracle_median_mse,
                r.oracle_h
            );
        }
    }

    if let Some(dir) = &args.dump_curves {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (s, res) in scenarios.iter().zip(&results) {
            let stem = format!("{}_n{}_a{}", res.scenario.label, res.scenario.n, res.scenario.a);
            let truth = truth_curve(&s.model, res.scenario.grid_size)?;
            write_curve_csv(&truth, dir.join(format!("{stem}_truth.csv")))?;
            for r in &res.reports {
                let curve =
                    replicate_curve(s, r, r.median_replicate, &kernel).with_context(|| format!("scenario {stem}"))?;
                let method = r
                    .method
                    .label()
                    .replace(['(', ')'], "_")
                    .trim_end_matches('_')
                    .to_string();
                write_curve_csv(&curve, dir.join(format!("{stem}_{method}.csv")))?;
            }
        }
    }
    Ok(())
}

fn output_path(base: &Path, chrom: Option<&str>, several: bool) -> PathBuf {
    match (several, chrom) {
        (true, Some(c)) => {
            let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("curve");
            base.with_file_name(format!("{stem}.{c}.csv"))
        }
        _ => base.to_path_buf(),
    }
}

fn deconvolve(args: DeconvolveArgs) -> Result<()> {
    let kernel = kernel_from_name(&args.kernel.kernel)?;
    let records = read_intervals(&args.intervals)?;
    let mut groups = group_by_chrom(&records);
    if let Some(c) = &args.chrom {
        groups.retain(|(g, _)| g.as_deref() == Some(c.as_str()));
        if groups.is_empty() {
            return Err(poisson_deconv::Error::InvalidParameter {
                name: "chrom",
                reason: format!("no intervals on `{c}` in {}", args.intervals.display()),
            }
            .into());
        }
    }
    let convention = match args.a_convention {
        AConvention::Half => WidthConvention::Half,
        AConvention::Full => WidthConvention::Full,
    };
    let several = groups.len() > 1;
    println!("chrom\tcount\ta\tT\th");
    for (chrom, recs) in &groups {
        let label = chrom.as_deref().unwrap_or("all");
        let t_end = match args.t_end {
            Some(t) => t,
            None => recs.iter().map(|r| r.end).fold(0.0, f64::max) / args.scale,
        };
        let (obs, a) =
            intervals_to_observations_with(recs, t_end, args.n.unwrap_or(recs.len() as u64), convention, args.scale)
                .with_context(|| format!("sequence {label}"))?;
        let grid = bandwidth_grid(obs.scaling_n(), a, t_end, &kernel, &args.tuning)
            .with_context(|| format!("sequence {label}"))?;
        // At least four evaluation points per smallest bandwidth.
        let m = args.kernel.m.unwrap_or_else(|| {
            let fine = (4.0 * t_end / grid.min()).ceil() as usize + 1;
            default_grid_size(t_end).max(fine.min(MAX_AUTO_GRID))
        });
        let sel = run_selection(&obs, &kernel, &grid, &args.tuning, Tune::AdaptiveGamma, m)?;
        let curve = estimate_tilde(&obs, &kernel, sel.chosen_h, m)?;
        write_curve(
            curve,
            args.clip_nonnegative,
            &output_path(&args.out, chrom.as_deref(), several),
        )?;
        if let Some(naive) = &args.naive {
            let curve = estimate_naive(&obs, &kernel, sel.chosen_h, m)?;
            write_curve(
                curve,
                args.clip_nonnegative,
                &output_path(naive, chrom.as_deref(), several),
            )?;
        }
        println!("{label}\t{}\t{a}\t{t_end}\t{}", obs.count(), sel.chosen_h);
    }
    Ok(())
}
