//! `rdalloc` — fit distortion-rate surfaces, allocate bits, and map Pareto
//! sets from the command line.
//!
//! Subcommands: `fit`, `allocate`, `pareto`, `weights-inverse`, `synth`.
//! Exit codes: 0 success, 2 input validation, 3 empty or degenerate data,
//! 4 solver non-convergence.

mod error;
mod formats;

use clap::{Parser, Subcommand, ValueEnum};
use error::{CliError, CliResult};
use formats::{
    read_samples, read_surface_file, write_json, write_plot_table, write_samples,
    AllocationRecord, BoundReport, ParetoReport, SegmentReport, SurfaceFile, SurfaceRecord,
    WeightsRecord, SCHEMA_VERSION,
};
use rdalloc_core::alloc::{baseline_equal, baseline_proportional, fit_first, waterfill_closed_form};
use rdalloc_core::fit::{fit_surface, window_samples_with, FitConfig};
use rdalloc_core::model::{evaluate_surface, AllocationProblem, RateVector, TaskWeights};
use rdalloc_core::pareto::{
    bound_polygon_3x2, pareto_segment_2xk, rate_extrema_3x2, sample_pareto_by_weights,
};
use rdalloc_core::synth::{generate_system, ParamRange, SynthSpec};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "rdalloc",
    version,
    about = "Distortion-rate surface fitting and multi-stream bit allocation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one surface per task to a measured samples file.
    Fit(FitArgs),
    /// Compute a bit allocation for fitted surfaces.
    Allocate(AllocateArgs),
    /// Characterize the Pareto set and emit plot-data tables.
    Pareto(ParetoArgs),
    /// Task weights inversely proportional to mean task distortion.
    WeightsInverse(WeightsInverseArgs),
    /// Generate a synthetic system: samples file plus ground-truth surfaces.
    Synth(SynthArgs),
}

#[derive(clap::Args)]
struct FitArgs {
    /// Samples CSV (header R_1..R_N, D_1..D_k).
    #[arg(long)]
    samples: PathBuf,
    /// Total rate budget the fit is targeted at (Kbits).
    #[arg(long)]
    total_rate: f64,
    /// Skip the rate-sum window filter around the total rate.
    #[arg(long)]
    no_window: bool,
    /// Lower window multiplier on the rate sum.
    #[arg(long, default_value_t = 0.75)]
    window_low: f64,
    /// Upper window multiplier on the rate sum.
    #[arg(long, default_value_t = 1.25)]
    window_high: f64,
    #[arg(long, default_value_t = 200)]
    max_iterations: usize,
    #[arg(long, default_value_t = 1e-3)]
    damping_init: f64,
    #[arg(long, default_value_t = 10.0)]
    damping_up: f64,
    #[arg(long, default_value_t = 0.1)]
    damping_down: f64,
    #[arg(long, default_value_t = 1e-10)]
    convergence_tol: f64,
    #[arg(long, default_value_t = 8)]
    multistart: usize,
    /// Seed for multistart perturbations (falls back to RDALLOC_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Output surface file (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Optimal,
    Equal,
    Elements,
    Variance,
}

#[derive(clap::Args)]
struct AllocateArgs {
    /// Surface file (JSON) produced by `fit` or `synth`.
    #[arg(long)]
    surfaces: PathBuf,
    /// Total rate budget (Kbits).
    #[arg(long)]
    total_rate: f64,
    /// Comma-separated task weights; defaults to equal weights.
    #[arg(long)]
    weights: Option<String>,
    #[arg(long, value_enum, default_value_t = Method::Optimal)]
    method: Method,
    /// Per-stream element counts (needed by --method elements).
    #[arg(long)]
    element_counts: Option<String>,
    /// Per-stream element variances (needed by --method variance).
    #[arg(long)]
    element_variances: Option<String>,
    /// Write the allocation record here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ParetoArgs {
    #[arg(long)]
    surfaces: PathBuf,
    #[arg(long)]
    total_rate: f64,
    /// Number of weight-sweep samples.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Prefix for the plot-data tables (<prefix>_rates.csv,
    /// <prefix>_distortions.csv).
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(clap::Args)]
struct WeightsInverseArgs {
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long)]
    streams: usize,
    #[arg(long)]
    tasks: usize,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Noise half-width as a fraction of each task's distortion range.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Lower end of the target total-rate range (Kbits).
    #[arg(long)]
    rate_min: f64,
    /// Upper end of the target total-rate range (Kbits).
    #[arg(long)]
    rate_max: f64,
    /// Gamma range as "low,high".
    #[arg(long, default_value = "0,20")]
    gamma_range: String,
    /// Alpha range as "low,high".
    #[arg(long, default_value = "0.5,50")]
    alpha_range: String,
    /// Beta range as "low,high".
    #[arg(long, default_value = "0.005,0.1")]
    beta_range: String,
    /// Output samples CSV.
    #[arg(long)]
    out: PathBuf,
    /// Output ground-truth surface file; defaults to <out stem>_truth.json.
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Allocate(args) => cmd_allocate(args),
        Command::Pareto(args) => cmd_pareto(args),
        Command::WeightsInverse(args) => cmd_weights_inverse(args),
        Command::Synth(args) => cmd_synth(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("RDALLOC_SEED")
            .ok()
            .and_then(|s| s.parse().ok())
    })
    .unwrap_or(0)
}

fn parse_list(text: &str, what: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::validation(format!("malformed {what}: {p:?}")))
        })
        .collect()
}

fn parse_range(text: &str, what: &str) -> CliResult<ParamRange> {
    let values = parse_list(text, what)?;
    if values.len() != 2 {
        return Err(CliError::validation(format!(
            "{what} must be \"low,high\", got {text:?}"
        )));
    }
    Ok(ParamRange::new(values[0], values[1])?)
}

fn cmd_fit(args: FitArgs) -> CliResult<()> {
    let (samples, _, n_tasks) = read_samples(&args.samples)?;
    let working = if args.no_window {
        samples
    } else {
        window_samples_with(&samples, args.total_rate, args.window_low, args.window_high)?
    };
    if working.is_empty() {
        return Err(CliError::degenerate("no samples in window".to_string()));
    }

    let config = FitConfig {
        max_iterations: args.max_iterations,
        damping_init: args.damping_init,
        damping_up: args.damping_up,
        damping_down: args.damping_down,
        convergence_tol: args.convergence_tol,
        multistart_count: args.multistart,
        seed: resolve_seed(args.seed),
    };

    let mut records = Vec::with_capacity(n_tasks);
    let mut n_streams = 0;
    for task in 0..n_tasks {
        let report = fit_surface(&working, task, &config)?;
        if !report.converged {
            return Err(CliError::non_convergence(format!(
                "fit did not converge for task {task}"
            )));
        }
        println!(
            "task {task}: r_squared={} mean_residual={} iterations={} n_samples={}",
            report.r_squared, report.mean_residual, report.iterations, report.n_samples_used
        );
        n_streams = report.surface.n_streams();
        records.push(SurfaceRecord {
            gamma: report.surface.gamma(),
            alphas: report.surface.alphas().to_vec(),
            betas: report.surface.betas().to_vec(),
            r_squared: Some(report.r_squared),
            n_samples_used: Some(report.n_samples_used),
        });
    }

    let file = SurfaceFile {
        schema_version: SCHEMA_VERSION.to_string(),
        n_streams,
        n_tasks,
        surfaces: records,
    };
    write_json(&args.out, &file)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_allocate(args: AllocateArgs) -> CliResult<()> {
    let file = read_surface_file(&args.surfaces)?;
    let surfaces = file.to_surfaces()?;
    let k = surfaces.len();
    let n = surfaces[0].n_streams();

    let weights = match &args.weights {
        Some(text) => TaskWeights::new(parse_list(text, "weights")?)?,
        None => TaskWeights::uniform(k)?,
    };
    if weights.len() != k {
        return Err(CliError::validation(format!(
            "{} weights given for {k} tasks",
            weights.len()
        )));
    }
    let problem = AllocationProblem::new(surfaces, args.total_rate, Some(weights.clone()))?;
    let surfaces = problem.surfaces();

    let (method_name, rates, water_level, active_set) = match args.method {
        Method::Optimal => {
            let allocation = if k == 1 {
                waterfill_closed_form(&surfaces[0], args.total_rate)?
            } else {
                fit_first(surfaces, &weights, args.total_rate)?
            };
            (
                "optimal",
                allocation.rates,
                Some(allocation.water_level_log2),
                Some(allocation.active_set),
            )
        }
        Method::Equal => ("equal", baseline_equal(n, args.total_rate)?, None, None),
        Method::Elements => {
            let counts = args.element_counts.as_deref().ok_or_else(|| {
                CliError::validation(
                    "--method elements requires --element-counts".to_string(),
                )
            })?;
            let counts = parse_list(counts, "element counts")?;
            if counts.len() != n {
                return Err(CliError::validation(format!(
                    "{} element counts given for {n} streams",
                    counts.len()
                )));
            }
            (
                "elements",
                baseline_proportional(&counts, args.total_rate)?,
                None,
                None,
            )
        }
        Method::Variance => {
            let variances = args.element_variances.as_deref().ok_or_else(|| {
                CliError::validation(
                    "--method variance requires --element-variances".to_string(),
                )
            })?;
            let variances = parse_list(variances, "element variances")?;
            if variances.len() != n {
                return Err(CliError::validation(format!(
                    "{} element variances given for {n} streams",
                    variances.len()
                )));
            }
            (
                "variance",
                baseline_proportional(&variances, args.total_rate)?,
                None,
                None,
            )
        }
    };

    let per_task: Vec<f64> = surfaces
        .iter()
        .map(|s| evaluate_surface(s, &rates))
        .collect::<Result<_, _>>()?;
    let scalarized: f64 = per_task
        .iter()
        .zip(weights.weights())
        .map(|(d, w)| d * w)
        .sum();

    let record = AllocationRecord {
        schema_version: SCHEMA_VERSION.to_string(),
        method: method_name.to_string(),
        total_rate: args.total_rate,
        weights: weights.weights().to_vec(),
        rates: rates.rates().to_vec(),
        water_level_log2: water_level,
        active_set,
        per_task_distortions: per_task,
        scalarized_distortion: scalarized,
    };
    emit_record(&record, args.out.as_deref())
}

fn cmd_pareto(args: ParetoArgs) -> CliResult<()> {
    let file = read_surface_file(&args.surfaces)?;
    let surfaces = file.to_surfaces()?;
    let k = surfaces.len();
    let n = surfaces[0].n_streams();
    let seed = resolve_seed(args.seed);
    if args.samples == 0 {
        return Err(CliError::validation("--samples must be at least 1".to_string()));
    }

    let sweep = sample_pareto_by_weights(&surfaces, args.total_rate, args.samples, seed)?;

    let rate_headers: Vec<String> = (1..=n).map(|j| format!("R_{j}")).collect();
    let dist_headers: Vec<String> = (1..=k).map(|i| format!("D_{i}")).collect();
    let distortions_at = |r: &RateVector| -> CliResult<Vec<f64>> {
        surfaces
            .iter()
            .map(|s| evaluate_surface(s, r).map_err(CliError::from))
            .collect()
    };

    let mut rate_rows: Vec<(String, Vec<f64>)> = Vec::new();
    let mut dist_rows: Vec<(String, Vec<f64>)> = Vec::new();
    let mut segment_report = None;
    let mut bound_report = None;
    let mut note = None;
    let shape;

    if n == 2 {
        shape = "2xk".to_string();
        let segment = pareto_segment_2xk(&surfaces, args.total_rate)?;
        for (kind, point) in [
            ("endpoint_low", &segment.endpoint_low),
            ("endpoint_high", &segment.endpoint_high),
        ] {
            rate_rows.push((kind.to_string(), point.rates().to_vec()));
            dist_rows.push((kind.to_string(), distortions_at(point)?));
        }
        for m in &segment.per_task_minimizers {
            rate_rows.push(("minimizer".to_string(), m.rates().to_vec()));
            dist_rows.push(("minimizer".to_string(), distortions_at(m)?));
        }
        if segment.is_degenerate() {
            note = Some(
                "degenerate segment: all task minimizers coincide, both endpoints equal"
                    .to_string(),
            );
        }
        segment_report = Some(SegmentReport {
            endpoint_low: segment.endpoint_low.rates().to_vec(),
            endpoint_high: segment.endpoint_high.rates().to_vec(),
            per_task_minimizers: segment
                .per_task_minimizers
                .iter()
                .map(|m| m.rates().to_vec())
                .collect(),
            degenerate: segment.is_degenerate(),
        });
    } else if n == 3 && k == 2 {
        shape = "3x2".to_string();
        let rate_box = rate_extrema_3x2(&surfaces, args.total_rate)?;
        let bound = bound_polygon_3x2(&rate_box, args.total_rate)?;
        for v in &bound.polygon_vertices {
            rate_rows.push(("vertex".to_string(), v.rates().to_vec()));
            dist_rows.push(("vertex".to_string(), distortions_at(v)?));
        }
        bound_report = Some(BoundReport {
            rate_mins: rate_box.mins().to_vec(),
            rate_maxs: rate_box.maxs().to_vec(),
            polygon_vertex_count: bound.polygon_vertices.len(),
            polygon_vertices: bound
                .polygon_vertices
                .iter()
                .map(|v| v.rates().to_vec())
                .collect(),
        });
    } else {
        shape = "general".to_string();
        note = Some(format!(
            "no analytic characterization for a {n}-stream {k}-task system; emitting weight-sweep samples only"
        ));
    }

    for sample in &sweep {
        rate_rows.push(("sample".to_string(), sample.rates.rates().to_vec()));
        dist_rows.push(("sample".to_string(), sample.distortions.clone()));
    }

    let prefix = args.out_prefix.display();
    let rates_path = PathBuf::from(format!("{prefix}_rates.csv"));
    let dists_path = PathBuf::from(format!("{prefix}_distortions.csv"));
    write_plot_table(&rates_path, &rate_headers, &rate_rows)?;
    write_plot_table(&dists_path, &dist_headers, &dist_rows)?;

    let report = ParetoReport {
        schema_version: SCHEMA_VERSION.to_string(),
        shape,
        n_streams: n,
        n_tasks: k,
        total_rate: args.total_rate,
        n_samples: args.samples,
        seed,
        segment: segment_report,
        bound: bound_report,
        note,
        rates_table: rates_path.display().to_string(),
        distortions_table: dists_path.display().to_string(),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::validation(format!("serialization failed: {e}")))?
    );
    Ok(())
}

fn cmd_weights_inverse(args: WeightsInverseArgs) -> CliResult<()> {
    let (samples, _, n_tasks) = read_samples(&args.samples)?;
    let mut means = vec![0.0; n_tasks];
    for s in &samples {
        for (m, d) in means.iter_mut().zip(s.distortions()) {
            *m += d;
        }
    }
    for m in &mut means {
        *m /= samples.len() as f64;
    }
    if let Some(task) = means.iter().position(|&m| m == 0.0) {
        return Err(rdalloc_core::Error::ZeroMeanDistortion(task).into());
    }
    let inverse_sum: f64 = means.iter().map(|m| 1.0 / m).sum();
    let weights: Vec<f64> = means.iter().map(|m| (1.0 / m) / inverse_sum).collect();

    let record = WeightsRecord {
        schema_version: SCHEMA_VERSION.to_string(),
        mean_distortions: means,
        weights,
    };
    emit_record(&record, args.out.as_deref())
}

fn cmd_synth(args: SynthArgs) -> CliResult<()> {
    let spec = SynthSpec {
        n_streams: args.streams,
        n_tasks: args.tasks,
        gamma_range: parse_range(&args.gamma_range, "gamma range")?,
        alpha_range: parse_range(&args.alpha_range, "alpha range")?,
        beta_range: parse_range(&args.beta_range, "beta range")?,
        rate_range: ParamRange::new(args.rate_min, args.rate_max)?,
        n_samples: args.samples,
        noise_fraction: args.noise,
        seed: resolve_seed(args.seed),
    };
    let (surfaces, samples) = generate_system(&spec)?;
    write_samples(&args.out, &samples)?;

    let truth_path = args.truth_out.unwrap_or_else(|| default_truth_path(&args.out));
    write_json(&truth_path, &SurfaceFile::from_surfaces(&surfaces))?;
    println!("wrote {} and {}", args.out.display(), truth_path.display());
    Ok(())
}

fn default_truth_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "samples".to_string());
    out.with_file_name(format!("{stem}_truth.json"))
}

fn emit_record<T: serde::Serialize>(record: &T, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => write_json(path, record),
        None => {
            println!(
                "{}",
                serde_json::to_string_pretty(record)
                    .map_err(|e| CliError::validation(format!("serialization failed: {e}")))?
            );
            Ok(())
        }
    }
}
