use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use neural_fdiv::bounds::{estimation_constants, BoundInputs};
use neural_fdiv::divergences::ground_truth;
use neural_fdiv::experiments::{
    aggregate, fit_rate, read_records_csv, resume_experiment, run_experiment, write_records_csv,
    write_summary_with_plot, ExperimentConfig, Sweep,
};
use neural_fdiv::training::train;
use neural_fdiv::{rng, DivergenceKind, Error, NetworkClassSpec, ParamBounds, Result};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "neural-fdiv", version, about = "Neural estimation of f-divergences with bounded shallow networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train once and print the result (estimate, trajectory, checkpoint) as JSON.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        /// Sweep point to run.
        #[arg(long, default_value_t = 0)]
        point: usize,
        /// Replica whose derived seed is used.
        #[arg(long, default_value_t = 0)]
        replica: u64,
        /// Use this training seed directly instead of the replica seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an `ns` sweep and write per-run and summary CSVs.
    SweepN(SweepArgs),
    /// Run a `ks` sweep and write per-run and summary CSVs.
    SweepK(SweepArgs),
    /// Print the exact divergence of the configured pair as JSON.
    GroundTruth {
        #[arg(long)]
        config: PathBuf,
    },
    /// Tabulate the estimation-error constants over a grid of (k, n).
    Bounds(BoundsArgs),
}

#[derive(clap::Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Per-run CSV. The summary goes next to it as `<stem>_summary.csv` with a `.gp` plot script.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Keep successful rows already in `--out` and only run the rest.
    #[arg(long)]
    resume: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
}

#[derive(clap::Args)]
struct BoundsArgs {
    #[arg(long)]
    kind: DivergenceKind,
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Explicit class bounds; all of a1, a2, a3 must be given together.
    /// Without them the `0.5 ln k` star class at each k is used.
    #[arg(long, requires_all = ["a2", "a3"])]
    a1: Option<f64>,
    #[arg(long, requires_all = ["a1", "a3"])]
    a2: Option<f64>,
    #[arg(long, requires_all = ["a1", "a2"])]
    a3: Option<f64>,
    /// Output truncation level (squared Hellinger).
    #[arg(long)]
    t: Option<f64>,
    /// Universal constant of the tail bound.
    #[arg(long = "C", default_value_t = 1.0)]
    universal_c: f64,
    /// Deviation at which to report the tail probability.
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Serialize)]
struct BoundsRow {
    kind: DivergenceKind,
    k: usize,
    n: usize,
    a1: f64,
    a2: f64,
    a3: f64,
    t: Option<f64>,
    universal_c: f64,
    gamma_prime_sup: f64,
    r: f64,
    v: f64,
    e: f64,
    delta: f64,
    tail: f64,
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text)
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => fs::write(path, text + "\n").map_err(|source| Error::Io { path: path.to_path_buf(), source }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn estimate(config: &Path, point: usize, replica: u64, seed: Option<u64>, out: Option<&Path>) -> Result<ExitCode> {
    let cfg = load_config(config)?;
    let points = cfg.points()?;
    let p = points
        .get(point)
        .ok_or_else(|| Error::Config(format!("sweep has {} points, no point {point}", points.len())))?;
    let seed = seed.unwrap_or_else(|| rng::replica_seed(cfg.master_seed, replica));
    let tc = cfg.train_config(p, seed)?;
    let pair = cfg.pair.build()?;
    let result = train(&tc, &pair)?;
    write_json(&result.report(&tc), out)?;
    Ok(ExitCode::SUCCESS)
}

fn sweep(args: &SweepArgs, want_ks: bool) -> Result<ExitCode> {
    let cfg = load_config(&args.config)?;
    match (&cfg.sweep, want_ks) {
        (Sweep::Ns(_), false) | (Sweep::Ks { .. }, true) => {}
        (Sweep::Ns(_), true) => return Err(Error::Config("sweep-k needs a \"ks\" sweep in the config".into())),
        (Sweep::Ks { .. }, false) => return Err(Error::Config("sweep-n needs an \"ns\" sweep in the config".into())),
    }
    let records = if args.resume && args.out.exists() {
        let previous = read_records_csv(&args.out)?;
        resume_experiment(&cfg, args.threads, &previous)?
    } else {
        run_experiment(&cfg, args.threads)?
    };
    write_records_csv(&records, &args.out)?;
    let summaries = aggregate(&records);
    let stem = args.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "runs".into());
    let summary_path = args.out.with_file_name(format!("{stem}_summary.csv"));
    write_summary_with_plot(&summaries, &summary_path, if want_ks { "k" } else { "n" })?;

    for s in &summaries {
        eprintln!(
            "n = {:>8}  k = {:>4}  mean = {:.6}  sd = {:.6}  mean |err| = {:.6}  (truth {:.6}, {} ok, {} failed)",
            s.n, s.k, s.mean_estimate, s.std_estimate, s.mean_abs_error, s.ground_truth, s.replicas, s.failed
        );
    }
    if !want_ks {
        match fit_rate(&summaries) {
            Ok(fit) => {
                eprintln!("rate fit: slope {:.4}, R^2 {:.4} over {} points", fit.slope, fit.r_squared, fit.points_used)
            }
            Err(e) => eprintln!("rate fit skipped: {e}"),
        }
    }
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        eprintln!("{failed} of {} runs failed; see error_msg in {}", records.len(), args.out.display());
        return Ok(ExitCode::from(EXIT_RUNTIME));
    }
    Ok(ExitCode::SUCCESS)
}

fn bounds_table(args: &BoundsArgs) -> Result<ExitCode> {
    let mut rows = Vec::new();
    for &k in &args.k {
        let class_bounds = match (args.a1, args.a2, args.a3) {
            (Some(a1), Some(a2), Some(a3)) => ParamBounds::new(a1, a2, a3, args.t)?,
            _ => {
                let spec = match (args.kind, args.t) {
                    (DivergenceKind::SqHellinger, None) => NetworkClassSpec::half_log_truncated_star(k),
                    (_, Some(t)) => NetworkClassSpec::TruncatedStar { m: 0.5 * (k as f64).ln(), t },
                    (_, None) => NetworkClassSpec::half_log_star(k),
                };
                spec.expand(k)?
            }
        };
        for &n in &args.n {
            let mut inputs = BoundInputs::new(args.kind, k, class_bounds, n);
            inputs.universal_c = args.universal_c;
            let rep = estimation_constants(&inputs)?;
            rows.push(BoundsRow {
                kind: args.kind,
                k,
                n,
                a1: class_bounds.a1,
                a2: class_bounds.a2,
                a3: class_bounds.a3,
                t: class_bounds.trunc,
                universal_c: args.universal_c,
                gamma_prime_sup: rep.gamma_prime_sup,
                r: rep.r,
                v: rep.v,
                e: rep.e,
                delta: args.delta,
                tail: rep.tail(args.delta),
            });
        }
    }
    match args.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            for row in &rows {
                w.serialize(row).map_err(|source| Error::Csv { path: "<stdout>".into(), source })?;
            }
            w.flush().map_err(|source| Error::Io { path: "<stdout>".into(), source })?;
        }
        Format::Table => {
            println!(
                "{:>6} {:>9} {:>10} {:>10} {:>10} {:>12} {:>12} {:>12} {:>12} {:>10}",
                "k", "n", "a1", "a2", "a3", "gamma'_sup", "R", "V", "E", "tail"
            );
            for r in &rows {
                println!(
                    "{:>6} {:>9} {:>10.4} {:>10.4} {:>10.4} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>10.3e}",
                    r.k, r.n, r.a1, r.a2, r.a3, r.gamma_prime_sup, r.r, r.v, r.e, r.tail
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Estimate { config, point, replica, seed, out } => {
            estimate(&config, point, replica, seed, out.as_deref())
        }
        Command::SweepN(args) => sweep(&args, false),
        Command::SweepK(args) => sweep(&args, true),
        Command::GroundTruth { config } => {
            let cfg = load_config(&config)?;
            write_json(&ground_truth(cfg.kind, &cfg.pair.build()?)?, None)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bounds(args) => bounds_table(&args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_RUNTIME })
        }
    }
}
