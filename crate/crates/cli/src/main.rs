//! `shapesig` command-line front end.

mod commands;
mod config;
mod dataset;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shapesig::ErrorKind;

use crate::commands::{Ranges, Suite};
use crate::config::{ConfigArgs, MethodArg, RunConfig};

/// Bad flags or configuration values (exit status 1).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Unusable input data (exit status 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct DataError(pub String);

#[derive(Parser)]
#[command(name = "shapesig", version, about = "Intrinsic shape descriptors and correspondence evaluation")]
struct Cli {
    /// TOML run configuration; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More logging (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a descriptor field for the `--reference` mesh.
    Signature {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Adopt the sampling of this reference descriptor (for target shapes).
        #[arg(long)]
        reference_descriptor: Option<PathBuf>,
        /// Binary descriptor output.
        #[arg(long)]
        out: PathBuf,
        /// Also write the field as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Match a target shape to a reference shape and score the assignment.
    Match {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Precomputed reference descriptor instead of computing it.
        #[arg(long)]
        reference_descriptor: Option<PathBuf>,
        /// Precomputed target descriptor instead of computing it.
        #[arg(long)]
        target_descriptor: Option<PathBuf>,
    },
    /// Soft correspondence map and its sparsification sweep.
    Softmap {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Also write the map sparsified to this density (percent).
        #[arg(long)]
        density: Option<f64>,
        /// Count a hit when any entry within this normalised geodesic radius survives.
        #[arg(long)]
        geodesic_radius: Option<f64>,
    },
    /// Parameter sweeps over every pair of a dataset directory.
    Benchmark {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum)]
        suite: Suite,
        /// Directory of `<class><k>` meshes.
        #[arg(long)]
        dataset: PathBuf,
        /// Methods to compare (default: the configured method).
        #[arg(long, value_enum, value_delimiter = ',')]
        methods: Vec<MethodArg>,
        /// Mode counts (Krylov dimensions for ksmor) of a modes sweep.
        #[arg(long, value_delimiter = ',', default_values_t = [5, 10, 50, 100, 300])]
        sweep_modes: Vec<usize>,
        /// CG tolerances of a solver sweep.
        #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 1e-4, 1e-6, 1e-8])]
        sweep_eps: Vec<f64>,
        /// CG iteration caps of a solver sweep.
        #[arg(long, value_delimiter = ',', default_values_t = [10, 100, 1000])]
        sweep_max_iters: Vec<usize>,
        /// Largest soft map (reference x target entries) built for minimum densities.
        #[arg(long, default_value_t = 100_000_000)]
        max_softmap_entries: usize,
        /// Leave the wall-time column empty, making reruns byte-identical.
        #[arg(long)]
        no_timings: bool,
        /// Aggregate CSV (default: <out-dir>/benchmark.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve(file: Option<&PathBuf>, threads: Option<usize>, flags: ConfigArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match file {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    flags.apply(&mut cfg);
    if threads.is_some() {
        cfg.threads = threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_threads(n: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = n {
        if n == 0 {
            return Err(UsageError("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = cli.config.as_ref();
    match cli.command {
        Command::Signature { cfg, reference_descriptor, out, csv } => {
            let cfg = resolve(file, cli.threads, cfg)?;
            init_threads(cfg.threads)?;
            commands::signature(&cfg, reference_descriptor.as_deref(), &out, csv.as_deref())
        }
        Command::Match { cfg, reference_descriptor, target_descriptor } => {
            let cfg = resolve(file, cli.threads, cfg)?;
            init_threads(cfg.threads)?;
            commands::match_shapes(&cfg, [reference_descriptor.as_deref(), target_descriptor.as_deref()])
        }
        Command::Softmap { cfg, density, geodesic_radius } => {
            let cfg = resolve(file, cli.threads, cfg)?;
            init_threads(cfg.threads)?;
            commands::softmap(&cfg, density, geodesic_radius)
        }
        Command::Benchmark {
            cfg,
            suite,
            dataset,
            methods,
            sweep_modes,
            sweep_eps,
            sweep_max_iters,
            max_softmap_entries,
            no_timings,
            out,
        } => {
            let cfg = resolve(file, cli.threads, cfg)?;
            init_threads(cfg.threads)?;
            let ranges = Ranges {
                methods: if methods.is_empty() { vec![cfg.method] } else { methods },
                modes: sweep_modes,
                eps: sweep_eps,
                max_iters: sweep_max_iters,
                max_softmap_entries,
                timings: !no_timings,
            };
            let out = out.unwrap_or_else(|| commands::default_output(cfg.out_dir.as_deref(), "benchmark.csv"));
            commands::benchmark(&cfg, suite, &dataset, &ranges, &out)
        }
    }
}

fn exit_status(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if cause.is::<DataError>() || cause.is::<std::io::Error>() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<shapesig::Error>() {
            return match err.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numerical => 3,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_status(&e))
        }
    }
}
