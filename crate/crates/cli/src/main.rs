use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use dlcz_cli::commands::{self, FitModel, Format, Report, SweepArgs};
use dlcz_cli::config::SimMode;
use dlcz_cli::output::{json, write_atomic, RunManifest};
use dlcz_cli::{CliError, RunConfig};

/// Rates, Monte Carlo and fits for multiplexed DLCZ repeater links.
#[derive(Debug, Parser)]
#[command(name = "dlcz", version)]
struct Cli {
    /// TOML configuration; every table is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured root seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory receiving result files and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Overrides `[sim] trials` and `[experiment] trains`.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Rendering of the result printed on standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads for Monte Carlo batches (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form end-to-end rate of the chain.
    Rate,
    /// Monte Carlo of the chain, or of one elementary link.
    Simulate {
        #[arg(long, value_enum)]
        mode: Option<SimModeArg>,
    },
    /// Simulated concurrence, visibility and efficiency measurements.
    LinkExperiment,
    /// Fits a model to `x,y[,weight]` samples.
    Fit {
        csv: PathBuf,
        #[arg(long, value_enum)]
        model: FitModel,
    },
    /// Rate along one chain parameter.
    Sweep {
        #[arg(long)]
        param: String,
        #[arg(long)]
        min: f64,
        #[arg(long)]
        max: f64,
        #[arg(long)]
        steps: Option<usize>,
        /// Keep `l0_km · 2^n_levels` fixed and scan the nesting depth.
        #[arg(long)]
        fixed_total_km: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum SimModeArg {
    Chain,
    ElementaryLink,
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Command::Simulate { mode: Some(mode) } = cli.command {
        cfg.sim.get_or_insert_with(Default::default).mode = match mode {
            SimModeArg::Chain => SimMode::Chain,
            SimModeArg::ElementaryLink => SimMode::ElementaryLink,
        };
    }
    if let Some(trials) = cli.trials {
        if trials == 0 {
            return Err(CliError::Domain("--trials must be at least 1".into()));
        }
        match cli.command {
            Command::Simulate { .. } => cfg.sim.get_or_insert_with(Default::default).trials = trials,
            Command::LinkExperiment => cfg.experiment.get_or_insert_with(Default::default).trains = trials,
            _ => {}
        }
    }
    Ok(cfg)
}

fn execute(cli: &Cli, cfg: &RunConfig) -> Result<Report, CliError> {
    match &cli.command {
        Command::Rate => commands::rate(cfg, cli.format),
        Command::Simulate { .. } => commands::simulate(cfg, cli.format),
        Command::LinkExperiment => commands::link_experiment(cfg, cli.format),
        Command::Fit { csv, model } => commands::fit(csv, *model, cli.format),
        Command::Sweep { param, min, max, steps, fixed_total_km } => {
            let args = SweepArgs {
                param: param.clone(),
                min: *min,
                max: *max,
                steps: *steps,
                fixed_total_km: *fixed_total_km,
            };
            commands::sweep_rate(cfg, &args, cli.format)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let started = SystemTime::now();
    let clock = Instant::now();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    let cfg = resolve(cli)?;
    let report = execute(cli, &cfg)?;

    let mut outputs = Vec::new();
    for (name, contents) in &report.files {
        write_atomic(&cli.out_dir, name, contents.as_bytes())?;
        outputs.push(name.clone());
    }
    let manifest = RunManifest {
        command: report.command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        parameters: serde_json::to_value(cfg.resolved()).expect("configuration serializes"),
        outputs,
        started_unix_s: started.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64()),
        wall_clock_s: clock.elapsed().as_secs_f64(),
    };
    let manifest_name = format!("{}.manifest.json", report.command);
    write_atomic(&cli.out_dir, &manifest_name, json(&manifest).as_bytes())?;

    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", report.stdout);
    match report.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
