use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pathslice_cli::config::ExperimentConfig;
use pathslice_cli::defaults;
use pathslice_cli::runners;

#[derive(Parser)]
#[command(
    name = "pathslice",
    about = "Time-slicing approximations of semiclassical propagators: convergence, boundedness, residual and phase-space experiments"
)]
struct Cli {
    /// JSON experiment configuration (each subcommand has a built-in default)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSV + summary.json
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed echoed into reports (the pipelines are deterministic)
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mesh/hbar convergence orders of E^(N)(Omega, t, s) vs the reference propagator
    Converge,
    /// Uniform-in-hbar boundedness ratios of U(t, s)
    Bounded,
    /// Residual operator scaling and the Duhamel identity
    Residual,
    /// Gabor-matrix decay of slice operators along the classical flow
    Gabor,
    /// Quarter-period sharpness probes (translation/dilation families)
    Sharpness,
    /// Sample the classical flow map on a phase-space grid
    FlowDump {
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        #[arg(long, default_value_t = 4.0)]
        radius: f64,
        #[arg(long, default_value_t = 9)]
        count: usize,
    },
    /// Tabulate the generating function S(t, s, x, y) with Hessian blocks
    TableDump {
        #[arg(long, default_value_t = 0.3)]
        tau: f64,
        #[arg(long, default_value_t = 6.0)]
        radius: f64,
        #[arg(long, default_value_t = 49)]
        count: usize,
    },
}

fn load_config(cli: &Cli, fallback: ExperimentConfig) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
        None => fallback,
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = Some(out.display().to_string());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    match &cli.command {
        Command::Converge => {
            let cfg = load_config(cli, defaults::converge_default())?;
            let report = runners::run_convergence(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.pass)
        }
        Command::Bounded => {
            let cfg = load_config(cli, defaults::boundedness_acceptance())?;
            let report = runners::run_boundedness(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.pass)
        }
        Command::Residual => {
            let cfg = load_config(cli, defaults::residual_default("harmonic+cos"))?;
            let report = runners::run_residual_scaling(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.pass)
        }
        Command::Gabor => {
            let cfg = load_config(cli, defaults::gabor_acceptance())?;
            let report = runners::run_gabor_report(&cfg)?;
            // the sample CSV can be large; keep stdout to the summary
            let mut summary = serde_json::to_value(&report)?;
            if let Some(obj) = summary.as_object_mut() {
                obj.remove("samples_csv");
            }
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(report.pass)
        }
        Command::Sharpness => {
            let cfg = load_config(cli, defaults::sharpness_acceptance())?;
            let report = runners::run_sharpness_probe(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.pass)
        }
        Command::FlowDump { tau, radius, count } => {
            let cfg = load_config(cli, defaults::converge_default())?;
            let pot = cfg.potential.build()?;
            let csv = runners::flow_dump_csv(&pot, 0.0, *tau, *radius, *count)?;
            emit(&cfg, "flow_dump.csv", &csv)?;
            Ok(true)
        }
        Command::TableDump { tau, radius, count } => {
            let cfg = load_config(cli, defaults::converge_default())?;
            let pot = cfg.potential.build()?;
            let axis = pathslice::generating::Axis::uniform(-radius, *radius, *count)?;
            let table = pathslice::generating::generating_table(
                &pot,
                0.0,
                *tau,
                &axis,
                &axis,
                &cfg.table_opts(),
            )?;
            emit(&cfg, "table_dump.csv", &table.to_csv())?;
            Ok(true)
        }
    }
}

fn emit(cfg: &ExperimentConfig, name: &str, content: &str) -> anyhow::Result<()> {
    match &cfg.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(PathBuf::from(dir).join(name), content)?;
            println!("wrote {dir}/{name}");
        }
        None => print!("{content}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more configured PASS criteria failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
