//! `frameless`: analysis, simulation, optimization and bounds for frameless
//! ALOHA with cooperating base stations.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use frameless_core::analysis::Mode;

use commands::Context;
use config::{
    AnalysisSection, BoundDegrees, BoundsSection, CompareSection, ExperimentConfig, OptimizerSection, SchemeKind,
    SimulationSection,
};
use error::{CliError, CliResult};
use output::{Format, Sink};

#[derive(Debug, Parser)]
#[command(name = "frameless", version, about, max_term_width = 100)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Experiment configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in network: sym1..sym4, two-bs-a..two-bs-g, delta2.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    workers: usize,
    /// Smaller optimizer population, fewer trials.
    #[arg(long, global = true)]
    fast: bool,
    /// Permit exact cooperative analysis with more than 7 groups.
    #[arg(long, global = true)]
    allow_long_running: bool,
    /// Write every table and the JSON summary into this directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Stdout format when no output directory is given.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Export the per-iteration density-evolution trace.
    #[arg(long, global = true)]
    trace: bool,
    /// Full network on M base stations (replaces any configured network).
    #[arg(long = "M", global = true, value_name = "M")]
    num_bs: Option<usize>,
    /// Users per group of the full network.
    #[arg(long, global = true, value_name = "N")]
    users: Option<u64>,
    /// Target degree per group, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    degrees: Option<Vec<f64>>,
    /// Target degree per tie class (or coverage class), comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    class_degrees: Option<Vec<f64>>,
    /// coop, noncoop or bound.
    #[arg(long, global = true)]
    mode: Option<Mode>,
    /// Retrieval threshold.
    #[arg(long, global = true)]
    alpha: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Density-evolution curve and peak throughput.
    Analyze {
        /// Frame lengths `lo:hi[:step]` instead of the peak search.
        #[arg(long, value_name = "LO:HI[:STEP]")]
        t_range: Option<String>,
    },
    /// Monte Carlo frames.
    Simulate {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_enum)]
        scheme: Option<SchemeKind>,
        /// Frame length of the fixed-length schemes.
        #[arg(long)]
        slots: Option<u64>,
        /// Normalized loads to sweep, comma separated.
        #[arg(long, value_delimiter = ',')]
        loads: Option<Vec<f64>>,
        /// Repetition masses of the spatio-temporal scheme, comma separated.
        #[arg(long, value_delimiter = ',')]
        repetition: Option<Vec<f64>>,
    },
    /// Differential-evolution search for the best target degrees.
    Optimize {
        #[arg(long)]
        population: Option<usize>,
        #[arg(long)]
        generations: Option<usize>,
    },
    /// Gain bounds against the number of base stations.
    Bounds {
        /// Base-station counts, comma separated.
        #[arg(long, value_delimiter = ',')]
        m_list: Option<Vec<usize>>,
        /// Degrees used for the lower bound.
        #[arg(long, value_enum)]
        bound_degrees: Option<BoundDegrees>,
    },
    /// Frameless transmission against a fixed-length baseline.
    Compare {
        #[arg(long, value_delimiter = ',')]
        loads: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_enum)]
        baseline: Option<SchemeKind>,
        #[arg(long, value_delimiter = ',')]
        repetition: Option<Vec<f64>>,
    },
    /// Scaled-down reproduction suite.
    Repro,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Analyze { .. } => "analyze",
            Command::Simulate { .. } => "simulate",
            Command::Optimize { .. } => "optimize",
            Command::Bounds { .. } => "bounds",
            Command::Compare { .. } => "compare",
            Command::Repro => "repro",
        }
    }
}

fn parse_range(text: &str) -> CliResult<(u64, u64, Option<u64>)> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| {
        s.trim()
            .parse::<u64>()
            .map_err(|_| CliError::Config(format!("bad frame-length range {text:?}")))
    };
    match parts.as_slice() {
        [lo, hi] => Ok((num(lo)?, num(hi)?, None)),
        [lo, hi, step] => Ok((num(lo)?, num(hi)?, Some(num(step)?))),
        _ => Err(CliError::Config(format!("bad frame-length range {text:?}"))),
    }
}

/// Flags as a config layer over the file and preset.
fn overrides(g: &GlobalArgs, command: &Command) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig {
        num_bs: g.num_bs,
        users_per_group: g.users,
        degrees: g.degrees.clone(),
        class_degrees: g.class_degrees.clone(),
        mode: g.mode,
        alpha: g.alpha,
        seed: g.seed,
        ..Default::default()
    };
    match command {
        Command::Analyze { t_range: Some(r) } => {
            let (lo, hi, step) = parse_range(r)?;
            cfg.analysis = AnalysisSection {
                t_min: Some(lo),
                t_max: Some(hi),
                t_step: step,
                ..Default::default()
            };
        }
        Command::Analyze { t_range: None } | Command::Repro => {}
        Command::Simulate {
            trials,
            scheme,
            slots,
            loads,
            repetition,
        } => {
            cfg.simulation = SimulationSection {
                trials: *trials,
                scheme: *scheme,
                slots: *slots,
                loads: loads.clone(),
                repetition: repetition.clone(),
                slot_cap: None,
            };
        }
        Command::Optimize {
            population,
            generations,
        } => {
            cfg.optimizer = OptimizerSection {
                population: *population,
                generations: *generations,
                ..Default::default()
            };
        }
        Command::Bounds {
            m_list,
            bound_degrees,
        } => {
            cfg.bounds = BoundsSection {
                m_list: m_list.clone(),
                users_per_group: g.users,
                lower_degrees: *bound_degrees,
            };
            // The bounds sweep builds its own networks.
            cfg.num_bs = None;
            cfg.users_per_group = None;
        }
        Command::Compare {
            loads,
            trials,
            baseline,
            repetition,
        } => {
            cfg.compare = CompareSection {
                loads: loads.clone(),
                trials: *trials,
                repetition: repetition.clone(),
                baseline: *baseline,
            };
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    let g = &cli.global;
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &g.config {
        cfg = ExperimentConfig::load(path)?;
    }
    if let Some(name) = g.preset.as_deref().or(cfg.preset.clone().as_deref()) {
        let preset = ExperimentConfig::preset(name)?;
        // Config-file fields refine the preset.
        cfg = if g.preset.is_some() { cfg.merge(preset) } else { preset.merge(cfg) };
    }
    let cfg = cfg.merge(overrides(g, &cli.command)?);
    let seed = cfg.seed.unwrap_or(1);
    let cfg = ExperimentConfig { seed: Some(seed), ..cfg };
    let ctx = Context {
        cfg,
        seed,
        workers: g.workers,
        fast: g.fast,
        allow_long_running: g.allow_long_running,
        trace: g.trace,
        sink: Sink {
            out: g.out.clone(),
            format: g.format,
        },
    };
    let needs_network = !matches!(cli.command, Command::Bounds { .. } | Command::Repro);
    if needs_network && !ctx.cfg.has_topology() {
        return Err(CliError::Config(format!(
            "{} needs a network; use --config, --preset or --M",
            cli.command.name()
        )));
    }
    match cli.command {
        Command::Analyze { .. } => commands::analyze::run(&ctx),
        Command::Simulate { .. } => commands::simulate::run(&ctx),
        Command::Optimize { .. } => commands::optimize::run(&ctx),
        Command::Bounds { .. } => commands::bounds::run(&ctx),
        Command::Compare { .. } => commands::compare::run(&ctx),
        Command::Repro => commands::repro::run(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("frameless: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
