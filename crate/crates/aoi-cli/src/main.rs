use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aoi_cli::config::{parse_kv_lines, Command, RunConfig, ThetaArg};
use aoi_cli::run;
use aoi_core::error::AoiError;

/// Optimal preemption (cutoff) and waiting (threshold) policies for
/// minimizing age of information, with a Monte Carlo simulator.
#[derive(Parser)]
#[command(name = "aoi", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonArgs {
    /// Distribution token: exp:rate=R | sexp:rate=R,c=C | det:c=C
    #[arg(long)]
    dist: Option<String>,
    /// Read defaults from a flat key=value config file; flags override it.
    #[arg(long)]
    config: Option<String>,
    /// Output format: csv | json
    #[arg(long)]
    format: Option<String>,
    /// Write the main output to this file instead of stdout.
    #[arg(long)]
    output: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the optimal waiting threshold for one cutoff.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// Cutoff gamma (accepts `inf` for no preemption).
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Sweep the cutoff (or, with --c-sweep, the shift c) and report the optimum.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        gamma_min: Option<f64>,
        #[arg(long)]
        gamma_max: Option<f64>,
        #[arg(long)]
        grid_points: Option<usize>,
        /// Sweep the shift c of the (shifted) exponential instead of gamma.
        #[arg(long)]
        c_sweep: bool,
        #[arg(long)]
        c_min: Option<f64>,
        #[arg(long)]
        c_max: Option<f64>,
        #[arg(long)]
        c_points: Option<usize>,
    },
    /// Benchmark the optimal policy against its cutoff/waiting ablations.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Also scan the two contested benchmarks over a grid of shifts.
        #[arg(long)]
        crossover: bool,
        #[arg(long)]
        c_min: Option<f64>,
        #[arg(long)]
        c_max: Option<f64>,
        #[arg(long)]
        c_points: Option<usize>,
    },
    /// Monte Carlo simulation of a policy; `--check` compares against the solver.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Cutoff gamma (accepts `inf` for no preemption).
        #[arg(long)]
        gamma: Option<f64>,
        /// Waiting threshold: `auto` (solve for it) or a number.
        #[arg(long)]
        theta: Option<String>,
        #[arg(long)]
        epochs: Option<u64>,
        /// RNG seed; defaults to the AOI_SEED environment variable, then 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        warmup: Option<u64>,
        /// Also solve analytically and report the gap in stderr units.
        #[arg(long)]
        check: bool,
        /// Write a sawtooth sample path (time,age CSV) to this file.
        #[arg(long)]
        trajectory: Option<String>,
    },
}

/// Assemble the run config: config-file values first, then flags on top.
fn build_config(cli: Cli) -> Result<RunConfig, AoiError> {
    let (command, common) = match &cli.cmd {
        Cmd::Solve { common, .. } => (Command::Solve, common),
        Cmd::Sweep { common, .. } => (Command::Sweep, common),
        Cmd::Compare { common, .. } => (Command::Compare, common),
        Cmd::Simulate { common, .. } => (Command::Simulate, common),
    };

    let mut cfg = RunConfig::new(command, "");
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path)
            .map_err(|e| AoiError::Config(format!("cannot read config file {path}: {e}")))?;
        let pairs = parse_kv_lines(&text)?;
        cfg.apply_kv(&pairs)?;
        // The subcommand on the command line wins over the file's `command`.
        cfg.command = command;
    }
    if let Some(d) = &common.dist {
        cfg.dist = d.clone();
    }
    if cfg.dist.is_empty() {
        return Err(AoiError::Config("missing --dist (or `dist` in the config file)".into()));
    }
    if let Some(f) = &common.format {
        cfg.format = f.parse()?;
    }
    if let Some(o) = &common.output {
        cfg.output = Some(o.clone());
    }

    match cli.cmd {
        Cmd::Solve { gamma, .. } => {
            if gamma.is_some() {
                cfg.gamma = gamma;
            }
        }
        Cmd::Sweep {
            gamma_min,
            gamma_max,
            grid_points,
            c_sweep,
            c_min,
            c_max,
            c_points,
            ..
        } => {
            cfg.gamma_min = gamma_min.or(cfg.gamma_min);
            cfg.gamma_max = gamma_max.or(cfg.gamma_max);
            cfg.grid_points = grid_points.or(cfg.grid_points);
            cfg.c_sweep |= c_sweep;
            cfg.c_min = c_min.or(cfg.c_min);
            cfg.c_max = c_max.or(cfg.c_max);
            cfg.c_points = c_points.or(cfg.c_points);
        }
        Cmd::Compare {
            crossover,
            c_min,
            c_max,
            c_points,
            ..
        } => {
            cfg.crossover |= crossover;
            cfg.c_min = c_min.or(cfg.c_min);
            cfg.c_max = c_max.or(cfg.c_max);
            cfg.c_points = c_points.or(cfg.c_points);
        }
        Cmd::Simulate {
            gamma,
            theta,
            epochs,
            seed,
            warmup,
            check,
            trajectory,
            ..
        } => {
            cfg.gamma = gamma.or(cfg.gamma);
            if let Some(t) = theta {
                cfg.theta = Some(t.parse::<ThetaArg>()?);
            }
            cfg.epochs = epochs.or(cfg.epochs);
            cfg.seed = seed.or(cfg.seed);
            cfg.warmup = warmup.or(cfg.warmup);
            cfg.check |= check;
            cfg.trajectory = trajectory.or(cfg.trajectory);
        }
    }

    if cfg.seed.is_none() {
        if let Ok(v) = std::env::var("AOI_SEED") {
            let seed = v.parse::<u64>().map_err(|_| {
                AoiError::Config(format!("AOI_SEED must be a nonnegative integer, got `{v}`"))
            })?;
            cfg.seed = Some(seed);
        }
    }
    Ok(cfg)
}

fn exit_code_for(err: &AoiError) -> u8 {
    match err {
        AoiError::Config(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run::execute(&cfg) {
        Ok(out) => {
            let rendered = out.rendered(cfg.format);
            match &cfg.output {
                Some(path) => {
                    if let Err(e) = fs::write(path, rendered) {
                        eprintln!("error: cannot write output file {path}: {e}");
                        return ExitCode::from(2);
                    }
                }
                None => print!("{rendered}"),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
