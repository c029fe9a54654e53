use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use lpd_cli::config::ExperimentConfig;
use lpd_cli::instance::{build_instance, to_custom};
use lpd_cli::plot::emit_plot_script;
use lpd_cli::{exit, run_experiment, sweep_kappa, validate_config};

#[derive(Parser)]
#[command(
    name = "lpd",
    version,
    about = "Run lifted primal-dual experiments from a JSON config"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured instance as an inline custom-instance JSON.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also save the transition samples of a policy-evaluation instance.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Run every configured algorithm and write traces plus a manifest.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        emit_plot_script: bool,
    },
    /// Rate constants over the configured spectrum ratios.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
        #[arg(long)]
        emit_plot_script: bool,
    },
    /// Check the config and, if given, the schedule witness.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

enum Failure {
    Invalid(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn load(path: &Path, out_dir: Option<PathBuf>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(path).map_err(|e| Failure::Invalid(format!("{e:#}")))?;
    if let Some(d) = out_dir {
        cfg.out_dir = d;
    }
    Ok(cfg)
}

fn checked(path: &Path, out_dir: Option<PathBuf>) -> Result<ExperimentConfig, Failure> {
    let cfg = load(path, out_dir)?;
    let report = validate_config(&cfg);
    if !report.ok() {
        return Err(Failure::Invalid(report.errors.join("\n")));
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load(&config, None)?;
            let report = validate_config(&cfg);
            for n in &report.notes {
                println!("note: {n}");
            }
            if report.ok() {
                println!("config is valid");
                Ok(exit::OK)
            } else {
                Err(Failure::Invalid(report.errors.join("\n")))
            }
        }
        Command::Generate {
            config,
            out,
            trace_out,
        } => {
            let cfg = load(&config, None)?;
            let built = build_instance(&cfg.instance)
                .map_err(|e| Failure::Invalid(format!("instance: {e:#}")))?;
            let inst = to_custom(&built.problem)?;
            let text = serde_json::to_string_pretty(&inst).context("serializing instance")?;
            std::fs::write(&out, text + "\n")
                .with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {}", out.display());
            if let Some(t) = trace_out {
                let trace = built.trace.ok_or_else(|| {
                    Failure::Invalid("--trace-out needs a policy_eval instance".into())
                })?;
                trace
                    .save(&t)
                    .with_context(|| format!("writing {}", t.display()))?;
                println!("wrote {}", t.display());
            }
            Ok(exit::OK)
        }
        Command::Solve {
            config,
            out_dir,
            emit_plot_script: plot,
        } => {
            let cfg = checked(&config, out_dir)?;
            let rep = run_experiment(&cfg)?;
            for r in &rep.runs {
                println!(
                    "{:<14} {:<9} iterations {:>8}  final gap {}  {}",
                    r.algorithm,
                    format!("{:?}", r.status).to_lowercase(),
                    r.iterations,
                    r.final_gap.map_or("-".into(), |g| format!("{g:.3e}")),
                    r.file.as_deref().or(r.error.as_deref()).unwrap_or_default()
                );
            }
            println!("manifest {}", rep.manifest.display());
            if plot {
                println!("plot script {}", emit_plot_script(&rep.out_dir)?.display());
            }
            Ok(if rep.all_diverged() {
                exit::ALL_DIVERGED
            } else if rep.runs.iter().all(|r| r.file.is_none()) {
                exit::FAILURE
            } else {
                exit::OK
            })
        }
        Command::Sweep {
            config,
            out_dir,
            jobs,
            emit_plot_script: plot,
        } => {
            let cfg = checked(&config, out_dir)?;
            if cfg.sweep.is_none() {
                return Err(Failure::Invalid(
                    "sweep: config has no sweep section".into(),
                ));
            }
            let out = sweep_kappa(&cfg, jobs)?;
            for (alg, fit) in &out.fits {
                match fit {
                    Ok(f) => println!("{alg:<14} slope {:.3}  r^2 {:.4}", f.slope, f.r_squared),
                    Err(e) => println!("{alg:<14} slope NA ({e})"),
                }
            }
            println!("summary {}", out.summary.display());
            if plot {
                println!("plot script {}", emit_plot_script(&cfg.out_dir)?.display());
            }
            Ok(exit::OK)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Invalid(msg)) => {
            eprintln!("invalid config:\n{msg}");
            ExitCode::from(exit::INVALID)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::FAILURE)
        }
    }
}
