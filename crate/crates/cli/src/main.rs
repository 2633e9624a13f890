use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use lindblad_core::generator::LearnedModel;
use lindblad_core::parallel;
use lindblad_core::pipeline::{self, ExperimentConfig, Layout, ModelKind};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "lindblad-learn", version, about = "Learn Lindblad generators for reduced spin-chain dynamics")]
struct Cli {
    /// JSON experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides both the simulation and the training seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Reference {
    /// Traceless subsystem Hamiltonian of the configured chain.
    Config,
    None,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate training and evaluation trajectories.
    GenData,
    /// Fit a generator to the training trajectories.
    Train,
    /// Interpolation and extrapolation errors of a learned model.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Grid scan over the two configured axes.
    Scan,
    /// Stationary state, spectral gap and long-time error.
    Stationary {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Learned Hamiltonian, Kossakowski matrix and jump operators.
    Interpret {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Reference::Config)]
        reference: Reference,
    },
}

fn load_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg = cfg.with_seed(s);
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> anyhow::Result<serde_json::Value> {
    if cli.threads > 0 {
        parallel::set_num_threads(cli.threads);
    }
    let cfg = load_config(cli)?;
    let layout = Layout::new(&cli.out, &cfg.paths);
    let model_path = |m: &Option<PathBuf>| m.clone().unwrap_or_else(|| layout.model_file());
    Ok(match &cli.command {
        Command::GenData => {
            let m = pipeline::gen_data(&cfg, &layout)?;
            json!({
                "command": "gen-data",
                "manifest": layout.manifest_file(),
                "trajectories": m.train.len() + m.eval.len(),
                "snapshots": m.n_steps + 1,
            })
        }
        Command::Train => {
            let t = pipeline::train_model(&cfg, &layout)?;
            json!({"command": "train", "model": t.model_path, "final_train_loss": t.final_train_loss})
        }
        Command::Eval { model } => {
            let e = pipeline::evaluate(&cfg, &layout, &model_path(model), true)?;
            json!({"command": "eval", "result": e})
        }
        Command::Scan => {
            let s = pipeline::scan(&cfg, &cli.out)?;
            let failed = s.cells.iter().filter(|c| c.status != "ok").count();
            json!({"command": "scan", "cells": s.cells.len(), "failed": failed, "csv": layout.reports.join("scan.csv")})
        }
        Command::Stationary { model } => {
            let r = pipeline::stationary_analysis(&cfg, &layout, &model_path(model))?;
            json!({"command": "stationary", "status": r.status, "tau": r.tau, "epsilon": r.epsilon, "window": r.window})
        }
        Command::Interpret { model, reference } => {
            let path = model_path(model);
            let m = LearnedModel::load(&path)?;
            let h_ref = match reference {
                Reference::Config if cfg.model.variant != ModelKind::Synthetic && m.d == 4 => {
                    Some(pipeline::reference_hamiltonian(&cfg.model).context("building the reference Hamiltonian")?)
                }
                _ => None,
            };
            let r = pipeline::interpret(&m, h_ref.as_ref())?;
            pipeline::write_interpret_report(&r, &layout.reports)?;
            json!({
                "command": "interpret",
                "delta_zz_fraction": r.delta_zz_fraction,
                "dominant_zz_overlap2": r.dominant_zz_overlap2,
                "report": layout.reports.join("interpret.json"),
            })
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let kind = e.downcast_ref::<lindblad_core::Error>().map_or("error", |e| e.kind());
            eprintln!("{}", json!({"error": kind, "message": format!("{e:#}")}));
            ExitCode::from(2)
        }
    }
}
