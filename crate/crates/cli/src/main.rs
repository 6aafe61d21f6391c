//! `lobyitfl`: run experiments, communication sweeps and comparison tables.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lobyitfl::flsim::report::{comm_report, compare};
use lobyitfl::flsim::{run_training, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "lobyitfl",
    version,
    about = "Secure Byzantine-resilient federated learning simulator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train once and write metrics.csv, summary.json and transcripts.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Parent directory of the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One secure round per client count; fits log-log byte slopes.
    CommReport {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        sweep_n: Vec<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every scenario config in a directory under each listed aggregator;
    /// prints accuracy mean ± std with attacks as rows.
    Compare {
        config_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides each config's `repeats`.
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, String> {
    let mut cfg = ExperimentConfig::load(path).map_err(|e| e.to_string())?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.cmd {
        Cmd::Run { config, seed, out } => {
            let cfg = load(&config, seed)?;
            let out = out.or_else(|| cfg.out.clone()).unwrap_or_else(|| "runs".into());
            let r = run_training(&cfg, Some(&out)).map_err(|e| e.to_string())?;
            println!("{}", serde_json::to_string_pretty(&r.summary).expect("json"));
            if let Some(dir) = &r.dir {
                eprintln!("artifacts in {}", dir.display());
            }
            if r.summary.aborted_rounds == r.summary.iterations {
                eprintln!("every round aborted");
                return Ok(ExitCode::from(3));
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::CommReport {
            config,
            sweep_n,
            seed,
            out,
        } => {
            let cfg = load(&config, seed)?;
            let rep = comm_report(&cfg, &sweep_n).map_err(|e| e.to_string())?;
            print!("{}", rep.to_csv());
            println!("client slope {:.3}", rep.client_slope);
            println!("federator slope {:.3}", rep.federator_slope);
            if let Some(out) = out {
                write(&out.join("comm.csv"), &rep.to_csv())?;
                write(
                    &out.join("comm.json"),
                    &serde_json::to_string_pretty(&rep).expect("json"),
                )?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Compare {
            config_dir,
            seed,
            repeats,
            out,
        } => {
            let mut paths: Vec<PathBuf> = fs::read_dir(&config_dir)
                .map_err(|e| format!("{}: {e}", config_dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "toml"))
                .collect();
            paths.sort();
            if paths.is_empty() {
                return Err(format!("no .toml configs in {}", config_dir.display()));
            }
            let mut cfgs = Vec::new();
            for p in &paths {
                let mut c = load(p, seed)?;
                if let Some(r) = repeats {
                    c.repeats = r.max(1);
                }
                cfgs.push(c);
            }
            let table = compare(&cfgs, out.as_deref()).map_err(|e| e.to_string())?;
            print!("{}", table.render());
            if let Some(out) = out {
                write(&out.join("compare.csv"), &table.to_csv())?;
                write(&out.join("compare.md"), &table.render())?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
