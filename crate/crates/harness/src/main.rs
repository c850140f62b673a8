use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use h2ad_core::fusion::FusionMethod;
use h2ad_harness::complexity::loglog_slope;
use h2ad_harness::config::{ExperimentConfig, Profile};
use h2ad_harness::{bound, complexity, doa, exit_code, number, training, Error, Result};

#[derive(Parser)]
#[command(name = "h2ad", version, about = "Monte Carlo experiments for hybrid analog-digital arrays")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// key = value file with [section] headers, applied over the profile
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSV files (and models, unless [run] models is set)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Monte Carlo trials per sweep point
    #[arg(long, global = true)]
    trials: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = ProfileArg::Paper)]
    profile: ProfileArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Smoke,
    Paper,
}

#[derive(Subcommand)]
enum Command {
    /// Source-count accuracy against SNR for EDC and the trained networks
    NumberSensing,
    /// Direction-finding accuracy and RMSE against SNR for the three fusers
    Doa,
    /// Fuser run time and operation count against array size
    Complexity,
    /// Generate the labelled dataset and train the counting networks
    Train,
    /// Bound against SNR and snapshot count, and the orthogonality table
    CrlbSweep,
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let profile = match cli.profile {
        ProfileArg::Smoke => Profile::Smoke,
        ProfileArg::Paper => Profile::Paper,
    };
    let mut cfg = ExperimentConfig::load(profile, cli.config.as_deref())?;
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load(cli)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    match cli.command {
        Command::NumberSensing => {
            let rep = number::run_number_sensing(&cfg)?;
            for r in &rep.rows {
                println!("{:>6.1} dB  {:<5} accuracy {:.3}  failures {}", r.snr_db, r.estimator, r.accuracy, r.failures);
            }
            println!("wrote {}", rep.summary_csv.display());
        }
        Command::Doa => {
            let rep = doa::run_doa(&cfg)?;
            for r in &rep.rows {
                println!(
                    "{:>6.1} dB  {:<5} {:>5.1} deg  accuracy {:.3}  rmse {:.4}  bound {:.4}",
                    r.snr_db, r.estimator, r.angle_deg, r.accuracy, r.rmse_all_deg, r.crlb_deg
                );
            }
            println!("wrote {}", rep.summary_csv.display());
        }
        Command::Complexity => {
            let rep = complexity::run_complexity(&cfg)?;
            for r in &rep.rows {
                println!(
                    "{:>5} antennas  {:<5} ops {:>12.0}  {:>10.0} ns",
                    r.antennas,
                    r.method.tag(),
                    r.op_count,
                    r.ns_per_trial
                );
            }
            let omc: Vec<(f64, f64)> = rep
                .rows_for(FusionMethod::Omc)
                .iter()
                .map(|r| (r.candidates, r.op_count))
                .collect();
            if omc.len() > 1 {
                println!("omc op-count slope against candidates: {:.3}", loglog_slope(&omc));
            }
            println!("wrote {}", rep.csv.display());
        }
        Command::Train => {
            let out = training::run_training(&cfg)?;
            for (kind, rep, path) in &out.models {
                println!(
                    "{:<5} validation accuracy {:.3} (epoch {})  -> {}",
                    kind.tag(),
                    rep.val_accuracy,
                    rep.best_epoch,
                    path.display()
                );
            }
            println!("wrote {}", out.loss_csv.display());
        }
        Command::CrlbSweep => {
            let rep = bound::run_crlb_sweep(&cfg)?;
            println!("wrote {} and {}", rep.csv.display(), rep.orthogonality_csv.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Numeric(_) = e {
                eprintln!("hint: check the SNR range and training learning rates");
            }
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
