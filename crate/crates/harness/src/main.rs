use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use banddet::detector::{load_detector, save_detector, NeuralDetector};
use banddet_harness::checks::{gradcheck_suite, oracle_check};
use banddet_harness::suite::{run_suite, SuiteOptions};
use banddet_harness::{
    evaluate_ber, train, ChannelChoice, DetectorKind, EvalConfig, HarnessError, NamedDetector, Scenario, StopRule,
    TrainingConfig,
};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "banddet", version, about = "Train and evaluate detectors for banded channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a detector and write its checkpoint and loss trace.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Measure BER of a checkpoint and the linear baselines on shared frames.
    Eval {
        /// Channel settings are taken from this config.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Frame length; defaults to k_train of the config.
        #[arg(long)]
        size: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "5,7,9,11,13")]
        snrs: Vec<f64>,
        /// Comma-separated baselines: lmmse, ls, map, local-lmmse, local-ls.
        #[arg(long, value_delimiter = ',')]
        baselines: Option<Vec<String>>,
        #[arg(long, default_value_t = 10_000_000)]
        max_bits: u64,
        #[arg(long, default_value_t = 200)]
        max_errors: u64,
        #[arg(long, default_value_t = 0)]
        min_bits: u64,
    },
    /// Reproduce one figure: train-free evaluation of stored checkpoints.
    Suite {
        name: String,
        /// Directory holding the trained checkpoints.
        #[arg(long, default_value = "out")]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Directory holding the training configs.
        #[arg(long, default_value = "configs")]
        config: PathBuf,
    },
    /// Compare analytic and finite-difference gradients on random networks.
    Gradcheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Compare the banded solvers and convolutions against dense oracles.
    OracleCheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn write_file(path: &Path, f: impl FnOnce(BufWriter<File>) -> Result<(), HarnessError>) -> Result<(), HarnessError> {
    f(BufWriter::new(File::create(path)?))
}

fn run_train(config: &Path, seed: Option<u64>, out_dir: &Path) -> Result<(), HarnessError> {
    let mut cfg = TrainingConfig::load(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    fs::create_dir_all(out_dir)?;
    let outcome = train(&cfg)?;
    let ckpt = out_dir.join(format!("{}.bdcd", cfg.name));
    write_file(&ckpt, |w| Ok(save_detector(w, &outcome.detector)?))?;
    write_file(&out_dir.join(format!("{}_loss.csv", cfg.name)), |w| outcome.write_trace(w))?;
    fs::write(out_dir.join(format!("{}_config.toml", cfg.name)), cfg.to_toml())?;
    println!(
        "{}: {} steps in {:.0} s, validation loss {:.5} -> {:.5} ({:?}); wrote {}",
        cfg.name,
        outcome.steps,
        outcome.seconds,
        outcome.initial_validation_loss,
        outcome.best_validation_loss,
        outcome.stop,
        ckpt.display()
    );
    Ok(())
}

fn baseline(name: &str) -> Result<NamedDetector, HarnessError> {
    let kind = match name {
        "lmmse" => DetectorKind::Lmmse,
        "ls" => DetectorKind::Ls,
        "map" => DetectorKind::Map,
        "local-lmmse" => DetectorKind::LocalLmmse,
        "local-ls" => DetectorKind::LocalLs,
        other => return Err(HarnessError::Config(format!("unknown baseline {other:?}"))),
    };
    Ok(NamedDetector::new(name, kind))
}

fn load_checkpoint(path: &Path) -> Result<NeuralDetector<f64>, HarnessError> {
    let file = File::open(path).map_err(|e| HarnessError::Config(format!("cannot open {}: {e}", path.display())))?;
    Ok(load_detector(std::io::BufReader::new(file))?)
}

#[allow(clippy::too_many_arguments)]
fn run_eval(
    config: &Path,
    checkpoints: &[PathBuf],
    seed: u64,
    out_dir: &Path,
    size: Option<usize>,
    snrs: Vec<f64>,
    baselines: Option<Vec<String>>,
    stop: StopRule,
) -> Result<(), HarnessError> {
    let cfg = TrainingConfig::load(config)?;
    let mut scenario = Scenario::from_config(&cfg);
    if let Some(k) = size {
        scenario.size = k;
    }
    let mut detectors = Vec::new();
    for path in checkpoints {
        let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        detectors.push(NamedDetector::neural(label, &load_checkpoint(path)?));
    }
    let names = baselines.unwrap_or_else(|| {
        let list: &[&str] =
            if cfg.channel == ChannelChoice::Tdmr { &["local-lmmse", "local-ls"] } else { &["lmmse", "ls"] };
        list.iter().map(|s| s.to_string()).collect()
    });
    for name in &names {
        detectors.push(baseline(name)?);
    }
    let eval = EvalConfig { stop, ..EvalConfig::new(scenario, snrs, seed) };
    let report = evaluate_ber(&detectors, &eval)?;
    fs::create_dir_all(out_dir)?;
    write_file(&out_dir.join("ber.csv"), |w| report.write_csv(w))?;
    write_file(&out_dir.join("frames.csv"), |w| report.write_frame_log(w))?;
    for r in &report.rows {
        println!(
            "{:>14} {:>6} dB  ber {:.4e}  [{:.4e}, {:.4e}]  {} bits  {:.1} s",
            r.detector, r.snr_db, r.ber, r.ci_lo, r.ci_hi, r.bits, r.seconds
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Train { config, seed, out_dir } => run_train(&config, seed, &out_dir),
        Command::Eval { config, checkpoint, seed, out_dir, size, snrs, baselines, max_bits, max_errors, min_bits } => {
            let stop = StopRule { max_bits, max_errors, min_bits };
            run_eval(&config, &checkpoint, seed, &out_dir, size, snrs, baselines, stop)
        }
        Command::Suite { name, checkpoint, seed, out_dir, config } => {
            let opts = SuiteOptions { seed, ..SuiteOptions::new(checkpoint, config, out_dir) };
            let dir = run_suite(&name, &opts)?;
            println!("wrote {}", dir.display());
            Ok(())
        }
        Command::Gradcheck { seed } => {
            let reports = gradcheck_suite(seed)?;
            for (name, r) in &reports {
                println!("{name:>24}: max relative error {:.3e} over {} parameters", r.max_rel_error, r.checked);
            }
            match reports.iter().find(|(_, r)| !r.passed()) {
                Some((name, r)) => Err(HarnessError::CheckFailed(format!("{name}: {:?}", r.worst))),
                None => Ok(()),
            }
        }
        Command::OracleCheck { seed } => {
            let summary = oracle_check(seed, 100)?;
            println!("{summary}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    banddet_harness::tune_allocator();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
