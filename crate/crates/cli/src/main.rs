//! `pscdn` command-line experiment runner.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clap::error::ErrorKind;

use pscdn::channel::{generate_dataset, to_batch};
use pscdn::experiment::{run_experiment, ExperimentError};
use pscdn::io::{load_dataset, load_weights, save_dataset, ExperimentConfig, Preset};
use pscdn::model::{NetworkSpec, Variant, DEFAULT_BITS, DEFAULT_FILTERS};
use pscdn::train::evaluate;

#[derive(Parser)]
#[command(name = "pscdn", version, about = "Phase-shift feedback compression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random quantized-phase dataset file.
    GenerateData {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = DEFAULT_BITS)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model and evaluate it over the SNR grid.
    Train(Overrides),
    /// Evaluate a weights file on a dataset.
    Eval {
        #[arg(long)]
        weights: PathBuf,
        /// Dataset file; generated from --seed when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        snr_db: f64,
    },
    /// Variants a-f at each code size: the NMSE grid.
    Ablation(Overrides),
    /// PSCDN over code sizes and SNRs.
    Sweep(Overrides),
    /// Trainable parameter count of a network.
    CountParams {
        #[arg(long, default_value = "pscdn")]
        model: Variant,
        #[arg(long, default_value_t = DEFAULT_BITS)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        c: usize,
        #[arg(long, default_value_t = DEFAULT_FILTERS)]
        n: usize,
    },
    /// Parameter count and median inference time of PSCDN.
    Time(Overrides),
    /// Run whatever preset the config names.
    Run(Overrides),
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training (and single-run evaluation) SNR in dB.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<f64>,
    /// Compression ratio as `C/K` (e.g. `2/9`) or the code size `C`.
    #[arg(long)]
    cr: Option<String>,
    #[arg(long)]
    model: Option<Variant>,
    #[arg(long)]
    epochs: Option<usize>,
}

fn fail(code: i32, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code as u8)
}

impl Overrides {
    fn config(&self, preset: Option<Preset>) -> Result<ExperimentConfig, ExperimentError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Io {
                    context: format!("reading {}", path.display()),
                    source: e.into(),
                })?;
                ExperimentConfig::parse(&text)?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(p) = preset {
            cfg.preset = p;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(snr) = self.snr_db {
            cfg.train.channel.snr_db = snr;
        }
        if let Some(model) = self.model {
            cfg.model = model;
        }
        if let Some(epochs) = self.epochs {
            cfg.train.epochs = epochs;
        }
        if let Some(cr) = &self.cr {
            let c = parse_cr(cr, cfg.k).map_err(ExperimentError::Config)?;
            cfg.c = c;
            cfg.code_sizes = vec![c];
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_cr(text: &str, k: usize) -> Result<usize, String> {
    let bad = || format!("--cr expects C/{k} or C, got {text:?}");
    match text.split_once('/') {
        Some((c, denom)) => {
            if denom.trim().parse::<usize>().map_err(|_| bad())? != k {
                return Err(format!("--cr denominator must equal k = {k}"));
            }
            c.trim().parse().map_err(|_| bad())
        }
        None => text.trim().parse().map_err(|_| bad()),
    }
}

fn run_preset(overrides: &Overrides, preset: Option<Preset>) -> ExitCode {
    let cfg = match overrides.config(preset) {
        Ok(cfg) => cfg,
        Err(e) => return fail(e.exit_code(), e),
    };
    match run_experiment(&cfg) {
        Ok(report) => {
            for line in &report.summary {
                println!("{line}");
            }
            for f in &report.files {
                log::info!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.exit_code(), e),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match cli.command {
        Command::GenerateData { count, k, seed, out } => {
            let samples = match generate_dataset(count, k, seed) {
                Ok(s) => s,
                Err(e) => return fail(1, e),
            };
            match save_dataset(&samples, &out) {
                Ok(()) => {
                    println!("wrote {count} samples of {k} bits to {}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(3, e),
            }
        }
        Command::Eval { weights, data, count, seed, snr_db } => {
            let (params, spec) = match load_weights(&weights) {
                Ok(w) => w,
                Err(e) => return fail(3, format!("{}: {e}", weights.display())),
            };
            let samples = match &data {
                Some(path) => match load_dataset(path) {
                    Ok(s) => s,
                    Err(e) => return fail(3, format!("{}: {e}", path.display())),
                },
                None => match generate_dataset(count, spec.k, seed) {
                    Ok(s) => s,
                    Err(e) => return fail(1, e),
                },
            };
            let batch = match to_batch::<f32>(&samples) {
                Ok(b) if b.length() == spec.k => b,
                Ok(_) => return fail(1, format!("dataset bit width differs from k = {}", spec.k)),
                Err(e) => return fail(1, e),
            };
            let mut cfg = ExperimentConfig::default();
            cfg.train.channel.snr_db = snr_db;
            match evaluate(&spec, &params, &batch, &cfg.train.channel, seed) {
                Ok(e) => {
                    println!(
                        "{} K={} C={}: NMSE {} ({:.3} dB), BER {}, phase NMSE {}",
                        spec.variant, spec.k, spec.c, e.nmse_linear, e.nmse_db, e.bit_error_rate, e.phase_nmse
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(2, e),
            }
        }
        Command::CountParams { model, k, c, n } => match NetworkSpec::build(model, k, n, c) {
            Ok(spec) => {
                println!("{}", spec.count_parameters());
                ExitCode::SUCCESS
            }
            Err(e) => fail(1, e),
        },
        Command::Train(o) => run_preset(&o, Some(Preset::Single)),
        Command::Ablation(o) => run_preset(&o, Some(Preset::Table1)),
        Command::Sweep(o) => run_preset(&o, Some(Preset::Fig3Pscdn)),
        Command::Time(o) => run_preset(&o, Some(Preset::Table2Pscdn)),
        Command::Run(o) => run_preset(&o, None),
    }
}
