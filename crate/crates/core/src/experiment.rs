//! Config-driven experiment runner producing weights, CSVs and a manifest.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::channel::{generate_dataset, to_batch, PhaseSample};
use crate::io::{
    load_dataset, load_weights, metrics_csv, save_weights, ConfigError, CsvTable, ExperimentConfig, FormatError,
    Preset,
};
use crate::model::{init_parameters, NetworkSpec, ParameterStore, Variant};
use crate::train::{evaluate, time_inference, Evaluation, TrainError, Trainer};
use crate::Batch;

/// Offsets added to the experiment seed for generated datasets.
const TRAIN_DATA_OFFSET: u64 = 1_000;
const VAL_DATA_OFFSET: u64 = 2_000;
const TEST_DATA_OFFSET: u64 = 3_000;
/// Seed offset for the test-time channel noise.
const TEST_NOISE_OFFSET: u64 = 4_000;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("training diverged ({context}): {source}")]
    Diverged { context: String, source: TrainError },
    #[error("{context}: {source}")]
    Io { context: String, source: FormatError },
}

impl ExperimentError {
    /// Process exit code: 1 configuration, 2 divergence, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 1,
            ExperimentError::Diverged { .. } => 2,
            ExperimentError::Io { .. } => 3,
        }
    }
}

impl From<ConfigError> for ExperimentError {
    fn from(e: ConfigError) -> Self {
        ExperimentError::Config(e.to_string())
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(FormatError) -> ExperimentError {
    let context = context.into();
    move |source| ExperimentError::Io { context, source }
}

fn train_err(context: &str, e: TrainError) -> ExperimentError {
    match e {
        TrainError::Diverged { .. } | TrainError::NonFiniteGradient { .. } => {
            ExperimentError::Diverged { context: context.to_string(), source: e }
        }
        other => ExperimentError::Config(format!("{context}: {other}")),
    }
}

/// Artifacts written by one experiment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub files: Vec<PathBuf>,
    /// Human-readable result lines.
    pub summary: Vec<String>,
}

struct Datasets {
    train: Batch<f32>,
    val: Batch<f32>,
    test: Batch<f32>,
}

fn dataset(cfg: &ExperimentConfig, file: &Option<PathBuf>, count: usize, offset: u64) -> Result<Batch<f32>, ExperimentError> {
    let samples: Vec<PhaseSample> = match file {
        Some(path) => load_dataset(path).map_err(io_err(format!("reading {}", path.display())))?,
        None => generate_dataset(count, cfg.k, cfg.seed.wrapping_add(offset))
            .map_err(|e| ExperimentError::Config(e.to_string()))?,
    };
    if samples.iter().any(|s| s.bits_len() != cfg.k) {
        return Err(ExperimentError::Config(format!("dataset bit width differs from k = {}", cfg.k)));
    }
    to_batch(&samples).map_err(|e| ExperimentError::Config(e.to_string()))
}

fn datasets(cfg: &ExperimentConfig) -> Result<Datasets, ExperimentError> {
    Ok(Datasets {
        train: dataset(cfg, &cfg.train_data, cfg.train_size, TRAIN_DATA_OFFSET)?,
        val: dataset(cfg, &cfg.val_data, cfg.val_size, VAL_DATA_OFFSET)?,
        test: dataset(cfg, &cfg.test_data, cfg.test_size, TEST_DATA_OFFSET)?,
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    out: PathBuf,
    report: ExperimentReport,
}

impl Runner<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.out.join(name);
        self.report.files.push(p.clone());
        p
    }

    /// Trains one model, writing `metrics_<tag>.csv` and `weights_<tag>.pscd`.
    /// Metrics gathered before a divergence are still written.
    fn train_model(
        &mut self,
        spec: &NetworkSpec,
        run: usize,
        tag: &str,
        data: &Datasets,
    ) -> Result<ParameterStore<f32>, ExperimentError> {
        let tcfg = self.cfg.train_config(run);
        log::info!("training {tag}: {} (seed {}, {} epochs)", spec.variant, tcfg.seed, tcfg.epochs);
        let params = init_parameters(spec, tcfg.seed);
        let mut trainer = Trainer::new(spec, params, &tcfg).map_err(|e| train_err(tag, e))?;
        let mut outcome = Ok(());
        for _ in 0..tcfg.epochs {
            if let Err(e) = trainer.run_epoch(&data.train, &data.val) {
                outcome = Err(train_err(tag, e));
                break;
            }
        }
        // Written even when training stopped early; header only if no
        // epoch completed.
        let path = self.path(&format!("metrics_{tag}.csv"));
        fs::write(&path, metrics_csv(trainer.records()))
            .map_err(|e| io_err(format!("writing {}", path.display()))(FormatError::from(e)))?;
        outcome?;
        let (params, _) = trainer.into_parts();
        let path = self.path(&format!("weights_{tag}.pscd"));
        save_weights(&params, spec, &path).map_err(io_err(format!("writing {}", path.display())))?;
        Ok(params)
    }

    fn evaluate_at(
        &self,
        spec: &NetworkSpec,
        params: &ParameterStore<f32>,
        data: &Batch<f32>,
        snr_db: f64,
    ) -> Result<Evaluation, ExperimentError> {
        let seed = self.cfg.seed.wrapping_add(TEST_NOISE_OFFSET);
        evaluate(spec, params, data, &self.cfg.channel_at(snr_db), seed).map_err(|e| train_err("evaluation", e))
    }

    fn write_table(&mut self, name: &str, table: &CsvTable) -> Result<(), ExperimentError> {
        let path = self.path(name);
        table.write(&path).map_err(io_err(format!("writing {}", path.display())))
    }

    fn single(&mut self) -> Result<(), ExperimentError> {
        let spec = self.cfg.network_spec()?;
        let data = datasets(self.cfg)?;
        let params = match &self.cfg.weights {
            Some(path) => {
                let (params, stored) = load_weights(path).map_err(io_err(format!("reading {}", path.display())))?;
                if stored != spec {
                    return Err(ExperimentError::Config(format!(
                        "weights describe {} (k={}, c={}, n={}), config asks for {} (k={}, c={}, n={})",
                        stored.variant, stored.k, stored.c, stored.n, spec.variant, spec.k, spec.c, spec.n
                    )));
                }
                params
            }
            None => self.train_model(&spec, 0, spec.variant.name(), &data)?,
        };
        let mut table = CsvTable::new(["snr_db", "nmse_linear", "nmse_db", "ber", "phase_nmse"]);
        for &snr in &self.cfg.snr_grid {
            let e = self.evaluate_at(&spec, &params, &data.test, snr)?;
            self.report.summary.push(format!("{} at {snr} dB: NMSE {:.5} ({:.2} dB)", spec.variant, e.nmse_linear, e.nmse_db));
            table.push([snr, e.nmse_linear, e.nmse_db, e.bit_error_rate, e.phase_nmse]);
        }
        self.write_table("eval.csv", &table)
    }

    fn table1(&mut self) -> Result<(), ExperimentError> {
        let data = datasets(self.cfg)?;
        let sizes = self.cfg.code_sizes.clone();
        let mut header = vec!["model".to_string()];
        header.extend(sizes.iter().map(|c| format!("cr={c}/{}", self.cfg.k)));
        let mut table = CsvTable::new(header);
        for variant in Variant::PSCN {
            let mut row = vec![variant.name().to_string()];
            for &c in &sizes {
                let spec = NetworkSpec::build(variant, self.cfg.k, self.cfg.n, c)
                    .map_err(|e| ExperimentError::Config(e.to_string()))?;
                let mut nmse = Vec::with_capacity(self.cfg.runs);
                for run in 0..self.cfg.runs {
                    let params = self.train_model(&spec, run, &format!("{}_c{c}_r{run}", variant.name()), &data)?;
                    nmse.push(self.evaluate_at(&spec, &params, &data.test, self.cfg.train.channel.snr_db)?.nmse_linear);
                }
                let m = median(&mut nmse);
                self.report.summary.push(format!("{variant} CR {c}/{}: median NMSE {m:.5}", self.cfg.k));
                row.push(m.to_string());
            }
            table.push(row);
        }
        self.write_table("table1.csv", &table)
    }

    fn fig3(&mut self) -> Result<(), ExperimentError> {
        let data = datasets(self.cfg)?;
        let mut table = CsvTable::new(["c", "cr", "snr_db", "nmse_linear", "nmse_db", "ber"]);
        for c in self.cfg.code_sizes.clone() {
            let spec = NetworkSpec::pscdn(self.cfg.k, self.cfg.n, c).map_err(|e| ExperimentError::Config(e.to_string()))?;
            let mut models = Vec::with_capacity(self.cfg.runs);
            for run in 0..self.cfg.runs {
                models.push(self.train_model(&spec, run, &format!("pscdn_c{c}_r{run}"), &data)?);
            }
            for &snr in &self.cfg.snr_grid {
                let mut nmse = Vec::new();
                let mut ber = Vec::new();
                for params in &models {
                    let e = self.evaluate_at(&spec, params, &data.test, snr)?;
                    nmse.push(e.nmse_linear);
                    ber.push(e.bit_error_rate);
                }
                let (m, b) = (median(&mut nmse), median(&mut ber));
                self.report.summary.push(format!("PSCDN CR {c}/{} at {snr} dB: median NMSE {m:.5}", self.cfg.k));
                table.push([
                    c.to_string(),
                    spec.compression_ratio().to_string(),
                    snr.to_string(),
                    m.to_string(),
                    (10.0 * m.log10()).to_string(),
                    b.to_string(),
                ]);
            }
        }
        self.write_table("fig3.csv", &table)
    }

    fn table2(&mut self) -> Result<(), ExperimentError> {
        let spec = NetworkSpec::pscdn(self.cfg.k, self.cfg.n, self.cfg.c).map_err(|e| ExperimentError::Config(e.to_string()))?;
        let params = match &self.cfg.weights {
            Some(path) => load_weights(path).map_err(io_err(format!("reading {}", path.display())))?.0,
            None => init_parameters(&spec, self.cfg.seed),
        };
        let test = dataset(self.cfg, &self.cfg.test_data, self.cfg.test_size, TEST_DATA_OFFSET)?;
        let timing = time_inference(&spec, &params, &test, self.cfg.timing_repetitions)
            .map_err(|e| train_err("timing", e))?;
        let count = spec.count_parameters();
        self.report.summary.push(format!(
            "PSCDN K={} C={} N={}: {count} parameters, median inference {:.4} s over {} samples",
            spec.k, spec.c, spec.n, timing.median_seconds, test.len()
        ));
        let mut table = CsvTable::new(["model", "k", "c", "n", "parameters", "median_running_time_s", "samples"]);
        table.push([
            "pscdn".to_string(),
            spec.k.to_string(),
            spec.c.to_string(),
            spec.n.to_string(),
            count.to_string(),
            timing.median_seconds.to_string(),
            test.len().to_string(),
        ]);
        self.write_table("table2.csv", &table)
    }

    fn manifest(&mut self) -> Result<(), ExperimentError> {
        let cfg = self.cfg;
        let mut text = format!(
            "# run manifest, pscdn-core {}\n# data seeds: train {}, val {}, test {}; test noise seed {}\n# training seeds: {}\n",
            env!("CARGO_PKG_VERSION"),
            cfg.seed.wrapping_add(TRAIN_DATA_OFFSET),
            cfg.seed.wrapping_add(VAL_DATA_OFFSET),
            cfg.seed.wrapping_add(TEST_DATA_OFFSET),
            cfg.seed.wrapping_add(TEST_NOISE_OFFSET),
            (0..cfg.runs).map(|r| cfg.train_config(r).seed.to_string()).collect::<Vec<_>>().join(","),
        );
        text.push_str(&cfg.to_text());
        let path = self.path("manifest.txt");
        fs::write(&path, text).map_err(|e| ExperimentError::Io {
            context: format!("writing {}", path.display()),
            source: e.into(),
        })
    }
}

/// Runs the experiment described by `cfg`, writing artifacts to its output
/// directory. The manifest is written first and is itself a valid config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| ExperimentError::Io {
        context: format!("creating {}", cfg.output_dir.display()),
        source: e.into(),
    })?;
    let mut runner = Runner { cfg, out: cfg.output_dir.clone(), report: ExperimentReport::default() };
    runner.manifest()?;
    match cfg.preset {
        Preset::Single => runner.single()?,
        Preset::Table1 => runner.table1()?,
        Preset::Fig3Pscdn => runner.fig3()?,
        Preset::Table2Pscdn => runner.table2()?,
    }
    Ok(runner.report)
}

/// Reads a config file and runs it.
pub fn run_experiment_file(path: &Path) -> Result<ExperimentReport, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|e| ExperimentError::Io {
        context: format!("reading {}", path.display()),
        source: e.into(),
    })?;
    run_experiment(&ExperimentConfig::parse(&text)?)
}
