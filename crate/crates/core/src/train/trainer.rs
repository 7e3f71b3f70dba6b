//! Channel-in-the-loop training and evaluation.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{awgn_channel, bits_to_index, hard_decision, ChannelConfig};
use crate::model::{encode, decode, Mode, NetworkSpec, ParameterStore, Pass};
use crate::scalar::Scalar;
use crate::tensor::Batch;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::loss::{mse_loss, mse_loss_grad, to_db};
use super::schedule::lr_schedule;
use super::TrainError;

/// Samples per forward pass during evaluation.
const EVAL_CHUNK: usize = 1000;

// ChaCha stream ids, so shuffling, training noise and validation noise
// never share a keystream.
const STREAM_SHUFFLE: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_VALIDATION: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub decay_rate: f64,
    pub decay_steps: u64,
    /// Feedback channel used during training and validation.
    pub channel: ChannelConfig,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            batch_size: 200,
            lr0: 1e-3,
            decay_rate: 0.99,
            decay_steps: 1000,
            channel: ChannelConfig::new(10.0),
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, spec: &NetworkSpec) -> Result<(), TrainError> {
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return Err(TrainError::Config(format!("decay rate {} outside (0, 1]", self.decay_rate)));
        }
        if self.decay_steps == 0 {
            return Err(TrainError::Config("decay_steps must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch size must be positive".into()));
        }
        if spec.uses_batch_norm() && self.batch_size < 2 {
            return Err(TrainError::Config("batch normalization needs batch size >= 2".into()));
        }
        if !(self.lr0 > 0.0) || !self.lr0.is_finite() {
            return Err(TrainError::Config(format!("initial learning rate {} must be positive", self.lr0)));
        }
        Ok(())
    }
}

/// One row of the metrics stream.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_nmse_linear: f64,
    pub val_nmse_db: f64,
    pub bit_error_rate: f64,
    pub lr: f64,
    pub wall_time_seconds: f64,
}

impl MetricsRecord {
    /// Equality of every field except wall-clock time.
    pub fn same_values(&self, other: &Self) -> bool {
        Self { wall_time_seconds: 0.0, ..self.clone() } == Self { wall_time_seconds: 0.0, ..other.clone() }
    }
}

/// Reconstruction quality of a model on a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub samples: usize,
    /// NMSE on the bit vectors (the network's output domain).
    pub nmse_linear: f64,
    pub nmse_db: f64,
    /// Mean squared error per sample, as minimized during training.
    pub mse_loss: f64,
    pub bit_error_rate: f64,
    /// NMSE between true and hard-decided phases in radians.
    pub phase_nmse: f64,
    pub wall_time_seconds: f64,
}

impl Evaluation {
    pub fn record(&self, epoch: usize, train_loss: f64, lr: f64) -> MetricsRecord {
        MetricsRecord {
            epoch,
            train_loss,
            val_nmse_linear: self.nmse_linear,
            val_nmse_db: self.nmse_db,
            bit_error_rate: self.bit_error_rate,
            lr,
            wall_time_seconds: self.wall_time_seconds,
        }
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn bits_to_radians<T: Scalar>(bits: &[T], k: usize) -> f64 {
    let hard = hard_decision(bits);
    let index = bits_to_index(&hard).expect("hard decisions are binary");
    index as f64 * std::f64::consts::TAU / (1u64 << k) as f64
}

/// NMSE and bit errors through the channel at `channel`, eval-mode
/// network, noise drawn from `seed`. The empirical power reference (when
/// configured) is measured per evaluation chunk.
pub fn evaluate<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParameterStore<T>,
    data: &Batch<T>,
    channel: &ChannelConfig,
    seed: u64,
) -> Result<Evaluation, TrainError> {
    if data.is_empty() {
        return Err(TrainError::Config("evaluation set is empty".into()));
    }
    let start = Instant::now();
    let mut rng = stream(seed, STREAM_VALIDATION);
    let k = spec.k;
    let (mut err, mut norm, mut bit_errors) = (0.0f64, 0.0f64, 0usize);
    let (mut phase_err, mut phase_norm) = (0.0f64, 0.0f64);
    let mut start_idx = 0;
    while start_idx < data.len() {
        let end = (start_idx + EVAL_CHUNK).min(data.len());
        let chunk = data.slice(start_idx, end);
        let code = encode(spec, params, &chunk)?;
        let received = awgn_channel(&code, channel, &mut rng);
        let out = decode(spec, params, &received)?;
        for i in 0..chunk.len() {
            let (truth, recon) = (chunk.sample(i), out.sample(i));
            for (&t, &r) in truth.iter().zip(recon) {
                let (t, r) = (t.as_f64(), r.as_f64());
                err += (t - r) * (t - r);
                norm += t * t;
                bit_errors += usize::from((r >= 0.5) != (t >= 0.5));
            }
            let theta = bits_to_radians(truth, k);
            let theta_hat = bits_to_radians(recon, k);
            phase_err += (theta - theta_hat) * (theta - theta_hat);
            phase_norm += theta * theta;
        }
        start_idx = end;
    }
    if norm == 0.0 {
        return Err(TrainError::ZeroNormTruth);
    }
    let nmse_linear = err / norm;
    Ok(Evaluation {
        samples: data.len(),
        nmse_linear,
        nmse_db: to_db(nmse_linear),
        mse_loss: err / data.len() as f64,
        bit_error_rate: bit_errors as f64 / (data.len() * k) as f64,
        phase_nmse: if phase_norm > 0.0 { phase_err / phase_norm } else { 0.0 },
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Stateful training loop: parameters, optimizer state and the metrics so far.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    spec: NetworkSpec,
    cfg: TrainConfig,
    params: ParameterStore<T>,
    adam: AdamState<T>,
    records: Vec<MetricsRecord>,
    shuffle_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(spec: &NetworkSpec, params: ParameterStore<T>, cfg: &TrainConfig) -> Result<Self, TrainError> {
        cfg.validate(spec)?;
        params.check(spec)?;
        Ok(Self {
            spec: spec.clone(),
            cfg: cfg.clone(),
            adam: AdamState::new(&params),
            params,
            records: Vec::new(),
            shuffle_rng: stream(cfg.seed, STREAM_SHUFFLE),
            noise_rng: stream(cfg.seed, STREAM_NOISE),
        })
    }

    pub fn params(&self) -> &ParameterStore<T> {
        &self.params
    }

    pub fn records(&self) -> &[MetricsRecord] {
        &self.records
    }

    pub fn steps(&self) -> u64 {
        self.adam.t
    }

    pub fn current_lr(&self) -> f64 {
        lr_schedule(self.cfg.lr0, self.cfg.decay_rate, self.adam.t, self.cfg.decay_steps)
    }

    pub fn into_parts(self) -> (ParameterStore<T>, Vec<MetricsRecord>) {
        (self.params, self.records)
    }

    /// One optimizer step on `batch`; returns the pre-update loss.
    pub fn step(&mut self, batch: &Batch<T>) -> Result<f64, TrainError> {
        let spec = &self.spec;
        let mut pass = Pass::encode(spec, &self.params, batch, Mode::Train)?;
        let received = awgn_channel(pass.code(), &self.cfg.channel, &mut self.noise_rng);
        let output = pass.decode(spec, &self.params, &received)?;
        let loss = mse_loss(output, batch)?.as_f64();
        if !loss.is_finite() {
            return Err(TrainError::Diverged { epoch: self.records.len() + 1, step: self.adam.t });
        }
        let d_out = mse_loss_grad(output, batch)?;
        let (grads, _) = pass.backward(spec, &self.params, &d_out, T::lit(self.cfg.channel.gain))?;
        let lr = self.current_lr();
        adam_step(&mut self.params, &grads, &mut self.adam, &self.cfg.adam, lr)?;
        pass.commit_running_stats(&mut self.params);
        Ok(loss)
    }

    /// One pass over `train` in a seeded random order, then validation.
    ///
    /// On divergence the parameters and optimizer state are rolled back to
    /// the start of the epoch before the error is returned.
    pub fn run_epoch(&mut self, train: &Batch<T>, validation: &Batch<T>) -> Result<MetricsRecord, TrainError> {
        let start = Instant::now();
        let checkpoint = (self.params.clone(), self.adam.clone());
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut self.shuffle_rng);
        let min_batch = if self.spec.uses_batch_norm() { 2 } else { 1 };
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for idx in order.chunks(self.cfg.batch_size) {
            if idx.len() < min_batch {
                continue;
            }
            let batch = train.gather(idx);
            match self.step(&batch) {
                Ok(loss) => {
                    loss_sum += loss * idx.len() as f64;
                    seen += idx.len();
                }
                Err(e) => {
                    (self.params, self.adam) = checkpoint;
                    return Err(e);
                }
            }
        }
        if seen == 0 {
            return Err(TrainError::Config("training set yields no usable mini-batch".into()));
        }
        let epoch = self.records.len() + 1;
        let val_seed = self.cfg.seed.wrapping_add(epoch as u64);
        let eval = evaluate(&self.spec, &self.params, validation, &self.cfg.channel, val_seed)?;
        if !eval.nmse_linear.is_finite() {
            (self.params, self.adam) = checkpoint;
            return Err(TrainError::Diverged { epoch, step: self.adam.t });
        }
        let mut record = eval.record(epoch, loss_sum / seen as f64, self.current_lr());
        record.wall_time_seconds = start.elapsed().as_secs_f64();
        log::debug!(
            "epoch {epoch}: loss {:.5} val nmse {:.5} ({:.2} dB) ber {:.4}",
            record.train_loss,
            record.val_nmse_linear,
            record.val_nmse_db,
            record.bit_error_rate
        );
        self.records.push(record.clone());
        Ok(record)
    }
}

/// Trains for `cfg.epochs` epochs and returns the final parameters with one
/// [`MetricsRecord`] per epoch.
pub fn train<T: Scalar>(
    spec: &NetworkSpec,
    params: ParameterStore<T>,
    train: &Batch<T>,
    validation: &Batch<T>,
    cfg: &TrainConfig,
) -> Result<(ParameterStore<T>, Vec<MetricsRecord>), TrainError> {
    if train.is_empty() {
        return Err(TrainError::Config("training set is empty".into()));
    }
    let mut trainer = Trainer::new(spec, params, cfg)?;
    for _ in 0..cfg.epochs {
        trainer.run_epoch(train, validation)?;
    }
    Ok(trainer.into_parts())
}

/// Wall-clock statistics of repeated full-dataset inference.
#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    pub median_seconds: f64,
    pub samples: Vec<f64>,
}

impl Timing {
    pub fn spread(&self) -> f64 {
        let max = self.samples.iter().copied().fold(f64::MIN, f64::max);
        let min = self.samples.iter().copied().fold(f64::MAX, f64::min);
        max / min
    }
}

/// Median wall time of noiseless eval-mode encode+decode over all of `data`.
pub fn time_inference<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParameterStore<T>,
    data: &Batch<T>,
    repetitions: usize,
) -> Result<Timing, TrainError> {
    if repetitions < 3 {
        return Err(TrainError::Config("timing needs at least 3 repetitions".into()));
    }
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        let mut i = 0;
        while i < data.len() {
            let end = (i + EVAL_CHUNK).min(data.len());
            let code = encode(spec, params, &data.slice(i, end))?;
            std::hint::black_box(decode(spec, params, &code)?);
            i = end;
        }
        samples.push(start.elapsed().as_secs_f64());
    }
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    Ok(Timing { median_seconds: median, samples })
}
