//! Real-valued feedback channel `received = g * code + n`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::Scalar;
use crate::tensor::{Batch, Tensor};

/// Signal power the SNR is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerReference {
    /// Fixed unit power: `σ² = 10^(-snr/10)` regardless of the code's scale.
    Unit,
    /// Mean squared code entry of the transmitted batch.
    BatchEmpirical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    /// Constant real channel coefficient `g`.
    pub gain: f64,
    /// `+inf` disables noise.
    pub snr_db: f64,
    pub power: PowerReference,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { gain: 1.0, snr_db: 10.0, power: PowerReference::Unit }
    }
}

impl ChannelConfig {
    pub fn new(snr_db: f64) -> Self {
        Self { snr_db, ..Self::default() }
    }

    pub fn noiseless() -> Self {
        Self::new(f64::INFINITY)
    }

    pub fn with_power(self, power: PowerReference) -> Self {
        Self { power, ..self }
    }

    /// `σ² = P · 10^(-snr_db / 10)` where `P` is 1 or `code_power`.
    pub fn noise_variance(&self, code_power: f64) -> f64 {
        if self.snr_db == f64::INFINITY {
            return 0.0;
        }
        let p = match self.power {
            PowerReference::Unit => 1.0,
            PowerReference::BatchEmpirical => code_power,
        };
        p * 10f64.powf(-self.snr_db / 10.0)
    }

    /// Noise variance that applies to `code`, warning when an empirical
    /// reference is degenerate.
    pub fn variance_for<T: Scalar>(&self, code: &[T]) -> f64 {
        let power = mean_square(code);
        if self.power == PowerReference::BatchEmpirical && power <= 0.0 && self.snr_db.is_finite() {
            log::warn!("all-zero code under empirical power reference; transmitting without noise");
        }
        self.noise_variance(power)
    }
}

pub fn mean_square<T: Scalar>(code: &[T]) -> f64 {
    if code.is_empty() {
        return 0.0;
    }
    code.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>() / code.len() as f64
}

fn transmit<T: Scalar, R: Rng + ?Sized>(code: &[T], cfg: &ChannelConfig, rng: &mut R) -> Vec<T> {
    let sigma = cfg.variance_for(code).sqrt();
    let gain = T::lit(cfg.gain);
    if sigma == 0.0 {
        return code.iter().map(|&c| gain * c).collect();
    }
    code.iter()
        .map(|&c| {
            let z: f64 = rng.sample(StandardNormal);
            gain * c + T::lit(sigma * z)
        })
        .collect()
}

/// Corrupts a batch of codes; the empirical power (when used) is measured
/// over the whole batch.
pub fn awgn_channel<T: Scalar, R: Rng + ?Sized>(code: &Batch<T>, cfg: &ChannelConfig, rng: &mut R) -> Batch<T> {
    let data = transmit(code.data(), cfg, rng);
    Batch::new(code.len(), code.channels(), code.length(), data).expect("same shape")
}

pub fn awgn_tensor<T: Scalar, R: Rng + ?Sized>(code: &Tensor<T>, cfg: &ChannelConfig, rng: &mut R) -> Tensor<T> {
    Tensor::new(code.channels(), code.length(), transmit(code.data(), cfg, rng)).expect("same shape")
}
