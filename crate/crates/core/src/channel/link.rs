//! Single-antenna IRS-assisted downlink used to produce the phases that are
//! fed back.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::ChannelError;

/// One realization of the AP→IRS, IRS→user and AP→user channels.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRealization {
    pub h_sr: Vec<Complex64>,
    pub h_rd: Vec<Complex64>,
    pub h_sd: Complex64,
    /// Reflection amplitude in `(0, 1]`.
    pub rho: f64,
    /// Transmit power (linear).
    pub power: f64,
    /// Receiver noise variance.
    pub noise_var: f64,
}

impl LinkRealization {
    pub fn new(
        h_sr: Vec<Complex64>,
        h_rd: Vec<Complex64>,
        h_sd: Complex64,
        rho: f64,
        power: f64,
        noise_var: f64,
    ) -> Result<Self, ChannelError> {
        if h_sr.len() != h_rd.len() {
            return Err(ChannelError::Dimension { expected: h_sr.len(), found: h_rd.len() });
        }
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(ChannelError::Config(format!("reflection amplitude {rho} outside (0, 1]")));
        }
        if !(power > 0.0) || !(noise_var > 0.0) {
            return Err(ChannelError::Config("transmit power and noise variance must be positive".into()));
        }
        Ok(Self { h_sr, h_rd, h_sd, rho, power, noise_var })
    }

    /// Rayleigh draw: every coefficient `CN(0, 1)`, unit power, `ρ = 1`.
    pub fn rayleigh<R: Rng + ?Sized>(elements: usize, rng: &mut R) -> Self {
        let mut cn = || {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * FRAC_1_SQRT_2
        };
        let h_sr = (0..elements).map(|_| cn()).collect();
        let h_rd = (0..elements).map(|_| cn()).collect();
        let h_sd = cn();
        Self { h_sr, h_rd, h_sd, rho: 1.0, power: 1.0, noise_var: 1.0 }
    }

    pub fn elements(&self) -> usize {
        self.h_sr.len()
    }
}

/// `θ*_m = arg(h_sd) - arg([h_sr]_m [h_rd]_m)`, wrapped to `[0, 2π)`.
pub fn optimal_phase(link: &LinkRealization, m: usize) -> Result<f64, ChannelError> {
    if m >= link.elements() {
        return Err(ChannelError::Dimension { expected: link.elements(), found: m });
    }
    let cascade = link.h_sr[m] * link.h_rd[m];
    if link.h_sd == Complex64::new(0.0, 0.0) || cascade == Complex64::new(0.0, 0.0) {
        return Err(ChannelError::ZeroChannel { element: m });
    }
    Ok((link.h_sd.arg() - cascade.arg()).rem_euclid(TAU))
}

pub fn optimal_phases(link: &LinkRealization) -> Result<Vec<f64>, ChannelError> {
    (0..link.elements()).map(|m| optimal_phase(link, m)).collect()
}

/// `y = √P h_rdᵀ Φ h_sr s + √P h_sd s + u` with `Φ = ρ diag(e^{jθ_m})`.
pub fn received_signal(
    link: &LinkRealization,
    phases: &[f64],
    symbol: Complex64,
    noise: Complex64,
) -> Result<Complex64, ChannelError> {
    if phases.len() != link.elements() {
        return Err(ChannelError::Dimension { expected: link.elements(), found: phases.len() });
    }
    let reflected: Complex64 = link
        .h_rd
        .iter()
        .zip(&link.h_sr)
        .zip(phases)
        .map(|((rd, sr), &theta)| rd * Complex64::from_polar(link.rho, theta) * sr)
        .sum();
    let amp = link.power.sqrt();
    Ok(amp * reflected * symbol + amp * link.h_sd * symbol + noise)
}
