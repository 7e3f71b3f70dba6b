//! Naive reference implementations, written independently of the library.

use std::f64::consts::TAU;

/// Direct sliding-window sum with zero padding. `x` is `[channel][t]`,
/// `w` is `[out][in][tap]`.
pub fn conv(x: &[Vec<f64>], w: &[Vec<Vec<f64>>], bias: &[f64]) -> Vec<Vec<f64>> {
    let len = x[0].len() as isize;
    let half = (w[0][0].len() / 2) as isize;
    w.iter()
        .zip(bias)
        .map(|(w_o, b)| {
            (0..len)
                .map(|t| {
                    let mut acc = *b;
                    for (x_i, w_oi) in x.iter().zip(w_o) {
                        for (k, wk) in w_oi.iter().enumerate() {
                            let pos = t + k as isize - half;
                            if (0..len).contains(&pos) {
                                acc += wk * x_i[pos as usize];
                            }
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// Squared error over squared truth, summed sample by sample.
pub fn nmse(recon: &[f64], truth: &[f64], samples: usize) -> f64 {
    let k = truth.len() / samples;
    let (mut num, mut den) = (0.0, 0.0);
    for s in 0..samples {
        for j in 0..k {
            let (t, r) = (truth[s * k + j], recon[s * k + j]);
            num += (t - r).powi(2);
            den += t * t;
        }
    }
    num / den
}

/// Circular distance on `[0, 2π)`.
pub fn circular(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Grid index closest to `theta` by exhaustive search, with its distance.
pub fn nearest_index(theta: f64, k: usize) -> (u64, f64) {
    let levels = 1u64 << k;
    let step = TAU / levels as f64;
    let wrapped = theta.rem_euclid(TAU);
    (0..levels).map(|i| (i, circular(wrapped, i as f64 * step))).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap()
}

/// `2π/2^K · Σ b_j 2^(K-1-j)`.
pub fn phase(bits: &[u8]) -> f64 {
    let k = bits.len();
    let sum: f64 = bits.iter().enumerate().map(|(j, &b)| b as f64 * 2f64.powi((k - 1 - j) as i32)).sum();
    sum * TAU / 2f64.powi(k as i32)
}
