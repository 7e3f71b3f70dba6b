//! Exhaustive grid search over IRS phase configurations.

use std::f64::consts::TAU;

use num_complex::Complex64;
use pscdn::channel::{optimal_phases, quantize_phase, received_signal, LinkRealization};
use rand::Rng;

fn noiseless_gain(link: &LinkRealization, phases: &[f64]) -> f64 {
    let zero = Complex64::new(0.0, 0.0);
    received_signal(link, phases, Complex64::new(1.0, 0.0), zero).unwrap().norm()
}

/// Every combination of `2^k` grid phases on each element, best first.
fn grid_argmax(link: &LinkRealization, k: usize) -> (Vec<u64>, f64) {
    let levels = 1u64 << k;
    let m = link.elements();
    let step = TAU / levels as f64;
    let mut best = (vec![], f64::NEG_INFINITY);
    for code in 0..levels.pow(m as u32) {
        let idx: Vec<u64> = (0..m).map(|e| (code / levels.pow(e as u32)) % levels).collect();
        let phases: Vec<f64> = idx.iter().map(|&i| i as f64 * step).collect();
        let gain = noiseless_gain(link, &phases);
        if gain > best.1 {
            best = (idx, gain);
        }
    }
    best
}

/// On random Rayleigh links the continuous optimum dominates every grid
/// point, and on links whose optimum lies on the grid the exhaustive
/// argmax is exactly the quantized optimum.
pub fn check_optimal_phase<R: Rng>(rng: &mut R, trials: usize, m: usize, k: usize) {
    let step = TAU / (1u64 << k) as f64;
    for trial in 0..trials {
        let link = LinkRealization::rayleigh(m, rng);
        let best = optimal_phases(&link).unwrap();
        let (_, grid_best) = grid_argmax(&link, k);
        assert!(noiseless_gain(&link, &best) >= grid_best * (1.0 - 1e-12), "trial {trial}: grid beats optimum");

        // Rotate each cascade so its optimal phase lands on a random grid point.
        let mut aligned = LinkRealization::rayleigh(m, rng);
        for e in 0..m {
            let target = rng.random_range(0..1u64 << k) as f64 * step;
            let current = optimal_phases(&aligned).unwrap()[e];
            aligned.h_sr[e] *= Complex64::from_polar(1.0, current - target);
        }
        let want: Vec<u64> =
            optimal_phases(&aligned).unwrap().iter().map(|&t| quantize_phase(t, k).unwrap().index).collect();
        let (got, _) = grid_argmax(&aligned, k);
        assert_eq!(got, want, "trial {trial}: exhaustive argmax differs from the quantized optimum");
    }
}
