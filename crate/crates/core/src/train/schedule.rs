/// Exponential decay, `lr0 · decay_rate^(total_steps / decay_steps)` with a
/// continuous exponent (no staircase).
pub fn lr_schedule(lr0: f64, decay_rate: f64, total_steps: u64, decay_steps: u64) -> f64 {
    assert!(decay_steps >= 1, "decay_steps must be at least 1");
    if total_steps == 0 {
        return lr0;
    }
    lr0 * decay_rate.powf(total_steps as f64 / decay_steps as f64)
}
