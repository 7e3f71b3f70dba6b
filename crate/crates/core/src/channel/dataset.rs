use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;
use crate::tensor::Batch;

use super::phase::PhaseSample;
use super::ChannelError;

/// `count` phases with grid indices drawn i.i.d. uniform over `[0, 2^K)`.
pub fn generate_dataset(count: usize, k: usize, seed: u64) -> Result<Vec<PhaseSample>, ChannelError> {
    if count == 0 {
        return Err(ChannelError::Config("dataset must contain at least one sample".into()));
    }
    // validates k
    PhaseSample::from_index(0, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = 1u64 << k;
    (0..count).map(|_| PhaseSample::from_index(rng.random_range(0..levels), k)).collect()
}

/// Stacks the bit vectors into a `(count, 1, K)` network input batch.
pub fn to_batch<T: Scalar>(samples: &[PhaseSample]) -> Result<Batch<T>, ChannelError> {
    let k = samples.first().map(PhaseSample::bits_len).ok_or_else(|| ChannelError::Config("empty dataset".into()))?;
    let mut data = Vec::with_capacity(samples.len() * k);
    for s in samples {
        if s.bits.len() != k {
            return Err(ChannelError::Dimension { expected: k, found: s.bits.len() });
        }
        data.extend(s.bits.iter().map(|&b| if b == 1 { T::one() } else { T::zero() }));
    }
    Ok(Batch::new(samples.len(), 1, k, data)?)
}
