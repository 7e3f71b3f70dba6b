use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ops::{Kernel, RunningStats};
use crate::scalar::Scalar;

use super::spec::{ConvSpec, NetworkSpec};
use super::ModelError;

/// Weights, bias and (when batch-normalized) running statistics of one conv.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub id: usize,
    pub kernel: Kernel<T>,
    pub bias: Vec<T>,
    pub running: Option<RunningStats<T>>,
}

impl<T: Scalar> LayerParams<T> {
    fn zeros(id: usize, conv: &ConvSpec) -> Self {
        Self {
            id,
            kernel: Kernel::zeros(conv.out_channels, conv.in_channels, conv.kernel_size)
                .expect("validated conv spec"),
            bias: vec![T::zero(); conv.out_channels],
            running: conv.batch_norm.then(|| RunningStats::new(conv.out_channels)),
        }
    }

    pub fn matches(&self, conv: &ConvSpec) -> bool {
        self.kernel.out_channels() == conv.out_channels
            && self.kernel.in_channels() == conv.in_channels
            && self.kernel.kernel_size() == conv.kernel_size
            && self.bias.len() == conv.out_channels
            && self.running.is_some() == conv.batch_norm
    }
}

/// One [`LayerParams`] per convolution, in [`NetworkSpec::convs`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore<T> {
    layers: Vec<LayerParams<T>>,
}

impl<T: Scalar> ParameterStore<T> {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        Self { layers: spec.convs().enumerate().map(|(id, c)| LayerParams::zeros(id, c)).collect() }
    }

    /// Same shapes as `self`, every value zero, no running statistics.
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    id: l.id,
                    kernel: Kernel::zeros(l.kernel.out_channels(), l.kernel.in_channels(), l.kernel.kernel_size())
                        .expect("existing kernel dims"),
                    bias: vec![T::zero(); l.bias.len()],
                    running: None,
                })
                .collect(),
        }
    }

    pub fn from_layers(spec: &NetworkSpec, layers: Vec<LayerParams<T>>) -> Result<Self, ModelError> {
        let store = Self { layers };
        store.check(spec)?;
        Ok(store)
    }

    /// Verifies one entry per conv with matching shapes.
    pub fn check(&self, spec: &NetworkSpec) -> Result<(), ModelError> {
        let convs: Vec<_> = spec.convs().collect();
        if convs.len() != self.layers.len() {
            return Err(ModelError::Params(format!(
                "spec has {} conv layers, store has {}",
                convs.len(),
                self.layers.len()
            )));
        }
        for (i, (l, c)) in self.layers.iter().zip(convs).enumerate() {
            if !l.matches(c) {
                return Err(ModelError::Params(format!("layer {i} parameters do not match its spec")));
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> &[LayerParams<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams<T>] {
        &mut self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Learned values (weights then bias per layer) as flat slices.
    pub fn slices(&self) -> Vec<&[T]> {
        self.layers.iter().flat_map(|l| [l.kernel.data(), l.bias.as_slice()]).collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [T]> {
        self.layers.iter_mut().flat_map(|l| [l.kernel.data_mut(), l.bias.as_mut_slice()]).collect()
    }

    pub fn scalar_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Learned values concatenated in store order.
    pub fn flatten(&self) -> Vec<T> {
        self.slices().concat()
    }

    pub fn cast<U: Scalar>(&self) -> ParameterStore<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::lit(x.as_f64())).collect::<Vec<U>>();
        ParameterStore {
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    id: l.id,
                    kernel: Kernel::new(
                        l.kernel.out_channels(),
                        l.kernel.in_channels(),
                        l.kernel.kernel_size(),
                        conv(l.kernel.data()),
                    )
                    .expect("existing kernel dims"),
                    bias: conv(&l.bias),
                    running: l.running.as_ref().map(|r| RunningStats { mean: conv(&r.mean), var: conv(&r.var) }),
                })
                .collect(),
        }
    }
}

/// Taps of a same-padded kernel that can touch real input at `length`.
pub fn active_taps(kernel_size: usize, length: usize) -> usize {
    kernel_size.min(2 * length - 1)
}

/// Glorot-uniform weights, `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`;
/// zero biases. Fans are `channels * active_taps`, so a width-3 kernel
/// running at length 1 is scaled like the pointwise conv it acts as.
/// Deterministic in `seed`.
pub fn init_parameters<T: Scalar>(spec: &NetworkSpec, seed: u64) -> ParameterStore<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParameterStore::zeros(spec);
    for (layer, length) in store.layers_mut().iter_mut().zip(spec.conv_lengths()) {
        let k = &layer.kernel;
        let taps = active_taps(k.kernel_size(), length);
        let fan_in = k.in_channels() * taps;
        let fan_out = k.out_channels() * taps;
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for w in layer.kernel.data_mut() {
            *w = T::lit(rng.random_range(-limit..limit));
        }
    }
    store
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> NetworkSpec {
        NetworkSpec::pscdn(9, 16, 3).unwrap()
    }

    #[test]
    fn deterministic_per_seed() {
        let a: ParameterStore<f64> = init_parameters(&spec(), 7);
        let b: ParameterStore<f64> = init_parameters(&spec(), 7);
        let c: ParameterStore<f64> = init_parameters(&spec(), 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn glorot_variance() {
        let spec = NetworkSpec::pscdn(9, 56, 2).unwrap();
        let store: ParameterStore<f64> = init_parameters(&spec, 3);
        let lengths = spec.conv_lengths();
        for layer in store.layers() {
            let w = layer.kernel.data();
            if w.len() < 100 {
                continue;
            }
            let taps = if lengths[layer.id] == 1 { 1 } else { layer.kernel.kernel_size() };
            let fan = (layer.kernel.in_channels() + layer.kernel.out_channels()) * taps;
            let expect = 2.0 / fan as f64;
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / w.len() as f64;
            assert!((var / expect - 1.0).abs() < 0.2, "layer {}: {var} vs {expect}", layer.id);
            assert!(layer.bias.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn fans_count_active_taps() {
        assert_eq!(active_taps(3, 1), 1);
        assert_eq!(active_taps(3, 2), 3);
        assert_eq!(active_taps(1, 9), 1);
        let spec = NetworkSpec::pscdn(9, 16, 3).unwrap();
        let lengths = spec.conv_lengths();
        assert_eq!(lengths.len(), spec.convs().count());
        assert_eq!(&lengths[..4], &[9, 9, 9, 1]);
        assert!(lengths[4..].iter().all(|&l| l == 1));
    }

    #[test]
    fn shapes_match_spec() {
        let spec = NetworkSpec::build(crate::model::Variant::PscnF, 9, 8, 2).unwrap();
        let store: ParameterStore<f32> = init_parameters(&spec, 0);
        store.check(&spec).unwrap();
        assert_eq!(store.scalar_count(), spec.count_parameters());
        assert!(store.layers().iter().all(|l| l.running.is_some()));
        let other = NetworkSpec::pscdn(9, 8, 3).unwrap();
        assert!(store.check(&other).is_err());
    }
}
