//! Forward and backward execution of a [`NetworkSpec`] over a batch.
//!
//! A [`Pass`] is split at the code boundary so a channel can corrupt the
//! code between [`Pass::encode`] and [`Pass::decode`].

use crate::ops::{
    concat_batch, conv_backward_batch, conv_forward_batch, norm_backward, norm_forward_eval, norm_forward_train,
    relu_backward_slice, relu_slice, sigmoid_backward_slice, sigmoid_slice, split_batch, sub_batch, ConvCache,
    NormCache, DEFAULT_EPS,
};
use crate::scalar::Scalar;
use crate::tensor::{Batch, Tensor, TensorError};

use super::params::{LayerParams, ParameterStore};
use super::spec::{Activation, ConvSpec, LayerSpec, NetworkSpec};
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch norm uses mini-batch statistics.
    Train,
    /// Batch norm uses running statistics; fully deterministic.
    Eval,
}

#[derive(Debug, Clone)]
struct ConvTrace<T> {
    conv: ConvCache<T>,
    norm: Option<NormCache<T>>,
    /// ReLU input or sigmoid output.
    act: Option<Batch<T>>,
}

#[derive(Debug, Clone)]
enum Trace<T> {
    Conv(ConvTrace<T>),
    Reshape { from: (usize, usize) },
    Denoise { code_channels: usize, feature: ConvTrace<T>, estimate: ConvTrace<T> },
}

fn conv_forward<T: Scalar>(
    spec: &ConvSpec,
    p: &LayerParams<T>,
    x: &Batch<T>,
    mode: Mode,
) -> Result<(Batch<T>, ConvTrace<T>), ModelError> {
    let (mut z, conv) = conv_forward_batch(x, &p.kernel, &p.bias)?;
    let mut norm = None;
    if spec.batch_norm {
        let eps = T::lit(DEFAULT_EPS);
        let (y, cache) = match mode {
            Mode::Train => norm_forward_train(&z, eps, None)?,
            Mode::Eval => {
                let running = p
                    .running
                    .as_ref()
                    .ok_or_else(|| ModelError::Params(format!("layer {} lacks running statistics", p.id)))?;
                norm_forward_eval(&z, eps, running)
            }
        };
        z = y;
        norm = Some(cache);
    }
    let act = match spec.activation {
        Activation::Identity => None,
        Activation::Relu => {
            let pre = z.clone();
            relu_slice(z.data_mut());
            Some(pre)
        }
        Activation::Sigmoid => {
            sigmoid_slice(z.data_mut());
            Some(z.clone())
        }
    };
    Ok((z, ConvTrace { conv, norm, act }))
}

fn conv_backward<T: Scalar>(
    spec: &ConvSpec,
    p: &LayerParams<T>,
    trace: &ConvTrace<T>,
    mut dy: Batch<T>,
    grad: &mut LayerParams<T>,
) -> Batch<T> {
    match (spec.activation, &trace.act) {
        (Activation::Relu, Some(pre)) => relu_backward_slice(pre.data(), dy.data_mut()),
        (Activation::Sigmoid, Some(out)) => sigmoid_backward_slice(out.data(), dy.data_mut()),
        _ => {}
    }
    if let Some(norm) = &trace.norm {
        dy = norm_backward(norm, &dy);
    }
    let (dx, dw, db) = conv_backward_batch(&trace.conv, &p.kernel, &dy);
    for (g, d) in grad.kernel.data_mut().iter_mut().zip(dw) {
        *g += d;
    }
    for (g, d) in grad.bias.iter_mut().zip(db) {
        *g += d;
    }
    dx
}

fn run_layers<T: Scalar>(
    layers: &[LayerSpec],
    params: &[LayerParams<T>],
    mut x: Batch<T>,
    mode: Mode,
) -> Result<(Batch<T>, Vec<Trace<T>>), ModelError> {
    let mut traces = Vec::with_capacity(layers.len());
    let mut slot = 0;
    for layer in layers {
        match layer {
            LayerSpec::Conv(spec) => {
                let (y, t) = conv_forward(spec, &params[slot], &x, mode)?;
                slot += 1;
                traces.push(Trace::Conv(t));
                x = y;
            }
            LayerSpec::Reshape { channels, length } => {
                let from = x.item_shape();
                x = x.reshaped(*channels, *length)?;
                traces.push(Trace::Reshape { from });
            }
            LayerSpec::Denoise { feature, estimate } => {
                let (feat, ft) = conv_forward(feature, &params[slot], &x, mode)?;
                let cat = concat_batch(&x, &feat)?;
                let (est, et) = conv_forward(estimate, &params[slot + 1], &cat, mode)?;
                slot += 2;
                let code_channels = x.channels();
                x = sub_batch(&x, &est)?;
                traces.push(Trace::Denoise { code_channels, feature: ft, estimate: et });
            }
        }
    }
    Ok((x, traces))
}

fn back_layers<T: Scalar>(
    layers: &[LayerSpec],
    params: &[LayerParams<T>],
    traces: &[Trace<T>],
    mut dy: Batch<T>,
    grads: &mut [LayerParams<T>],
) -> Result<Batch<T>, ModelError> {
    let mut slot = params.len();
    for (layer, trace) in layers.iter().zip(traces).rev() {
        match (layer, trace) {
            (LayerSpec::Conv(spec), Trace::Conv(t)) => {
                slot -= 1;
                dy = conv_backward(spec, &params[slot], t, dy, &mut grads[slot]);
            }
            (LayerSpec::Reshape { .. }, Trace::Reshape { from }) => {
                dy = dy.reshaped(from.0, from.1)?;
            }
            (LayerSpec::Denoise { feature, estimate }, Trace::Denoise { code_channels, feature: ft, estimate: et }) => {
                slot -= 2;
                let d_est = dy.map(|v| -v);
                let d_cat = conv_backward(estimate, &params[slot + 1], et, d_est, &mut grads[slot + 1]);
                let (d_code_cat, d_feat) = split_batch(&d_cat, *code_channels);
                let d_code_feat = conv_backward(feature, &params[slot], ft, d_feat, &mut grads[slot]);
                for ((d, a), b) in dy.data_mut().iter_mut().zip(d_code_cat.data()).zip(d_code_feat.data()) {
                    *d += *a + *b;
                }
            }
            _ => return Err(ModelError::Params("trace does not match layer stack".into())),
        }
    }
    Ok(dy)
}

fn check_batch<T: Scalar>(batch: &Batch<T>, expected: (usize, usize), what: &str) -> Result<(), ModelError> {
    if batch.item_shape() != expected {
        return Err(TensorError::Shape(format!("{what} has shape {:?}, expected {expected:?}", batch.item_shape())).into());
    }
    if batch.is_empty() {
        return Err(TensorError::Shape(format!("{what} batch is empty")).into());
    }
    Ok(())
}

/// Recorded forward pass over one batch, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Pass<T> {
    mode: Mode,
    encoder: Vec<Trace<T>>,
    decoder: Vec<Trace<T>>,
    code: Batch<T>,
    output: Option<Batch<T>>,
}

impl<T: Scalar> Pass<T> {
    /// Runs the encoder on `(n, 1, K)` inputs, producing the `(n, C, 1)` code.
    pub fn encode(
        spec: &NetworkSpec,
        params: &ParameterStore<T>,
        input: &Batch<T>,
        mode: Mode,
    ) -> Result<Self, ModelError> {
        check_batch(input, spec.input_shape(), "input")?;
        let split = spec.encoder_conv_count();
        let (code, encoder) = run_layers(&spec.encoder, &params.layers()[..split], input.clone(), mode)?;
        Ok(Self { mode, encoder, decoder: Vec::new(), code, output: None })
    }

    pub fn code(&self) -> &Batch<T> {
        &self.code
    }

    /// Runs the decoder on the (possibly channel-corrupted) code.
    pub fn decode(
        &mut self,
        spec: &NetworkSpec,
        params: &ParameterStore<T>,
        received: &Batch<T>,
    ) -> Result<&Batch<T>, ModelError> {
        check_batch(received, spec.code_shape(), "received code")?;
        let split = spec.encoder_conv_count();
        let (out, decoder) = run_layers(&spec.decoder, &params.layers()[split..], received.clone(), self.mode)?;
        self.decoder = decoder;
        Ok(self.output.insert(out))
    }

    pub fn output(&self) -> Option<&Batch<T>> {
        self.output.as_ref()
    }

    /// Backpropagates `d_output` through decoder, channel and encoder.
    ///
    /// The channel is `received = gain * code + noise` with the noise held
    /// fixed, so the code gradient is `gain` times the received-code gradient.
    /// Returns parameter gradients and the gradient with respect to the input.
    pub fn backward(
        &self,
        spec: &NetworkSpec,
        params: &ParameterStore<T>,
        d_output: &Batch<T>,
        channel_gain: T,
    ) -> Result<(ParameterStore<T>, Batch<T>), ModelError> {
        let output = self.output.as_ref().ok_or_else(|| ModelError::Params("backward before decode".into()))?;
        if d_output.len() != output.len() || d_output.item_shape() != output.item_shape() {
            return Err(TensorError::Shape("output gradient does not match output".into()).into());
        }
        let split = spec.encoder_conv_count();
        let mut grads = params.zeros_like();
        let (enc_g, dec_g) = grads.layers_mut().split_at_mut(split);
        let d_received = back_layers(&spec.decoder, &params.layers()[split..], &self.decoder, d_output.clone(), dec_g)?;
        let d_code = d_received.map(|v| v * channel_gain);
        let d_input = back_layers(&spec.encoder, &params.layers()[..split], &self.encoder, d_code, enc_g)?;
        Ok((grads, d_input))
    }

    /// Folds this pass's mini-batch statistics into the running averages.
    pub fn commit_running_stats(&self, params: &mut ParameterStore<T>) {
        if self.mode != Mode::Train {
            return;
        }
        let mut slot = 0;
        let mut fold = |t: &ConvTrace<T>, slot: usize| {
            if let (Some(NormCache { moments: Some((mean, var)), .. }), Some(r)) =
                (&t.norm, params.layers_mut()[slot].running.as_mut())
            {
                r.update(mean, var);
            }
        };
        for trace in self.encoder.iter().chain(&self.decoder) {
            match trace {
                Trace::Conv(t) => {
                    fold(t, slot);
                    slot += 1;
                }
                Trace::Reshape { .. } => {}
                Trace::Denoise { feature, estimate, .. } => {
                    fold(feature, slot);
                    fold(estimate, slot + 1);
                    slot += 2;
                }
            }
        }
    }
}

/// Eval-mode encoder.
pub fn encode<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParameterStore<T>,
    input: &Batch<T>,
) -> Result<Batch<T>, ModelError> {
    Ok(Pass::encode(spec, params, input, Mode::Eval)?.code)
}

/// Eval-mode decoder.
pub fn decode<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParameterStore<T>,
    received: &Batch<T>,
) -> Result<Batch<T>, ModelError> {
    check_batch(received, spec.code_shape(), "received code")?;
    let split = spec.encoder_conv_count();
    Ok(run_layers(&spec.decoder, &params.layers()[split..], received.clone(), Mode::Eval)?.0)
}

/// Encodes, passes the code through `channel`, and decodes.
/// Returns the pre-channel code and the reconstruction.
pub fn forward<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParameterStore<T>,
    input: &Batch<T>,
    mode: Mode,
    channel: impl FnOnce(&Batch<T>) -> Batch<T>,
) -> Result<(Batch<T>, Batch<T>), ModelError> {
    let mut pass = Pass::encode(spec, params, input, mode)?;
    let received = channel(pass.code());
    pass.decode(spec, params, &received)?;
    let Pass { code, output, .. } = pass;
    Ok((code, output.expect("decoded")))
}

/// Single-sample noiseless eval-mode forward.
pub fn forward_tensor<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParameterStore<T>,
    input: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>), ModelError> {
    let (code, out) = forward(spec, params, &Batch::from(input.clone()), Mode::Eval, Clone::clone)?;
    Ok((code.tensor(0), out.tensor(0)))
}

/// The denoising module's noise estimate for a received code (eval mode),
/// or `None` when the network has no denoising module.
pub fn denoise_estimate<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParameterStore<T>,
    received: &Batch<T>,
) -> Result<Option<Batch<T>>, ModelError> {
    check_batch(received, spec.code_shape(), "received code")?;
    let split = spec.encoder_conv_count();
    let mut slot = split;
    for layer in &spec.decoder {
        if let LayerSpec::Denoise { feature, estimate } = layer {
            let (feat, _) = conv_forward(feature, &params.layers()[slot], received, Mode::Eval)?;
            let cat = concat_batch(received, &feat)?;
            let (est, _) = conv_forward(estimate, &params.layers()[slot + 1], &cat, Mode::Eval)?;
            return Ok(Some(est));
        }
        slot += layer.convs().len();
    }
    Ok(None)
}
