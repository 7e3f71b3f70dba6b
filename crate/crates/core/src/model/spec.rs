//! Declarative layer stacks for PSCDN and the PSCN batch-norm ablations.

use std::fmt;
use std::str::FromStr;

use super::ModelError;

/// Default filter count. With `K = 9, C = 2` this gives 88 833 parameters.
pub const DEFAULT_FILTERS: usize = 56;
pub const DEFAULT_BITS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

/// A convolution, optionally batch-normalized, followed by an activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub activation: Activation,
    pub batch_norm: bool,
}

impl ConvSpec {
    fn new(in_channels: usize, out_channels: usize, kernel_size: usize, activation: Activation) -> Self {
        Self { in_channels, out_channels, kernel_size, activation, batch_norm: false }
    }

    pub fn parameter_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel_size + self.out_channels
    }

    pub fn kind(&self) -> LayerKind {
        match (self.batch_norm, self.activation) {
            (false, Activation::Relu) => LayerKind::ConvRelu,
            (false, Activation::Identity) => LayerKind::Conv,
            (false, Activation::Sigmoid) => LayerKind::ConvSigmoid,
            (true, Activation::Relu) => LayerKind::ConvBnRelu,
            (true, Activation::Identity) => LayerKind::ConvBn,
            (true, Activation::Sigmoid) => LayerKind::ConvBnSigmoid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    ConvRelu,
    Conv,
    ConvSigmoid,
    ConvBnRelu,
    /// Kernel-1 code layer with batch norm (variants e and f).
    ConvBn,
    /// Final layer with batch norm (variant f).
    ConvBnSigmoid,
    Reshape,
    DenoiseModule,
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LayerKind::ConvRelu => "Conv+ReLU",
            LayerKind::Conv => "Conv",
            LayerKind::ConvSigmoid => "Conv+Sigmoid",
            LayerKind::ConvBnRelu => "Conv+BN+ReLU",
            LayerKind::ConvBn => "Conv+BN",
            LayerKind::ConvBnSigmoid => "Conv+BN+Sigmoid",
            LayerKind::Reshape => "Reshape",
            LayerKind::DenoiseModule => "Denoise",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LayerSpec {
    Conv(ConvSpec),
    /// Per-sample reshape to `(channels, length)`.
    Reshape { channels: usize, length: usize },
    /// `code - estimate(concat(code, feature(code)))`.
    ///
    /// `feature` maps the noisy code to `N` noise-feature maps; `estimate`
    /// is a kernel-1 convolution from the `C + N` concatenated channels back
    /// to `C`.
    Denoise { feature: ConvSpec, estimate: ConvSpec },
}

impl LayerSpec {
    pub fn kind(&self) -> LayerKind {
        match self {
            LayerSpec::Conv(c) => c.kind(),
            LayerSpec::Reshape { .. } => LayerKind::Reshape,
            LayerSpec::Denoise { .. } => LayerKind::DenoiseModule,
        }
    }

    /// Convolutions owned by this layer, in parameter order.
    pub fn convs(&self) -> Vec<&ConvSpec> {
        match self {
            LayerSpec::Conv(c) => vec![c],
            LayerSpec::Reshape { .. } => vec![],
            LayerSpec::Denoise { feature, estimate } => vec![feature, estimate],
        }
    }

    fn convs_mut(&mut self) -> Vec<&mut ConvSpec> {
        match self {
            LayerSpec::Conv(c) => vec![c],
            LayerSpec::Reshape { .. } => vec![],
            LayerSpec::Denoise { feature, estimate } => vec![feature, estimate],
        }
    }
}

/// Which network is built: PSCDN, or one of the six PSCN batch-norm placements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Pscdn,
    /// No batch norm anywhere.
    PscnA,
    /// First encoder conv batch-normalized.
    PscnB,
    /// First two encoder convs.
    PscnC,
    /// First three encoder convs.
    PscnD,
    /// All four encoder convs, including the code layer.
    PscnE,
    /// Every conv in the encoder and decoder.
    PscnF,
}

impl Variant {
    pub const ALL: [Variant; 7] =
        [Variant::Pscdn, Variant::PscnA, Variant::PscnB, Variant::PscnC, Variant::PscnD, Variant::PscnE, Variant::PscnF];

    pub const PSCN: [Variant; 6] =
        [Variant::PscnA, Variant::PscnB, Variant::PscnC, Variant::PscnD, Variant::PscnE, Variant::PscnF];

    pub fn denoising(self) -> bool {
        self == Variant::Pscdn
    }

    /// Wire tag used by the weights file.
    pub fn tag(self) -> u8 {
        match self {
            Variant::Pscdn => 0,
            Variant::PscnA => 1,
            Variant::PscnB => 2,
            Variant::PscnC => 3,
            Variant::PscnD => 4,
            Variant::PscnE => 5,
            Variant::PscnF => 6,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.get(tag as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Pscdn => "pscdn",
            Variant::PscnA => "pscn-a",
            Variant::PscnB => "pscn-b",
            Variant::PscnC => "pscn-c",
            Variant::PscnD => "pscn-d",
            Variant::PscnE => "pscn-e",
            Variant::PscnF => "pscn-f",
        }
    }

    /// Number of leading encoder convs that carry batch norm (variants a–e).
    fn encoder_bn_layers(self) -> usize {
        match self {
            Variant::Pscdn | Variant::PscnA => 0,
            Variant::PscnB => 1,
            Variant::PscnC => 2,
            Variant::PscnD => 3,
            Variant::PscnE | Variant::PscnF => 4,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let key = lower.strip_prefix("pscn-").or_else(|| lower.strip_prefix("pscn")).unwrap_or(&lower);
        Ok(match key {
            "pscdn" => Variant::Pscdn,
            "a" => Variant::PscnA,
            "b" => Variant::PscnB,
            "c" => Variant::PscnC,
            "d" => Variant::PscnD,
            "e" => Variant::PscnE,
            "f" => Variant::PscnF,
            _ => return Err(ModelError::Config(format!("unknown model variant {s:?}"))),
        })
    }
}

/// Full encoder/decoder description.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NetworkSpec {
    /// Bits per phase.
    pub k: usize,
    /// Code dimension.
    pub c: usize,
    /// Filters per hidden conv layer.
    pub n: usize,
    pub variant: Variant,
    pub encoder: Vec<LayerSpec>,
    pub decoder: Vec<LayerSpec>,
}

fn check_dims(k: usize, n: usize, c: usize) -> Result<(), ModelError> {
    if k < 2 {
        return Err(ModelError::Config(format!("need at least 2 bits per phase, got K = {k}")));
    }
    if c == 0 || c >= k {
        return Err(ModelError::Config(format!(
            "code dimension must satisfy 1 <= C < K (undercomplete), got C = {c}, K = {k}"
        )));
    }
    if n == 0 {
        return Err(ModelError::Config("filter count N must be positive".into()));
    }
    Ok(())
}

/// Encoder: three width-3 Conv+ReLU layers at length `K`, flatten to
/// `(K*N, 1)`, then a pointwise conv down to the `(C, 1)` code.
pub fn build_encoder(k: usize, n: usize, c: usize) -> Result<Vec<LayerSpec>, ModelError> {
    check_dims(k, n, c)?;
    Ok(vec![
        LayerSpec::Conv(ConvSpec::new(1, n, 3, Activation::Relu)),
        LayerSpec::Conv(ConvSpec::new(n, n, 3, Activation::Relu)),
        LayerSpec::Conv(ConvSpec::new(n, n, 3, Activation::Relu)),
        LayerSpec::Reshape { channels: k * n, length: 1 },
        LayerSpec::Conv(ConvSpec::new(k * n, c, 1, Activation::Identity)),
    ])
}

/// Decoder at spatial length 1. Both forms hold 11 convolutions and end with
/// a `K`-filter sigmoid layer read back as a `(1, K)` map.
pub fn build_decoder(k: usize, n: usize, c: usize, denoising: bool) -> Result<Vec<LayerSpec>, ModelError> {
    check_dims(k, n, c)?;
    let mut layers = Vec::with_capacity(12);
    let plain = if denoising {
        layers.push(LayerSpec::Denoise {
            feature: ConvSpec::new(c, n, 3, Activation::Relu),
            estimate: ConvSpec::new(c + n, c, 1, Activation::Identity),
        });
        8
    } else {
        10
    };
    for i in 0..plain {
        let cin = if i == 0 { c } else { n };
        layers.push(LayerSpec::Conv(ConvSpec::new(cin, n, 3, Activation::Relu)));
    }
    layers.push(LayerSpec::Conv(ConvSpec::new(n, k, 3, Activation::Sigmoid)));
    layers.push(LayerSpec::Reshape { channels: 1, length: k });
    Ok(layers)
}

/// PSCN with the given batch-norm placement (denoising module absent).
pub fn build_pscn_variant(variant: Variant, k: usize, n: usize, c: usize) -> Result<NetworkSpec, ModelError> {
    if variant == Variant::Pscdn {
        return Err(ModelError::Config("PSCDN is not a PSCN ablation variant".into()));
    }
    NetworkSpec::build(variant, k, n, c)
}

impl NetworkSpec {
    pub fn build(variant: Variant, k: usize, n: usize, c: usize) -> Result<Self, ModelError> {
        let mut encoder = build_encoder(k, n, c)?;
        let mut decoder = build_decoder(k, n, c, variant.denoising())?;
        let bn = variant.encoder_bn_layers();
        for conv in encoder.iter_mut().flat_map(LayerSpec::convs_mut).take(bn) {
            conv.batch_norm = true;
        }
        if variant == Variant::PscnF {
            for conv in decoder.iter_mut().flat_map(LayerSpec::convs_mut) {
                conv.batch_norm = true;
            }
        }
        let spec = Self { k, c, n, variant, encoder, decoder };
        spec.validate()?;
        Ok(spec)
    }

    pub fn pscdn(k: usize, n: usize, c: usize) -> Result<Self, ModelError> {
        Self::build(Variant::Pscdn, k, n, c)
    }

    /// Compression ratio `C / K`.
    pub fn compression_ratio(&self) -> f64 {
        self.c as f64 / self.k as f64
    }

    pub fn denoising(&self) -> bool {
        self.decoder.iter().any(|l| matches!(l, LayerSpec::Denoise { .. }))
    }

    /// All convolutions, encoder first, in parameter-store order.
    pub fn convs(&self) -> impl Iterator<Item = &ConvSpec> {
        self.encoder.iter().chain(&self.decoder).flat_map(|l| l.convs())
    }

    /// Spatial length each convolution runs at, in [`Self::convs`] order.
    pub fn conv_lengths(&self) -> Vec<usize> {
        let mut length = self.input_shape().1;
        let mut out = Vec::new();
        for layer in self.encoder.iter().chain(&self.decoder) {
            if let LayerSpec::Reshape { length: l, .. } = layer {
                length = *l;
            }
            out.extend(layer.convs().iter().map(|_| length));
        }
        out
    }

    pub fn encoder_conv_count(&self) -> usize {
        self.encoder.iter().map(|l| l.convs().len()).sum()
    }

    pub fn decoder_conv_count(&self) -> usize {
        self.decoder.iter().map(|l| l.convs().len()).sum()
    }

    pub fn batch_norm_count(&self) -> usize {
        self.convs().filter(|c| c.batch_norm).count()
    }

    pub fn uses_batch_norm(&self) -> bool {
        self.batch_norm_count() > 0
    }

    /// Weights plus biases over every convolution; batch-norm running
    /// statistics are not learned and are not counted.
    pub fn count_parameters(&self) -> usize {
        self.convs().map(ConvSpec::parameter_count).sum()
    }

    pub fn input_shape(&self) -> (usize, usize) {
        (1, self.k)
    }

    pub fn code_shape(&self) -> (usize, usize) {
        (self.c, 1)
    }

    /// Propagates shapes through both stages, checking every layer's input
    /// channels and the fixed layer budget.
    pub fn validate(&self) -> Result<(), ModelError> {
        check_dims(self.k, self.n, self.c)?;
        let code = propagate(&self.encoder, self.input_shape())?;
        if code != self.code_shape() {
            return Err(ModelError::Config(format!("encoder produces {code:?}, expected {:?}", self.code_shape())));
        }
        let out = propagate(&self.decoder, code)?;
        if out != self.input_shape() {
            return Err(ModelError::Config(format!("decoder produces {out:?}, expected {:?}", self.input_shape())));
        }
        let counts = (self.encoder_conv_count(), self.decoder_conv_count());
        if counts != (4, 11) {
            return Err(ModelError::Config(format!("expected (4, 11) conv layers, found {counts:?}")));
        }
        for conv in self.convs() {
            if conv.kernel_size != 1 && conv.kernel_size != 3 {
                return Err(ModelError::Config(format!("unsupported kernel size {}", conv.kernel_size)));
            }
        }
        Ok(())
    }
}

fn propagate(layers: &[LayerSpec], mut shape: (usize, usize)) -> Result<(usize, usize), ModelError> {
    for layer in layers {
        shape = match layer {
            LayerSpec::Conv(c) => {
                if c.in_channels != shape.0 {
                    return Err(ModelError::Config(format!(
                        "{} expects {} channels, receives {}",
                        c.kind(),
                        c.in_channels,
                        shape.0
                    )));
                }
                (c.out_channels, shape.1)
            }
            LayerSpec::Reshape { channels, length } => {
                if channels * length != shape.0 * shape.1 {
                    return Err(ModelError::Config(format!("cannot reshape {shape:?} to ({channels}, {length})")));
                }
                (*channels, *length)
            }
            LayerSpec::Denoise { feature, estimate } => {
                if feature.in_channels != shape.0
                    || estimate.in_channels != shape.0 + feature.out_channels
                    || estimate.out_channels != shape.0
                {
                    return Err(ModelError::Config("denoising module channel mismatch".into()));
                }
                shape
            }
        };
    }
    Ok(shape)
}
