use crate::nn::{Bind, ConvDecoder, ConvEncoder, ImageShape, Mlp};
use crate::numerics::{Graph, ParamId, ParamStore, Var};
use crate::rng::StreamRng;
use crate::stochastic::{GaussianVars, LabelMode};

use super::spec::{Arch, InputShape, ModelSpec};

/// Feature extractor shared by encoders and classifiers: identity for MLP
/// models, a convolution stack for images.
#[derive(Clone, Debug, PartialEq)]
enum Features {
    Flat(usize),
    Conv(ConvEncoder),
}

impl Features {
    fn new(store: &mut ParamStore, name: &str, input: InputShape, arch: Arch, channels: &[usize], rng: &mut StreamRng) -> Self {
        match (arch, input) {
            (Arch::Conv, InputShape::Image(shape)) => {
                Features::Conv(ConvEncoder::new(store, &format!("{name}.features"), shape, channels, rng))
            }
            _ => Features::Flat(input.numel()),
        }
    }

    fn out_dim(&self) -> usize {
        match self {
            Features::Flat(d) => *d,
            Features::Conv(c) => c.out_dim(),
        }
    }

    fn forward(&self, g: &Graph, store: &ParamStore, x: Var, mode: Bind) -> Var {
        match self {
            Features::Flat(_) => x,
            Features::Conv(c) => c.forward(g, store, x, mode),
        }
    }

    fn params(&self) -> Vec<ParamId> {
        match self {
            Features::Flat(_) => Vec::new(),
            Features::Conv(c) => c.params(),
        }
    }
}

/// Gaussian posterior network `q(. | x, cond)` with a joint mean/log-variance
/// head.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianEncoder {
    features: Features,
    head: Mlp,
    cond_dim: usize,
    out_dim: usize,
}

impl GaussianEncoder {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        spec: &ModelSpec,
        cond_dim: usize,
        out_dim: usize,
        rng: &mut StreamRng,
    ) -> Self {
        let features = Features::new(store, name, spec.input, spec.arch, &spec.conv_channels, rng);
        let mut widths = vec![features.out_dim() + cond_dim];
        widths.extend(&spec.enc_hidden);
        widths.push(2 * out_dim);
        let head = Mlp::new(store, &format!("{name}.head"), &widths, rng);
        GaussianEncoder {
            features,
            head,
            cond_dim,
            out_dim,
        }
    }

    /// Width of the first dense layer: feature dimension plus conditioning.
    pub fn in_dim(&self) -> usize {
        self.head.in_dim()
    }

    pub fn cond_dim(&self) -> usize {
        self.cond_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn forward(&self, g: &Graph, store: &ParamStore, x: Var, cond: Option<Var>, mode: Bind) -> GaussianVars {
        let f = self.features.forward(g, store, x, mode);
        let h = match cond {
            Some(c) if self.cond_dim > 0 => g.concat_cols(&[f, c]),
            _ => f,
        };
        let out = self.head.forward(g, store, h, mode, false);
        GaussianVars {
            mu: g.slice_cols(out, 0, self.out_dim),
            log_var: g.slice_cols(out, self.out_dim, self.out_dim),
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut ids = self.features.params();
        ids.extend(self.head.params());
        ids
    }
}

#[derive(Clone, Debug, PartialEq)]
enum DecoderBody {
    Mlp(Mlp),
    Conv { stem: Mlp, deconv: ConvDecoder, shape: ImageShape },
}

/// Gaussian likelihood `p(x | latent)`; the log-variance is clamped to
/// `[-c, c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianDecoder {
    body: DecoderBody,
    x_dim: usize,
    clamp: f64,
}

impl GaussianDecoder {
    pub fn new(store: &mut ParamStore, name: &str, spec: &ModelSpec, latent_dim: usize, rng: &mut StreamRng) -> Self {
        let x_dim = spec.input.numel();
        let body = match (spec.arch, spec.input) {
            (Arch::Conv, InputShape::Image(shape)) => {
                let channels: Vec<usize> = spec.conv_channels.iter().rev().copied().collect();
                let deconv = ConvDecoder::new(store, &format!("{name}.deconv"), shape, &channels, 2 * shape.channels, rng);
                let mut widths = vec![latent_dim];
                widths.extend(&spec.dec_hidden);
                widths.push(deconv.seed_shape.numel());
                let stem = Mlp::new(store, &format!("{name}.stem"), &widths, rng);
                DecoderBody::Conv { stem, deconv, shape }
            }
            _ => {
                let mut widths = vec![latent_dim];
                widths.extend(&spec.dec_hidden);
                widths.push(2 * x_dim);
                DecoderBody::Mlp(Mlp::new(store, &format!("{name}.head"), &widths, rng))
            }
        };
        GaussianDecoder {
            body,
            x_dim,
            clamp: spec.logvar_clamp,
        }
    }

    pub fn x_dim(&self) -> usize {
        self.x_dim
    }

    pub fn latent_dim(&self) -> usize {
        match &self.body {
            DecoderBody::Mlp(m) => m.in_dim(),
            DecoderBody::Conv { stem, .. } => stem.in_dim(),
        }
    }

    pub fn forward(&self, g: &Graph, store: &ParamStore, input: Var, mode: Bind) -> GaussianVars {
        let out = match &self.body {
            DecoderBody::Mlp(m) => m.forward(g, store, input, mode, false),
            DecoderBody::Conv { stem, deconv, .. } => {
                let h = stem.forward(g, store, input, mode, true);
                deconv.forward(g, store, h, mode)
            }
        };
        // Output layout is `[mu | log_var]`; for images that is channel-major.
        let mu = g.slice_cols(out, 0, self.x_dim);
        let log_var = g.clamp(g.slice_cols(out, self.x_dim, self.x_dim), -self.clamp, self.clamp);
        GaussianVars { mu, log_var }
    }

    pub fn params(&self) -> Vec<ParamId> {
        match &self.body {
            DecoderBody::Mlp(m) => m.params(),
            DecoderBody::Conv { stem, deconv, .. } => {
                let mut ids = stem.params();
                ids.extend(deconv.params());
                ids
            }
        }
    }

    pub fn image_shape(&self) -> Option<ImageShape> {
        match &self.body {
            DecoderBody::Conv { shape, .. } => Some(*shape),
            DecoderBody::Mlp(_) => None,
        }
    }
}

/// Architecture of a standalone or adversarial classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierSpec {
    pub input: InputShape,
    pub arch: Arch,
    pub conv_channels: Vec<usize>,
    pub hidden: Vec<usize>,
    pub outputs: usize,
    pub label_mode: LabelMode,
}

impl ClassifierSpec {
    pub fn vector(in_dim: usize, hidden: &[usize], outputs: usize) -> Self {
        ClassifierSpec {
            input: InputShape::Vector(in_dim),
            arch: Arch::Mlp,
            conv_channels: Vec::new(),
            hidden: hidden.to_vec(),
            outputs,
            label_mode: LabelMode::Bernoulli,
        }
    }

    /// Same family as the model encoders for `spec`.
    pub fn like_encoder(spec: &ModelSpec) -> Self {
        ClassifierSpec {
            input: spec.input,
            arch: spec.arch,
            conv_channels: spec.conv_channels.clone(),
            hidden: spec.enc_hidden.clone(),
            outputs: spec.label_logits(),
            label_mode: spec.label_mode,
        }
    }
}

/// Logit network: features followed by an MLP (no hidden layers gives a
/// linear classifier).
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    spec: ClassifierSpec,
    features: Features,
    head: Mlp,
}

impl Classifier {
    pub fn new(store: &mut ParamStore, name: &str, spec: &ClassifierSpec, rng: &mut StreamRng) -> Self {
        let features = Features::new(store, name, spec.input, spec.arch, &spec.conv_channels, rng);
        let mut widths = vec![features.out_dim()];
        widths.extend(&spec.hidden);
        widths.push(spec.outputs);
        let head = Mlp::new(store, &format!("{name}.head"), &widths, rng);
        Classifier {
            spec: spec.clone(),
            features,
            head,
        }
    }

    pub fn new_vector(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        hidden: &[usize],
        outputs: usize,
        rng: &mut StreamRng,
    ) -> Self {
        Self::new(store, name, &ClassifierSpec::vector(in_dim, hidden, outputs), rng)
    }

    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn forward(&self, g: &Graph, store: &ParamStore, x: Var, mode: Bind) -> Var {
        let f = self.features.forward(g, store, x, mode);
        self.head.forward(g, store, f, mode, false)
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut ids = self.features.params();
        ids.extend(self.head.params());
        ids
    }
}
