use std::fmt;

use crate::nn::ImageShape;
use crate::stochastic::LabelMode;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Vae,
    CondVae,
    CondVaeInfo,
    Csvae,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Vae, ModelKind::CondVae, ModelKind::CondVaeInfo, ModelKind::Csvae];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Vae => "vae",
            ModelKind::CondVae => "condvae",
            ModelKind::CondVaeInfo => "condvae_info",
            ModelKind::Csvae => "csvae",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Byte tag used in checkpoints.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arch {
    Mlp,
    Conv,
}

impl Arch {
    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Mlp => "mlp",
            Arch::Conv => "conv",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mlp" => Some(Arch::Mlp),
            "conv" => Some(Arch::Conv),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputShape {
    Vector(usize),
    Image(ImageShape),
}

impl InputShape {
    pub fn numel(&self) -> usize {
        match self {
            InputShape::Vector(d) => *d,
            InputShape::Image(s) => s.numel(),
        }
    }

    /// Per-example dimensions as stored in dataset files.
    pub fn dims(&self) -> Vec<usize> {
        match self {
            InputShape::Vector(d) => vec![*d],
            InputShape::Image(s) => vec![s.height, s.width, s.channels],
        }
    }
}

/// Loss weights. For CSVAE: `main = recon*b1 + kl_w*b2 + kl_z*b3 + m2*b4`,
/// `adversary = n*b5`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Betas(pub [f64; 5]);

impl Betas {
    /// `(20, 1, 0.2, 10, 1)`.
    pub const CSVAE: Betas = Betas([20.0, 1.0, 0.2, 10.0, 1.0]);
    pub const UNIT: Betas = Betas([1.0; 5]);

    pub fn recon(&self) -> f64 {
        self.0[0]
    }
    pub fn kl_w(&self) -> f64 {
        self.0[1]
    }
    pub fn kl_z(&self) -> f64 {
        self.0[2]
    }
    pub fn m2(&self) -> f64 {
        self.0[3]
    }
    pub fn adversary(&self) -> f64 {
        self.0[4]
    }
}

/// Per-block prior parameters for W. Vectors have `w_dim_per_attr` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorSpec {
    pub on_mean: Vec<f64>,
    pub on_sigma: Vec<f64>,
    pub off_mean: Vec<f64>,
    pub off_sigma: Vec<f64>,
}

impl PriorSpec {
    /// Attribute present: `N((3,..,3), 1)`; absent: `N(0, 0.1^2)`.
    pub fn standard(w_dim: usize) -> Self {
        PriorSpec {
            on_mean: vec![3.0; w_dim],
            on_sigma: vec![1.0; w_dim],
            off_mean: vec![0.0; w_dim],
            off_sigma: vec![0.1; w_dim],
        }
    }

    /// Mean and sigma for an attribute state.
    pub fn block(&self, on: bool) -> (&[f64], &[f64]) {
        if on {
            (&self.on_mean, &self.on_sigma)
        } else {
            (&self.off_mean, &self.off_sigma)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input: InputShape,
    pub z_dim: usize,
    /// Number of binary attributes.
    pub k: usize,
    pub w_dim_per_attr: usize,
    pub arch: Arch,
    pub enc_hidden: Vec<usize>,
    pub dec_hidden: Vec<usize>,
    pub adv_hidden: Vec<usize>,
    /// Channel widths of the convolutional stages (conv arch only).
    pub conv_channels: Vec<usize>,
    pub betas: Betas,
    pub prior: PriorSpec,
    pub label_mode: LabelMode,
    /// Decoder log-variance is clamped to `[-c, c]`.
    pub logvar_clamp: f64,
}

impl ModelSpec {
    /// Defaults for vector data: MLPs with two hidden layers of width 64.
    pub fn vector(kind: ModelKind, x_dim: usize, k: usize) -> Self {
        ModelSpec {
            kind,
            input: InputShape::Vector(x_dim),
            z_dim: 2,
            k,
            w_dim_per_attr: 2,
            arch: Arch::Mlp,
            enc_hidden: vec![64, 64],
            dec_hidden: vec![64, 64],
            adv_hidden: vec![64, 64],
            conv_channels: Vec::new(),
            betas: Self::default_betas(kind),
            prior: PriorSpec::standard(2),
            label_mode: LabelMode::Bernoulli,
            logvar_clamp: 7.0,
        }
    }

    /// Defaults for images: three stride-2 convolution stages.
    pub fn image(kind: ModelKind, shape: ImageShape, k: usize) -> Self {
        ModelSpec {
            input: InputShape::Image(shape),
            z_dim: 8,
            arch: Arch::Conv,
            enc_hidden: vec![128],
            dec_hidden: vec![128],
            conv_channels: vec![16, 32, 32],
            ..Self::vector(kind, shape.numel(), k)
        }
    }

    pub fn default_betas(kind: ModelKind) -> Betas {
        match kind {
            ModelKind::Csvae => Betas::CSVAE,
            _ => Betas::UNIT,
        }
    }

    /// Total W dimension (zero for kinds without a W subspace).
    pub fn w_dim(&self) -> usize {
        if self.kind == ModelKind::Csvae {
            self.k * self.w_dim_per_attr
        } else {
            0
        }
    }

    pub fn label_logits(&self) -> usize {
        self.k
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.input.numel() == 0 {
            return bad("input dimension must be positive".into());
        }
        if self.z_dim == 0 {
            return bad("z_dim must be positive".into());
        }
        if self.kind != ModelKind::Vae && self.k == 0 {
            return bad(format!("{} needs at least one attribute", self.kind));
        }
        if self.kind == ModelKind::Csvae && self.w_dim_per_attr == 0 {
            return bad("csvae needs w_dim_per_attr >= 1".into());
        }
        if self.betas.0.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return bad(format!("betas must be positive: {:?}", self.betas.0));
        }
        let p = &self.prior;
        for (name, v) in [
            ("prior_on_mean", &p.on_mean),
            ("prior_on_sigma", &p.on_sigma),
            ("prior_off_mean", &p.off_mean),
            ("prior_off_sigma", &p.off_sigma),
        ] {
            if v.len() != self.w_dim_per_attr {
                return bad(format!("{name} has {} entries, w_dim_per_attr is {}", v.len(), self.w_dim_per_attr));
            }
        }
        if p.on_sigma.iter().chain(&p.off_sigma).any(|s| !(*s > 0.0)) {
            return bad("prior sigmas must be positive".into());
        }
        if !(self.logvar_clamp > 0.0) {
            return bad("logvar_clamp must be positive".into());
        }
        if self.arch == Arch::Conv {
            let InputShape::Image(s) = self.input else {
                return bad("conv architecture needs image input".into());
            };
            let f = 1usize << self.conv_channels.len();
            if self.conv_channels.is_empty() || s.height % f != 0 || s.width % f != 0 {
                return bad(format!(
                    "image {}x{} is not divisible by 2^{} conv stages",
                    s.height,
                    s.width,
                    self.conv_channels.len()
                ));
            }
        }
        if self.enc_hidden.contains(&0) || self.dec_hidden.contains(&0) || self.adv_hidden.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        Ok(())
    }
}
