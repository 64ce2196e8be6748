//! Run configuration: `key = value` lines with dotted keys and `#` comments.
//!
//! Every key has a default; unknown keys are rejected. [`RunConfig::to_text`]
//! writes every key in a fixed order, which is the canonical form.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{
    load_dataset, make_glyphs, make_swiss_roll, split, split_pairs, GlyphAttr, GlyphConfig, LabeledDataset, Proportions, Split,
};
use crate::models::{Arch, Betas, InputShape, ModelKind, ModelSpec, PriorSpec, TrainConfig};
use crate::nn::ImageShape;
use crate::numerics::{AdamConfig, LrSchedule};
use crate::stochastic::LabelMode;
use crate::{Error, Result};

/// Splits text into `(key, value)` pairs, rejecting malformed lines and
/// duplicate keys.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected `key = value`, got `{line}`", ln + 1)));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || k.contains(char::is_whitespace) {
            return Err(Error::Config(format!("line {}: malformed key `{k}`", ln + 1)));
        }
        if out.iter().any(|(seen, _)| seen == k) {
            return Err(Error::Config(format!("line {}: duplicate key `{k}`", ln + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

pub(crate) fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`")))
}

pub(crate) fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    if v.is_empty() || v == "none" {
        return Ok(Vec::new());
    }
    v.split(',').map(|p| num(key, p.trim())).collect()
}

pub(crate) fn join<T: Display>(v: &[T]) -> String {
    if v.is_empty() {
        return "none".into();
    }
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn opt<T: FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if v == "auto" {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

fn show_opt<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_else(|| "auto".into())
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got `{v}`"))),
    }
}

/// `3` for vectors, `HxWxC` for images.
pub fn parse_input_shape(v: &str) -> Option<InputShape> {
    let parts: Vec<&str> = v.split('x').collect();
    match parts[..] {
        [d] => d.parse().ok().filter(|&d: &usize| d > 0).map(InputShape::Vector),
        [h, w, c] => {
            let (height, width, channels) = (h.parse().ok()?, w.parse().ok()?, c.parse().ok()?);
            (height > 0 && width > 0 && channels > 0).then_some(InputShape::Image(ImageShape {
                channels,
                height,
                width,
            }))
        }
        _ => None,
    }
}

pub fn format_input_shape(s: &InputShape) -> String {
    match s {
        InputShape::Vector(d) => d.to_string(),
        InputShape::Image(i) => format!("{}x{}x{}", i.height, i.width, i.channels),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    SwissRoll,
    Glyphs,
}

impl Generator {
    pub fn as_str(self) -> &'static str {
        match self {
            Generator::SwissRoll => "swiss-roll",
            Generator::Glyphs => "glyphs",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "swiss-roll" => Some(Generator::SwissRoll),
            "glyphs" => Some(Generator::Glyphs),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub kind: ModelKind,
    /// `None` takes the dataset's example shape.
    pub input: Option<InputShape>,
    /// `None` takes the dataset's attribute count.
    pub k: Option<usize>,
    pub z_dim: usize,
    pub w_dim_per_attr: usize,
    pub arch: Arch,
    pub enc_hidden: Vec<usize>,
    pub dec_hidden: Vec<usize>,
    pub adv_hidden: Vec<usize>,
    pub conv_channels: Vec<usize>,
    /// `None` takes the kind's default weight.
    pub betas: [Option<f64>; 5],
    pub prior: PriorSpec,
    pub label_mode: LabelMode,
    pub logvar_clamp: f64,

    pub lr: f64,
    pub adam: AdamConfig,
    pub milestones: Vec<usize>,
    pub gamma: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adv_steps: usize,

    pub data_path: Option<PathBuf>,
    pub generator: Generator,
    pub n: usize,
    pub noise: f64,
    pub attrs: Vec<GlyphAttr>,
    pub paired: bool,
    pub standardize: bool,
    pub image_size: usize,
    pub split: Proportions,

    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kind: ModelKind::Csvae,
            input: None,
            k: None,
            z_dim: 2,
            w_dim_per_attr: 2,
            arch: Arch::Mlp,
            enc_hidden: vec![64, 64],
            dec_hidden: vec![64, 64],
            adv_hidden: vec![64, 64],
            conv_channels: vec![16, 32, 32],
            betas: [None; 5],
            prior: PriorSpec::standard(2),
            label_mode: LabelMode::Bernoulli,
            logvar_clamp: 7.0,
            lr: 5e-4,
            adam: AdamConfig::default(),
            milestones: vec![1, 3, 9, 27, 81, 243],
            gamma: 0.1f64.powf(1.0 / 7.0),
            batch_size: 64,
            epochs: 300,
            adv_steps: 1,
            data_path: None,
            generator: Generator::SwissRoll,
            n: 10000,
            noise: 0.0,
            attrs: vec![GlyphAttr::Stripes],
            paired: false,
            standardize: false,
            image_size: 32,
            split: Proportions::default(),
            seed: 0,
            out_dir: PathBuf::from("runs"),
        }
    }
}

/// Every accepted key, in canonical order.
pub const KEYS: &[&str] = &[
    "model.kind",
    "model.input",
    "model.k",
    "model.z_dim",
    "model.w_dim_per_attr",
    "model.arch",
    "model.enc_hidden",
    "model.dec_hidden",
    "model.adv_hidden",
    "model.conv_channels",
    "model.beta1",
    "model.beta2",
    "model.beta3",
    "model.beta4",
    "model.beta5",
    "model.prior_on_mean",
    "model.prior_on_sigma",
    "model.prior_off_mean",
    "model.prior_off_sigma",
    "model.label_mode",
    "model.logvar_clamp",
    "optim.lr",
    "optim.beta1",
    "optim.beta2",
    "optim.eps",
    "optim.milestones",
    "optim.gamma",
    "optim.batch_size",
    "optim.epochs",
    "optim.adv_steps",
    "data.path",
    "data.generator",
    "data.n",
    "data.noise",
    "data.attrs",
    "data.paired",
    "data.standardize",
    "data.image_size",
    "data.split",
    "seed",
    "out_dir",
];

impl RunConfig {
    /// Parses config text on top of the defaults. Referenced files must exist.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        for (k, v) in parse_kv(text)? {
            c.set(&k, &v)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let bad = || Error::Config(format!("{key}: invalid value `{v}`"));
        match key {
            "model.kind" => self.kind = ModelKind::parse(v).ok_or_else(bad)?,
            "model.input" => {
                self.input = if v == "auto" {
                    None
                } else {
                    Some(parse_input_shape(v).ok_or_else(bad)?)
                }
            }
            "model.k" => self.k = opt(key, v)?,
            "model.z_dim" => self.z_dim = num(key, v)?,
            "model.w_dim_per_attr" => self.w_dim_per_attr = num(key, v)?,
            "model.arch" => self.arch = Arch::parse(v).ok_or_else(bad)?,
            "model.enc_hidden" => self.enc_hidden = list(key, v)?,
            "model.dec_hidden" => self.dec_hidden = list(key, v)?,
            "model.adv_hidden" => self.adv_hidden = list(key, v)?,
            "model.conv_channels" => self.conv_channels = list(key, v)?,
            "model.beta1" => self.betas[0] = opt(key, v)?,
            "model.beta2" => self.betas[1] = opt(key, v)?,
            "model.beta3" => self.betas[2] = opt(key, v)?,
            "model.beta4" => self.betas[3] = opt(key, v)?,
            "model.beta5" => self.betas[4] = opt(key, v)?,
            "model.prior_on_mean" => self.prior.on_mean = list(key, v)?,
            "model.prior_on_sigma" => self.prior.on_sigma = list(key, v)?,
            "model.prior_off_mean" => self.prior.off_mean = list(key, v)?,
            "model.prior_off_sigma" => self.prior.off_sigma = list(key, v)?,
            "model.label_mode" => self.label_mode = LabelMode::parse(v).ok_or_else(bad)?,
            "model.logvar_clamp" => self.logvar_clamp = num(key, v)?,
            "optim.lr" => self.lr = num(key, v)?,
            "optim.beta1" => self.adam.beta1 = num(key, v)?,
            "optim.beta2" => self.adam.beta2 = num(key, v)?,
            "optim.eps" => self.adam.eps = num(key, v)?,
            "optim.milestones" => self.milestones = list(key, v)?,
            "optim.gamma" => self.gamma = num(key, v)?,
            "optim.batch_size" => self.batch_size = num(key, v)?,
            "optim.epochs" => self.epochs = num(key, v)?,
            "optim.adv_steps" => self.adv_steps = num(key, v)?,
            "data.path" => self.data_path = (!v.is_empty() && v != "none").then(|| PathBuf::from(v)),
            "data.generator" => self.generator = Generator::parse(v).ok_or_else(bad)?,
            "data.n" => self.n = num(key, v)?,
            "data.noise" => self.noise = num(key, v)?,
            "data.attrs" => {
                self.attrs = v
                    .split(',')
                    .map(|a| GlyphAttr::parse(a.trim()).ok_or_else(bad))
                    .collect::<Result<_>>()?
            }
            "data.paired" => self.paired = boolean(key, v)?,
            "data.standardize" => self.standardize = boolean(key, v)?,
            "data.image_size" => self.image_size = num(key, v)?,
            "data.split" => {
                let p: Vec<f64> = list(key, v)?;
                let p: [f64; 3] = p.try_into().map_err(|_| bad())?;
                self.split = Proportions(p);
            }
            "seed" => self.seed = num(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let s = match key {
            "model.kind" => self.kind.to_string(),
            "model.input" => self.input.as_ref().map(format_input_shape).unwrap_or_else(|| "auto".into()),
            "model.k" => show_opt(&self.k),
            "model.z_dim" => self.z_dim.to_string(),
            "model.w_dim_per_attr" => self.w_dim_per_attr.to_string(),
            "model.arch" => self.arch.as_str().into(),
            "model.enc_hidden" => join(&self.enc_hidden),
            "model.dec_hidden" => join(&self.dec_hidden),
            "model.adv_hidden" => join(&self.adv_hidden),
            "model.conv_channels" => join(&self.conv_channels),
            "model.beta1" => show_opt(&self.betas[0]),
            "model.beta2" => show_opt(&self.betas[1]),
            "model.beta3" => show_opt(&self.betas[2]),
            "model.beta4" => show_opt(&self.betas[3]),
            "model.beta5" => show_opt(&self.betas[4]),
            "model.prior_on_mean" => join(&self.prior.on_mean),
            "model.prior_on_sigma" => join(&self.prior.on_sigma),
            "model.prior_off_mean" => join(&self.prior.off_mean),
            "model.prior_off_sigma" => join(&self.prior.off_sigma),
            "model.label_mode" => self.label_mode.as_str().into(),
            "model.logvar_clamp" => self.logvar_clamp.to_string(),
            "optim.lr" => self.lr.to_string(),
            "optim.beta1" => self.adam.beta1.to_string(),
            "optim.beta2" => self.adam.beta2.to_string(),
            "optim.eps" => self.adam.eps.to_string(),
            "optim.milestones" => join(&self.milestones),
            "optim.gamma" => self.gamma.to_string(),
            "optim.batch_size" => self.batch_size.to_string(),
            "optim.epochs" => self.epochs.to_string(),
            "optim.adv_steps" => self.adv_steps.to_string(),
            "data.path" => self
                .data_path
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "none".into()),
            "data.generator" => self.generator.as_str().into(),
            "data.n" => self.n.to_string(),
            "data.noise" => self.noise.to_string(),
            "data.attrs" => self.attrs.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(","),
            "data.paired" => self.paired.to_string(),
            "data.standardize" => self.standardize.to_string(),
            "data.image_size" => self.image_size.to_string(),
            "data.split" => join(&self.split.0),
            "seed" => self.seed.to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            _ => return None,
        };
        Some(s)
    }

    /// Canonical text: every key in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in KEYS {
            s.push_str(&format!("{k} = {}\n", self.get(k).expect("known key")));
        }
        s
    }

    /// Range checks that do not need the dataset. Does not touch the file
    /// system except for `data.path`.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.z_dim == 0 || self.w_dim_per_attr == 0 {
            return bad("model.z_dim and model.w_dim_per_attr must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("optim.batch_size must be positive".into());
        }
        if self.epochs == 0 {
            return bad("optim.epochs must be at least 1".into());
        }
        if self.adv_steps == 0 {
            return bad("optim.adv_steps must be at least 1".into());
        }
        self.schedule()?;
        self.split.validate().map_err(|e| Error::Config(e.to_string()))?;
        if let Some(p) = &self.data_path {
            if !p.exists() {
                return Err(Error::MissingFile(p.clone()));
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<LrSchedule> {
        LrSchedule::new(self.lr, self.milestones.clone(), self.gamma).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            schedule: self.schedule()?,
            adam: self.adam,
            adv_steps: self.adv_steps,
            seed: self.seed,
        })
    }

    pub fn resolved_betas(&self) -> Betas {
        let d = ModelSpec::default_betas(self.kind).0;
        Betas(std::array::from_fn(|i| self.betas[i].unwrap_or(d[i])))
    }

    /// Model spec for data of shape `input` with `k` attributes; explicit
    /// `model.input` / `model.k` values must agree with the data.
    pub fn model_spec(&self, input: InputShape, k: usize) -> Result<ModelSpec> {
        if let Some(i) = self.input {
            if i != input {
                return Err(Error::Config(format!(
                    "model.input = {} but the data has shape {}",
                    format_input_shape(&i),
                    format_input_shape(&input)
                )));
            }
        }
        if let Some(kk) = self.k {
            if kk != k {
                return Err(Error::Config(format!("model.k = {kk} but the data has {k} attributes")));
            }
        }
        let spec = ModelSpec {
            kind: self.kind,
            input,
            z_dim: self.z_dim,
            k,
            w_dim_per_attr: self.w_dim_per_attr,
            arch: self.arch,
            enc_hidden: self.enc_hidden.clone(),
            dec_hidden: self.dec_hidden.clone(),
            adv_hidden: self.adv_hidden.clone(),
            conv_channels: self.conv_channels.clone(),
            betas: self.resolved_betas(),
            prior: self.prior.clone(),
            label_mode: self.label_mode,
            logvar_clamp: self.logvar_clamp,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Fills `model.input`, `model.k` and the betas from a concrete spec, so
    /// the echo stored in a checkpoint rebuilds the same model.
    pub fn resolve(&mut self, spec: &ModelSpec) {
        self.input = Some(spec.input);
        self.k = Some(spec.k);
        self.betas = spec.betas.0.map(Some);
    }

    /// Generates and splits the dataset described by the `data.*` keys.
    pub fn generate_dataset(&self) -> Result<LabeledDataset> {
        let d = match self.generator {
            Generator::SwissRoll => split(make_swiss_roll(self.n, self.noise, self.seed)?, self.split, self.seed),
            Generator::Glyphs => {
                let d = make_glyphs(&self.glyph_config(), self.n, self.seed)?;
                if self.paired {
                    split_pairs(d, 0, self.split, self.seed)
                } else {
                    split(d, self.split, self.seed)
                }
            }
        }?;
        if self.standardize {
            d.standardized(Split::Train)
        } else {
            Ok(d)
        }
    }

    /// The file named by `data.path`, or else a freshly generated dataset.
    pub fn dataset(&self) -> Result<LabeledDataset> {
        match &self.data_path {
            Some(p) => load_dataset(p),
            None => self.generate_dataset(),
        }
    }

    pub fn glyph_config(&self) -> GlyphConfig {
        GlyphConfig {
            size: self.image_size,
            attrs: self.attrs.clone(),
            paired: self.paired,
            ..GlyphConfig::default()
        }
    }
}
