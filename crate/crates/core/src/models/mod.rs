//! The four model families and their training.
//!
//! | kind           | z encoder  | w encoder | decoder input | adversary |
//! |----------------|------------|-----------|---------------|-----------|
//! | `vae`          | `q(z|x)`   | -         | `z`           | -         |
//! | `condvae`      | `q(z|x,y)` | -         | `[z, y]`      | -         |
//! | `condvae_info` | `q(z|x)`   | -         | `[z, y]`      | `r(y|z)`  |
//! | `csvae`        | `q(z|x)`   | `q(w|x,y)`| `[z, w]`      | `q(y|z)`  |

mod loss;
mod network;
mod spec;
mod train;

pub use loss::{LatentNoise, LossBreakdown, LossGraph};
pub use network::{Classifier, ClassifierSpec, GaussianDecoder, GaussianEncoder};
pub use spec::{Arch, Betas, InputShape, ModelKind, ModelSpec, PriorSpec};
pub use train::{train, TrainConfig, Trainer};

use crate::numerics::{Graph, ParamId, ParamStore, Tensor};
use crate::rng::{domain, StreamRng};
use crate::stochastic::DiagGaussian;
use crate::{exec, Error, Result};
use crate::nn::Bind;

/// Latent posterior means `(z, w)`; `w` is present only for CSVAE and is
/// viewed as `k` consecutive blocks of `w_dim_per_attr` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentCode {
    pub z: Vec<f64>,
    pub w: Option<Vec<f64>>,
    pub w_dim_per_attr: usize,
}

impl LatentCode {
    pub fn w_block(&self, i: usize) -> Option<&[f64]> {
        let d = self.w_dim_per_attr;
        self.w.as_deref().map(|w| &w[i * d..(i + 1) * d])
    }
}

/// Batched latent means: `z` is `[n, z_dim]`, `w` is `[n, k * w_dim]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentBatch {
    pub z: Tensor,
    pub w: Option<Tensor>,
}

/// Rows per chunk for batched inference.
const INFER_CHUNK: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    store: ParamStore,
    enc_z: GaussianEncoder,
    enc_w: Option<GaussianEncoder>,
    dec: GaussianDecoder,
    adversary: Option<Classifier>,
}

impl Model {
    /// Builds a freshly initialised model; initial weights are a pure
    /// function of `(spec, seed)`.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut store = ParamStore::new();
        let mut rng = StreamRng::new(seed, domain::INIT, 0);
        let k = spec.k;
        let x_dim = spec.input.numel();
        let (enc_cond, dec_cond) = match spec.kind {
            ModelKind::Vae => (0, 0),
            ModelKind::CondVae => (k, k),
            ModelKind::CondVaeInfo => (0, k),
            ModelKind::Csvae => (0, spec.w_dim()),
        };
        let enc_z = GaussianEncoder::new(&mut store, "enc_z", &spec, enc_cond, spec.z_dim, &mut rng);
        let enc_w = (spec.kind == ModelKind::Csvae)
            .then(|| GaussianEncoder::new(&mut store, "enc_w", &spec, k, spec.w_dim(), &mut rng));
        let dec = GaussianDecoder::new(&mut store, "dec", &spec, spec.z_dim + dec_cond, &mut rng);
        let adversary = matches!(spec.kind, ModelKind::CondVaeInfo | ModelKind::Csvae).then(|| {
            Classifier::new_vector(&mut store, "adv", spec.z_dim, &spec.adv_hidden, spec.label_logits(), &mut rng)
        });
        debug_assert_eq!(dec.x_dim(), x_dim);
        store.round_to_f32();
        Ok(Model {
            spec,
            store,
            enc_z,
            enc_w,
            dec,
            adversary,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Encoder and decoder parameters (`theta`, `phi`).
    pub fn main_params(&self) -> Vec<ParamId> {
        let mut ids = self.enc_z.params();
        if let Some(e) = &self.enc_w {
            ids.extend(e.params());
        }
        ids.extend(self.dec.params());
        ids
    }

    pub fn encoder_params(&self) -> Vec<ParamId> {
        let mut ids = self.enc_z.params();
        if let Some(e) = &self.enc_w {
            ids.extend(e.params());
        }
        ids
    }

    pub fn decoder_params(&self) -> Vec<ParamId> {
        self.dec.params()
    }

    /// Adversary parameters (`delta` for CSVAE, `psi` for CondVAE-info).
    pub fn adversary_params(&self) -> Vec<ParamId> {
        self.adversary.as_ref().map(Classifier::params).unwrap_or_default()
    }

    pub fn has_adversary(&self) -> bool {
        self.adversary.is_some()
    }

    /// Prior over W for one label vector: block `i` takes the attribute-on
    /// parameters when `y_i = 1`, the attribute-off ones otherwise.
    pub fn w_prior(&self, y: &[f64]) -> Result<DiagGaussian> {
        w_prior(y, &self.spec)
    }

    fn check_conditioning(&self, y: Option<&Tensor>, n: usize) -> Result<()> {
        match (self.spec.kind, y) {
            (ModelKind::Vae, Some(_)) => Err(Error::InvalidArgument("vae encoder takes no label".into())),
            (ModelKind::Vae, None) => Ok(()),
            (_, None) => Err(Error::InvalidArgument(format!("{} encoder requires labels", self.spec.kind))),
            (_, Some(y)) if y.shape() != [n, self.spec.k] => Err(Error::Shape(format!(
                "labels have shape {:?}, expected [{n}, {}]",
                y.shape(),
                self.spec.k
            ))),
            _ => Ok(()),
        }
    }

    fn check_x(&self, x: &Tensor) -> Result<usize> {
        if x.shape().len() < 2 || x.row_len() != self.spec.input.numel() {
            return Err(Error::Shape(format!(
                "inputs have shape {:?}, expected rows of {}",
                x.shape(),
                self.spec.input.numel()
            )));
        }
        Ok(x.rows())
    }

    /// Posterior means for a batch. `y` is required except for `vae`.
    pub fn encode_batch(&self, x: &Tensor, y: Option<&Tensor>) -> Result<LatentBatch> {
        let n = self.check_x(x)?;
        self.check_conditioning(y, n)?;
        let chunks = n.div_ceil(INFER_CHUNK);
        let parts = exec::map_indexed(chunks, |c| {
            let idx: Vec<usize> = (c * INFER_CHUNK..((c + 1) * INFER_CHUNK).min(n)).collect();
            let g = Graph::new();
            let xv = g.constant(x.select_rows(&idx).reshape(&[idx.len(), x.row_len()]).expect("flat rows"));
            let yv = y.map(|y| g.constant(y.select_rows(&idx)));
            let z_cond = if self.spec.kind == ModelKind::CondVae { yv } else { None };
            let qz = self.enc_z.forward(&g, &self.store, xv, z_cond, Bind::Frozen);
            let w = self
                .enc_w
                .as_ref()
                .map(|e| g.value(e.forward(&g, &self.store, xv, yv, Bind::Frozen).mu));
            (g.value(qz.mu), w)
        });
        let z = concat_rows(parts.iter().map(|p| &p.0))?;
        let w = if self.enc_w.is_some() {
            Some(concat_rows(parts.iter().map(|p| p.1.as_ref().expect("w block")))?)
        } else {
            None
        };
        Ok(LatentBatch { z, w })
    }

    /// Posterior means of one example.
    pub fn encode(&self, x: &[f64], y: Option<&[f64]>) -> Result<LatentCode> {
        let xt = Tensor::matrix(1, x.len(), x.to_vec())?;
        let yt = y.map(|y| Tensor::matrix(1, y.len().max(1), y.to_vec())).transpose()?;
        let b = self.encode_batch(&xt, yt.as_ref())?;
        Ok(LatentCode {
            z: b.z.into_data(),
            w: b.w.map(Tensor::into_data),
            w_dim_per_attr: self.spec.w_dim_per_attr,
        })
    }

    /// Width of the decoder's conditioning input (`y` or `w`).
    pub fn decoder_cond_dim(&self) -> usize {
        match self.spec.kind {
            ModelKind::Vae => 0,
            ModelKind::CondVae | ModelKind::CondVaeInfo => self.spec.k,
            ModelKind::Csvae => self.spec.w_dim(),
        }
    }

    /// Decoder mean and log-variance for latent `z` plus the conditioning
    /// block (`label` for the conditional models, `w` for CSVAE).
    pub fn decode_batch(&self, z: &Tensor, cond: Option<&Tensor>) -> Result<(Tensor, Tensor)> {
        let n = z.rows();
        if z.row_len() != self.spec.z_dim {
            return Err(Error::Shape(format!("z rows have {} entries, expected {}", z.row_len(), self.spec.z_dim)));
        }
        let cd = self.decoder_cond_dim();
        match cond {
            None if cd > 0 => {
                return Err(Error::InvalidArgument(format!("{} decoder requires a conditioning block", self.spec.kind)))
            }
            Some(_) if cd == 0 => return Err(Error::InvalidArgument("vae decoder takes no conditioning".into())),
            Some(c) if c.shape() != [n, cd] => {
                return Err(Error::Shape(format!("conditioning has shape {:?}, expected [{n}, {cd}]", c.shape())))
            }
            _ => {}
        }
        let chunks = n.div_ceil(INFER_CHUNK);
        let parts = exec::map_indexed(chunks, |c| {
            let idx: Vec<usize> = (c * INFER_CHUNK..((c + 1) * INFER_CHUNK).min(n)).collect();
            let g = Graph::new();
            let zv = g.constant(z.select_rows(&idx));
            let input = match cond {
                Some(cv) => g.concat_cols(&[zv, g.constant(cv.select_rows(&idx))]),
                None => zv,
            };
            let p = self.dec.forward(&g, &self.store, input, Bind::Frozen);
            (g.value(p.mu), g.value(p.log_var))
        });
        Ok((concat_rows(parts.iter().map(|p| &p.0))?, concat_rows(parts.iter().map(|p| &p.1))?))
    }

    /// Decoder distribution for one latent code.
    pub fn decode(&self, z: &[f64], cond: Option<&[f64]>) -> Result<DiagGaussian> {
        let zt = Tensor::matrix(1, z.len(), z.to_vec())?;
        let ct = cond.map(|c| Tensor::matrix(1, c.len(), c.to_vec())).transpose()?;
        let (mu, lv) = self.decode_batch(&zt, ct.as_ref())?;
        DiagGaussian::new(mu.into_data(), lv.into_data())
    }

    /// Adversary logits on latent `z` rows (`None` for kinds without one).
    pub fn adversary_logits(&self, z: &Tensor) -> Option<Tensor> {
        let adv = self.adversary.as_ref()?;
        let g = Graph::new();
        let zv = g.constant(z.clone());
        Some(g.value(adv.forward(&g, &self.store, zv, Bind::Frozen)))
    }

    pub(crate) fn parts(&self) -> (&GaussianEncoder, Option<&GaussianEncoder>, &GaussianDecoder, Option<&Classifier>) {
        (&self.enc_z, self.enc_w.as_ref(), &self.dec, self.adversary.as_ref())
    }
}

pub(crate) fn concat_rows<'a>(parts: impl Iterator<Item = &'a Tensor>) -> Result<Tensor> {
    let parts: Vec<&Tensor> = parts.collect();
    let w = parts[0].row_len();
    let n: usize = parts.iter().map(|p| p.rows()).sum();
    let mut data = Vec::with_capacity(n * w);
    for p in &parts {
        data.extend_from_slice(p.data());
    }
    Tensor::matrix(n, w, data)
}

/// Block-diagonal prior over W for label vector `y`.
pub fn w_prior(y: &[f64], spec: &ModelSpec) -> Result<DiagGaussian> {
    if y.len() != spec.k {
        return Err(Error::Shape(format!("label has {} entries, expected k = {}", y.len(), spec.k)));
    }
    let mut mu = Vec::with_capacity(spec.w_dim());
    let mut sigma = Vec::with_capacity(spec.w_dim());
    for &yi in y {
        let (m, s) = if yi == 1.0 {
            (&spec.prior.on_mean, &spec.prior.on_sigma)
        } else {
            (&spec.prior.off_mean, &spec.prior.off_sigma)
        };
        mu.extend_from_slice(m);
        sigma.extend_from_slice(s);
    }
    DiagGaussian::from_sigma(mu, &sigma)
}
