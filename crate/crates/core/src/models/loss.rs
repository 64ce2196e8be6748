use crate::nn::Bind;
use crate::numerics::{Graph, Tensor, Var};
use crate::rng::StreamRng;
use crate::stochastic::{
    cross_entropy_batch, gaussian_nll_batch, kl_diag_gaussians_batch, kl_standard_normal_batch, neg_entropy_batch,
    reparam_sample_batch, GaussianVars,
};
use crate::{Error, Result};

use super::{Model, ModelKind};

/// Per-example means of the loss terms plus their weighted totals. Terms a
/// model kind does not have are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub recon: f64,
    pub kl_w: f64,
    pub kl_z: f64,
    pub m2: f64,
    pub n: f64,
    pub main_total: f64,
    pub adversary_total: f64,
}

impl LossBreakdown {
    pub const FIELDS: [&'static str; 7] = ["recon", "kl_w", "kl_z", "m2", "n", "main_total", "adversary_total"];

    pub fn values(&self) -> [f64; 7] {
        [self.recon, self.kl_w, self.kl_z, self.m2, self.n, self.main_total, self.adversary_total]
    }

    pub fn from_values(v: [f64; 7]) -> Self {
        LossBreakdown {
            recon: v[0],
            kl_w: v[1],
            kl_z: v[2],
            m2: v[3],
            n: v[4],
            main_total: v[5],
            adversary_total: v[6],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }
}

/// Reparameterisation noise for one minibatch.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentNoise {
    pub z: Tensor,
    pub w: Option<Tensor>,
}

impl LatentNoise {
    pub fn sample(model: &Model, n: usize, rng: &mut StreamRng) -> Self {
        let z = Tensor::new(vec![n, model.spec().z_dim], rng.normals(n * model.spec().z_dim)).expect("noise shape");
        let wd = model.spec().w_dim();
        let w = (wd > 0).then(|| Tensor::new(vec![n, wd], rng.normals(n * wd)).expect("noise shape"));
        LatentNoise { z, w }
    }

    pub fn zeros(model: &Model, n: usize) -> Self {
        let wd = model.spec().w_dim();
        LatentNoise {
            z: Tensor::zeros(&[n, model.spec().z_dim]),
            w: (wd > 0).then(|| Tensor::zeros(&[n, wd])),
        }
    }
}

/// A recorded minibatch loss: the graph plus handles to every term.
pub struct LossGraph {
    pub graph: Graph,
    pub recon: Var,
    pub kl_w: Option<Var>,
    pub kl_z: Var,
    pub m2: Option<Var>,
    pub n: Option<Var>,
    pub main_total: Var,
    pub adversary_total: Option<Var>,
    /// The sampled z fed to the adversary.
    pub z_sample: Var,
}

impl LossGraph {
    pub fn breakdown(&self) -> LossBreakdown {
        let s = |v: Option<Var>| v.map(|v| self.graph.scalar(v)).unwrap_or(0.0);
        LossBreakdown {
            recon: self.graph.scalar(self.recon),
            kl_w: s(self.kl_w),
            kl_z: self.graph.scalar(self.kl_z),
            m2: s(self.m2),
            n: s(self.n),
            main_total: self.graph.scalar(self.main_total),
            adversary_total: s(self.adversary_total),
        }
    }
}

impl Model {
    /// Records the losses of `self.kind()` on a minibatch. Encoders and the
    /// decoder are trainable leaves; the adversary is frozen inside
    /// `main_total` and sees a detached `z` inside `adversary_total`, so the
    /// two objectives touch disjoint parameter sets.
    pub fn loss_graph(&self, x: &Tensor, y: &Tensor, noise: &LatentNoise) -> Result<LossGraph> {
        let spec = self.spec();
        let n = x.rows();
        if n == 0 || x.row_len() != spec.input.numel() {
            return Err(Error::Shape(format!("batch has shape {:?}, expected rows of {}", x.shape(), spec.input.numel())));
        }
        if spec.k > 0 && y.shape() != [n, spec.k] {
            return Err(Error::Shape(format!("labels have shape {:?}, expected [{n}, {}]", y.shape(), spec.k)));
        }
        if noise.z.shape() != [n, spec.z_dim] {
            return Err(Error::Shape("z noise does not match the batch".into()));
        }
        let (enc_z, enc_w, dec, adversary) = self.parts();
        let store = self.store();
        let g = Graph::new();
        let inv_n = 1.0 / n as f64;
        let xv = g.constant(x.clone().reshape(&[n, x.row_len()])?);
        let yv = (spec.k > 0).then(|| g.constant(y.clone()));

        let z_cond = if spec.kind == ModelKind::CondVae { yv } else { None };
        let qz = enc_z.forward(&g, store, xv, z_cond, Bind::Trainable);
        let z = reparam_sample_batch(&g, qz, noise.z.clone());
        let kl_z = g.scale(kl_standard_normal_batch(&g, qz), inv_n);

        let mut kl_w = None;
        let dec_in = match spec.kind {
            ModelKind::Vae => z,
            ModelKind::CondVae | ModelKind::CondVaeInfo => g.concat_cols(&[z, yv.expect("labels")]),
            ModelKind::Csvae => {
                let enc_w = enc_w.expect("csvae w encoder");
                let wn = noise.w.clone().ok_or_else(|| Error::Shape("missing w noise".into()))?;
                if wn.shape() != [n, spec.w_dim()] {
                    return Err(Error::Shape("w noise does not match the batch".into()));
                }
                let qw = enc_w.forward(&g, store, xv, yv, Bind::Trainable);
                let w = reparam_sample_batch(&g, qw, wn);
                let prior = self.prior_batch(&g, y)?;
                kl_w = Some(g.scale(kl_diag_gaussians_batch(&g, qw, prior), inv_n));
                g.concat_cols(&[z, w])
            }
        };
        let px = dec.forward(&g, store, dec_in, Bind::Trainable);
        let recon = g.scale(gaussian_nll_batch(&g, xv, px), inv_n);

        let (mut m2, mut adv_n) = (None, None);
        if let Some(adv) = adversary {
            let mode = spec.label_mode;
            let frozen_logits = adv.forward(&g, store, z, Bind::Frozen);
            m2 = Some(match spec.kind {
                // Encoder maximises the adversary's cross-entropy.
                ModelKind::CondVaeInfo => g.scale(cross_entropy_batch(&g, frozen_logits, y, mode), -inv_n),
                _ => g.scale(neg_entropy_batch(&g, frozen_logits, mode), inv_n),
            });
            let logits = adv.forward(&g, store, g.detach(z), Bind::Trainable);
            adv_n = Some(g.scale(cross_entropy_batch(&g, logits, y, mode), inv_n));
        }

        let b = spec.betas;
        let mut main_total = g.add(g.scale(recon, b.recon()), g.scale(kl_z, b.kl_z()));
        if let Some(kw) = kl_w {
            main_total = g.add(main_total, g.scale(kw, b.kl_w()));
        }
        if let Some(m) = m2 {
            main_total = g.add(main_total, g.scale(m, b.m2()));
        }
        let adversary_total = adv_n.map(|v| g.scale(v, b.adversary()));
        Ok(LossGraph {
            graph: g,
            recon,
            kl_w,
            kl_z,
            m2,
            n: adv_n,
            main_total,
            adversary_total,
            z_sample: z,
        })
    }

    /// Loss terms without recording gradients of interest.
    pub fn losses(&self, x: &Tensor, y: &Tensor, noise: &LatentNoise) -> Result<LossBreakdown> {
        Ok(self.loss_graph(x, y, noise)?.breakdown())
    }

    fn prior_batch(&self, g: &Graph, y: &Tensor) -> Result<GaussianVars> {
        let n = y.rows();
        let d = self.spec().w_dim();
        let mut mu = Vec::with_capacity(n * d);
        let mut lv = Vec::with_capacity(n * d);
        for r in 0..n {
            let p = self.w_prior(y.row(r))?;
            mu.extend_from_slice(&p.mu);
            lv.extend_from_slice(&p.log_var);
        }
        Ok(GaussianVars {
            mu: g.constant(Tensor::new(vec![n, d], mu)?),
            log_var: g.constant(Tensor::new(vec![n, d], lv)?),
        })
    }
}
