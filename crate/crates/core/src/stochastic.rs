//! Diagonal Gaussians, categorical label distributions and the loss terms
//! built from them.
//!
//! Every quantity exists twice: as a plain `f64` evaluation on value types
//! and as a differentiable graph expression over batches (`*_batch`
//! functions). The batch forms return the sum over the batch; callers divide
//! by the batch size.

use crate::numerics::{Graph, Tensor, Var};
use crate::{Error, Result};

/// `0.5 * ln(2 pi)`.
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Probability clamp applied before every logarithm of a class probability.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DiagGaussian {
    pub mu: Vec<f64>,
    pub log_var: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mu: Vec<f64>, log_var: Vec<f64>) -> Result<Self> {
        if mu.len() != log_var.len() {
            return Err(Error::Shape(format!(
                "mean has {} entries, log-variance {}",
                mu.len(),
                log_var.len()
            )));
        }
        if log_var.iter().any(|l| !(l / 2.0).exp().is_finite() || (l / 2.0).exp() <= 0.0) {
            return Err(Error::NonFinite("log-variance gives a degenerate sigma".into()));
        }
        Ok(DiagGaussian { mu, log_var })
    }

    /// From means and standard deviations.
    pub fn from_sigma(mu: Vec<f64>, sigma: &[f64]) -> Result<Self> {
        if sigma.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidArgument("sigma must be positive".into()));
        }
        Self::new(mu, sigma.iter().map(|s| 2.0 * s.ln()).collect())
    }

    pub fn standard(dim: usize) -> Self {
        DiagGaussian {
            mu: vec![0.0; dim],
            log_var: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.log_var.iter().map(|l| (l / 2.0).exp()).collect()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        -gaussian_nll(x, self).unwrap_or(f64::NAN)
    }
}

/// `mu + sigma * noise`.
pub fn reparam_sample(g: &DiagGaussian, noise: &[f64]) -> Result<Vec<f64>> {
    if noise.len() != g.dim() {
        return Err(Error::Shape(format!("noise has {} entries, gaussian {}", noise.len(), g.dim())));
    }
    Ok(g.mu
        .iter()
        .zip(&g.log_var)
        .zip(noise)
        .map(|((m, l), e)| m + (l / 2.0).exp() * e)
        .collect())
}

/// `KL(q || p)` between diagonal Gaussians.
pub fn kl_diag_gaussians(q: &DiagGaussian, p: &DiagGaussian) -> Result<f64> {
    if q.dim() != p.dim() {
        return Err(Error::Shape(format!("KL between dims {} and {}", q.dim(), p.dim())));
    }
    let mut kl = 0.0;
    for d in 0..q.dim() {
        let (lq, lp) = (q.log_var[d], p.log_var[d]);
        let diff = q.mu[d] - p.mu[d];
        kl += 0.5 * (lp - lq) + (lq.exp() + diff * diff) / (2.0 * lp.exp()) - 0.5;
    }
    if !kl.is_finite() {
        return Err(Error::NonFinite(format!("KL evaluated to {kl}")));
    }
    Ok(kl)
}

/// Negative log-density of `x` under `g`.
pub fn gaussian_nll(x: &[f64], g: &DiagGaussian) -> Result<f64> {
    if x.len() != g.dim() {
        return Err(Error::Shape(format!("x has {} entries, gaussian {}", x.len(), g.dim())));
    }
    Ok(x.iter()
        .zip(&g.mu)
        .zip(&g.log_var)
        .map(|((x, m), l)| HALF_LN_2PI + 0.5 * l + (x - m) * (x - m) / (2.0 * l.exp()))
        .sum())
}

/// How label logits are interpreted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelMode {
    /// Mutually exclusive classes: softmax over all logits.
    Categorical,
    /// Independent binary attributes: one sigmoid per logit.
    Bernoulli,
}

impl LabelMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelMode::Categorical => "categorical",
            LabelMode::Bernoulli => "bernoulli",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "categorical" => Some(LabelMode::Categorical),
            "bernoulli" => Some(LabelMode::Bernoulli),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalDist {
    pub logits: Vec<f64>,
    pub mode: LabelMode,
}

impl CategoricalDist {
    pub fn new(logits: Vec<f64>, mode: LabelMode) -> Self {
        CategoricalDist { logits, mode }
    }

    /// Builds a distribution with the given probabilities (categorical: one
    /// per class; Bernoulli: one per attribute).
    pub fn from_probs(probs: &[f64], mode: LabelMode) -> Self {
        let logits = match mode {
            LabelMode::Categorical => probs.iter().map(|p| p.ln()).collect(),
            LabelMode::Bernoulli => probs.iter().map(|p| p.ln() - (-p).ln_1p()).collect(),
        };
        CategoricalDist { logits, mode }
    }

    /// Softmax probabilities (categorical) or per-attribute `P(y_i = 1)`.
    pub fn probs(&self) -> Vec<f64> {
        match self.mode {
            LabelMode::Categorical => {
                let mx = self.logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = self.logits.iter().map(|l| (l - mx).exp()).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|x| x / s).collect()
            }
            LabelMode::Bernoulli => self.logits.iter().map(|&l| crate::numerics::graph::sigmoid(l)).collect(),
        }
    }
}

fn clamped_ln(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP).ln()
}

/// `sum_y q(y) ln q(y)`; for Bernoulli mode the sum of per-attribute binary
/// negative entropies.
pub fn categorical_neg_entropy(d: &CategoricalDist) -> f64 {
    let p = d.probs();
    match d.mode {
        LabelMode::Categorical => p.iter().map(|&q| q * clamped_ln(q)).sum(),
        LabelMode::Bernoulli => p
            .iter()
            .map(|&q| q * clamped_ln(q) + (1.0 - q) * clamped_ln(1.0 - q))
            .sum(),
    }
}

/// `-ln q(y)`, summed over attribute groups.
pub fn categorical_cross_entropy(d: &CategoricalDist, y: &[f64]) -> Result<f64> {
    validate_label(y, d.logits.len(), d.mode)?;
    let p = d.probs();
    Ok(match d.mode {
        LabelMode::Categorical => -p.iter().zip(y).map(|(&q, &t)| t * clamped_ln(q)).sum::<f64>(),
        LabelMode::Bernoulli => -p
            .iter()
            .zip(y)
            .map(|(&q, &t)| t * clamped_ln(q) + (1.0 - t) * clamped_ln(1.0 - q))
            .sum::<f64>(),
    })
}

pub fn validate_label(y: &[f64], k: usize, mode: LabelMode) -> Result<()> {
    if y.len() != k {
        return Err(Error::Shape(format!("label has {} entries, expected {k}", y.len())));
    }
    if y.iter().any(|&t| t != 0.0 && t != 1.0) {
        return Err(Error::InvalidArgument(format!("label {y:?} is not binary")));
    }
    if mode == LabelMode::Categorical && y.iter().filter(|&&t| t == 1.0).count() != 1 {
        return Err(Error::InvalidArgument(format!("label {y:?} is not one-hot")));
    }
    Ok(())
}

// ---- batched graph forms ----

/// Batch of diagonal Gaussians on a graph: `mu` and `log_var` are `[n, d]`.
#[derive(Clone, Copy, Debug)]
pub struct GaussianVars {
    pub mu: Var,
    pub log_var: Var,
}

/// `mu + exp(log_var / 2) * noise` for a `[n, d]` noise tensor.
pub fn reparam_sample_batch(g: &Graph, q: GaussianVars, noise: Tensor) -> Var {
    let eps = g.constant(noise);
    let sigma = g.exp(g.scale(q.log_var, 0.5));
    g.add(q.mu, g.mul(sigma, eps))
}

/// Sum over the batch of `KL(q_n || p_n)`.
pub fn kl_diag_gaussians_batch(g: &Graph, q: GaussianVars, p: GaussianVars) -> Var {
    let half_ratio = g.scale(g.sub(p.log_var, q.log_var), 0.5);
    let diff = g.sub(q.mu, p.mu);
    let num = g.add(g.exp(q.log_var), g.square(diff));
    let inv_two_var_p = g.scale(g.exp(g.neg(p.log_var)), 0.5);
    let terms = g.add(half_ratio, g.mul(num, inv_two_var_p));
    let n = g.shape(q.mu).iter().product::<usize>() as f64;
    g.add_scalar(g.sum(terms), -0.5 * n)
}

/// Sum over the batch of `KL(q_n || N(0, I))`.
pub fn kl_standard_normal_batch(g: &Graph, q: GaussianVars) -> Var {
    // 0.5 * (exp(lv) + mu^2 - 1 - lv)
    let t = g.sub(g.add(g.exp(q.log_var), g.square(q.mu)), q.log_var);
    let n = g.shape(q.mu).iter().product::<usize>() as f64;
    g.scale(g.add_scalar(g.sum(t), -n), 0.5)
}

/// Sum over the batch of the Gaussian negative log-likelihood of `x`.
pub fn gaussian_nll_batch(g: &Graph, x: Var, p: GaussianVars) -> Var {
    let diff = g.sub(x, p.mu);
    let inv_two_var = g.scale(g.exp(g.neg(p.log_var)), 0.5);
    let terms = g.add(g.scale(p.log_var, 0.5), g.mul(g.square(diff), inv_two_var));
    let n = g.shape(x).iter().product::<usize>() as f64;
    g.add_scalar(g.sum(terms), HALF_LN_2PI * n)
}

/// Clamped log-probabilities `(ln q(y=1), ln q(y=0))` per logit (Bernoulli)
/// or clamped log-softmax (categorical, second entry unused).
fn log_probs(g: &Graph, logits: Var, mode: LabelMode) -> (Var, Option<Var>) {
    let (lo, hi) = (PROB_CLAMP.ln(), (1.0 - PROB_CLAMP).ln());
    match mode {
        LabelMode::Categorical => (g.clamp(g.log_softmax(logits), lo, hi), None),
        LabelMode::Bernoulli => (
            g.clamp(g.log_sigmoid(logits), lo, hi),
            Some(g.clamp(g.log_sigmoid(g.neg(logits)), lo, hi)),
        ),
    }
}

/// Sum over the batch of `sum_y q(y) ln q(y)` for `[n, k]` logits.
pub fn neg_entropy_batch(g: &Graph, logits: Var, mode: LabelMode) -> Var {
    match log_probs(g, logits, mode) {
        (lp, None) => g.sum(g.mul(g.exp(lp), lp)),
        (lp1, Some(lp0)) => {
            let on = g.mul(g.exp(lp1), lp1);
            let off = g.mul(g.exp(lp0), lp0);
            g.sum(g.add(on, off))
        }
    }
}

/// Sum over the batch of `-ln q(y_n)` for `[n, k]` logits and labels.
pub fn cross_entropy_batch(g: &Graph, logits: Var, y: &Tensor, mode: LabelMode) -> Var {
    let yv = g.constant(y.clone());
    match log_probs(g, logits, mode) {
        (lp, None) => g.neg(g.sum(g.mul(yv, lp))),
        (lp1, Some(lp0)) => {
            let not_y = g.constant(
                Tensor::new(y.shape().to_vec(), y.data().iter().map(|t| 1.0 - t).collect()).expect("label shape"),
            );
            g.neg(g.sum(g.add(g.mul(yv, lp1), g.mul(not_y, lp0))))
        }
    }
}
