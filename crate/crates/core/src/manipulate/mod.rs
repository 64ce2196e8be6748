//! Attribute switching for every model kind, and W-subspace search by grid
//! and by principal components.
//!
//! All switching functions decode posterior means; nothing is sampled.

mod pca;

pub use pca::{eigen_sym2, eigen_sym_general, pca_of_points, w_pca, PcaBasis};

use crate::models::{Model, ModelKind, ModelSpec};
use crate::numerics::Tensor;
use crate::{Error, Result};

fn expect_kind(model: &Model, kinds: &[ModelKind], what: &str) -> Result<()> {
    if kinds.contains(&model.kind()) {
        Ok(())
    } else {
        Err(Error::KindMismatch(format!("{what} does not apply to a {} model", model.kind())))
    }
}

/// Rows of `y` whose attribute `attr` equals `state`.
pub fn rows_with(y: &Tensor, attr: usize, state: u8) -> Vec<usize> {
    (0..y.rows()).filter(|&r| y.row(r)[attr] == f64::from(state)).collect()
}

/// Mean encoded z over the examples with `y[attr] == state`.
pub fn class_latent_mean(model: &Model, x: &Tensor, y: &Tensor, attr: usize, state: u8) -> Result<Vec<f64>> {
    let rows = rows_with(y, attr, state);
    if rows.is_empty() {
        return Err(Error::Data(format!("no examples with attribute {attr} = {state}")));
    }
    let xs = x.select_rows(&rows);
    let ys = y.select_rows(&rows);
    let cond = (model.kind() != ModelKind::Vae).then_some(&ys);
    let z = model.encode_batch(&xs, cond)?.z;
    Ok(column_mean(&z))
}

pub(crate) fn column_mean(t: &Tensor) -> Vec<f64> {
    let w = t.row_len();
    let mut m = vec![0.0; w];
    for r in 0..t.rows() {
        for (a, b) in m.iter_mut().zip(t.row(r)) {
            *a += b;
        }
    }
    let n = t.rows() as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

fn add_row_vector(t: &Tensor, v: &[f64]) -> Tensor {
    let w = t.row_len();
    let data = t.data().iter().enumerate().map(|(i, a)| a + v[i % w]).collect();
    Tensor::new(t.shape().to_vec(), data).expect("same shape")
}

/// `G(x) = decode(encode(x) - m_from + m_to)` for a VAE.
pub fn switch_vae(model: &Model, x: &Tensor, m_from: &[f64], m_to: &[f64]) -> Result<Tensor> {
    expect_kind(model, &[ModelKind::Vae], "latent translation")?;
    let z = model.encode_batch(x, None)?.z;
    if m_from.len() != z.row_len() || m_to.len() != z.row_len() {
        return Err(Error::Shape("class means do not match z_dim".into()));
    }
    let delta: Vec<f64> = m_to.iter().zip(m_from).map(|(a, b)| a - b).collect();
    Ok(model.decode_batch(&add_row_vector(&z, &delta), None)?.0)
}

/// Labels `y` with attribute `attr` replaced by `p * target`.
pub fn switched_labels(y: &Tensor, attr: usize, target: u8, p: f64) -> Tensor {
    let k = y.row_len();
    let data = y
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| if i % k == attr { p * f64::from(target) } else { v })
        .collect();
    Tensor::new(y.shape().to_vec(), data).expect("same shape")
}

/// `G(x, y, p) = decode(encode(x, y), y')` where `y'` is `y` with attribute
/// `attr` set to `p` (target on) or 0 (target off).
pub fn switch_condvae(model: &Model, x: &Tensor, y: &Tensor, attr: usize, target: u8, p: f64) -> Result<Tensor> {
    switch_condvae_labels(model, x, y, &switched_labels(y, attr, target, p))
}

/// Encodes with `y`, decodes under arbitrary conditioning labels.
pub fn switch_condvae_labels(model: &Model, x: &Tensor, y: &Tensor, cond: &Tensor) -> Result<Tensor> {
    expect_kind(model, &[ModelKind::CondVae, ModelKind::CondVaeInfo], "label switching")?;
    let z = model.encode_batch(x, Some(y))?.z;
    Ok(model.decode_batch(&z, Some(cond))?.0)
}

/// `G(x, p) = decode(z(x), p)` with one W point per row of `w`.
pub fn switch_csvae(model: &Model, x: &Tensor, w: &Tensor) -> Result<Tensor> {
    expect_kind(model, &[ModelKind::Csvae], "W replacement")?;
    // q(z|x) ignores the label row
    let z = model.encode_batch(x, Some(&Tensor::zeros(&[x.rows(), model.spec().k])))?.z;
    if w.rows() != z.rows() || w.row_len() != model.spec().w_dim() {
        return Err(Error::Shape(format!(
            "W points have shape {:?}, expected [{}, {}]",
            w.shape(),
            z.rows(),
            model.spec().w_dim()
        )));
    }
    Ok(model.decode_batch(&z, Some(w))?.0)
}

/// Encoded W means with block `attr` replaced by `block` in every row.
pub fn replace_block(w: &Tensor, spec: &ModelSpec, attr: usize, block: &[f64]) -> Result<Tensor> {
    let d = spec.w_dim_per_attr;
    if block.len() != d || attr >= spec.k {
        return Err(Error::Shape(format!("block of {} entries for attribute {attr}", block.len())));
    }
    let mut out = w.clone();
    let wd = w.row_len();
    for r in 0..w.rows() {
        out.data_mut()[r * wd + attr * d..r * wd + (attr + 1) * d].copy_from_slice(block);
    }
    Ok(out)
}

/// Switches attribute `attr` of every input to the W point `block` while the
/// other blocks keep their encoded values.
pub fn switch_csvae_block(model: &Model, x: &Tensor, y: &Tensor, attr: usize, block: &[f64]) -> Result<Tensor> {
    expect_kind(model, &[ModelKind::Csvae], "W replacement")?;
    let w = model.encode_batch(x, Some(y))?.w.expect("csvae has W");
    switch_csvae(model, x, &replace_block(&w, model.spec(), attr, block)?)
}

/// Lattice of W points for one attribute block; entries outside the block
/// are exactly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct WGrid {
    pub attr: usize,
    pub center: Vec<f64>,
    pub half_extent: Vec<f64>,
    pub steps: Vec<usize>,
    /// Full W vectors, first block dimension varying slowest.
    pub points: Vec<Vec<f64>>,
}

impl WGrid {
    /// The block-`attr` slice of each point.
    pub fn blocks(&self) -> Vec<Vec<f64>> {
        let d = self.center.len();
        self.points.iter().map(|p| p[self.attr * d..(self.attr + 1) * d].to_vec()).collect()
    }
}

/// Axis-aligned grid around `center` with `steps[d]` points per dimension
/// spanning `center +- half_extent`.
pub fn w_grid_around(spec: &ModelSpec, attr: usize, center: &[f64], half_extent: &[f64], steps: &[usize]) -> Result<WGrid> {
    let d = spec.w_dim_per_attr;
    if attr >= spec.k || center.len() != d || half_extent.len() != d || steps.len() != d {
        return Err(Error::InvalidArgument(format!(
            "grid for attribute {attr} needs {d} centre, extent and step entries"
        )));
    }
    if steps.contains(&0) {
        return Err(Error::InvalidArgument("grid steps must be at least 1".into()));
    }
    let axis = |j: usize, s: usize| -> f64 {
        if steps[j] == 1 {
            center[j]
        } else {
            center[j] - half_extent[j] + 2.0 * half_extent[j] * s as f64 / (steps[j] - 1) as f64
        }
    };
    let total: usize = steps.iter().product();
    let mut points = Vec::with_capacity(total);
    for mut idx in 0..total {
        let mut coord = vec![0.0; d];
        for j in (0..d).rev() {
            coord[j] = axis(j, idx % steps[j]);
            idx /= steps[j];
        }
        let mut w = vec![0.0; spec.w_dim()];
        w[attr * d..(attr + 1) * d].copy_from_slice(&coord);
        points.push(w);
    }
    Ok(WGrid {
        attr,
        center: center.to_vec(),
        half_extent: half_extent.to_vec(),
        steps: steps.to_vec(),
        points,
    })
}

/// Grid centred at the attribute-on prior mean; the default half-width is
/// two prior standard deviations.
pub fn w_grid(spec: &ModelSpec, attr: usize, steps: &[usize], extent: Option<&[f64]>) -> Result<WGrid> {
    let default: Vec<f64> = spec.prior.on_sigma.iter().map(|s| 2.0 * s).collect();
    w_grid_around(spec, attr, &spec.prior.on_mean, extent.unwrap_or(&default), steps)
}

/// Mean encoded W block `attr` over the examples with `y[attr] == state`.
pub fn w_block_mean(model: &Model, x: &Tensor, y: &Tensor, attr: usize, state: u8) -> Result<Vec<f64>> {
    expect_kind(model, &[ModelKind::Csvae], "W statistics")?;
    let rows = rows_with(y, attr, state);
    if rows.is_empty() {
        return Err(Error::Data(format!("no examples with attribute {attr} = {state}")));
    }
    let w = model.encode_batch(&x.select_rows(&rows), Some(&y.select_rows(&rows)))?.w.expect("csvae has W");
    let d = model.spec().w_dim_per_attr;
    let mean = column_mean(&w);
    Ok(mean[attr * d..(attr + 1) * d].to_vec())
}
