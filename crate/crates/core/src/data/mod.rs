//! Labelled datasets, synthetic generators and the `CSVD` file format.

mod format;
mod glyphs;
mod split;
mod swiss_roll;

pub use format::{load_dataset, save_dataset, DATASET_MAGIC, DATASET_VERSION};
pub use glyphs::{make_glyphs, GlyphAttr, GlyphConfig};
pub use split::{split, split_pairs, Proportions};
pub use swiss_roll::{make_swiss_roll, swiss_roll_point};

use crate::nn::ImageShape;
use crate::numerics::Tensor;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train = 0,
    Valid = 1,
    Test = 2,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

/// Examples `x` (row-major, `n x prod(dims)`), binary labels `y` (`n x k`)
/// and a split tag per example. Image examples have `dims = [h, w, c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub dims: Vec<usize>,
    pub x: Vec<f32>,
    pub y: Vec<u8>,
    pub attr_names: Vec<String>,
    pub split: Vec<Split>,
}

impl LabeledDataset {
    pub fn new(dims: Vec<usize>, x: Vec<f32>, y: Vec<u8>, attr_names: Vec<String>) -> Result<Self> {
        let d: usize = dims.iter().product();
        let k = attr_names.len();
        if dims.is_empty() || d == 0 || x.is_empty() || x.len() % d != 0 {
            return Err(Error::Data(format!("{} values do not form rows of shape {dims:?}", x.len())));
        }
        let n = x.len() / d;
        if y.len() != n * k {
            return Err(Error::Data(format!("{} labels for {n} examples and k = {k}", y.len())));
        }
        if y.iter().any(|&v| v > 1) {
            return Err(Error::Data("labels must be 0 or 1".into()));
        }
        Ok(LabeledDataset {
            dims,
            x,
            y,
            attr_names,
            split: vec![Split::Train; n],
        })
    }

    pub fn len(&self) -> usize {
        self.split.len()
    }

    pub fn is_empty(&self) -> bool {
        self.split.is_empty()
    }

    pub fn k(&self) -> usize {
        self.attr_names.len()
    }

    /// Values per example.
    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn image_shape(&self) -> Option<ImageShape> {
        match self.dims[..] {
            [height, width, channels] => Some(ImageShape {
                channels,
                height,
                width,
            }),
            _ => None,
        }
    }

    pub fn example(&self, i: usize) -> &[f32] {
        let d = self.dim();
        &self.x[i * d..(i + 1) * d]
    }

    pub fn label(&self, i: usize) -> &[u8] {
        let k = self.k();
        &self.y[i * k..(i + 1) * k]
    }

    pub fn attr_index(&self, name: &str) -> Option<usize> {
        self.attr_names.iter().position(|a| a == name)
    }

    pub fn indices(&self, s: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.split[i] == s).collect()
    }

    /// Model inputs for the given rows, `[n, prod(dims)]`, channel-major for
    /// images.
    pub fn features(&self, rows: &[usize]) -> Tensor {
        let d = self.dim();
        let mut data = Vec::with_capacity(rows.len() * d);
        match self.image_shape() {
            Some(s) if s.channels > 1 => {
                for &r in rows {
                    let ex = self.example(r);
                    for c in 0..s.channels {
                        for p in 0..s.height * s.width {
                            data.push(f64::from(ex[p * s.channels + c]));
                        }
                    }
                }
            }
            _ => {
                for &r in rows {
                    data.extend(self.example(r).iter().map(|&v| f64::from(v)));
                }
            }
        }
        Tensor::new(vec![rows.len(), d], data).expect("feature rows")
    }

    pub fn labels(&self, rows: &[usize]) -> Tensor {
        let data = rows.iter().flat_map(|&r| self.label(r).iter().map(|&v| f64::from(v))).collect();
        Tensor::new(vec![rows.len(), self.k()], data).expect("label rows")
    }

    /// Fraction of examples among `rows` with attribute `attr` on.
    pub fn positive_rate(&self, rows: &[usize], attr: usize) -> f64 {
        let on = rows.iter().filter(|&&r| self.label(r)[attr] == 1).count();
        on as f64 / rows.len().max(1) as f64
    }

    /// Shifts and scales every feature column to zero mean and unit standard
    /// deviation over the `reference` split. Labels and split tags are kept.
    pub fn standardized(mut self, reference: Split) -> Result<Self> {
        let rows = self.indices(reference);
        if rows.is_empty() {
            return Err(Error::Data(format!("no {} examples to standardize against", reference.as_str())));
        }
        let d = self.dim();
        let mut mean = vec![0.0f64; d];
        for &r in &rows {
            for (m, &v) in mean.iter_mut().zip(self.example(r)) {
                *m += f64::from(v);
            }
        }
        mean.iter_mut().for_each(|m| *m /= rows.len() as f64);
        let mut var = vec![0.0f64; d];
        for &r in &rows {
            for ((s, &v), m) in var.iter_mut().zip(self.example(r)).zip(&mean) {
                *s += (f64::from(v) - m).powi(2);
            }
        }
        let sd: Vec<f64> = var.iter().map(|s| (s / rows.len() as f64).sqrt()).collect();
        for row in self.x.chunks_mut(d) {
            for ((v, m), s) in row.iter_mut().zip(&mean).zip(&sd) {
                let c = f64::from(*v) - m;
                *v = if *s > 0.0 { c / s } else { c } as f32;
            }
        }
        Ok(self)
    }

    /// Identity pairs `(off, on)` for attribute `attr`: paired datasets store
    /// siblings in consecutive rows `(2t, 2t + 1)` that share every label
    /// except `attr` and sit in the same split.
    pub fn pairs(&self, attr: usize) -> Result<Vec<(usize, usize)>> {
        let n = self.len();
        if attr >= self.k() {
            return Err(Error::Protocol(format!("attribute {attr} out of range (k = {})", self.k())));
        }
        if n < 2 || n % 2 != 0 {
            return Err(Error::Protocol("dataset holds no identity pairs".into()));
        }
        let mut out = Vec::with_capacity(n / 2);
        for t in 0..n / 2 {
            let (a, b) = (2 * t, 2 * t + 1);
            let (la, lb) = (self.label(a), self.label(b));
            let differs_only_in_attr =
                (0..self.k()).all(|j| if j == attr { la[j] != lb[j] } else { la[j] == lb[j] });
            if !differs_only_in_attr || self.split[a] != self.split[b] {
                return Err(Error::Protocol(format!(
                    "rows {a} and {b} are not an identity pair for attribute {attr}; Method 2 needs a paired dataset"
                )));
            }
            out.push(if la[attr] == 0 { (a, b) } else { (b, a) });
        }
        Ok(out)
    }

    /// Summary line: size, shape, attribute marginals.
    pub fn summary(&self) -> String {
        let all: Vec<usize> = (0..self.len()).collect();
        let marg: Vec<String> = (0..self.k())
            .map(|a| format!("{}={:.4}", self.attr_names[a], self.positive_rate(&all, a)))
            .collect();
        let counts: Vec<String> = Split::ALL
            .iter()
            .map(|&s| format!("{}={}", s.as_str(), self.indices(s).len()))
            .collect();
        format!(
            "n={} dims={:?} k={} positive[{}] split[{}]",
            self.len(),
            self.dims,
            self.k(),
            marg.join(" "),
            counts.join(" ")
        )
    }
}
