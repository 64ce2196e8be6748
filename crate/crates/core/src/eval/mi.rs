use crate::data::{LabeledDataset, Split};
use crate::models::{ClassifierSpec, Model, ModelKind};
use crate::numerics::Tensor;
use crate::stochastic::LabelMode;
use crate::{Error, Result};

use super::classifier::{fit_logit_net, majority_rate, Criterion, FitConfig};
use super::report::{Record, Table};

/// Label information carried by a representation, in nats.
#[derive(Clone, Debug, PartialEq)]
pub struct MiEstimate {
    pub h_y: f64,
    /// Held-out probe cross-entropy.
    pub h_y_given_z: f64,
    /// `max(mi_raw, 0)`.
    pub mi: f64,
    pub mi_raw: f64,
    pub accuracy: f64,
    pub majority: f64,
    pub test_examples: usize,
}

impl MiEstimate {
    pub fn table(&self, name: &str) -> String {
        let mut t = Table::new(&["representation", "H(Y)", "H(Y|.)", "I", "probe acc", "majority"]);
        t.row(vec![
            name.to_string(),
            format!("{:.4}", self.h_y),
            format!("{:.4}", self.h_y_given_z),
            format!("{:.4}", self.mi),
            format!("{:.4}", self.accuracy),
            format!("{:.4}", self.majority),
        ]);
        t.render()
    }

    pub fn records(&self, base: &str) -> Vec<Record> {
        vec![
            Record::new(format!("{base}.h_y"), self.h_y),
            Record::new(format!("{base}.h_y_given"), self.h_y_given_z),
            Record::new(format!("{base}.mi"), self.mi),
            Record::new(format!("{base}.mi_raw"), self.mi_raw),
            Record::new(format!("{base}.probe_accuracy"), self.accuracy),
            Record::new(format!("{base}.majority"), self.majority),
        ]
    }
}

/// Entropy of the empirical label distribution: the sum of per-attribute
/// binary entropies, or the entropy over classes in categorical mode.
pub fn label_entropy(y: &Tensor, mode: LabelMode) -> f64 {
    let n = y.rows().max(1) as f64;
    let h = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
    let rates: Vec<f64> = (0..y.row_len())
        .map(|a| (0..y.rows()).map(|r| y.row(r)[a]).sum::<f64>() / n)
        .collect();
    match mode {
        LabelMode::Bernoulli => rates.iter().map(|&p| h(p) + h(1.0 - p)).sum(),
        LabelMode::Categorical => rates.iter().map(|&p| h(p)).sum(),
    }
}

pub type Part = (Tensor, Tensor);

/// Probe settings: `hidden = []` gives a linear probe.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeConfig {
    pub hidden: Vec<usize>,
    pub fit: FitConfig,
}

impl ProbeConfig {
    /// Mirrors the model's adversary architecture.
    pub fn like_adversary(model: &Model, seed: u64) -> Self {
        ProbeConfig {
            hidden: model.spec().adv_hidden.clone(),
            fit: FitConfig {
                seed,
                max_epochs: 200,
                criterion: Criterion::CrossEntropy,
                ..Default::default()
            },
        }
    }

    pub fn linear(seed: u64) -> Self {
        ProbeConfig {
            hidden: Vec::new(),
            fit: FitConfig {
                seed,
                max_epochs: 200,
                lr: 1e-2,
                criterion: Criterion::CrossEntropy,
                ..Default::default()
            },
        }
    }
}

/// Trains a probe `features -> y` on `train`, early-stopping on `valid`,
/// and estimates `I = H(Y) - H(Y | features)` on `test`.
pub fn mi_from_features(train: &Part, valid: &Part, test: &Part, mode: LabelMode, cfg: &ProbeConfig) -> Result<MiEstimate> {
    if test.0.rows() == 0 {
        return Err(Error::Data("probe needs a non-empty test split".into()));
    }
    let mut spec = ClassifierSpec::vector(train.0.row_len(), &cfg.hidden, train.1.row_len());
    spec.label_mode = mode;
    let fit = fit_logit_net(&spec, (&train.0, &train.1), (&valid.0, &valid.1), &cfg.fit)?;
    let h_y = label_entropy(&test.1, mode);
    let h_y_given_z = fit.net.cross_entropy(&test.0, &test.1);
    if !h_y_given_z.is_finite() {
        return Err(Error::NonFinite("probe cross-entropy".into()));
    }
    let acc = fit.net.accuracy(&test.0, &test.1);
    let maj = majority_rate(&test.1);
    let mi_raw = h_y - h_y_given_z;
    Ok(MiEstimate {
        h_y,
        h_y_given_z,
        mi: mi_raw.max(0.0),
        mi_raw,
        accuracy: acc.iter().sum::<f64>() / acc.len() as f64,
        majority: maj.iter().sum::<f64>() / maj.len() as f64,
        test_examples: test.0.rows(),
    })
}

/// Which latent block to read out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Latent {
    Z,
    W,
}

/// Posterior means of the train, validation and test splits with their
/// labels.
pub fn encoded_splits(model: &Model, d: &LabeledDataset, which: Latent) -> Result<[Part; 3]> {
    if which == Latent::W && model.kind() != ModelKind::Csvae {
        return Err(Error::KindMismatch(format!("a {} model has no W", model.kind())));
    }
    let enc = |s: Split| -> Result<Part> {
        let rows = d.indices(s);
        let (x, y) = (d.features(&rows), d.labels(&rows));
        if rows.is_empty() {
            return Ok((Tensor::zeros(&[0, 1]), y));
        }
        let cond = (model.kind() != ModelKind::Vae).then_some(&y);
        let lat = model.encode_batch(&x, cond)?;
        let t = match which {
            Latent::Z => lat.z,
            Latent::W => lat.w.expect("csvae has W"),
        };
        Ok((t, y))
    };
    Ok([enc(Split::Train)?, enc(Split::Valid)?, enc(Split::Test)?])
}

/// Label information in the model's z posterior means, estimated with a
/// fresh probe (independent of any adversary the model trained with).
pub fn mi_probe(model: &Model, d: &LabeledDataset, cfg: &ProbeConfig) -> Result<MiEstimate> {
    let [train, valid, test] = encoded_splits(model, d, Latent::Z)?;
    mi_from_features(&train, &valid, &test, model.spec().label_mode, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{domain, StreamRng};

    fn labels(n: usize, seed: u64) -> Tensor {
        let mut rng = StreamRng::new(seed, domain::MISC, 0);
        Tensor::new(vec![n, 1], (0..n).map(|_| f64::from(u8::from(rng.bernoulli(0.3)))).collect()).unwrap()
    }

    fn noise(n: usize, seed: u64) -> Tensor {
        Tensor::new(vec![n, 2], StreamRng::new(seed, domain::MISC, 1).normals(2 * n)).unwrap()
    }

    #[test]
    fn entropy_of_fair_coin() {
        let y = Tensor::new(vec![4, 1], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!((label_entropy(&y, LabelMode::Bernoulli) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(label_entropy(&Tensor::zeros(&[3, 1]), LabelMode::Bernoulli), 0.0);
    }

    #[test]
    fn noise_features_carry_no_information() {
        let parts: Vec<Part> = (0..3).map(|s| (noise(2000, 10 + s), labels(2000, 20 + s))).collect();
        let m = mi_from_features(&parts[0], &parts[1], &parts[2], LabelMode::Bernoulli, &ProbeConfig::linear(0)).unwrap();
        assert!(m.mi < 0.02, "{m:?}");
        assert!(m.mi_raw <= m.h_y);
    }

    #[test]
    fn copied_label_carries_everything() {
        let parts: Vec<Part> = (0..3)
            .map(|s| {
                let y = labels(2000, 30 + s);
                let z = Tensor::new(vec![2000, 2], y.data().iter().flat_map(|&v| [v, 0.0]).collect()).unwrap();
                (z, y)
            })
            .collect();
        let m = mi_from_features(&parts[0], &parts[1], &parts[2], LabelMode::Bernoulli, &ProbeConfig::linear(0)).unwrap();
        assert!((m.mi - m.h_y).abs() < 0.02, "{m:?}");
        assert_eq!(m.accuracy, 1.0);
    }
}
