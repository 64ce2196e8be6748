use std::path::Path;

use crate::data::{LabeledDataset, Split};
use crate::exec;
use crate::io::checkpoint::{Checkpoint, CLASSIFIER_KIND};
use crate::io::config::{format_input_shape, join, list, num, parse_input_shape, parse_kv};
use crate::models::{Arch, ClassifierSpec, InputShape};
use crate::nn::Bind;
use crate::numerics::{adam_step, AdamConfig, AdamState, Graph, ParamStore, Tensor};
use crate::rng::{domain, StreamRng};
use crate::stochastic::{cross_entropy_batch, LabelMode};
use crate::{Error, Result};

use crate::models::Classifier;

const CHUNK: usize = 256;

/// Early-stopping classifier training.
#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub max_epochs: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub criterion: Criterion,
}

/// What "improvement" means on the validation split.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Criterion {
    Accuracy,
    CrossEntropy,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_epochs: 100,
            patience: 10,
            batch_size: 64,
            lr: 1e-3,
            seed: 0,
            criterion: Criterion::Accuracy,
        }
    }
}

/// A classifier together with its own parameter store.
#[derive(Clone, Debug, PartialEq)]
pub struct LogitNet {
    net: Classifier,
    store: ParamStore,
}

impl LogitNet {
    pub fn new(spec: &ClassifierSpec, seed: u64) -> Self {
        let mut store = ParamStore::new();
        let mut rng = StreamRng::new(seed, domain::PROBE, 0);
        let net = Classifier::new(&mut store, "clf", spec, &mut rng);
        store.round_to_f32();
        LogitNet { net, store }
    }

    pub fn spec(&self) -> &ClassifierSpec {
        self.net.spec()
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn logits(&self, x: &Tensor) -> Tensor {
        let n = x.rows();
        let parts = exec::map_indexed(n.div_ceil(CHUNK), |c| {
            let idx: Vec<usize> = (c * CHUNK..((c + 1) * CHUNK).min(n)).collect();
            let g = Graph::new();
            let out = self.net.forward(&g, &self.store, g.constant(x.select_rows(&idx)), Bind::Frozen);
            g.value(out).into_data()
        });
        let w = self.spec().outputs;
        Tensor::new(vec![n, w], parts.concat()).expect("logit rows")
    }

    /// Hard labels: `logit > 0` per attribute, or the argmax one-hot.
    pub fn predict(&self, x: &Tensor) -> Tensor {
        let mut l = self.logits(x);
        let w = l.row_len();
        let mode = self.spec().label_mode;
        for row in l.data_mut().chunks_mut(w) {
            match mode {
                LabelMode::Bernoulli => row.iter_mut().for_each(|v| *v = f64::from(u8::from(*v > 0.0))),
                LabelMode::Categorical => {
                    let best = argmax(row);
                    row.iter_mut().enumerate().for_each(|(i, v)| *v = f64::from(u8::from(i == best)));
                }
            }
        }
        l
    }

    /// Per-attribute accuracy (a single entry in categorical mode).
    pub fn accuracy(&self, x: &Tensor, y: &Tensor) -> Vec<f64> {
        accuracy_of(&self.predict(x), y, self.spec().label_mode)
    }

    /// Mean per-example cross-entropy in nats.
    pub fn cross_entropy(&self, x: &Tensor, y: &Tensor) -> f64 {
        let n = x.rows();
        let sums = exec::map_indexed(n.div_ceil(CHUNK), |c| {
            let idx: Vec<usize> = (c * CHUNK..((c + 1) * CHUNK).min(n)).collect();
            let g = Graph::new();
            let out = self.net.forward(&g, &self.store, g.constant(x.select_rows(&idx)), Bind::Frozen);
            g.scalar(cross_entropy_batch(&g, out, &y.select_rows(&idx), self.spec().label_mode))
        });
        sums.iter().sum::<f64>() / n as f64
    }

    fn train_epoch(&mut self, x: &Tensor, y: &Tensor, opt: &mut AdamState, cfg: &FitConfig, epoch: usize) -> Result<()> {
        let mut order: Vec<usize> = (0..x.rows()).collect();
        StreamRng::new(cfg.seed, domain::PROBE, 1 + epoch as u64).shuffle(&mut order);
        for idx in order.chunks(cfg.batch_size) {
            let g = Graph::new();
            let out = self.net.forward(&g, &self.store, g.constant(x.select_rows(idx)), Bind::Trainable);
            let ce = cross_entropy_batch(&g, out, &y.select_rows(idx), self.spec().label_mode);
            let loss = g.scale(ce, 1.0 / idx.len() as f64);
            self.store.zero_grad();
            g.backward(loss, &mut self.store)?;
            adam_step(&mut self.store, opt, cfg.lr)?;
        }
        self.store.round_to_f32();
        Ok(())
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |b, (i, &x)| if x > v[b] { i } else { b })
}

pub(crate) fn accuracy_of(pred: &Tensor, y: &Tensor, mode: LabelMode) -> Vec<f64> {
    let n = y.rows().max(1) as f64;
    match mode {
        LabelMode::Bernoulli => (0..y.row_len())
            .map(|a| (0..y.rows()).filter(|&r| pred.row(r)[a] == y.row(r)[a]).count() as f64 / n)
            .collect(),
        LabelMode::Categorical => {
            vec![(0..y.rows()).filter(|&r| argmax(pred.row(r)) == argmax(y.row(r))).count() as f64 / n]
        }
    }
}

/// Rate of the most frequent value of each attribute.
pub fn majority_rate(y: &Tensor) -> Vec<f64> {
    let n = y.rows().max(1) as f64;
    (0..y.row_len())
        .map(|a| {
            let on = (0..y.rows()).filter(|&r| y.row(r)[a] == 1.0).count() as f64 / n;
            on.max(1.0 - on)
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOutcome {
    pub net: LogitNet,
    pub valid_accuracy: Vec<f64>,
    pub valid_cross_entropy: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

/// Trains a fresh classifier, keeping the parameters of the best validation
/// epoch and stopping after `patience` epochs without improvement.
pub fn fit_logit_net(
    spec: &ClassifierSpec,
    train: (&Tensor, &Tensor),
    valid: (&Tensor, &Tensor),
    cfg: &FitConfig,
) -> Result<FitOutcome> {
    if train.0.rows() == 0 || valid.0.rows() == 0 {
        return Err(Error::Data("classifier training needs non-empty train and validation splits".into()));
    }
    if cfg.max_epochs == 0 || cfg.batch_size == 0 || cfg.patience == 0 {
        return Err(Error::InvalidArgument("max_epochs, batch_size and patience must be positive".into()));
    }
    let mut net = LogitNet::new(spec, cfg.seed);
    let mut opt = AdamState::new(&net.store, &net.net.params(), AdamConfig::default());
    let score = |n: &LogitNet| -> (f64, Vec<f64>, f64) {
        let acc = n.accuracy(valid.0, valid.1);
        let ce = n.cross_entropy(valid.0, valid.1);
        let s = match cfg.criterion {
            Criterion::Accuracy => mean(&acc),
            Criterion::CrossEntropy => -ce,
        };
        (s, acc, ce)
    };
    let (mut best_score, mut best_acc, mut best_ce) = score(&net);
    let mut best = (net.clone(), 0);
    let mut epochs_run = 0;
    for epoch in 0..cfg.max_epochs {
        net.train_epoch(train.0, train.1, &mut opt, cfg, epoch)?;
        epochs_run = epoch + 1;
        let (s, acc, ce) = score(&net);
        if !s.is_finite() {
            return Err(Error::NonFinite(format!("classifier validation score at epoch {epoch}")));
        }
        if s > best_score {
            (best_score, best_acc, best_ce) = (s, acc, ce);
            best = (net.clone(), epochs_run);
        } else if epochs_run - best.1 >= cfg.patience {
            break;
        }
    }
    Ok(FitOutcome {
        net: best.0,
        valid_accuracy: best_acc,
        valid_cross_entropy: best_ce,
        best_epoch: best.1,
        epochs_run,
    })
}

/// Attribute classifier `C` used by the switching evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct AttrClassifier {
    pub net: LogitNet,
    pub attr_names: Vec<String>,
    pub valid_accuracy: Vec<f64>,
    pub majority: Vec<f64>,
    pub test_accuracy: Vec<f64>,
    pub epochs: usize,
}

impl AttrClassifier {
    /// Better than the majority rate on every attribute.
    pub fn usable(&self) -> bool {
        self.valid_accuracy.iter().zip(&self.majority).all(|(a, m)| a > m)
    }

    pub fn require_usable(&self) -> Result<&Self> {
        match self.valid_accuracy.iter().zip(&self.majority).find(|(a, m)| a <= m) {
            Some((&accuracy, &majority)) => Err(Error::UnusableClassifier { accuracy, majority }),
            None => Ok(self),
        }
    }

    pub fn predict(&self, x: &Tensor) -> Tensor {
        self.net.predict(x)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let s = self.net.spec();
        let echo = [
            ("input", format_input_shape(&s.input)),
            ("arch", s.arch.as_str().to_string()),
            ("conv_channels", join(&s.conv_channels)),
            ("hidden", join(&s.hidden)),
            ("outputs", s.outputs.to_string()),
            ("label_mode", s.label_mode.as_str().to_string()),
            ("attrs", self.attr_names.join(",")),
            ("valid_accuracy", join(&self.valid_accuracy)),
            ("majority", join(&self.majority)),
            ("test_accuracy", join(&self.test_accuracy)),
            ("epochs", self.epochs.to_string()),
        ];
        Checkpoint {
            kind: CLASSIFIER_KIND,
            config: echo.iter().map(|(k, v)| format!("{k} = {v}\n")).collect(),
            tensors: Checkpoint::tensors_of(&self.net.store),
            optimizer: None,
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.kind != CLASSIFIER_KIND {
            return Err(Error::KindMismatch(format!("checkpoint kind {} is not an attribute classifier", ck.kind)));
        }
        let kv = parse_kv(&ck.config)?;
        let get = |k: &str| -> Result<&str> {
            kv.iter()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::Data(format!("classifier checkpoint lacks `{k}`")))
        };
        let input: InputShape =
            parse_input_shape(get("input")?).ok_or_else(|| Error::Data("classifier input shape".into()))?;
        let arch = Arch::parse(get("arch")?).ok_or_else(|| Error::Data("classifier arch".into()))?;
        let label_mode = LabelMode::parse(get("label_mode")?).ok_or_else(|| Error::Data("classifier label mode".into()))?;
        let spec = ClassifierSpec {
            input,
            arch,
            conv_channels: list("conv_channels", get("conv_channels")?)?,
            hidden: list("hidden", get("hidden")?)?,
            outputs: num("outputs", get("outputs")?)?,
            label_mode,
        };
        let mut net = LogitNet::new(&spec, 0);
        ck.fill_store(&mut net.store)?;
        Ok(AttrClassifier {
            net,
            attr_names: get("attrs")?.split(',').map(str::to_string).collect(),
            valid_accuracy: list("valid_accuracy", get("valid_accuracy")?)?,
            majority: list("majority", get("majority")?)?,
            test_accuracy: list("test_accuracy", get("test_accuracy")?)?,
            epochs: num("epochs", get("epochs")?)?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

/// Default classifier for a dataset: a conv stack for images, an MLP
/// otherwise, one Bernoulli output per attribute.
pub fn classifier_spec_for(d: &LabeledDataset) -> ClassifierSpec {
    match d.image_shape() {
        Some(shape) => {
            let stages = if shape.height % 4 == 0 && shape.width % 4 == 0 { 2 } else { 0 };
            ClassifierSpec {
                input: InputShape::Image(shape),
                arch: if stages > 0 { Arch::Conv } else { Arch::Mlp },
                conv_channels: [16, 32][..stages].to_vec(),
                hidden: vec![64],
                outputs: d.k(),
                label_mode: LabelMode::Bernoulli,
            }
        }
        None => ClassifierSpec::vector(d.dim(), &[64, 64], d.k()),
    }
}

/// Trains `C` on the train split with early stopping on validation accuracy
/// and reports test accuracy. Check [`AttrClassifier::usable`] before use.
pub fn train_attr_classifier(d: &LabeledDataset, spec: &ClassifierSpec, cfg: &FitConfig) -> Result<AttrClassifier> {
    let part = |s: Split| {
        let rows = d.indices(s);
        (d.features(&rows), d.labels(&rows))
    };
    let (train, valid, test) = (part(Split::Train), part(Split::Valid), part(Split::Test));
    if spec.outputs != d.k() || spec.input.numel() != d.dim() {
        return Err(Error::Shape("classifier shape does not match the dataset".into()));
    }
    let cfg = FitConfig {
        criterion: Criterion::Accuracy,
        ..cfg.clone()
    };
    let fit = fit_logit_net(spec, (&train.0, &train.1), (&valid.0, &valid.1), &cfg)?;
    let test_accuracy = if test.0.rows() > 0 { fit.net.accuracy(&test.0, &test.1) } else { Vec::new() };
    Ok(AttrClassifier {
        majority: majority_rate(&valid.1),
        net: fit.net,
        attr_names: d.attr_names.clone(),
        valid_accuracy: fit.valid_accuracy,
        test_accuracy,
        epochs: fit.epochs_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{split, Proportions};

    fn separable(n: usize, seed: u64) -> LabeledDataset {
        let mut rng = StreamRng::new(seed, domain::MISC, 0);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let (a, b) = (rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0));
            let s = a + 0.5 * b;
            if s.abs() < 0.05 {
                continue;
            }
            x.extend([a as f32, b as f32]);
            y.push(u8::from(s > 0.0));
        }
        let d = LabeledDataset::new(vec![2], x, y, vec!["side".into()]).unwrap();
        split(d, Proportions::default(), seed).unwrap()
    }

    #[test]
    fn separable_data_is_learned_exactly() {
        let d = separable(600, 1);
        let spec = ClassifierSpec::vector(2, &[], 1);
        let cfg = FitConfig { lr: 0.05, max_epochs: 200, ..Default::default() };
        let c = train_attr_classifier(&d, &spec, &cfg).unwrap();
        assert_eq!(c.test_accuracy, vec![1.0]);
        assert!(c.usable());
    }

    #[test]
    fn permuted_labels_stay_near_majority() {
        let mut d = separable(600, 2);
        StreamRng::new(9, domain::MISC, 1).shuffle(&mut d.y);
        let spec = ClassifierSpec::vector(2, &[16], 1);
        let c = train_attr_classifier(&d, &spec, &FitConfig::default()).unwrap();
        let test = d.indices(Split::Test);
        let maj = majority_rate(&d.labels(&test))[0];
        assert!((c.test_accuracy[0] - maj).abs() <= 0.05 + 1.0 / test.len() as f64 * 3.0, "{:?} vs {maj}", c.test_accuracy);
    }

    #[test]
    fn unusable_classifier_is_reported() {
        let c = AttrClassifier {
            net: LogitNet::new(&ClassifierSpec::vector(2, &[], 1), 0),
            attr_names: vec!["a".into()],
            valid_accuracy: vec![0.5],
            majority: vec![0.6],
            test_accuracy: vec![],
            epochs: 1,
        };
        assert!(matches!(c.require_usable(), Err(Error::UnusableClassifier { .. })));
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let d = separable(200, 3);
        let spec = ClassifierSpec::vector(2, &[4], 1);
        let c = train_attr_classifier(&d, &spec, &FitConfig { max_epochs: 3, ..Default::default() }).unwrap();
        let back = AttrClassifier::from_checkpoint(&Checkpoint::decode(&c.to_checkpoint().encode()).unwrap()).unwrap();
        let x = d.features(&(0..d.len()).collect::<Vec<_>>());
        assert_eq!(back.net.logits(&x), c.net.logits(&x));
        assert_eq!(back.valid_accuracy, c.valid_accuracy);
        assert_eq!(back.attr_names, c.attr_names);
    }
}
