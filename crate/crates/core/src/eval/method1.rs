use crate::data::{LabeledDataset, Split};
use crate::manipulate::{class_latent_mean, rows_with, switch_condvae_labels, switch_csvae, switch_vae, w_block_mean};
use crate::models::{Model, ModelKind};
use crate::numerics::Tensor;
use crate::{Error, Result};

use super::classifier::AttrClassifier;
use super::report::{pct, Record, Table};

/// How the switched output is produced for each model kind.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SwitchPolicy {
    /// VAE: translate by the difference of validation class means of z.
    ClassMean,
    /// CondVAE variants: decode with the target attribute set to `p` (on) or
    /// 0 (off).
    LabelScale(f64),
    /// CSVAE: replace the attribute's W block with the mean validation
    /// encoding of examples in the target state.
    EmpiricalW,
    /// No switch: every target equals the current state and the output is
    /// the model's reconstruction.
    Identity,
}

impl SwitchPolicy {
    /// The comparison setting: class means, `p = 1`, empirical W means.
    pub fn standard(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Vae => SwitchPolicy::ClassMean,
            ModelKind::CondVae | ModelKind::CondVaeInfo => SwitchPolicy::LabelScale(1.0),
            ModelKind::Csvae => SwitchPolicy::EmpiricalW,
        }
    }

    pub fn name(&self) -> String {
        match self {
            SwitchPolicy::ClassMean => "class-mean".into(),
            SwitchPolicy::LabelScale(p) => format!("label-scale(p={p})"),
            SwitchPolicy::EmpiricalW => "empirical-w".into(),
            SwitchPolicy::Identity => "identity".into(),
        }
    }

    fn check(&self, kind: ModelKind) -> Result<()> {
        let ok = match self {
            SwitchPolicy::ClassMean => kind == ModelKind::Vae,
            SwitchPolicy::LabelScale(_) => matches!(kind, ModelKind::CondVae | ModelKind::CondVaeInfo),
            SwitchPolicy::EmpiricalW => kind == ModelKind::Csvae,
            SwitchPolicy::Identity => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::KindMismatch(format!("policy {} does not apply to a {kind} model", self.name())))
        }
    }
}

/// Correct/total counts for one attribute, split by target state.
#[derive(Clone, Debug, PartialEq)]
pub struct AttrAccuracy {
    pub name: String,
    pub to_on: (usize, usize),
    pub to_off: (usize, usize),
}

impl AttrAccuracy {
    pub fn accuracy(&self) -> f64 {
        ratio(self.to_on.0 + self.to_off.0, self.to_on.1 + self.to_off.1)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyReport {
    pub kind: ModelKind,
    pub policy: SwitchPolicy,
    pub attrs: Vec<AttrAccuracy>,
}

impl AccuracyReport {
    /// Example-weighted mean over every attribute and target.
    pub fn overall(&self) -> f64 {
        let (c, t) = self
            .attrs
            .iter()
            .fold((0, 0), |(c, t), a| (c + a.to_on.0 + a.to_off.0, t + a.to_on.1 + a.to_off.1));
        ratio(c, t)
    }

    pub fn table(&self) -> String {
        let mut t = Table::new(&["attribute", "to on", "to off", "accuracy"]);
        for a in &self.attrs {
            t.row(vec![
                a.name.clone(),
                pct(ratio(a.to_on.0, a.to_on.1)),
                pct(ratio(a.to_off.0, a.to_off.1)),
                pct(a.accuracy()),
            ]);
        }
        t.row(vec!["overall".into(), String::new(), String::new(), pct(self.overall())]);
        format!("switch accuracy: {} ({})\n{}", self.kind, self.policy.name(), t.render())
    }

    pub fn records(&self) -> Vec<Record> {
        let base = format!("method1.{}", self.kind);
        let mut r = vec![Record::new(format!("{base}.overall"), self.overall())];
        for a in &self.attrs {
            r.push(Record::new(format!("{base}.{}.accuracy", a.name), a.accuracy()));
            r.push(Record::new(format!("{base}.{}.to_on", a.name), ratio(a.to_on.0, a.to_on.1)));
            r.push(Record::new(format!("{base}.{}.to_off", a.name), ratio(a.to_off.0, a.to_off.1)));
        }
        r
    }
}

/// The model's plain reconstruction of `x` (posterior means throughout).
pub fn reconstruct(model: &Model, x: &Tensor, y: &Tensor) -> Result<Tensor> {
    match model.kind() {
        ModelKind::Vae => {
            let z = model.encode_batch(x, None)?.z;
            Ok(model.decode_batch(&z, None)?.0)
        }
        ModelKind::CondVae | ModelKind::CondVaeInfo => switch_condvae_labels(model, x, y, y),
        ModelKind::Csvae => {
            let w = model.encode_batch(x, Some(y))?.w.expect("csvae has W");
            switch_csvae(model, x, &w)
        }
    }
}

/// Switches attribute `attr` of every row of `x` to `target` under `policy`.
/// Rows must all currently be in state `1 - target`.
fn switch_rows(
    model: &Model,
    policy: SwitchPolicy,
    valid: &(Tensor, Tensor),
    x: &Tensor,
    y: &Tensor,
    attr: usize,
    target: u8,
) -> Result<Tensor> {
    match policy {
        SwitchPolicy::Identity => reconstruct(model, x, y),
        SwitchPolicy::ClassMean => {
            let from = class_latent_mean(model, &valid.0, &valid.1, attr, 1 - target)?;
            let to = class_latent_mean(model, &valid.0, &valid.1, attr, target)?;
            switch_vae(model, x, &from, &to)
        }
        SwitchPolicy::LabelScale(p) => {
            let cond = crate::manipulate::switched_labels(y, attr, target, p);
            switch_condvae_labels(model, x, y, &cond)
        }
        SwitchPolicy::EmpiricalW => {
            let block = w_block_mean(model, &valid.0, &valid.1, attr, target)?;
            crate::manipulate::switch_csvae_block(model, x, y, attr, &block)
        }
    }
}

/// Method 1: for each test example and attribute, switch the attribute to
/// the opposite state (the current one under [`SwitchPolicy::Identity`]) and
/// score whether `C` predicts the target.
pub fn eval_switch_accuracy(
    model: &Model,
    clf: &AttrClassifier,
    d: &LabeledDataset,
    policy: SwitchPolicy,
) -> Result<AccuracyReport> {
    clf.require_usable()?;
    policy.check(model.kind())?;
    if d.k() != model.spec().k || d.dim() != model.spec().input.numel() {
        return Err(Error::Shape("dataset does not match the model".into()));
    }
    let part = |s: Split| {
        let rows = d.indices(s);
        (d.features(&rows), d.labels(&rows))
    };
    let test = part(Split::Test);
    if test.0.rows() == 0 {
        return Err(Error::Data("test split is empty".into()));
    }
    let valid = part(Split::Valid);
    let mut attrs = Vec::with_capacity(d.k());
    for attr in 0..d.k() {
        let mut acc = AttrAccuracy {
            name: d.attr_names[attr].clone(),
            to_on: (0, 0),
            to_off: (0, 0),
        };
        for current in [0u8, 1] {
            let rows = rows_with(&test.1, attr, current);
            if rows.is_empty() {
                continue;
            }
            let target = if policy == SwitchPolicy::Identity { current } else { 1 - current };
            let (xs, ys) = (test.0.select_rows(&rows), test.1.select_rows(&rows));
            let out = switch_rows(model, policy, &valid, &xs, &ys, attr, target)?;
            let pred = clf.predict(&out);
            let correct = (0..pred.rows()).filter(|&r| pred.row(r)[attr] == f64::from(target)).count();
            let slot = if target == 1 { &mut acc.to_on } else { &mut acc.to_off };
            slot.0 += correct;
            slot.1 += rows.len();
        }
        attrs.push(acc);
    }
    Ok(AccuracyReport {
        kind: model.kind(),
        policy,
        attrs,
    })
}
