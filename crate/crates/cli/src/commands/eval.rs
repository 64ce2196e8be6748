use std::fmt::Write as _;
use std::fs;

use csvae_core::data::load_dataset;
use csvae_core::eval::{
    classifier_spec_for, default_candidates, eval_identity_mse, eval_switch_accuracy, mi_probe, pct,
    render_records, train_attr_classifier, AttrClassifier, FitConfig, ProbeConfig, Record, SwitchPolicy, Table,
};
use csvae_core::{Error, Result};

use super::{check_compatible, ensure_dir, load_checkpoint_model, resolve_attr};
use crate::{Context, EvalArgs};

pub fn run(ctx: &Context, a: &EvalArgs) -> Result<()> {
    if !(a.method1 || a.method2 || a.mi) {
        return Err(Error::Config("choose at least one of --method1, --method2, --mi".into()));
    }
    let d = load_dataset(&a.data)?;
    let models = a
        .checkpoints
        .iter()
        .map(|p| load_checkpoint_model(p).map(|(m, _)| m))
        .collect::<Result<Vec<_>>>()?;
    for m in &models {
        check_compatible(m, &d)?;
    }
    let out = ensure_dir(&ctx.out_dir())?;
    let seed = ctx.config.seed;
    let mut text = String::new();
    let mut records: Vec<Record> = Vec::new();

    if a.method1 {
        let clf = match (&a.classifier, a.train_classifier) {
            (Some(p), _) => AttrClassifier::load(p)?,
            (None, true) => {
                let c = train_attr_classifier(&d, &classifier_spec_for(&d), &FitConfig { seed, ..Default::default() })?;
                c.save(&out.join("classifier.csvc"))?;
                c
            }
            (None, false) => return Err(Error::Config("--method1 needs --classifier or --train-classifier".into())),
        };
        let _ = writeln!(
            text,
            "attribute classifier: validation {:?}, majority {:?}, test {:?}\n",
            clf.valid_accuracy, clf.majority, clf.test_accuracy
        );
        clf.require_usable()?;
        let mut header = vec!["model".to_string()];
        header.extend(d.attr_names.iter().cloned());
        header.push("overall".into());
        let mut t = Table::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
        for m in &models {
            let r = eval_switch_accuracy(m, &clf, &d, SwitchPolicy::standard(m.kind()))?;
            let mut row = vec![m.kind().to_string()];
            row.extend(r.attrs.iter().map(|x| pct(x.accuracy())));
            row.push(pct(r.overall()));
            t.row(row);
            text.push_str(&r.table());
            text.push('\n');
            records.extend(r.records());
        }
        let _ = writeln!(text, "switched-output accuracy\n{}", t.render());
    }

    if a.method2 {
        let attr = resolve_attr(&d, a.attr.as_deref())?;
        let mut t = Table::new(&["model", "target - changed", "original - changed", "target - original"]);
        for m in &models {
            let cands = default_candidates(m, &d, attr, a.grid_steps)?;
            let r = eval_identity_mse(m, &d, attr, &cands)?;
            t.row(vec![
                m.kind().to_string(),
                format!("{:.4}", r.target_changed),
                format!("{:.4}", r.original_changed),
                format!("{:.4}", r.target_original),
            ]);
            text.push_str(&r.table());
            text.push('\n');
            records.extend(r.records());
        }
        let _ = writeln!(text, "identity-pair squared error\n{}", t.render());
    }

    if a.mi {
        for m in &models {
            let est = mi_probe(m, &d, &ProbeConfig::like_adversary(m, seed))?;
            let _ = writeln!(text, "label information in z: {}\n{}", m.kind(), est.table("z"));
            records.extend(est.records(&format!("mi.{}", m.kind())));
        }
    }

    print!("{text}");
    let rec = render_records(&records);
    print!("{rec}");
    fs::write(out.join("eval.txt"), &text)?;
    fs::write(out.join("metrics.txt"), rec)?;
    Ok(())
}
