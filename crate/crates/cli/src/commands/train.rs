use std::fmt::Write as _;
use std::fs;
use std::time::Instant;

use csvae_core::data::{LabeledDataset, Split};
use csvae_core::io::{load_trainer, trainer_checkpoint, Checkpoint, RunConfig};
use csvae_core::models::{InputShape, LossBreakdown, Model, ModelKind, Trainer};
use csvae_core::{Error, Result};

use super::ensure_dir;
use crate::{Context, TrainArgs};

pub fn input_shape(d: &LabeledDataset) -> InputShape {
    match d.image_shape() {
        Some(s) => InputShape::Image(s),
        None => InputShape::Vector(d.dim()),
    }
}

pub fn loss_csv(curve: &[LossBreakdown]) -> String {
    let mut s = format!("epoch,{}\n", LossBreakdown::FIELDS.join(","));
    for (e, l) in curve.iter().enumerate() {
        let vals: Vec<String> = l.values().iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{},{}", e + 1, vals.join(","));
    }
    s
}

fn version() -> String {
    match option_env!("CSVAE_GIT_DESCRIBE") {
        Some(d) => d.to_string(),
        None => format!("v{}", env!("CARGO_PKG_VERSION")),
    }
}

pub fn run(ctx: Context, a: &TrainArgs) -> Result<()> {
    let mut config = ctx.config.clone();
    if let Some(p) = &a.data {
        if !p.exists() {
            return Err(Error::MissingFile(p.clone()));
        }
        config.data_path = Some(p.clone());
    }
    if let Some(k) = &a.kind {
        config.kind = ModelKind::parse(k).ok_or_else(|| Error::Config(format!("unknown model kind `{k}`")))?;
    }
    if let Some(e) = a.epochs {
        config.epochs = e;
    }
    config.validate()?;
    let d = config.dataset()?;
    let rows = d.indices(Split::Train);
    if rows.is_empty() {
        return Err(Error::Data("the dataset has no training examples".into()));
    }
    let (x, y) = (d.features(&rows), d.labels(&rows));

    let (mut trainer, config) = match &a.resume {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            let echoed = csvae_core::io::checkpoint::parse_echo(&ck.config)?;
            let mut tc = echoed.train_config()?;
            tc.epochs = a.epochs.unwrap_or(config.epochs);
            let (t, mut c) = load_trainer(&ck, tc)?;
            c.epochs = t.config().epochs;
            c.data_path = config.data_path.clone();
            c.out_dir = config.out_dir.clone();
            (t, c)
        }
        None => {
            let spec = config.model_spec(input_shape(&d), d.k())?;
            let model = Model::new(spec, config.seed)?;
            (Trainer::new(model, config.train_config()?)?, config)
        }
    };
    crate::commands::check_compatible(trainer.model(), &d)?;
    let out = ensure_dir(&ctx.out.clone().unwrap_or_else(|| config.out_dir.clone()))?;
    let config = RunConfig { out_dir: out.clone(), ..config };

    println!(
        "training {} on {} examples ({} parameters), epochs {}..{}",
        trainer.model().kind(),
        rows.len(),
        trainer.model().store().numel(),
        trainer.epoch() + 1,
        trainer.config().epochs
    );
    let start = Instant::now();
    while !trainer.is_done() {
        let l = trainer.run_epoch(&x, &y)?;
        let e = trainer.epoch();
        if e == 1 || e % 10 == 0 || trainer.is_done() {
            println!(
                "epoch {e:>4}  main {:.4}  recon {:.4}  kl_w {:.4}  kl_z {:.4}  m2 {:.4}  n {:.4}",
                l.main_total, l.recon, l.kl_w, l.kl_z, l.m2, l.n
            );
        }
    }
    let wall = start.elapsed().as_secs_f64();

    let ckpt = out.join("checkpoint.csvc");
    trainer_checkpoint(&trainer, &config).save(&ckpt)?;
    fs::write(out.join("loss.csv"), loss_csv(trainer.curve()))?;
    let mut manifest = config.to_text();
    let _ = writeln!(manifest, "version = {}", version());
    let _ = writeln!(manifest, "wall_time_seconds = {wall:.3}");
    let _ = writeln!(manifest, "epochs_completed = {}", trainer.epoch());
    fs::write(out.join("manifest.txt"), manifest)?;
    println!("wrote {} ({wall:.1}s)", ckpt.display());
    Ok(())
}
