use std::fs;

use csvae_core::io::checkpoint::{record_tensor, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
use csvae_core::io::{Checkpoint, CLASSIFIER_KIND};
use csvae_core::models::ModelKind;
use csvae_core::{Error, Result};

use crate::InspectArgs;

pub fn run(a: &InspectArgs) -> Result<()> {
    if !a.checkpoint.exists() {
        return Err(Error::MissingFile(a.checkpoint.clone()));
    }
    let bytes = fs::read(&a.checkpoint)?;
    println!("file: {} ({} bytes)", a.checkpoint.display(), bytes.len());
    if let Err(e) = Checkpoint::verify(&bytes) {
        println!("checksum: FAILED ({e})");
        return Err(e);
    }
    println!("checksum: OK");
    let ck = Checkpoint::decode(&bytes)?;
    let kind = match ck.kind {
        CLASSIFIER_KIND => "attribute classifier".to_string(),
        k => ModelKind::from_code(k).map_or_else(|| format!("unknown ({k})"), |m| m.to_string()),
    };
    println!(
        "magic: {}  version: {CHECKPOINT_VERSION}  kind: {kind}",
        String::from_utf8_lossy(&CHECKPOINT_MAGIC)
    );
    println!("tensors: {}", ck.tensors.len());
    for rec in &ck.tensors {
        let t = record_tensor(rec)?;
        println!("  {:<32} {:>14}  norm {:.6}", rec.name, format!("{:?}", rec.dims), t.norm());
    }
    match &ck.optimizer {
        Some(o) => println!(
            "optimizer: {} adam group(s), step {}, {} recorded epochs",
            o.groups.len(),
            o.groups.first().map_or(0, |g| g.step),
            o.curve.len()
        ),
        None => println!("optimizer: none"),
    }
    println!("config:");
    for line in ck.config.lines() {
        println!("  {line}");
    }
    Ok(())
}
