pub mod eval;
pub mod generate;
pub mod inspect;
pub mod plot;
pub mod switch;
pub mod train;

use std::fs;
use std::path::{Path, PathBuf};

use csvae_core::data::LabeledDataset;
use csvae_core::io::{load_model, Checkpoint, Gray, RunConfig};
use csvae_core::models::Model;
use csvae_core::{Error, Result};

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

pub fn load_checkpoint_model(path: &Path) -> Result<(Model, RunConfig)> {
    load_model(&Checkpoint::load(path)?)
}

/// Attribute by name or index; the first when absent.
pub fn resolve_attr(d: &LabeledDataset, attr: Option<&str>) -> Result<usize> {
    let Some(a) = attr else { return Ok(0) };
    if let Some(i) = d.attr_index(a) {
        return Ok(i);
    }
    match a.parse::<usize>() {
        Ok(i) if i < d.k() => Ok(i),
        _ => Err(Error::Config(format!("unknown attribute `{a}` (have {})", d.attr_names.join(", ")))),
    }
}

pub fn check_compatible(model: &Model, d: &LabeledDataset) -> Result<()> {
    if model.spec().input.numel() != d.dim() || model.spec().k != d.k() {
        return Err(Error::Data(format!(
            "dataset ({} values, k = {}) does not match the model ({} values, k = {})",
            d.dim(),
            d.k(),
            model.spec().input.numel(),
            model.spec().k
        )));
    }
    Ok(())
}

/// First channel of a channel-major image row as a grey tile.
pub fn tile(row: &[f64], width: usize, height: usize) -> Result<Gray> {
    Gray::new(width, height, row[..width * height].to_vec())
}
