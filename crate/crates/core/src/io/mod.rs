//! File formats: run configs, checkpoints, PGM images and SVG plots.

pub mod bytes;
pub mod checkpoint;
pub mod config;
pub mod image;
pub mod svg;

pub use checkpoint::{load_model, load_trainer, model_checkpoint, trainer_checkpoint, Checkpoint, CLASSIFIER_KIND};
pub use config::RunConfig;
pub use image::{mosaic, Gray};
pub use svg::Scatter;
