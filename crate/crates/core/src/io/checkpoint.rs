//! `CSVC` checkpoints: named f32 tensors, a config echo and optional
//! optimizer state, closed by a CRC32 trailer.

use std::fs;
use std::path::Path;

use crate::io::bytes::{verify_crc, Reader, Writer};
use crate::io::config::{parse_kv, RunConfig};
use crate::models::{LossBreakdown, Model, ModelKind, TrainConfig, Trainer};
use crate::numerics::{AdamConfig, AdamState, ParamId, ParamStore, Tensor};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"CSVC";
pub const CHECKPOINT_VERSION: u32 = 1;
/// Kind byte of standalone attribute classifiers; model kinds use 0..=3.
pub const CLASSIFIER_KIND: u8 = 100;
const OPTIMIZER_TAG: [u8; 4] = *b"ADAM";
const WHAT: &str = "checkpoint";

#[derive(Clone, Debug, PartialEq)]
pub struct TensorRecord {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamGroup {
    pub config: AdamConfig,
    pub step: u64,
    /// Indices into the checkpoint's tensor list.
    pub params: Vec<u32>,
    pub first: Vec<Vec<f32>>,
    pub second: Vec<Vec<f32>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerRecord {
    pub groups: Vec<AdamGroup>,
    pub curve: Vec<LossBreakdown>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: u8,
    pub config: String,
    pub tensors: Vec<TensorRecord>,
    pub optimizer: Option<OptimizerRecord>,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(&CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.u8(self.kind);
        w.str32(&self.config);
        w.u32(self.tensors.len() as u32);
        for t in &self.tensors {
            w.str16(&t.name);
            w.u8(t.dims.len() as u8);
            for &d in &t.dims {
                w.u64(d as u64);
            }
            for &v in &t.data {
                w.f32(v);
            }
        }
        if let Some(o) = &self.optimizer {
            w.bytes(&OPTIMIZER_TAG);
            w.u32(o.groups.len() as u32);
            for g in &o.groups {
                w.f64(g.config.beta1);
                w.f64(g.config.beta2);
                w.f64(g.config.eps);
                w.u64(g.step);
                w.u32(g.params.len() as u32);
                for (i, &p) in g.params.iter().enumerate() {
                    w.u32(p);
                    for &v in g.first[i].iter().chain(&g.second[i]) {
                        w.f32(v);
                    }
                }
            }
            w.u32(o.curve.len() as u32);
            for row in &o.curve {
                for v in row.values() {
                    w.f64(v);
                }
            }
        }
        w.finish_with_crc()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, WHAT);
        r.magic(CHECKPOINT_MAGIC)?;
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::UnknownVersion { what: WHAT, version });
        }
        let kind = r.u8()?;
        let config = r.str32()?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let name = r.str16()?;
            let rank = r.u8()? as usize;
            let dims = (0..rank).map(|_| r.len_u64()).collect::<Result<Vec<_>>>()?;
            let n = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or(Error::Truncated { what: WHAT })?;
            r.ensure(n.saturating_mul(4))?;
            let data = (0..n).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
            tensors.push(TensorRecord { name, dims, data });
        }
        let optimizer = if r.at_trailer() || r.remaining() < 4 {
            None
        } else {
            if r.take(4)? != OPTIMIZER_TAG {
                return Err(Error::Data("checkpoint: unknown section tag".into()));
            }
            let ng = r.u32()? as usize;
            let mut groups = Vec::with_capacity(ng.min(16));
            for _ in 0..ng {
                let config = AdamConfig {
                    beta1: r.f64()?,
                    beta2: r.f64()?,
                    eps: r.f64()?,
                };
                let step = r.u64()?;
                let np = r.u32()? as usize;
                let (mut params, mut first, mut second) = (Vec::new(), Vec::new(), Vec::new());
                for _ in 0..np {
                    let p = r.u32()?;
                    let len = tensors
                        .get(p as usize)
                        .map(|t| t.data.len())
                        .ok_or_else(|| Error::Data(format!("checkpoint: optimizer refers to tensor {p}")))?;
                    r.ensure(len.saturating_mul(8))?;
                    first.push((0..len).map(|_| r.f32()).collect::<Result<Vec<_>>>()?);
                    second.push((0..len).map(|_| r.f32()).collect::<Result<Vec<_>>>()?);
                    params.push(p);
                }
                groups.push(AdamGroup {
                    config,
                    step,
                    params,
                    first,
                    second,
                });
            }
            let epochs = r.u32()? as usize;
            let mut curve = Vec::with_capacity(epochs.min(100_000));
            for _ in 0..epochs {
                let mut v = [0.0; 7];
                for x in &mut v {
                    *x = r.f64()?;
                }
                curve.push(LossBreakdown::from_values(v));
            }
            Some(OptimizerRecord { groups, curve })
        };
        r.finish_crc()?;
        Ok(Checkpoint {
            kind,
            config,
            tensors,
            optimizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::decode(&fs::read(path)?)
    }

    /// Checks only the checksum trailer.
    pub fn verify(bytes: &[u8]) -> Result<()> {
        verify_crc(bytes, WHAT)
    }

    pub fn model_kind(&self) -> Option<ModelKind> {
        ModelKind::from_code(self.kind)
    }

    /// Tensors of a parameter store, in store order.
    pub fn tensors_of(store: &ParamStore) -> Vec<TensorRecord> {
        store
            .iter()
            .map(|(_, name, t)| TensorRecord {
                name: name.to_string(),
                dims: t.shape().to_vec(),
                data: t.data().iter().map(|&v| v as f32).collect(),
            })
            .collect()
    }

    /// Overwrites every tensor of `store` with the record of the same name.
    /// Names, count and shapes must match exactly.
    pub fn fill_store(&self, store: &mut ParamStore) -> Result<()> {
        if self.tensors.len() != store.len() {
            return Err(Error::Data(format!(
                "checkpoint has {} tensors, model expects {}",
                self.tensors.len(),
                store.len()
            )));
        }
        for (i, rec) in self.tensors.iter().enumerate() {
            let id = ParamId(i);
            if store.name(id) != rec.name || store.get(id).shape() != rec.dims.as_slice() {
                return Err(Error::Data(format!(
                    "checkpoint tensor {i} is `{}` {:?}, model expects `{}` {:?}",
                    rec.name,
                    rec.dims,
                    store.name(id),
                    store.get(id).shape()
                )));
            }
            store.set_value(id, rec.data.iter().map(|&v| f64::from(v)).collect())?;
        }
        Ok(())
    }
}

fn group_of(state: &AdamState) -> AdamGroup {
    let to32 = |v: &[Vec<f64>]| v.iter().map(|m| m.iter().map(|&x| x as f32).collect()).collect();
    AdamGroup {
        config: state.config,
        step: state.step(),
        params: state.ids().iter().map(|id| id.0 as u32).collect(),
        first: to32(state.first_moments()),
        second: to32(state.second_moments()),
    }
}

fn state_of(g: &AdamGroup) -> Result<AdamState> {
    let to64 = |v: &[Vec<f32>]| v.iter().map(|m| m.iter().map(|&x| f64::from(x)).collect()).collect();
    AdamState::from_parts(
        g.config,
        g.params.iter().map(|&p| ParamId(p as usize)).collect(),
        to64(&g.first),
        to64(&g.second),
        g.step,
    )
}

/// Config echo with the model's resolved shape, label count and betas.
fn echo(model: &Model, config: &RunConfig) -> String {
    let mut c = config.clone();
    c.resolve(model.spec());
    c.to_text()
}

pub fn model_checkpoint(model: &Model, config: &RunConfig) -> Checkpoint {
    Checkpoint {
        kind: model.kind().code(),
        config: echo(model, config),
        tensors: Checkpoint::tensors_of(model.store()),
        optimizer: None,
    }
}

/// Checkpoint including both Adam states and the loss curve.
pub fn trainer_checkpoint(trainer: &Trainer, config: &RunConfig) -> Checkpoint {
    let mut ck = model_checkpoint(trainer.model(), config);
    let mut groups = vec![group_of(trainer.main_opt())];
    groups.extend(trainer.adv_opt().map(group_of));
    ck.optimizer = Some(OptimizerRecord {
        groups,
        curve: trainer.curve().to_vec(),
    });
    ck
}

/// Parses a config echo without touching the file system.
pub fn parse_echo(text: &str) -> Result<RunConfig> {
    let mut c = RunConfig::default();
    for (k, v) in parse_kv(text)? {
        c.set(&k, &v)?;
    }
    Ok(c)
}

/// Rebuilds the model stored in a checkpoint.
pub fn load_model(ck: &Checkpoint) -> Result<(Model, RunConfig)> {
    let kind = ck
        .model_kind()
        .ok_or_else(|| Error::KindMismatch(format!("checkpoint kind {} is not a generative model", ck.kind)))?;
    let config = parse_echo(&ck.config)?;
    if config.kind != kind {
        return Err(Error::KindMismatch(format!("header says {kind}, config echo says {}", config.kind)));
    }
    let (Some(input), Some(k)) = (config.input, config.k) else {
        return Err(Error::Data("checkpoint config echo lacks model.input / model.k".into()));
    };
    let spec = config.model_spec(input, k)?;
    let mut model = Model::new(spec, 0)?;
    ck.fill_store(model.store_mut())?;
    Ok((model, config))
}

/// Rebuilds a trainer to continue training; `train` overrides the echoed
/// epoch budget and other optimisation settings.
pub fn load_trainer(ck: &Checkpoint, train: TrainConfig) -> Result<(Trainer, RunConfig)> {
    let (model, config) = load_model(ck)?;
    let opt = ck
        .optimizer
        .as_ref()
        .ok_or_else(|| Error::Data("checkpoint carries no optimizer state; cannot resume".into()))?;
    let main = opt.groups.first().ok_or_else(|| Error::Data("missing main optimizer group".into()))?;
    let adv = opt.groups.get(1).map(state_of).transpose()?;
    let trainer = Trainer::resume(model, train, state_of(main)?, adv, opt.curve.clone())?;
    Ok((trainer, config))
}

/// Tensor as stored (for inspection).
pub fn record_tensor(rec: &TensorRecord) -> Result<Tensor> {
    Tensor::new(rec.dims.clone(), rec.data.iter().map(|&v| f64::from(v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelSpec;

    fn model() -> (Model, RunConfig) {
        let spec = ModelSpec::vector(ModelKind::Csvae, 3, 1);
        let m = Model::new(spec, 1).unwrap();
        (m, RunConfig::default())
    }

    #[test]
    fn round_trip_model_bit_exact() {
        let (m, c) = model();
        let ck = model_checkpoint(&m, &c);
        let bytes = ck.encode();
        Checkpoint::verify(&bytes).unwrap();
        let back = Checkpoint::decode(&bytes).unwrap();
        assert_eq!(back, ck);
        let (m2, _) = load_model(&back).unwrap();
        assert_eq!(m2.store(), m.store());
        assert_eq!(back.tensors.len(), m.store().len());
    }

    #[test]
    fn flipped_byte_fails_checksum() {
        let (m, c) = model();
        let mut bytes = model_checkpoint(&m, &c).encode();
        let i = bytes.len() - 20;
        bytes[i] ^= 0x01;
        assert!(matches!(Checkpoint::verify(&bytes), Err(Error::Checksum { .. })));
        assert!(matches!(Checkpoint::decode(&bytes), Err(Error::Checksum { .. })));
    }

    #[test]
    fn truncation_and_magic() {
        let (m, c) = model();
        let bytes = model_checkpoint(&m, &c).encode();
        assert!(matches!(Checkpoint::decode(&bytes[..bytes.len() / 2]), Err(Error::Truncated { .. })));
        let mut bad = bytes.clone();
        bad[1] = b'Z';
        assert!(matches!(Checkpoint::decode(&bad), Err(Error::BadMagic { .. })));
    }
}
