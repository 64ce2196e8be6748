use crate::nn::Bind;
use crate::numerics::{adam_step, AdamConfig, AdamState, Graph, LrSchedule, Tensor};
use crate::rng::{domain, mix, StreamRng};
use crate::stochastic::cross_entropy_batch;
use crate::{Error, Result};

use super::loss::{LatentNoise, LossBreakdown};
use super::Model;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: LrSchedule,
    pub adam: AdamConfig,
    /// Adversary updates per main update.
    pub adv_steps: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            batch_size: 64,
            schedule: LrSchedule::standard(),
            adam: AdamConfig::default(),
            adv_steps: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.adv_steps == 0 {
            return Err(Error::Config("adv_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Training state: model, both optimiser states and the per-epoch loss curve.
/// Parameters and moments are rounded to `f32` after every epoch, so a
/// checkpointed trainer resumes exactly where a continuous run would be.
#[derive(Clone, Debug)]
pub struct Trainer {
    model: Model,
    config: TrainConfig,
    main_opt: AdamState,
    adv_opt: Option<AdamState>,
    curve: Vec<LossBreakdown>,
}

impl Trainer {
    pub fn new(mut model: Model, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        model.store_mut().round_to_f32();
        let main_opt = AdamState::new(model.store(), &model.main_params(), config.adam);
        let adv_opt = model
            .has_adversary()
            .then(|| AdamState::new(model.store(), &model.adversary_params(), config.adam));
        Ok(Trainer {
            model,
            config,
            main_opt,
            adv_opt,
            curve: Vec::new(),
        })
    }

    /// Continues from saved state; the next epoch index is `curve.len()`.
    pub fn resume(
        model: Model,
        config: TrainConfig,
        main_opt: AdamState,
        adv_opt: Option<AdamState>,
        curve: Vec<LossBreakdown>,
    ) -> Result<Self> {
        config.validate()?;
        if main_opt.ids() != model.main_params().as_slice() {
            return Err(Error::Shape("optimizer state does not match the model's main parameters".into()));
        }
        if adv_opt.as_ref().map(|s| s.ids().to_vec()) != model.has_adversary().then(|| model.adversary_params()) {
            return Err(Error::Shape("optimizer state does not match the model's adversary".into()));
        }
        Ok(Trainer {
            model,
            config,
            main_opt,
            adv_opt,
            curve,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn set_epochs(&mut self, epochs: usize) {
        self.config.epochs = epochs;
    }

    pub fn main_opt(&self) -> &AdamState {
        &self.main_opt
    }

    pub fn adv_opt(&self) -> Option<&AdamState> {
        self.adv_opt.as_ref()
    }

    pub fn curve(&self) -> &[LossBreakdown] {
        &self.curve
    }

    /// Epochs completed so far.
    pub fn epoch(&self) -> usize {
        self.curve.len()
    }

    pub fn is_done(&self) -> bool {
        self.epoch() >= self.config.epochs
    }

    pub fn into_parts(self) -> (Model, Vec<LossBreakdown>) {
        (self.model, self.curve)
    }

    /// One pass over `(x, y)` in a seed- and epoch-determined order.
    pub fn run_epoch(&mut self, x: &Tensor, y: &Tensor) -> Result<LossBreakdown> {
        let epoch = self.epoch();
        let n = x.rows();
        if n == 0 || y.rows() != n {
            return Err(Error::Shape(format!("training set has {n} inputs and {} label rows", y.rows())));
        }
        let mut order: Vec<usize> = (0..n).collect();
        StreamRng::new(self.config.seed, domain::SHUFFLE, epoch as u64).shuffle(&mut order);
        let lr = self.config.schedule.lr_at(epoch);
        let diverged = |detail: String| Error::Diverged { epoch, detail };

        let mut sums = [0.0; 7];
        for (b, idx) in order.chunks(self.config.batch_size).enumerate() {
            let xb = x.select_rows(idx);
            let yb = y.select_rows(idx);
            let mut rng = StreamRng::new(self.config.seed, domain::NOISE, mix(&[epoch as u64, b as u64]));
            let noise = LatentNoise::sample(&self.model, idx.len(), &mut rng);
            let lg = self.model.loss_graph(&xb, &yb, &noise)?;
            let losses = lg.breakdown();
            if !losses.is_finite() {
                return Err(diverged(format!("non-finite loss in batch {b}: {losses:?}")));
            }
            for (s, v) in sums.iter_mut().zip(losses.values()) {
                *s += v * idx.len() as f64;
            }
            let as_div = |e: Error| match e {
                Error::NonFinite(d) => diverged(d),
                e => e,
            };

            let store = self.model.store_mut();
            store.zero_grad();
            lg.graph.backward(lg.main_total, store).map_err(as_div)?;
            adam_step(store, &mut self.main_opt, lr)?;

            if let (Some(adv_total), Some(opt)) = (lg.adversary_total, self.adv_opt.as_mut()) {
                store.zero_grad();
                lg.graph.backward(adv_total, store).map_err(as_div)?;
                adam_step(store, opt, lr)?;
                if self.config.adv_steps > 1 {
                    let z = lg.graph.value(lg.z_sample);
                    for _ in 1..self.config.adv_steps {
                        adversary_step(&mut self.model, &z, &yb, opt, lr).map_err(as_div)?;
                    }
                }
            }
        }
        self.model.store_mut().round_to_f32();
        self.main_opt.round_to_f32();
        if let Some(o) = self.adv_opt.as_mut() {
            o.round_to_f32();
        }
        let mean = LossBreakdown::from_values(sums.map(|s| s / n as f64));
        self.curve.push(mean);
        Ok(mean)
    }

    /// Runs the remaining epochs.
    pub fn run(&mut self, x: &Tensor, y: &Tensor) -> Result<()> {
        while !self.is_done() {
            self.run_epoch(x, y)?;
        }
        Ok(())
    }
}

fn adversary_step(model: &mut Model, z: &Tensor, y: &Tensor, opt: &mut AdamState, lr: f64) -> Result<()> {
    let g = Graph::new();
    let (_, _, _, adv) = model.parts();
    let adv = adv.expect("adversary");
    let logits = adv.forward(&g, model.store(), g.constant(z.clone()), Bind::Trainable);
    let ce = cross_entropy_batch(&g, logits, y, model.spec().label_mode);
    let total = g.scale(ce, model.spec().betas.adversary() / z.rows() as f64);
    let store = model.store_mut();
    store.zero_grad();
    g.backward(total, store)?;
    adam_step(store, opt, lr)
}

/// Trains a model from scratch for `config.epochs` epochs.
pub fn train(model: Model, x: &Tensor, y: &Tensor, config: TrainConfig) -> Result<(Model, Vec<LossBreakdown>)> {
    let mut t = Trainer::new(model, config)?;
    t.run(x, y)?;
    Ok(t.into_parts())
}
