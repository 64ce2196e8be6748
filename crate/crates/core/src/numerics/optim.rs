//! Adam with bias correction, and a multi-step learning-rate schedule.

use super::{ParamId, ParamStore};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for one group of parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    ids: Vec<ParamId>,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(store: &ParamStore, ids: &[ParamId], config: AdamConfig) -> Self {
        let first: Vec<Vec<f64>> = ids.iter().map(|&id| vec![0.0; store.get(id).numel()]).collect();
        AdamState {
            config,
            ids: ids.to_vec(),
            second: first.clone(),
            first,
            step: 0,
        }
    }

    /// Rebuilds a state from saved moments.
    pub fn from_parts(
        config: AdamConfig,
        ids: Vec<ParamId>,
        first: Vec<Vec<f64>>,
        second: Vec<Vec<f64>>,
        step: u64,
    ) -> Result<Self> {
        if ids.len() != first.len() || ids.len() != second.len() {
            return Err(Error::Shape("adam state: moment count differs from parameter count".into()));
        }
        Ok(AdamState {
            config,
            ids,
            first,
            second,
            step,
        })
    }

    pub fn ids(&self) -> &[ParamId] {
        &self.ids
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.second
    }

    pub fn round_to_f32(&mut self) {
        for m in self.first.iter_mut().chain(self.second.iter_mut()) {
            m.iter_mut().for_each(|x| *x = *x as f32 as f64);
        }
    }
}

/// One bias-corrected Adam update of every parameter tracked by `state`,
/// using the gradient buffers in `store`. Missing gradient buffers count as
/// zero.
pub fn adam_step(store: &mut ParamStore, state: &mut AdamState, lr: f64) -> Result<()> {
    if !(lr > 0.0) {
        return Err(Error::InvalidArgument(format!("learning rate must be positive, got {lr}")));
    }
    for (slot, &id) in state.ids.iter().enumerate() {
        let n = store.get(id).numel();
        if state.first[slot].len() != n || state.second[slot].len() != n {
            return Err(Error::Shape(format!(
                "adam moments for {} have {} entries, parameter has {n}",
                store.name(id),
                state.first[slot].len()
            )));
        }
    }
    state.step += 1;
    let AdamConfig { beta1, beta2, eps } = state.config;
    let c1 = 1.0 - beta1.powi(state.step as i32);
    let c2 = 1.0 - beta2.powi(state.step as i32);
    for (slot, &id) in state.ids.iter().enumerate() {
        let grad = store.grad_or_zero(id);
        let m = &mut state.first[slot];
        let v = &mut state.second[slot];
        let p = store.get_mut(id).data_mut();
        for i in 0..p.len() {
            let g = grad[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            let mhat = m[i] / c1;
            let vhat = v[i] / c2;
            p[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Step decay: `lr(e) = initial_lr * gamma^(#milestones <= e)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LrSchedule {
    initial_lr: f64,
    milestones: Vec<usize>,
    gamma: f64,
}

impl LrSchedule {
    pub fn new(initial_lr: f64, milestones: Vec<usize>, gamma: f64) -> Result<Self> {
        if !(initial_lr > 0.0 && initial_lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("initial lr must be positive, got {initial_lr}")));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidArgument(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        if milestones.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "milestones must be strictly increasing: {milestones:?}"
            )));
        }
        Ok(LrSchedule {
            initial_lr,
            milestones,
            gamma,
        })
    }

    /// Initial rate 5e-4, milestones `3^i` for `i = 0..=6`, seven decays
    /// compounding to a factor of 0.1.
    pub fn standard() -> Self {
        LrSchedule {
            initial_lr: 1e-3 / 2.0,
            milestones: (0..=6).map(|i| 3usize.pow(i)).collect(),
            gamma: 0.1f64.powf(1.0 / 7.0),
        }
    }

    pub fn initial_lr(&self) -> f64 {
        self.initial_lr
    }

    pub fn milestones(&self) -> &[usize] {
        &self.milestones
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        let passed = self.milestones.iter().filter(|&&m| m <= epoch).count();
        self.initial_lr * self.gamma.powi(passed as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    #[test]
    fn first_step_matches_hand_evaluation() {
        let mut store = ParamStore::new();
        let id = store.add("p", Tensor::scalar(0.0));
        store.get_mut(id).zero_grad();
        store.get_mut(id).accumulate_grad(&[1.0]);
        let mut st = AdamState::new(&store, &[id], AdamConfig::default());
        adam_step(&mut store, &mut st, 5e-4).unwrap();
        let want = -5e-4 * (1.0 / (1.0 + 1e-8));
        assert!((store.get(id).item() - want).abs() < 1e-18);
        assert!((store.get(id).item() - -4.99999995e-4).abs() < 1e-12);
        assert_eq!(st.step(), 1);
    }

    #[test]
    fn zero_gradient_is_identity_from_fresh_state() {
        let mut store = ParamStore::new();
        let id = store.add("p", Tensor::vector(vec![0.5, -2.0]));
        store.zero_grad();
        let mut st = AdamState::new(&store, &[id], AdamConfig::default());
        for _ in 0..5 {
            adam_step(&mut store, &mut st, 1e-2).unwrap();
        }
        assert_eq!(store.get(id).data(), &[0.5, -2.0]);
        assert!(st.first_moments()[0].iter().all(|&m| m == 0.0));
        assert_eq!(st.step(), 5);
    }

    #[test]
    fn moments_decay_under_zero_gradient() {
        let mut store = ParamStore::new();
        let id = store.add("p", Tensor::scalar(1.0));
        store.get_mut(id).accumulate_grad(&[1.0]);
        let mut st = AdamState::new(&store, &[id], AdamConfig::default());
        adam_step(&mut store, &mut st, 1e-3).unwrap();
        let m1 = st.first_moments()[0][0];
        store.zero_grad();
        adam_step(&mut store, &mut st, 1e-3).unwrap();
        assert!(st.first_moments()[0][0].abs() < m1.abs());
    }

    #[test]
    fn descends_on_quadratic() {
        let mut store = ParamStore::new();
        let id = store.add("p", Tensor::scalar(1.0));
        let mut st = AdamState::new(&store, &[id], AdamConfig::default());
        for _ in 0..10 {
            store.zero_grad();
            let p = store.get(id).item();
            store.get_mut(id).accumulate_grad(&[2.0 * p]);
            adam_step(&mut store, &mut st, 5e-2).unwrap();
        }
        assert!(store.get(id).item().abs() < 1.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut store = ParamStore::new();
        let id = store.add("p", Tensor::vector(vec![1.0, 2.0]));
        let mut st = AdamState::from_parts(AdamConfig::default(), vec![id], vec![vec![0.0]], vec![vec![0.0]], 0).unwrap();
        assert!(matches!(adam_step(&mut store, &mut st, 1e-3), Err(Error::Shape(_))));
    }

    #[test]
    fn schedule_values() {
        let s = LrSchedule::standard();
        assert_eq!(s.lr_at(0), 5e-4);
        assert!((s.lr_at(2) - 3.59846e-4).abs() < 5e-9);
        assert!((s.lr_at(2) - 5e-4 * 0.1f64.powf(1.0 / 7.0)).abs() < 1e-18);
        assert!((s.lr_at(1000) - 5e-5).abs() < 1e-18);
    }

    #[test]
    fn schedule_is_piecewise_constant() {
        let s = LrSchedule::standard();
        let lrs: Vec<f64> = (0..800).map(|e| s.lr_at(e)).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
        let jumps = lrs.windows(2).filter(|w| w[1] != w[0]).count();
        assert_eq!(jumps, s.milestones().len());
    }

    #[test]
    fn schedule_validation() {
        assert!(LrSchedule::new(1e-3, vec![3, 3], 0.5).is_err());
        assert!(LrSchedule::new(1e-3, vec![1, 3], 1.5).is_err());
        assert!(LrSchedule::new(1e-3, vec![1, 3], 0.0).is_err());
        assert!(LrSchedule::new(1e-3, vec![], 1.0).is_ok());
    }
}
