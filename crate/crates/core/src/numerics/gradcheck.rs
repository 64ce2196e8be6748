//! Central finite-difference gradient checking.

use super::{Graph, Tensor, Var};
use crate::Result;

/// Outcome of comparing analytic and numerical gradients.
#[derive(Clone, Debug)]
pub struct GradCheck {
    /// Largest `|a - n| / max(|a|, |n|)` over entries whose absolute error
    /// exceeds the floor. Entries within the floor count as exact.
    pub max_rel_err: f64,
    /// Largest `|a - n|` over all entries.
    pub max_abs_err: f64,
    pub entries: usize,
}

impl GradCheck {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.max_rel_err < rel_tol
    }
}

/// Checks `d f / d inputs` where `f` builds a scalar from one graph leaf per
/// input tensor. `step` is the central-difference half-width.
pub fn check_gradients<F>(inputs: &[Tensor], step: f64, abs_floor: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&Graph, &[Var]) -> Var,
{
    let g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
    let root = f(&g, &vars);
    let grads = g.gradients(root)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| grads.get(v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.numel()]))
        .collect();

    let eval = |perturbed: &[Tensor]| -> f64 {
        let g = Graph::new();
        let vars: Vec<Var> = perturbed.iter().map(|t| g.constant(t.clone())).collect();
        let r = f(&g, &vars);
        g.scalar(r)
    };

    let mut out = GradCheck {
        max_rel_err: 0.0,
        max_abs_err: 0.0,
        entries: 0,
    };
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (ti, t) in inputs.iter().enumerate() {
        for j in 0..t.numel() {
            let orig = t.data()[j];
            work[ti].data_mut()[j] = orig + step;
            let fp = eval(&work);
            work[ti].data_mut()[j] = orig - step;
            let fm = eval(&work);
            work[ti].data_mut()[j] = orig;
            let numeric = (fp - fm) / (2.0 * step);
            let a = analytic[ti][j];
            let abs = (a - numeric).abs();
            out.max_abs_err = out.max_abs_err.max(abs);
            if abs > abs_floor {
                out.max_rel_err = out.max_rel_err.max(abs / a.abs().max(numeric.abs()));
            }
            out.entries += 1;
        }
    }
    Ok(out)
}
