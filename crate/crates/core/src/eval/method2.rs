use crate::data::{LabeledDataset, Split};
use crate::manipulate::{class_latent_mean, switch_condvae, switch_csvae_block, switch_vae, w_grid, w_grid_around};
use crate::models::{Model, ModelKind};
use crate::numerics::Tensor;
use crate::{Error, Result};

use super::report::{Record, Table};

/// One way of switching an attribute to a fixed target state.
#[derive(Clone, Debug, PartialEq)]
pub enum Candidate {
    /// VAE latent translation `z - from + to`.
    Translate { from: Vec<f64>, to: Vec<f64> },
    /// CondVAE conditioning value for the attribute.
    Label(f64),
    /// CSVAE point in the attribute's W block.
    WBlock(Vec<f64>),
}

impl Candidate {
    pub fn describe(&self) -> String {
        let v = |p: &[f64]| p.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(",");
        match self {
            Candidate::Translate { .. } => "class-mean".into(),
            Candidate::Label(p) => format!("p={p}"),
            Candidate::WBlock(p) => format!("w=({})", v(p)),
        }
    }
}

/// Candidates for switching to the on state and to the off state.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    pub to_on: Vec<Candidate>,
    pub to_off: Vec<Candidate>,
}

impl CandidateSet {
    fn for_target(&self, target: u8) -> &[Candidate] {
        if target == 1 {
            &self.to_on
        } else {
            &self.to_off
        }
    }
}

/// Conditioning values searched for CondVAE models when switching on.
pub const LABEL_SCALES: [f64; 8] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0];

/// The default search space: the validation class-mean translation (VAE),
/// `p` in [`LABEL_SCALES`] with 0 for the off state (CondVAE variants), and
/// a `steps`-per-dimension W grid around each prior mean spanning two prior
/// standard deviations (CSVAE).
pub fn default_candidates(model: &Model, d: &LabeledDataset, attr: usize, steps: usize) -> Result<CandidateSet> {
    Ok(match model.kind() {
        ModelKind::Vae => {
            let rows = d.indices(Split::Valid);
            let (x, y) = (d.features(&rows), d.labels(&rows));
            let off = class_latent_mean(model, &x, &y, attr, 0)?;
            let on = class_latent_mean(model, &x, &y, attr, 1)?;
            CandidateSet {
                to_on: vec![Candidate::Translate { from: off.clone(), to: on.clone() }],
                to_off: vec![Candidate::Translate { from: on, to: off }],
            }
        }
        ModelKind::CondVae | ModelKind::CondVaeInfo => CandidateSet {
            to_on: LABEL_SCALES.iter().map(|&p| Candidate::Label(p)).collect(),
            to_off: vec![Candidate::Label(0.0)],
        },
        ModelKind::Csvae => {
            let spec = model.spec();
            let st = vec![steps; spec.w_dim_per_attr];
            let on = w_grid(spec, attr, &st, None)?;
            let off_extent: Vec<f64> = spec.prior.off_sigma.iter().map(|s| 2.0 * s).collect();
            let off = w_grid_around(spec, attr, &spec.prior.off_mean, &off_extent, &st)?;
            CandidateSet {
                to_on: on.blocks().into_iter().map(Candidate::WBlock).collect(),
                to_off: off.blocks().into_iter().map(Candidate::WBlock).collect(),
            }
        }
    })
}

/// Switches attribute `attr` of every row to `target` with `cand`.
pub fn apply_candidate(model: &Model, x: &Tensor, y: &Tensor, attr: usize, target: u8, cand: &Candidate) -> Result<Tensor> {
    match (model.kind(), cand) {
        (ModelKind::Vae, Candidate::Translate { from, to }) => switch_vae(model, x, from, to),
        (ModelKind::CondVae | ModelKind::CondVaeInfo, Candidate::Label(p)) => switch_condvae(model, x, y, attr, target, *p),
        (ModelKind::Csvae, Candidate::WBlock(b)) => switch_csvae_block(model, x, y, attr, b),
        (k, c) => Err(Error::KindMismatch(format!("candidate {} does not apply to a {k} model", c.describe()))),
    }
}

/// Squared Euclidean distance.
pub fn sq_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn mean_sq_error(a: &Tensor, b: &Tensor) -> f64 {
    let n = a.rows();
    (0..n).map(|r| sq_error(a.row(r), b.row(r))).sum::<f64>() / n.max(1) as f64
}

/// Identity pairs as `(source, target)` rows switching to `target_state`.
fn directed(pairs: &[(usize, usize)], target_state: u8) -> Vec<(usize, usize)> {
    pairs
        .iter()
        .map(|&(off, on)| if target_state == 1 { (off, on) } else { (on, off) })
        .collect()
}

struct PairBatch {
    source_x: Tensor,
    source_y: Tensor,
    target_x: Tensor,
}

fn pair_batch(d: &LabeledDataset, pairs: &[(usize, usize)]) -> PairBatch {
    let src: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let tgt: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    PairBatch {
        source_x: d.features(&src),
        source_y: d.labels(&src),
        target_x: d.features(&tgt),
    }
}

/// Validation losses of every candidate for one target state, and the index
/// of the first minimiser.
#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub target: u8,
    pub losses: Vec<f64>,
    pub chosen: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MseReport {
    pub kind: ModelKind,
    pub attr: String,
    /// Test loss: mean squared distance between target and switched source.
    pub target_changed: f64,
    pub original_changed: f64,
    pub target_original: f64,
    /// Chosen candidate for the off and on target states.
    pub chosen: [Candidate; 2],
    pub sweeps: [Sweep; 2],
    pub test_pairs: usize,
}

impl MseReport {
    pub fn table(&self) -> String {
        let mut t = Table::new(&["model", "target - changed", "original - changed", "target - original"]);
        t.row(vec![
            self.kind.to_string(),
            format!("{:.4}", self.target_changed),
            format!("{:.4}", self.original_changed),
            format!("{:.4}", self.target_original),
        ]);
        format!(
            "identity-pair squared error, attribute {} ({} test pairs, both directions)\n{}chosen: on {}, off {}\n",
            self.attr,
            self.test_pairs,
            t.render(),
            self.chosen[1].describe(),
            self.chosen[0].describe()
        )
    }

    pub fn records(&self) -> Vec<Record> {
        let base = format!("method2.{}.{}", self.kind, self.attr);
        vec![
            Record::new(format!("{base}.target_changed"), self.target_changed),
            Record::new(format!("{base}.original_changed"), self.original_changed),
            Record::new(format!("{base}.target_original"), self.target_original),
            Record::new(format!("{base}.valid_loss.to_on"), self.sweeps[1].losses[self.sweeps[1].chosen]),
            Record::new(format!("{base}.valid_loss.to_off"), self.sweeps[0].losses[self.sweeps[0].chosen]),
        ]
    }
}

/// Mean over directed pairs of `|| x_target - G(x_source, cand) ||^2`.
pub fn candidate_loss(
    model: &Model,
    d: &LabeledDataset,
    pairs: &[(usize, usize)],
    attr: usize,
    target: u8,
    cand: &Candidate,
) -> Result<f64> {
    let b = pair_batch(d, &directed(pairs, target));
    let out = apply_candidate(model, &b.source_x, &b.source_y, attr, target, cand)?;
    Ok(mean_sq_error(&b.target_x, &out))
}

/// Identity pairs for `attr` whose rows lie in split `s`.
pub fn pairs_in(d: &LabeledDataset, attr: usize, s: Split) -> Result<Vec<(usize, usize)>> {
    Ok(d.pairs(attr)?.into_iter().filter(|p| d.split[p.0] == s).collect())
}

/// Method 2: picks the candidate minimising the pair loss on the validation
/// split for each target state, then reports the three squared-error
/// columns on the test split over both switching directions.
pub fn eval_identity_mse(model: &Model, d: &LabeledDataset, attr: usize, candidates: &CandidateSet) -> Result<MseReport> {
    let valid = pairs_in(d, attr, Split::Valid)?;
    let test = pairs_in(d, attr, Split::Test)?;
    if valid.is_empty() || test.is_empty() {
        return Err(Error::Protocol("no identity pairs in the validation or test split".into()));
    }
    if candidates.to_on.is_empty() || candidates.to_off.is_empty() {
        return Err(Error::InvalidArgument("empty candidate set".into()));
    }
    let mut sweeps = Vec::with_capacity(2);
    let mut chosen = Vec::with_capacity(2);
    let (mut tc, mut oc, mut to) = (0.0, 0.0, 0.0);
    for target in [0u8, 1] {
        let cands = candidates.for_target(target);
        let losses = cands
            .iter()
            .map(|c| candidate_loss(model, d, &valid, attr, target, c))
            .collect::<Result<Vec<f64>>>()?;
        let best = (0..losses.len()).fold(0, |b, i| if losses[i] < losses[b] { i } else { b });
        let b = pair_batch(d, &directed(&test, target));
        let out = apply_candidate(model, &b.source_x, &b.source_y, attr, target, &cands[best])?;
        tc += mean_sq_error(&b.target_x, &out);
        oc += mean_sq_error(&b.source_x, &out);
        to += mean_sq_error(&b.target_x, &b.source_x);
        sweeps.push(Sweep { target, losses, chosen: best });
        chosen.push(cands[best].clone());
    }
    let [c0, c1]: [Candidate; 2] = chosen.try_into().expect("two targets");
    let [s0, s1]: [Sweep; 2] = sweeps.try_into().expect("two targets");
    Ok(MseReport {
        kind: model.kind(),
        attr: d.attr_names[attr].clone(),
        target_changed: tc / 2.0,
        original_changed: oc / 2.0,
        target_original: to / 2.0,
        chosen: [c0, c1],
        sweeps: [s0, s1],
        test_pairs: test.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squared_error_basics() {
        let a = [0.5, -1.0, 2.0];
        assert_eq!(sq_error(&a, &a), 0.0);
        assert_eq!(sq_error(&[0.0, 0.0], &[3.0, 4.0]), 25.0);
    }

    #[test]
    fn directions_swap_roles() {
        assert_eq!(directed(&[(0, 1), (3, 2)], 1), vec![(0, 1), (3, 2)]);
        assert_eq!(directed(&[(0, 1), (3, 2)], 0), vec![(1, 0), (2, 3)]);
    }
}
