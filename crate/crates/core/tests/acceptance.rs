//! End-to-end acceptance checks. Runs every criterion (or the ones named on
//! the command line, e.g. `cargo test --test acceptance -- 3 7`) and prints
//! one PASS/FAIL line per criterion.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use csvae_core::data::{
    load_dataset, make_glyphs, make_swiss_roll, save_dataset, split, split_pairs, GlyphAttr, GlyphConfig, LabeledDataset,
    Proportions, Split,
};
use csvae_core::eval::{
    candidate_loss, classifier_spec_for, default_candidates, encoded_splits, eval_identity_mse, eval_switch_accuracy,
    mi_from_features, mi_probe, pairs_in, sq_error, train_attr_classifier, AttrClassifier, FitConfig, Latent, MseReport,
    Part, ProbeConfig, SwitchPolicy,
};
use csvae_core::io::{load_model, model_checkpoint, Checkpoint, RunConfig};
use csvae_core::manipulate::{switch_csvae_block, w_block_mean};
use csvae_core::models::{LatentNoise, LossGraph, Model, ModelKind, ModelSpec, TrainConfig, Trainer};
use csvae_core::numerics::gradcheck::check_gradients;
use csvae_core::numerics::{Graph, ParamId, Tensor, Var};
use csvae_core::rng::{domain, StreamRng};
use csvae_core::stochastic::{
    cross_entropy_batch, gaussian_nll_batch, kl_diag_gaussians, kl_diag_gaussians_batch, kl_standard_normal_batch,
    neg_entropy_batch, reparam_sample_batch, DiagGaussian, GaussianVars, LabelMode,
};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> StreamRng {
    StreamRng::new(seed, domain::MISC, 0xacc)
}

fn normal_tensor(r: &mut StreamRng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), r.normals(n).into_iter().map(|v| v * scale).collect()).unwrap()
}

fn uniform_tensor(r: &mut StreamRng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| r.uniform_in(lo, hi)).collect()).unwrap()
}

/// Values bounded away from `kinks` by at least `gap`.
fn away_from(r: &mut StreamRng, shape: &[usize], kinks: &[f64], gap: f64) -> Tensor {
    let n = shape.iter().product();
    let mut v = Vec::with_capacity(n);
    while v.len() < n {
        let x = 2.0 * r.normal();
        if kinks.iter().all(|k| (x - k).abs() > gap) {
            v.push(x);
        }
    }
    Tensor::new(shape.to_vec(), v).unwrap()
}

fn binary_labels(r: &mut StreamRng, n: usize, k: usize) -> Tensor {
    Tensor::new(vec![n, k], (0..n * k).map(|_| f64::from(u8::from(r.bernoulli(0.5)))).collect()).unwrap()
}

fn one_hot(r: &mut StreamRng, n: usize, k: usize) -> Tensor {
    let mut t = Tensor::zeros(&[n, k]);
    for i in 0..n {
        let c = r.int_in(0, k as u32 - 1) as usize;
        t.data_mut()[i * k + c] = 1.0;
    }
    t
}

// ---------------------------------------------------------------- 1

const STEP: f64 = 1e-3;
const REL_TOL: f64 = 1e-4;
const ABS_FLOOR: f64 = 1e-6;
const INSTANCES: u64 = 20;

type Build = Box<dyn Fn(&Graph, &[Var]) -> Var>;
type Inputs = Box<dyn Fn(&mut StreamRng) -> Vec<Tensor>>;

fn primitive_cases() -> Vec<(&'static str, Inputs, Build)> {
    fn w(g: &Graph, v: Var, r: &Tensor) -> Var {
        // Weighted sum so every output entry gets a distinct adjoint.
        g.sum(g.mul(v, g.constant(r.clone())))
    }
    let weights = |shape: &[usize]| normal_tensor(&mut rng(0x5eed), shape, 1.0);
    let c: Vec<(&'static str, Inputs, Build)> = vec![
        (
            "matmul",
            Box::new(|r| vec![normal_tensor(r, &[3, 4], 1.0), normal_tensor(r, &[4, 2], 1.0)]),
            Box::new(move |g, v| w(g, g.matmul(v[0], v[1]), &weights(&[3, 2]))),
        ),
        (
            "add",
            Box::new(|r| vec![normal_tensor(r, &[2, 3], 1.0), normal_tensor(r, &[2, 3], 1.0)]),
            Box::new(move |g, v| w(g, g.add(v[0], v[1]), &weights(&[2, 3]))),
        ),
        (
            "sub",
            Box::new(|r| vec![normal_tensor(r, &[2, 3], 1.0), normal_tensor(r, &[2, 3], 1.0)]),
            Box::new(move |g, v| w(g, g.sub(v[0], v[1]), &weights(&[2, 3]))),
        ),
        (
            "mul",
            Box::new(|r| vec![normal_tensor(r, &[2, 3], 1.0), normal_tensor(r, &[2, 3], 1.0)]),
            Box::new(move |g, v| w(g, g.mul(v[0], v[1]), &weights(&[2, 3]))),
        ),
        (
            "scale",
            Box::new(|r| vec![normal_tensor(r, &[5], 1.0)]),
            Box::new(move |g, v| w(g, g.scale(v[0], -1.7), &weights(&[5]))),
        ),
        (
            "neg",
            Box::new(|r| vec![normal_tensor(r, &[5], 1.0)]),
            Box::new(move |g, v| w(g, g.neg(v[0]), &weights(&[5]))),
        ),
        (
            "add_scalar",
            Box::new(|r| vec![normal_tensor(r, &[5], 1.0)]),
            Box::new(move |g, v| w(g, g.add_scalar(v[0], 0.3), &weights(&[5]))),
        ),
        (
            "square",
            Box::new(|r| vec![normal_tensor(r, &[5], 1.0)]),
            Box::new(move |g, v| w(g, g.square(v[0]), &weights(&[5]))),
        ),
        (
            "relu",
            Box::new(|r| vec![away_from(r, &[6], &[0.0], 0.01)]),
            Box::new(move |g, v| w(g, g.relu(v[0]), &weights(&[6]))),
        ),
        (
            "exp",
            Box::new(|r| vec![normal_tensor(r, &[5], 1.0)]),
            Box::new(move |g, v| w(g, g.exp(v[0]), &weights(&[5]))),
        ),
        (
            "log",
            Box::new(|r| vec![uniform_tensor(r, &[5], 0.5, 3.0)]),
            Box::new(move |g, v| w(g, g.log(v[0]), &weights(&[5]))),
        ),
        (
            "clamp",
            Box::new(|r| vec![away_from(r, &[6], &[-1.0, 1.0], 0.01)]),
            Box::new(move |g, v| w(g, g.clamp(v[0], -1.0, 1.0), &weights(&[6]))),
        ),
        (
            "log_sigmoid",
            Box::new(|r| vec![normal_tensor(r, &[6], 3.0)]),
            Box::new(move |g, v| w(g, g.log_sigmoid(v[0]), &weights(&[6]))),
        ),
        (
            "sum",
            Box::new(|r| vec![normal_tensor(r, &[2, 3], 1.0)]),
            Box::new(|g, v| g.square(g.sum(v[0]))),
        ),
        (
            "mean",
            Box::new(|r| vec![normal_tensor(r, &[2, 3], 1.0)]),
            Box::new(|g, v| g.square(g.mean(v[0]))),
        ),
        (
            "broadcast_rows",
            Box::new(|r| vec![normal_tensor(r, &[4], 1.0)]),
            Box::new(move |g, v| w(g, g.broadcast_rows(v[0], 3), &weights(&[3, 4]))),
        ),
        (
            "add_row",
            Box::new(|r| vec![normal_tensor(r, &[3, 4], 1.0), normal_tensor(r, &[4], 1.0)]),
            Box::new(move |g, v| w(g, g.square(g.add_row(v[0], v[1])), &weights(&[3, 4]))),
        ),
        (
            "concat_cols",
            Box::new(|r| vec![normal_tensor(r, &[3, 2], 1.0), normal_tensor(r, &[3, 3], 1.0)]),
            Box::new(move |g, v| w(g, g.square(g.concat_cols(&[v[0], v[1]])), &weights(&[3, 5]))),
        ),
        (
            "slice_cols",
            Box::new(|r| vec![normal_tensor(r, &[3, 5], 1.0)]),
            Box::new(move |g, v| w(g, g.square(g.slice_cols(v[0], 1, 3)), &weights(&[3, 3]))),
        ),
        (
            "log_softmax",
            Box::new(|r| vec![normal_tensor(r, &[3, 4], 2.0)]),
            Box::new(move |g, v| w(g, g.log_softmax(v[0]), &weights(&[3, 4]))),
        ),
        (
            "reshape",
            Box::new(|r| vec![normal_tensor(r, &[2, 6], 1.0)]),
            Box::new(move |g, v| w(g, g.square(g.reshape(v[0], &[3, 4])), &weights(&[3, 4]))),
        ),
        (
            "add_channel_bias",
            Box::new(|r| vec![normal_tensor(r, &[2, 3, 2, 2], 1.0), normal_tensor(r, &[3], 1.0)]),
            Box::new(move |g, v| w(g, g.square(g.add_channel_bias(v[0], v[1])), &weights(&[2, 3, 2, 2]))),
        ),
        (
            "conv2d",
            Box::new(|r| vec![normal_tensor(r, &[2, 2, 5, 5], 1.0), normal_tensor(r, &[3, 2, 3, 3], 0.5)]),
            Box::new(move |g, v| w(g, g.conv2d(v[0], v[1], 2, 1), &weights(&[2, 3, 3, 3]))),
        ),
        (
            "conv_transpose2d",
            Box::new(|r| vec![normal_tensor(r, &[2, 3, 3, 3], 1.0), normal_tensor(r, &[3, 2, 4, 4], 0.5)]),
            Box::new(move |g, v| w(g, g.conv_transpose2d(v[0], v[1], 2, 1), &weights(&[2, 2, 6, 6]))),
        ),
    ];
    c
}

/// Loss-term cases over raw distribution parameters.
fn term_cases() -> Vec<(&'static str, Inputs, Build)> {
    let labels = |mode: LabelMode| match mode {
        LabelMode::Bernoulli => binary_labels(&mut rng(0x1ab), 4, 3),
        LabelMode::Categorical => one_hot(&mut rng(0x1ab), 4, 3),
    };
    let noise = normal_tensor(&mut rng(0x9015e), &[4, 3], 1.0);
    let gv = |v: &[Var], i: usize| GaussianVars {
        mu: v[i],
        log_var: v[i + 1],
    };
    vec![
        (
            "reparam_sample",
            Box::new(|r| vec![normal_tensor(r, &[4, 3], 1.0), normal_tensor(r, &[4, 3], 0.5)]),
            Box::new(move |g, v| g.sum(g.square(reparam_sample_batch(g, gv(v, 0), noise.clone())))),
        ),
        (
            "kl_standard_normal",
            Box::new(|r| vec![normal_tensor(r, &[4, 3], 1.0), normal_tensor(r, &[4, 3], 0.5)]),
            Box::new(move |g, v| kl_standard_normal_batch(g, gv(v, 0))),
        ),
        (
            "kl_diag_gaussians",
            Box::new(|r| {
                vec![
                    normal_tensor(r, &[4, 3], 1.0),
                    normal_tensor(r, &[4, 3], 0.5),
                    normal_tensor(r, &[4, 3], 1.0),
                    normal_tensor(r, &[4, 3], 0.5),
                ]
            }),
            Box::new(move |g, v| kl_diag_gaussians_batch(g, gv(v, 0), gv(v, 2))),
        ),
        (
            "gaussian_nll",
            Box::new(|r| vec![normal_tensor(r, &[4, 3], 1.0), normal_tensor(r, &[4, 3], 1.0), normal_tensor(r, &[4, 3], 0.5)]),
            Box::new(move |g, v| gaussian_nll_batch(g, v[0], gv(v, 1))),
        ),
        (
            "neg_entropy (bernoulli, M2)",
            Box::new(|r| vec![normal_tensor(r, &[4, 3], 2.0)]),
            Box::new(|g, v| neg_entropy_batch(g, v[0], LabelMode::Bernoulli)),
        ),
        (
            "neg_entropy (categorical, M2)",
            Box::new(|r| vec![normal_tensor(r, &[4, 3], 2.0)]),
            Box::new(|g, v| neg_entropy_batch(g, v[0], LabelMode::Categorical)),
        ),
        (
            "cross_entropy (bernoulli, N)",
            Box::new(|r| vec![normal_tensor(r, &[4, 3], 2.0)]),
            Box::new(move |g, v| cross_entropy_batch(g, v[0], &labels(LabelMode::Bernoulli), LabelMode::Bernoulli)),
        ),
        (
            "cross_entropy (categorical, N)",
            Box::new(|r| vec![normal_tensor(r, &[4, 3], 2.0)]),
            Box::new(move |g, v| cross_entropy_batch(g, v[0], &labels(LabelMode::Categorical), LabelMode::Categorical)),
        ),
    ]
}

/// Small relu-free model so finite differences never straddle a kink.
fn tiny_model(kind: ModelKind, seed: u64) -> Model {
    let mut spec = ModelSpec::vector(kind, 4, 2);
    spec.z_dim = 2;
    spec.enc_hidden = Vec::new();
    spec.dec_hidden = Vec::new();
    spec.adv_hidden = Vec::new();
    Model::new(spec, seed).unwrap()
}

type Term = fn(&LossGraph) -> Var;

/// Finite differences of one loss term with respect to model parameters.
fn model_case(kind: ModelKind, term: Term, params: fn(&Model) -> Vec<ParamId>, seed: u64) -> (f64, usize) {
    let model = tiny_model(kind, seed);
    let mut r = rng(seed);
    let n = 5;
    let x = normal_tensor(&mut r, &[n, 4], 1.0);
    let y = binary_labels(&mut r, n, 2);
    let noise = LatentNoise::sample(&model, n, &mut r);

    let mut m = model.clone();
    let lg = m.loss_graph(&x, &y, &noise).unwrap();
    m.store_mut().zero_grad();
    lg.graph.backward(term(&lg), m.store_mut()).unwrap();
    let value = |m: &Model| {
        let lg = m.loss_graph(&x, &y, &noise).unwrap();
        lg.graph.scalar(term(&lg))
    };

    let (mut worst, mut entries) = (0.0f64, 0);
    for id in params(&model) {
        let analytic = m.store().grad_or_zero(id);
        let base = model.store().get(id).data().to_vec();
        for j in 0..base.len() {
            let mut p = model.clone();
            let mut v = base.clone();
            v[j] += STEP;
            p.store_mut().set_value(id, v.clone()).unwrap();
            let fp = value(&p);
            v[j] -= 2.0 * STEP;
            p.store_mut().set_value(id, v).unwrap();
            let fm = value(&p);
            let numeric = (fp - fm) / (2.0 * STEP);
            let abs = (analytic[j] - numeric).abs();
            if abs > ABS_FLOOR {
                worst = worst.max(abs / analytic[j].abs().max(numeric.abs()));
            }
            entries += 1;
        }
    }
    (worst, entries)
}

fn criterion_1() -> Outcome {
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    let mut run = |name: &str, errs: Vec<(f64, usize)>| {
        let worst = errs.iter().map(|e| e.0).fold(0.0, f64::max);
        let entries: usize = errs.iter().map(|e| e.1).sum();
        lines.push(format!("{name}: {} instances, {entries} entries, max rel err {worst:.2e}", errs.len()));
        if worst >= REL_TOL || errs.len() < INSTANCES as usize || entries == 0 {
            failures.push(format!("{name} (max rel err {worst:.2e})"));
        }
    };
    for (name, inputs, build) in primitive_cases().into_iter().chain(term_cases()) {
        let errs = (0..INSTANCES)
            .map(|i| {
                let xs = inputs(&mut rng(1000 + i));
                let c = check_gradients(&xs, STEP, ABS_FLOOR, |g, v| build(g, v)).unwrap();
                (c.max_rel_err, c.entries)
            })
            .collect();
        run(name, errs);
    }
    let main: Term = |l| l.main_total;
    let adv: Term = |l| l.adversary_total.expect("adversary");
    let m2: Term = |l| l.m2.expect("m2");
    let kl_w: Term = |l| l.kl_w.expect("kl_w");
    let composites: [(&str, ModelKind, Term, fn(&Model) -> Vec<ParamId>); 7] = [
        ("vae bound", ModelKind::Vae, main, Model::main_params),
        ("condvae bound", ModelKind::CondVae, main, Model::main_params),
        ("condvae_info main objective", ModelKind::CondVaeInfo, main, Model::main_params),
        ("csvae main objective (M1 + M2)", ModelKind::Csvae, main, Model::main_params),
        ("csvae kl_w", ModelKind::Csvae, kl_w, Model::main_params),
        ("csvae M2 (encoder side)", ModelKind::Csvae, m2, Model::main_params),
        ("csvae N (adversary side)", ModelKind::Csvae, adv, Model::adversary_params),
    ];
    for (name, kind, term, params) in composites {
        let errs = (0..INSTANCES).map(|i| model_case(kind, term, params, 2000 + i)).collect();
        run(name, errs);
    }
    let errs = (0..INSTANCES)
        .map(|i| model_case(ModelKind::CondVaeInfo, adv, Model::adversary_params, 3000 + i))
        .collect();
    run("condvae_info adversary cross-entropy", errs);
    for l in &lines {
        println!("    {l}");
    }
    if failures.is_empty() {
        Ok(format!("{} gradient families within {REL_TOL:e}", lines.len()))
    } else {
        Err(format!("failed: {}", failures.join("; ")))
    }
}

// ---------------------------------------------------------------- 2

fn log_density(x: &[f64], mu: &[f64], var: &[f64]) -> f64 {
    x.iter()
        .zip(mu)
        .zip(var)
        .map(|((x, m), v)| -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m).powi(2) / v))
        .sum()
}

fn criterion_2() -> Outcome {
    const SAMPLES: usize = 1_000_000;
    let mut worst = 0.0f64;
    for draw in 0..20u64 {
        let mut r = rng(500 + draw);
        let dim = 1 + (draw % 4) as usize;
        let mq: Vec<f64> = r.normals(dim);
        let mp: Vec<f64> = r.normals(dim);
        let vq: Vec<f64> = (0..dim).map(|_| r.uniform_in(-1.0, 1.0).exp()).collect();
        let vp: Vec<f64> = (0..dim).map(|_| r.uniform_in(-1.0, 1.0).exp()).collect();
        let q = DiagGaussian::new(mq.clone(), vq.iter().map(|v| v.ln()).collect()).unwrap();
        let p = DiagGaussian::new(mp.clone(), vp.iter().map(|v| v.ln()).collect()).unwrap();
        let closed = kl_diag_gaussians(&q, &p).unwrap();
        let mut s = StreamRng::new(draw, domain::NOISE, 0x6b6c);
        let mut x = vec![0.0; dim];
        let mut acc = 0.0;
        for _ in 0..SAMPLES {
            for i in 0..dim {
                x[i] = mq[i] + vq[i].sqrt() * s.normal();
            }
            acc += log_density(&x, &mq, &vq) - log_density(&x, &mp, &vp);
        }
        let mc = acc / SAMPLES as f64;
        let rel = (closed - mc).abs() / closed.abs();
        worst = worst.max(rel);
        ensure(rel < 0.01, || format!("draw {draw}: closed {closed:.6} vs MC {mc:.6} (rel {rel:.4})"))?;
    }
    Ok(format!("20 draws, worst relative error {:.3}%", 100.0 * worst))
}

// ---------------------------------------------------------------- 3

fn noise_parts(parts: &[Part; 3], seed: u64) -> [Part; 3] {
    let mut r = StreamRng::new(seed, domain::NOISE, 0xc0);
    parts.clone().map(|(f, y)| (normal_tensor(&mut r, f.shape(), 1.0), y))
}

const SWISS_LOGVAR_CLAMP: f64 = 3.0;

fn criterion_3() -> Outcome {
    let d = split(make_swiss_roll(10_000, 0.0, 0).unwrap(), Proportions::default(), 0)
        .and_then(|d| d.standardized(Split::Train))
        .unwrap();
    let rows = d.indices(Split::Train);
    let (x, y) = (d.features(&rows), d.labels(&rows));
    let mut spec = ModelSpec::vector(ModelKind::Csvae, 3, 1);
    spec.logvar_clamp = SWISS_LOGVAR_CLAMP;
    let model = Model::new(spec, 0).unwrap();
    let cfg = TrainConfig {
        epochs: 300,
        batch_size: 64,
        seed: 0,
        ..Default::default()
    };
    let mut t = Trainer::new(model, cfg).map_err(|e| e.to_string())?;
    t.run(&x, &y).map_err(|e| e.to_string())?;
    let model = t.model();
    let mode = model.spec().label_mode;

    let w_parts = encoded_splits(model, &d, Latent::W).unwrap();
    let w = mi_from_features(&w_parts[0], &w_parts[1], &w_parts[2], mode, &ProbeConfig::linear(0)).unwrap();
    let probe = ProbeConfig::like_adversary(model, 0);
    let z = mi_probe(model, &d, &probe).unwrap();
    let z_parts = encoded_splits(model, &d, Latent::Z).unwrap();
    let noise = noise_parts(&z_parts, 0);
    let control = mi_from_features(&noise[0], &noise[1], &noise[2], mode, &probe).unwrap();

    let summary = format!(
        "w linear probe {:.4}, z probe {:.4} (majority {:.4}), I(Y;Z) {:.4} vs noise control {:.4}",
        w.accuracy, z.accuracy, z.majority, z.mi, control.mi
    );
    ensure(w.accuracy >= 0.95, || format!("w probe below 95%: {summary}"))?;
    ensure(z.accuracy <= z.majority + 0.05, || format!("z probe above majority + 5pp: {summary}"))?;
    ensure(z.mi <= control.mi + 0.05, || format!("I(Y;Z) above control + 0.05: {summary}"))?;
    Ok(summary)
}

// ---------------------------------------------------------------- 4, 5

const GLYPH_SIZE: usize = 16;
const GLYPH_PAIRS: usize = 1500;
const GLYPH_EPOCHS: usize = 40;
const SEEDS: [u64; 3] = [0, 1, 2];
const KINDS: [ModelKind; 4] = [ModelKind::Vae, ModelKind::CondVae, ModelKind::CondVaeInfo, ModelKind::Csvae];

fn glyph_spec(kind: ModelKind, d: &LabeledDataset) -> ModelSpec {
    let mut spec = ModelSpec::image(kind, d.image_shape().unwrap(), d.k());
    spec.conv_channels = vec![16, 32];
    spec.z_dim = 2;
    if kind == ModelKind::Csvae {
        spec.betas.0[0] /= spec.input.numel() as f64;
    }
    spec
}

fn train_on(spec: ModelSpec, d: &LabeledDataset, epochs: usize, seed: u64) -> Model {
    let rows = d.indices(Split::Train);
    let (x, y) = (d.features(&rows), d.labels(&rows));
    let cfg = TrainConfig {
        epochs,
        seed,
        ..Default::default()
    };
    let mut t = Trainer::new(Model::new(spec, seed).unwrap(), cfg).unwrap();
    t.run(&x, &y).unwrap();
    t.into_parts().0
}

fn classifier(d: &LabeledDataset, seed: u64) -> AttrClassifier {
    let c = train_attr_classifier(d, &classifier_spec_for(d), &FitConfig { seed, ..Default::default() }).unwrap();
    c.require_usable().unwrap();
    c
}

struct GlyphRun {
    data: LabeledDataset,
    classifier: AttrClassifier,
    models: Vec<Model>,
}

fn glyph_runs() -> &'static [GlyphRun] {
    static RUNS: OnceLock<Vec<GlyphRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        SEEDS
            .iter()
            .map(|&seed| {
                let cfg = GlyphConfig {
                    size: GLYPH_SIZE,
                    paired: true,
                    ..Default::default()
                };
                let data = split_pairs(make_glyphs(&cfg, GLYPH_PAIRS, seed).unwrap(), 0, Proportions::default(), seed).unwrap();
                let classifier = classifier(&data, seed);
                let models = KINDS.iter().map(|&k| train_on(glyph_spec(k, &data), &data, GLYPH_EPOCHS, seed)).collect();
                GlyphRun {
                    data,
                    classifier,
                    models,
                }
            })
            .collect()
    })
}

fn criterion_4() -> Outcome {
    let runs = glyph_runs();
    let mut mean = [0.0; 4];
    for run in runs {
        for (i, m) in run.models.iter().enumerate() {
            let rep = eval_switch_accuracy(m, &run.classifier, &run.data, SwitchPolicy::standard(m.kind())).unwrap();
            mean[i] += rep.overall() / runs.len() as f64;
        }
    }
    let [vae, cond, info, cs] = mean;
    let summary = format!(
        "mean switch accuracy: vae {:.2}%, condvae {:.2}%, condvae_info {:.2}%, csvae {:.2}%",
        100.0 * vae,
        100.0 * cond,
        100.0 * info,
        100.0 * cs
    );
    ensure(cs >= cond && cond >= vae, || format!("ordering violated: {summary}"))?;
    ensure(cs >= 0.85, || format!("csvae below 85%: {summary}"))?;
    ensure(vae <= 0.60, || format!("vae above 60%: {summary}"))?;
    Ok(summary)
}

fn brute_force_l1(m: &Model, d: &LabeledDataset, rep: &MseReport) -> f64 {
    let test = pairs_in(d, 0, Split::Test).unwrap();
    let mut total = 0.0;
    for target in [0u8, 1] {
        let mut acc = 0.0;
        for &(off, on) in &test {
            let (src, tgt) = if target == 1 { (off, on) } else { (on, off) };
            let x = d.features(&[src]);
            let out = csvae_core::eval::apply_candidate(m, &x, &d.labels(&[src]), 0, target, &rep.chosen[target as usize])
                .unwrap();
            acc += sq_error(d.features(&[tgt]).row(0), out.row(0));
        }
        total += acc / test.len() as f64;
    }
    total / 2.0
}

fn criterion_5() -> Outcome {
    let runs = glyph_runs();
    let (mut vae_l1, mut cs_l1) = (0.0, 0.0);
    for run in runs {
        let d = &run.data;
        let test = pairs_in(d, 0, Split::Test).unwrap();
        let targets: Vec<usize> = test.iter().flat_map(|p| [p.0, p.1]).collect();
        let t = d.features(&targets);
        let self_mse: f64 = (0..t.rows()).map(|r| sq_error(t.row(r), t.row(r))).sum();
        ensure(self_mse == 0.0, || format!("target-vs-target error {self_mse}"))?;

        let mut reports = Vec::new();
        for m in &run.models {
            let cands = default_candidates(m, d, 0, 5).unwrap();
            let rep = eval_identity_mse(m, d, 0, &cands).unwrap();
            let valid = pairs_in(d, 0, Split::Valid).unwrap();
            for (target, sweep) in [(0u8, &rep.sweeps[0]), (1, &rep.sweeps[1])] {
                let set = if target == 1 { &cands.to_on } else { &cands.to_off };
                let losses: Vec<f64> = set.iter().map(|c| candidate_loss(m, d, &valid, 0, target, c).unwrap()).collect();
                let best = losses.iter().cloned().fold(f64::INFINITY, f64::min);
                ensure(losses[sweep.chosen] == best, || {
                    format!("{}: chosen candidate is not the sweep minimiser", m.kind())
                })?;
            }
            let brute = brute_force_l1(m, d, &rep);
            ensure((brute - rep.target_changed).abs() <= 1e-9 * brute.abs().max(1.0), || {
                format!("{}: reported L1 {} vs brute force {brute}", m.kind(), rep.target_changed)
            })?;
            reports.push(rep);
        }
        let col = reports[0].target_original;
        ensure(reports.iter().all(|r| r.target_original.to_bits() == col.to_bits()), || {
            "target-vs-original column differs between models".into()
        })?;
        vae_l1 += reports[0].target_changed / runs.len() as f64;
        cs_l1 += reports[3].target_changed / runs.len() as f64;
    }
    let summary = format!("mean test L1: csvae {cs_l1:.4}, vae {vae_l1:.4}");
    ensure(cs_l1 <= vae_l1, || format!("csvae worse than vae: {summary}"))?;
    Ok(summary)
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let seed = 0;
    let cfg = GlyphConfig {
        size: GLYPH_SIZE,
        attrs: vec![GlyphAttr::Stripes, GlyphAttr::Frame],
        ..Default::default()
    };
    let d = split(make_glyphs(&cfg, 2 * GLYPH_PAIRS, seed).unwrap(), Proportions::default(), seed).unwrap();
    let clf = classifier(&d, seed);
    let model = train_on(glyph_spec(ModelKind::Csvae, &d), &d, GLYPH_EPOCHS, seed);

    let valid = d.indices(Split::Valid);
    let (vx, vy) = (d.features(&valid), d.labels(&valid));
    let test = d.indices(Split::Test);
    let (x, y) = (d.features(&test), d.labels(&test));
    let before = clf.predict(&x);
    let mut parts = Vec::new();
    for attr in 0..2 {
        let other = 1 - attr;
        // Flip the attribute: every input gets the validation W-block mean of
        // the state it does not currently have.
        let mut changed_self = 0;
        let mut changed_other = 0;
        for target in [0u8, 1] {
            let rows: Vec<usize> = (0..y.rows()).filter(|&r| y.row(r)[attr] != f64::from(target)).collect();
            if rows.is_empty() {
                continue;
            }
            let block = w_block_mean(&model, &vx, &vy, attr, target).unwrap();
            let (sx, sy) = (x.select_rows(&rows), y.select_rows(&rows));
            let after = clf.predict(&switch_csvae_block(&model, &sx, &sy, attr, &block).unwrap());
            for (i, &r) in rows.iter().enumerate() {
                changed_self += usize::from(after.row(i)[attr] != before.row(r)[attr]);
                changed_other += usize::from(after.row(i)[other] != before.row(r)[other]);
            }
        }
        let n = y.rows() as f64;
        let (fs, fo) = (changed_self as f64 / n, changed_other as f64 / n);
        parts.push(format!(
            "{} switched: own classifier changed {:.1}%, other changed {:.1}%",
            d.attr_names[attr],
            100.0 * fs,
            100.0 * fo
        ));
        ensure(fo <= 0.10, || format!("cross-talk above 10%: {}", parts.join("; ")))?;
        ensure(fs >= 0.5, || format!("manipulation ineffective: {}", parts.join("; ")))?;
    }
    Ok(parts.join("; "))
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let d = split(make_swiss_roll(1000, 0.1, 4).unwrap(), Proportions::default(), 4).unwrap();
    let rows = d.indices(Split::Train);
    let (x, y) = (d.features(&rows), d.labels(&rows));
    let curve = || {
        let cfg = TrainConfig {
            epochs: 5,
            seed: 9,
            ..Default::default()
        };
        let model = Model::new(ModelSpec::vector(ModelKind::Csvae, 3, 1), 9).unwrap();
        csvae_core::models::train(model, &x, &y, cfg).unwrap()
    };
    let (model, a) = curve();
    let (_, b) = curve();
    let worst = a
        .iter()
        .zip(&b)
        .flat_map(|(p, q)| p.values().into_iter().zip(q.values()).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max);
    ensure(a.len() == 5 && worst <= 1e-6, || format!("curves differ by {worst}"))?;

    let dir = tempfile::tempdir().unwrap();
    let ck_path = dir.path().join("m.csvc");
    model_checkpoint(&model, &RunConfig::default()).save(&ck_path).unwrap();
    let (loaded, _) = load_model(&Checkpoint::load(&ck_path).unwrap()).unwrap();
    let enc = |m: &Model| m.encode_batch(&x, Some(&y)).unwrap();
    let (e0, e1) = (enc(&model), enc(&loaded));
    let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    ensure(bits(&e0.z) == bits(&e1.z) && bits(e0.w.as_ref().unwrap()) == bits(e1.w.as_ref().unwrap()), || {
        "encoder outputs differ after reload".into()
    })?;
    let cond = e0.w.clone();
    let (m0, l0) = model.decode_batch(&e0.z, cond.as_ref()).unwrap();
    let (m1, l1) = loaded.decode_batch(&e0.z, cond.as_ref()).unwrap();
    ensure(bits(&m0) == bits(&m1) && bits(&l0) == bits(&l1), || "decoder outputs differ after reload".into())?;

    for (name, data) in [
        ("swiss roll", d.clone()),
        (
            "glyphs",
            split(make_glyphs(&GlyphConfig { size: 16, ..Default::default() }, 50, 2).unwrap(), Proportions::default(), 2)
                .unwrap(),
        ),
    ] {
        let (p1, p2) = (dir.path().join("a.csvd"), dir.path().join("b.csvd"));
        save_dataset(&data, &p1).unwrap();
        let back = load_dataset(&p1).unwrap();
        save_dataset(&back, &p2).unwrap();
        ensure(std::fs::read(&p1).unwrap() == std::fs::read(&p2).unwrap() && back == data, || {
            format!("{name} dataset does not round-trip")
        })?;
    }
    Ok(format!("5-epoch curves identical (max diff {worst:e}); checkpoint inference bit-exact; datasets byte-identical"))
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let mut checked = 0;
    for kind in [ModelKind::Csvae, ModelKind::CondVaeInfo] {
        for seed in 0..5u64 {
            let mut spec = ModelSpec::vector(kind, 3, 1);
            spec.enc_hidden = vec![8];
            spec.dec_hidden = vec![8];
            spec.adv_hidden = vec![8];
            let mut m = Model::new(spec, seed).unwrap();
            let mut r = rng(seed);
            let x = normal_tensor(&mut r, &[16, 3], 1.0);
            let y = binary_labels(&mut r, 16, 1);
            let noise = LatentNoise::sample(&m, 16, &mut r);
            let encoders = m.encoder_params();
            let adversary = m.adversary_params();

            let lg = m.loss_graph(&x, &y, &noise).unwrap();
            m.store_mut().zero_grad();
            lg.graph.backward(lg.main_total, m.store_mut()).unwrap();
            ensure(adversary.iter().all(|&id| m.store().grad_or_zero(id).iter().all(|&g| g == 0.0)), || {
                format!("{kind}: main objective reached the adversary")
            })?;
            ensure(encoders.iter().any(|&id| m.store().grad_or_zero(id).iter().any(|&g| g != 0.0)), || {
                format!("{kind}: main objective left the encoders untouched")
            })?;

            m.store_mut().zero_grad();
            lg.graph.backward(lg.adversary_total.unwrap(), m.store_mut()).unwrap();
            ensure(
                m.main_params().iter().all(|&id| m.store().grad_or_zero(id).iter().all(|&g| g == 0.0)),
                || format!("{kind}: adversary objective reached the encoder or decoder"),
            )?;
            ensure(adversary.iter().any(|&id| m.store().grad_or_zero(id).iter().any(|&g| g != 0.0)), || {
                format!("{kind}: adversary objective left the adversary untouched")
            })?;
            checked += 1;
        }
    }
    Ok(format!("{checked} models: cross gradients exactly zero"))
}

// ----------------------------------------------------------------

fn main() -> ExitCode {
    // (name, check, runtime budget in seconds)
    let criteria: [(&str, fn() -> Outcome, f64); 8] = [
        ("gradient suite", criterion_1, 60.0),
        ("KL vs Monte Carlo", criterion_2, 60.0),
        ("swiss-roll factorization", criterion_3, 600.0),
        ("attribute-transfer ordering", criterion_4, 1800.0),
        ("identity-pair protocol", criterion_5, 1800.0),
        ("joint-attribute independence", criterion_6, 1800.0),
        ("determinism and persistence", criterion_7, 600.0),
        ("adversarial isolation", criterion_8, 60.0),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let outcome = outcome.and_then(|d| {
            if secs <= *budget {
                Ok(d)
            } else {
                Err(format!("over the {budget:.0}s budget: {d}"))
            }
        });
        match outcome {
            Ok(detail) => println!("criterion {n} ({name}): PASS [{secs:.1}s] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL [{secs:.1}s] {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
