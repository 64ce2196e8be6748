use std::fs;

use csvae_core::data::{load_dataset, Split};
use csvae_core::eval::{encoded_splits, mi_from_features, mi_probe, pct, Latent, ProbeConfig};
use csvae_core::io::Scatter;
use csvae_core::models::ModelKind;
use csvae_core::numerics::Tensor;
use csvae_core::{Error, Result};

use super::{check_compatible, ensure_dir, load_checkpoint_model};
use crate::{Context, PlotArgs};

fn all_rows(d: &csvae_core::data::LabeledDataset) -> Vec<usize> {
    let mut rows: Vec<usize> = [Split::Train, Split::Valid, Split::Test].iter().flat_map(|&s| d.indices(s)).collect();
    rows.sort_unstable();
    rows
}

fn points(a: &Tensor, i: usize, b: &Tensor, j: usize, y: &Tensor) -> Vec<(f64, f64, u8)> {
    (0..a.rows()).map(|r| (a.row(r)[i], b.row(r)[j], y.row(r)[0] as u8)).collect()
}

pub fn run(ctx: &Context, a: &PlotArgs) -> Result<()> {
    let d = load_dataset(&a.data)?;
    if d.is_empty() {
        return Err(Error::Data("dataset is empty".into()));
    }
    let (model, _) = load_checkpoint_model(&a.checkpoint)?;
    check_compatible(&model, &d)?;
    let spec = model.spec();
    let csvae = model.kind() == ModelKind::Csvae;
    if spec.z_dim < 2 || (csvae && spec.w_dim_per_attr < 2) {
        return Err(Error::Config("latent planes need at least two z and two w dimensions".into()));
    }
    let rows = all_rows(&d);
    let (x, y) = (d.features(&rows), d.labels(&rows));
    let cond = (model.kind() != ModelKind::Vae).then_some(&y);
    let lat = model.encode_batch(&x, cond)?;
    if lat.z.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("encoded z".into()));
    }

    let (mut z_caption, mut w_caption) = (String::new(), String::new());
    if !a.no_probes {
        let seed = ctx.config.seed;
        let z = mi_probe(&model, &d, &ProbeConfig::like_adversary(&model, seed))?;
        z_caption = format!(
            "probe on z: accuracy {} (majority {}), I(Y;Z) = {:.4} nats",
            pct(z.accuracy),
            pct(z.majority),
            z.mi
        );
        if csvae {
            let [tr, va, te] = encoded_splits(&model, &d, Latent::W)?;
            let w = mi_from_features(&tr, &va, &te, spec.label_mode, &ProbeConfig::linear(seed))?;
            w_caption = format!("linear probe on w: accuracy {} (majority {})", pct(w.accuracy), pct(w.majority));
        }
    }

    let attr = &d.attr_names[0];
    let mut plots = vec![(
        "z_plane.svg",
        Scatter {
            title: &format!("Z plane, coloured by {attr}"),
            x_label: "z1",
            y_label: "z2",
            caption: &z_caption,
            points: &points(&lat.z, 0, &lat.z, 1, &y),
        }
        .to_svg(),
    )];
    if let Some(w) = &lat.w {
        plots.push((
            "w_plane.svg",
            Scatter {
                title: &format!("W plane ({attr} block)"),
                x_label: "w1",
                y_label: "w2",
                caption: &w_caption,
                points: &points(w, 0, w, 1, &y),
            }
            .to_svg(),
        ));
        plots.push((
            "z2_w1_plane.svg",
            Scatter {
                title: "(z2, w1) plane",
                x_label: "z2",
                y_label: "w1",
                caption: "",
                points: &points(&lat.z, 1, w, 0, &y),
            }
            .to_svg(),
        ));
    }

    let out = ensure_dir(&ctx.out_dir())?;
    for (name, svg) in &plots {
        let path = out.join(name);
        fs::write(&path, svg)?;
        println!("wrote {}", path.display());
    }
    for c in [&z_caption, &w_caption] {
        if !c.is_empty() {
            println!("{c}");
        }
    }
    Ok(())
}
