use std::fmt::Write as _;
use std::fs;

use csvae_core::data::{load_dataset, LabeledDataset, Split};
use csvae_core::eval::reconstruct;
use csvae_core::io::mosaic;
use csvae_core::manipulate::{
    class_latent_mean, replace_block, switch_condvae, switch_csvae, switch_csvae_block, switch_vae, w_grid, w_pca,
};
use csvae_core::models::{Model, ModelKind};
use csvae_core::numerics::Tensor;
use csvae_core::{Error, Result};

use super::{check_compatible, ensure_dir, load_checkpoint_model, resolve_attr, tile};
use crate::{Context, PolicyArg, SwitchArgs};

/// `cells[r][c]`: output for input `r` under column setting `c`.
struct Panel {
    columns: Vec<String>,
    cells: Vec<Vec<Vec<f64>>>,
}

impl Panel {
    fn new(n: usize) -> Self {
        Panel {
            columns: Vec::new(),
            cells: vec![Vec::new(); n],
        }
    }

    fn push(&mut self, label: String, out: &Tensor) {
        self.columns.push(label);
        for (r, cell) in self.cells.iter_mut().enumerate() {
            cell.push(out.row(r).to_vec());
        }
    }
}

fn need(model: &Model, kinds: &[ModelKind], policy: &str) -> Result<()> {
    if kinds.contains(&model.kind()) {
        Ok(())
    } else {
        Err(Error::KindMismatch(format!("policy {policy} does not apply to a {} model", model.kind())))
    }
}

fn split_xy(d: &LabeledDataset, s: Split) -> (Tensor, Tensor) {
    let rows = d.indices(s);
    (d.features(&rows), d.labels(&rows))
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(",")
}

/// Three styles of one attribute: the mean training W block of the on class
/// and one standard deviation either side along its first principal axis.
fn styles(model: &Model, d: &LabeledDataset, attr: usize) -> Result<Vec<Vec<f64>>> {
    let (x, y) = split_xy(d, Split::Train);
    let b = w_pca(model, &x, &y, attr, 1)?;
    let (comp, sd) = match (b.components.first(), b.variances.first()) {
        (Some(c), Some(v)) => (c.clone(), v.sqrt()),
        _ => (vec![0.0; b.mean.len()], 0.0),
    };
    Ok([-1.0, 0.0, 1.0]
        .iter()
        .map(|s| b.mean.iter().zip(&comp).map(|(m, c)| m + s * sd * c).collect())
        .collect())
}

pub fn run(ctx: &Context, a: &SwitchArgs) -> Result<()> {
    let d = load_dataset(&a.data)?;
    let (model, _) = load_checkpoint_model(&a.checkpoint)?;
    check_compatible(&model, &d)?;
    let attr = resolve_attr(&d, a.attr.as_deref())?;
    if a.target > 1 {
        return Err(Error::Config("--target must be 0 or 1".into()));
    }
    let rows = match &a.rows {
        Some(r) => r.clone(),
        None => d.indices(Split::Test).into_iter().take(a.count).collect(),
    };
    if rows.is_empty() {
        return Err(Error::Data("no input rows selected".into()));
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= d.len()) {
        return Err(Error::Config(format!("row {bad} is out of range (n = {})", d.len())));
    }
    let rows = if a.policy == PolicyArg::Cartesian { rows[..1].to_vec() } else { rows };
    let (x, y) = (d.features(&rows), d.labels(&rows));
    let mut panel = Panel::new(rows.len());
    let with_recon = !matches!(a.policy, PolicyArg::Fixed | PolicyArg::Cartesian);
    if with_recon {
        panel.push("reconstruction".into(), &reconstruct(&model, &x, &y)?);
    }
    let mut cartesian_rows = None;
    match a.policy {
        PolicyArg::Grid => {
            need(&model, &[ModelKind::Csvae], "grid")?;
            let steps = vec![a.steps; model.spec().w_dim_per_attr];
            let g = w_grid(model.spec(), attr, &steps, None)?;
            for b in g.blocks() {
                panel.push(format!("w=({})", fmt_vec(&b)), &switch_csvae_block(&model, &x, &y, attr, &b)?);
            }
        }
        PolicyArg::Pca => {
            need(&model, &[ModelKind::Csvae], "pca")?;
            let (tx, ty) = split_xy(&d, Split::Train);
            let b = w_pca(&model, &tx, &ty, attr, a.components)?;
            if b.rank_deficient() {
                eprintln!("note: only {} of {} principal components are non-degenerate", b.components.len(), b.requested);
            }
            for (i, s) in b.samples().iter().enumerate() {
                let c = [-2, -1, 1, 2][i % 4];
                panel.push(format!("pc{}{c:+}sd", i / 4 + 1), &switch_csvae_block(&model, &x, &y, attr, s)?);
            }
        }
        PolicyArg::ScalarP => {
            need(&model, &[ModelKind::CondVae, ModelKind::CondVaeInfo], "scalar-p")?;
            for &p in &a.p {
                panel.push(format!("p={p}"), &switch_condvae(&model, &x, &y, attr, a.target, p)?);
            }
        }
        PolicyArg::ClassMean => {
            need(&model, &[ModelKind::Vae], "class-mean")?;
            let (vx, vy) = split_xy(&d, Split::Valid);
            let from = class_latent_mean(&model, &vx, &vy, attr, 1 - a.target)?;
            let to = class_latent_mean(&model, &vx, &vy, attr, a.target)?;
            panel.push(format!("to {}", a.target), &switch_vae(&model, &x, &from, &to)?);
        }
        PolicyArg::Fixed => {
            need(&model, &[ModelKind::Csvae], "fixed")?;
            let src = a.source_row.ok_or_else(|| Error::Config("--policy fixed needs --source-row".into()))?;
            if src >= d.len() {
                return Err(Error::Config(format!("source row {src} is out of range")));
            }
            let code = model.encode(&d.features(&[src]).into_data(), Some(&d.labels(&[src]).into_data()))?;
            let block = code.w_block(attr).expect("csvae has W").to_vec();
            panel.push(format!("w=({}) from row {src}", fmt_vec(&block)), &switch_csvae_block(&model, &x, &y, attr, &block)?);
        }
        PolicyArg::Cartesian => {
            need(&model, &[ModelKind::Csvae], "cartesian")?;
            if d.k() < 2 {
                return Err(Error::Data("the cartesian grid needs a two-attribute dataset".into()));
            }
            let (s0, s1) = (styles(&model, &d, 0)?, styles(&model, &d, 1)?);
            let w0 = model.encode_batch(&x, Some(&y))?.w.expect("csvae has W");
            let mut grid = Vec::new();
            for a0 in &s0 {
                let mut line = Vec::new();
                for a1 in &s1 {
                    let w = replace_block(&replace_block(&w0, model.spec(), 0, a0)?, model.spec(), 1, a1)?;
                    line.push(switch_csvae(&model, &x, &w)?.row(0).to_vec());
                }
                grid.push(line);
            }
            panel.columns = s1.iter().map(|s| format!("{}=({})", d.attr_names[1], fmt_vec(s))).collect();
            cartesian_rows = Some(grid);
        }
    }
    let cells = cartesian_rows.unwrap_or(panel.cells);

    let out = ensure_dir(&ctx.out_dir())?;
    let name = match a.policy {
        PolicyArg::Grid => "switch_grid",
        PolicyArg::Pca => "switch_pca",
        PolicyArg::ScalarP => "switch_scalar_p",
        PolicyArg::ClassMean => "switch_class_mean",
        PolicyArg::Fixed => "switch_fixed",
        PolicyArg::Cartesian => "switch_cartesian",
    };
    match d.image_shape() {
        Some(s) => {
            let tiles = cells
                .iter()
                .map(|r| r.iter().map(|v| tile(v, s.width, s.height)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            let path = out.join(format!("{name}.pgm"));
            mosaic(&tiles, 2, 0.5)?.save_pgm(&path)?;
            let count: usize = tiles.iter().map(Vec::len).sum();
            println!("wrote {} ({} rows x {} columns, {count} tiles)", path.display(), tiles.len(), tiles[0].len());
        }
        None => {
            let mut csv = String::from("input_row,column,setting");
            for j in 0..d.dim() {
                let _ = write!(csv, ",x{}", j + 1);
            }
            csv.push('\n');
            for (r, line) in cells.iter().enumerate() {
                for (c, v) in line.iter().enumerate() {
                    let label = panel.columns.get(c).cloned().unwrap_or_default().replace(',', ";");
                    let vals: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                    let _ = writeln!(csv, "{},{c},{label},{}", rows[r], vals.join(","));
                }
            }
            let path = out.join(format!("{name}.csv"));
            fs::write(&path, csv)?;
            println!("wrote {} ({} points)", path.display(), cells.iter().map(Vec::len).sum::<usize>());
        }
    }
    println!("columns: {}", panel.columns.join(" | "));
    Ok(())
}
