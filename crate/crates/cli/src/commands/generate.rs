use std::path::PathBuf;

use csvae_core::data::{save_dataset, GlyphAttr};
use csvae_core::io::config::Generator;
use csvae_core::{Error, Result};

use crate::{Context, GenerateArgs, GeneratorArg};

pub fn run(ctx: &Context, a: &GenerateArgs) -> Result<()> {
    let mut c = ctx.config.clone();
    c.generator = match a.generator {
        GeneratorArg::SwissRoll => Generator::SwissRoll,
        GeneratorArg::Glyphs => Generator::Glyphs,
    };
    if let Some(n) = a.n {
        c.n = n;
    }
    if let Some(v) = a.noise {
        c.noise = v;
    }
    if let Some(s) = a.size {
        c.image_size = s;
    }
    if let Some(attrs) = &a.attrs {
        c.attrs = attrs
            .iter()
            .map(|s| GlyphAttr::parse(s.trim()).ok_or_else(|| Error::Config(format!("unknown glyph attribute `{s}`"))))
            .collect::<Result<_>>()?;
    }
    c.paired |= a.paired;
    c.standardize |= a.standardize;
    let d = c.generate_dataset()?;
    let path = ctx.out.clone().unwrap_or_else(|| c.out_dir.join("data.csvd"));
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    save_dataset(&d, &path)?;
    println!("wrote {}", PathBuf::from(&path).display());
    println!("{}", d.summary());
    Ok(())
}
