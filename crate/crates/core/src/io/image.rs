//! Binary PGM (P5) output and tile mosaics.

use std::fs;
use std::path::Path;

use crate::{Error, Result};

/// Grayscale image with values in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Gray {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl Gray {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::Shape(format!("{} pixels for a {width}x{height} image", pixels.len())));
        }
        Ok(Gray { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, v: f64) -> Self {
        Gray {
            width,
            height,
            pixels: vec![v; width * height],
        }
    }

    /// P5 encoding with maxval 255; values are clamped to `[0, 1]`.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        out
    }

    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_pgm())?;
        Ok(())
    }
}

/// Lays out equally sized tiles on a grid (`rows[r][c]`), separated by a
/// `pad`-pixel gutter of value `gutter`. Missing tiles stay gutter-coloured.
pub fn mosaic(rows: &[Vec<Gray>], pad: usize, gutter: f64) -> Result<Gray> {
    let first = rows
        .iter()
        .flat_map(|r| r.first())
        .next()
        .ok_or_else(|| Error::InvalidArgument("mosaic needs at least one tile".into()))?;
    let (tw, th) = (first.width, first.height);
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let width = cols * tw + (cols + 1) * pad;
    let height = rows.len() * th + (rows.len() + 1) * pad;
    let mut img = Gray::filled(width, height, gutter);
    for (r, row) in rows.iter().enumerate() {
        for (c, tile) in row.iter().enumerate() {
            if tile.width != tw || tile.height != th {
                return Err(Error::Shape("mosaic tiles differ in size".into()));
            }
            let (ox, oy) = (pad + c * (tw + pad), pad + r * (th + pad));
            for y in 0..th {
                let dst = (oy + y) * width + ox;
                img.pixels[dst..dst + tw].copy_from_slice(&tile.pixels[y * tw..(y + 1) * tw]);
            }
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_header_and_clamping() {
        let g = Gray::new(2, 1, vec![-1.0, 2.0]).unwrap();
        let b = g.to_pgm();
        assert!(b.starts_with(b"P5\n2 1\n255\n"));
        assert_eq!(&b[b.len() - 2..], &[0, 255]);
    }

    #[test]
    fn mosaic_layout() {
        let t = Gray::filled(2, 2, 1.0);
        let m = mosaic(&[vec![t.clone(), t.clone()], vec![t]], 1, 0.0).unwrap();
        assert_eq!((m.width, m.height), (7, 7));
        assert_eq!(m.pixels[7 + 1], 1.0);
        assert_eq!(m.pixels[7 * 4 + 4], 0.0);
        assert!(mosaic(&[], 1, 0.0).is_err());
    }
}
