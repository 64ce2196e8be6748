use crate::exec;
use crate::rng::{domain, StreamRng};
use crate::{Error, Result};

use super::LabeledDataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GlyphAttr {
    Stripes,
    Frame,
}

impl GlyphAttr {
    pub fn as_str(self) -> &'static str {
        match self {
            GlyphAttr::Stripes => "stripes",
            GlyphAttr::Frame => "frame",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "stripes" => Some(GlyphAttr::Stripes),
            "frame" => Some(GlyphAttr::Frame),
            _ => None,
        }
    }
}

/// Glyph generator settings. Lengths are in pixels of a 32x32 canvas and
/// scale with `size`.
#[derive(Clone, Debug, PartialEq)]
pub struct GlyphConfig {
    pub size: usize,
    pub attrs: Vec<GlyphAttr>,
    pub stripe_count: (u32, u32),
    pub stripe_thickness: (u32, u32),
    pub frame_thickness: (u32, u32),
    /// Largest offset of the ellipse centre from the canvas centre.
    pub center_jitter: f64,
    pub semi_axis: (f64, f64),
    /// Rotation range in radians.
    pub rotation: (f64, f64),
    pub fill: (f64, f64),
    /// Gap between ellipse and frame ring.
    pub frame_gap: f64,
    pub paired: bool,
}

impl Default for GlyphConfig {
    fn default() -> Self {
        GlyphConfig {
            size: 32,
            attrs: vec![GlyphAttr::Stripes],
            stripe_count: (2, 5),
            stripe_thickness: (2, 4),
            frame_thickness: (1, 3),
            center_jitter: 4.0,
            semi_axis: (6.0, 9.5),
            rotation: (-0.6, 0.6),
            fill: (0.3, 0.6),
            frame_gap: 1.5,
            paired: false,
        }
    }
}

impl GlyphConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Data(format!("glyph config: {m}")));
        if self.size < 8 {
            return bad("size must be at least 8");
        }
        if self.attrs.is_empty() {
            return bad("at least one attribute is required");
        }
        for (i, a) in self.attrs.iter().enumerate() {
            if self.attrs[..i].contains(a) {
                return bad("attributes must be distinct");
            }
        }
        let int_ok = |r: (u32, u32)| r.0 <= r.1;
        let real_ok = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 <= r.1;
        if !int_ok(self.stripe_count) || self.stripe_count.0 == 0 {
            return bad("stripe count range must be nonempty and positive");
        }
        if !int_ok(self.stripe_thickness) || self.stripe_thickness.0 == 0 {
            return bad("stripe thickness range must be nonempty and positive");
        }
        if !int_ok(self.frame_thickness) || self.frame_thickness.0 == 0 {
            return bad("frame thickness range must be nonempty and positive");
        }
        if !real_ok(self.semi_axis) || self.semi_axis.0 <= 0.0 {
            return bad("semi-axis range must be nonempty and positive");
        }
        if !real_ok(self.rotation) {
            return bad("rotation range must be nonempty");
        }
        if !real_ok(self.fill) || self.fill.0 < 0.0 || self.fill.1 > 1.0 {
            return bad("fill range must lie in [0, 1]");
        }
        if !(self.center_jitter >= 0.0 && self.frame_gap >= 0.0) {
            return bad("jitter and frame gap must be non-negative");
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        self.size as f64 / 32.0
    }
}

/// Base identity and style of one glyph; attribute states are separate.
#[derive(Clone, Debug, PartialEq)]
struct Glyph {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    rot: f64,
    fill: f64,
    stripes: u32,
    stripe_thickness: f64,
    frame_thickness: f64,
}

fn draw_real(rng: &mut StreamRng, r: (f64, f64)) -> f64 {
    if r.0 == r.1 {
        r.0
    } else {
        rng.uniform_in(r.0, r.1)
    }
}

fn draw_int(rng: &mut StreamRng, r: (u32, u32)) -> u32 {
    rng.int_in(r.0, r.1)
}

impl Glyph {
    fn draw(c: &GlyphConfig, rng: &mut StreamRng) -> Self {
        let s = c.scale();
        let half = c.size as f64 / 2.0;
        let j = c.center_jitter * s;
        Glyph {
            cx: half + draw_real(rng, (-j, j)),
            cy: half + draw_real(rng, (-j, j)),
            a: draw_real(rng, c.semi_axis) * s,
            b: draw_real(rng, c.semi_axis) * s,
            rot: draw_real(rng, c.rotation),
            fill: draw_real(rng, c.fill),
            stripes: draw_int(rng, c.stripe_count),
            stripe_thickness: f64::from(draw_int(rng, c.stripe_thickness)) * s,
            frame_thickness: f64::from(draw_int(rng, c.frame_thickness)) * s,
        }
    }

    /// Normalised elliptical radius of a point (1 on the boundary).
    fn radius(&self, px: f64, py: f64) -> f64 {
        let (dx, dy) = (px - self.cx, py - self.cy);
        let (s, c) = self.rot.sin_cos();
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        ((u / self.a).powi(2) + (v / self.b).powi(2)).sqrt()
    }

    /// Vertical half-extent of the rotated ellipse.
    fn half_height(&self) -> f64 {
        let (s, c) = self.rot.sin_cos();
        ((self.a * s).powi(2) + (self.b * c).powi(2)).sqrt()
    }

    fn in_stripe(&self, py: f64) -> bool {
        let h = self.half_height();
        let n = f64::from(self.stripes);
        (1..=self.stripes).any(|j| {
            let centre = self.cy - h + 2.0 * h * f64::from(j) / (n + 1.0);
            (py - centre).abs() <= self.stripe_thickness / 2.0
        })
    }

    /// Ring between the ellipse scaled by the gap and by gap + thickness,
    /// measured along the mean semi-axis.
    fn in_frame(&self, r: f64, gap: f64) -> bool {
        let m = (self.a + self.b) / 2.0;
        let inner = 1.0 + gap / m;
        let outer = 1.0 + (gap + self.frame_thickness) / m;
        r >= inner && r <= outer
    }

    fn render(&self, c: &GlyphConfig, stripes: bool, frame: bool) -> Vec<f32> {
        const SS: usize = 4;
        let n = c.size;
        let gap = c.frame_gap * c.scale();
        let mut out = Vec::with_capacity(n * n);
        for row in 0..n {
            for col in 0..n {
                let mut acc = 0.0;
                for sy in 0..SS {
                    for sx in 0..SS {
                        let py = row as f64 + (sy as f64 + 0.5) / SS as f64;
                        let px = col as f64 + (sx as f64 + 0.5) / SS as f64;
                        let r = self.radius(px, py);
                        acc += if r <= 1.0 {
                            if stripes && self.in_stripe(py) {
                                1.0
                            } else {
                                self.fill
                            }
                        } else if frame && self.in_frame(r, gap) {
                            1.0
                        } else {
                            0.0
                        };
                    }
                }
                out.push((acc / (SS * SS) as f64).clamp(0.0, 1.0) as f32);
            }
        }
        out
    }
}

/// Grayscale glyphs with `config.attrs` as binary attributes. Unpaired sets
/// draw each attribute with probability 1/2 per example; paired sets emit
/// `n` pairs `(off, on)` of the first attribute in consecutive rows, siblings
/// sharing shape, style and all other attribute states.
pub fn make_glyphs(config: &GlyphConfig, n: usize, seed: u64) -> Result<LabeledDataset> {
    config.validate()?;
    if n == 0 {
        return Err(Error::Data("glyphs need n >= 1".into()));
    }
    let k = config.attrs.len();
    let units = exec::map_indexed(n, |i| {
        let mut rng = StreamRng::new(seed, domain::GLYPHS, i as u64);
        let glyph = Glyph::draw(config, &mut rng);
        let labels: Vec<u8> = (0..k).map(|_| u8::from(rng.bernoulli(0.5))).collect();
        let states: Vec<Vec<u8>> = if config.paired {
            [0u8, 1].iter().map(|&v| {
                let mut l = labels.clone();
                l[0] = v;
                l
            })
            .collect()
        } else {
            vec![labels]
        };
        states
            .into_iter()
            .map(|l| {
                let on = |a: GlyphAttr| config.attrs.iter().position(|&x| x == a).is_some_and(|p| l[p] == 1);
                (glyph.render(config, on(GlyphAttr::Stripes), on(GlyphAttr::Frame)), l)
            })
            .collect::<Vec<_>>()
    });
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (img, l) in units.into_iter().flatten() {
        x.extend(img);
        y.extend(l);
    }
    let names = config.attrs.iter().map(|a| a.as_str().to_string()).collect();
    LabeledDataset::new(vec![config.size, config.size, 1], x, y, names)
}
