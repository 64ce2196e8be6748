use std::f64::consts::PI;

use crate::exec;
use crate::rng::{domain, StreamRng};
use crate::{Error, Result};

use super::LabeledDataset;

/// Point and label for roll parameters `u, v` in `[0, 1]`.
pub fn swiss_roll_point(u: f64, v: f64) -> ([f64; 3], u8) {
    let t = 1.5 * PI * (1.0 + 2.0 * u);
    let p = [t * t.cos(), 21.0 * v, t * t.sin()];
    (p, label(p[0]))
}

fn label(x: f64) -> u8 {
    u8::from(x >= 10.0)
}

/// Swiss roll in R^3 with label `1` where the first coordinate is at least 10.
/// Example `i` draws from its own stream, so generation order is irrelevant.
pub fn make_swiss_roll(n: usize, noise_sd: f64, seed: u64) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::Data("swiss roll needs n >= 1".into()));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::Data(format!("noise_sd must be non-negative, got {noise_sd}")));
    }
    let rows = exec::map_indexed(n, |i| {
        let mut rng = StreamRng::new(seed, domain::SWISS_ROLL, i as u64);
        let (u, v) = (rng.uniform(), rng.uniform());
        let (mut p, _) = swiss_roll_point(u, v);
        if noise_sd > 0.0 {
            for c in &mut p {
                *c += noise_sd * rng.normal();
            }
        }
        (p, label(f64::from(p[0] as f32)))
    });
    let mut x = Vec::with_capacity(3 * n);
    let mut y = Vec::with_capacity(n);
    for (p, l) in rows {
        x.extend(p.iter().map(|&c| c as f32));
        y.push(l);
    }
    LabeledDataset::new(vec![3], x, y, vec!["x_ge_10".into()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_evaluated_points() {
        let (p, l) = swiss_roll_point(5.0 / 6.0, 0.5);
        assert!((p[0] - 4.0 * PI).abs() < 1e-12);
        assert!((p[1] - 10.5).abs() < 1e-12);
        assert!(p[2].abs() < 1e-12);
        assert_eq!(l, 1);
        let (p, l) = swiss_roll_point(0.0, 0.0);
        assert!(p[0].abs() < 1e-12 && p[1] == 0.0);
        assert!((p[2] + 1.5 * PI).abs() < 1e-12);
        assert_eq!(l, 0);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = make_swiss_roll(200, 0.1, 4).unwrap();
        let b = make_swiss_roll(200, 0.1, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, make_swiss_roll(200, 0.1, 5).unwrap());
        assert!(make_swiss_roll(0, 0.0, 0).is_err());
        assert!(make_swiss_roll(5, -1.0, 0).is_err());
    }

    #[test]
    fn label_follows_rule() {
        let d = make_swiss_roll(500, 0.0, 1).unwrap();
        for i in 0..d.len() {
            assert_eq!(d.label(i)[0], u8::from(f64::from(d.example(i)[0]) >= 10.0));
        }
    }
}
