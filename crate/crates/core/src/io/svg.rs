//! Minimal SVG scatter plots.

use std::fmt::Write;

/// One scatter panel: points `(x, y, class)` coloured by class.
pub struct Scatter<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub caption: &'a str,
    pub points: &'a [(f64, f64, u8)],
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Scatter<'_> {
    pub fn to_svg(&self) -> String {
        let (w, h, m) = (480.0, 480.0, 50.0);
        let finite = self.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in finite.clone() {
            x0 = x0.min(p.0);
            x1 = x1.max(p.0);
            y0 = y0.min(p.1);
            y1 = y1.max(p.1);
        }
        if x0 > x1 {
            (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
        }
        let pad = |lo: f64, hi: f64| {
            let d = (hi - lo).max(1e-9) * 0.05;
            (lo - d, hi + d)
        };
        let ((x0, x1), (y0, y1)) = (pad(x0, x1), pad(y0, y1));
        let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
        let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{}" font-family="sans-serif" font-size="12">"#,
            h + 30.0
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(self.title));
        let _ = writeln!(
            s,
            r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            w - 2.0 * m,
            h - 2.0 * m
        );
        for p in finite {
            let color = PALETTE[p.2 as usize % PALETTE.len()];
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="{color}" fill-opacity="0.6"/>"#, sx(p.0), sy(p.1));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - m + 30.0, escape(self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
            h / 2.0,
            h / 2.0,
            escape(self.y_label)
        );
        let _ = writeln!(s, r#"<text x="{m}" y="{}">{}</text>"#, h + 20.0, escape(self.caption));
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{x0:.2} .. {x1:.2} / {y0:.2} .. {y1:.2}</text>"#, w - m, m - 8.0);
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emits_one_circle_per_point_and_caption() {
        let pts = [(0.0, 0.0, 0), (1.0, 2.0, 1), (f64::NAN, 0.0, 0)];
        let svg = Scatter {
            title: "w",
            x_label: "w1",
            y_label: "w2",
            caption: "probe accuracy 0.99 <linear>",
            points: &pts,
        }
        .to_svg();
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("probe accuracy 0.99 &lt;linear&gt;"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
