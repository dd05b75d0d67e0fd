//! Minimal SVG line charts: one or more polylines and an optional band.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 40.0;

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub dashed: bool,
    pub values: &'a [Option<f64>],
}

pub struct Band<'a> {
    pub lo: &'a [Option<f64>],
    pub hi: &'a [Option<f64>],
}

struct Scale {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Scale {
    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }
    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

/// Renders the chart. Undefined values break the polyline.
pub fn line_chart(title: &str, xs: &[f64], series: &[Series], band: Option<Band>) -> String {
    let defined = series
        .iter()
        .flat_map(|s| s.values.iter())
        .chain(band.iter().flat_map(|b| b.lo.iter().chain(b.hi)))
        .filter_map(|v| *v);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in defined {
        y0 = y0.min(v);
        y1 = y1.max(v);
    }
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let x0 = xs.first().copied().unwrap_or(0.0);
    let mut x1 = xs.last().copied().unwrap_or(1.0);
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let sc = Scale { x0, x1, y0, y1 };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="14">{}</text>"#,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<path d="M{m} {top} V{bottom} H{right}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        top = MARGIN,
        bottom = HEIGHT - MARGIN,
        right = WIDTH - MARGIN
    );
    for (v, y) in [(y0, HEIGHT - MARGIN + 4.0), (y1, MARGIN + 4.0)] {
        let _ = writeln!(
            out,
            r#"<text x="2" y="{y:.1}" font-family="sans-serif" font-size="10">{v:.3}</text>"#
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10">{x1:.3}</text>"#,
        WIDTH - MARGIN - 20.0,
        HEIGHT - MARGIN + 16.0
    );

    if let Some(band) = band {
        for run in runs(xs, band.lo, band.hi) {
            let mut d = String::new();
            for (i, &(x, lo, _)) in run.iter().enumerate() {
                let _ = write!(
                    d,
                    "{}{:.2} {:.2} ",
                    if i == 0 { "M" } else { "L" },
                    sc.x(x),
                    sc.y(lo)
                );
            }
            for &(x, _, hi) in run.iter().rev() {
                let _ = write!(d, "L{:.2} {:.2} ", sc.x(x), sc.y(hi));
            }
            let _ = writeln!(
                out,
                r##"<path d="{}Z" fill="#9ecae1" fill-opacity="0.6" stroke="none"/>"##,
                d
            );
        }
    }

    for (k, s) in series.iter().enumerate() {
        let dash = if s.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        for run in runs(xs, s.values, s.values) {
            let pts: Vec<String> = run
                .iter()
                .map(|&(x, y, _)| format!("{:.2},{:.2}", sc.x(x), sc.y(y)))
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
                pts.join(" "),
                s.color
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="{}">{}</text>"#,
            WIDTH - MARGIN - 120.0,
            MARGIN + 14.0 * (k as f64 + 1.0),
            s.color,
            escape(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Maximal stretches where both value slices are defined.
fn runs(xs: &[f64], a: &[Option<f64>], b: &[Option<f64>]) -> Vec<Vec<(f64, f64, f64)>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    for i in 0..xs.len() {
        match (a[i], b[i]) {
            (Some(u), Some(v)) => current.push((xs[i], u, v)),
            _ => {
                if !current.is_empty() {
                    out.push(std::mem::take(&mut current));
                }
            }
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn undefined_values_split_lines() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let v = [Some(1.0), None, Some(0.5), Some(0.2)];
        let svg = line_chart(
            "J <test>",
            &xs,
            &[Series {
                label: "observed",
                color: "black",
                dashed: false,
                values: &v,
            }],
            None,
        );
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("J &lt;test&gt;"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn band_is_a_closed_path() {
        let xs = [0.0, 1.0];
        let lo = [Some(0.0), Some(0.1)];
        let hi = [Some(0.5), Some(0.9)];
        let svg = line_chart("band", &xs, &[], Some(Band { lo: &lo, hi: &hi }));
        assert!(svg.contains("Z\" fill=\"#9ecae1\""));
    }
}
