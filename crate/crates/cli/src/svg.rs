//! A minimal SVG emitter: polyline plots and heatmaps. Coordinates are
//! printed with fixed precision so output is stable across runs.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 320.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="20" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

/// Line plot of one or more series with axis labels and a legend.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (x0, x1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
    let mut out = String::new();
    header(&mut out, title);
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    for (x, anchor, v) in [(MARGIN, "start", x0), (W - MARGIN, "end", x1)] {
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="{anchor}">{v:.4}</text>"#,
            H - MARGIN + 14.0
        );
    }
    for (y, v) in [(H - MARGIN, y0), (MARGIN + 10.0, y1)] {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{y:.1}" font-family="sans-serif" font-size="10" text-anchor="end">{v:.4}</text>"#,
            MARGIN - 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        for p in &pts {
            let (cx, cy) = p.split_once(',').expect("formatted pair");
            let _ = writeln!(out, r#"<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>"#);
        }
        let ly = MARGIN + 14.0 + 14.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{ly:.1}" font-family="sans-serif" font-size="10" fill="{color}" text-anchor="end">{}</text>"#,
            W - MARGIN - 6.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Heatmap of row-major `values` (`ny` rows of `nx`), row 0 at the bottom.
/// Cells are shaded on a blue-white-red scale symmetric about zero.
pub fn heatmap(title: &str, nx: usize, ny: usize, values: &[f64]) -> String {
    assert_eq!(values.len(), nx * ny, "heatmap needs nx·ny values");
    let m = values
        .iter()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let (cw, ch) = ((W - 2.0 * MARGIN) / nx as f64, (H - 2.0 * MARGIN) / ny as f64);
    let mut out = String::new();
    header(&mut out, title);
    for j in 0..ny {
        for i in 0..nx {
            let v = values[j * nx + i];
            let t = if v.is_finite() {
                (v / m).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            let fade = |c: f64| (255.0 * (1.0 - t.abs()) + c * t.abs()).round() as u8;
            let (r, g, b) = if t >= 0.0 {
                (fade(214.0), fade(39.0), fade(40.0))
            } else {
                (fade(31.0), fade(119.0), fade(180.0))
            };
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({r},{g},{b})"/>"#,
                MARGIN + i as f64 * cw,
                H - MARGIN - (j + 1) as f64 * ch,
                cw,
                ch
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="end">max |v| = {m:.4e}</text>"#,
        W - MARGIN,
        H - 12.0
    );
    out.push_str("</svg>\n");
    out
}

/// Averages `values` (`ny` rows of `nx`) down to at most `max` cells per side.
pub fn downsample(nx: usize, ny: usize, values: &[f64], max: usize) -> (usize, usize, Vec<f64>) {
    let fx = nx.div_ceil(max).max(1);
    let fy = ny.div_ceil(max).max(1);
    let (mx, my) = (nx.div_ceil(fx), ny.div_ceil(fy));
    let mut out = vec![0.0; mx * my];
    let mut count = vec![0usize; mx * my];
    for j in 0..ny {
        for i in 0..nx {
            let k = (j / fy) * mx + i / fx;
            out[k] += values[j * nx + i];
            count[k] += 1;
        }
    }
    for (v, c) in out.iter_mut().zip(&count) {
        *v /= *c as f64;
    }
    (mx, my, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn downsample_averages_blocks() {
        let v: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let (mx, my, d) = downsample(4, 4, &v, 2);
        assert_eq!((mx, my), (2, 2));
        assert_eq!(d, vec![2.5, 4.5, 10.5, 12.5]);
    }

    #[test]
    fn degenerate_ranges_are_widened() {
        assert_eq!(range([1.0, 1.0].into_iter()), (0.5, 1.5));
        assert_eq!(range(std::iter::empty()), (0.0, 1.0));
    }
}
