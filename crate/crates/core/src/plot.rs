//! Minimal SVG 1.1 output: line plots and color-mapped heatmaps.

use std::fmt::Write as _;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
            (l.min(v), h.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn header(out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 10.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 14 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
}

fn axes(out: &mut String, (x0, x1): (f64, f64), (y0, y1): (f64, f64)) {
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN / 2.0, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        r - l,
        b - t
    );
    for (v, x, anchor) in [(x0, l, "start"), (x1, r, "end")] {
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{}" text-anchor="{anchor}" font-family="sans-serif" font-size="10">{v:.3}</text>"#,
            b + 14.0
        );
    }
    for (v, y) in [(y0, b), (y1, t + 8.0)] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{y}" text-anchor="end" font-family="sans-serif" font-size="10">{v:.3}</text>"#,
            l - 4.0
        );
    }
}

fn polyline(xs: &[f64], ys: &[f64], xb: (f64, f64), yb: (f64, f64), style: &str) -> String {
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN / 2.0, MARGIN, HEIGHT - MARGIN);
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let px = l + (x - xb.0) / (xb.1 - xb.0) * (r - l);
            let py = b - (y - yb.0) / (yb.1 - yb.0) * (b - t);
            format!("{px:.2},{py:.2}")
        })
        .collect();
    format!(
        r#"<polyline fill="none" {style} points="{}"/>"#,
        pts.join(" ")
    )
}

/// Curve `ys` over `xs`, with an optional dashed reference curve.
pub fn line_plot(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    xs: &[f64],
    ys: &[f64],
    reference: Option<&[f64]>,
) -> String {
    let xb = bounds(xs.iter().copied());
    let yb = bounds(
        ys.iter()
            .copied()
            .chain(reference.unwrap_or(&[]).iter().copied()),
    );
    let mut out = String::new();
    header(&mut out, title, xlabel, ylabel);
    axes(&mut out, xb, yb);
    if let Some(r) = reference {
        let _ = writeln!(
            out,
            "{}",
            polyline(
                xs,
                r,
                xb,
                yb,
                r#"stroke="gray" stroke-width="1.5" stroke-dasharray="5,4""#
            )
        );
    }
    let _ = writeln!(
        out,
        "{}",
        polyline(xs, ys, xb, yb, r#"stroke="steelblue" stroke-width="2""#)
    );
    out.push_str("</svg>\n");
    out
}

/// Blue-white-red color for `t` in `[0, 1]`.
fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let s = t / 0.5;
        (
            59.0 + s * (255.0 - 59.0),
            76.0 + s * (255.0 - 76.0),
            192.0 + s * (255.0 - 192.0),
        )
    } else {
        let s = (t - 0.5) / 0.5;
        (
            255.0 - s * (255.0 - 180.0),
            255.0 - s * (255.0 - 4.0),
            255.0 - s * (255.0 - 38.0),
        )
    };
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}

/// Heatmap over the grid `xs × ys`; `values[i * ys.len() + j]` is at `(xs[i], ys[j])`.
pub fn heatmap(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    xs: &[f64],
    ys: &[f64],
    values: &[f64],
) -> String {
    let xb = bounds(xs.iter().copied());
    let yb = bounds(ys.iter().copied());
    let vb = bounds(values.iter().copied());
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN / 2.0, MARGIN, HEIGHT - MARGIN);
    let cw = (r - l) / xs.len().max(1) as f64;
    let ch = (b - t) / ys.len().max(1) as f64;
    let mut out = String::new();
    header(&mut out, title, xlabel, ylabel);
    for i in 0..xs.len() {
        for j in 0..ys.len() {
            let v = values.get(i * ys.len() + j).copied().unwrap_or(f64::NAN);
            let fill = if v.is_finite() {
                color((v - vb.0) / (vb.1 - vb.0))
            } else {
                "#888888".into()
            };
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                l + i as f64 * cw,
                b - (j + 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05
            );
        }
    }
    axes(&mut out, xb, yb);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="10">range [{:.3}, {:.3}]</text>"#,
        r,
        t - 6.0,
        vb.0,
        vb.1
    );
    out.push_str("</svg>\n");
    out
}
