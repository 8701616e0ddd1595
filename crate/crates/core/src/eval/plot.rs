//! Minimal SVG 1.1 charts: prediction against reference over time, and per-bin
//! error bars by variant.

use std::fmt::Write;

use crate::eval::metrics::BinStats;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 4] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(title: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    )
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}

fn axes(out: &mut String, x_label: &str, y_label: &str, (y0, y1): (f64, f64)) {
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN / 2.0, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        "<path d=\"M{left} {top} L{left} {bottom} L{right} {bottom}\" stroke=\"black\" fill=\"none\"/>"
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
        (left + right) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
        (top + bottom) / 2.0,
        (top + bottom) / 2.0,
        escape(y_label)
    );
    for (v, y) in [(y0, bottom), (y1, top)] {
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">{v:.1}</text>",
            left - 4.0,
            y + 3.0
        );
    }
}

fn polyline(out: &mut String, pts: &[(f64, f64)], color: &str) {
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ = writeln!(
        out,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\"/>",
        coords.join(" ")
    );
}

fn legend(out: &mut String, entries: &[(&str, &str)]) {
    for (i, (name, color)) in entries.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        let x = WIDTH - MARGIN * 3.5;
        let _ = writeln!(out, "<rect x=\"{x}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{color}\"/>", y - 9.0);
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{y}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            x + 14.0,
            escape(name)
        );
    }
}

/// Time series of reference and predicted force.
pub fn prediction_plot(title: &str, t: &[f64], reference: &[f64], prediction: &[f64]) -> String {
    let mut out = header(title);
    let (x0, x1) = range(t.iter().copied());
    let (y0, y1) = range(reference.iter().chain(prediction).copied());
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 1.5 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    axes(&mut out, "time (s)", "force (N)", (y0, y1));
    for (series, color) in [(reference, COLORS[0]), (prediction, COLORS[3])] {
        let pts: Vec<(f64, f64)> = t.iter().zip(series).map(|(&x, &y)| (sx(x), sy(y))).collect();
        polyline(&mut out, &pts, color);
    }
    legend(&mut out, &[("reference", COLORS[0]), ("prediction", COLORS[3])]);
    out.push_str("</svg>\n");
    out
}

/// Grouped bars of per-bin MAE with one-standard-deviation whiskers.
pub fn bin_chart(title: &str, series: &[(String, Vec<BinStats>)]) -> String {
    let mut out = header(title);
    let bins = series.iter().map(|s| s.1.len()).max().unwrap_or(0);
    let top = series
        .iter()
        .flat_map(|s| s.1.iter().map(|b| b.mae.unwrap_or(0.0) + b.std.unwrap_or(0.0)))
        .fold(0.0, f64::max);
    let top = if top > 0.0 { top } else { 1.0 };
    axes(&mut out, "|reference force| bin (N)", "MAE (N)", (0.0, top));
    let plot_w = WIDTH - 1.5 * MARGIN;
    let slot = plot_w / bins.max(1) as f64;
    let bar = slot * 0.8 / series.len().max(1) as f64;
    let sy = |y: f64| HEIGHT - MARGIN - y / top * (HEIGHT - 2.0 * MARGIN);
    for k in 0..bins {
        let label = series
            .iter()
            .find_map(|s| s.1.get(k))
            .map(|b| match b.hi {
                Some(hi) => format!("{}-{}", b.lo, hi),
                None => format!("{}+", b.lo),
            })
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">{label}</text>",
            MARGIN + slot * (k as f64 + 0.5),
            HEIGHT - MARGIN + 14.0
        );
        for (i, (_, stats)) in series.iter().enumerate() {
            let Some(b) = stats.get(k) else { continue };
            let (Some(m), Some(s)) = (b.mae, b.std) else { continue };
            let x = MARGIN + slot * k as f64 + slot * 0.1 + bar * i as f64;
            let color = COLORS[i % COLORS.len()];
            let _ = writeln!(
                out,
                "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"{bar:.2}\" height=\"{:.2}\" fill=\"{color}\"/>",
                sy(m),
                sy(0.0) - sy(m)
            );
            let cx = x + bar / 2.0;
            let _ = writeln!(
                out,
                "<path d=\"M{cx:.2} {:.2} L{cx:.2} {:.2}\" stroke=\"black\"/>",
                sy(m + s),
                sy((m - s).max(0.0))
            );
        }
    }
    let names: Vec<(&str, &str)> = series
        .iter()
        .enumerate()
        .map(|(i, s)| (s.0.as_str(), COLORS[i % COLORS.len()]))
        .collect();
    legend(&mut out, &names);
    out.push_str("</svg>\n");
    out
}
