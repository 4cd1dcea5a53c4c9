//! Minimal SVG emitters for security curves and PCA scatters. No plotting
//! dependency: plain string assembly with fixed margins and a small
//! palette.

use std::fmt::Write as _;

use crate::csvio::{CurveRow, PcaRow};

const W: f64 = 640.0;
const H: f64 = 420.0;
const ML: f64 = 60.0; // margins
const MR: f64 = 150.0;
const MT: f64 = 30.0;
const MB: f64 = 50.0;

const PALETTE: [&str; 11] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#4b0082",
];

fn header() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"monospace\" font-size=\"12\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    )
}

fn axis_frame(out: &mut String) {
    let x1 = ML;
    let y1 = MT;
    let x2 = W - MR;
    let y2 = H - MB;
    let _ = writeln!(
        out,
        "<rect x=\"{x1}\" y=\"{y1}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>",
        x2 - x1,
        y2 - y1
    );
}

/// Accuracy-vs-PNR line chart. The PNR axis is categorical over the sorted
/// distinct grid values, with `-inf` rendered as a leading "clean" tick.
pub fn curves_svg(rows: &[CurveRow]) -> String {
    let mut grid: Vec<f64> = Vec::new();
    for r in rows {
        if !grid.iter().any(|&g| g == r.pnr_db || (g.is_nan() && r.pnr_db.is_nan())) {
            grid.push(r.pnr_db);
        }
    }
    grid.sort_by(|a, b| a.total_cmp(b));
    let mut variants: Vec<String> = Vec::new();
    for r in rows {
        if !variants.contains(&r.variant) {
            variants.push(r.variant.clone());
        }
    }
    let xpos = |pnr: f64| -> f64 {
        let idx = grid.iter().position(|&g| g == pnr).unwrap_or(0);
        if grid.len() < 2 {
            return ML + (W - ML - MR) / 2.0;
        }
        ML + (W - ML - MR) * idx as f64 / (grid.len() - 1) as f64
    };
    let ypos = |acc: f64| H - MB - (H - MT - MB) * acc.clamp(0.0, 1.0);

    let mut out = header();
    axis_frame(&mut out);
    for tick in 0..=5 {
        let acc = tick as f64 / 5.0;
        let y = ypos(acc);
        let _ = writeln!(
            out,
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#ddd\"/>\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{acc:.1}</text>",
            ML,
            W - MR,
            ML - 6.0,
            y + 4.0
        );
    }
    for &g in &grid {
        let x = xpos(g);
        let label = if g == f64::NEG_INFINITY { "clean".to_string() } else { format!("{g}") };
        let _ = writeln!(
            out,
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{label}</text>",
            H - MB + 18.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">PNR (dB)</text>\
         <text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">accuracy</text>",
        (ML + W - MR) / 2.0,
        H - 12.0,
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0
    );
    for (vi, variant) in variants.iter().enumerate() {
        let color = PALETTE[vi % PALETTE.len()];
        let mut pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| &r.variant == variant)
            .map(|r| (xpos(r.pnr_db), ypos(r.accuracy)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            path.join(" ")
        );
        for (x, y) in &pts {
            let _ = writeln!(out, "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"3\" fill=\"{color}\"/>");
        }
        let ly = MT + 16.0 * vi as f64 + 10.0;
        let _ = writeln!(
            out,
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\
             <text x=\"{}\" y=\"{}\">{variant}</text>",
            W - MR + 10.0,
            W - MR + 34.0,
            W - MR + 40.0,
            ly + 4.0
        );
    }
    out.push_str("</svg>\n");
    out
}

/// PCA scatter colored by class id.
pub fn pca_svg(rows: &[PcaRow], class_names: &[String]) -> String {
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in rows {
        xmin = xmin.min(r.coords[0]);
        xmax = xmax.max(r.coords[0]);
        ymin = ymin.min(r.coords[1]);
        ymax = ymax.max(r.coords[1]);
    }
    if !xmin.is_finite() || xmax == xmin {
        xmin = -1.0;
        xmax = 1.0;
    }
    if !ymin.is_finite() || ymax == ymin {
        ymin = -1.0;
        ymax = 1.0;
    }
    let xpos = |v: f64| ML + (W - ML - MR) * (v - xmin) / (xmax - xmin);
    let ypos = |v: f64| H - MB - (H - MT - MB) * (v - ymin) / (ymax - ymin);
    let mut out = header();
    axis_frame(&mut out);
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">pc1</text>\
         <text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">pc2</text>",
        (ML + W - MR) / 2.0,
        H - 12.0,
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0
    );
    for r in rows {
        let color = PALETTE[r.label % PALETTE.len()];
        let _ = writeln!(
            out,
            "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"2\" fill=\"{color}\" fill-opacity=\"0.6\"/>",
            xpos(r.coords[0]),
            ypos(r.coords[1])
        );
    }
    let mut seen: Vec<usize> = rows.iter().map(|r| r.label).collect();
    seen.sort_unstable();
    seen.dedup();
    for (row, label) in seen.iter().enumerate() {
        let color = PALETTE[label % PALETTE.len()];
        let name = class_names.get(*label).cloned().unwrap_or_else(|| label.to_string());
        let ly = MT + 16.0 * row as f64 + 10.0;
        let _ = writeln!(
            out,
            "<circle cx=\"{}\" cy=\"{ly}\" r=\"4\" fill=\"{color}\"/>\
             <text x=\"{}\" y=\"{}\">{name}</text>",
            W - MR + 16.0,
            W - MR + 28.0,
            ly + 4.0
        );
    }
    out.push_str("</svg>\n");
    out
}
