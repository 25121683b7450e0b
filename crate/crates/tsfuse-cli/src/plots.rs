//! Static plot emission. Plots are written as hand-assembled SVG with fixed
//! float formatting, so identical inputs produce byte-identical files.

use std::fs;
use std::path::Path;

use anyhow::Result;
use log::warn;

pub fn plot_dir(out: &Path) -> std::path::PathBuf {
    out.join("plots")
}

/// Z-score each row in place (population sd; constant rows become zeros).
pub fn z_score_rows(matrix: &mut [Vec<f64>]) {
    for row in matrix.iter_mut() {
        let n = row.len() as f64;
        let mean = row.iter().sum::<f64>() / n;
        let sd = (row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        for v in row.iter_mut() {
            *v = if sd < 1e-12 { 0.0 } else { (*v - mean) / sd };
        }
    }
}

fn diverging_color(z: f64) -> String {
    // blue (negative) -> white -> red (positive), clamped at |z| = 2.5
    let t = (z / 2.5).clamp(-1.0, 1.0);
    let (r, g, b) = if t < 0.0 {
        let u = 1.0 + t;
        (
            (255.0 * u) as u8,
            (255.0 * u) as u8,
            255u8,
        )
    } else {
        let u = 1.0 - t;
        (255u8, (255.0 * u) as u8, (255.0 * u) as u8)
    };
    format!("rgb({r},{g},{b})")
}

fn svg_open(width: usize, height: usize) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         font-family=\"monospace\" font-size=\"11\">\n"
    )
}

/// Annotated heatmap with row-wise Z-scoring. `matrix[i][j]` is row i
/// (feature) by column j (regime); the annotations show the raw values.
pub fn heatmap_svg(row_labels: &[String], col_labels: &[String], matrix: &[Vec<f64>]) -> String {
    let cell_w = 72;
    let cell_h = 22;
    let left = 200;
    let top = 40;
    let width = left + cell_w * col_labels.len() + 20;
    let height = top + cell_h * row_labels.len() + 20;
    let mut scored: Vec<Vec<f64>> = matrix.to_vec();
    z_score_rows(&mut scored);
    let mut s = svg_open(width, height);
    for (j, label) in col_labels.iter().enumerate() {
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            left + j * cell_w + cell_w / 2,
            top - 10,
            label
        ));
    }
    for (i, label) in row_labels.iter().enumerate() {
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            left - 8,
            top + i * cell_h + cell_h / 2 + 4,
            label
        ));
        for j in 0..col_labels.len() {
            let x = left + j * cell_w;
            let y = top + i * cell_h;
            s.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cell_w}\" height=\"{cell_h}\" fill=\"{}\" stroke=\"#999\"/>\n",
                diverging_color(scored[i][j])
            ));
            s.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.2}</text>\n",
                x + cell_w / 2,
                y + cell_h / 2 + 4,
                matrix[i][j]
            ));
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Horizontal bar chart of (label, magnitude, sign) triples — the global
/// attribution summary. Positive bars red, negative blue.
pub fn bar_chart_svg(rows: &[(String, f64, f64)]) -> String {
    let bar_h = 20;
    let left = 220;
    let top = 20;
    let scale_w = 320.0;
    let height = top + rows.len() * (bar_h + 6) + 20;
    let max = rows.iter().map(|r| r.1).fold(f64::MIN_POSITIVE, f64::max);
    let mut s = svg_open(left + scale_w as usize + 80, height);
    for (i, (label, magnitude, sign)) in rows.iter().enumerate() {
        let y = top + i * (bar_h + 6);
        let w = (magnitude / max * scale_w).max(1.0);
        let fill = if *sign >= 0.0 { "#c0392b" } else { "#2e6da4" };
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            left - 8,
            y + bar_h / 2 + 4,
            label
        ));
        s.push_str(&format!(
            "<rect x=\"{left}\" y=\"{y}\" width=\"{w:.1}\" height=\"{bar_h}\" fill=\"{fill}\"/>\n"
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{}\">{:.4}</text>\n",
            left as f64 + w + 6.0,
            y + bar_h / 2 + 4,
            magnitude
        ));
    }
    s.push_str("</svg>\n");
    s
}

fn quartiles(sorted: &[f64]) -> (f64, f64, f64) {
    let q = |p: f64| -> f64 {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    };
    (q(0.25), (q(0.5)), q(0.75))
}

/// Box plots of per-group value distributions (gain distributions by regime).
pub fn box_plot_svg(groups: &[(String, Vec<f64>)]) -> String {
    let box_w = 46;
    let gap = 34;
    let left = 60;
    let top = 20;
    let plot_h = 220.0;
    let width = left + groups.len() * (box_w + gap) + 40;
    let height = top + plot_h as usize + 50;
    let all: Vec<f64> = groups.iter().flat_map(|(_, v)| v.iter().copied()).collect();
    let lo = all.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-9);
    let y_of = |v: f64| top as f64 + (hi - v) / span * plot_h;
    let mut s = svg_open(width, height);
    // zero line
    if lo < 0.0 && hi > 0.0 {
        s.push_str(&format!(
            "<line x1=\"{left}\" y1=\"{0:.1}\" x2=\"{1}\" y2=\"{0:.1}\" stroke=\"#bbb\" stroke-dasharray=\"4\"/>\n",
            y_of(0.0),
            width - 20
        ));
    }
    for (g, (label, values)) in groups.iter().enumerate() {
        let x = left + g * (box_w + gap);
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (q1, med, q3) = quartiles(&sorted);
        let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
        let cx = x + box_w / 2;
        s.push_str(&format!(
            "<line x1=\"{cx}\" y1=\"{:.1}\" x2=\"{cx}\" y2=\"{:.1}\" stroke=\"#333\"/>\n",
            y_of(max),
            y_of(min)
        ));
        s.push_str(&format!(
            "<rect x=\"{x}\" y=\"{:.1}\" width=\"{box_w}\" height=\"{:.1}\" fill=\"#d8e5f0\" stroke=\"#333\"/>\n",
            y_of(q3),
            (y_of(q1) - y_of(q3)).max(1.0)
        ));
        s.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{0:.1}\" x2=\"{1}\" y2=\"{0:.1}\" stroke=\"#333\" stroke-width=\"2\"/>\n",
            y_of(med),
            x + box_w
        ));
        s.push_str(&format!(
            "<text x=\"{cx}\" y=\"{}\" text-anchor=\"middle\">{label}</text>\n",
            top + plot_h as usize + 20
        ));
    }
    s.push_str("</svg>\n");
    s
}

/// Net (rescued - hurt) fraction vs gate-value bin, one panel per
/// representation.
pub fn gate_profile_svg(rep_labels: &[String], profiles: &[Vec<(f64, f64)>]) -> String {
    let panel_w = 220;
    let panel_h = 140;
    let gap = 30;
    let left = 50;
    let top = 30;
    let width = left + profiles.len() * (panel_w + gap);
    let height = top + panel_h + 60;
    let mut s = svg_open(width, height);
    for (p, (label, profile)) in rep_labels.iter().zip(profiles).enumerate() {
        let x0 = left + p * (panel_w + gap);
        let bins = profile.len();
        let bar_w = panel_w / bins.max(1);
        let mid = top + panel_h / 2;
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{label}</text>\n",
            x0 + panel_w / 2,
            top - 10
        ));
        s.push_str(&format!(
            "<line x1=\"{x0}\" y1=\"{mid}\" x2=\"{}\" y2=\"{mid}\" stroke=\"#999\"/>\n",
            x0 + panel_w
        ));
        for (k, &(net, mass)) in profile.iter().enumerate() {
            let h = (net.abs() * (panel_h as f64 / 2.0)).min(panel_h as f64 / 2.0);
            let x = x0 + k * bar_w;
            let (y, fill) = if net >= 0.0 {
                (mid as f64 - h, "#2d8a4e")
            } else {
                (mid as f64, "#b24545")
            };
            s.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y:.1}\" width=\"{}\" height=\"{h:.1}\" fill=\"{fill}\" fill-opacity=\"{:.2}\"/>\n",
                bar_w.saturating_sub(2),
                0.35 + 0.65 * mass.min(1.0)
            ));
        }
        s.push_str(&format!(
            "<text x=\"{x0}\" y=\"{}\">0</text><text x=\"{}\" y=\"{}\" text-anchor=\"end\">1</text>\n",
            top + panel_h + 16,
            x0 + panel_w,
            top + panel_h + 16
        ));
    }
    s.push_str("</svg>\n");
    s
}

/// Write an SVG if the content closure produced something; otherwise warn.
pub fn write_plot(out: &Path, name: &str, svg: Option<String>) -> Result<()> {
    match svg {
        Some(content) => {
            fs::create_dir_all(plot_dir(out))?;
            fs::write(plot_dir(out).join(name), content)?;
        }
        None => warn!("{name}: inputs missing, plot skipped"),
    }
    Ok(())
}
