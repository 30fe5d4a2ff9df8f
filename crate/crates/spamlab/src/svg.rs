//! Hand-written SVG plots: ROC curves and Shapley summary panels.

use std::fmt::Write;

use spamlab_core::eval::MeanRoc;
use spamlab_core::explain::RankedFeature;

const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#393b79", "#637939",
];

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Legend text for one curve.
pub fn auc_label(name: &str, roc: &MeanRoc) -> String {
    format!("{name} (AUC = {:.2} \u{b1} {:.2})", roc.auc_mean, roc.auc_std)
}

/// Plot box inside the 800 x 600 canvas.
const LEFT: f64 = 70.0;
const TOP: f64 = 30.0;
const SIDE: f64 = 500.0;

fn px(fpr: f64) -> f64 {
    LEFT + fpr.clamp(0.0, 1.0) * SIDE
}

fn py(tpr: f64) -> f64 {
    TOP + (1.0 - tpr.clamp(0.0, 1.0)) * SIDE
}

/// Mean ROC per model with a one-standard-deviation band. The legend lists
/// models by descending mean AUC.
pub fn roc_svg(curves: &[(String, MeanRoc)]) -> String {
    let mut order: Vec<usize> = (0..curves.len()).collect();
    order.sort_by(|&a, &b| curves[b].1.auc_mean.total_cmp(&curves[a].1.auc_mean).then(a.cmp(&b)));

    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 600\" width=\"800\" height=\"600\" font-family=\"sans-serif\">\n");
    s.push_str("<rect width=\"800\" height=\"600\" fill=\"white\"/>\n");
    let _ = writeln!(s, "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{SIDE}\" height=\"{SIDE}\" fill=\"none\" stroke=\"black\"/>");
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(
            s,
            "<line x1=\"{x:.1}\" y1=\"{b:.1}\" x2=\"{x:.1}\" y2=\"{b2:.1}\" stroke=\"black\"/><text x=\"{x:.1}\" y=\"{ty:.1}\" font-size=\"12\" text-anchor=\"middle\">{v:.1}</text>",
            x = px(v),
            b = TOP + SIDE,
            b2 = TOP + SIDE + 5.0,
            ty = TOP + SIDE + 20.0,
        );
        let _ = writeln!(
            s,
            "<line x1=\"{l:.1}\" y1=\"{y:.1}\" x2=\"{l2:.1}\" y2=\"{y:.1}\" stroke=\"black\"/><text x=\"{tx:.1}\" y=\"{ty:.1}\" font-size=\"12\" text-anchor=\"end\">{v:.1}</text>",
            l = LEFT - 5.0,
            l2 = LEFT,
            y = py(v),
            tx = LEFT - 8.0,
            ty = py(v) + 4.0,
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"585\" font-size=\"14\" text-anchor=\"middle\">False positive rate</text>",
        LEFT + SIDE / 2.0
    );
    let _ = writeln!(
        s,
        "<text x=\"20\" y=\"{y:.1}\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 20 {y:.1})\">True positive rate</text>",
        y = TOP + SIDE / 2.0
    );
    let _ = writeln!(
        s,
        "<line class=\"chance\" x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#999999\" stroke-dasharray=\"6 4\"/>",
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );

    for (rank, &i) in order.iter().enumerate() {
        let (name, roc) = &curves[i];
        let color = PALETTE[rank % PALETTE.len()];
        let upper = roc.fpr.iter().zip(roc.tpr_mean.iter().zip(&roc.tpr_std)).map(|(&f, (&m, &d))| (f, m + d));
        let lower = roc.fpr.iter().zip(roc.tpr_mean.iter().zip(&roc.tpr_std)).map(|(&f, (&m, &d))| (f, m - d));
        let mut band: Vec<String> = upper.map(|(f, t)| format!("{:.2},{:.2}", px(f), py(t))).collect();
        let mut low: Vec<String> = lower.map(|(f, t)| format!("{:.2},{:.2}", px(f), py(t))).collect();
        low.reverse();
        band.extend(low);
        let _ = writeln!(
            s,
            "<polygon class=\"band\" points=\"{}\" fill=\"{color}\" fill-opacity=\"0.15\" stroke=\"none\"/>",
            band.join(" ")
        );
        let line: Vec<String> =
            roc.fpr.iter().zip(&roc.tpr_mean).map(|(&f, &t)| format!("{:.2},{:.2}", px(f), py(t))).collect();
        let _ = writeln!(
            s,
            "<polyline class=\"mean\" data-model=\"{}\" points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            escape(name),
            line.join(" ")
        );
    }

    let lx = LEFT + SIDE + 15.0;
    let _ = writeln!(s, "<g class=\"legend\" font-size=\"11\">");
    for (rank, &i) in order.iter().enumerate() {
        let (name, roc) = &curves[i];
        let y = TOP + 10.0 + rank as f64 * 18.0;
        let color = PALETTE[rank % PALETTE.len()];
        let _ = writeln!(
            s,
            "<line x1=\"{lx:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"{color}\" stroke-width=\"3\"/><text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            lx + 18.0,
            lx + 22.0,
            y + 4.0,
            escape(&auc_label(name, roc))
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}

/// Maps `t` in `[0, 1]` from blue (low feature value) to red (high).
fn value_color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(0x1e as f64, 0xff as f64), lerp(0x88 as f64, 0x00 as f64), lerp(0xe5 as f64, 0x52 as f64))
}

/// Deterministic vertical spread in `[-1, 1]` for overlapping dots.
fn jitter(k: usize) -> f64 {
    let h = (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) >> 40;
    (h as f64 / (1u64 << 24) as f64) * 2.0 - 1.0
}

/// One panel per model: features top to bottom by mean |attribution|, one
/// dot per explained instance at its attribution, coloured by the
/// feature's value scaled to that feature's range.
pub fn summary_svg(panels: &[(String, Vec<RankedFeature>)]) -> String {
    const PANEL_W: f64 = 420.0;
    const ROW_H: f64 = 28.0;
    const LABEL_W: f64 = 120.0;
    let rows = panels.iter().map(|(_, f)| f.len()).max().unwrap_or(0).max(1);
    let width = PANEL_W * panels.len().max(1) as f64;
    let height = 80.0 + ROW_H * rows as f64;

    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width} {height}\" width=\"{width}\" height=\"{height}\" font-family=\"sans-serif\">"
    );
    let _ = writeln!(s, "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>");
    for (p, (name, features)) in panels.iter().enumerate() {
        let x0 = p as f64 * PANEL_W;
        let plot_l = x0 + LABEL_W;
        let plot_w = PANEL_W - LABEL_W - 20.0;
        let top = 40.0;
        let _ = writeln!(s, "<g class=\"panel\" data-model=\"{}\">", escape(name));
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"22\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
            x0 + PANEL_W / 2.0,
            escape(name)
        );
        let span = features.iter().flat_map(|f| f.points.iter().map(|p| p.0.abs())).fold(0.0f64, f64::max);
        let span = if span > 0.0 { span } else { 1.0 };
        let sx = |v: f64| plot_l + plot_w / 2.0 + v / span * plot_w / 2.0;
        let bottom = top + ROW_H * features.len().max(1) as f64;
        let _ = writeln!(
            s,
            "<line x1=\"{x:.1}\" y1=\"{top:.1}\" x2=\"{x:.1}\" y2=\"{bottom:.1}\" stroke=\"#999999\"/>",
            x = sx(0.0)
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">Shapley value (max |v| = {span:.3})</text>",
            plot_l + plot_w / 2.0,
            bottom + 20.0
        );
        for (r, f) in features.iter().enumerate() {
            let cy = top + ROW_H * (r as f64 + 0.5);
            let _ = writeln!(
                s,
                "<text class=\"feature\" x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"end\">{}</text>",
                plot_l - 6.0,
                cy + 4.0,
                escape(&f.name)
            );
            let (lo, hi) = f.points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
            for (k, &(v, x)) in f.points.iter().enumerate() {
                let t = if hi > lo { (x - lo) / (hi - lo) } else { 0.5 };
                let _ = writeln!(
                    s,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.8\"/>",
                    sx(v),
                    cy + jitter(k) * ROW_H * 0.3,
                    value_color(t)
                );
            }
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}
