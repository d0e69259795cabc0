//! SVG 1.1 rendering of an evaluation report: the four per-subset distance histograms
//! overlaid as step curves, a legend, and the two overlap errors.
//!
//! Output is plain text built with fixed-precision formatting, so equal reports render to
//! byte-identical documents.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evaluation::EvalReport;
use crate::pairing::Subset;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 48.0;
const BOTTOM: f64 = 56.0;
const TICKS: usize = 5;

fn color(which: Subset) -> &'static str {
    match which {
        Subset::RelNear => "#1f77b4",
        Subset::RelFar => "#2ca02c",
        Subset::IrrNear => "#d62728",
        Subset::IrrFar => "#ff7f0e",
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}

/// Renders `report` as a standalone SVG document. Curves show the fraction of each
/// subset's distances falling in every bin.
pub fn render_svg(report: &EvalReport, title: &str) -> Result<String> {
    let bins = report.bins;
    if bins == 0 {
        return Err(Error::Format("report has zero bins".into()));
    }
    let mut curves = Vec::with_capacity(4);
    for which in Subset::ALL {
        let sub = report.subset(which);
        if sub.counts.len() != bins {
            return Err(Error::Format(format!(
                "subset {} has {} histogram bins, expected {bins}",
                sub.code,
                sub.counts.len()
            )));
        }
        let total: u64 = sub.counts.iter().sum();
        let freq: Vec<f64> = sub
            .counts
            .iter()
            .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
            .collect();
        curves.push((which, freq));
    }
    let y_max = curves
        .iter()
        .flat_map(|(_, f)| f.iter().copied())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let [lo, hi] = report.range;
    let span = if hi > lo { hi - lo } else { 1.0 };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |v: f64| LEFT + (v - lo) / span * plot_w;
    let sy = |f: f64| TOP + plot_h - f / y_max * plot_h;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH:.0}" height="{HEIGHT:.0}" viewBox="0 0 {WIDTH:.0} {HEIGHT:.0}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH:.0}" height="{HEIGHT:.0}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    // Axes and ticks.
    let x0 = LEFT;
    let y0 = TOP + plot_h;
    let _ = writeln!(
        s,
        r#"<path d="M{x0:.2},{TOP:.2} L{x0:.2},{y0:.2} L{:.2},{y0:.2}" fill="none" stroke="black" stroke-width="1"/>"#,
        LEFT + plot_w
    );
    for t in 0..=TICKS {
        let frac = t as f64 / TICKS as f64;
        let xv = lo + frac * span;
        let px = sx(xv);
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="black" stroke-width="1"/>"#,
            y0 + 4.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{px:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{xv:.3}</text>"#,
            y0 + 17.0
        );
        let fv = frac * y_max;
        let py = sy(fv);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="black" stroke-width="1"/>"#,
            x0 - 4.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{fv:.3}</text>"#,
            x0 - 7.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">Euclidean distance</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.2})">fraction of pairs</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    // Step curves.
    let bin_w = span / bins as f64;
    for (which, freq) in &curves {
        let mut d = format!("M{:.2},{:.2}", sx(lo), sy(0.0));
        for (b, &f) in freq.iter().enumerate() {
            let left = sx(lo + b as f64 * bin_w);
            let right = sx(lo + (b + 1) as f64 * bin_w);
            let py = sy(f);
            let _ = write!(d, " L{left:.2},{py:.2} L{right:.2},{py:.2}");
        }
        let _ = write!(d, " L{:.2},{:.2}", sx(hi.max(lo + span)), sy(0.0));
        let _ = writeln!(
            s,
            r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            color(*which)
        );
    }

    // Legend and errors.
    let lx = LEFT + plot_w - 150.0;
    for (row, which) in Subset::ALL.iter().enumerate() {
        let ly = TOP + 12.0 + row as f64 * 16.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"/>"#,
            lx + 18.0,
            color(*which)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{} ({})</text>"#,
            lx + 24.0,
            ly + 4.0,
            which.label(),
            report.subset(*which).distances.len()
        );
    }
    let ey = TOP + 12.0 + 4.0 * 16.0 + 8.0;
    let _ = writeln!(
        s,
        r#"<text x="{lx:.2}" y="{ey:.2}" font-family="sans-serif" font-size="11">Err (Rel vs Irr) = {:.4}</text>"#,
        report.err_rel_irr
    );
    let _ = writeln!(
        s,
        r#"<text x="{lx:.2}" y="{:.2}" font-family="sans-serif" font-size="11">Err (RFar vs INear) = {:.4}</text>"#,
        ey + 16.0,
        report.err_rfar_inear
    );
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn save_svg(report: &EvalReport, title: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_svg(report, title)?).map_err(|e| Error::io(path, e))
}
