use std::fmt::Write as _;

use super::{HarnessError, MethodSummary, ReplicationSummary};
use crate::domain::Method;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 56.0;
pub const MIN_REPLICATIONS: usize = 5;

/// Geometry of one box-and-whisker glyph, in data units.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxGlyph {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    /// Most extreme estimates within 1.5·IQR of the box.
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

impl BoxGlyph {
    pub fn new(summary: &MethodSummary) -> Self {
        let fence = 1.5 * summary.iqr();
        let (lo_fence, hi_fence) = (summary.q25 - fence, summary.q75 + fence);
        let mut sorted = summary.estimates.clone();
        sorted.sort_by(f64::total_cmp);
        let inside: Vec<f64> = sorted.iter().copied().filter(|v| (lo_fence..=hi_fence).contains(v)).collect();
        Self {
            q25: summary.q25,
            median: summary.median,
            q75: summary.q75,
            whisker_low: inside.first().copied().unwrap_or(summary.q25),
            whisker_high: inside.last().copied().unwrap_or(summary.q75),
            outliers: sorted.into_iter().filter(|v| !(lo_fence..=hi_fence).contains(v)).collect(),
        }
    }
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let magnitude = 10f64.powf(raw.log10().floor());
    let unit = raw / magnitude;
    let nice = if unit <= 1.0 {
        1.0
    } else if unit <= 2.0 {
        2.0
    } else if unit <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * magnitude
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Box plot of the per-method estimates with a dashed reference line at
/// the true effect. Output depends only on the summary.
pub fn render_boxplot_svg(summary: &ReplicationSummary) -> Result<String, HarnessError> {
    if summary.replications < MIN_REPLICATIONS {
        return Err(HarnessError::InsufficientReplications { needed: MIN_REPLICATIONS, got: summary.replications });
    }
    let glyphs: Vec<(Method, BoxGlyph)> =
        Method::ALL.iter().map(|&m| (m, BoxGlyph::new(summary.per_method.get(m)))).collect();

    let mut lo = summary.true_tau;
    let mut hi = summary.true_tau;
    for m in Method::ALL {
        let s = summary.per_method.get(m);
        lo = lo.min(s.min);
        hi = hi.max(s.max);
    }
    if hi - lo < 1e-9 {
        lo -= 1.0;
        hi += 1.0;
    }
    let step = nice_step(hi - lo);
    lo = (lo / step).floor() * step;
    hi = (hi / step).ceil() * step;

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let y = |v: f64| TOP + (hi - v) / (hi - lo) * plot_h;
    let slot = plot_w / Method::ALL.len() as f64;

    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{HEIGHT:.0}" viewBox="0 0 {WIDTH:.0} {HEIGHT:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect x="0" y="0" width="{WIDTH:.0}" height="{HEIGHT:.0}" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">Estimated ATE over {} replications (seed {})</text>"#,
        WIDTH / 2.0,
        summary.replications,
        summary.master_seed
    );

    // axes and ticks
    let _ =
        writeln!(w, r#"<line x1="{LEFT:.2}" y1="{TOP:.2}" x2="{LEFT:.2}" y2="{:.2}" stroke="black"/>"#, TOP + plot_h);
    let _ = writeln!(
        w,
        r#"<line x1="{LEFT:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h
    );
    let ticks = ((hi - lo) / step).round() as i64;
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    for i in 0..=ticks {
        let v = lo + i as f64 * step;
        let ty = y(v);
        let _ = writeln!(
            w,
            r#"<line x1="{:.2}" y1="{ty:.2}" x2="{LEFT:.2}" y2="{ty:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.decimals$}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            ty + 4.0
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">Estimated ATE</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Method</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );

    for (i, (method, g)) in glyphs.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let half = slot * 0.2;
        let _ = writeln!(w, r#"<g class="box" data-method="{}">"#, method.key());
        let _ = writeln!(
            w,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            y(g.whisker_high),
            y(g.q75)
        );
        let _ = writeln!(
            w,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            y(g.q25),
            y(g.whisker_low)
        );
        for v in [g.whisker_low, g.whisker_high] {
            let _ = writeln!(
                w,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
                cx - half / 2.0,
                y(v),
                cx + half / 2.0,
                y(v)
            );
        }
        let _ = writeln!(
            w,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#cfe0f1" stroke="black"/>"##,
            cx - half,
            y(g.q75),
            2.0 * half,
            y(g.q25) - y(g.q75)
        );
        let _ = writeln!(
            w,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
            cx - half,
            y(g.median),
            cx + half,
            y(g.median)
        );
        for v in &g.outliers {
            let _ = writeln!(w, r#"<circle cx="{cx:.2}" cy="{:.2}" r="2.5" fill="none" stroke="black"/>"#, y(*v));
        }
        let _ = writeln!(w, "</g>");
        let _ = writeln!(
            w,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h + 18.0,
            escape(method.label())
        );
    }

    let ref_y = y(summary.true_tau);
    let _ = writeln!(
        w,
        r#"<line class="reference" x1="{LEFT:.2}" y1="{ref_y:.2}" x2="{:.2}" y2="{ref_y:.2}" stroke="red" stroke-width="1.5" stroke-dasharray="6,4"/>"#,
        LEFT + plot_w
    );
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="end" fill="red">true ATE {:.2}</text>"#,
        LEFT + plot_w - 4.0,
        ref_y - 5.0,
        summary.true_tau
    );
    let _ = writeln!(w, "</svg>");
    Ok(svg)
}
