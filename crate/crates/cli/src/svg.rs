//! Static SVG snapshots of frameworks.
//!
//! Edges are drawn in red when stretched beyond their target, blue when
//! compressed, grey when on target; when a partition is given, each part is
//! underlaid with its own hue.

use std::fmt::Write;

use formctl_core::control::FormationSystem;
use formctl_core::geometry::Configuration;
use formctl_core::partition::IndependentPartition;

const PANEL: f64 = 240.0;
const MARGIN: f64 = 24.0;
const ON_TARGET_RTOL: f64 = 1e-6;

pub struct Panel<'a> {
    pub title: String,
    pub config: &'a Configuration,
    pub partition: Option<&'a IndependentPartition>,
}

fn edge_color(d: f64, target: f64) -> &'static str {
    if (d - target).abs() <= ON_TARGET_RTOL * target {
        "#808080"
    } else if d > target {
        "#d62728"
    } else {
        "#1f77b4"
    }
}

fn hue(i: usize, m: usize) -> String {
    format!("hsl({}, 70%, 60%)", (360 * i / m.max(1)) % 360)
}

/// Panels side by side, each scaled independently to fit its box.
pub fn render(sys: &FormationSystem, panels: &[Panel]) -> String {
    let g = sys.graph();
    let cols = panels.len().clamp(1, 4);
    let rows = panels.len().div_ceil(cols).max(1);
    let (w, h) = (cols as f64 * PANEL, rows as f64 * (PANEL + 16.0));
    let mut s = String::new();
    writeln!(s, "<!-- formctl {} -->", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for (k, panel) in panels.iter().enumerate() {
        let (ox, oy) = ((k % cols) as f64 * PANEL, (k / cols) as f64 * (PANEL + 16.0));
        let pts = &panel.config.points;
        let (mut lo, mut hi) = (pts[0], pts[0]);
        for x in pts {
            lo = lo.inf(x);
            hi = hi.sup(x);
        }
        let span = (hi - lo).max().max(1e-12);
        let scale = (PANEL - 2.0 * MARGIN) / span;
        let centre = (lo + hi) * 0.5;
        // SVG y grows downwards.
        let map = |v: usize| {
            let x = panel.config.at(g, v);
            (ox + PANEL / 2.0 + (x.x - centre.x) * scale, oy + 16.0 + PANEL / 2.0 - (x.y - centre.y) * scale)
        };
        writeln!(s, r#"<g><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{}</text>"#, ox + 6.0, oy + 13.0, panel.title)
            .unwrap();
        let lengths = sys.edge_lengths(panel.config).unwrap_or_else(|_| vec![0.0; g.edges().len()]);
        for (idx, e) in g.edges().iter().enumerate() {
            let ((x1, y1), (x2, y2)) = (map(e.lo), map(e.hi));
            if let Some(part) = panel.partition {
                let i = part.part_of(*e).unwrap_or(0);
                writeln!(
                    s,
                    r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{}" stroke-width="9" stroke-opacity="0.45" stroke-linecap="round"/>"#,
                    hue(i, part.len())
                )
                .unwrap();
            }
            writeln!(
                s,
                r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{}" stroke-width="2"/>"#,
                edge_color(lengths[idx], sys.targets()[idx])
            )
            .unwrap();
        }
        for &v in g.vertices() {
            let (x, y) = map(v);
            writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="5" fill="black"/>"#).unwrap();
            writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{v}</text>"#, x + 6.0, y - 6.0)
                .unwrap();
        }
        writeln!(s, "</g>").unwrap();
    }
    writeln!(s, "</svg>").unwrap();
    s
}
