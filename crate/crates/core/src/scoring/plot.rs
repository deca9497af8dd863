use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scoring::{AnomalySegment, RegularityCurve};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 260.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 44.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Standalone SVG of the regularity curve with shaded anomaly segments.
pub fn render_plot(curve: &RegularityCurve, segments: &[AnomalySegment]) -> String {
    let n = curve.len();
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let step = if n > 1 { pw / (n - 1) as f64 } else { 0.0 };
    let x_of = |t: f64| if n > 1 { LEFT + t * step } else { LEFT + pw / 2.0 };
    let y_of = |s: f64| TOP + (1.0 - s.clamp(0.0, 1.0)) * ph;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="18" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(&curve.video_id)
    );

    for seg in segments {
        let x0 = x_of(seg.start as f64 - 0.5).max(LEFT);
        let x1 = x_of(seg.end as f64 + 0.5).min(LEFT + pw);
        let _ = writeln!(
            svg,
            r##"<rect class="anomaly" x="{x0:.2}" y="{TOP:.2}" width="{:.2}" height="{ph:.2}" fill="#e4572e" fill-opacity="0.25"/>"##,
            (x1 - x0).max(1.0)
        );
    }
    if let Some(seg) = segments.first() {
        let y = y_of(seg.threshold);
        let _ = writeln!(
            svg,
            r##"<line class="threshold" x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e4572e" stroke-dasharray="4 3"/>"##,
            LEFT + pw
        );
    }

    // axes
    let _ = writeln!(
        svg,
        r#"<path d="M{LEFT:.2} {TOP:.2} V{:.2} H{:.2}" fill="none" stroke="black"/>"#,
        TOP + ph,
        LEFT + pw
    );
    for s in [0.0, 0.5, 1.0] {
        let y = y_of(s);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{s:.1}</text>"#,
            LEFT - 6.0,
            y + 3.0
        );
    }
    let last = n.saturating_sub(1);
    for t in [0, last] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">{t}</text>"#,
            x_of(t as f64),
            TOP + ph + 14.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">frame</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 8.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.2})">regularity score</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    let points: Vec<String> = curve
        .scores
        .iter()
        .enumerate()
        .map(|(t, &s)| format!("{:.2},{:.2}", x_of(t as f64), y_of(s)))
        .collect();
    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##,
        points.join(" ")
    );
    svg.push_str("</svg>\n");
    svg
}

pub fn write_plot(curve: &RegularityCurve, segments: &[AnomalySegment], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_plot(curve, segments)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::detect_anomalies;

    fn vertices(svg: &str) -> usize {
        let start = svg.find("<polyline points=\"").unwrap() + 18;
        let end = start + svg[start..].find('"').unwrap();
        svg[start..end].split(' ').count()
    }

    #[test]
    fn structure() {
        let e: Vec<f64> = (0..100)
            .map(|t| {
                if (40..45).contains(&t) {
                    5.0
                } else {
                    1.0 + (t % 3) as f64 * 0.1
                }
            })
            .collect();
        let curve = RegularityCurve::from_errors("a<b", e).unwrap();
        let segs = detect_anomalies(&curve.scores, 0.5).unwrap();
        let svg = render_plot(&curve, &segs);
        assert_eq!(vertices(&svg), 100);
        assert_eq!(svg.matches("class=\"anomaly\"").count(), 1);
        assert!(svg.contains(">frame<") && svg.contains(">regularity score<"));
        assert!(svg.contains("a&lt;b"));
        let none = render_plot(&curve, &[]);
        assert!(!none.contains("class=\"anomaly\""));
        assert_eq!(svg, render_plot(&curve, &segs));
    }
}
