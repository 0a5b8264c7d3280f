//! Plain SVG plots with deterministic geometry.

use std::fmt::Write;

use super::table::{format_delta, format_mean_std, format_percent, TableGroup};
use super::AnalysisSection;
use crate::analysis::CategoryDelta;

const WIDTH_PER_GROUP: f64 = 120.0;
const PLOT_HEIGHT: f64 = 300.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_BOTTOM: f64 = 110.0;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(width: f64, height: f64, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    s
}

fn text(s: &mut String, x: f64, y: f64, anchor: &str, class: &str, content: &str) {
    let _ = writeln!(s, r#"<text class="{class}" x="{x:.1}" y="{y:.1}" text-anchor="{anchor}">{}</text>"#, escape(content));
}

fn no_data(title: &str) -> String {
    let mut s = open(400.0, 120.0, title);
    text(&mut s, 200.0, 70.0, "middle", "empty", "no data");
    s.push_str("</svg>\n");
    s
}

/// Upper end of the value axis: the next tenth above the largest value.
fn axis_max(max: f64) -> f64 {
    ((max * 10.0).floor() + 1.0) / 10.0
}

/// Box-and-whisker plot per group: whiskers at min and max, box from the
/// first to the third quartile, a line at the median and a dot at the mean.
/// Each box is labelled with its `mean% ± std` value.
pub fn distribution_plot(title: &str, groups: &[TableGroup]) -> String {
    let boxes: Vec<(&TableGroup, _)> = groups.iter().filter_map(|g| g.summary().map(|s| (g, s))).collect();
    if boxes.is_empty() {
        return no_data(title);
    }
    let top = axis_max(boxes.iter().map(|(_, s)| s.max).fold(0.0, f64::max));
    let width = MARGIN_LEFT + WIDTH_PER_GROUP * boxes.len() as f64 + 20.0;
    let height = MARGIN_TOP + PLOT_HEIGHT + MARGIN_BOTTOM;
    let y = |v: f64| MARGIN_TOP + PLOT_HEIGHT * (1.0 - v / top);

    let mut s = open(width, height, title);
    let ticks = (top * 10.0).round() as usize;
    for i in 0..=ticks {
        let v = i as f64 / 10.0;
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN_LEFT:.1}" y1="{0:.1}" x2="{1:.1}" y2="{0:.1}" stroke="#ddd"/>"##,
            y(v),
            width - 20.0
        );
        text(&mut s, MARGIN_LEFT - 6.0, y(v) + 4.0, "end", "tick", &format_percent(v));
    }
    for (i, (g, st)) in boxes.iter().enumerate() {
        let cx = MARGIN_LEFT + WIDTH_PER_GROUP * (i as f64 + 0.5);
        let half = WIDTH_PER_GROUP * 0.25;
        let _ = writeln!(s, r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#, y(st.max), y(st.min));
        for v in [st.min, st.max] {
            let _ = writeln!(
                s,
                r#"<line x1="{0:.1}" y1="{1:.1}" x2="{2:.1}" y2="{1:.1}" stroke="black"/>"#,
                cx - half / 2.0,
                y(v),
                cx + half / 2.0
            );
        }
        let _ = writeln!(
            s,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#9ecae1" stroke="black"/>"##,
            cx - half,
            y(st.q3),
            2.0 * half,
            (y(st.q1) - y(st.q3)).max(0.5)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{0:.1}" y1="{1:.1}" x2="{2:.1}" y2="{1:.1}" stroke="black" stroke-width="2"/>"#,
            cx - half,
            y(st.median),
            cx + half
        );
        let _ = writeln!(s, r##"<circle cx="{cx:.1}" cy="{:.1}" r="3" fill="#d62728"/>"##, y(st.mean));
        text(&mut s, cx, y(st.max) - 8.0, "middle", "value", &format_mean_std(st.mean, st.std_dev));
        let base = MARGIN_TOP + PLOT_HEIGHT;
        text(&mut s, cx, base + 18.0, "middle", "label", &g.stt);
        text(&mut s, cx, base + 32.0, "middle", "label", g.method.label());
        text(&mut s, cx, base + 46.0, "middle", "label", g.llm.as_deref().unwrap_or(super::table::NO_LLM));
        text(&mut s, cx, base + 60.0, "middle", "label", &format!("n={}", st.n));
    }
    s.push_str("</svg>\n");
    s
}

/// Vertical bars around a zero line; negative bars (fewer errors after
/// correction) point down.
pub fn signed_bars(title: &str, deltas: &[CategoryDelta]) -> String {
    if deltas.is_empty() {
        return no_data(title);
    }
    let extent = deltas.iter().map(|d| d.delta.unsigned_abs()).max().unwrap_or(0).max(1) as f64;
    let width = MARGIN_LEFT + WIDTH_PER_GROUP * deltas.len() as f64 + 20.0;
    let height = MARGIN_TOP + PLOT_HEIGHT + MARGIN_BOTTOM;
    let zero = MARGIN_TOP + PLOT_HEIGHT / 2.0;
    let scale = (PLOT_HEIGHT / 2.0 - 20.0) / extent;

    let mut s = open(width, height, title);
    let _ = writeln!(s, r#"<line x1="{MARGIN_LEFT:.1}" y1="{zero:.1}" x2="{:.1}" y2="{zero:.1}" stroke="black"/>"#, width - 20.0);
    for (i, d) in deltas.iter().enumerate() {
        let cx = MARGIN_LEFT + WIDTH_PER_GROUP * (i as f64 + 0.5);
        let h = d.delta.unsigned_abs() as f64 * scale;
        let (top, fill) = if d.delta > 0 { (zero - h, "#d62728") } else { (zero, "#2ca02c") };
        let _ = writeln!(
            s,
            r#"<rect x="{:.1}" y="{top:.1}" width="{:.1}" height="{h:.1}" fill="{fill}"/>"#,
            cx - WIDTH_PER_GROUP * 0.3,
            WIDTH_PER_GROUP * 0.6
        );
        let label_y = if d.delta > 0 { top - 6.0 } else { zero + h + 14.0 };
        text(&mut s, cx, label_y, "middle", "value", &format_delta(d.delta));
        let base = MARGIN_TOP + PLOT_HEIGHT;
        text(&mut s, cx, base + 18.0, "middle", "label", d.category.label());
        text(&mut s, cx, base + 32.0, "middle", "label", d.kind.label());
    }
    s.push_str("</svg>\n");
    s
}

/// Per system: substitutions before correction, those with a small character
/// difference, and how many of those the correction fixed.
pub fn char_diff_bars(sections: &[AnalysisSection]) -> String {
    let title = "Concept substitutions by character difference";
    if sections.is_empty() {
        return no_data(title);
    }
    let series = ["all substitutions", "low difference", "low difference, corrected"];
    let colors = ["#9e9e9e", "#1f77b4", "#2ca02c"];
    let max = sections.iter().map(|s| s.char_diff.total).max().unwrap_or(0).max(1) as f64;
    let width = MARGIN_LEFT + WIDTH_PER_GROUP * 1.5 * sections.len() as f64 + 20.0;
    let height = MARGIN_TOP + PLOT_HEIGHT + MARGIN_BOTTOM;
    let base = MARGIN_TOP + PLOT_HEIGHT;
    let scale = (PLOT_HEIGHT - 20.0) / max;

    let mut s = open(width, height, title);
    for (k, (name, color)) in series.iter().zip(colors).enumerate() {
        let ly = 40.0 + 14.0 * k as f64;
        let _ = writeln!(s, r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{color}"/>"#, width - 200.0, ly - 9.0);
        text(&mut s, width - 185.0, ly, "start", "legend", name);
    }
    let _ = writeln!(s, r#"<line x1="{MARGIN_LEFT:.1}" y1="{base:.1}" x2="{:.1}" y2="{base:.1}" stroke="black"/>"#, width - 20.0);
    let bar = WIDTH_PER_GROUP * 1.5 / 4.0;
    for (i, section) in sections.iter().enumerate() {
        let c = &section.char_diff;
        let x0 = MARGIN_LEFT + WIDTH_PER_GROUP * 1.5 * i as f64 + bar / 2.0;
        for (k, v) in [c.total, c.low_diff, c.low_diff_resolved].into_iter().enumerate() {
            let h = v as f64 * scale;
            let x = x0 + bar * k as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="{}"/>"#,
                base - h,
                bar * 0.9,
                colors[k]
            );
            text(&mut s, x + bar * 0.45, base - h - 4.0, "middle", "value", &v.to_string());
        }
        let cx = x0 + bar * 1.5;
        text(&mut s, cx, base + 18.0, "middle", "label", &section.system);
        text(&mut s, cx, base + 32.0, "middle", "label", &section.llm);
    }
    s.push_str("</svg>\n");
    s
}
