//! Dependency-free SVG line and bar charts.

use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 360.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Bars for one category; `values` holds `(mean, std)` per group.
pub struct BarGroup {
    pub category: String,
    pub values: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, title: &str, x_range: (f64, f64), y_range: (f64, f64)) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" data-x-min="{}" data-x-max="{}" data-y-min="{}" data-y-max="{}">"#,
        x_range.0, x_range.1, y_range.0, y_range.1
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, xlabel: &str, ylabel: &str, x_ticks: &[(f64, String)], y_ticks: &[(f64, String)]) {
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    let _ = writeln!(out, r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" stroke="black" fill="none"/>"#);
    for (px, label) in x_ticks {
        let _ = writeln!(
            out,
            r#"<text x="{px:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            y0 + 16.0,
            escape(label)
        );
    }
    for (py, label) in y_ticks {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            py + 4.0,
            escape(label)
        );
        let _ = writeln!(out, r##"<line x1="{x0}" y1="{py:.1}" x2="{x1}" y2="{py:.1}" stroke="#ddd"/>"##);
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 10.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(16,{:.1}) rotate(-90)" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn legend(out: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let y = TOP + 14.0 + 18.0 * i as f64;
        let x = W - RIGHT + 12.0;
        let _ = writeln!(
            out,
            r#"<rect x="{x}" y="{:.1}" width="12" height="12" fill="{}"/><text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11">{}</text>"#,
            y - 10.0,
            PALETTE[i % PALETTE.len()],
            x + 18.0,
            y,
            escape(name)
        );
    }
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn ticks(lo: f64, hi: f64, n: usize, to_px: impl Fn(f64) -> f64) -> Vec<(f64, String)> {
    (0..=n)
        .map(|i| {
            let v = lo + (hi - lo) * i as f64 / n as f64;
            (to_px(v), format!("{v:.3}").trim_end_matches('0').trim_end_matches('.').to_string())
        })
        .collect()
}

/// Line chart. When `x_range` is given the horizontal axis spans exactly
/// that interval; otherwise it spans the data.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], x_range: Option<(f64, f64)>) -> String {
    let all = series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut xl, mut xh, mut yl, mut yh) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        xl = xl.min(x);
        xh = xh.max(x);
        yl = yl.min(y);
        yh = yh.max(y);
    }
    let (xl, xh) = x_range.unwrap_or_else(|| span(xl, xh));
    let (yl, yh) = span(yl.min(0.0), yh);
    let px = |x: f64| LEFT + (x - xl) / (xh - xl) * (W - LEFT - RIGHT);
    let py = |y: f64| H - BOTTOM - (y - yl) / (yh - yl) * (H - TOP - BOTTOM);

    let mut out = String::new();
    header(&mut out, title, (xl, xh), (yl, yh));
    axes(&mut out, xlabel, ylabel, &ticks(xl, xh, 5, px), &ticks(yl, yh, 4, py));
    for (i, s) in series.iter().enumerate() {
        let mut d = String::new();
        for &(x, y) in s.points.iter().filter(|p| p.1.is_finite()) {
            let _ = write!(d, "{}{:.2},{:.2}", if d.is_empty() { "M" } else { " L" }, px(x), py(y));
        }
        let _ = writeln!(
            out,
            r#"<path d="{d}" stroke="{}" stroke-width="1.5" fill="none"/>"#,
            PALETTE[i % PALETTE.len()]
        );
    }
    legend(&mut out, &series.iter().map(|s| s.name.as_str()).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

/// Grouped bar chart with ±std whiskers.
pub fn bar_chart(title: &str, ylabel: &str, group_names: &[&str], groups: &[BarGroup]) -> String {
    let yh = groups
        .iter()
        .flat_map(|g| g.values.iter())
        .map(|(m, s)| m + if s.is_finite() { *s } else { 0.0 })
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    let (yl, yh) = span(0.0, if yh > 0.0 { yh * 1.1 } else { 1.0 });
    let py = |y: f64| H - BOTTOM - (y - yl) / (yh - yl) * (H - TOP - BOTTOM);
    let slot = (W - LEFT - RIGHT) / groups.len().max(1) as f64;
    let bar = slot * 0.8 / group_names.len().max(1) as f64;

    let mut out = String::new();
    header(&mut out, title, (0.0, groups.len() as f64), (yl, yh));
    let x_ticks: Vec<(f64, String)> = groups
        .iter()
        .enumerate()
        .map(|(i, g)| (LEFT + slot * (i as f64 + 0.5), g.category.clone()))
        .collect();
    axes(&mut out, "", ylabel, &x_ticks, &ticks(yl, yh, 4, py));
    for (i, g) in groups.iter().enumerate() {
        for (j, &(mean, std)) in g.values.iter().enumerate() {
            if !mean.is_finite() {
                continue;
            }
            let x = LEFT + slot * i as f64 + slot * 0.1 + bar * j as f64;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                py(mean),
                bar * 0.9,
                (py(0.0) - py(mean)).max(0.0),
                PALETTE[j % PALETTE.len()]
            );
            if std.is_finite() && std > 0.0 {
                let cx = x + bar * 0.45;
                let _ = writeln!(
                    out,
                    r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
                    py(mean + std),
                    py((mean - std).max(yl))
                );
            }
        }
    }
    legend(&mut out, group_names);
    out.push_str("</svg>\n");
    out
}
