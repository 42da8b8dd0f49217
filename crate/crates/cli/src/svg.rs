//! Minimal fixed-size SVG plots: scatter, heatmap with class ribbons, ROC.

use std::fmt::Write;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 50.0;

/// Class colors running from red (first class) to blue (last).
pub fn class_color(class: usize, n_classes: usize) -> String {
    let hue = if n_classes <= 1 {
        0.0
    } else {
        240.0 * class as f64 / (n_classes - 1) as f64
    };
    let (r, g, b) = hsl_to_rgb(hue, 0.75, 0.5);
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn hsl_to_rgb(h: f64, s: f64, l: f64) -> (u8, u8, u8) {
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    let to = |v: f64| ((v + m) * 255.0).round() as u8;
    (to(r), to(g), to(b))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{:.1}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    )
    .unwrap();
    s
}

fn legend(s: &mut String, names: &[String]) {
    for (c, name) in names.iter().enumerate() {
        let y = MARGIN + 16.0 * c as f64;
        writeln!(
            s,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11">{}</text>"#,
            WIDTH - 110.0,
            y,
            class_color(c, names.len()),
            WIDTH - 95.0,
            y + 9.0,
            escape(name)
        )
        .unwrap();
    }
}

fn axes(s: &mut String, plot_right: f64) {
    let bottom = HEIGHT - MARGIN;
    writeln!(
        s,
        r#"<path d="M{MARGIN:.1},{MARGIN:.1} L{MARGIN:.1},{bottom:.1} L{plot_right:.1},{bottom:.1}" fill="none" stroke="black"/>"#
    )
    .unwrap();
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() || hi - lo < 1e-12 {
        (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0)
    } else {
        (lo, hi)
    }
}

/// Scatter of `(x, y)` points colored by class.
pub fn scatter(title: &str, points: &[(f64, f64)], labels: &[usize], names: &[String]) -> String {
    let mut s = open(title);
    let right = WIDTH - 130.0;
    axes(&mut s, right);
    let (x0, x1) = span(points.iter().map(|p| p.0));
    let (y0, y1) = span(points.iter().map(|p| p.1));
    let sx = |x: f64| MARGIN + 10.0 + (x - x0) / (x1 - x0) * (right - MARGIN - 20.0);
    let sy = |y: f64| HEIGHT - MARGIN - 10.0 - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN - 20.0);
    for (&(x, y), &l) in points.iter().zip(labels) {
        writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
            sx(x),
            sy(y),
            class_color(l, names.len())
        )
        .unwrap();
    }
    legend(&mut s, names);
    s.push_str("</svg>\n");
    s
}

/// Square heatmap of an `n`×`n` matrix (darker = smaller) with class
/// ribbons along the top and left edges.
pub fn heatmap(title: &str, n: usize, values: &[f64], ribbon: &[usize], names: &[String]) -> String {
    let mut s = open(title);
    let ribbon_w = 12.0;
    let side = HEIGHT - 2.0 * MARGIN - ribbon_w;
    let cell = side / n.max(1) as f64;
    let left = MARGIN + ribbon_w;
    let top = MARGIN + ribbon_w;
    let (lo, hi) = span(values.iter().copied());
    for i in 0..n {
        for j in 0..n {
            let t = (values[i * n + j] - lo) / (hi - lo);
            let g = (t * 255.0).round().clamp(0.0, 255.0) as u8;
            writeln!(
                s,
                r##"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="#{g:02x}{g:02x}{g:02x}"/>"##,
                left + j as f64 * cell,
                top + i as f64 * cell,
                cell,
                cell
            )
            .unwrap();
        }
    }
    for (k, &c) in ribbon.iter().enumerate() {
        let color = class_color(c, names.len());
        let offset = k as f64 * cell;
        writeln!(
            s,
            r#"<rect x="{:.3}" y="{MARGIN:.3}" width="{cell:.3}" height="{ribbon_w:.3}" fill="{color}"/><rect x="{MARGIN:.3}" y="{:.3}" width="{ribbon_w:.3}" height="{cell:.3}" fill="{color}"/>"#,
            left + offset,
            top + offset,
        )
        .unwrap();
    }
    legend(&mut s, names);
    s.push_str("</svg>\n");
    s
}

/// ROC curves in the unit square with the chance diagonal.
pub fn roc(title: &str, curves: &[Vec<(f64, f64)>], names: &[String]) -> String {
    let mut s = open(title);
    let right = WIDTH - 130.0;
    axes(&mut s, right);
    let w = right - MARGIN;
    let h = HEIGHT - 2.0 * MARGIN;
    let px = |x: f64| MARGIN + x * w;
    let py = |y: f64| HEIGHT - MARGIN - y * h;
    writeln!(
        s,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999999" stroke-dasharray="4 4"/>"##,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    )
    .unwrap();
    for (c, curve) in curves.iter().enumerate() {
        let pts: Vec<String> = curve.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            pts.join(" "),
            class_color(c, names.len())
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">false positive rate</text>"#,
        MARGIN + w / 2.0,
        HEIGHT - 15.0
    )
    .unwrap();
    legend(&mut s, names);
    s.push_str("</svg>\n");
    s
}
