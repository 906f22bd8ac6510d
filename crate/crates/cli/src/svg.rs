//! Minimal hand-written SVG charts. The numbers behind every chart are also
//! written as CSV; these are for eyeballing only.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        w / 2.0,
        escape(title)
    );
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct Series<'a> {
    pub label: String,
    pub points: &'a [(f64, f64)],
}

/// ROC-style chart: unit square axes plus the chance diagonal.
pub fn roc_chart(title: &str, series: &[Series<'_>]) -> String {
    let mut s = String::new();
    open(&mut s, W, H, title);
    let (x0, y0, pw, ph) = (MARGIN, H - MARGIN, W - 2.0 * MARGIN - 120.0, H - 2.0 * MARGIN);
    let px = |x: f64| x0 + x * pw;
    let py = |y: f64| y0 - y * ph;
    let _ = writeln!(
        s,
        r##"<rect x="{x0}" y="{:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="#444"/>"##,
        y0 - ph
    );
    let _ = writeln!(
        s,
        r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#aaa" stroke-dasharray="4 4"/>"##,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    for t in 0..=5 {
        let v = f64::from(t) / 5.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{v:.1}</text>"#, px(v), y0 + 16.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"#, x0 - 6.0, py(v) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">false positive rate</text>"#, px(0.5), H - 20.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">true positive rate</text>"#,
        py(0.5),
        py(0.5)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        let ly = y0 - ph + 14.0 + 18.0 * i as f64;
        let lx = x0 + pw + 12.0;
        let _ = writeln!(s, r#"<rect x="{lx:.1}" y="{:.1}" width="12" height="4" fill="{color}"/>"#, ly - 4.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{ly:.1}">{}</text>"#, lx + 16.0, escape(&ser.label));
    }
    s.push_str("</svg>\n");
    s
}

/// Horizontal bars, drawn in the order given.
pub fn bar_chart(title: &str, bars: &[(String, f64)]) -> String {
    let row_h = 18.0;
    let label_w = 170.0;
    let h = 50.0 + row_h * bars.len() as f64 + 30.0;
    let mut s = String::new();
    open(&mut s, W, h, title);
    let max = bars.iter().map(|b| b.1.abs()).fold(0.0, f64::max);
    let scale = if max > 0.0 { (W - label_w - 90.0) / max } else { 0.0 };
    for (i, (name, v)) in bars.iter().enumerate() {
        let y = 44.0 + row_h * i as f64;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, label_w - 6.0, y + 12.0, escape(name));
        let _ = writeln!(
            s,
            r##"<rect x="{label_w}" y="{y:.1}" width="{:.2}" height="{:.1}" fill="#1f77b4"/>"##,
            v.abs() * scale,
            row_h - 4.0
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{v:.4}</text>"#, label_w + v.abs() * scale + 4.0, y + 12.0);
    }
    s.push_str("</svg>\n");
    s
}

fn diverging(v: f64) -> String {
    let v = v.clamp(-1.0, 1.0);
    let (r, g, b) = if v >= 0.0 {
        (255.0, 255.0 * (1.0 - v), 255.0 * (1.0 - v))
    } else {
        (255.0 * (1.0 + v), 255.0 * (1.0 + v), 255.0)
    };
    format!("rgb({},{},{})", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// Square matrix in [-1, 1]; NaN cells are grey.
pub fn heatmap(title: &str, names: &[String], value: impl Fn(usize, usize) -> f64) -> String {
    let n = names.len();
    let cell = (560.0 / n.max(1) as f64).clamp(6.0, 28.0);
    let label_w = 130.0;
    let side = label_w + cell * n as f64 + 20.0;
    let mut s = String::new();
    open(&mut s, side, side + 40.0, title);
    let top = 40.0 + label_w;
    for (i, name) in names.iter().enumerate() {
        let y = top + cell * i as f64;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="9">{}</text>"#, label_w - 4.0, y + cell * 0.7, escape(name));
        let x = label_w + cell * i as f64 + cell * 0.7;
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" font-size="9" transform="rotate(-90 {x:.1} {:.1})">{}</text>"#,
            top - 4.0,
            top - 4.0,
            escape(name)
        );
        for (j, other) in names.iter().enumerate() {
            let v = value(i, j);
            let (fill, shown) = if v.is_nan() {
                ("#ccc".to_string(), "n/a".to_string())
            } else {
                (diverging(v), format!("{v:.3}"))
            };
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{y:.1}" width="{cell:.1}" height="{cell:.1}" fill="{fill}"><title>{} / {}: {shown}</title></rect>"#,
                label_w + cell * j as f64,
                escape(name),
                escape(other)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// One row per feature; each record is a dot at its attribution, coloured by
/// its (row-normalised) feature value.
pub fn shap_strip(title: &str, rows: &[(String, Vec<(f64, f64)>)]) -> String {
    let row_h = 22.0;
    let label_w = 170.0;
    let h = 50.0 + row_h * rows.len() as f64 + 40.0;
    let mut s = String::new();
    open(&mut s, W, h, title);
    let max = rows
        .iter()
        .flat_map(|r| r.1.iter().map(|p| p.0.abs()))
        .fold(0.0, f64::max)
        .max(1e-12);
    let plot_w = W - label_w - 30.0;
    let cx = label_w + plot_w / 2.0;
    let _ = writeln!(
        s,
        r##"<line x1="{cx:.1}" y1="40" x2="{cx:.1}" y2="{:.1}" stroke="#aaa"/>"##,
        h - 30.0
    );
    for (i, (name, pts)) in rows.iter().enumerate() {
        let y = 52.0 + row_h * i as f64;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, label_w - 6.0, y + 4.0, escape(name));
        let (lo, hi) = pts
            .iter()
            .filter(|p| p.1.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
        for (k, &(phi, v)) in pts.iter().enumerate() {
            let t = if hi > lo && v.is_finite() { (v - lo) / (hi - lo) } else { 0.5 };
            let color = diverging(2.0 * t - 1.0);
            // deterministic jitter
            let jitter = ((k * 7919) % 11) as f64 - 5.0;
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}" stroke="#555" stroke-width="0.3"/>"##,
                cx + phi / max * plot_w / 2.0,
                y + jitter
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">attribution (max |value| {max:.4})</text>"#,
        h - 12.0
    );
    s.push_str("</svg>\n");
    s
}
