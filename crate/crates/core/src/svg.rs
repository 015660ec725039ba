//! Standalone dual-axis SVG chart of a sweep: QBER on a linear left axis,
//! distillation-stage rates on a logarithmic right axis.

use std::fmt::Write as _;

use crate::sweep::SweepRecord;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 720.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 530.0;

const SERIES: [(&str, &str); 4] = [("raw", "#1f77b4"), ("sifted", "#2ca02c"), ("ec corrected", "#9467bd"), ("secret", "#d62728")];

fn rate_of(r: &SweepRecord, i: usize) -> f64 {
    [r.raw_bps, r.sifted_bps, r.ec_corrected_bps, r.secret_bps][i]
}

pub fn render_svg(records: &[SweepRecord], title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="30" text-anchor="middle" font-size="16">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#, RIGHT - LEFT, BOTTOM - TOP);

    if records.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let x_min = records.first().map_or(0.0, |r| r.length_km);
    let x_max = records.last().map_or(1.0, |r| r.length_km).max(x_min + 1e-9);
    let q_max = records.iter().map(|r| r.qber).fold(0.0, f64::max).max(0.01) * 1.1;
    let positive = records.iter().flat_map(|r| (0..4).map(move |i| rate_of(r, i))).filter(|v| *v > 0.0);
    let lo = positive.clone().fold(f64::INFINITY, f64::min);
    let hi = positive.fold(0.0, f64::max);
    let (d_lo, d_hi) = if hi > 0.0 { (lo.log10().floor(), hi.log10().ceil().max(lo.log10().floor() + 1.0)) } else { (0.0, 1.0) };

    let px = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * (RIGHT - LEFT);
    let py_q = |q: f64| BOTTOM - q / q_max * (BOTTOM - TOP);
    let py_r = |r: f64| BOTTOM - (r.log10() - d_lo) / (d_hi - d_lo) * (BOTTOM - TOP);

    for k in 0..=5 {
        let x = x_min + (x_max - x_min) * k as f64 / 5.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{:.1}</text>"#, px(x), BOTTOM + 18.0, x);
        let q = q_max * k as f64 / 5.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{:.1}%</text>"#, LEFT - 6.0, py_q(q) + 4.0, q * 100.0);
    }
    for d in (d_lo as i32)..=(d_hi as i32) {
        let y = py_r(10f64.powi(d));
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.1}" x2="{RIGHT}" y2="{y:.1}" stroke="#ddd"/>"##);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}">1e{d}</text>"#, RIGHT + 6.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">fiber length (km)</text>"#, (LEFT + RIGHT) / 2.0, BOTTOM + 40.0);
    let _ = writeln!(s, r#"<text transform="translate(25,{}) rotate(-90)" text-anchor="middle">QBER</text>"#, (TOP + BOTTOM) / 2.0);
    let _ = writeln!(s, r#"<text transform="translate(780,{}) rotate(90)" text-anchor="middle">key rate (bit/s)</text>"#, (TOP + BOTTOM) / 2.0);

    let qber: Vec<String> = records.iter().map(|r| format!("{:.1},{:.1}", px(r.length_km), py_q(r.qber))).collect();
    let _ = writeln!(s, r#"<polyline fill="none" stroke="black" stroke-dasharray="6,3" stroke-width="2" points="{}"/>"#, qber.join(" "));
    for (i, (name, color)) in SERIES.iter().enumerate() {
        let pts: Vec<String> = records
            .iter()
            .filter(|r| rate_of(r, i) > 0.0)
            .map(|r| format!("{:.1},{:.1}", px(r.length_km), py_r(rate_of(r, i))))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        }
        let ly = TOP + 15.0 + 16.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, RIGHT - 130.0, RIGHT - 110.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{name}</text>"#, RIGHT - 105.0, ly + 4.0);
    }
    let ly = TOP + 15.0 + 16.0 * 4.0;
    let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="black" stroke-dasharray="6,3" stroke-width="2"/>"#, RIGHT - 130.0, RIGHT - 110.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}">QBER</text>"#, RIGHT - 105.0, ly + 4.0);
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
