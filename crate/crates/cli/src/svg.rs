//! Heat maps of `log10 tau` over a grid as plain SVG rectangles.

use std::fmt::Write as _;

use specrkhs::c64;

const WIDTH: f64 = 640.0;

/// Anchor colours of the ramp; the 256 levels interpolate linearly.
const ANCHORS: [(f64, [f64; 3]); 5] = [
    (0.0, [68.0, 1.0, 84.0]),
    (0.25, [59.0, 82.0, 139.0]),
    (0.5, [33.0, 145.0, 140.0]),
    (0.75, [94.0, 201.0, 98.0]),
    (1.0, [253.0, 231.0, 37.0]),
];

pub fn ramp() -> Vec<[u8; 3]> {
    (0..256)
        .map(|k| {
            let t = k as f64 / 255.0;
            let i = ANCHORS.iter().rposition(|a| a.0 <= t).unwrap().min(ANCHORS.len() - 2);
            let (t0, c0) = ANCHORS[i];
            let (t1, c1) = ANCHORS[i + 1];
            let s = (t - t0) / (t1 - t0);
            let ch = |j: usize| (c0[j] + s * (c1[j] - c0[j])).round() as u8;
            [ch(0), ch(1), ch(2)]
        })
        .collect()
}

/// One rectangle per grid point, coloured by `log10 tau` on a fixed ramp;
/// flagged points get a white outline. Non-finite values are grey.
pub fn heat_map(points: &[c64], tau: &[f64], flagged: &[usize], cell: (f64, f64), title: &str) -> String {
    let colours = ramp();
    let (dx, dy) = cell;
    let fold = |f: fn(&c64) -> f64, init: f64, pick: fn(f64, f64) -> f64| points.iter().map(f).fold(init, pick);
    let (x0, x1) = (fold(|z| z.re, f64::INFINITY, f64::min) - dx / 2.0, fold(|z| z.re, f64::NEG_INFINITY, f64::max) + dx / 2.0);
    let (y0, y1) = (fold(|z| z.im, f64::INFINITY, f64::min) - dy / 2.0, fold(|z| z.im, f64::NEG_INFINITY, f64::max) + dy / 2.0);
    let scale = WIDTH / (x1 - x0).max(f64::MIN_POSITIVE);
    let height = ((y1 - y0) * scale).max(1.0);
    let logs: Vec<f64> = tau.iter().map(|t| if t.is_nan() { f64::NAN } else { t.max(1e-300).log10() }).collect();
    let finite = logs.iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{:.0}" viewBox="0 0 {WIDTH} {height:.3}">"#,
        height.ceil()
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(out, "<desc>log10 tau from {lo:.4} to {hi:.4}</desc>");
    let mut is_flagged = vec![false; points.len()];
    flagged.iter().for_each(|&i| is_flagged[i] = true);
    for (i, z) in points.iter().enumerate() {
        let fill = if logs[i].is_finite() {
            let level = (((logs[i] - lo) / span) * 255.0).round().clamp(0.0, 255.0) as usize;
            let [r, g, b] = colours[level];
            format!("#{r:02x}{g:02x}{b:02x}")
        } else {
            "#808080".to_string()
        };
        let px = (z.re - dx / 2.0 - x0) * scale;
        let py = (y1 - z.im - dy / 2.0) * scale;
        let stroke = if is_flagged[i] { r##" stroke="#ffffff" stroke-width="0.5""## } else { "" };
        let _ = writeln!(
            out,
            r#"<rect x="{px:.3}" y="{py:.3}" width="{:.3}" height="{:.3}" fill="{fill}"{stroke}/>"#,
            dx * scale,
            dy * scale
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
