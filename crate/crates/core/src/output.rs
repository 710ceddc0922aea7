//! Serialization of sweep results: CSV, binary PPM and SVG.

use std::fmt::Write as _;

use crate::sweep::{HeatmapGrid, SignMap};

/// A grid of values ready for writing, either signs or reals.
#[derive(Debug, Clone, Copy)]
pub enum Plane<'a> {
    Signs(&'a SignMap),
    Values(&'a HeatmapGrid),
}

impl Plane<'_> {
    fn axes(&self) -> (&[f64], &[f64]) {
        match self {
            Plane::Signs(s) => (&s.x, &s.y),
            Plane::Values(h) => (&h.x, &h.y),
        }
    }

    fn axis_names(&self) -> (&str, &str) {
        let spec = match self {
            Plane::Signs(s) => &s.spec,
            Plane::Values(h) => &h.spec,
        };
        (&spec.x_axis.name, &spec.y_axis.name)
    }

    fn value(&self, i: usize) -> f64 {
        match self {
            Plane::Signs(s) => s.cells[i] as f64,
            Plane::Values(h) => h.cells[i],
        }
    }
}

/// 17 significant digits; parses back to the same bits.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Header `x,y,value`, rows ordered by y then x, LF endings.
pub fn to_csv(plane: Plane<'_>) -> String {
    let (xs, ys) = plane.axes();
    let mut out = String::with_capacity(64 * xs.len() * ys.len() + 16);
    out.push_str("x,y,value\n");
    for (iy, y) in ys.iter().enumerate() {
        for (ix, x) in xs.iter().enumerate() {
            let v = plane.value(iy * xs.len() + ix);
            let _ = writeln!(out, "{},{},{}", format_number(*x), format_number(*y), format_number(v));
        }
    }
    out
}

const NAN_GRAY: [u8; 3] = [128, 128, 128];

// Anchor colours of a perceptually ordered dark-blue → green → yellow ramp.
const RAMP: [[u8; 3]; 5] = [
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
];

fn sign_color(s: i8) -> [u8; 3] {
    match s.signum() {
        -1 => [0, 0, 255],
        0 => [255, 255, 255],
        _ => [255, 0, 0],
    }
}

/// Colour for `t` in [0, 1] on the sequential ramp.
pub fn ramp_color(t: f64) -> [u8; 3] {
    if t.is_nan() {
        return NAN_GRAY;
    }
    let t = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (t.floor() as usize).min(RAMP.len() - 2);
    let f = t - i as f64;
    let mut c = [0u8; 3];
    for k in 0..3 {
        let a = RAMP[i][k] as f64;
        let b = RAMP[i + 1][k] as f64;
        c[k] = (a + (b - a) * f).round() as u8;
    }
    c
}

fn cell_colors(plane: Plane<'_>) -> Vec<[u8; 3]> {
    match plane {
        Plane::Signs(s) => s
            .cells
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                if s.nan_cells.binary_search(&i).is_ok() {
                    NAN_GRAY
                } else {
                    sign_color(c)
                }
            })
            .collect(),
        Plane::Values(h) => {
            let span = h.max - h.min;
            h.cells
                .iter()
                .map(|&v| {
                    if !v.is_finite() {
                        NAN_GRAY
                    } else if span > 0.0 {
                        ramp_color((v - h.min) / span)
                    } else {
                        ramp_color(0.5)
                    }
                })
                .collect()
        }
    }
}

/// Binary P6 image, `scale` pixels per cell, y increasing upwards.
pub fn to_ppm(plane: Plane<'_>, scale: usize) -> Vec<u8> {
    let scale = scale.max(1);
    let (xs, ys) = plane.axes();
    let (nx, ny) = (xs.len(), ys.len());
    let colors = cell_colors(plane);
    let (w, h) = (nx * scale, ny * scale);
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(w * h * 3);
    for row in 0..h {
        let iy = ny - 1 - row / scale;
        for col in 0..w {
            out.extend_from_slice(&colors[iy * nx + col / scale]);
        }
    }
    out
}

/// SVG with one rectangle per cell and labelled axes.
pub fn to_svg(plane: Plane<'_>, title: &str) -> String {
    const CELL: usize = 10;
    const MARGIN: usize = 60;
    let (xs, ys) = plane.axes();
    let (xname, yname) = plane.axis_names();
    let (nx, ny) = (xs.len(), ys.len());
    let colors = cell_colors(plane);
    let (pw, ph) = (nx * CELL, ny * CELL);
    let (w, h) = (pw + 2 * MARGIN, ph + 2 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" shape-rendering="crispEdges">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        w / 2,
        MARGIN / 2,
        escape(title)
    );
    for iy in 0..ny {
        for ix in 0..nx {
            let [r, g, b] = colors[iy * nx + ix];
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="rgb({r},{g},{b})"/>"#,
                MARGIN + ix * CELL,
                MARGIN + (ny - 1 - iy) * CELL
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let label = |s: &mut String, x: usize, y: usize, anchor: &str, text: &str| {
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{}</text>"#,
            escape(text)
        );
    };
    let short = |v: f64| format!("{v:.3}");
    if let (Some(&x0), Some(&x1), Some(&y0), Some(&y1)) = (xs.first(), xs.last(), ys.first(), ys.last()) {
        label(&mut s, MARGIN, MARGIN + ph + 15, "start", &short(x0));
        label(&mut s, MARGIN + pw, MARGIN + ph + 15, "end", &short(x1));
        label(&mut s, MARGIN - 5, MARGIN + ph, "end", &short(y0));
        label(&mut s, MARGIN - 5, MARGIN + 10, "end", &short(y1));
    }
    label(&mut s, MARGIN + pw / 2, MARGIN + ph + 35, "middle", xname);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle" transform="rotate(-90 {} {})">{}</text>"#,
        MARGIN / 3,
        MARGIN + ph / 2,
        MARGIN / 3,
        MARGIN + ph / 2,
        escape(yname)
    );
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
