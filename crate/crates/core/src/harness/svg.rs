//! Standalone SVG plots. Output depends only on the input numbers, so the
//! same data always renders to the same bytes.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 45.0;
/// Losses at or below this are drawn at the floor of the log axis.
const LOG_FLOOR: f64 = 1e-300;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
        W / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn axes(out: &mut String, x_label: &str, y_label: &str, x: (f64, f64), y: (f64, f64)) {
    let (x0, y0, x1, y1) = (LEFT, H - BOTTOM, W - RIGHT, TOP);
    let _ = writeln!(
        out,
        r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{x0}" y="{}" text-anchor="start">{}</text>"#,
        y0 + 15.0,
        tick(x.0)
    );
    let _ = writeln!(
        out,
        r#"<text x="{x1}" y="{}" text-anchor="end">{}</text>"#,
        y0 + 15.0,
        tick(x.1)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{y0}" text-anchor="end">{}</text>"#,
        x0 - 4.0,
        tick(y.0)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        x0 - 4.0,
        y1 + 8.0,
        tick(y.1)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e6 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn scale(v: f64, (lo, hi): (f64, f64), (a, b): (f64, f64)) -> f64 {
    if hi > lo {
        a + (v - lo) / (hi - lo) * (b - a)
    } else {
        (a + b) / 2.0
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

/// One polyline per series of `(step, loss)` points on a `log10` loss axis.
/// Non-finite points break the line.
pub fn loss_curves(title: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let ly = |l: f64| l.max(LOG_FLOOR).log10();
    let finite = || {
        series
            .iter()
            .flat_map(|(_, p)| p.iter())
            .filter(|(_, l)| l.is_finite())
    };
    let (mut xlo, mut xhi, mut ylo, mut yhi) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(s, l) in finite() {
        xlo = xlo.min(s);
        xhi = xhi.max(s);
        ylo = ylo.min(ly(l));
        yhi = yhi.max(ly(l));
    }
    if !xlo.is_finite() {
        (xlo, xhi, ylo, yhi) = (0.0, 1.0, 0.0, 1.0);
    }
    let (xr, yr) = (padded(xlo, xhi), padded(ylo, yhi));
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, "step", "log10 loss", xr, yr);
    for (i, (label, pts)) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for &(s, l) in pts {
            if !l.is_finite() {
                pen_down = false;
                continue;
            }
            let px = scale(s, xr, (LEFT, W - RIGHT));
            let py = scale(ly(l), yr, (H - BOTTOM, TOP));
            let _ = write!(d, "{}{px:.2},{py:.2} ", if pen_down { "L" } else { "M" });
            pen_down = true;
        }
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{colour}" stroke-width="1.2"><title>{}</title></path>"#,
            d.trim_end(),
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Histogram of `log10` of the finite, positive values in `bins` equal bins.
pub fn histogram(title: &str, values: &[f64], bins: usize) -> String {
    let logs: Vec<f64> = values
        .iter()
        .filter(|v| v.is_finite() && **v > 0.0)
        .map(|v| v.log10())
        .collect();
    let bins = bins.max(1);
    let (lo, hi) = logs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    let xr = if logs.is_empty() {
        (0.0, 1.0)
    } else {
        padded(lo, hi)
    };
    let mut counts = vec![0usize; bins];
    for &x in &logs {
        let k = (((x - xr.0) / (xr.1 - xr.0)) * bins as f64).floor() as usize;
        counts[k.min(bins - 1)] += 1;
    }
    let peak = counts.iter().copied().max().unwrap_or(0).max(1);
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, "log10 final loss", "runs", xr, (0.0, peak as f64));
    let bw = (W - LEFT - RIGHT) / bins as f64;
    for (k, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let h = c as f64 / peak as f64 * (H - TOP - BOTTOM);
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="#1f77b4" stroke="white"/>"##,
            LEFT + k as f64 * bw,
            H - BOTTOM - h,
            bw
        );
    }
    out.push_str("</svg>\n");
    out
}
