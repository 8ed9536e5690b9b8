//! Minimal SVG line plots: solution components as solid polylines and the
//! decay envelope as dashed polylines.

use std::fmt::Write;

use mlstab::certificate::Certificate;
use mlstab::special::SpecialError;
use mlstab::trajectory::Trajectory;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_Y: f64 = 40.0;
const MAX_POINTS: usize = 1500;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

struct Curve {
    label: String,
    class: &'static str,
    color: &'static str,
    points: Vec<(f64, f64)>,
}

/// Indices of at most `MAX_POINTS` evenly spaced samples, always keeping
/// the last one.
fn thin(n: usize) -> Vec<usize> {
    if n <= MAX_POINTS {
        return (0..n).collect();
    }
    let stride = n.div_ceil(MAX_POINTS);
    let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
    if *idx.last().unwrap() != n - 1 {
        idx.push(n - 1);
    }
    idx
}

pub fn render(title: &str, traj: &Trajectory, cert: Option<&Certificate>) -> Result<String, SpecialError> {
    let idx = thin(traj.len());
    let d = traj.dim();
    let mut curves = Vec::new();
    for i in 0..d {
        curves.push(Curve {
            label: format!("w_{}", i + 1),
            class: "solution",
            color: COLORS[i % COLORS.len()],
            points: idx.iter().map(|&k| (traj.time(k), traj.state(k)[i])).collect(),
        });
    }
    if let Some(cert) = cert {
        let decay: Vec<f64> = idx.iter().map(|&k| cert.decay(traj.time(k))).collect::<Result<_, _>>()?;
        for i in 0..d {
            let scale = cert.nu * cert.v[i];
            curves.push(Curve {
                label: format!("envelope {}", i + 1),
                class: "envelope",
                color: COLORS[i % COLORS.len()],
                points: idx.iter().zip(&decay).map(|(&k, e)| (traj.time(k), scale * e)).collect(),
            });
        }
    }

    let finite = curves.iter().flat_map(|c| c.points.iter()).filter(|p| p.1.is_finite());
    let (mut y_lo, mut y_hi) = finite.fold((0.0_f64, 0.0_f64), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    if y_hi - y_lo <= 0.0 {
        y_hi = y_lo + 1.0;
    }
    let pad = 0.05 * (y_hi - y_lo);
    y_lo -= if y_lo < 0.0 { pad } else { 0.0 };
    y_hi += pad;
    let t_hi = traj.last_time().max(traj.step());

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - 2.0 * MARGIN_Y;
    let sx = |t: f64| MARGIN_LEFT + plot_w * t / t_hi;
    let sy = |y: f64| MARGIN_Y + plot_h * (1.0 - (y - y_lo) / (y_hi - y_lo));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
    let (x0, x1, y0, y1) = (MARGIN_LEFT, MARGIN_LEFT + plot_w, MARGIN_Y, MARGIN_Y + plot_h);
    let _ = writeln!(s, r#"<path class="axes" d="M{x0:.2} {y0:.2} L{x0:.2} {y1:.2} L{x1:.2} {y1:.2}" fill="none" stroke="black"/>"#);
    for k in 0..=5 {
        let t = t_hi * k as f64 / 5.0;
        let x = sx(t);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y1:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, y1 + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#, y1 + 20.0, tick(t));
        let y = y_lo + (y_hi - y_lo) * k as f64 / 5.0;
        let py = sy(y);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="end">{}</text>"#, x0 - 8.0, py + 4.0, tick(y));
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle">t</text>"#, (x0 + x1) / 2.0, HEIGHT - 6.0);

    for (n, c) in curves.iter().enumerate() {
        let mut pts = String::new();
        for &(t, y) in &c.points {
            if y.is_finite() {
                let _ = write!(pts, "{:.2},{:.2} ", sx(t), sy(y.clamp(y_lo, y_hi)));
            }
        }
        let dash = if c.class == "envelope" { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            s,
            r#"<polyline class="{}" points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
            c.class,
            pts.trim_end(),
            c.color
        );
        let ly = MARGIN_Y + 10.0 + 20.0 * n as f64;
        let lx = x1 + 15.0;
        let _ = writeln!(s, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="1.5"{dash}/>"#, lx + 25.0, c.color);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{}</text>"#, lx + 30.0, ly + 4.0, escape(&c.label));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn tick(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.abs() >= 1e4 || x.abs() < 1e-2 {
        format!("{x:.1e}")
    } else {
        let s = format!("{x:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
