//! Minimal deterministic SVG emitters: line plots and cell heatmaps.

use std::fmt::Write;

use quasisys_core::Mesh;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series<'a> {
    pub name: &'a str,
    pub xs: &'a [f64],
    pub ys: &'a [f64],
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>\n",
        W / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line plot; with `log_y` the values are plotted as `log10` and nonpositive
/// points are dropped.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], log_y: bool) -> String {
    let tr = |y: f64| if log_y { y.log10() } else { y };
    let (x0, x1) = bounds(series.iter().flat_map(|s| s.xs.iter().copied()));
    let (y0, y1) = bounds(series.iter().flat_map(|s| s.ys.iter().map(|&y| tr(y))));
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let py = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);

    let mut out = String::new();
    header(&mut out, title);
    let _ = writeln!(
        out,
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let ylab = if log_y { format!("1e{yv:.1}") } else { format!("{yv:.3}") };
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{xv:.3}</text>",
            px(xv),
            H - BOTTOM + 16.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{ylab}</text>",
            LEFT - 6.0,
            py(yv) + 4.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
        W / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{:.2}\" transform=\"rotate(-90 16 {:.2})\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = s
            .xs
            .iter()
            .zip(s.ys)
            .filter(|(_, &y)| !log_y || y > 0.0)
            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(tr(y))))
            .collect();
        let _ = writeln!(
            out,
            "<polyline data-series=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            escape(s.name),
            pts.join(" ")
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">{}</text>",
            W - RIGHT - 120.0,
            TOP + 16.0 + 14.0 * k as f64,
            escape(s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn color(t: f64) -> String {
    // dark blue -> teal -> yellow
    const STOPS: [(f64, f64, f64); 3] = [(68.0, 1.0, 84.0), (33.0, 145.0, 140.0), (253.0, 231.0, 37.0)];
    let t = t.clamp(0.0, 1.0) * 2.0;
    let k = (t.floor() as usize).min(1);
    let f = t - k as f64;
    let (a, b) = (STOPS[k], STOPS[k + 1]);
    let c = |u: f64, v: f64| (u + f * (v - u)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(a.0, b.0), c(a.1, b.1), c(a.2, b.2))
}

/// Heatmap of a nodal field over a 2D mesh, one rectangle per cell.
pub fn heatmap(title: &str, mesh: &Mesh, values: &[f64]) -> String {
    let cells: Vec<f64> = (0..mesh.num_cells()).map(|c| mesh.cell_average(values, c)).collect();
    let (lo, hi) = bounds(cells.iter().copied());
    let ext = mesh.extents();
    let (ax, ay) = (ext[0].1 - ext[0].0, ext[1].1 - ext[1].0);
    let scale = ((W - LEFT - RIGHT) / ax).min((H - TOP - BOTTOM) / ay);
    let (hx, hy) = (mesh.spacing()[0] * scale, mesh.spacing()[1] * scale);
    let mut out = String::new();
    header(&mut out, title);
    for (c, v) in cells.iter().enumerate() {
        let [cx, cy] = mesh.cell_center(c);
        let x = LEFT + (cx - ext[0].0) * scale - hx / 2.0;
        let y = H - BOTTOM - (cy - ext[1].0) * scale - hy / 2.0;
        let _ = writeln!(
            out,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
            hx + 0.05,
            hy + 0.05,
            color((v - lo) / (hi - lo))
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{LEFT}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\">min {lo:.4e}  max {hi:.4e}</text>",
        H - 12.0
    );
    out.push_str("</svg>\n");
    out
}

/// Field plot matching the mesh dimension.
pub fn field_plot(title: &str, mesh: &Mesh, fields: &[(&str, &[f64])]) -> String {
    if mesh.dim() == 1 {
        let xs: Vec<f64> = (0..mesh.num_nodes()).map(|i| mesh.coords(i)[0]).collect();
        let series: Vec<Series> = fields.iter().map(|(n, v)| Series { name: n, xs: &xs, ys: v }).collect();
        line_plot(title, "x", "value", &series, false)
    } else {
        heatmap(title, mesh, fields[0].1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_output() {
        let xs = [0.0, 0.5, 1.0];
        let ys = [0.0, 1.0, 0.0];
        let s = [Series { name: "u", xs: &xs, ys: &ys }];
        let a = line_plot("t", "x", "y", &s, false);
        assert_eq!(a, line_plot("t", "x", "y", &s, false));
        assert!(a.contains("<polyline data-series=\"u\""));
    }

    #[test]
    fn log_plot_drops_nonpositive() {
        let xs = [1.0, 2.0, 3.0];
        let ys = [1e-2, 0.0, 1e-6];
        let svg = line_plot("r", "k", "res", &[Series { name: "r", xs: &xs, ys: &ys }], true);
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), 2);
    }
}
