//! Thin built-in SVG emitters: line plots and heatmaps. CSV is the
//! canonical output; these are quick-look figures only.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 440.0;
const MARGIN: f64 = 60.0;

fn scale(v: f64, lo: f64, hi: f64, out_lo: f64, out_hi: f64) -> f64 {
    if hi <= lo {
        return (out_lo + out_hi) / 2.0;
    }
    out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Multi-series line plot; log-scaled axes transform the data by log10.
pub fn line_plot_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
    log_x: bool,
    log_y: bool,
) -> String {
    let tx = |x: f64| if log_x { x.log10() } else { x };
    let ty = |y: f64| if log_y { y.max(1e-300).log10() } else { y };
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|(_, p)| p.iter().map(|&(x, y)| (tx(x), ty(y))))
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    if !x_lo.is_finite() {
        x_lo = 0.0;
        x_hi = 1.0;
        y_lo = 0.0;
        y_hi = 1.0;
    }
    let mut svg = String::new();
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">"
    )
    .unwrap();
    write!(
        svg,
        "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>\n\
         <text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{y_label}</text>\n",
        W / 2.0,
        W / 2.0,
        H - 12.0,
        H / 2.0,
        H / 2.0
    )
    .unwrap();
    writeln!(
        svg,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    )
    .unwrap();
    let fmt_tick = |v: f64, log: bool| {
        if log {
            format!("1e{v:.1}")
        } else {
            format!("{v:.3}")
        }
    };
    for i in 0..=4 {
        let fx = x_lo + (x_hi - x_lo) * i as f64 / 4.0;
        let px = scale(fx, x_lo, x_hi, MARGIN, W - MARGIN);
        writeln!(
            svg,
            "<text x=\"{px}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            H - MARGIN + 18.0,
            fmt_tick(fx, log_x)
        )
        .unwrap();
        let fy = y_lo + (y_hi - y_lo) * i as f64 / 4.0;
        let py = scale(fy, y_lo, y_hi, H - MARGIN, MARGIN);
        writeln!(
            svg,
            "<text x=\"{}\" y=\"{py}\" text-anchor=\"end\">{}</text>",
            MARGIN - 6.0,
            fmt_tick(fy, log_y)
        )
        .unwrap();
    }
    for (s, (name, points)) in series.iter().enumerate() {
        let color = PALETTE[s % PALETTE.len()];
        let path: Vec<String> = points
            .iter()
            .map(|&(x, y)| (tx(x), ty(y)))
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| {
                format!(
                    "{:.2},{:.2}",
                    scale(x, x_lo, x_hi, MARGIN, W - MARGIN),
                    scale(y, y_lo, y_hi, H - MARGIN, MARGIN)
                )
            })
            .collect();
        if !path.is_empty() {
            writeln!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                path.join(" ")
            )
            .unwrap();
        }
        writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{name}</text>",
            W - MARGIN + 4.0,
            MARGIN + 16.0 * s as f64
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

/// Heatmap over a rectangular grid; `values[row][col]`, row 0 at the bottom.
pub fn heatmap_svg(
    title: &str,
    x_labels: &[String],
    y_labels: &[String],
    values: &[Vec<f64>],
    log_color: bool,
) -> String {
    let t = |v: f64| if log_color { v.max(1e-300).log10() } else { v };
    let flat: Vec<f64> = values
        .iter()
        .flatten()
        .map(|&v| t(v))
        .filter(|v| v.is_finite())
        .collect();
    let lo = flat.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = flat.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let n_cols = x_labels.len().max(1);
    let n_rows = y_labels.len().max(1);
    let cell_w = (W - 2.0 * MARGIN) / n_cols as f64;
    let cell_h = (H - 2.0 * MARGIN) / n_rows as f64;
    let mut svg = String::new();
    write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n",
        W / 2.0
    )
    .unwrap();
    for (r, row) in values.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let frac = if hi > lo {
                ((t(v) - lo) / (hi - lo)).clamp(0.0, 1.0)
            } else {
                0.5
            };
            // Dark blue (small) to light yellow (large).
            let red = (255.0 * frac) as u8;
            let green = (230.0 * frac + 20.0) as u8;
            let blue = (160.0 * (1.0 - frac) + 60.0) as u8;
            let x = MARGIN + c as f64 * cell_w;
            let y = H - MARGIN - (r + 1) as f64 * cell_h;
            writeln!(
                svg,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell_w:.1}\" height=\"{cell_h:.1}\" \
                 fill=\"rgb({red},{green},{blue})\"><title>{v:.4e}</title></rect>"
            )
            .unwrap();
        }
    }
    for (c, label) in x_labels.iter().enumerate() {
        writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{label}</text>",
            MARGIN + (c as f64 + 0.5) * cell_w,
            H - MARGIN + 16.0
        )
        .unwrap();
    }
    for (r, label) in y_labels.iter().enumerate() {
        writeln!(
            svg,
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{label}</text>",
            MARGIN - 6.0,
            H - MARGIN - (r as f64 + 0.5) * cell_h + 4.0
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emits_wellformed_svg() {
        let svg = line_plot_svg(
            "t",
            "x",
            "y",
            &[("s".into(), vec![(1.0, 1.0), (10.0, 0.1)])],
            true,
            true,
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        let hm = heatmap_svg(
            "h",
            &["1".into()],
            &["2".into()],
            &[vec![0.5]],
            false,
        );
        assert!(hm.contains("rect"));
    }
}
