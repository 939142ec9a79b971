//! Static SVG histograms.

use std::fmt::Write as _;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 240.0;
const MARGIN: f64 = 32.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Histogram of the finite entries of `values` in `bins` equal-width bins.
pub fn histogram_svg(title: &str, values: &[f64], bins: usize) -> String {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let bins = bins.max(1);
    let (lo, hi) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut counts = vec![0usize; bins];
    if !finite.is_empty() {
        let span = if hi > lo { hi - lo } else { 1.0 };
        for v in &finite {
            let k = (((v - lo) / span) * bins as f64) as usize;
            counts[k.min(bins - 1)] += 1;
        }
    }
    let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let bar_w = plot_w / bins as f64;

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{MARGIN}" y="20" font-family="monospace" font-size="13">{}</text>"#, escape(title)).unwrap();
    for (k, &c) in counts.iter().enumerate() {
        let h = plot_h * c as f64 / top;
        let x = MARGIN + k as f64 * bar_w;
        let y = HEIGHT - MARGIN - h;
        writeln!(s, r##"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{h:.2}" fill="#4a78a8"/>"##, (bar_w - 1.0).max(0.5))
            .unwrap();
    }
    let axis_y = HEIGHT - MARGIN;
    writeln!(s, r#"<line x1="{MARGIN}" y1="{axis_y}" x2="{}" y2="{axis_y}" stroke="black"/>"#, WIDTH - MARGIN).unwrap();
    if !finite.is_empty() {
        let label_y = axis_y + 16.0;
        writeln!(s, r#"<text x="{MARGIN}" y="{label_y}" font-family="monospace" font-size="11">{lo:.3e}</text>"#).unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{label_y}" font-family="monospace" font-size="11" text-anchor="end">{hi:.3e}</text>"#,
            WIDTH - MARGIN
        )
        .unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" font-family="monospace" font-size="11" text-anchor="end">n={}</text>"#, WIDTH - MARGIN, 20, finite.len()).unwrap();
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_bar_per_bin() {
        let svg = histogram_svg("a < b", &[0.0, 1.0, 1.0, f64::NAN], 4);
        assert_eq!(svg.matches("fill=\"#4a78a8\"").count(), 4);
        assert!(svg.contains("a &lt; b"));
        assert!(svg.contains("n=3"));
    }

    #[test]
    fn empty_input_is_valid() {
        let svg = histogram_svg("empty", &[], 3);
        assert!(svg.ends_with("</svg>\n"));
    }
}
