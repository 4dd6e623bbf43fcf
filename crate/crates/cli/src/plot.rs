//! Hand-written SVG line charts: one line per estimation with a shaded
//! confidence band, plus one t-test marker row per comparison.

use std::fmt::Write;

use crate::output::EstimationRow;

const WIDTH: f64 = 800.0;
const PLOT_HEIGHT: f64 = 420.0;
const ROW_HEIGHT: f64 = 28.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub label: String,
    pub rows: Vec<EstimationRow>,
}

/// Decisions of one comparison, in instance order.
pub struct MarkerRow {
    pub label: String,
    pub decisions: Vec<(String, bool)>,
}

/// Glyph for a decision: equal means or different means.
pub fn marker(reject: bool) -> char {
    if reject {
        '×'
    } else {
        '•'
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn fmt(x: f64) -> String {
    format!("{:.2}", x)
}

/// Instance labels are parametric bindings when numeric; otherwise rows are
/// spaced by position.
fn x_value(rows: &[EstimationRow], i: usize) -> f64 {
    rows[i].instance.parse().unwrap_or(i as f64)
}

struct Scale {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, from: f64, to: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        Scale { lo, hi, from, to }
    }

    fn at(&self, v: f64) -> f64 {
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    (0..=5).map(|k| lo + (hi - lo) * k as f64 / 5.0).collect()
}

fn tick_label(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    format!("{r}")
}

pub fn render(title: &str, y_label: &str, series: &[Series], markers: &[MarkerRow]) -> String {
    let height = TOP + PLOT_HEIGHT + BOTTOM + ROW_HEIGHT * markers.len() as f64;
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (TOP + PLOT_HEIGHT, TOP);

    let points = || series.iter().flat_map(|s| (0..s.rows.len()).map(move |i| (x_value(&s.rows, i), &s.rows[i])));
    let finite = |v: f64| v.is_finite().then_some(v);
    let xs: Vec<f64> = points().map(|(x, _)| x).collect();
    let ys: Vec<f64> = points()
        .flat_map(|(_, r)| {
            let hw = if r.ci_halfwidth.is_finite() { r.ci_halfwidth } else { 0.0 };
            [finite(r.mean - hw), finite(r.mean + hw)]
        })
        .flatten()
        .collect();
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (xlo, xhi) = if xs.is_empty() { (0.0, 1.0) } else { (min(&xs), max(&xs)) };
    let (ylo, yhi) = if ys.is_empty() { (0.0, 1.0) } else { (min(&ys), max(&ys)) };
    let sx = Scale::new(xlo, xhi, x0, x1);
    let sy = Scale::new(ylo, yhi, y0, y1);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {} {}" font-family="sans-serif" font-size="12">"#,
        WIDTH,
        fmt(height)
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, fmt(WIDTH / 2.0), escape(title));

    // Axes and ticks.
    let _ = writeln!(svg, r#"<g class="axes" stroke="black" fill="none">"#);
    let _ = writeln!(svg, r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}"/>"#, fmt(x0), fmt(y0), fmt(x1));
    let _ = writeln!(svg, r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}"/>"#, fmt(x0), fmt(y0), fmt(y1));
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r#"<g class="ticks">"#);
    for v in ticks(sx.lo, sx.hi) {
        let x = sx.at(v);
        let _ = writeln!(svg, r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/>"#, fmt(x), fmt(y0), fmt(y0 + 5.0));
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, fmt(x), fmt(y0 + 18.0), tick_label(v));
    }
    for v in ticks(sy.lo, sy.hi) {
        let y = sy.at(v);
        let _ = writeln!(svg, r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/>"#, fmt(x0 - 5.0), fmt(y), fmt(x0));
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, fmt(x0 - 8.0), fmt(y + 4.0), tick_label(v));
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">t</text>"#, fmt((x0 + x1) / 2.0), fmt(y0 + 36.0));
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        fmt((y0 + y1) / 2.0),
        escape(y_label)
    );

    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<(f64, &EstimationRow)> =
            (0..s.rows.len()).map(|i| (x_value(&s.rows, i), &s.rows[i])).filter(|(_, r)| r.mean.is_finite()).collect();
        let band_ok = pts.iter().all(|(_, r)| r.ci_halfwidth.is_finite());
        let _ = writeln!(svg, r#"<g class="series" data-label="{}">"#, escape(&s.label));
        if band_ok && !pts.is_empty() {
            let upper = pts.iter().map(|(x, r)| (*x, r.mean + r.ci_halfwidth));
            let lower = pts.iter().rev().map(|(x, r)| (*x, r.mean - r.ci_halfwidth));
            let poly: Vec<String> = upper.chain(lower).map(|(x, y)| format!("{},{}", fmt(sx.at(x)), fmt(sy.at(y)))).collect();
            let _ = writeln!(svg, r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, poly.join(" "));
        }
        let line: Vec<String> = pts.iter().map(|(x, r)| format!("{},{}", fmt(sx.at(*x)), fmt(sy.at(r.mean)))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        let ly = TOP + 10.0 + 20.0 * k as f64;
        let _ = writeln!(svg, r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{color}" stroke-width="2"/>"#, fmt(x1 + 15.0), fmt(ly), fmt(x1 + 35.0));
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, fmt(x1 + 40.0), fmt(ly + 4.0), escape(&s.label));
        let _ = writeln!(svg, "</g>");
    }
    if !series.is_empty() {
        let ly = TOP + 10.0 + 20.0 * series.len() as f64;
        let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="10">bands: 95% CI</text>"#, fmt(x1 + 15.0), fmt(ly + 4.0));
    }

    for (k, row) in markers.iter().enumerate() {
        let y = y0 + BOTTOM + ROW_HEIGHT * (k as f64 + 0.6);
        let _ = writeln!(svg, r#"<g class="markers" data-label="{}">"#, escape(&row.label));
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end" font-size="10">{}</text>"#, fmt(x0 - 8.0), fmt(y), escape(&row.label));
        let xs_of = series.first().map(|s| &s.rows);
        for (i, (instance, reject)) in row.decisions.iter().enumerate() {
            let xv = instance.parse().unwrap_or_else(|_| xs_of.map_or(i as f64, |r| if i < r.len() { x_value(r, i) } else { i as f64 }));
            let _ = writeln!(
                svg,
                r#"<text class="marker" data-instance="{}" data-reject="{}" x="{}" y="{}" text-anchor="middle">{}</text>"#,
                escape(instance),
                u8::from(*reject),
                fmt(sx.at(xv)),
                fmt(y),
                marker(*reject)
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(means: &[(f64, f64)]) -> Vec<EstimationRow> {
        means
            .iter()
            .enumerate()
            .map(|(i, &(mean, hw))| EstimationRow {
                instance: (1 + 10 * i).to_string(),
                mean,
                variance: 1.0,
                n: 30,
                ci_halfwidth: hw,
                converged: true,
            })
            .collect()
    }

    #[test]
    fn single_series_has_band_and_no_markers() {
        let s = Series { label: "baseline".into(), rows: rows(&[(1.0, 0.2), (2.0, 0.3), (3.0, 0.1)]) };
        let svg = render("logGDP", "mean", &[s], &[]);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("viewBox=\"0 0 800 510.00\""));
        assert_eq!(svg.matches("<polygon class=\"band\"").count(), 1);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(!svg.contains("class=\"marker\""));
    }

    #[test]
    fn markers_follow_decisions() {
        let a = Series { label: "a".into(), rows: rows(&[(1.0, 0.2), (2.0, 0.3)]) };
        let b = Series { label: "b & c".into(), rows: rows(&[(1.5, 0.2), (4.0, 0.3)]) };
        let m = MarkerRow { label: "a vs b".into(), decisions: vec![("1".into(), false), ("11".into(), true)] };
        let svg = render("t", "y", &[a, b], &[m]);
        assert!(svg.contains("b &amp; c"));
        assert!(svg.contains(r#"data-instance="1" data-reject="0""#));
        assert!(svg.contains(r#"data-instance="11" data-reject="1""#));
        assert_eq!(svg.matches('•').count(), 1);
        assert_eq!(svg.matches('×').count(), 1);
    }

    #[test]
    fn degenerate_inputs_still_render() {
        let flat = Series { label: "flat".into(), rows: rows(&[(2.0, 0.0), (2.0, 0.0)]) };
        let svg = render("", "", &[flat], &[]);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
        let empty = render("", "", &[], &[]);
        assert!(empty.contains("</svg>"));
        let inf = Series { label: "x".into(), rows: rows(&[(f64::NEG_INFINITY, f64::INFINITY), (1.0, f64::INFINITY)]) };
        let svg = render("", "", &[inf], &[]);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
        assert!(!svg.contains("class=\"band\""));
    }
}
