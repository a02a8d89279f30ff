//! Self-contained SVG plots: the latent scatter, the overlaid
//! characteristic derivative spectra, and per-condition peak bars.

use std::fmt::Write;

use super::report::PeakReport;
use crate::latent::{CharacteristicSpectrum, ClusterSummary, LatentEmbedding};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
    "#7f7f7f", "#bcbd22",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&apos;")
}

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

/// Linear map from a data range onto a pixel range; a degenerate data range
/// is widened so that it still maps somewhere sensible.
#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    p0: f64,
    p1: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, p0: f64, p1: f64) -> Self {
        let (mut lo, mut hi) = values
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            });
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo <= f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE) {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.5 };
            (lo, hi) = (lo - pad, hi + pad);
        } else {
            let pad = 0.05 * (hi - lo);
            (lo, hi) = (lo - pad, hi + pad);
        }
        Self { lo, hi, p0, p1 }
    }

    fn map(&self, v: f64) -> f64 {
        self.p0 + (v - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)
    }
}

struct Canvas {
    out: String,
}

impl Canvas {
    fn new(title: &str) -> Self {
        let mut out = String::new();
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        )
        .unwrap();
        writeln!(out, "<title>{}</title>", escape(title)).unwrap();
        writeln!(
            out,
            r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
        )
        .unwrap();
        Self { out }
    }

    fn frame(&mut self, x: &Axis, y: &Axis, xlabel: &str, ylabel: &str) {
        let o = &mut self.out;
        writeln!(
            o,
            r#"<g class="axes" stroke="black" fill="none"><rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/></g>"#,
            x.p0,
            y.p1,
            x.p1 - x.p0,
            y.p0 - y.p1
        )
        .unwrap();
        for (v, anchor) in [(x.lo, "start"), (x.hi, "end")] {
            writeln!(
                o,
                r#"<text class="tick" x="{:.2}" y="{:.2}" text-anchor="{anchor}">{}</text>"#,
                x.map(v),
                y.p0 + 16.0,
                fmt_tick(v)
            )
            .unwrap();
        }
        for v in [y.lo, y.hi] {
            writeln!(
                o,
                r#"<text class="tick" x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                x.p0 - 4.0,
                y.map(v) + 4.0,
                fmt_tick(v)
            )
            .unwrap();
        }
        writeln!(
            o,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            0.5 * (x.p0 + x.p1),
            y.p0 + 36.0,
            escape(xlabel)
        )
        .unwrap();
        writeln!(
            o,
            r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
            0.5 * (y.p0 + y.p1),
            0.5 * (y.p0 + y.p1),
            escape(ylabel)
        )
        .unwrap();
    }

    fn legend(&mut self, labels: &[&str]) {
        for (i, l) in labels.iter().enumerate() {
            let y = MARGIN + 16.0 * i as f64;
            writeln!(
                self.out,
                r#"<g class="legend"><rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
                WIDTH - MARGIN - 120.0,
                y - 9.0,
                color(i),
                WIDTH - MARGIN - 105.0,
                y,
                escape(l)
            )
            .unwrap();
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 || (1e-3..1e5).contains(&v.abs()) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

/// Latent means coloured by condition, with a cross at each cluster median.
/// Colours follow the order of `clusters`; points of other conditions get
/// colours after those.
pub fn latent_scatter(e: &LatentEmbedding, clusters: &[ClusterSummary]) -> String {
    let mut labels: Vec<&str> = clusters.iter().map(|c| c.condition.as_str()).collect();
    for p in &e.points {
        if !labels.contains(&p.meta.condition.as_str()) {
            labels.push(&p.meta.condition);
        }
    }
    let xs = e
        .points
        .iter()
        .map(|p| p.mu[0])
        .chain(clusters.iter().map(|c| c.median[0]));
    let ys = e
        .points
        .iter()
        .map(|p| p.mu[1])
        .chain(clusters.iter().map(|c| c.median[1]));
    let x = Axis::new(xs, MARGIN, WIDTH - MARGIN);
    let y = Axis::new(ys, HEIGHT - MARGIN, MARGIN);

    let mut c = Canvas::new("Latent space");
    c.frame(&x, &y, "μ₁", "μ₂");
    for p in &e.points {
        let k = labels.iter().position(|l| *l == p.meta.condition).unwrap();
        writeln!(
            c.out,
            r#"<circle class="point" data-condition="{}" cx="{:.2}" cy="{:.2}" r="3" fill="{}" fill-opacity="0.6"/>"#,
            escape(&p.meta.condition),
            x.map(p.mu[0]),
            y.map(p.mu[1]),
            color(k)
        )
        .unwrap();
    }
    for (k, cl) in clusters.iter().enumerate() {
        let (cx, cy) = (x.map(cl.median[0]), y.map(cl.median[1]));
        writeln!(
            c.out,
            r#"<path class="median" data-condition="{}" d="M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}" stroke="{}" stroke-width="3"/>"#,
            escape(&cl.condition),
            cx - 7.0,
            cy - 7.0,
            cx + 7.0,
            cy + 7.0,
            cx - 7.0,
            cy + 7.0,
            cx + 7.0,
            cy - 7.0,
            color(k)
        )
        .unwrap();
    }
    c.legend(&labels);
    c.finish()
}

/// Characteristic derivative spectra of every condition on shared axes.
pub fn characteristic_overlay(spectra: &[CharacteristicSpectrum]) -> String {
    let xs = spectra
        .iter()
        .flat_map(|s| s.derivative.grid().values().iter().copied());
    let ys = spectra
        .iter()
        .flat_map(|s| s.derivative.values().iter().copied());
    let x = Axis::new(xs, MARGIN, WIDTH - MARGIN);
    let y = Axis::new(ys.chain([0.0]), HEIGHT - MARGIN, MARGIN);

    let mut c = Canvas::new("Characteristic derivative spectra");
    c.frame(&x, &y, "wavenumber (cm⁻¹)", "D(ṽ)");
    writeln!(
        c.out,
        r#"<line class="zero" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="2 2"/>"#,
        x.p0,
        y.map(0.0),
        x.p1,
        y.map(0.0)
    )
    .unwrap();
    for (k, s) in spectra.iter().enumerate() {
        let mut d = String::new();
        for (i, (w, v)) in s
            .derivative
            .grid()
            .values()
            .iter()
            .zip(s.derivative.values())
            .enumerate()
        {
            write!(
                d,
                "{}{:.2} {:.2}",
                if i == 0 { "M" } else { "L" },
                x.map(*w),
                y.map(*v)
            )
            .unwrap();
        }
        writeln!(
            c.out,
            r#"<path class="curve" data-condition="{}" d="{d}" fill="none" stroke="{}" stroke-width="1"/>"#,
            escape(&s.condition),
            color(k)
        )
        .unwrap();
    }
    let labels: Vec<&str> = spectra.iter().map(|s| s.condition.as_str()).collect();
    c.legend(&labels);
    c.finish()
}

/// One panel per condition: a bar of height A(ṽ) for each reported peak,
/// with a dotted vertical marker through every peak position.
pub fn peak_bars(report: &PeakReport, x_range: (f64, f64)) -> String {
    let n = report.conditions.len().max(1);
    let panel_h = (HEIGHT - 2.0 * MARGIN) / n as f64;
    let x = Axis::new([x_range.0, x_range.1].into_iter(), MARGIN, WIDTH - MARGIN);
    let max_area = report
        .conditions
        .iter()
        .flat_map(|c| c.peaks.iter().map(|p| p.area))
        .fold(0.0, f64::max);

    let mut c = Canvas::new("Significant peaks");
    for (k, cond) in report.conditions.iter().enumerate() {
        let top = MARGIN + panel_h * k as f64;
        let y = Axis::new([0.0, max_area].into_iter(), top + panel_h - 4.0, top + 14.0);
        let y = Axis { lo: 0.0, ..y };
        writeln!(
            c.out,
            r#"<g class="panel" data-condition="{}"><rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            escape(&cond.condition),
            x.p0,
            top,
            x.p1 - x.p0,
            panel_h,
            x.p0 + 4.0,
            top + 12.0,
            escape(&cond.condition)
        )
        .unwrap();
        for p in &cond.peaks {
            let px = x.map(p.position);
            writeln!(
                c.out,
                r#"<line class="marker" x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="1 3"/>"#,
                top,
                top + panel_h
            )
            .unwrap();
            let (y0, y1) = (y.map(0.0), y.map(p.area));
            writeln!(
                c.out,
                r#"<rect class="bar" x="{:.2}" y="{:.2}" width="6" height="{:.2}" fill="{}"><title>{:.1} cm⁻¹, A = {:.4e}{}</title></rect>"#,
                px - 3.0,
                y1.min(y0),
                (y0 - y1).abs(),
                color(k),
                p.position,
                p.area,
                p.annotation.as_deref().map(|a| format!(", {}", escape(a))).unwrap_or_default()
            )
            .unwrap();
        }
        c.out.push_str("</g>\n");
    }
    writeln!(
        c.out,
        r#"<text class="tick" x="{:.2}" y="{:.2}">{}</text><text class="tick" x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
        x.p0,
        HEIGHT - MARGIN + 16.0,
        fmt_tick(x.lo),
        x.p1,
        HEIGHT - MARGIN + 16.0,
        fmt_tick(x.hi)
    )
    .unwrap();
    writeln!(
        c.out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">wavenumber (cm⁻¹)</text>"#,
        0.5 * WIDTH,
        HEIGHT - MARGIN + 36.0
    )
    .unwrap();
    c.finish()
}
