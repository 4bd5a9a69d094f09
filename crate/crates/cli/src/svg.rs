//! Minimal self-contained SVG plots. They are conveniences; the CSV and
//! JSON artifacts carry the numbers.

use std::fmt::Write;

use gainpdf::marginal::LandscapeGrid;
use gainpdf::target::Provenance;
use gainpdf::workflow::{IsoLine, MatchOutcome, PortfolioComparison};
use gainpdf::Result;

pub const BLACK: &str = "#000000";
pub const GREEN: &str = "#2a9d3a";
pub const ORANGE: &str = "#f28e1c";
pub const RED: &str = "#d62728";

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

pub struct Series {
    pub label: String,
    pub color: String,
    pub points: Vec<(f64, f64)>,
    pub markers: bool,
}

impl Series {
    pub fn line(label: &str, color: &str, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            color: color.into(),
            points,
            markers: false,
        }
    }

    pub fn markers(label: &str, color: &str, points: Vec<(f64, f64)>) -> Self {
        Series {
            markers: true,
            ..Series::line(label, color, points)
        }
    }
}

pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Dashed vertical markers `(x, color)`.
    pub vlines: Vec<(f64, String)>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1e-3);
        return (lo - pad, hi + pad);
    }
    let pad = 0.04 * (hi - lo);
    (lo - pad, hi + pad)
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    fn axes(&self, out: &mut String, title: &str, xl: &str, yl: &str) {
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
        let _ = write!(
            out,
            r##"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
            x1 - x0,
            y1 - y0
        );
        for k in 0..=4 {
            let t = k as f64 / 4.0;
            let xv = self.x.0 + t * (self.x.1 - self.x.0);
            let yv = self.y.0 + t * (self.y.1 - self.y.0);
            let (px, py) = (self.px(xv), self.py(yv));
            let _ = write!(
                out,
                r##"<line x1="{px:.1}" y1="{y1}" x2="{px:.1}" y2="{:.1}" stroke="#444"/><text x="{px:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"##,
                y1 + 5.0,
                y1 + 18.0,
                tick(xv)
            );
            let _ = write!(
                out,
                r##"<line x1="{:.1}" y1="{py:.1}" x2="{x0}" y2="{py:.1}" stroke="#444"/><text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"##,
                x0 - 5.0,
                x0 - 8.0,
                py + 4.0,
                tick(yv)
            );
        }
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="22" font-size="15" text-anchor="middle">{}</text><text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text><text transform="translate(16 {:.1}) rotate(-90)" font-size="12" text-anchor="middle">{}</text>"#,
            W / 2.0,
            esc(title),
            (x0 + x1) / 2.0,
            H - 12.0,
            esc(xl),
            (y0 + y1) / 2.0,
            esc(yl)
        );
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn open() -> String {
    format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif"><rect width="100%" height="100%" fill="white"/>"#
    )
}

fn legend(out: &mut String, items: &[(&str, &str)]) {
    for (i, (label, color)) in items.iter().enumerate() {
        let y = TOP + 14.0 + 16.0 * i as f64;
        let x = W - RIGHT - 160.0;
        let _ = write!(
            out,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}" font-size="11">{}</text>"#,
            x + 20.0,
            x + 26.0,
            y + 4.0,
            esc(label)
        );
    }
}

impl LinePlot {
    pub fn render(&self) -> String {
        let f = Frame {
            x: range(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0))),
            y: range(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1))),
        };
        let mut out = open();
        f.axes(&mut out, &self.title, &self.x_label, &self.y_label);
        for s in &self.series {
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
                .collect();
            let _ = write!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
                pts.join(" "),
                s.color
            );
            if s.markers {
                for p in &pts {
                    let (x, y) = p.split_once(',').unwrap_or(("0", "0"));
                    let _ = write!(out, r#"<circle cx="{x}" cy="{y}" r="3" fill="{}"/>"#, s.color);
                }
            }
        }
        for (x, color) in &self.vlines {
            if *x >= f.x.0 && *x <= f.x.1 {
                let px = f.px(*x);
                let _ = write!(
                    out,
                    r#"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{}" stroke="{color}" stroke-dasharray="6 4"/>"#,
                    H - BOTTOM
                );
            }
        }
        let items: Vec<(&str, &str)> = self.series.iter().map(|s| (s.label.as_str(), s.color.as_str())).collect();
        legend(&mut out, &items);
        out.push_str("</svg>\n");
        out
    }
}

/// Original, target and matched densities with the theta center.
pub fn match_plot(o: &MatchOutcome) -> Result<String> {
    let grid = o.target.grid;
    let pts = grid.points();
    let curve = |v: &[f64]| pts.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>();
    let original = o.result.initial_pdf.resample(&grid)?;
    let matched = o.result.pdf.resample(&grid)?;
    let mut vlines = vec![(o.target.theta.center, RED.to_string())];
    if let Provenance::PerturbedFrom { params, .. } = &o.target.provenance {
        if params.boost_from != o.target.theta.center {
            vlines.push((params.boost_from, GREEN.to_string()));
        }
    }
    Ok(LinePlot {
        title: "Gain PDF before and after matching, and target".into(),
        x_label: "gain".into(),
        y_label: "density".into(),
        series: vec![
            Series::line("original", BLACK, curve(&original.values)),
            Series::line("target", GREEN, curve(&o.target.values)),
            Series::line("matched", ORANGE, curve(&matched.values)),
        ],
        vlines,
    }
    .render())
}

/// Grouped bars of original (black) and matched (orange) weights.
pub fn portfolio_bars(p: &PortfolioComparison) -> String {
    let n = p.assets.len().max(1);
    let top = p
        .original
        .iter()
        .chain(&p.matched)
        .copied()
        .fold(0.0, f64::max)
        .max(1e-12)
        * 1.05;
    let f = Frame {
        x: (0.0, n as f64),
        y: (0.0, top),
    };
    let mut out = open();
    f.axes(&mut out, "Portfolio shares", "", "share");
    let slot = (W - LEFT - RIGHT) / n as f64;
    for i in 0..p.assets.len() {
        for (k, (v, color)) in [(p.original[i], BLACK), (p.matched[i], ORANGE)].into_iter().enumerate() {
            let x = f.px(i as f64) + slot * (0.15 + 0.35 * k as f64);
            let y = f.py(v);
            let _ = write!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
                slot * 0.33,
                (H - BOTTOM - y).max(0.0)
            );
        }
        let _ = write!(
            out,
            r#"<text x="{:.2}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#,
            f.px(i as f64 + 0.5),
            H - BOTTOM + 32.0,
            esc(&p.assets[i])
        );
    }
    legend(&mut out, &[("conventional", BLACK), ("matched", ORANGE)]);
    out.push_str("</svg>\n");
    out
}

fn shade(t: f64) -> String {
    // White to dark blue.
    let t = t.clamp(0.0, 1.0);
    let c = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(247.0, 8.0), c(251.0, 48.0), c(255.0, 107.0))
}

/// Heatmap of `F(B, a)` with the iso-objective line on top.
pub fn landscape_heatmap(g: &LandscapeGrid<f64>, iso: &IsoLine) -> String {
    let (nb, na) = (g.b_values.len(), g.a_values.len());
    let edges = |v: &[f64]| -> (f64, f64) {
        if v.len() == 1 {
            (v[0] - 0.5, v[0] + 0.5)
        } else {
            let h0 = v[1] - v[0];
            let h1 = v[v.len() - 1] - v[v.len() - 2];
            (v[0] - h0 / 2.0, v[v.len() - 1] + h1 / 2.0)
        }
    };
    let f = Frame {
        x: edges(&g.b_values),
        y: edges(&g.a_values),
    };
    let (lo, hi) = range(g.f.iter().flatten().flatten().copied());
    let mut out = open();
    let half = |v: &[f64], i: usize| -> (f64, f64) {
        let l = if i == 0 { edges(v).0 } else { (v[i - 1] + v[i]) / 2.0 };
        let r = if i + 1 == v.len() { edges(v).1 } else { (v[i] + v[i + 1]) / 2.0 };
        (l, r)
    };
    for i in 0..nb {
        let (bl, br) = half(&g.b_values, i);
        for j in 0..na {
            let (al, ar) = half(&g.a_values, j);
            let fill = match g.f[i][j] {
                Some(v) => shade((v - lo) / (hi - lo)),
                None => "#cccccc".into(),
            };
            let _ = write!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                f.px(bl),
                f.py(ar),
                f.px(br) - f.px(bl),
                f.py(al) - f.py(ar)
            );
        }
    }
    f.axes(&mut out, "Objective landscape F(B, a)", "budget B", "risk aversion a");
    let pts: Vec<String> = iso
        .points
        .iter()
        .map(|p| format!("{:.2},{:.2}", f.px(p.b), f.py(p.a)))
        .collect();
    if !pts.is_empty() {
        let _ = write!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{RED}" stroke-width="2"/>"#,
            pts.join(" ")
        );
    }
    if let Some([b, a]) = iso.baseline {
        let _ = write!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{RED}"/>"#,
            f.px(b),
            f.py(a)
        );
    }
    out.push_str("</svg>\n");
    out
}
