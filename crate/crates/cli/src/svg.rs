//! Just enough SVG for line and bar charts. Output depends only on the
//! input numbers, so identical data renders to identical bytes.

use std::fmt::Write;

pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];
const BAND_FILLS: [&str; 3] = ["#f2f2f2", "#e4ecf7", "#f7ece4"];

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Tick spacing of 1, 2 or 5 times a power of ten, about `n` ticks per span.
fn nice_step(span: f64, n: f64) -> f64 {
    let raw = span / n;
    let mag = 10f64.powf(raw.log10().floor());
    let frac = raw / mag;
    let nice = if frac <= 1.0 {
        1.0
    } else if frac <= 2.0 {
        2.0
    } else if frac <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s.trim_start_matches(['-', '0', '.']).is_empty() {
        s[1..].to_string()
    } else {
        s
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - pad, hi + pad)
    } else {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    log_x: bool,
}

impl Frame {
    fn fx(&self, x: f64) -> f64 {
        let (a, b, v) = if self.log_x {
            (self.x0.log10(), self.x1.log10(), x.max(self.x0).log10())
        } else {
            (self.x0, self.x1, x)
        };
        LEFT + (v - a) / (b - a) * (WIDTH - LEFT - RIGHT)
    }

    fn fy(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        (WIDTH - RIGHT + LEFT) / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str, x_ticks: &[(f64, String)]) {
    let (l, r, t, b) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(out, r#"<rect x="{l}" y="{t}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#, r - l, b - t);
    for (x, label) in x_ticks {
        let px = f.fx(*x);
        let _ = writeln!(out, r#"<line x1="{px:.1}" y1="{b}" x2="{px:.1}" y2="{:.1}" stroke="black"/>"#, b + 5.0);
        let _ = writeln!(out, r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, b + 18.0, escape(label));
    }
    let step = nice_step(f.y1 - f.y0, 5.0);
    let mut y = (f.y0 / step).ceil() * step;
    while y <= f.y1 + step * 1e-9 {
        let py = f.fy(y);
        let _ = writeln!(out, r#"<line x1="{:.1}" y1="{py:.1}" x2="{l}" y2="{py:.1}" stroke="black"/>"#, l - 5.0);
        let _ = writeln!(out, r##"<line x1="{l}" y1="{py:.1}" x2="{r}" y2="{py:.1}" stroke="#dddddd"/>"##);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, l - 8.0, py + 4.0, tick_label(y, step));
        y += step;
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (l + r) / 2.0, HEIGHT - 12.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0:.1}" text-anchor="middle" transform="rotate(-90 16 {0:.1})">{1}</text>"#,
        (t + b) / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, entries: &[(String, &str, bool)]) {
    let x = WIDTH - RIGHT + 15.0;
    for (i, (name, color, dashed)) in entries.iter().enumerate() {
        let y = TOP + 10.0 + i as f64 * 18.0;
        let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(out, r#"<line x1="{x}" y1="{y}" x2="{:.1}" y2="{y}" stroke="{color}" stroke-width="2"{dash}/>"#, x + 24.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, x + 30.0, y + 4.0, escape(name));
    }
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

/// Shaded x-interval with a caption, drawn behind the data.
#[derive(Debug, Clone)]
pub struct Band {
    pub x0: f64,
    pub x1: f64,
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct HLine {
    pub y: f64,
    pub label: String,
}

#[derive(Debug, Clone, Default)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series>,
    pub bands: Vec<Band>,
    pub hlines: Vec<HLine>,
}

impl LineChart {
    pub fn render(&self) -> String {
        let pts = || self.series.iter().flat_map(|s| s.points.iter().copied());
        let xs = pts().map(|p| p.0).filter(|x| x.is_finite() && (!self.log_x || *x > 0.0));
        let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        if !(x0.is_finite() && x1.is_finite()) || x1 <= x0 {
            (x0, x1) = if self.log_x { (1.0, 10.0) } else { (0.0, 1.0) };
        }
        let ys = pts().map(|p| p.1).chain(self.hlines.iter().map(|h| h.y)).filter(|y| y.is_finite());
        let (y_lo, y_hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
        let (y0, y1) = padded(y_lo, y_hi);
        let f = Frame { x0, x1, y0, y1, log_x: self.log_x };

        let x_ticks: Vec<(f64, String)> = if self.log_x {
            let (a, b) = (x0.log10().ceil() as i32, x1.log10().floor() as i32);
            (a..=b).map(|k| (10f64.powi(k), format!("1e{k}"))).collect()
        } else {
            let step = nice_step(x1 - x0, 6.0);
            let mut t = Vec::new();
            let mut x = (x0 / step).ceil() * step;
            while x <= x1 + step * 1e-9 {
                t.push((x, tick_label(x, step)));
                x += step;
            }
            t
        };

        let mut out = String::new();
        header(&mut out, &self.title);
        for (i, band) in self.bands.iter().enumerate() {
            let (a, b) = (f.fx(band.x0.max(x0)), f.fx(band.x1.min(x1)));
            if b <= a {
                continue;
            }
            let _ = writeln!(
                out,
                r#"<rect x="{a:.1}" y="{TOP}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
                b - a,
                HEIGHT - TOP - BOTTOM,
                BAND_FILLS[i % BAND_FILLS.len()]
            );
            let _ = writeln!(
                out,
                r##"<text x="{:.1}" y="{:.1}" text-anchor="middle" fill="#555555">{}</text>"##,
                (a + b) / 2.0,
                TOP + 14.0,
                escape(&band.label)
            );
        }
        axes(&mut out, &f, &self.x_label, &self.y_label, &x_ticks);
        for h in &self.hlines {
            let py = f.fy(h.y);
            let _ = writeln!(
                out,
                r#"<line x1="{LEFT}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="black" stroke-dasharray="2 3"/>"#,
                WIDTH - RIGHT
            );
            let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, WIDTH - RIGHT - 4.0, py - 4.0, escape(&h.label));
        }
        let mut entries = Vec::new();
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let coords: Vec<String> = s
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!self.log_x || *x > 0.0))
                .map(|&(x, y)| format!("{:.1},{:.1}", f.fx(x), f.fy(y)))
                .collect();
            let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                coords.join(" ")
            );
            entries.push((s.name.clone(), color, s.dashed));
        }
        legend(&mut out, &entries);
        out.push_str("</svg>\n");
        out
    }
}

/// Bars with symmetric error bars, one cluster per category.
#[derive(Debug, Clone, Default)]
pub struct BarChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub categories: Vec<String>,
    /// Per group: name and, per category, `(mean, error)` when present.
    pub groups: Vec<(String, Vec<Option<(f64, f64)>>)>,
    pub reference: Option<HLine>,
}

impl BarChart {
    pub fn render(&self) -> String {
        let vals = self.groups.iter().flat_map(|(_, v)| v.iter().flatten());
        let hi = vals
            .clone()
            .map(|&(m, e)| m + e)
            .chain(self.reference.iter().map(|r| r.y))
            .filter(|v| v.is_finite())
            .fold(0.0f64, f64::max);
        let lo = vals.map(|&(m, e)| m - e).filter(|v| v.is_finite()).fold(0.0f64, f64::min);
        let (_, y1) = padded(lo, hi);
        let f = Frame { x0: 0.0, x1: self.categories.len().max(1) as f64, y0: lo.min(0.0), y1, log_x: false };
        let ticks: Vec<(f64, String)> =
            self.categories.iter().enumerate().map(|(i, c)| (i as f64 + 0.5, c.clone())).collect();

        let mut out = String::new();
        header(&mut out, &self.title);
        axes(&mut out, &f, &self.x_label, &self.y_label, &ticks);
        let n_groups = self.groups.len().max(1) as f64;
        let slot = (f.fx(1.0) - f.fx(0.0)) * 0.8 / n_groups;
        let mut entries = Vec::new();
        for (g, (name, values)) in self.groups.iter().enumerate() {
            let color = PALETTE[g % PALETTE.len()];
            for (c, v) in values.iter().enumerate() {
                let Some((mean, err)) = *v else { continue };
                let x = f.fx(c as f64) + (f.fx(1.0) - f.fx(0.0)) * 0.1 + g as f64 * slot;
                let (top, base) = (f.fy(mean.max(0.0)), f.fy(mean.min(0.0)));
                let _ = writeln!(
                    out,
                    r#"<rect x="{x:.1}" y="{top:.1}" width="{:.1}" height="{:.1}" fill="{color}"/>"#,
                    slot * 0.9,
                    base - top
                );
                let cx = x + slot * 0.45;
                let (e0, e1) = (f.fy(mean - err), f.fy(mean + err));
                let _ = writeln!(out, r#"<line x1="{cx:.1}" y1="{e0:.1}" x2="{cx:.1}" y2="{e1:.1}" stroke="black"/>"#);
                for e in [e0, e1] {
                    let _ = writeln!(
                        out,
                        r#"<line x1="{:.1}" y1="{e:.1}" x2="{:.1}" y2="{e:.1}" stroke="black"/>"#,
                        cx - 3.0,
                        cx + 3.0
                    );
                }
            }
            entries.push((name.clone(), color, false));
        }
        if let Some(r) = &self.reference {
            let py = f.fy(r.y);
            let _ = writeln!(
                out,
                r#"<line x1="{LEFT}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="black" stroke-dasharray="6 4"/>"#,
                WIDTH - RIGHT
            );
            entries.push((r.label.clone(), "black", true));
        }
        legend(&mut out, &entries);
        out.push_str("</svg>\n");
        out
    }
}
