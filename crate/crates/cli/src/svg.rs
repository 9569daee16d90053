//! Minimal SVG figures: axes, polylines, bars and text.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f5fa8", "#c0392b", "#2e8b57", "#8e44ad", "#d68910", "#555555"];

#[derive(Clone, Debug, Default)]
pub struct Line {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub lines: Vec<Line>,
    /// `(left, right, height)`.
    pub bars: Vec<(f64, f64, f64)>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool, zero: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = if log { (1.0, 10.0) } else { (0.0, 1.0) };
        }
        if log {
            lo = 10f64.powf(lo.log10().floor());
            hi = 10f64.powf(hi.log10().ceil());
            if hi <= lo {
                hi = lo * 10.0;
            }
        } else {
            if zero {
                lo = lo.min(0.0);
            }
            if hi <= lo {
                hi = lo + 1.0;
            }
            let pad = 0.04 * (hi - lo);
            if !(zero && lo == 0.0) {
                lo -= pad;
            }
            hi += pad;
        }
        Self { lo, hi, log }
    }

    fn unit(&self, v: f64) -> f64 {
        if self.log {
            (v.log10() - self.lo.log10()) / (self.hi.log10() - self.lo.log10())
        } else {
            (v - self.lo) / (self.hi - self.lo)
        }
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.log10().round() as i32, self.hi.log10().round() as i32);
            let step = ((b - a) / 8).max(1);
            (a..=b).step_by(step as usize).map(|e| 10f64.powi(e)).collect()
        } else {
            let raw = (self.hi - self.lo) / 6.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0]
                .iter()
                .map(|m| m * mag)
                .find(|s| *s >= raw)
                .unwrap_or(10.0 * mag);
            let mut t = (self.lo / step).ceil() * step;
            let mut out = Vec::new();
            while t <= self.hi + 1e-9 * step {
                out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
                t += step;
            }
            out
        }
    }
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        let e = v.log10().round() as i32;
        format!("1e{e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" {
            "0".into()
        } else {
            s.to_string()
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Figure {
    pub fn render(&self) -> String {
        let xs = self
            .lines
            .iter()
            .flat_map(|l| l.points.iter().map(|p| p.0))
            .chain(self.bars.iter().flat_map(|b| [b.0, b.1]));
        let x = Axis::fit(xs, self.log_x, false);
        let ys = self
            .lines
            .iter()
            .flat_map(|l| l.points.iter().map(|p| p.1))
            .chain(self.bars.iter().map(|b| b.2));
        let y = Axis::fit(ys, self.log_y, !self.bars.is_empty());
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let px = |v: f64| LEFT + pw * x.unit(v);
        let py = |v: f64| TOP + ph * (1.0 - y.unit(v));

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );

        for &(l, r, h) in &self.bars {
            if !(h.is_finite() && (!self.log_y || h > 0.0)) {
                continue;
            }
            let base = if self.log_y { y.lo } else { 0f64.max(y.lo) };
            let (x0, x1) = (px(l), px(r));
            let (y0, y1) = (py(h), py(base));
            let _ = writeln!(
                s,
                r##"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="#9ab8dc" stroke="#4a78a8" stroke-width="0.5"/>"##,
                (x1 - x0).max(0.0),
                (y1 - y0).max(0.0)
            );
        }

        for t in x.ticks() {
            let p = px(t);
            let _ = writeln!(
                s,
                r##"<line x1="{p:.2}" y1="{TOP}" x2="{p:.2}" y2="{}" stroke="#e4e4e4"/><text x="{p:.2}" y="{}" text-anchor="middle">{}</text>"##,
                TOP + ph,
                TOP + ph + 18.0,
                tick_label(t, x.log)
            );
        }
        for t in y.ticks() {
            let p = py(t);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{p:.2}" x2="{}" y2="{p:.2}" stroke="#e4e4e4"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT + pw,
                LEFT - 6.0,
                p + 4.0,
                tick_label(t, y.log)
            );
        }
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (i, line) in self.lines.iter().enumerate() {
            let colour = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = line
                .points
                .iter()
                .filter(|(a, b)| a.is_finite() && b.is_finite() && (!x.log || *a > 0.0) && (!y.log || *b > 0.0))
                .map(|&(a, b)| format!("{:.2},{:.2}", px(a), py(b)))
                .collect();
            if pts.is_empty() {
                continue;
            }
            let dash = if line.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.6"{dash}/>"#,
                pts.join(" ")
            );
            if !line.label.is_empty() {
                let ly = TOP + 16.0 + 16.0 * i as f64;
                let _ = writeln!(
                    s,
                    r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{colour}" stroke-width="2"{dash}/><text x="{3}" y="{4}">{5}</text>"#,
                    LEFT + pw - 230.0,
                    ly,
                    LEFT + pw - 210.0,
                    LEFT + pw - 204.0,
                    ly + 4.0,
                    escape(&line.label)
                );
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_polylines_and_labels() {
        let fig = Figure {
            title: "t".into(),
            log_x: true,
            log_y: true,
            lines: vec![Line {
                label: "a < b".into(),
                points: vec![(1.0, 1.0), (10.0, 0.1), (100.0, 0.01)],
                dashed: false,
            }],
            ..Default::default()
        };
        let s = fig.render();
        assert!(s.starts_with("<svg"));
        assert!(s.contains("<polyline"));
        assert!(s.contains("a &lt; b"));
        assert!(s.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn linear_ticks_cover_the_range() {
        let a = Axis::fit([0.0, 0.93].into_iter(), false, true);
        let t = a.ticks();
        assert_eq!(t[0], 0.0);
        assert!(*t.last().unwrap() <= a.hi);
        assert!(t.len() >= 4);
    }
}
