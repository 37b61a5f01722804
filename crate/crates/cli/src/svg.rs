//! Minimal SVG writer: panels with linear axes, lines, bands, rectangles
//! and text. Enough for the report plots without a plotting dependency.

use std::fmt::Write;

pub const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Sequential colour map from dark blue through teal to yellow, `t` in [0, 1].
pub fn heat(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 4] = [(68.0, 1.0, 84.0), (49.0, 104.0, 142.0), (53.0, 183.0, 121.0), (253.0, 231.0, 37.0)];
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Range of the finite values, padded by 5% and widened when degenerate.
pub fn extent(values: impl IntoIterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return None;
    }
    if hi - lo < 1e-12 {
        let pad = if lo.abs() > 1e-12 { lo.abs() * 0.1 } else { 1.0 };
        return Some((lo - pad, hi + pad));
    }
    let pad = (hi - lo) * 0.05;
    Some((lo - pad, hi + pad))
}

/// About `n` round tick positions inside `[lo, hi]`.
pub fn ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let raw = (hi - lo) / n.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.abs() >= 1e4 || v.abs() < 1e-3 {
        return format!("{v:.1e}");
    }
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub struct Canvas {
    pub width: f64,
    pub height: f64,
    body: String,
}

impl Canvas {
    pub fn new(width: f64, height: f64) -> Canvas {
        Canvas {
            width,
            height,
            body: String::new(),
        }
    }

    pub fn text(&mut self, x: f64, y: f64, s: &str, anchor: &str, size: f64) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-size="{size}">{}</text>"#,
            escape(s)
        );
    }

    pub fn legend(&mut self, x: f64, y: f64, items: &[(String, &str)]) {
        for (i, (label, c)) in items.iter().enumerate() {
            let yy = y + 16.0 * i as f64;
            let _ = writeln!(
                self.body,
                r#"<rect x="{x:.2}" y="{:.2}" width="12" height="10" fill="{c}"/>"#,
                yy - 9.0
            );
            self.text(x + 16.0, yy, label, "start", 11.0);
        }
    }

    pub fn panel(&mut self, ox: f64, oy: f64, w: f64, h: f64, x: (f64, f64), y: (f64, f64)) -> Panel<'_> {
        Panel {
            canvas: self,
            ox,
            oy,
            w,
            h,
            x,
            y,
        }
    }

    pub fn finish(self) -> String {
        format!(
            concat!(
                r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#,
                "\n",
                r#"<rect width="100%" height="100%" fill="white"/>"#,
                "\n{body}</svg>\n"
            ),
            w = self.width,
            h = self.height,
            body = self.body
        )
    }
}

/// Plot area at `(ox, oy)` of size `w` by `h` mapping data ranges `x`, `y`.
pub struct Panel<'a> {
    canvas: &'a mut Canvas,
    ox: f64,
    oy: f64,
    w: f64,
    h: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Panel<'_> {
    pub fn px(&self, x: f64) -> f64 {
        self.ox + (x - self.x.0) / (self.x.1 - self.x.0) * self.w
    }

    pub fn py(&self, y: f64) -> f64 {
        self.oy + self.h - (y - self.y.0) / (self.y.1 - self.y.0) * self.h
    }

    pub fn title(&mut self, s: &str) {
        let (x, y) = (self.ox + self.w / 2.0, self.oy - 8.0);
        self.canvas.text(x, y, s, "middle", 13.0);
    }

    /// Frame, ticks and axis labels. Either tick list may be replaced by
    /// categorical labels through [`Panel::y_labels`].
    pub fn axes(&mut self, x_label: &str, y_label: &str, x_ticks: bool, y_ticks: bool) {
        let (ox, oy, w, h) = (self.ox, self.oy, self.w, self.h);
        let _ = writeln!(
            self.canvas.body,
            r##"<rect x="{ox:.2}" y="{oy:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="#444"/>"##
        );
        if x_ticks {
            for t in ticks(self.x.0, self.x.1, 5) {
                let x = self.px(t);
                let _ = writeln!(
                    self.canvas.body,
                    r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444"/>"##,
                    oy + h,
                    oy + h + 4.0
                );
                self.canvas.text(x, oy + h + 16.0, &fmt_tick(t), "middle", 10.0);
            }
        }
        if y_ticks {
            for t in ticks(self.y.0, self.y.1, 5) {
                let y = self.py(t);
                let _ = writeln!(
                    self.canvas.body,
                    r##"<line x1="{:.2}" y1="{y:.2}" x2="{ox:.2}" y2="{y:.2}" stroke="#444"/>"##,
                    ox - 4.0
                );
                self.canvas.text(ox - 6.0, y + 3.5, &fmt_tick(t), "end", 10.0);
            }
        }
        self.canvas.text(ox + w / 2.0, oy + h + 32.0, x_label, "middle", 11.0);
        if !y_label.is_empty() {
            let (x, y) = (ox - 42.0, oy + h / 2.0);
            let _ = writeln!(
                self.canvas.body,
                r#"<text x="{x:.2}" y="{y:.2}" text-anchor="middle" font-size="11" transform="rotate(-90 {x:.2} {y:.2})">{}</text>"#,
                escape(y_label)
            );
        }
    }

    /// Labels at data coordinates on the vertical axis.
    pub fn y_labels(&mut self, labels: &[(f64, String)]) {
        for (v, s) in labels {
            let y = self.py(*v);
            let x = self.ox - 6.0;
            self.canvas.text(x, y + 3.5, s, "end", 10.0);
        }
    }

    pub fn x_labels(&mut self, labels: &[(f64, String)]) {
        for (v, s) in labels {
            let x = self.px(*v);
            let y = self.oy + self.h + 16.0;
            self.canvas.text(x, y, s, "middle", 10.0);
        }
    }

    /// Polyline through the points; non-finite values split it into pieces.
    pub fn line(&mut self, pts: &[(f64, f64)], color: &str) {
        for run in pts.split(|(x, y)| !(x.is_finite() && y.is_finite())) {
            if run.is_empty() {
                continue;
            }
            let coords: Vec<String> = run.iter().map(|(x, y)| format!("{:.2},{:.2}", self.px(*x), self.py(*y))).collect();
            let _ = writeln!(
                self.canvas.body,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
                coords.join(" ")
            );
            for (x, y) in run {
                let _ = writeln!(
                    self.canvas.body,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2.2" fill="{color}"/>"#,
                    self.px(*x),
                    self.py(*y)
                );
            }
        }
    }

    /// Shaded area between `lo` and `hi` over `xs`, split at non-finite values.
    pub fn band(&mut self, xs: &[f64], lo: &[f64], hi: &[f64], color: &str) {
        let ok: Vec<bool> = (0..xs.len()).map(|i| xs[i].is_finite() && lo[i].is_finite() && hi[i].is_finite()).collect();
        let mut i = 0;
        while i < xs.len() {
            if !ok[i] {
                i += 1;
                continue;
            }
            let start = i;
            while i < xs.len() && ok[i] {
                i += 1;
            }
            let mut coords: Vec<String> = (start..i).map(|k| format!("{:.2},{:.2}", self.px(xs[k]), self.py(hi[k]))).collect();
            coords.extend((start..i).rev().map(|k| format!("{:.2},{:.2}", self.px(xs[k]), self.py(lo[k]))));
            let _ = writeln!(
                self.canvas.body,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                coords.join(" ")
            );
        }
    }

    /// Filled rectangle between two data-space corners.
    pub fn rect(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, fill: &str) {
        let (a, b) = (self.px(x0), self.px(x1));
        let (c, d) = (self.py(y0), self.py(y1));
        let _ = writeln!(
            self.canvas.body,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
            a.min(b),
            c.min(d),
            (b - a).abs(),
            (d - c).abs()
        );
    }

    pub fn vline(&mut self, x: f64, dashed: bool) {
        let px = self.px(x);
        let dash = if dashed { r#" stroke-dasharray="4 3""# } else { "" };
        let _ = writeln!(
            self.canvas.body,
            r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#888"{dash}/>"##,
            self.oy,
            self.oy + self.h
        );
    }

    /// Horizontal interval at row `y` with a tick at the estimate.
    pub fn interval(&mut self, y: f64, half_height: f64, lo: f64, est: f64, hi: f64, color: &str) {
        let _ = writeln!(
            self.canvas.body,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.35"/>"#,
            self.px(lo),
            self.py(y) - half_height,
            (self.px(hi) - self.px(lo)).max(1.0),
            2.0 * half_height
        );
        let x = self.px(est);
        let _ = writeln!(
            self.canvas.body,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}" stroke-width="2.5"/>"#,
            self.py(y) - half_height,
            self.py(y) + half_height
        );
    }
}
