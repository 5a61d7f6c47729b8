//! Minimal SVG emission for portraits and scatter plots.

use std::fmt::Write;

/// Maps a data box onto a pixel canvas (y axis pointing up).
#[derive(Debug, Clone, Copy)]
pub struct Canvas {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

impl Canvas {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        let aspect = (y_range.1 - y_range.0) / (x_range.1 - x_range.0);
        let width = 640.0;
        let height = (width * aspect).clamp(200.0, 960.0);
        Canvas { width, height, margin: 30.0, x_range, y_range }
    }

    pub fn px(&self, x: f64) -> f64 {
        self.margin + (x - self.x_range.0) / (self.x_range.1 - self.x_range.0) * (self.width - 2.0 * self.margin)
    }

    pub fn py(&self, y: f64) -> f64 {
        self.height - self.margin - (y - self.y_range.0) / (self.y_range.1 - self.y_range.0) * (self.height - 2.0 * self.margin)
    }

    /// Pixels per data unit along x.
    pub fn x_scale(&self) -> f64 {
        (self.width - 2.0 * self.margin) / (self.x_range.1 - self.x_range.0)
    }
}

pub struct Document {
    canvas: Canvas,
    body: String,
}

impl Document {
    pub fn new(canvas: Canvas, title: &str) -> Self {
        let mut body = String::new();
        let _ = writeln!(
            body,
            r##"<rect x="{m}" y="{m}" width="{w}" height="{h}" fill="white" stroke="#444" stroke-width="1"/>"##,
            m = canvas.margin,
            w = canvas.width - 2.0 * canvas.margin,
            h = canvas.height - 2.0 * canvas.margin
        );
        let _ = writeln!(
            body,
            r##"<text x="{x}" y="{y}" font-family="sans-serif" font-size="13" fill="#222">{t}</text>"##,
            x = canvas.margin,
            y = canvas.margin - 10.0,
            t = escape(title)
        );
        let _ = writeln!(
            body,
            r##"<text x="{x}" y="{y}" font-family="sans-serif" font-size="10" fill="#666">[{:.3}, {:.3}] x [{:.3}, {:.3}]</text>"##,
            canvas.x_range.0,
            canvas.x_range.1,
            canvas.y_range.0,
            canvas.y_range.1,
            x = canvas.margin,
            y = canvas.height - 10.0
        );
        Document { canvas, body }
    }

    pub fn canvas(&self) -> &Canvas {
        &self.canvas
    }

    pub fn line(&mut self, a: [f64; 2], b: [f64; 2], color: &str, width: f64) {
        let c = &self.canvas;
        let _ = writeln!(
            self.body,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="{width}"/>"#,
            c.px(a[0]),
            c.py(a[1]),
            c.px(b[0]),
            c.py(b[1])
        );
    }

    pub fn polyline(&mut self, points: &[[f64; 2]], color: &str, width: f64) {
        if points.len() < 2 {
            return;
        }
        let c = &self.canvas;
        let coords: Vec<String> = points.iter().map(|p| format!("{:.2},{:.2}", c.px(p[0]), c.py(p[1]))).collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{width}"/>"#,
            coords.join(" ")
        );
    }

    pub fn circle(&mut self, p: [f64; 2], r: f64, color: &str) {
        let c = &self.canvas;
        let _ = writeln!(
            self.body,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{r}" fill="{color}"/>"#,
            c.px(p[0]),
            c.py(p[1])
        );
    }

    /// Arrow of pixel length `len` from `p` along the data direction `d`.
    pub fn arrow(&mut self, p: [f64; 2], d: [f64; 2], len: f64, color: &str) {
        let c = self.canvas;
        let (x0, y0) = (c.px(p[0]), c.py(p[1]));
        let (dx, dy) = (d[0], -d[1]);
        let n = (dx * dx + dy * dy).sqrt();
        if n == 0.0 {
            return;
        }
        let (ux, uy) = (dx / n, dy / n);
        let (x1, y1) = (x0 + len * ux, y0 + len * uy);
        let head = 0.35 * len;
        let (lx, ly) = (x1 - head * (ux - 0.5 * uy), y1 - head * (uy + 0.5 * ux));
        let (rx, ry) = (x1 - head * (ux + 0.5 * uy), y1 - head * (uy - 0.5 * ux));
        let _ = writeln!(
            self.body,
            r#"<path d="M{x0:.2},{y0:.2} L{x1:.2},{y1:.2} M{lx:.2},{ly:.2} L{x1:.2},{y1:.2} L{rx:.2},{ry:.2}" stroke="{color}" stroke-width="0.8" fill="none"/>"#
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n{}</svg>\n",
            self.body,
            w = self.canvas.width,
            h = self.canvas.height
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
