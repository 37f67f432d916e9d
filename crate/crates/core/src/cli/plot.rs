//! Minimal deterministic SVG output for scatter, trajectory, and curve plots.
//!
//! Output is plain SVG text with fixed formatting so re-running a plot on the
//! same input produces a byte-identical file.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;

const PALETTE: &[&str] = &[
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn from_points<'a, I: Iterator<Item = (f64, f64)>>(points: I) -> Frame
    where
        I: 'a,
    {
        let mut f = Frame {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for (x, y) in points {
            f.x_min = f.x_min.min(x);
            f.x_max = f.x_max.max(x);
            f.y_min = f.y_min.min(y);
            f.y_max = f.y_max.max(y);
        }
        if !f.x_min.is_finite() {
            f = Frame { x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 };
        }
        if f.x_max - f.x_min < 1e-12 {
            f.x_min -= 0.5;
            f.x_max += 0.5;
        }
        if f.y_max - f.y_min < 1e-12 {
            f.y_min -= 0.5;
            f.y_max += 0.5;
        }
        f
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(
        s,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );
    s
}

fn axes(s: &mut String, f: &Frame) {
    let _ = writeln!(
        s,
        "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#333\"/>",
        MARGIN,
        MARGIN,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">{:.3}..{:.3}</text>",
        MARGIN,
        HEIGHT - MARGIN + 16.0,
        f.x_min,
        f.x_max
    );
    let _ = writeln!(
        s,
        "<text x=\"4\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">{:.3}..{:.3}</text>",
        MARGIN,
        f.y_min,
        f.y_max
    );
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn color_for(index: usize) -> &'static str {
    PALETTE[index % PALETTE.len()]
}

/// Scatter plot of labeled 2-D points. Points beyond the first two
/// coordinates are projected onto the first two.
pub fn scatter(title: &str, groups: &[(String, Vec<(f64, f64)>)]) -> String {
    let frame = Frame::from_points(groups.iter().flat_map(|(_, pts)| pts.iter().copied()));
    let mut s = header(title);
    axes(&mut s, &frame);
    for (gi, (label, pts)) in groups.iter().enumerate() {
        let color = color_for(gi);
        for &(x, y) in pts {
            let _ = writeln!(
                s,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.2\" fill=\"{}\" fill-opacity=\"0.7\"/>",
                frame.px(x),
                frame.py(y),
                color
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{}\">{}</text>",
            WIDTH - MARGIN + 4.0,
            MARGIN + 14.0 * (gi as f64 + 1.0),
            color,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Polylines through (x, y) vertices, one per trajectory.
pub fn trajectories(title: &str, lines: &[Vec<(f64, f64)>]) -> String {
    let frame = Frame::from_points(lines.iter().flat_map(|l| l.iter().copied()));
    let mut s = header(title);
    axes(&mut s, &frame);
    for (li, line) in lines.iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut d = String::new();
        for (i, &(x, y)) in line.iter().enumerate() {
            let cmd = if i == 0 { 'M' } else { 'L' };
            let _ = write!(d, "{cmd}{:.2},{:.2} ", frame.px(x), frame.py(y));
        }
        let _ = writeln!(
            s,
            "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\" stroke-opacity=\"0.8\"/>",
            d.trim_end(),
            color_for(li)
        );
        let &(x0, y0) = line.first().unwrap();
        let &(x1, y1) = line.last().unwrap();
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.0\" fill=\"#333\"/>",
            frame.px(x0),
            frame.py(y0)
        );
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.6\" fill=\"{}\"/>",
            frame.px(x1),
            frame.py(y1),
            color_for(li)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Line chart: one series per (label, points) entry, markers at vertices.
pub fn curves(title: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let frame = Frame::from_points(series.iter().flat_map(|(_, pts)| pts.iter().copied()));
    let mut s = header(title);
    axes(&mut s, &frame);
    for (si, (label, pts)) in series.iter().enumerate() {
        let color = color_for(si);
        let mut d = String::new();
        for (i, &(x, y)) in pts.iter().enumerate() {
            let cmd = if i == 0 { 'M' } else { 'L' };
            let _ = write!(d, "{cmd}{:.2},{:.2} ", frame.px(x), frame.py(y));
        }
        let _ = writeln!(
            s,
            "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\"/>",
            d.trim_end(),
            color
        );
        for &(x, y) in pts {
            let _ = writeln!(
                s,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{}\"/>",
                frame.px(x),
                frame.py(y),
                color
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{}\">{}</text>",
            WIDTH - MARGIN + 4.0,
            MARGIN + 14.0 * (si as f64 + 1.0),
            color,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}
