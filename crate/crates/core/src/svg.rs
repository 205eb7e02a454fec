//! Minimal deterministic SVG rendering for curves, scatters and line plots.
//!
//! Everything is emitted as plain `<polygon>`/`<polyline>`/`<circle>`
//! elements with fixed-precision coordinates, so identical inputs produce
//! byte-identical files.

use nalgebra::Vector2;

use crate::contour::Contour;

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

/// Bounding box of a set of points.
fn bounds(points: impl Iterator<Item = Vector2<f64>>) -> (f64, f64, f64, f64) {
    let mut min_x = f64::INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for p in points {
        min_x = min_x.min(p.x);
        min_y = min_y.min(p.y);
        max_x = max_x.max(p.x);
        max_y = max_y.max(p.y);
    }
    if !min_x.is_finite() {
        (0.0, 0.0, 1.0, 1.0)
    } else {
        (min_x, min_y, max_x, max_y)
    }
}

/// Affine placement of a unit-ish shape into a cell of the canvas.
struct Cell {
    cx: f64,
    cy: f64,
    scale: f64,
}

impl Cell {
    fn place(&self, p: Vector2<f64>, center: Vector2<f64>) -> (f64, f64) {
        // SVG y axis points down; flip so shapes render upright.
        (
            self.cx + (p.x - center.x) * self.scale,
            self.cy - (p.y - center.y) * self.scale,
        )
    }
}

fn polygon(points: &[(f64, f64)], stroke: &str, width: f64, fill: &str) -> String {
    let coords: Vec<String> = points
        .iter()
        .map(|(x, y)| format!("{},{}", fmt(*x), fmt(*y)))
        .collect();
    format!(
        "<polygon points=\"{}\" fill=\"{fill}\" stroke=\"{stroke}\" stroke-width=\"{}\"/>",
        coords.join(" "),
        fmt(width)
    )
}

fn svg_document(width: f64, height: f64, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n{body}</svg>\n",
        w = fmt(width),
        h = fmt(height),
    )
}

fn text(x: f64, y: f64, size: f64, content: &str) -> String {
    format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"{}\">{}</text>\n",
        fmt(x),
        fmt(y),
        fmt(size),
        content
    )
}

/// One row of closed curves per entry, each annotated with a label; used for
/// geodesic paths (waypoints left to right) and principal-direction sweeps.
pub fn curve_rows(rows: &[(String, Vec<Contour>)]) -> String {
    let cell = 110.0;
    let pad = 10.0;
    let label_h = 22.0;
    let cols = rows.iter().map(|(_, cs)| cs.len()).max().unwrap_or(1);
    let width = pad * 2.0 + cols as f64 * cell;
    let height = rows.len() as f64 * (cell + label_h) + pad * 2.0;

    let mut body = String::new();
    for (r, (label, curves)) in rows.iter().enumerate() {
        let top = pad + r as f64 * (cell + label_h);
        body.push_str(&text(pad, top + 14.0, 12.0, label));
        for (c, curve) in curves.iter().enumerate() {
            let (min_x, min_y, max_x, max_y) = bounds(curve.points().iter().copied());
            let extent = (max_x - min_x).max(max_y - min_y).max(1e-9);
            let placement = Cell {
                cx: pad + c as f64 * cell + cell / 2.0,
                cy: top + label_h + cell / 2.0,
                scale: (cell * 0.42) / (extent / 2.0 + extent * 0.05),
            };
            let center = Vector2::new((min_x + max_x) / 2.0, (min_y + max_y) / 2.0);
            let pts: Vec<(f64, f64)> = curve
                .points()
                .iter()
                .map(|&p| placement.place(p, center))
                .collect();
            body.push_str(&polygon(&pts, "#1f4e8c", 1.2, "none"));
            body.push('\n');
        }
    }
    svg_document(width, height, &body)
}

/// Overlay of closed curves in given colors on one canvas (e.g. a true shape
/// in blue and its reconstruction in red).
pub fn curve_overlay(curves: &[(&Contour, &str)], title: &str) -> String {
    let size = 260.0;
    let pad = 24.0;
    let all = curves
        .iter()
        .flat_map(|(c, _)| c.points().iter().copied());
    let (min_x, min_y, max_x, max_y) = bounds(all);
    let extent = (max_x - min_x).max(max_y - min_y).max(1e-9);
    let placement = Cell {
        cx: size / 2.0,
        cy: size / 2.0 + 8.0,
        scale: (size - 2.0 * pad) / (extent * 1.1),
    };
    let center = Vector2::new((min_x + max_x) / 2.0, (min_y + max_y) / 2.0);

    let mut body = text(pad, 18.0, 12.0, title);
    for (curve, color) in curves {
        let pts: Vec<(f64, f64)> = curve
            .points()
            .iter()
            .map(|&p| placement.place(p, center))
            .collect();
        body.push_str(&polygon(&pts, color, 1.4, "none"));
        body.push('\n');
    }
    svg_document(size, size + 10.0, &body)
}

/// Scatter plot of 2-D embedding coordinates colored by cluster
/// (cluster 1 blue, cluster 2 red, further clusters green/orange).
pub fn scatter(coords: &[Vec<f64>], labels: &[usize], title: &str) -> String {
    const COLORS: [&str; 4] = ["#1f4e8c", "#c23b22", "#2e8b57", "#d98e04"];
    let size = 360.0;
    let pad = 36.0;
    let pts: Vec<Vector2<f64>> = coords
        .iter()
        .map(|c| Vector2::new(c.first().copied().unwrap_or(0.0), c.get(1).copied().unwrap_or(0.0)))
        .collect();
    let (min_x, min_y, max_x, max_y) = bounds(pts.iter().copied());
    let extent = (max_x - min_x).max(max_y - min_y).max(1e-9);
    let placement = Cell {
        cx: size / 2.0,
        cy: size / 2.0,
        scale: (size - 2.0 * pad) / (extent * 1.1),
    };
    let center = Vector2::new((min_x + max_x) / 2.0, (min_y + max_y) / 2.0);

    let mut body = text(pad, 20.0, 13.0, title);
    for (p, &label) in pts.iter().zip(labels) {
        let (x, y) = placement.place(*p, center);
        let color = COLORS[(label.saturating_sub(1)) % COLORS.len()];
        body.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{color}\"/>\n",
            fmt(x),
            fmt(y)
        ));
    }
    svg_document(size, size, &body)
}

/// Enrichment line plot: probabilities per covariate with red rule lines at
/// the 0.25 and 0.75 enrichment cutoffs.
pub fn enrichment_lines(names: &[String], probabilities: &[f64], title: &str) -> String {
    let width = 120.0 + names.len().max(1) as f64 * 70.0;
    let height = 300.0;
    let (left, right, top, bottom) = (60.0, width - 20.0, 40.0, height - 60.0);
    let x_at = |i: usize| {
        if names.len() <= 1 {
            (left + right) / 2.0
        } else {
            left + (right - left) * i as f64 / (names.len() - 1) as f64
        }
    };
    let y_at = |p: f64| bottom - (bottom - top) * p;

    let mut body = text(left, 22.0, 13.0, title);
    // Axis and cutoff rules.
    body.push_str(&format!(
        "<line x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"#333333\" stroke-width=\"1\"/>\n",
        l = fmt(left),
        r = fmt(right),
        b = fmt(bottom)
    ));
    for (p, label) in [(0.25, "0.25"), (0.75, "0.75")] {
        body.push_str(&format!(
            "<line x1=\"{l}\" y1=\"{y}\" x2=\"{r}\" y2=\"{y}\" stroke=\"#c23b22\" stroke-width=\"1\" stroke-dasharray=\"4 3\"/>\n",
            l = fmt(left),
            r = fmt(right),
            y = fmt(y_at(p))
        ));
        body.push_str(&text(right + 2.0 - 26.0, y_at(p) - 4.0, 10.0, label));
    }
    // Poly-line through the probabilities.
    if !probabilities.is_empty() {
        let coords: Vec<String> = probabilities
            .iter()
            .enumerate()
            .map(|(i, &p)| format!("{},{}", fmt(x_at(i)), fmt(y_at(p))))
            .collect();
        body.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f4e8c\" stroke-width=\"1.5\"/>\n",
            coords.join(" ")
        ));
    }
    for (i, (name, &p)) in names.iter().zip(probabilities).enumerate() {
        body.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"3.5\" fill=\"#1f4e8c\"/>\n",
            fmt(x_at(i)),
            fmt(y_at(p))
        ));
        body.push_str(&text(x_at(i) - 18.0, bottom + 18.0, 10.0, name));
    }
    svg_document(width, height, &body)
}
