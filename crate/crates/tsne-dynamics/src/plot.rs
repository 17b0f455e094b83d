//! Self-contained SVG scatter plots of 2-D embeddings. Output bytes are a
//! pure function of the input: fixed viewport, fixed palette, fixed number
//! formatting.

use crate::Result;
use std::path::Path;

/// Ten-color palette, cycled by label.
pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_FRACTION: f64 = 0.05;
const RADIUS: f64 = 3.0;

struct Viewport {
    x0: f64,
    y0: f64,
    sx: f64,
    sy: f64,
}

impl Viewport {
    /// Autoscale with a 5% margin on each side; degenerate spans fall back
    /// to a unit box around the data.
    fn fit(coords: &[[f64; 2]]) -> Viewport {
        let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
        for c in coords {
            xmin = xmin.min(c[0]);
            xmax = xmax.max(c[0]);
            ymin = ymin.min(c[1]);
            ymax = ymax.max(c[1]);
        }
        if coords.is_empty() {
            (xmin, xmax, ymin, ymax) = (0.0, 1.0, 0.0, 1.0);
        }
        if xmax - xmin <= 0.0 {
            xmin -= 0.5;
            xmax += 0.5;
        }
        if ymax - ymin <= 0.0 {
            ymin -= 0.5;
            ymax += 0.5;
        }
        let mx = (xmax - xmin) * MARGIN_FRACTION;
        let my = (ymax - ymin) * MARGIN_FRACTION;
        xmin -= mx;
        xmax += mx;
        ymin -= my;
        ymax += my;
        Viewport {
            x0: xmin,
            y0: ymin,
            sx: WIDTH / (xmax - xmin),
            sy: HEIGHT / (ymax - ymin),
        }
    }

    fn map(&self, c: &[f64; 2]) -> (f64, f64) {
        // SVG y grows downward.
        (
            (c[0] - self.x0) * self.sx,
            HEIGHT - (c[1] - self.y0) * self.sy,
        )
    }
}

fn header(out: &mut String) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n"
    ));
}

/// Render one scatter plot to an SVG string: one circle per point, colors
/// cycling through [`PALETTE`] by label (all points the first color when no
/// labels are given).
pub fn render_svg_string(coords: &[[f64; 2]], labels: Option<&[usize]>) -> String {
    let vp = Viewport::fit(coords);
    let mut out = String::new();
    header(&mut out);
    for (i, c) in coords.iter().enumerate() {
        let (x, y) = vp.map(c);
        let color = match labels {
            Some(ls) => PALETTE[ls[i] % PALETTE.len()],
            None => PALETTE[0],
        };
        out.push_str(&format!(
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{RADIUS}\" fill=\"{color}\"/>\n"
        ));
    }
    out.push_str("</svg>\n");
    out
}

/// Write a scatter plot to a file.
pub fn render_svg(
    coords: &[[f64; 2]],
    labels: Option<&[usize]>,
    path: impl AsRef<Path>,
) -> Result<()> {
    std::fs::write(path, render_svg_string(coords, labels))?;
    Ok(())
}

/// Overlay two maps in one frame: the first drawn as filled circles, the
/// second as hollow circles. The viewport fits both point sets.
pub fn render_overlay_svg_string(filled: &[[f64; 2]], hollow: &[[f64; 2]]) -> String {
    let mut all = filled.to_vec();
    all.extend_from_slice(hollow);
    let vp = Viewport::fit(&all);
    let mut out = String::new();
    header(&mut out);
    for c in filled {
        let (x, y) = vp.map(c);
        out.push_str(&format!(
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{RADIUS}\" fill=\"{}\"/>\n",
            PALETTE[0]
        ));
    }
    for c in hollow {
        let (x, y) = vp.map(c);
        out.push_str(&format!(
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{RADIUS}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
            PALETTE[3]
        ));
    }
    out.push_str("</svg>\n");
    out
}

pub fn render_overlay_svg(
    filled: &[[f64; 2]],
    hollow: &[[f64; 2]],
    path: impl AsRef<Path>,
) -> Result<()> {
    std::fs::write(path, render_overlay_svg_string(filled, hollow))?;
    Ok(())
}
