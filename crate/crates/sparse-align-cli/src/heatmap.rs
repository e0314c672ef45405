//! Plan heatmaps: a character grid and a self-contained SVG, both shading
//! cells by mass with active cells marked.

use sparse_align::ot::TransportPlan;

const RAMP: &[u8] = b" .:-=+*%";

/// One character per cell: active cells (mass > lambda) are `#`, the rest
/// shade with mass relative to the largest entry.
pub fn text_heatmap(p: &TransportPlan, lambda: f64) -> String {
    let max = p.values().iter().copied().fold(0.0, f64::max);
    let mut out = String::with_capacity((p.cols() + 1) * p.rows());
    for i in 0..p.rows() {
        for j in 0..p.cols() {
            let v = p.value(i, j);
            let ch = if v > lambda {
                '#'
            } else if max > 0.0 {
                let idx = ((v / max) * (RAMP.len() - 1) as f64).round() as usize;
                RAMP[idx.min(RAMP.len() - 1)] as char
            } else {
                ' '
            };
            out.push(ch);
        }
        out.push('\n');
    }
    out
}

/// Static SVG: one rect per cell, darker fill for more mass, active cells
/// outlined.
pub fn svg_heatmap(p: &TransportPlan, lambda: f64) -> String {
    const CELL: usize = 14;
    const PAD: usize = 2;
    let (n, m) = (p.rows(), p.cols());
    let w = m * CELL + 2 * PAD;
    let h = n * CELL + 2 * PAD;
    let max = p.values().iter().copied().fold(0.0, f64::max);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    );
    for i in 0..n {
        for j in 0..m {
            let v = p.value(i, j);
            let intensity = if max > 0.0 { v / max } else { 0.0 };
            let shade = (240.0 - intensity * 190.0).round() as u8;
            let x = PAD + j * CELL;
            let y = PAD + i * CELL;
            let stroke = if v > lambda {
                " stroke=\"#d62728\" stroke-width=\"2\""
            } else {
                ""
            };
            s.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" \
                 fill=\"rgb({shade},{shade},255)\"{stroke}/>\n"
            ));
        }
    }
    s.push_str("</svg>\n");
    s
}
