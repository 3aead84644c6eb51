//! A stroke font: every character is a set of polylines in the unit box
//! (x to the right, y downwards), drawn with a round pen.

/// Characters the font can draw.
pub const ALPHABET: &str = "0123456789ABCDEHKMPTXY";

type Polyline = &'static [(f64, f64)];

/// Polylines for `ch`, or `None` when the font lacks it.
pub fn strokes(ch: char) -> Option<&'static [Polyline]> {
    let s: &'static [Polyline] = match ch {
        '0' => &[&[(0.3, 0.0), (0.7, 0.0), (1.0, 0.2), (1.0, 0.8), (0.7, 1.0), (0.3, 1.0), (0.0, 0.8), (0.0, 0.2), (0.3, 0.0)]],
        '1' => &[&[(0.15, 0.25), (0.6, 0.0), (0.6, 1.0)], &[(0.2, 1.0), (1.0, 1.0)]],
        '2' => &[&[(0.0, 0.2), (0.3, 0.0), (0.7, 0.0), (1.0, 0.2), (1.0, 0.4), (0.0, 1.0), (1.0, 1.0)]],
        '3' => &[&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)], &[(0.3, 0.5), (1.0, 0.5)]],
        '4' => &[&[(0.75, 1.0), (0.75, 0.0), (0.0, 0.7), (1.0, 0.7)]],
        '5' => &[&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.45), (1.0, 0.45), (1.0, 1.0), (0.0, 1.0)]],
        '6' => &[&[(0.85, 0.0), (0.0, 0.55), (0.0, 1.0), (1.0, 1.0), (1.0, 0.55), (0.0, 0.55)]],
        '7' => &[&[(0.0, 0.0), (1.0, 0.0), (0.35, 1.0)]],
        '8' => &[
            &[(0.5, 0.0), (0.9, 0.25), (0.5, 0.5), (0.1, 0.25), (0.5, 0.0)],
            &[(0.5, 0.5), (1.0, 0.75), (0.5, 1.0), (0.0, 0.75), (0.5, 0.5)],
        ],
        '9' => &[&[(1.0, 0.45), (0.0, 0.45), (0.0, 0.0), (1.0, 0.0), (1.0, 0.45), (0.15, 1.0)]],
        'A' => &[&[(0.0, 1.0), (0.5, 0.0), (1.0, 1.0)], &[(0.25, 0.6), (0.75, 0.6)]],
        'B' => &[
            &[(0.0, 0.5), (0.7, 0.5), (0.9, 0.38), (0.9, 0.12), (0.7, 0.0), (0.0, 0.0), (0.0, 1.0), (0.75, 1.0)],
            &[(0.75, 1.0), (1.0, 0.85), (1.0, 0.65), (0.75, 0.5)],
        ],
        'C' => &[&[(1.0, 0.0), (0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]],
        'D' => &[&[(0.0, 0.0), (0.5, 0.0), (1.0, 0.5), (0.5, 1.0), (0.0, 1.0), (0.0, 0.0)]],
        'E' => &[&[(1.0, 0.0), (0.0, 0.0), (0.0, 1.0), (1.0, 1.0)], &[(0.0, 0.5), (0.65, 0.5)]],
        'H' => &[&[(0.0, 0.0), (0.0, 1.0)], &[(1.0, 0.0), (1.0, 1.0)], &[(0.0, 0.5), (1.0, 0.5)]],
        'K' => &[&[(0.0, 0.0), (0.0, 1.0)], &[(1.0, 0.0), (0.0, 0.6)], &[(0.3, 0.42), (1.0, 1.0)]],
        'M' => &[&[(0.0, 1.0), (0.0, 0.0), (0.5, 0.8), (1.0, 0.0), (1.0, 1.0)]],
        'P' => &[&[(0.0, 1.0), (0.0, 0.0), (1.0, 0.0), (1.0, 0.5), (0.0, 0.5)]],
        'T' => &[&[(0.0, 0.0), (1.0, 0.0)], &[(0.5, 0.0), (0.5, 1.0)]],
        'X' => &[&[(0.0, 0.0), (1.0, 1.0)], &[(1.0, 0.0), (0.0, 1.0)]],
        'Y' => &[&[(0.0, 0.0), (0.5, 0.5), (1.0, 0.0)], &[(0.5, 0.5), (0.5, 1.0)]],
        _ => return None,
    };
    Some(s)
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

/// Whether the point `(x, y)` (pixels, relative to the glyph box's top-left)
/// is inked when `ch` is drawn in a `width` x `height` box with pen width
/// `pen`. The skeleton is inset by half a pen so the ink stays in the box.
pub fn inked(ch: char, x: f64, y: f64, width: f64, height: f64, pen: f64) -> bool {
    let Some(lines) = strokes(ch) else {
        return false;
    };
    let half = pen / 2.0;
    let map = |(u, v): (f64, f64)| (half + u * (width - pen), half + v * (height - pen));
    lines.iter().any(|line| line.windows(2).any(|w| segment_distance((x, y), map(w[0]), map(w[1])) <= half))
}
