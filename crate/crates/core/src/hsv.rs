//! Hexcone RGB <-> HSV with every component normalized to `[0, 1]`.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsvPixel {
    /// Hue in `[0, 1)`; 0 for achromatic pixels.
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

pub fn rgb_to_hsv(rgb: [u8; 3]) -> HsvPixel {
    let [r, g, b] = rgb.map(i32::from);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max as f64 / 255.0;
    let s = if max == 0 { 0.0 } else { delta as f64 / max as f64 };
    if delta == 0 {
        return HsvPixel { h: 0.0, s, v };
    }
    let d = delta as f64;
    let sector = if max == r {
        let x = (g - b) as f64 / d;
        if x < 0.0 {
            x + 6.0
        } else {
            x
        }
    } else if max == g {
        (b - r) as f64 / d + 2.0
    } else {
        (r - g) as f64 / d + 4.0
    };
    let mut h = sector / 6.0;
    if h >= 1.0 {
        h -= 1.0;
    }
    HsvPixel { h, s, v }
}

/// Inverse of [`rgb_to_hsv`], rounding each channel to the nearest integer.
pub fn hsv_to_rgb(hsv: HsvPixel) -> [u8; 3] {
    let h = hsv.h.rem_euclid(1.0) * 6.0;
    let s = hsv.s.clamp(0.0, 1.0);
    let v = hsv.v.clamp(0.0, 1.0);
    let sector = (h.floor() as i32).rem_euclid(6);
    let f = h - h.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    let (r, g, b) = match sector {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [r, g, b].map(|x| (x * 255.0).round().clamp(0.0, 255.0) as u8)
}
