//! Topology-preserving two-subiteration thinning.
//!
//! Each subiteration marks contour pixels with the classic directional
//! tests, then deletes the marks one by one, re-checking at deletion time
//! that the pixel is still simple (Yokoi 8-connectivity number 1) and not
//! an end point. Deleting only simple pixels keeps the number of 8-connected
//! components and of background holes unchanged. A final sweep removes
//! simple pixels from any remaining 2x2 block so strokes are one pixel wide.

use crate::raster::BinaryImage;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    pub pixels: BinaryImage,
}

/// Neighbours counter-clockwise from east: E, NE, N, NW, W, SW, S, SE.
fn ring(img: &BinaryImage, r: usize, c: usize) -> [u8; 8] {
    const STEPS: [(isize, isize); 8] = [(0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1)];
    STEPS.map(|(dr, dc)| img.get_or(r as isize + dr, c as isize + dc, 0))
}

/// Yokoi connectivity number for 8-connected foreground.
fn yokoi8(x: &[u8; 8]) -> i32 {
    let inv = |k: usize| 1 - x[k % 8] as i32;
    [0, 2, 4, 6].iter().map(|&k| inv(k) - inv(k) * inv(k + 1) * inv(k + 2)).sum()
}

fn deletable(img: &BinaryImage, r: usize, c: usize) -> bool {
    let x = ring(img, r, c);
    let b: u8 = x.iter().sum();
    (2..=6).contains(&b) && yokoi8(&x) == 1
}

fn directional(img: &BinaryImage, r: usize, c: usize, first: bool) -> bool {
    let x = ring(img, r, c);
    let (e, n, w, s) = (x[0], x[2], x[4], x[6]);
    if first {
        n * e * s == 0 && e * s * w == 0
    } else {
        n * e * w == 0 && n * s * w == 0
    }
}

fn subiteration(img: &mut BinaryImage, first: bool) -> bool {
    let mut marked = Vec::new();
    for r in 0..img.height() {
        for c in 0..img.width() {
            if img.is_set(r, c) && deletable(img, r, c) && directional(img, r, c, first) {
                marked.push((r, c));
            }
        }
    }
    let mut changed = false;
    for (r, c) in marked {
        if deletable(img, r, c) {
            img.set(r, c, false);
            changed = true;
        }
    }
    changed
}

fn clear_blocks(img: &mut BinaryImage) -> bool {
    let mut changed = false;
    for r in 0..img.height().saturating_sub(1) {
        for c in 0..img.width().saturating_sub(1) {
            let block = [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)];
            if block.iter().all(|&(br, bc)| img.is_set(br, bc)) {
                if let Some(&(br, bc)) = block.iter().find(|&&(br, bc)| deletable(img, br, bc)) {
                    img.set(br, bc, false);
                    changed = true;
                }
            }
        }
    }
    changed
}

pub fn thin(glyph: &BinaryImage) -> Skeleton {
    let mut img = glyph.clone();
    loop {
        let a = subiteration(&mut img, true);
        let b = subiteration(&mut img, false);
        if !(a || b) && !clear_blocks(&mut img) {
            break;
        }
    }
    Skeleton { pixels: img }
}

/// Whether any 2x2 block of set pixels remains.
pub fn has_block(img: &BinaryImage) -> bool {
    (0..img.height().saturating_sub(1)).any(|r| {
        (0..img.width().saturating_sub(1))
            .any(|c| img.is_set(r, c) && img.is_set(r, c + 1) && img.is_set(r + 1, c) && img.is_set(r + 1, c + 1))
    })
}
