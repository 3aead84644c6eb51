//! Two-pass connected-component labeling with union-find.

use crate::raster::{BinaryImage, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    /// 1-based label.
    pub label: u32,
    pub bbox: Rect,
    pub area: usize,
    /// `(row, col)` mean of the member pixels.
    pub centroid: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRegions {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    regions: Vec<Region>,
}

impl LabeledRegions {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Label raster; 0 is background.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label_at(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn count(&self) -> usize {
        self.regions.len()
    }

    pub fn region(&self, label: u32) -> Option<&Region> {
        label.checked_sub(1).and_then(|i| self.regions.get(i as usize))
    }

    /// Mask of one component over `rect` (usually its bounding box).
    pub fn mask(&self, label: u32, rect: Rect) -> BinaryImage {
        BinaryImage::from_fn(rect.width(), rect.height(), |r, c| {
            self.label_at(rect.row0 + r, rect.col0 + c) == label
        })
        .expect("rect is non-empty")
    }

    /// Label raster scaled for PGM dumps.
    pub fn to_u8(&self) -> Vec<u8> {
        let k = self.regions.len().max(1) as f64;
        self.labels
            .iter()
            .map(|&l| if l == 0 { 0 } else { (55.0 + 200.0 * l as f64 / k).round() as u8 })
            .collect()
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let up = parent[parent[x as usize] as usize];
        parent[x as usize] = up;
        x = up;
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

/// Labels maximal connected foreground regions; labels follow the order in
/// which each component is first met in a raster scan.
pub fn label_components(img: &BinaryImage, connectivity: Connectivity) -> LabeledRegions {
    let (w, h) = (img.width(), img.height());
    let px = img.pixels();
    let mut prov = vec![0u32; w * h];
    // parent[0] is a dummy so provisional labels can start at 1.
    let mut parent: Vec<u32> = vec![0];
    for r in 0..h {
        for c in 0..w {
            if px[r * w + c] == 0 {
                continue;
            }
            let mut neighbours = [0u32; 4];
            let mut n = 0;
            let mut push = |l: u32| {
                if l != 0 {
                    neighbours[n] = l;
                    n += 1;
                }
            };
            if c > 0 {
                push(prov[r * w + c - 1]);
            }
            if r > 0 {
                push(prov[(r - 1) * w + c]);
                if connectivity == Connectivity::Eight {
                    if c > 0 {
                        push(prov[(r - 1) * w + c - 1]);
                    }
                    if c + 1 < w {
                        push(prov[(r - 1) * w + c + 1]);
                    }
                }
            }
            let label = if n == 0 {
                let l = parent.len() as u32;
                parent.push(l);
                l
            } else {
                let l = neighbours[..n].iter().copied().min().unwrap_or(0);
                for &o in &neighbours[..n] {
                    union(&mut parent, l, o);
                }
                l
            };
            prov[r * w + c] = label;
        }
    }

    let mut remap = vec![0u32; parent.len()];
    let mut next = 0u32;
    let mut sums: Vec<(usize, f64, f64, Rect)> = Vec::new();
    let mut labels = vec![0u32; w * h];
    for r in 0..h {
        for c in 0..w {
            let p = prov[r * w + c];
            if p == 0 {
                continue;
            }
            let root = find(&mut parent, p) as usize;
            if remap[root] == 0 {
                next += 1;
                remap[root] = next;
                sums.push((0, 0.0, 0.0, Rect::new(r, c, r, c)));
            }
            let l = remap[root];
            labels[r * w + c] = l;
            let s = &mut sums[l as usize - 1];
            s.0 += 1;
            s.1 += r as f64;
            s.2 += c as f64;
            s.3 = Rect::new(s.3.row0.min(r), s.3.col0.min(c), s.3.row1.max(r), s.3.col1.max(c));
        }
    }
    let regions = sums
        .into_iter()
        .enumerate()
        .map(|(i, (area, sr, sc, bbox))| Region {
            label: i as u32 + 1,
            bbox,
            area,
            centroid: (sr / area as f64, sc / area as f64),
        })
        .collect();
    LabeledRegions { width: w, height: h, labels, regions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Flood-fill oracle: count components by BFS.
    fn bfs_count(img: &BinaryImage, conn: Connectivity) -> usize {
        let (w, h) = (img.width() as isize, img.height() as isize);
        let mut seen = vec![false; img.pixels().len()];
        let mut count = 0;
        for start in 0..img.pixels().len() {
            if img.pixels()[start] == 0 || seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                let (r, c) = ((i as isize) / w, (i as isize) % w);
                for dr in -1..=1isize {
                    for dc in -1..=1isize {
                        if (dr == 0 && dc == 0) || (conn == Connectivity::Four && dr != 0 && dc != 0) {
                            continue;
                        }
                        let (rr, cc) = (r + dr, c + dc);
                        if rr >= 0 && rr < h && cc >= 0 && cc < w {
                            let j = (rr * w + cc) as usize;
                            if img.pixels()[j] == 1 && !seen[j] {
                                seen[j] = true;
                                stack.push(j);
                            }
                        }
                    }
                }
            }
        }
        count
    }

    #[test]
    fn examples() {
        let two = BinaryImage::from_rows(&["##..##", "##..##"]).unwrap();
        let l = label_components(&two, Connectivity::Eight);
        assert_eq!(l.count(), 2);
        assert!(l.regions().iter().all(|r| r.area == 4));
        assert_eq!(l.regions()[0].bbox, Rect::new(0, 0, 1, 1));
        assert_eq!(l.regions()[1].centroid, (0.5, 4.5));

        let diag = BinaryImage::from_rows(&["#.", ".#"]).unwrap();
        assert_eq!(label_components(&diag, Connectivity::Four).count(), 2);
        assert_eq!(label_components(&diag, Connectivity::Eight).count(), 1);
        assert_eq!(label_components(&BinaryImage::zeros(3, 3).unwrap(), Connectivity::Eight).count(), 0);
    }

    #[test]
    fn labels_follow_first_raster_occurrence() {
        // The U merges late; its left arm is met first so it keeps label 1.
        let u = BinaryImage::from_rows(&["#.#.#", "#.#..", "###.."]).unwrap();
        let l = label_components(&u, Connectivity::Four);
        assert_eq!(l.count(), 2);
        assert_eq!(l.label_at(0, 0), 1);
        assert_eq!(l.label_at(0, 2), 1);
        assert_eq!(l.label_at(0, 4), 2);
    }

    proptest! {
        #[test]
        fn matches_flood_fill_and_region_invariants(
            (w, h, px) in (1usize..14, 1usize..14).prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(0u8..=1, w * h))),
            four in any::<bool>(),
        ) {
            let img = BinaryImage::new(w, h, px).unwrap();
            let conn = if four { Connectivity::Four } else { Connectivity::Eight };
            let l = label_components(&img, conn);
            prop_assert_eq!(l.count(), bfs_count(&img, conn));
            prop_assert_eq!(l.regions().iter().map(|r| r.area).sum::<usize>(), img.count_ones());
            let mut first_seen = Vec::new();
            for (i, &lab) in l.labels().iter().enumerate() {
                prop_assert_eq!(lab == 0, img.pixels()[i] == 0);
                if lab != 0 && !first_seen.contains(&lab) {
                    first_seen.push(lab);
                }
            }
            prop_assert_eq!(first_seen, (1..=l.count() as u32).collect::<Vec<_>>());
            for reg in l.regions() {
                let m = l.mask(reg.label, Rect::new(0, 0, h - 1, w - 1));
                prop_assert_eq!(m.bounding_box(), Some(reg.bbox));
                prop_assert_eq!(m.count_ones(), reg.area);
            }
        }
    }
}
