use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::surface_sim::Frame;

/// Usable background pixels of a registered chip image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    pub include: Grid<bool>,
    pub edge_margin_px: usize,
    /// True when background between text lines is kept; false when only the
    /// largest text-free rectangle survives.
    pub detailed: bool,
}

impl RegionMask {
    /// Every pixel at least `margin` away from the frame border.
    pub fn interior(rows: usize, cols: usize, margin: usize) -> Result<Self> {
        if 2 * margin >= rows.min(cols) {
            return Err(Error::Mask(format!("edge margin {margin} leaves nothing of a {rows}x{cols} frame")));
        }
        Ok(Self {
            include: Grid::from_fn(rows, cols, |r, c| r >= margin && c >= margin && r < rows - margin && c < cols - margin),
            edge_margin_px: margin,
            detailed: true,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.include.dims()
    }

    pub fn count(&self) -> usize {
        self.include.iter().filter(|&&b| b).count()
    }

    /// `"{rows}x{cols}:{first 8 bytes of SHA-256 in hex}"` over the packed mask.
    pub fn digest(&self) -> String {
        let (rows, cols) = self.dims();
        let mut h = Sha256::new();
        h.update((rows as u64).to_le_bytes());
        h.update((cols as u64).to_le_bytes());
        let mut packed = Vec::with_capacity(self.include.len().div_ceil(8));
        for chunk in self.include.as_slice().chunks(8) {
            packed.push(chunk.iter().enumerate().fold(0u8, |b, (i, &v)| b | ((v as u8) << i)));
        }
        h.update(&packed);
        let d = h.finalize();
        let hex: String = d[..8].iter().map(|b| format!("{b:02x}")).collect();
        format!("{rows}x{cols}:{hex}")
    }
}

/// Parses the frame size out of a mask digest.
pub fn digest_dims(digest: &str) -> Option<(usize, usize)> {
    let (dims, _) = digest.split_once(':')?;
    let (r, c) = dims.split_once('x')?;
    Some((r.parse().ok()?, c.parse().ok()?))
}

/// How text markings are detected on the template.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskParams {
    pub edge_margin_px: usize,
    /// Keep the per-pixel shape; otherwise shrink to the largest included rectangle.
    pub detailed: bool,
    /// Remove detected text from the mask.
    pub exclude_text: bool,
    /// Text threshold: `median + k · 1.4826 · MAD` of the smoothed template.
    pub text_k: f64,
    /// Dilation of detected text, in pixels.
    pub text_pad_px: usize,
    /// Box-filter radius applied before thresholding, suppressing isolated glints.
    pub smooth_radius: usize,
}

impl Default for MaskParams {
    fn default() -> Self {
        Self {
            edge_margin_px: 24,
            detailed: true,
            exclude_text: true,
            text_k: 4.0,
            text_pad_px: 3,
            smooth_radius: 1,
        }
    }
}

/// Edge erosion plus text exclusion with default detection settings.
pub fn build_mask(template: &Frame, edge_margin_px: usize, detailed: bool) -> Result<RegionMask> {
    build_mask_with(
        template,
        &MaskParams {
            edge_margin_px,
            detailed,
            ..MaskParams::default()
        },
    )
}

pub fn build_mask_with(template: &Frame, p: &MaskParams) -> Result<RegionMask> {
    let (rows, cols) = template.dims();
    let mut mask = RegionMask::interior(rows, cols, p.edge_margin_px)?;
    mask.detailed = p.detailed;
    if p.exclude_text {
        let text = detect_text(&template.pixels, p);
        for (m, t) in mask.include.as_mut_slice().iter_mut().zip(text.iter()) {
            *m &= !*t;
        }
    }
    if !p.detailed {
        mask.include = largest_rectangle(&mask.include);
    }
    if mask.count() == 0 {
        return Err(Error::Mask("mask is empty".into()));
    }
    Ok(mask)
}

/// Dilated bright-marking pixels.
pub fn detect_text(template: &Grid<f64>, p: &MaskParams) -> Grid<bool> {
    let smooth = box_mean(template, p.smooth_radius);
    let mut vals: Vec<f64> = smooth.iter().copied().collect();
    let med = crate::stats::median(&vals).unwrap_or(0.0);
    for v in vals.iter_mut() {
        *v = (*v - med).abs();
    }
    let mad = crate::stats::median(&vals).unwrap_or(0.0);
    let thr = med + p.text_k * 1.4826 * mad;
    let hit = smooth.map(|&v| v > thr);
    dilate(&hit, p.text_pad_px)
}

fn box_mean(g: &Grid<f64>, radius: usize) -> Grid<f64> {
    if radius == 0 {
        return g.clone();
    }
    let (rows, cols) = g.dims();
    Grid::from_fn(rows, cols, |r, c| {
        let (r0, r1) = (r.saturating_sub(radius), (r + radius + 1).min(rows));
        let (c0, c1) = (c.saturating_sub(radius), (c + radius + 1).min(cols));
        let mut acc = 0.0;
        for rr in r0..r1 {
            acc += g.row(rr)[c0..c1].iter().sum::<f64>();
        }
        acc / ((r1 - r0) * (c1 - c0)) as f64
    })
}

/// Square (Chebyshev) dilation.
pub(crate) fn dilate(g: &Grid<bool>, radius: usize) -> Grid<bool> {
    if radius == 0 {
        return g.clone();
    }
    let (rows, cols) = g.dims();
    let horiz = Grid::from_fn(rows, cols, |r, c| {
        g.row(r)[c.saturating_sub(radius)..(c + radius + 1).min(cols)].iter().any(|&b| b)
    });
    Grid::from_fn(rows, cols, |r, c| (r.saturating_sub(radius)..(r + radius + 1).min(rows)).any(|rr| horiz[(rr, c)]))
}

/// The largest axis-aligned all-true rectangle (maximal rectangle in a
/// histogram, row by row). Ties keep the first found.
pub(crate) fn largest_rectangle(g: &Grid<bool>) -> Grid<bool> {
    let (rows, cols) = g.dims();
    let mut heights = alloc::vec![0usize; cols];
    let mut best = (0usize, 0usize, 0usize, 0usize, 0usize); // area, top, left, height, width
    let mut stack: Vec<usize> = Vec::with_capacity(cols + 1);
    for r in 0..rows {
        for c in 0..cols {
            heights[c] = if g[(r, c)] { heights[c] + 1 } else { 0 };
        }
        stack.clear();
        for c in 0..=cols {
            let h = if c < cols { heights[c] } else { 0 };
            while let Some(&top) = stack.last() {
                if heights[top] <= h {
                    break;
                }
                stack.pop();
                let height = heights[top];
                let left = stack.last().map_or(0, |&s| s + 1);
                let width = c - left;
                if height * width > best.0 {
                    best = (height * width, r + 1 - height, left, height, width);
                }
            }
            stack.push(c);
        }
    }
    let (_, top, left, h, w) = best;
    Grid::from_fn(rows, cols, |r, c| r >= top && r < top + h && c >= left && c < left + w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn painted_template() -> Frame {
        Frame::from_pixels(Grid::from_fn(128, 128, |r, c| {
            let text_row = (40..50).contains(&r) || (70..80).contains(&r);
            if text_row && (30..98).contains(&c) && (c / 6) % 2 == 0 {
                500.0
            } else {
                100.0 + ((r * 7 + c * 3) % 5) as f64
            }
        }))
        .unwrap()
    }

    #[test]
    fn uniform_template_gives_interior() {
        let f = Frame::from_pixels(Grid::new(64, 80, 7.0)).unwrap();
        let m = build_mask(&f, 10, true).unwrap();
        assert_eq!(m.count(), (64 - 20) * (80 - 20));
        assert!(m.include[(10, 10)] && !m.include[(9, 10)] && !m.include[(54, 40)] && m.include[(53, 69)]);
    }

    #[test]
    fn detailed_mask_keeps_more_background() {
        let f = painted_template();
        let detailed = build_mask(&f, 8, true).unwrap();
        let rect = build_mask(&f, 8, false).unwrap();
        assert!(detailed.count() > rect.count());
        assert!(!detailed.include[(45, 37)]);
        // background between the two text lines is retained
        assert!(detailed.include[(60, 64)]);
        for (d, r) in detailed.include.iter().zip(rect.include.iter()) {
            assert!(!*r || *d);
        }
    }

    #[test]
    fn oversized_margin_fails() {
        let f = Frame::from_pixels(Grid::new(40, 60, 1.0)).unwrap();
        assert!(matches!(build_mask(&f, 20, true), Err(Error::Mask(_))));
        assert!(build_mask(&f, 19, true).is_ok());
    }

    #[test]
    fn digest_encodes_dims_and_content() {
        let a = RegionMask::interior(30, 40, 2).unwrap();
        let b = RegionMask::interior(30, 40, 3).unwrap();
        assert_eq!(digest_dims(&a.digest()), Some((30, 40)));
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest(), a.clone().digest());
        assert_eq!(a.digest().len(), "30x40:".len() + 16);
    }

    #[test]
    fn largest_rectangle_brute_force() {
        let g = Grid::from_fn(12, 15, |r, c| (r * 5 + c * 3) % 7 != 0 && !(r == 4 && c > 3));
        let rect = largest_rectangle(&g);
        let area = rect.iter().filter(|&&b| b).count();
        let mut best = 0;
        for t in 0..12 {
            for l in 0..15 {
                for b in t..12 {
                    for r in l..15 {
                        if (t..=b).all(|y| (l..=r).all(|x| g[(y, x)])) {
                            best = best.max((b - t + 1) * (r - l + 1));
                        }
                    }
                }
            }
        }
        assert_eq!(area, best);
        assert!(rect.iter().zip(g.iter()).all(|(r, g)| !*r || *g));
    }
}
