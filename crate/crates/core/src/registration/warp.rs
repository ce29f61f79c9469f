use super::SimilarityTransform;
use crate::grid::Grid;
use crate::surface_sim::Frame;

/// A warped frame and the pixels that received source data.
#[derive(Debug, Clone, PartialEq)]
pub struct Warped {
    pub frame: Frame,
    pub valid: Grid<bool>,
}

/// Resamples `f` so that output pixel `q` takes the value of `f` at `t⁻¹(q)`.
///
/// Bilinear interpolation; pixels that map outside the source are 0 and
/// flagged invalid.
pub fn warp(f: &Frame, t: &SimilarityTransform, out_dims: (usize, usize)) -> Warped {
    let (pixels, valid) = warp_grid(&f.pixels, t, out_dims);
    Warped {
        frame: Frame {
            pixels,
            light: f.light,
            t: f.t,
        },
        valid,
    }
}

pub(crate) fn warp_grid(src: &Grid<f64>, t: &SimilarityTransform, out_dims: (usize, usize)) -> (Grid<f64>, Grid<bool>) {
    let (rows, cols) = src.dims();
    let (or, oc) = out_dims;
    let inv = t.inverse();
    let (scr, scc) = ((rows as f64 - 1.0) / 2.0, (cols as f64 - 1.0) / 2.0);
    let (ocr, occ) = ((or as f64 - 1.0) / 2.0, (oc as f64 - 1.0) / 2.0);
    // inverse map is affine: x_src = a·x - b·y + tx, y_src = b·x + a·y + ty
    let a = inv.scale * libm::cos(inv.rotation);
    let b = inv.scale * libm::sin(inv.rotation);
    let mut out = Grid::new(or, oc, 0.0);
    let mut valid = Grid::new(or, oc, false);
    let eps = 1e-9;
    let data = src.as_slice();
    for r in 0..or {
        let y = r as f64 - ocr;
        let out_row = out.row_mut(r);
        let valid_row = valid.row_mut(r);
        for c in 0..oc {
            let x = c as f64 - occ;
            let sx = a * x - b * y + inv.tx + scc;
            let sy = b * x + a * y + inv.ty + scr;
            if sx < -eps || sy < -eps || sx > cols as f64 - 1.0 + eps || sy > rows as f64 - 1.0 + eps {
                continue;
            }
            let sx = sx.clamp(0.0, cols as f64 - 1.0);
            let sy = sy.clamp(0.0, rows as f64 - 1.0);
            // both coordinates are non-negative here, so truncation is floor
            let (x0, y0) = (sx as usize, sy as usize);
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            let x1 = (x0 + 1).min(cols - 1);
            let y1 = (y0 + 1).min(rows - 1);
            let v00 = data[y0 * cols + x0];
            let v = if fx == 0.0 && fy == 0.0 {
                v00
            } else {
                let v01 = data[y0 * cols + x1];
                let v10 = data[y1 * cols + x0];
                let v11 = data[y1 * cols + x1];
                let top = v00 + (v01 - v00) * fx;
                let bot = v10 + (v11 - v10) * fx;
                top + (bot - top) * fy
            };
            out_row[c] = v;
            valid_row[c] = true;
        }
    }
    (out, valid)
}
