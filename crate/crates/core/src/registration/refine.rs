use super::SimilarityTransform;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::surface_sim::Frame;

/// Settings of the two-pass direct-search refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineParams {
    /// First-pass search radii; the second pass uses a quarter of each.
    pub scale_radius: f64,
    pub rotation_radius: f64,
    pub translation_radius: f64,
    /// Gaussian blur applied to both images in the first pass.
    pub blur_sigma: f64,
    /// Pixel stride of the first-pass objective.
    pub coarse_stride: usize,
    pub max_evals: usize,
    /// Lower bound of the significance floor `max(min_ncc, 6/√n)`.
    pub min_ncc: f64,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self {
            scale_radius: 0.02,
            rotation_radius: 2f64.to_radians(),
            translation_radius: 4.0,
            blur_sigma: 1.5,
            coarse_stride: 2,
            max_evals: 240,
            min_ncc: 0.05,
        }
    }
}

/// Outcome of [`refine_alignment`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    pub transform: SimilarityTransform,
    pub ncc_initial: f64,
    pub ncc: f64,
    /// False when neither pass improved on `init` or the best NCC is not
    /// significant; `transform` is then `init`.
    pub refined: bool,
}

/// Improves `init` (with `test ≈ warp(template, init)`) by maximizing the
/// NCC between the back-warped test image and the template.
pub fn refine_alignment(test: &Frame, template: &Frame, init: &SimilarityTransform) -> Result<Refinement> {
    refine_alignment_with(&test.pixels, &template.pixels, init, &RefineParams::default())
}

pub fn refine_alignment_with(
    test: &Grid<f64>,
    template: &Grid<f64>,
    init: &SimilarityTransform,
    params: &RefineParams,
) -> Result<Refinement> {
    init.validate()?;
    let (ncc0, n0) = ncc_back_warped(test, template, init, 1);
    if !ncc0.is_finite() {
        return Err(Error::Numeric("alignment objective is not finite".into()));
    }
    let radius = [params.scale_radius, params.rotation_radius, params.translation_radius, params.translation_radius];

    let blurred = if params.blur_sigma > 0.0 {
        Some((gaussian_blur(test, params.blur_sigma), gaussian_blur(template, params.blur_sigma)))
    } else {
        None
    };
    let (bt, bm) = blurred.as_ref().map_or((test, template), |(a, b)| (a, b));
    let stride = params.coarse_stride.max(1);
    let pass1 = nelder_mead(to_vec(init), radius, params.max_evals, |x| {
        objective(bt, bm, x, stride)
    })?;
    let quarter = radius.map(|r| r / 4.0);
    let pass2 = nelder_mead(pass1, quarter, params.max_evals, |x| objective(test, template, x, 1))?;

    let mut best = (*init, ncc0, n0);
    for cand in [pass1, pass2] {
        let t = from_vec(cand);
        if t.validate().is_err() {
            continue;
        }
        let (v, n) = ncc_back_warped(test, template, &t, 1);
        if v.is_finite() && v > best.1 {
            best = (t, v, n);
        }
    }
    let floor = params.min_ncc.max(6.0 / libm::sqrt(best.2.max(1) as f64));
    let refined = best.1 > ncc0 && best.1 >= floor;
    Ok(Refinement {
        transform: if refined { best.0 } else { *init },
        ncc_initial: ncc0,
        ncc: if refined { best.1 } else { ncc0 },
        refined,
    })
}

fn to_vec(t: &SimilarityTransform) -> [f64; 4] {
    [t.scale, t.rotation, t.tx, t.ty]
}

fn from_vec(x: [f64; 4]) -> SimilarityTransform {
    SimilarityTransform {
        scale: x[0],
        rotation: x[1],
        tx: x[2],
        ty: x[3],
    }
}

fn objective(test: &Grid<f64>, template: &Grid<f64>, x: [f64; 4], stride: usize) -> f64 {
    let t = from_vec(x);
    if !(t.scale > 0.0) {
        return f64::NEG_INFINITY;
    }
    ncc_back_warped(test, template, &t, stride).0
}

/// NCC between `warp(test, t⁻¹)` and `template` over valid pixels, and the
/// number of pixels used. Fewer than a quarter of the pixels gives −1.
pub(crate) fn ncc_back_warped(test: &Grid<f64>, template: &Grid<f64>, t: &SimilarityTransform, stride: usize) -> (f64, usize) {
    let (rows, cols) = test.dims();
    let (or, oc) = template.dims();
    // output q samples test at t(q)
    let a = t.scale * libm::cos(t.rotation);
    let b = t.scale * libm::sin(t.rotation);
    let (scr, scc) = ((rows as f64 - 1.0) / 2.0, (cols as f64 - 1.0) / 2.0);
    let (ocr, occ) = ((or as f64 - 1.0) / 2.0, (oc as f64 - 1.0) / 2.0);
    let data = test.as_slice();
    let (mut n, mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0usize, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut total = 0usize;
    for r in (0..or).step_by(stride) {
        let y = r as f64 - ocr;
        for c in (0..oc).step_by(stride) {
            total += 1;
            let x = c as f64 - occ;
            let px = a * x - b * y + t.tx + scc;
            let py = b * x + a * y + t.ty + scr;
            if !(px >= 0.0 && py >= 0.0 && px <= cols as f64 - 1.0 && py <= rows as f64 - 1.0) {
                continue;
            }
            let (x0, y0) = (px as usize, py as usize);
            let (x1, y1) = ((x0 + 1).min(cols - 1), (y0 + 1).min(rows - 1));
            let (fx, fy) = (px - x0 as f64, py - y0 as f64);
            let top = data[y0 * cols + x0] + (data[y0 * cols + x1] - data[y0 * cols + x0]) * fx;
            let bot = data[y1 * cols + x0] + (data[y1 * cols + x1] - data[y1 * cols + x0]) * fx;
            let v = top + (bot - top) * fy;
            let m = template[(r, c)];
            n += 1;
            sx += v;
            sy += m;
            sxx += v * v;
            syy += m * m;
            sxy += v * m;
        }
    }
    if n * 4 < total || n < 2 {
        return (-1.0, n);
    }
    let nf = n as f64;
    let cov = sxy - sx * sy / nf;
    let vx = sxx - sx * sx / nf;
    let vy = syy - sy * sy / nf;
    if !(vx > 0.0 && vy > 0.0) {
        return (0.0, n);
    }
    ((cov / libm::sqrt(vx * vy)).clamp(-1.0, 1.0), n)
}

/// Separable Gaussian blur with edge clamping.
pub(crate) fn gaussian_blur(g: &Grid<f64>, sigma: f64) -> Grid<f64> {
    let radius = libm::ceil(3.0 * sigma) as isize;
    let kernel: alloc::vec::Vec<f64> = (-radius..=radius).map(|i| libm::exp(-0.5 * (i * i) as f64 / (sigma * sigma))).collect();
    let norm: f64 = kernel.iter().sum();
    let (rows, cols) = g.dims();
    let pass = |src: &Grid<f64>, horizontal: bool| {
        Grid::from_fn(rows, cols, |r, c| {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                let o = k as isize - radius;
                let v = if horizontal {
                    src[(r, (c as isize + o).clamp(0, cols as isize - 1) as usize)]
                } else {
                    src[((r as isize + o).clamp(0, rows as isize - 1) as usize, c)]
                };
                acc += w * v;
            }
            acc / norm
        })
    };
    pass(&pass(g, true), false)
}

/// Maximizes `f` from `x0` with a simplex whose initial edges are `step`.
fn nelder_mead(x0: [f64; 4], step: [f64; 4], max_evals: usize, mut f: impl FnMut([f64; 4]) -> f64) -> Result<[f64; 4]> {
    const D: usize = 4;
    let mut evals = 0usize;
    let mut eval = |x: [f64; 4], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        // minimize the negated objective; non-finite values are treated as worst
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    };
    let mut simplex: [([f64; 4], f64); D + 1] = [(x0, 0.0); D + 1];
    simplex[0].1 = eval(x0, &mut evals);
    for i in 0..D {
        let mut x = x0;
        x[i] += step[i];
        simplex[i + 1] = (x, eval(x, &mut evals));
    }
    if simplex.iter().all(|s| !s.1.is_finite()) {
        return Err(Error::Numeric("alignment objective is not finite".into()));
    }
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[D].1 - simplex[0].1;
        let size = (1..=D)
            .map(|i| (0..D).map(|k| ((simplex[i].0[k] - simplex[0].0[k]) / step[k]).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size < 1e-3 || spread.abs() < 1e-13 {
            break;
        }
        let mut centroid = [0.0; D];
        for s in &simplex[..D] {
            for k in 0..D {
                centroid[k] += s.0[k] / D as f64;
            }
        }
        let along = |t: f64| {
            let mut x = [0.0; D];
            for k in 0..D {
                x[k] = centroid[k] + t * (simplex[D].0[k] - centroid[k]);
            }
            x
        };
        let xr = along(-1.0);
        let fr = eval(xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(xe, &mut evals);
            simplex[D] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[D - 1].1 {
            simplex[D] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[D].1 {
                let x = along(-0.5);
                (x, eval(x, &mut evals))
            } else {
                let x = along(0.5);
                (x, eval(x, &mut evals))
            };
            if fc < simplex[D].1.min(fr) {
                simplex[D] = (xc, fc);
            } else {
                let best = simplex[0].0;
                for s in simplex.iter_mut().skip(1) {
                    for k in 0..D {
                        s.0[k] = best[k] + 0.5 * (s.0[k] - best[k]);
                    }
                    s.1 = eval(s.0, &mut evals);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(simplex[0].0)
}
