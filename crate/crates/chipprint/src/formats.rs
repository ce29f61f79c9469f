//! On-disk formats: 16-bit PGM frames with JSON sidecars, CHIPHM1 grids,
//! CHIPFP1 fingerprints, transform records and evaluation reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chipprint_core::evaluation::{density_curve, split_by_label, EvalReport, FittedPdf, Label, PdfFamily};
use chipprint_core::registration::SimilarityTransform;
use chipprint_core::specular_auth::{digest_dims, Fingerprint, SpecularPointSet};
use chipprint_core::surface_sim::{Frame, HeightMap, LightKind, LightPose};
use chipprint_core::Grid;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{AppError, AppResult};

fn write_file(path: &Path, bytes: &[u8]) -> AppResult<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| AppError::io(path, e))
}

fn read_file(path: &Path) -> AppResult<Vec<u8>> {
    fs::read(path).map_err(|e| AppError::io(path, e))
}

fn read_text(path: &Path) -> AppResult<String> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

// ---------------------------------------------------------------- frames

/// Light pose as stored in a frame sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LightRecord {
    Point { o: [f64; 3] },
    LinearPath { o: [f64; 3], x1: f64, x2: f64 },
}

impl From<&LightPose> for LightRecord {
    fn from(p: &LightPose) -> Self {
        match p.kind {
            LightKind::Point => LightRecord::Point { o: p.o },
            LightKind::LinearPath { x1, x2 } => LightRecord::LinearPath { o: p.o, x1, x2 },
        }
    }
}

impl LightRecord {
    pub fn pose(&self) -> LightPose {
        match *self {
            LightRecord::Point { o } => LightPose { o, kind: LightKind::Point },
            LightRecord::LinearPath { o, x1, x2 } => LightPose {
                o,
                kind: LightKind::LinearPath { x1, x2 },
            },
        }
    }
}

/// Metadata written next to every PGM frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSidecar {
    /// Intensity of one grey level.
    pub scale: f64,
    pub t: usize,
    pub light: LightRecord,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<serde_json::Value>,
}

pub fn sidecar_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("json")
}

/// Quantizes a frame to 16 bits with the peak at full scale.
pub fn encode_pgm(f: &Frame) -> (Vec<u8>, f64) {
    let (rows, cols) = f.dims();
    let peak = f.pixels.iter().copied().fold(0.0, f64::max);
    let scale = if peak > 0.0 { peak / 65535.0 } else { 1.0 };
    let mut out = format!("P5\n{cols} {rows}\n65535\n").into_bytes();
    out.reserve(rows * cols * 2);
    for v in f.pixels.iter() {
        let q = (v / scale).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    (out, scale)
}

/// Parses a binary PGM (8- or 16-bit), returning raw grey levels.
pub fn decode_pgm(bytes: &[u8]) -> Result<Grid<f64>, String> {
    let mut fields = Vec::new();
    let mut i = 0;
    while fields.len() < 4 {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err("truncated PGM header".into());
        }
        fields.push(std::str::from_utf8(&bytes[start..i]).map_err(|_| "non-ASCII PGM header")?.to_string());
    }
    if fields[0] != "P5" {
        return Err(format!("expected P5, found {}", fields[0]));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| format!("bad PGM header field {s:?}"));
    let (cols, rows, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    let data = &bytes[(i + 1).min(bytes.len())..];
    let width = if maxval > 255 { 2 } else { 1 };
    if data.len() < rows * cols * width {
        return Err("truncated PGM raster".into());
    }
    let px: Vec<f64> = if width == 2 {
        data.chunks_exact(2).take(rows * cols).map(|b| u16::from_be_bytes([b[0], b[1]]) as f64).collect()
    } else {
        data[..rows * cols].iter().map(|&b| b as f64).collect()
    };
    Grid::from_vec(rows, cols, px).map_err(|e| e.to_string())
}

pub fn write_frame(path: &Path, f: &Frame, seed: u64, params: Option<serde_json::Value>) -> AppResult<()> {
    let (bytes, scale) = encode_pgm(f);
    write_file(path, &bytes)?;
    let side = FrameSidecar {
        scale,
        t: f.t,
        light: (&f.light).into(),
        seed,
        params,
    };
    let text = serde_json::to_string_pretty(&side).expect("sidecar serializes");
    write_file(&sidecar_path(path), text.as_bytes())
}

/// Reads a PGM frame; a missing sidecar leaves grey levels unscaled.
pub fn read_frame(path: &Path) -> AppResult<Frame> {
    let grid = decode_pgm(&read_file(path)?).map_err(|m| AppError::format(path, 1, m))?;
    let side = sidecar_path(path);
    if !side.exists() {
        return Ok(Frame::from_pixels(grid)?);
    }
    let meta: FrameSidecar = serde_json::from_str(&read_text(&side)?).map_err(|e| AppError::format(&side, e.line(), e.to_string()))?;
    let pixels = grid.map(|v| v * meta.scale);
    Ok(Frame::new(pixels, meta.light.pose(), meta.t)?)
}

// ---------------------------------------------------------------- grids

/// A grid stored in CHIPHM1 form.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRecord {
    /// `height`, `nx`, `ny` or `band<k>`.
    pub kind: String,
    pub grid: Grid<f64>,
    pub pitch: f64,
    pub seed: u64,
}

const HM_MAGIC: &str = "CHIPHM1";

/// Eight-field ASCII header, newline, then little-endian `f64` values in
/// row-major order.
pub fn encode_grid(rec: &GridRecord) -> Vec<u8> {
    let (rows, cols) = rec.grid.dims();
    let mut out = format!("{HM_MAGIC} {} {rows} {cols} {:e} {} f64 le\n", rec.kind, rec.pitch, rec.seed).into_bytes();
    for v in rec.grid.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_grid(bytes: &[u8]) -> Result<GridRecord, String> {
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or("missing CHIPHM1 header")?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| "non-ASCII header")?;
    let f: Vec<&str> = header.split_whitespace().collect();
    if f.len() != 8 || f[0] != HM_MAGIC {
        return Err(format!("bad CHIPHM1 header {header:?}"));
    }
    if f[6] != "f64" || f[7] != "le" {
        return Err(format!("unsupported sample format {} {}", f[6], f[7]));
    }
    let rows: usize = f[2].parse().map_err(|_| "bad rows")?;
    let cols: usize = f[3].parse().map_err(|_| "bad cols")?;
    let pitch: f64 = f[4].parse().map_err(|_| "bad pitch")?;
    let seed: u64 = f[5].parse().map_err(|_| "bad seed")?;
    let data = &bytes[nl + 1..];
    if data.len() != rows * cols * 8 {
        return Err(format!("expected {} bytes of samples, found {}", rows * cols * 8, data.len()));
    }
    let v: Vec<f64> = data.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    Ok(GridRecord {
        kind: f[1].to_string(),
        grid: Grid::from_vec(rows, cols, v).map_err(|e| e.to_string())?,
        pitch,
        seed,
    })
}

pub fn write_grid(path: &Path, rec: &GridRecord) -> AppResult<()> {
    write_file(path, &encode_grid(rec))
}

pub fn read_grid(path: &Path) -> AppResult<GridRecord> {
    decode_grid(&read_file(path)?).map_err(|m| AppError::format(path, 1, m))
}

pub fn write_height_map(path: &Path, h: &HeightMap) -> AppResult<()> {
    write_grid(
        path,
        &GridRecord {
            kind: "height".into(),
            grid: h.heights().clone(),
            pitch: h.pitch(),
            seed: h.seed(),
        },
    )
}

pub fn read_height_map(path: &Path) -> AppResult<HeightMap> {
    let rec = read_grid(path)?;
    if rec.kind != "height" {
        return Err(AppError::format(path, 1, format!("expected a height grid, found {}", rec.kind)));
    }
    Ok(HeightMap::new(rec.grid, rec.pitch, rec.seed)?)
}

// ---------------------------------------------------------------- fingerprints

const FP_MAGIC: &str = "CHIPFP1";

fn check_token(s: &str, what: &str) -> Result<(), String> {
    if s.is_empty() || s.chars().any(char::is_whitespace) {
        Err(format!("{what} {s:?} must be a non-empty token without whitespace"))
    } else {
        Ok(())
    }
}

/// `CHIPFP1 chip_id clip_id N count mask_digest seed`, then one line per
/// frame: `frame_id r,c r,c ...`.
pub fn encode_fingerprint(fp: &Fingerprint) -> Result<String, String> {
    check_token(&fp.chip_id, "chip id")?;
    check_token(&fp.clip_id, "clip id")?;
    check_token(&fp.mask_digest, "mask digest")?;
    let mut s = format!(
        "{FP_MAGIC} {} {} {} {} {} {}\n",
        fp.chip_id,
        fp.clip_id,
        fp.n,
        fp.frames.len(),
        fp.mask_digest,
        fp.sample_seed
    );
    for f in &fp.frames {
        write!(s, "{}", f.frame_id).unwrap();
        for (r, c) in f.points() {
            write!(s, " {r},{c}").unwrap();
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn decode_fingerprint(text: &str) -> Result<Fingerprint, (usize, String)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or((1, "empty fingerprint".to_string()))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 7 || h[0] != FP_MAGIC {
        return Err((1, format!("bad CHIPFP1 header {header:?}")));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| (1, format!("bad number {s:?}")));
    let (n, count) = (num(h[3])?, num(h[4])?);
    let seed: u64 = h[6].parse().map_err(|_| (1, format!("bad seed {:?}", h[6])))?;
    let dims = digest_dims(h[5]).ok_or((1, format!("mask digest {:?} lacks dimensions", h[5])))?;
    let mut frames = Vec::with_capacity(count);
    for (i, line) in lines {
        let lineno = i + 1;
        let mut it = line.split_whitespace();
        let id: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or((lineno, "bad frame id".to_string()))?;
        let pts = it
            .map(|tok| {
                let (r, c) = tok.split_once(',').ok_or((lineno, format!("bad point {tok:?}")))?;
                let r = r.parse().map_err(|_| (lineno, format!("bad row {r:?}")))?;
                let c = c.parse().map_err(|_| (lineno, format!("bad column {c:?}")))?;
                Ok((r, c))
            })
            .collect::<Result<Vec<(usize, usize)>, (usize, String)>>()?;
        if pts.len() != n {
            return Err((lineno, format!("expected {n} points, found {}", pts.len())));
        }
        frames.push(SpecularPointSet::new(pts, id, dims).map_err(|e| (lineno, e.to_string()))?);
    }
    if frames.len() != count {
        return Err((1, format!("header announces {count} frames, found {}", frames.len())));
    }
    Fingerprint::new(h[1], h[2], frames, h[5], n, seed).map_err(|e| (1, e.to_string()))
}

pub fn write_fingerprint(path: &Path, fp: &Fingerprint) -> AppResult<()> {
    let text = encode_fingerprint(fp).map_err(|m| AppError::format(path, 1, m))?;
    write_file(path, text.as_bytes())
}

pub fn read_fingerprint(path: &Path) -> AppResult<Fingerprint> {
    decode_fingerprint(&read_text(path)?).map_err(|(l, m)| AppError::format(path, l, m))
}

// ---------------------------------------------------------------- transforms

/// `scale rotation_rad t_x t_y`, twelve significant digits each.
pub fn encode_transform(t: &SimilarityTransform) -> String {
    format!("{:.11e} {:.11e} {:.11e} {:.11e}\n", t.scale, t.rotation, t.tx, t.ty)
}

pub fn decode_transform(text: &str) -> Result<SimilarityTransform, String> {
    let v: Vec<f64> = text
        .split_whitespace()
        .map(|s| s.parse::<f64>().map_err(|_| format!("bad number {s:?}")))
        .collect::<Result<_, _>>()?;
    if v.len() != 4 {
        return Err(format!("expected 4 values, found {}", v.len()));
    }
    SimilarityTransform::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------- reports

fn fit_json(f: &FittedPdf) -> serde_json::Value {
    json!({ "family": f.family.as_str(), "location": f.location, "scale": f.scale })
}

/// Report as JSON: samples, fits, EERs and the configuration snapshot.
pub fn report_json(r: &EvalReport, config: &serde_json::Value) -> serde_json::Value {
    let eer = |e: &chipprint_core::evaluation::EerPoint| json!({ "eer": e.eer, "threshold": e.threshold, "flipped": e.flipped });
    let samples: Vec<_> = r
        .samples
        .iter()
        .map(|s| {
            json!({
                "value": s.value,
                "label": s.label.as_str(),
                "test": format!("{}/{}", s.test.chip_id, s.test.clip_id),
                "reference": format!("{}/{}", s.reference.chip_id, s.reference.clip_id),
                "repeat": s.repeat,
            })
        })
        .collect();
    json!({
        "statistic": r.kind.as_str(),
        "eer_laplace": eer(&r.eer_laplace),
        "eer_gaussian": eer(&r.eer_gaussian),
        "eer_empirical": eer(&r.eer_empirical),
        "threshold_at_eer": r.threshold_at_eer,
        "separated": r.separated(),
        "fits": {
            "laplace": { "matched": fit_json(&r.laplace.matched), "unmatched": fit_json(&r.laplace.unmatched) },
            "gaussian": { "matched": fit_json(&r.gaussian.matched), "unmatched": fit_json(&r.gaussian.unmatched) },
        },
        "samples": samples,
        "config": config,
    })
}

/// `value,density,label` rows: normalized histograms of both labels, then
/// fitted densities labelled `matched_laplace` and so on.
pub fn report_csv(r: &EvalReport, bins: usize) -> String {
    let (m, u) = split_by_label(&r.samples);
    let lo = m.iter().chain(&u).copied().fold(f64::INFINITY, f64::min);
    let hi = m.iter().chain(&u).copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let bins = bins.max(1);
    let width = span / bins as f64;
    let mut out = String::from("value,density,label\n");
    for (label, vals) in [(Label::Matched, &m), (Label::Unmatched, &u)] {
        let mut counts = vec![0usize; bins];
        for v in vals.iter() {
            counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
        }
        for (k, c) in counts.iter().enumerate() {
            let density = *c as f64 / (vals.len() as f64 * width);
            writeln!(out, "{},{},{}", lo + (k as f64 + 0.5) * width, density, label.as_str()).unwrap();
        }
    }
    for fam in PdfFamily::ALL {
        let fits = r.fits(fam);
        for (label, fit) in [(Label::Matched, &fits.matched), (Label::Unmatched, &fits.unmatched)] {
            for (x, d) in density_curve(fit, lo - 0.1 * span, hi + 0.1 * span, 200) {
                writeln!(out, "{x},{d},{}_{}", label.as_str(), fam.as_str()).unwrap();
            }
        }
    }
    out
}

pub fn write_report(dir: &Path, r: &EvalReport, config: &serde_json::Value) -> AppResult<()> {
    let stem = dir.join(format!("report_{}", r.kind.as_str()));
    let json = serde_json::to_string_pretty(&report_json(r, config)).expect("report serializes");
    write_file(&stem.with_extension("json"), json.as_bytes())?;
    write_file(&stem.with_extension("csv"), report_csv(r, 40).as_bytes())
}

pub fn write_text(path: &Path, text: &str) -> AppResult<()> {
    write_file(path, text.as_bytes())
}

pub fn read_to_string(path: &Path) -> AppResult<String> {
    read_text(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pgm_round_trip_is_within_one_level() {
        let g = Grid::from_fn(7, 9, |r, c| (r * 9 + c) as f64 * 0.37);
        let f = Frame::new(g.clone(), LightPose::spherical(40.0, 225.0, 120.0).unwrap(), 5).unwrap();
        let (bytes, scale) = encode_pgm(&f);
        let back = decode_pgm(&bytes).unwrap().map(|v| v * scale);
        for (a, b) in back.iter().zip(g.iter()) {
            assert!((a - b).abs() <= scale);
        }
    }

    #[test]
    fn frame_files_keep_pose_and_index() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.pgm");
        let f = Frame::new(Grid::new(5, 6, 2.0), LightPose::spherical(40.0, 225.0, 120.0).unwrap(), 3).unwrap();
        write_frame(&p, &f, 9, None).unwrap();
        let back = read_frame(&p).unwrap();
        assert_eq!(back.t, 3);
        assert_eq!(back.light, f.light);
        assert!(back.pixels.iter().all(|v| (v - 2.0).abs() < 1e-4));
        std::fs::remove_file(sidecar_path(&p)).unwrap();
        assert_eq!(read_frame(&p).unwrap().pixels[(0, 0)], 65535.0);
    }

    #[test]
    fn pgm_rejects_garbage() {
        assert!(decode_pgm(b"P2\n1 1\n255\n0").is_err());
        assert!(decode_pgm(b"P5\n4 4\n255\n\x00").is_err());
        assert_eq!(decode_pgm(b"P5\n# note\n2 1\n255\n\x01\x02").unwrap().as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn grid_round_trip_is_exact() {
        let rec = GridRecord {
            kind: "height".into(),
            grid: Grid::from_fn(4, 3, |r, c| (r as f64 - 1.3) * (c as f64 + 0.1) / 7.0),
            pitch: 43.57,
            seed: u64::MAX,
        };
        let bytes = encode_grid(&rec);
        let header = std::str::from_utf8(&bytes[..bytes.iter().position(|&b| b == b'\n').unwrap()]).unwrap();
        assert_eq!(header.split_whitespace().count(), 8);
        assert_eq!(decode_grid(&bytes).unwrap(), rec);
        assert!(decode_grid(&bytes[..bytes.len() - 1]).is_err());
    }

    fn sample_fp() -> Fingerprint {
        let sets = (0..3)
            .map(|k| SpecularPointSet::new(vec![(k, 2), (10, 11 + k), (31, 0)], 7 * k, (32, 40)).unwrap())
            .collect();
        Fingerprint::new("chipA", "clip1", sets, "32x40:0123456789abcdef", 3, 42).unwrap()
    }

    #[test]
    fn fingerprint_text_round_trip() {
        let fp = sample_fp();
        let text = encode_fingerprint(&fp).unwrap();
        assert!(text.starts_with("CHIPFP1 chipA clip1 3 3 32x40:0123456789abcdef 42\n"));
        assert_eq!(decode_fingerprint(&text).unwrap(), fp);
    }

    #[test]
    fn fingerprint_errors_carry_line_numbers() {
        let text = encode_fingerprint(&sample_fp()).unwrap().replace("10,12", "10;12");
        assert_eq!(decode_fingerprint(&text).unwrap_err().0, 3);
        let short = "CHIPFP1 a b 3 2 32x40:00 1\n0 1,1 2,2 3,3\n";
        assert_eq!(decode_fingerprint(short).unwrap_err().0, 1);
        let mut bad = sample_fp();
        bad.chip_id = "has space".into();
        assert!(encode_fingerprint(&bad).is_err());
    }

    proptest! {
        #[test]
        fn transform_record_round_trips(s in 0.5f64..2.0, r in -3.0f64..3.0, x in -500.0f64..500.0, y in -500.0f64..500.0) {
            let t = SimilarityTransform::new(s, r, x, y).unwrap();
            let back = decode_transform(&encode_transform(&t)).unwrap();
            for (a, b) in [(t.scale, back.scale), (t.rotation, back.rotation), (t.tx, back.tx), (t.ty, back.ty)] {
                prop_assert!((a - b).abs() <= 1e-11 * a.abs().max(1e-300));
            }
        }
    }
}
