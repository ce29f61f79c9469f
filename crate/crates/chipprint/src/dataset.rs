//! Datasets on disk: a `manifest.json` plus PGM frames and CHIPHM1 height
//! maps, written by `simulate` or assembled by `ingest`.

use std::fs;
use std::path::{Path, PathBuf};

use chipprint_core::evaluation::ClipRef;
use chipprint_core::surface_sim::Frame;
use chipprint_core::{Grid, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::CaptureSource;
use crate::config::PipelineConfig;
use crate::error::{AppError, AppResult};
use crate::formats::{read_frame, sidecar_path, write_frame, write_height_map};
use crate::simulate::{clip_seed, SimSource};

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "chipprint-dataset/1";
pub const PRODUCT_TEMPLATE: &str = "product_template.pgm";
pub const TEMPLATE: &str = "template.pgm";
const SCANNER_NAMES: [&str; 4] = ["scan000.pgm", "scan090.pgm", "scan180.pgm", "scan270.pgm"];

/// Paths are relative to the manifest's directory and use `/`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    /// `simulated` or `ingested`.
    pub origin: String,
    pub rows: usize,
    pub cols: usize,
    pub pitch_um: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Shared template for masks; chip templates are averaged if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product_template: Option<String>,
    pub chips: Vec<ChipEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChipEntry {
    pub chip_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_map: Option<String>,
    pub template: String,
    pub clips: Vec<ClipEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipEntry {
    pub clip_id: String,
    pub frames: Vec<String>,
    /// Flatbed passes at 0°, 90°, 180° and 270°.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scanner: Option<[String; 4]>,
}

impl Manifest {
    pub fn load(dir: &Path) -> AppResult<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| AppError::io(&path, e))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| AppError::format(&path, e.line(), e.to_string()))?;
        m.validate().map_err(|msg| AppError::format(&path, 1, msg))?;
        Ok(m)
    }

    pub fn save(&self, dir: &Path) -> AppResult<()> {
        let path = dir.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| AppError::io(&path, e))
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.format != MANIFEST_FORMAT {
            return Err(format!("unsupported manifest format {:?}", self.format));
        }
        if self.rows == 0 || self.cols == 0 || !(self.pitch_um > 0.0) {
            return Err("dimensions and pitch must be positive".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for chip in &self.chips {
            for clip in &chip.clips {
                if clip.frames.is_empty() {
                    return Err(format!("{}/{} has no frames", chip.chip_id, clip.clip_id));
                }
                if !seen.insert((chip.chip_id.as_str(), clip.clip_id.as_str())) {
                    return Err(format!("duplicate clip {}/{}", chip.chip_id, clip.clip_id));
                }
            }
        }
        Ok(())
    }

    pub fn clip_refs(&self) -> Vec<ClipRef> {
        self.chips
            .iter()
            .flat_map(|c| c.clips.iter().map(move |k| ClipRef::new(c.chip_id.clone(), k.clip_id.clone())))
            .collect()
    }
}

fn join(dir: &Path, rel: &str) -> PathBuf {
    rel.split('/').fold(dir.to_path_buf(), |p, part| p.join(part))
}

fn create_dir(p: &Path) -> AppResult<()> {
    fs::create_dir_all(p).map_err(|e| AppError::io(p, e))
}

fn frame_name(t: usize) -> String {
    format!("frame{t:04}.pgm")
}

/// Renders `n_chips × clips_per_chip` clips into `out`.
pub fn simulate_dataset(cfg: &PipelineConfig, n_chips: usize, clips_per_chip: usize, seed: u64, out: &Path) -> AppResult<Manifest> {
    if n_chips == 0 || clips_per_chip == 0 {
        return Err(AppError::Config("need at least one chip and one clip".into()));
    }
    let src = SimSource::new(cfg, n_chips, clips_per_chip, seed)?;
    create_dir(out)?;
    let params = serde_json::to_value(&cfg.render).expect("render config serializes");
    write_frame(&out.join(PRODUCT_TEMPLATE), &src.mask_template()?, seed, None)?;

    let mut chips: Vec<ChipEntry> = Vec::new();
    for (i, clip) in src.clips().iter().enumerate() {
        if chips.last().map(|c| c.chip_id != clip.chip_id).unwrap_or(true) {
            let chip = src.chip(i);
            let dir = chip.chip_id.clone();
            create_dir(&join(out, &dir))?;
            write_height_map(&join(out, &format!("{dir}/height.chiphm")), &chip.height)?;
            write_frame(&join(out, &format!("{dir}/{TEMPLATE}")), &src.template(i)?, chip.seed, None)?;
            chips.push(ChipEntry {
                chip_id: chip.chip_id.clone(),
                height_map: Some(format!("{dir}/height.chiphm")),
                template: format!("{dir}/{TEMPLATE}"),
                clips: Vec::new(),
            });
        }
        let dir = format!("{}/{}", clip.chip_id, clip.clip_id);
        chips.last_mut().expect("chip entry").clips.push(ClipEntry {
            clip_id: clip.clip_id.clone(),
            frames: (0..cfg.render.n_frames).map(|t| format!("{dir}/{}", frame_name(t))).collect(),
            scanner: Some(SCANNER_NAMES.map(|n| format!("{dir}/{n}"))),
        });
    }

    (0..src.clips().len()).into_par_iter().try_for_each(|i| -> AppResult<()> {
        let clip = &src.clips()[i];
        let dir = join(out, &format!("{}/{}", clip.chip_id, clip.clip_id));
        create_dir(&dir)?;
        let r = src.renderer(i)?;
        let seed = r.setup().seed;
        for t in 0..r.len() {
            write_frame(&dir.join(frame_name(t)), &r.frame(t)?, seed, Some(params.clone()))?;
        }
        if let Some(passes) = src.scanner_capture(i)? {
            let seed = clip_seed(src.chip(i).seed, &clip.clip_id);
            for (f, name) in passes.iter().zip(SCANNER_NAMES) {
                write_frame(&dir.join(name), f, seed, None)?;
            }
        }
        Ok(())
    })?;

    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        origin: "simulated".into(),
        rows: cfg.surface.rows,
        cols: cfg.surface.cols,
        pitch_um: cfg.surface.pitch_um,
        seed: Some(seed),
        product_template: Some(PRODUCT_TEMPLATE.into()),
        chips,
    };
    manifest.save(out)?;
    Ok(manifest)
}

fn sorted_entries(dir: &Path) -> AppResult<Vec<PathBuf>> {
    let mut v = fs::read_dir(dir)
        .map_err(|e| AppError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| AppError::io(dir, err)))
        .collect::<AppResult<Vec<_>>>()?;
    v.sort();
    Ok(v)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn is_pgm(p: &Path) -> bool {
    p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

fn copy_frame(from: &Path, to_dir: &Path, rel: &str, dims: &mut Option<(usize, usize)>) -> AppResult<String> {
    let f = read_frame(from)?;
    match *dims {
        None => *dims = Some(f.dims()),
        Some(d) if d != f.dims() => {
            return Err(AppError::format(from, 1, format!("frame is {:?}, expected {:?}", f.dims(), d)));
        }
        Some(_) => {}
    }
    let to = join(to_dir, rel);
    if let Some(parent) = to.parent() {
        create_dir(parent)?;
    }
    fs::copy(from, &to).map_err(|e| AppError::io(from, e))?;
    let side = sidecar_path(from);
    if side.exists() {
        fs::copy(&side, sidecar_path(&to)).map_err(|e| AppError::io(&side, e))?;
    }
    Ok(rel.to_string())
}

/// Copies captured PGM frames into `out` with a manifest.
///
/// Expected layout: `src/<chip>/template.pgm` and `src/<chip>/<clip>/*.pgm`
/// (frames in file-name order, `scan000.pgm` … `scan270.pgm` excluded),
/// optionally `src/product_template.pgm`.
pub fn ingest_dataset(src: &Path, out: &Path, pitch_um: f64) -> AppResult<Manifest> {
    let mut dims = None;
    create_dir(out)?;
    let product = src.join(PRODUCT_TEMPLATE);
    let product_template = if product.is_file() {
        Some(copy_frame(&product, out, PRODUCT_TEMPLATE, &mut dims)?)
    } else {
        None
    };
    let mut chips = Vec::new();
    for chip_dir in sorted_entries(src)?.into_iter().filter(|p| p.is_dir()) {
        let chip_id = file_name(&chip_dir);
        let template = chip_dir.join(TEMPLATE);
        if !template.is_file() {
            return Err(AppError::format(&template, 0, "chip directory lacks a template"));
        }
        let template = copy_frame(&template, out, &format!("{chip_id}/{TEMPLATE}"), &mut dims)?;
        let mut clips = Vec::new();
        for clip_dir in sorted_entries(&chip_dir)?.into_iter().filter(|p| p.is_dir()) {
            let clip_id = file_name(&clip_dir);
            let files: Vec<PathBuf> = sorted_entries(&clip_dir)?.into_iter().filter(|p| is_pgm(p)).collect();
            let mut frames = Vec::new();
            for f in files.iter().filter(|f| !SCANNER_NAMES.contains(&file_name(f).as_str())) {
                frames.push(copy_frame(f, out, &format!("{chip_id}/{clip_id}/{}", file_name(f)), &mut dims)?);
            }
            if frames.is_empty() {
                continue;
            }
            let scanner = if SCANNER_NAMES.iter().all(|n| clip_dir.join(n).is_file()) {
                let mut v = Vec::new();
                for n in SCANNER_NAMES {
                    v.push(copy_frame(&clip_dir.join(n), out, &format!("{chip_id}/{clip_id}/{n}"), &mut dims)?);
                }
                Some(v.try_into().expect("four passes"))
            } else {
                None
            };
            clips.push(ClipEntry { clip_id, frames, scanner });
        }
        chips.push(ChipEntry {
            chip_id,
            height_map: None,
            template,
            clips,
        });
    }
    let (rows, cols) = dims.ok_or_else(|| AppError::format(src, 0, "no PGM frames found"))?;
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        origin: "ingested".into(),
        rows,
        cols,
        pitch_um,
        seed: None,
        product_template,
        chips,
    };
    manifest.validate().map_err(|m| AppError::format(src, 0, m))?;
    manifest.save(out)?;
    Ok(manifest)
}

/// A dataset directory read frame by frame.
pub struct DiskSource {
    dir: PathBuf,
    manifest: Manifest,
    clips: Vec<ClipRef>,
    /// `(chip, clip)` entry indices per clip.
    entries: Vec<(usize, usize)>,
}

impl DiskSource {
    pub fn open(dir: &Path) -> AppResult<Self> {
        let manifest = Manifest::load(dir)?;
        let clips = manifest.clip_refs();
        let entries = manifest
            .chips
            .iter()
            .enumerate()
            .flat_map(|(i, c)| (0..c.clips.len()).map(move |k| (i, k)))
            .collect();
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
            clips,
            entries,
        })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn clip_entry(&self, clip: usize) -> &ClipEntry {
        let (i, k) = self.entries[clip];
        &self.manifest.chips[i].clips[k]
    }

    fn load(&self, rel: &str) -> AppResult<Frame> {
        let f = read_frame(&join(&self.dir, rel))?;
        if f.dims() != (self.manifest.rows, self.manifest.cols) {
            return Err(AppError::format(
                &join(&self.dir, rel),
                1,
                format!("frame is {:?}, manifest says {:?}", f.dims(), (self.manifest.rows, self.manifest.cols)),
            ));
        }
        Ok(f)
    }
}

impl CaptureSource for DiskSource {
    fn clips(&self) -> &[ClipRef] {
        &self.clips
    }

    fn template(&self, clip: usize) -> AppResult<Frame> {
        self.load(&self.manifest.chips[self.entries[clip].0].template)
    }

    fn mask_template(&self) -> AppResult<Frame> {
        if let Some(p) = &self.manifest.product_template {
            return self.load(p);
        }
        let templates = self
            .manifest
            .chips
            .iter()
            .map(|c| self.load(&c.template))
            .collect::<AppResult<Vec<_>>>()?;
        let n = templates.len() as f64;
        let (rows, cols) = (self.manifest.rows, self.manifest.cols);
        let px = Grid::from_fn(rows, cols, |r, c| templates.iter().map(|t| t.pixels[(r, c)]).sum::<f64>() / n);
        Ok(Frame::from_pixels(px)?)
    }

    fn frame_count(&self, clip: usize) -> usize {
        self.clip_entry(clip).frames.len()
    }

    fn visit_frames(&self, clip: usize, visit: &mut dyn FnMut(Frame) -> Result<()>) -> AppResult<()> {
        for rel in &self.clip_entry(clip).frames {
            visit(self.load(rel)?)?;
        }
        Ok(())
    }

    fn scanner_capture(&self, clip: usize) -> AppResult<Option<[Frame; 4]>> {
        match &self.clip_entry(clip).scanner {
            None => Ok(None),
            Some(paths) => {
                let [a, b, c, d] = paths;
                Ok(Some([self.load(a)?, self.load(b)?, self.load(c)?, self.load(d)?]))
            }
        }
    }

    fn pitch_um(&self) -> f64 {
        self.manifest.pitch_um
    }
}
