//! Benchmark driver: streams every clip once through registration and
//! top-N extraction, then scores all pair × repeat jobs in parallel.

use std::collections::BTreeMap;

use chipprint_core::diffuse_auth::{diffuse_match_score, estimate_norm_map, NormMap};
use chipprint_core::evaluation::{
    bootstrap_plan, BootstrapJob, ClipRef, EvalReport, ScoreSample, StatisticKind,
};
use chipprint_core::registration::{AlignmentResult, ClipAligner, TransformEstimator};
use chipprint_core::seed::derive_seed;
use chipprint_core::specular_auth::{
    build_mask_with, ranked_specular_points_multi, sample_frames, IndexedFrame, MaskParams, RegionMask, ScoreBundle,
};
use chipprint_core::surface_sim::Frame;
use chipprint_core::{Error, Grid, Result};
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::{AppError, AppResult};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "CHIPPRINT_THREADS";

/// Worker pool honouring [`THREADS_ENV`]; rayon's default otherwise.
pub fn thread_pool() -> AppResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| AppError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| AppError::Config(e.to_string()))
}

/// Where frames come from: a renderer or files on disk.
pub trait CaptureSource: Sync {
    fn clips(&self) -> &[ClipRef];
    /// Alignment template of the clip's chip.
    fn template(&self, clip: usize) -> AppResult<Frame>;
    /// Template the masks are built from, shared by all chips.
    fn mask_template(&self) -> AppResult<Frame>;
    fn frame_count(&self, clip: usize) -> usize;
    /// Calls `visit` with every frame of the clip in order.
    fn visit_frames(&self, clip: usize, visit: &mut dyn FnMut(Frame) -> Result<()>) -> AppResult<()>;
    /// Four flatbed passes (0°, 90°, 180°, 270°) for the diffuse baseline, if available.
    fn scanner_capture(&self, clip: usize) -> AppResult<Option<[Frame; 4]>>;
    fn pitch_um(&self) -> f64;
}

/// One of the masking configurations compared in the masking ablation.
#[derive(Debug, Clone)]
pub struct MaskVariant {
    pub name: String,
    pub mask: RegionMask,
}

/// No mask, edge only, text only and both, built from one template.
pub fn masking_variants(template: &Frame, base: &MaskParams) -> Result<Vec<MaskVariant>> {
    let combos = [("none", false, false), ("edge", true, false), ("detailed", false, true), ("edge+detailed", true, true)];
    combos
        .iter()
        .map(|&(name, edge, text)| {
            let p = MaskParams {
                edge_margin_px: if edge { base.edge_margin_px } else { 0 },
                exclude_text: text,
                ..*base
            };
            Ok(MaskVariant {
                name: name.to_string(),
                mask: build_mask_with(template, &p)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct FeatureOptions {
    pub variants: Vec<MaskVariant>,
    /// Points kept per frame and variant, in brightness order.
    pub n_max: usize,
    /// Binning for the raw-correlation baseline; `None` skips it.
    pub maxcorr_bin: Option<usize>,
    pub diffuse: bool,
}

/// Everything the scorers need from one clip.
#[derive(Debug, Clone)]
pub struct ClipFeatures {
    pub alignment: AlignmentResult,
    /// `[variant][frame]` ranked points.
    pub ranked: Vec<Vec<Vec<(usize, usize)>>>,
    /// Standardized, binned background of every frame (first variant's mask).
    pub maxcorr: Option<Vec<Vec<f32>>>,
    pub norm: Option<NormMap>,
}

fn binned_standardized(f: &Grid<f64>, mask: &Grid<bool>, bin: usize) -> Result<Vec<f32>> {
    let (rows, cols) = f.dims();
    let mut v = Vec::with_capacity((rows / bin) * (cols / bin));
    for br in 0..rows / bin {
        for bc in 0..cols / bin {
            let mut acc = 0.0;
            let mut all = true;
            for r in br * bin..(br + 1) * bin {
                for c in bc * bin..(bc + 1) * bin {
                    all &= mask[(r, c)];
                    acc += f[(r, c)];
                }
            }
            if all {
                v.push(acc);
            }
        }
    }
    let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
    let norm = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>().sqrt();
    if v.is_empty() || norm <= 0.0 {
        return Err(Error::DegenerateInput("masked background is constant".into()));
    }
    Ok(v.iter().map(|x| ((x - mean) / norm) as f32).collect())
}

/// Aligns a clip to its template and keeps only what scoring needs.
pub fn extract_features<S: CaptureSource + ?Sized, E: TransformEstimator + ?Sized>(
    source: &S,
    clip: usize,
    opts: &FeatureOptions,
    estimator: &E,
) -> AppResult<ClipFeatures> {
    let template = source.template(clip)?;
    let mut aligner = ClipAligner::new(estimator, &template);
    let masks: Vec<&RegionMask> = opts.variants.iter().map(|v| &v.mask).collect();
    let mut ranked: Vec<Vec<Vec<(usize, usize)>>> = vec![Vec::new(); masks.len()];
    let mut maxcorr = opts.maxcorr_bin.map(|_| Vec::new());
    source.visit_frames(clip, &mut |frame| {
        let aligned = aligner.push(&frame)?.frame;
        for (slot, pts) in ranked.iter_mut().zip(ranked_specular_points_multi(&aligned, &masks, opts.n_max)?) {
            slot.push(pts);
        }
        if let (Some(out), Some(bin)) = (maxcorr.as_mut(), opts.maxcorr_bin) {
            out.push(binned_standardized(&aligned.pixels, &masks[masks.len() - 1].include, bin)?);
        }
        Ok(())
    })?;
    let alignment = aligner.alignment().ok_or_else(|| Error::InvalidParameter("clip has no frames".into()))?;
    let norm = if opts.diffuse {
        match source.scanner_capture(clip)? {
            Some([a, b, c, d]) => Some(estimate_norm_map(&a, &b, &c, &d, source.pitch_um())?),
            None => None,
        }
    } else {
        None
    };
    Ok(ClipFeatures {
        alignment,
        ranked,
        maxcorr,
        norm,
    })
}

/// Extracts features of every clip in parallel, keyed by clip index.
pub fn extract_all<S: CaptureSource + ?Sized, E: TransformEstimator + Sync + ?Sized>(
    source: &S,
    opts: &FeatureOptions,
    estimator: &E,
) -> AppResult<Vec<ClipFeatures>> {
    (0..source.clips().len())
        .into_par_iter()
        .map(|i| extract_features(source, i, opts, estimator))
        .collect()
}

/// Which slice of the extracted features a scoring pass uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringSetup {
    pub variant: usize,
    pub n: usize,
    pub frame_count: usize,
    pub tau: f64,
}

/// Per-job statistics from one frame sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JobScores {
    pub bundle_t_max: f64,
    pub t_robust: f64,
    pub zero_ratio: f64,
    pub srm: f64,
    pub max_corr: Option<f64>,
    pub diffuse: Option<f64>,
}

/// Indexed point sets for one variant and N.
pub fn index_frames(features: &[ClipFeatures], variant: usize, n: usize, dims: (usize, usize)) -> Result<Vec<Vec<IndexedFrame>>> {
    features
        .par_iter()
        .map(|f| {
            f.ranked
                .get(variant)
                .ok_or_else(|| Error::InvalidParameter("unknown mask variant".into()))?
                .iter()
                .map(|pts| {
                    if pts.len() < n {
                        return Err(Error::NotEnoughPixels {
                            requested: n,
                            available: pts.len(),
                        });
                    }
                    Ok(IndexedFrame::new(pts[..n].to_vec(), dims))
                })
                .collect()
        })
        .collect()
}

/// Frame samples of a job: test frames from one seed stream, reference
/// frames from another, as fingerprint enrollment would draw them.
pub fn job_frames(job: &BootstrapJob, test_len: usize, ref_len: usize, count: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    Ok((
        sample_frames(test_len, count, derive_seed(job.seed, &[0]))?,
        sample_frames(ref_len, count, derive_seed(job.seed, &[1]))?,
    ))
}

fn score_job(
    job: &BootstrapJob,
    indexed: &[Vec<IndexedFrame>],
    features: &[ClipFeatures],
    setup: &ScoringSetup,
    diffuse: &BTreeMap<(usize, usize), f64>,
) -> Result<JobScores> {
    let (a, b) = (job.pair.test, job.pair.reference);
    let (ti, ri) = job_frames(job, indexed[a].len(), indexed[b].len(), setup.frame_count)?;
    let mut raw = Vec::with_capacity(ti.len() * ri.len());
    for &t in &ti {
        for &r in &ri {
            raw.push(indexed[a][t].score(&indexed[b][r]));
        }
    }
    let bundle = ScoreBundle::from_scores(raw, setup.tau)?;
    let max_corr = match (&features[a].maxcorr, &features[b].maxcorr) {
        (Some(x), Some(y)) => {
            let mut best = f64::NEG_INFINITY;
            for &t in &ti {
                for &r in &ri {
                    let c: f32 = x[t].iter().zip(&y[r]).map(|(p, q)| p * q).sum();
                    best = best.max(c as f64);
                }
            }
            Some(best)
        }
        _ => None,
    };
    Ok(JobScores {
        bundle_t_max: bundle.t_max,
        t_robust: bundle.t_robust,
        zero_ratio: bundle.zero_ratio,
        srm: bundle.raw_scores[0],
        max_corr,
        diffuse: diffuse.get(&(a, b)).copied(),
    })
}

/// Scores of every job, in plan order.
pub fn score_jobs(
    clips: &[ClipRef],
    features: &[ClipFeatures],
    indexed: &[Vec<IndexedFrame>],
    setup: &ScoringSetup,
    repeats: usize,
    base_seed: u64,
    diffuse_mask: Option<&Grid<bool>>,
) -> Result<Vec<(BootstrapJob, JobScores)>> {
    let jobs = bootstrap_plan(clips, repeats, base_seed)?;
    let mut diffuse = BTreeMap::new();
    if let Some(mask) = diffuse_mask {
        for j in jobs.iter().filter(|j| j.repeat == 0) {
            if let (Some(x), Some(y)) = (&features[j.pair.test].norm, &features[j.pair.reference].norm) {
                let s = 0.5 * (diffuse_match_score(&x.nx, &y.nx, Some(mask))? + diffuse_match_score(&x.ny, &y.ny, Some(mask))?);
                diffuse.insert((j.pair.test, j.pair.reference), s);
            }
        }
    }
    jobs.par_iter()
        .map(|j| Ok((*j, score_job(j, indexed, features, setup, &diffuse)?)))
        .collect()
}

/// Turns job scores into samples of one statistic. The diffuse baseline
/// does not depend on frame sampling and contributes one sample per pair.
pub fn samples_for(kind: StatisticKind, clips: &[ClipRef], scored: &[(BootstrapJob, JobScores)]) -> Result<Vec<ScoreSample>> {
    let mut out = Vec::with_capacity(scored.len());
    for (job, s) in scored {
        let value = match kind {
            StatisticKind::Srm => Some(s.srm),
            StatisticKind::TMax => Some(s.bundle_t_max),
            StatisticKind::TRobust => Some(s.t_robust),
            StatisticKind::MaxCorr => s.max_corr,
            StatisticKind::DiffuseCorr if job.repeat == 0 => s.diffuse,
            StatisticKind::DiffuseCorr => continue,
        };
        let value = value.ok_or_else(|| Error::InsufficientData(format!("statistic {kind} was not extracted")))?;
        out.push(ScoreSample {
            value,
            label: job.pair.label,
            test: clips[job.pair.test].clone(),
            reference: clips[job.pair.reference].clone(),
            kind,
            repeat: job.repeat,
        });
    }
    Ok(out)
}

/// Extracted features for a whole dataset plus the masks they were taken under.
pub struct Benchmark {
    pub clips: Vec<ClipRef>,
    pub variants: Vec<MaskVariant>,
    pub features: Vec<ClipFeatures>,
    pub dims: (usize, usize),
    /// Index of the variant matching the configured mask.
    pub primary: usize,
}

impl Benchmark {
    /// Streams every clip of `source`. With `ablation`, all four masking
    /// variants are extracted; otherwise only the configured mask.
    pub fn extract<S: CaptureSource + ?Sized>(
        source: &S,
        cfg: &PipelineConfig,
        kinds: &[StatisticKind],
        ablation: bool,
        n_max: usize,
    ) -> AppResult<Self> {
        let template = source.mask_template()?;
        let params = cfg.mask.params();
        let mut variants = Vec::new();
        if ablation {
            variants.extend(masking_variants(&template, &params)?);
        }
        let configured = MaskVariant {
            name: "configured".into(),
            mask: build_mask_with(&template, &params)?,
        };
        let primary = match variants.iter().position(|v| v.mask == configured.mask) {
            Some(i) => i,
            None => {
                variants.push(configured);
                variants.len() - 1
            }
        };
        // the raw-correlation baseline uses the last variant's mask
        if primary != variants.len() - 1 {
            let v = variants.remove(primary);
            variants.push(v);
        }
        let primary = variants.len() - 1;
        let opts = FeatureOptions {
            variants: variants.clone(),
            n_max: n_max.max(cfg.specular.n_points),
            maxcorr_bin: kinds.contains(&StatisticKind::MaxCorr).then_some(cfg.eval.maxcorr_bin),
            diffuse: kinds.contains(&StatisticKind::DiffuseCorr),
        };
        let features = extract_all(source, &opts, &cfg.registration.estimator())?;
        Ok(Self {
            clips: source.clips().to_vec(),
            dims: template.dims(),
            variants,
            features,
            primary,
        })
    }

    pub fn variant_index(&self, name: &str) -> Option<usize> {
        self.variants.iter().position(|v| v.name == name)
    }

    /// Reports for each statistic under one scoring setup.
    pub fn evaluate(
        &self,
        kinds: &[StatisticKind],
        setup: &ScoringSetup,
        repeats: usize,
        base_seed: u64,
    ) -> Result<Vec<EvalReport>> {
        let indexed = index_frames(&self.features, setup.variant, setup.n, self.dims)?;
        let diffuse_mask = kinds
            .contains(&StatisticKind::DiffuseCorr)
            .then(|| &self.variants[setup.variant].mask.include);
        let scored = score_jobs(&self.clips, &self.features, &indexed, setup, repeats, base_seed, diffuse_mask)?;
        kinds
            .iter()
            .map(|&k| EvalReport::from_samples(k, samples_for(k, &self.clips, &scored)?))
            .collect()
    }

    /// Empirical `T^r` EER for one setup.
    pub fn trobust_eer(&self, setup: &ScoringSetup, repeats: usize, base_seed: u64) -> Result<f64> {
        Ok(self.evaluate(&[StatisticKind::TRobust], setup, repeats, base_seed)?[0].eer_empirical.eer)
    }

    pub fn default_setup(&self, cfg: &PipelineConfig) -> ScoringSetup {
        ScoringSetup {
            variant: self.primary,
            n: cfg.specular.n_points,
            frame_count: cfg.specular.frame_count,
            tau: cfg.specular.tau,
        }
    }
}
