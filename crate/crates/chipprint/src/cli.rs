//! Command-line front end: argument parsing and the five commands.

use std::io::Write;
use std::path::{Path, PathBuf};

use chipprint_core::evaluation::{EvalReport, PdfFamily, StatisticKind};
use chipprint_core::registration::{warp, TransformEstimator};
use chipprint_core::specular_auth::{build_mask_with, observed_specular_points, sample_frames, score_bundle, Fingerprint, ScoreBundle};
use chipprint_core::surface_sim::Frame;
use clap::{Parser, Subcommand, ValueEnum};

use crate::bench::{Benchmark, ScoringSetup};
use crate::config::PipelineConfig;
use crate::dataset::{ingest_dataset, simulate_dataset, DiskSource};
use crate::error::{exit, AppError, AppResult};
use crate::formats::{encode_transform, read_fingerprint, read_frame, write_fingerprint, write_report, write_text};

#[derive(Debug, Parser)]
#[command(name = "chipprint", version, about = "Chip surface fingerprinting from specular highlights")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides `eval.seed`: dataset seed, frame-sampling seed or bootstrap seed.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic dataset.
    Simulate {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        chips: usize,
        #[arg(long, default_value_t = 3)]
        clips: usize,
    },
    /// Extract a fingerprint from a directory of PGM frames.
    Enroll {
        clip: PathBuf,
        template: PathBuf,
        /// Template the mask is built from; defaults to TEMPLATE.
        #[arg(long, value_name = "PATH")]
        mask_template: Option<PathBuf>,
        /// Defaults to the name of the clip's parent directory.
        #[arg(long)]
        chip_id: Option<String>,
        /// Defaults to the clip directory's name.
        #[arg(long)]
        clip_id: Option<String>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Compare two fingerprints; exit 0 accepts, 1 rejects.
    Verify {
        test: PathBuf,
        reference: PathBuf,
        /// Also write the decision record as JSON.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Score every clip pair of a dataset and write reports.
    Evaluate {
        dataset: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Statistics to report; defaults to `eval.statistics`.
        #[arg(long = "stat", value_enum)]
        stats: Vec<StatArg>,
        #[arg(long, value_enum)]
        sweep: Option<Sweep>,
    },
    /// Build a dataset manifest from captured PGM frames.
    Ingest {
        source: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatArg {
    Srm,
    Tmax,
    Trobust,
    Maxcorr,
    Diffuse,
}

impl From<StatArg> for StatisticKind {
    fn from(s: StatArg) -> Self {
        match s {
            StatArg::Srm => StatisticKind::Srm,
            StatArg::Tmax => StatisticKind::TMax,
            StatArg::Trobust => StatisticKind::TRobust,
            StatArg::Maxcorr => StatisticKind::MaxCorr,
            StatArg::Diffuse => StatisticKind::DiffuseCorr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Sweep {
    Frames,
    Points,
    Masking,
    Seeds,
}

/// Outcome of a verification.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub bundle: ScoreBundle,
    pub threshold: f64,
    pub accept: bool,
}

impl Decision {
    pub fn record(&self) -> serde_json::Value {
        serde_json::json!({
            "t_robust": self.bundle.t_robust,
            "t_max": self.bundle.t_max,
            "zero_ratio": self.bundle.zero_ratio,
            "tau": self.bundle.tau,
            "threshold": self.threshold,
            "decision": if self.accept { "accept" } else { "reject" },
        })
    }
}

pub fn load_config(cli: &Cli) -> AppResult<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.eval.seed = s;
    }
    Ok(cfg)
}

/// PGM frames of a clip directory in file-name order, scanner passes excluded.
pub fn clip_frames(dir: &Path) -> AppResult<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| AppError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "pgm"))
        .filter(|p| !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("scan")))
        .collect();
    v.sort();
    if v.is_empty() {
        return Err(AppError::format(dir, 0, "no PGM frames in clip directory"));
    }
    Ok(v)
}

/// Aligns frame 0 to the template, then extracts the sampled frames only.
pub fn enroll(
    cfg: &PipelineConfig,
    frames: &[PathBuf],
    template: &Frame,
    mask_template: &Frame,
    chip_id: &str,
    clip_id: &str,
) -> AppResult<(Fingerprint, chipprint_core::registration::AlignmentResult)> {
    let mask = build_mask_with(mask_template, &cfg.mask.params())?;
    let seed = cfg.eval.seed;
    let ids = sample_frames(frames.len(), cfg.specular.frame_count, seed)?;
    let first = read_frame(&frames[0])?;
    let alignment = cfg.registration.estimator().estimate(&first, template)?;
    let inverse = alignment.transform.inverse();
    let mut sets = Vec::with_capacity(ids.len());
    for &i in &ids {
        let f = if i == 0 { first.clone() } else { read_frame(&frames[i])? };
        let aligned = warp(&f, &inverse, template.dims()).frame;
        sets.push(observed_specular_points(&aligned, &mask, cfg.specular.n_points, i)?);
    }
    let fp = Fingerprint::new(chip_id, clip_id, sets, mask.digest(), cfg.specular.n_points, seed)?;
    Ok((fp, alignment))
}

pub fn verify(cfg: &PipelineConfig, test: &Fingerprint, reference: &Fingerprint) -> AppResult<Decision> {
    let bundle = score_bundle(test, reference, cfg.specular.tau)?;
    let threshold = cfg.specular.accept_threshold;
    Ok(Decision {
        accept: bundle.t_robust > threshold,
        bundle,
        threshold,
    })
}

fn dir_name(p: &Path) -> Option<String> {
    p.file_name().map(|s| s.to_string_lossy().into_owned())
}

fn summary_line(r: &EvalReport, families: &[PdfFamily]) -> String {
    let mut s = format!("{:<8}", r.kind.as_str());
    for f in families {
        s.push_str(&format!(" eer_{}={:.6}", f.as_str(), r.eer(*f).eer));
    }
    s.push_str(&format!(" eer_empirical={:.6} separated={}", r.eer_empirical.eer, r.separated()));
    s
}

/// Runs the evaluation (or one sweep) and writes reports below `out`.
pub fn evaluate(cfg: &PipelineConfig, dataset: &Path, out: &Path, kinds: &[StatisticKind], sweep: Option<Sweep>, log: &mut dyn Write) -> AppResult<()> {
    let source = DiskSource::open(dataset)?;
    let families = cfg.eval.pdf_families()?;
    let snapshot = serde_json::to_value(cfg).expect("config serializes");
    let n_max = match sweep {
        Some(Sweep::Points) => cfg.eval.point_sweep.iter().copied().max().unwrap_or(0),
        _ => 0,
    };
    let bench = Benchmark::extract(&source, cfg, kinds, sweep == Some(Sweep::Masking), n_max)?;
    let base = bench.default_setup(cfg);
    let (repeats, seed) = (cfg.eval.repeats, cfg.eval.seed);

    let runs: Vec<(String, ScoringSetup, u64)> = match sweep {
        None => vec![(String::new(), base, seed)],
        Some(Sweep::Frames) => cfg.eval.frame_sweep.iter().map(|&k| (k.to_string(), ScoringSetup { frame_count: k, ..base }, seed)).collect(),
        Some(Sweep::Points) => cfg.eval.point_sweep.iter().map(|&n| (n.to_string(), ScoringSetup { n, ..base }, seed)).collect(),
        Some(Sweep::Masking) => bench
            .variants
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.clone(), ScoringSetup { variant: i, ..base }, seed))
            .collect(),
        Some(Sweep::Seeds) => cfg.eval.seed_sweep.iter().map(|&s| (s.to_string(), base, s)).collect(),
    };

    let mut table = String::from("sweep,value,statistic,eer_empirical,eer_laplace,eer_gaussian\n");
    let sweep_name = match sweep {
        None => "none",
        Some(Sweep::Frames) => "frames",
        Some(Sweep::Points) => "points",
        Some(Sweep::Masking) => "masking",
        Some(Sweep::Seeds) => "seeds",
    };
    for (label, setup, s) in &runs {
        let reports = bench.evaluate(kinds, setup, repeats, *s)?;
        let dir = if label.is_empty() { out.to_path_buf() } else { out.join(format!("{sweep_name}_{label}")) };
        for r in &reports {
            let mut snap = snapshot.clone();
            snap["run"] = serde_json::json!({ "sweep": sweep_name, "value": label, "seed": s, "frame_count": setup.frame_count, "n": setup.n, "mask": bench.variants[setup.variant].name });
            write_report(&dir, r, &snap)?;
            table.push_str(&format!(
                "{sweep_name},{label},{},{},{},{}\n",
                r.kind.as_str(),
                r.eer_empirical.eer,
                r.laplace_eer(),
                r.gaussian_eer()
            ));
            let prefix = if label.is_empty() { String::new() } else { format!("{sweep_name}={label} ") };
            writeln!(log, "{prefix}{}", summary_line(r, &families)).map_err(|e| AppError::io(out, e))?;
        }
    }
    write_text(&out.join(format!("summary_{sweep_name}.csv")), &table)
}

trait FamilyEers {
    fn laplace_eer(&self) -> f64;
    fn gaussian_eer(&self) -> f64;
}

impl FamilyEers for EvalReport {
    fn laplace_eer(&self) -> f64 {
        self.eer_laplace.eer
    }
    fn gaussian_eer(&self) -> f64 {
        self.eer_gaussian.eer
    }
}

/// Executes a parsed command; the returned code is the process exit status.
pub fn run(cli: &Cli, log: &mut dyn Write) -> AppResult<i32> {
    let cfg = load_config(cli)?;
    let io = |e: std::io::Error| AppError::io(Path::new("<stdout>"), e);
    match &cli.command {
        Command::Simulate { out, chips, clips } => {
            let m = simulate_dataset(&cfg, *chips, *clips, cfg.eval.seed, out)?;
            let n: usize = m.chips.iter().map(|c| c.clips.len()).sum();
            writeln!(log, "simulated {} chips, {n} clips into {}", m.chips.len(), out.display()).map_err(io)?;
            Ok(exit::OK)
        }
        Command::Enroll {
            clip,
            template,
            mask_template,
            chip_id,
            clip_id,
            out,
        } => {
            let frames = clip_frames(clip)?;
            let template_frame = read_frame(template)?;
            let mask_frame = match mask_template {
                Some(p) => read_frame(p)?,
                None => template_frame.clone(),
            };
            let chip_id = chip_id
                .clone()
                .or_else(|| clip.canonicalize().ok().and_then(|p| p.parent().and_then(dir_name)))
                .unwrap_or_else(|| "chip".into());
            let clip_id = clip_id.clone().or_else(|| clip.canonicalize().ok().and_then(|p| dir_name(&p))).unwrap_or_else(|| "clip".into());
            let (fp, alignment) = enroll(&cfg, &frames, &template_frame, &mask_frame, &chip_id, &clip_id)?;
            write_fingerprint(out, &fp)?;
            write!(log, "enrolled {chip_id}/{clip_id}: {} frames x {} points, transform {}", fp.frame_count(), fp.n, encode_transform(&alignment.transform)).map_err(io)?;
            Ok(exit::OK)
        }
        Command::Verify { test, reference, out } => {
            let d = verify(&cfg, &read_fingerprint(test)?, &read_fingerprint(reference)?)?;
            writeln!(
                log,
                "t_robust={} t_max={} zero_ratio={:.4} decision={}",
                d.bundle.t_robust,
                d.bundle.t_max,
                d.bundle.zero_ratio,
                if d.accept { "accept" } else { "reject" }
            )
            .map_err(io)?;
            if let Some(p) = out {
                write_text(p, &(serde_json::to_string_pretty(&d.record()).expect("record serializes") + "\n"))?;
            }
            Ok(if d.accept { exit::OK } else { exit::REJECT })
        }
        Command::Evaluate { dataset, out, stats, sweep } => {
            let kinds: Vec<StatisticKind> = if stats.is_empty() {
                cfg.eval.statistic_kinds()?
            } else {
                stats.iter().map(|&s| s.into()).collect()
            };
            evaluate(&cfg, dataset, out, &kinds, *sweep, log)?;
            Ok(exit::OK)
        }
        Command::Ingest { source, out } => {
            let m = ingest_dataset(source, out, cfg.surface.pitch_um)?;
            let n: usize = m.chips.iter().map(|c| c.clips.len()).sum();
            writeln!(log, "ingested {} chips, {n} clips into {}", m.chips.len(), out.display()).map_err(io)?;
            Ok(exit::OK)
        }
    }
}
