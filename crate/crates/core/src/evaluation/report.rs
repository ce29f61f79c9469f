use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::seed::{derive_seed, hash_str};

use super::eer::{eer_empirical, eer_parametric, EerPoint};
use super::pairs::{enumerate_pairs, ClipRef, Label, PairSpec};
use super::pdf::{fit_pdf, FittedPdf, PdfFamily};

/// Default number of frame-sampling repeats per pair.
pub const DEFAULT_REPEATS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StatisticKind {
    /// Robust matching score of a single sampled frame pair.
    Srm,
    TMax,
    TRobust,
    /// Largest raw background correlation over sampled frame pairs.
    MaxCorr,
    /// Norm-map correlation from scanner captures.
    DiffuseCorr,
}

impl StatisticKind {
    pub const ALL: [StatisticKind; 5] = [
        StatisticKind::Srm,
        StatisticKind::TMax,
        StatisticKind::TRobust,
        StatisticKind::MaxCorr,
        StatisticKind::DiffuseCorr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StatisticKind::Srm => "srm",
            StatisticKind::TMax => "tmax",
            StatisticKind::TRobust => "trobust",
            StatisticKind::MaxCorr => "maxcorr",
            StatisticKind::DiffuseCorr => "diffuse",
        }
    }
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| invalid(alloc::format!("unknown statistic {s:?}")))
    }
}

/// One score of one pair under one frame-sampling repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSample {
    pub value: f64,
    pub label: Label,
    pub test: ClipRef,
    pub reference: ClipRef,
    pub kind: StatisticKind,
    pub repeat: usize,
}

/// Seed for one pair and repeat, independent of enumeration order.
pub fn pair_seed(base_seed: u64, test: &ClipRef, reference: &ClipRef, repeat: usize) -> u64 {
    derive_seed(
        base_seed,
        &[
            hash_str(&test.chip_id),
            hash_str(&test.clip_id),
            hash_str(&reference.chip_id),
            hash_str(&reference.clip_id),
            repeat as u64,
        ],
    )
}

/// One scoring job of a bootstrap run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootstrapJob {
    pub pair: PairSpec,
    pub repeat: usize,
    pub seed: u64,
}

/// All pair × repeat jobs, so a caller can score them in any order or in parallel.
pub fn bootstrap_plan(clips: &[ClipRef], repeats: usize, base_seed: u64) -> Result<Vec<BootstrapJob>> {
    if repeats == 0 {
        return Err(invalid("repeats must be at least 1"));
    }
    let pairs = enumerate_pairs(clips)?;
    let mut jobs = Vec::with_capacity(pairs.len() * repeats);
    for pair in pairs {
        for repeat in 0..repeats {
            let seed = pair_seed(base_seed, &clips[pair.test], &clips[pair.reference], repeat);
            jobs.push(BootstrapJob { pair, repeat, seed });
        }
    }
    Ok(jobs)
}

/// Scores every job of [`bootstrap_plan`] sequentially.
pub fn bootstrap_scores<F>(
    clips: &[ClipRef],
    kind: StatisticKind,
    repeats: usize,
    base_seed: u64,
    mut score: F,
) -> Result<Vec<ScoreSample>>
where
    F: FnMut(&BootstrapJob) -> Result<f64>,
{
    bootstrap_plan(clips, repeats, base_seed)?
        .iter()
        .map(|job| {
            Ok(ScoreSample {
                value: score(job)?,
                label: job.pair.label,
                test: clips[job.pair.test].clone(),
                reference: clips[job.pair.reference].clone(),
                kind,
                repeat: job.repeat,
            })
        })
        .collect()
}

/// Matched and unmatched fits for one family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitPair {
    pub matched: FittedPdf,
    pub unmatched: FittedPdf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub kind: StatisticKind,
    pub samples: Vec<ScoreSample>,
    pub laplace: FitPair,
    pub gaussian: FitPair,
    pub eer_laplace: EerPoint,
    pub eer_gaussian: EerPoint,
    pub eer_empirical: EerPoint,
    /// Threshold of the empirical operating point.
    pub threshold_at_eer: f64,
}

/// Splits sample values by label.
pub fn split_by_label(samples: &[ScoreSample]) -> (Vec<f64>, Vec<f64>) {
    let mut m = Vec::new();
    let mut u = Vec::new();
    for s in samples {
        match s.label {
            Label::Matched => m.push(s.value),
            Label::Unmatched => u.push(s.value),
        }
    }
    (m, u)
}

impl EvalReport {
    pub fn from_samples(kind: StatisticKind, samples: Vec<ScoreSample>) -> Result<Self> {
        let (m, u) = split_by_label(&samples);
        let eer_empirical = eer_empirical(&m, &u)?;
        let fit = |fam| -> Result<FitPair> {
            Ok(FitPair {
                matched: fit_pdf(&m, fam)?,
                unmatched: fit_pdf(&u, fam)?,
            })
        };
        let laplace = fit(PdfFamily::Laplace)?;
        let gaussian = fit(PdfFamily::Gaussian)?;
        Ok(Self {
            kind,
            eer_laplace: eer_parametric(&laplace.matched, &laplace.unmatched)?,
            eer_gaussian: eer_parametric(&gaussian.matched, &gaussian.unmatched)?,
            threshold_at_eer: eer_empirical.threshold,
            eer_empirical,
            laplace,
            gaussian,
            samples,
        })
    }

    pub fn fits(&self, family: PdfFamily) -> &FitPair {
        match family {
            PdfFamily::Laplace => &self.laplace,
            PdfFamily::Gaussian => &self.gaussian,
        }
    }

    pub fn eer(&self, family: PdfFamily) -> EerPoint {
        match family {
            PdfFamily::Laplace => self.eer_laplace,
            PdfFamily::Gaussian => self.eer_gaussian,
        }
    }

    /// Whether every matched sample scores strictly above every unmatched one.
    pub fn separated(&self) -> bool {
        let (m, u) = split_by_label(&self.samples);
        let lo = m.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lo > hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::ToString;

    fn dataset(chips: usize, clips: usize) -> Vec<ClipRef> {
        (0..chips)
            .flat_map(|c| (0..clips).map(move |k| ClipRef::new(format!("chip{c}"), format!("clip{k}"))))
            .collect()
    }

    #[test]
    fn kinds_round_trip() {
        for k in StatisticKind::ALL {
            assert_eq!(k.to_string().parse::<StatisticKind>().unwrap(), k);
        }
        assert!("nope".parse::<StatisticKind>().is_err());
    }

    #[test]
    fn bootstrap_counts_and_determinism() {
        let d = dataset(8, 3);
        let s = bootstrap_scores(&d, StatisticKind::TRobust, 50, 7, |j| Ok((j.seed % 13) as f64)).unwrap();
        let (m, u) = split_by_label(&s);
        assert_eq!((m.len(), u.len()), (24 * 50, 252 * 50));
        let again = bootstrap_scores(&d, StatisticKind::TRobust, 50, 7, |j| Ok((j.seed % 13) as f64)).unwrap();
        assert_eq!(s, again);
        let other = bootstrap_scores(&d, StatisticKind::TRobust, 50, 8, |j| Ok((j.seed % 13) as f64)).unwrap();
        assert_ne!(s, other);
        assert!(bootstrap_plan(&d, 0, 7).is_err());
    }

    #[test]
    fn seeds_do_not_depend_on_dataset_size() {
        let small = dataset(3, 2);
        let big = dataset(5, 2);
        let a = bootstrap_plan(&small, 2, 1).unwrap();
        let b = bootstrap_plan(&big, 2, 1).unwrap();
        for j in &a {
            let same = b
                .iter()
                .find(|k| big[k.pair.test] == small[j.pair.test] && big[k.pair.reference] == small[j.pair.reference] && k.repeat == j.repeat)
                .unwrap();
            assert_eq!(same.seed, j.seed);
        }
    }

    #[test]
    fn report_on_separated_scores() {
        let d = dataset(4, 3);
        let s = bootstrap_scores(&d, StatisticKind::TRobust, 3, 1, |j| {
            Ok(if j.pair.label == Label::Matched {
                40.0 + (j.seed % 7) as f64
            } else {
                0.0
            })
        })
        .unwrap();
        let r = EvalReport::from_samples(StatisticKind::TRobust, s).unwrap();
        assert!(r.separated());
        assert_eq!(r.eer_empirical.eer, 0.0);
        assert_eq!(r.laplace.unmatched.scale, crate::evaluation::SCALE_FLOOR);
        assert!(r.eer_laplace.eer < 1e-6 && r.eer_gaussian.eer < 1e-6);
        for e in [r.eer_laplace, r.eer_gaussian, r.eer_empirical] {
            assert!((0.0..=0.5).contains(&e.eer));
        }
    }
}
