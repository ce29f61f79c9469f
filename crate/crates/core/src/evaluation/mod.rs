//! Pair enumeration, score distributions and equal error rates.

mod eer;
mod pairs;
mod pdf;
mod report;

pub use eer::{eer_empirical, eer_empirical_naive, eer_parametric, normal_cdf, EerPoint};
pub use pairs::{enumerate_pairs, ClipRef, Label, PairSpec};
pub use pdf::{density_curve, fit_pdf, FittedPdf, PdfFamily, SCALE_FLOOR};
pub use report::{
    bootstrap_plan, bootstrap_scores, pair_seed, split_by_label, BootstrapJob, EvalReport, FitPair, ScoreSample,
    StatisticKind, DEFAULT_REPEATS,
};
