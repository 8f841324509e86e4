//! Which part of the decomposition a degradation lives in.
//!
//! Swapping singular vectors or singular values between a clean image and its
//! degraded version, then measuring how far the recomposition is from the
//! clean image, separates degradations that distort structure (vectors) from
//! those that rescale energy (values).

mod corpus;
mod stats;

pub use corpus::{corpus_report, CorpusReport, ImageRecord, MeanStd, TaggedPair, TaskSummary};
pub use stats::{
    analyze_pair, classify, DegradationStats, Dominance, DominanceLabel, Quartiles, REPEATED_SIGMA_GAP, TIE_TOLERANCE,
};
