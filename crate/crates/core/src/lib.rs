//! Probabilistic name matching: normalized IDF scores passed through a
//! sigmoid, with learned term translations and bigram repair of spacing
//! differences.
//!
//! The usual flow is [`Corpus`] → [`IndexSnapshot`] → [`TrMap`] and
//! [`MaxTrTable`] learned from positive pairs → [`ModelWeights`], all of
//! which [`Engine`] bundles into one snapshot.

pub mod baselines;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod index;
pub mod scorer;
pub mod seed;
pub mod synthgen;
pub mod text;
pub mod training;
pub mod translation;

pub use baselines::{rank_baseline, BaselineKind, BaselineResult};
pub use engine::{learn_translations, Engine, EngineConfig, Estimator, TrainSummary};
pub use error::{Error, Result};
pub use index::IndexSnapshot;
pub use scorer::{
    fraction, probability, rank, rank_naive, ModelWeights, RankedResult, ScoreBreakdown, Tables, Variant,
};
pub use synthgen::{generate_pairs, perturb, EquivalenceTable, GenParams};
pub use text::{bigrams, tokenize, Corpus, DocId, DocIdx, Document, LabeledPair, Polarity, Query, Term};
pub use training::{fit_weights, log_loss, sample_negatives, FitReport, TrainConfig};
pub use translation::{
    accumulate_counts, compute_max_tr, estimate_tr, estimate_tr_gao, inject_bigrams, MaxTrTable, Origin, TrCounts,
    TrEntry, TrMap, TrParams,
};
