//! Quality features, per-language threshold filters and percentile
//! calibration.

mod calibrate;
mod features;
mod filter;
mod ppl;

pub use calibrate::{calibrate_percentiles, nearest_rank, quantile, DEFAULT_PERCENTILE, MIN_CALIBRATION_SAMPLE};
pub use features::{compute_features, features_of_text, FeatureVector, DUP_NGRAM_ORDERS, TOP_NGRAM_ORDERS};
pub use filter::{
    apply_basic_filter, apply_full_filter, DropReason, FilterConfig, LangThresholds, NoiseFeature,
    PercentileCutoffs, Verdict, TABLE_ORDER,
};
pub use ppl::{train_perplexity_models, CharBigramModel, PerplexityModels, PPL_SMOOTHING};

use crate::lang::Lang;

#[derive(Debug, thiserror::Error)]
pub enum HeuristicsError {
    #[error("no thresholds configured for language `{0}`")]
    UnknownLanguage(Lang),
    #[error("no percentile cutoffs calibrated for language `{0}`")]
    MissingCutoffs(Lang),
    #[error("calibration sample has {got} documents, at least {required} required")]
    SampleTooSmall { got: usize, required: usize },
    #[error("invalid filter config: {0}")]
    Config(String),
}
