//! Stereotype-preference scoring, significance thresholds and report tables.

mod report;
mod score;

pub use report::{
    aggregate, format_score, BiasReport, CellScore, Condition, ConditionAverage, TypeAverage, REFERENCE_SAMPLE_SIZE,
    REPORT_VERSION,
};
pub use score::{score, score_counts, threshold, z_quantile, BiasScore, Threshold, DEFAULT_ALPHA};
