//! Iterative nullspace projection: train a linear probe for the protected
//! attribute, project out its rowspace, repeat.

mod probe;
mod projection;

pub use probe::{majority_rate, train_probe, Probe, ProbeDataset, HOLDOUT_FRACTION, PROBE_LR, PROBE_MAX_STEPS};
pub use projection::{
    fit_inlp, nullspace_step, rank_estimate, InlpConfig, InlpFit, NullspaceStep, ProjectionMatrix, DEFAULT_ITERATIONS,
    DEFAULT_STOP_MARGIN,
};
