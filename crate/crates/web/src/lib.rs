//! In-browser demo. Each operation has a plain Rust entry point returning a
//! serialisable value and a `wasm_bindgen` wrapper returning it as JSON.

use latent_debias::diagnostics::{project_2d_points, Point2};
use latent_debias::evaluation::{threshold, Threshold};
use latent_debias::experiments::{run_alignment, run_transfer, AlignmentSetup, MarginRow, TransferSetup};
use latent_debias::store::{EmbeddingSet, SpaceTag, Technique};
use latent_debias::Result;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest sample size the threshold curve accepts.
pub const MAX_CURVE_N: usize = 2000;
pub const MAX_TRAIN_ROWS: usize = 2000;
pub const MAX_EPOCHS: usize = 50;

/// Critical counts for every sample size from 2 to `n_max`.
pub fn threshold_curve(alpha: f64, n_max: usize) -> Result<Vec<Threshold>> {
    if !(2..=MAX_CURVE_N).contains(&n_max) {
        return Err(latent_debias::Error::Parameter(format!("n_max must be in 2..={MAX_CURVE_N}")));
    }
    (2..=n_max).map(|n| threshold(n, alpha)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct AlignmentDemo {
    pub raw_retrieval: f64,
    pub raw_cosine: f64,
    pub latent_retrieval: f64,
    pub latent_cosine: f64,
    pub dev_loss: Vec<f64>,
    pub best_epoch: usize,
    pub raw_points: Vec<Point2>,
    pub latent_points: Vec<Point2>,
}

fn small_setup(seed: u64, train_rows: usize, epochs: usize) -> Result<AlignmentSetup> {
    if !(16..=MAX_TRAIN_ROWS).contains(&train_rows) || !(1..=MAX_EPOCHS).contains(&epochs) {
        return Err(latent_debias::Error::Parameter(format!(
            "train rows must be in 16..={MAX_TRAIN_ROWS} and epochs in 1..={MAX_EPOCHS}"
        )));
    }
    let mut s = AlignmentSetup::desk(seed);
    s.train_rows = train_rows;
    s.dev_rows = 50;
    s.train.epochs = epochs;
    Ok(s)
}

/// Trains the autoencoder on a synthetic four-language world and projects
/// the dev sentences to 2-D before and after encoding.
pub fn alignment_demo(seed: u64, train_rows: usize, epochs: usize) -> Result<AlignmentDemo> {
    let run = run_alignment(&small_setup(seed, train_rows, epochs)?)?;
    let latent: Vec<EmbeddingSet> = run
        .dev
        .iter()
        .map(|s| Ok(EmbeddingSet { matrix: run.model.encode(&s.matrix)?, ..s.clone() }))
        .collect::<Result<_>>()?;
    let o = run.outcome;
    Ok(AlignmentDemo {
        raw_retrieval: o.raw_retrieval,
        raw_cosine: o.raw_cosine,
        latent_retrieval: o.latent_retrieval,
        latent_cosine: o.latent_cosine,
        dev_loss: o.history.epochs.iter().map(|e| e.dev_loss).collect(),
        best_epoch: o.history.best_epoch,
        raw_points: project_2d_points(&run.dev)?,
        latent_points: project_2d_points(&latent)?,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TransferDemo {
    pub latent_retrieval: f64,
    pub rows: Vec<MarginRow>,
    /// Mean margin drop per technique: `[original, latent]`.
    pub sentdebias: [f64; 2],
    pub inlp: [f64; 2],
}

/// Fits both techniques on English and probes the other languages for the
/// planted attribute after applying them.
pub fn transfer_demo(seed: u64, train_rows: usize, epochs: usize) -> Result<TransferDemo> {
    let mut setup = TransferSetup::desk(seed);
    setup.alignment = small_setup(seed, train_rows, epochs)?;
    setup.eval_rows = 300;
    let o = run_transfer(&setup)?;
    let pair = |t| [o.reduction(t, SpaceTag::Original), o.reduction(t, SpaceTag::Latent)];
    Ok(TransferDemo {
        latent_retrieval: o.alignment.latent_retrieval,
        sentdebias: pair(Technique::SentDebias),
        inlp: pair(Technique::Inlp),
        rows: o.rows,
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = thresholdCurve)]
pub fn threshold_curve_js(alpha: f64, n_max: usize) -> std::result::Result<String, JsError> {
    to_js(threshold_curve(alpha, n_max))
}

#[wasm_bindgen(js_name = alignmentDemo)]
pub fn alignment_demo_js(seed: u32, train_rows: usize, epochs: usize) -> std::result::Result<String, JsError> {
    to_js(alignment_demo(seed as u64, train_rows, epochs))
}

#[wasm_bindgen(js_name = transferDemo)]
pub fn transfer_demo_js(seed: u32, train_rows: usize, epochs: usize) -> std::result::Result<String, JsError> {
    to_js(transfer_demo(seed as u64, train_rows, epochs))
}
