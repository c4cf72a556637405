//! End-to-end runs on synthetic worlds: does the latent space align
//! translations, and does debiasing fit in one language carry over to others?

use serde::{Deserialize, Serialize};

use crate::autoencoder::{train, AutoencoderModel, ParallelCorpus, TrainConfig, TrainHistory};
use crate::debias::DebiasTransform;
use crate::diagnostics::{mean_parallel_cosine_rows, retrieval_accuracy_rows};
use crate::error::{Error, Result};
use crate::inlp::{train_probe, InlpConfig, ProbeDataset, ProjectionMatrix};
use crate::numcore::{Matrix, SeededRng};
use crate::sentdebias::{BiasSubspace, GroupKind};
use crate::store::{Alignment, BiasType, EmbeddingSet, LanguageId, SpaceTag, Split, Technique};
use crate::synthetic::{SyntheticWorld, WorldConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentSetup {
    pub world: WorldConfig,
    pub train_rows: usize,
    pub dev_rows: usize,
    pub train: TrainConfig,
    pub data_seed: u64,
}

impl AlignmentSetup {
    /// Sizes that train in seconds on one core.
    pub fn desk(seed: u64) -> Self {
        AlignmentSetup {
            world: WorldConfig { seed, ..WorldConfig::default() },
            train_rows: 2000,
            dev_rows: 100,
            train: TrainConfig {
                hidden_dims: vec![64],
                latent_dim: 8,
                lr: 3e-3,
                batch_size: 64,
                seed,
                ..TrainConfig::default()
            },
            data_seed: seed.wrapping_add(100),
        }
    }
}

/// Means over every unordered language pair of the dev sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentOutcome {
    pub raw_retrieval: f64,
    pub raw_cosine: f64,
    pub latent_retrieval: f64,
    pub latent_cosine: f64,
    pub history: TrainHistory,
}

pub struct AlignmentRun {
    pub world: SyntheticWorld,
    pub model: AutoencoderModel,
    pub dev: Vec<EmbeddingSet>,
    pub outcome: AlignmentOutcome,
    pub rng: SeededRng,
}

fn pairwise_mean(mats: &[Matrix], f: impl Fn(&Matrix, &Matrix) -> Result<f64>) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for i in 0..mats.len() {
        for j in (i + 1)..mats.len() {
            total += f(&mats[i], &mats[j])?;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Data("need at least two languages".into()));
    }
    Ok(total / n as f64)
}

/// Mean retrieval accuracy and parallel cosine over all language pairs.
pub fn alignment_scores(mats: &[Matrix]) -> Result<(f64, f64)> {
    Ok((
        pairwise_mean(mats, |a, b| Ok(retrieval_accuracy_rows(a, b)?.accuracy))?,
        pairwise_mean(mats, mean_parallel_cosine_rows)?,
    ))
}

pub fn run_alignment(setup: &AlignmentSetup) -> Result<AlignmentRun> {
    let world = SyntheticWorld::new(setup.world.clone())?;
    let mut rng = SeededRng::new(setup.data_seed);
    let st = world.semantics(setup.train_rows, &mut rng);
    let train_sets = world.parallel_sets(&st, Split::Train, "t", &mut rng)?;
    let sd = world.semantics(setup.dev_rows, &mut rng);
    let dev = world.parallel_sets(&sd, Split::Dev, "d", &mut rng)?;
    let (tc, _) = ParallelCorpus::from_sets(&train_sets, &Alignment::IdEquality)?;
    let (dc, _) = ParallelCorpus::from_sets(&dev, &Alignment::IdEquality)?;
    let trained = train(&tc, &dc, &setup.train)?;

    let raw: Vec<Matrix> = dev.iter().map(|s| s.matrix.clone()).collect();
    let latent = raw.iter().map(|m| trained.model.encode(m)).collect::<Result<Vec<_>>>()?;
    let (raw_retrieval, raw_cosine) = alignment_scores(&raw)?;
    let (latent_retrieval, latent_cosine) = alignment_scores(&latent)?;
    Ok(AlignmentRun {
        world,
        model: trained.model,
        dev,
        outcome: AlignmentOutcome {
            raw_retrieval,
            raw_cosine,
            latent_retrieval,
            latent_cosine,
            history: trained.history,
        },
        rng,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferSetup {
    pub alignment: AlignmentSetup,
    pub fit_language: LanguageId,
    /// Counterfactual pairs in the fit language.
    pub debias_pairs: usize,
    /// Labelled rows per held-out language for the recoverability probe.
    pub eval_rows: usize,
    pub bias_strength: f32,
    pub inlp: InlpConfig,
}

impl TransferSetup {
    pub fn desk(seed: u64) -> Self {
        TransferSetup {
            alignment: AlignmentSetup::desk(seed),
            fit_language: LanguageId::new("en").expect("valid code"),
            debias_pairs: 200,
            eval_rows: 600,
            bias_strength: 2.0,
            inlp: InlpConfig { seed, ..InlpConfig::default() },
        }
    }
}

/// Held-out probe accuracy minus majority rate, before and after debiasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginRow {
    pub language: LanguageId,
    pub technique: Technique,
    pub base: f64,
    pub original: f64,
    pub latent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferOutcome {
    pub alignment: AlignmentOutcome,
    pub rows: Vec<MarginRow>,
}

impl TransferOutcome {
    /// Mean drop in recoverability margin for one technique and space.
    pub fn reduction(&self, technique: Technique, space: SpaceTag) -> f64 {
        let rows: Vec<&MarginRow> = self.rows.iter().filter(|r| r.technique == technique).collect();
        let drop = |r: &MarginRow| match space {
            SpaceTag::Original => r.base - r.original,
            SpaceTag::Latent => r.base - r.latent,
        };
        rows.iter().map(|r| drop(r)).sum::<f64>() / rows.len().max(1) as f64
    }
}

/// Probe margin above the majority rate on a held-out split.
pub fn recoverability(x: &Matrix, labels: &[usize], seed: u64) -> Result<f64> {
    let p = train_probe(&ProbeDataset::new(x.clone(), labels)?, seed)?;
    Ok(p.accuracy - p.majority)
}

/// Fits SentDebias and INLP in the fit language, in both spaces, and
/// measures how much bias a fresh probe recovers from each other language.
///
/// Latent-space transforms are applied as encode → transform → decode with
/// the evaluated language's decoder, so both spaces are probed in raw space.
pub fn run_transfer(setup: &TransferSetup) -> Result<TransferOutcome> {
    let AlignmentRun { world, model, outcome, mut rng, .. } = run_alignment(&setup.alignment)?;
    let fit = &setup.fit_language;
    let cf = world.counterfactual_pairs(setup.debias_pairs, setup.bias_strength, &mut rng);
    let h = world.embed(fit, &cf.semantics, &mut rng)?;
    let z = model.encode(&h)?;
    let groups =
        |x: &Matrix| -> Vec<Matrix> { (0..setup.debias_pairs).map(|i| x.select_rows(&[2 * i, 2 * i + 1])).collect() };
    let bias = BiasType::Gender;
    let subspace = |x: &Matrix, space| {
        BiasSubspace::fit(&groups(x), GroupKind::Counterfactual, 1, bias, space, fit.clone())
            .map(DebiasTransform::Subspace)
    };
    let projection = |x: &Matrix, space| {
        ProjectionMatrix::fit(&ProbeDataset::new(x.clone(), &cf.labels)?, &setup.inlp, bias, space, fit.clone())
            .map(|(p, _)| DebiasTransform::Projection(p))
    };
    let transforms = [
        (Technique::SentDebias, subspace(&h, SpaceTag::Original)?, subspace(&z, SpaceTag::Latent)?),
        (Technique::Inlp, projection(&h, SpaceTag::Original)?, projection(&z, SpaceTag::Latent)?),
    ];

    let probe_seed = setup.inlp.seed.wrapping_add(1000);
    let mut rows = Vec::new();
    for lang in world.languages().iter().filter(|l| *l != fit) {
        let sample = world.planted(setup.eval_rows, setup.bias_strength, &mut rng);
        let x = world.embed(lang, &sample.semantics, &mut rng)?;
        let base = recoverability(&x, &sample.labels, probe_seed)?;
        for (technique, orig, lat) in &transforms {
            rows.push(MarginRow {
                language: lang.clone(),
                technique: *technique,
                base,
                original: recoverability(&orig.apply_embeddings(&x, lang, None)?, &sample.labels, probe_seed)?,
                latent: recoverability(&lat.apply_embeddings(&x, lang, Some(&model))?, &sample.labels, probe_seed)?,
            });
        }
    }
    Ok(TransferOutcome { alignment: outcome, rows })
}
