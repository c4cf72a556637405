use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{AdamW, AdamWConfig, Matrix, SeededRng};
use crate::store::pairs::{build_pairs_for_sets, PairingReport};
use crate::store::{Alignment, EmbeddingSet, LanguageId};

use super::model::{AutoencoderModel, ModelGrads, PairLoss, DEFAULT_HIDDEN_DIMS, DEFAULT_LATENT_DIM};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub patience: usize,
    pub lr: f32,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden_dims: Vec<usize>,
    pub latent_dim: usize,
    pub weight_decay: f32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            patience: 5,
            lr: 1e-4,
            batch_size: 256,
            seed: 0,
            hidden_dims: DEFAULT_HIDDEN_DIMS.to_vec(),
            latent_dim: DEFAULT_LATENT_DIM,
            weight_decay: AdamWConfig::default().weight_decay,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Parameter(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be ≥ 1");
        }
        if self.patience == 0 {
            return bad("patience must be ≥ 1");
        }
        if self.batch_size == 0 {
            return bad("batch size must be ≥ 1");
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("learning rate must be positive");
        }
        if self.latent_dim == 0 {
            return bad("latent dimension must be ≥ 1");
        }
        Ok(())
    }
}

/// Row-index links between embedding matrices of two languages.
#[derive(Clone, Debug)]
pub struct PairLinks {
    pub lang_a: LanguageId,
    pub lang_b: LanguageId,
    pub rows: Vec<(usize, usize)>,
}

/// Embeddings of several languages with every parallel pair resolved to rows.
#[derive(Clone, Debug)]
pub struct ParallelCorpus {
    pub matrices: BTreeMap<LanguageId, Matrix>,
    pub links: Vec<PairLinks>,
}

impl ParallelCorpus {
    pub fn from_sets(sets: &[EmbeddingSet], alignment: &Alignment) -> Result<(Self, PairingReport)> {
        let refs: Vec<&EmbeddingSet> = sets.iter().collect();
        let dataset = build_pairs_for_sets(&refs, alignment)?;
        let by_lang: BTreeMap<&LanguageId, &EmbeddingSet> = sets.iter().map(|s| (&s.language, s)).collect();
        let mut links = Vec::new();
        for ps in &dataset.sets {
            let (a, b) = (by_lang[&ps.lang_a], by_lang[&ps.lang_b]);
            let (ia, ib) = (a.index(), b.index());
            let rows =
                ps.pairs.iter().filter_map(|(x, y)| Some((*ia.get(x.as_str())?, *ib.get(y.as_str())?))).collect();
            links.push(PairLinks { lang_a: ps.lang_a.clone(), lang_b: ps.lang_b.clone(), rows });
        }
        let matrices = sets.iter().map(|s| (s.language.clone(), s.matrix.clone())).collect();
        Ok((ParallelCorpus { matrices, links }, dataset.report))
    }

    pub fn total_pairs(&self) -> usize {
        self.links.iter().map(|l| l.rows.len()).sum()
    }

    pub fn languages(&self) -> Vec<LanguageId> {
        self.matrices.keys().cloned().collect()
    }

    pub fn dim(&self) -> Option<usize> {
        self.matrices.values().next().map(Matrix::cols)
    }

    fn batch(&self, link: usize, rows: &[(usize, usize)]) -> (Matrix, Matrix) {
        let l = &self.links[link];
        let a: Vec<usize> = rows.iter().map(|r| r.0).collect();
        let b: Vec<usize> = rows.iter().map(|r| r.1).collect();
        (self.matrices[&l.lang_a].select_rows(&a), self.matrices[&l.lang_b].select_rows(&b))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
    pub dev: PairLoss,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Dev loss of the freshly initialised model.
    pub initial_dev: PairLoss,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    Continue,
    Stop,
}

/// Stops once the monitored loss has failed to improve `patience` times in a row.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: f64::INFINITY, best_epoch: 0, stale: 0 }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> Verdict {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.stale = 0;
            Verdict::Improved
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                Verdict::Stop
            } else {
                Verdict::Continue
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

pub struct Trained {
    pub model: AutoencoderModel,
    pub history: TrainHistory,
}

/// Mean pair loss over every link, evaluated in chunks of `chunk` pairs.
pub fn corpus_loss(model: &AutoencoderModel, corpus: &ParallelCorpus, chunk: usize) -> Result<PairLoss> {
    let total = corpus.total_pairs();
    if total == 0 {
        return Err(Error::Data("no parallel pairs to evaluate".into()));
    }
    let mut acc = PairLoss::default();
    for (li, link) in corpus.links.iter().enumerate() {
        for rows in link.rows.chunks(chunk.max(1)) {
            let (x, y) = corpus.batch(li, rows);
            let l = model.pair_loss(&x, &link.lang_a, &y, &link.lang_b)?;
            acc.add_scaled(rows.len() as f64 / total as f64, &l);
        }
    }
    Ok(acc)
}

/// Trains a freshly initialised model on `train`, early-stopping on `dev`.
pub fn train(train_corpus: &ParallelCorpus, dev: &ParallelCorpus, cfg: &TrainConfig) -> Result<Trained> {
    cfg.validate()?;
    let d = train_corpus.dim().ok_or_else(|| Error::Data("training corpus has no languages".into()))?;
    let mut rng = SeededRng::new(cfg.seed);
    let model = AutoencoderModel::new(d, cfg.latent_dim, &cfg.hidden_dims, &train_corpus.languages(), &mut rng)?;
    train_model(model, train_corpus, dev, cfg, &mut rng)
}

/// Continues training `model`; `rng` drives the per-epoch shuffles.
pub fn train_model(
    mut model: AutoencoderModel,
    train_corpus: &ParallelCorpus,
    dev: &ParallelCorpus,
    cfg: &TrainConfig,
    rng: &mut SeededRng,
) -> Result<Trained> {
    cfg.validate()?;
    if train_corpus.total_pairs() == 0 {
        return Err(Error::Data("training set has no parallel pairs".into()));
    }
    if dev.total_pairs() == 0 {
        return Err(Error::Data("dev set has no parallel pairs".into()));
    }
    for l in train_corpus.languages().iter().chain(dev.languages().iter()) {
        model.decoder(l)?;
    }

    let mut opt = AdamW::new(AdamWConfig { lr: cfg.lr, weight_decay: cfg.weight_decay, ..AdamWConfig::default() });
    let initial_dev = corpus_loss(&model, dev, cfg.batch_size)?;
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = model.clone();
    let mut records = Vec::new();
    let mut stopped_early = false;

    let mut order: Vec<(usize, usize, usize)> = train_corpus
        .links
        .iter()
        .enumerate()
        .flat_map(|(li, l)| l.rows.iter().map(move |&(a, b)| (li, a, b)))
        .collect();

    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let mut train_loss = 0.0;
        for (bi, batch) in order.chunks(cfg.batch_size).enumerate() {
            // split the batch by language pair, keeping first-seen order
            let mut groups: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
            for &(li, a, b) in batch {
                groups.entry(li).or_default().push((a, b));
            }
            let mut grads = ModelGrads::zeros_like(&model);
            let mut batch_loss = 0.0;
            for (li, rows) in &groups {
                let link = &train_corpus.links[*li];
                let (x, y) = train_corpus.batch(*li, rows);
                let w = rows.len() as f32 / batch.len() as f32;
                let (l, g) = model.pair_loss_grad(&x, &link.lang_a, &y, &link.lang_b, w)?;
                batch_loss += w as f64 * l.total();
                grads.axpy(1.0, &g)?;
            }
            if !batch_loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: bi + 1 });
            }
            train_loss += batch_loss * batch.len() as f64 / order.len() as f64;
            let g = grads.tensors();
            opt.step(&mut model.params_mut(), &g)?;
            if !model.params().iter().all(|p| p.is_finite()) {
                return Err(Error::Divergence { epoch, batch: bi + 1 });
            }
        }

        let dev_loss = corpus_loss(&model, dev, cfg.batch_size)?;
        if !dev_loss.is_finite() {
            return Err(Error::Divergence { epoch, batch: 0 });
        }
        records.push(EpochRecord { epoch, train_loss, dev_loss: dev_loss.total(), dev: dev_loss });
        match stopper.observe(epoch, dev_loss.total()) {
            Verdict::Improved => best = model.clone(),
            Verdict::Continue => {}
            Verdict::Stop => {
                stopped_early = epoch < cfg.epochs;
                break;
            }
        }
    }

    Ok(Trained {
        model: best,
        history: TrainHistory { initial_dev, epochs: records, best_epoch: stopper.best_epoch(), stopped_early },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::Split;

    fn lang(s: &str) -> LanguageId {
        LanguageId::new(s).unwrap()
    }

    /// Two languages where the second is the first plus a constant offset.
    fn offset_corpus(n: usize, d: usize, seed: u64, split: Split) -> ParallelCorpus {
        let mut rng = SeededRng::new(seed);
        let x = rng.normal_matrix(n, d, 1.0);
        let offset: Vec<f32> = (0..d).map(|i| if i % 2 == 0 { 3.0 } else { -2.0 }).collect();
        let mut y = x.clone();
        y.add_row_broadcast(&Matrix::row_vector(&offset)).unwrap();
        let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let sets = vec![
            EmbeddingSet::new(lang("en"), split, x, ids.clone()).unwrap(),
            EmbeddingSet::new(lang("fr"), split, y, ids).unwrap(),
        ];
        ParallelCorpus::from_sets(&sets, &Alignment::IdEquality).unwrap().0
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 30,
            patience: 5,
            lr: 3e-3,
            batch_size: 32,
            seed: 4,
            hidden_dims: vec![16],
            latent_dim: 8,
            weight_decay: 0.0,
        }
    }

    #[test]
    fn early_stopping_semantics() {
        let mut s = EarlyStopping::new(1);
        assert_eq!(s.observe(1, 1.0), Verdict::Improved);
        assert_eq!(s.observe(2, 1.5), Verdict::Stop);
        assert_eq!(s.best_epoch(), 1);

        let mut s = EarlyStopping::new(2);
        for (e, l) in [(1, 3.0), (2, 2.0), (3, 2.0)].into_iter() {
            assert_ne!(s.observe(e, l), Verdict::Stop);
        }
        assert_eq!(s.observe(4, 2.5), Verdict::Stop);
        assert_eq!(s.best_epoch(), 2);
    }

    #[test]
    fn offset_corpus_cross_loss_drops_below_tenth() {
        let train_c = offset_corpus(256, 8, 1, Split::Train);
        let dev = offset_corpus(64, 8, 2, Split::Dev);
        let out = train(&train_c, &dev, &small_cfg()).unwrap();
        let best = out.history.best().unwrap();
        assert!(out.history.epochs.len() <= 30);
        assert!(
            best.dev.cross() < 0.1 * out.history.initial_dev.cross(),
            "{} vs initial {}",
            best.dev.cross(),
            out.history.initial_dev.cross()
        );
    }

    #[test]
    fn returned_model_is_best_dev_checkpoint() {
        let train_c = offset_corpus(128, 6, 3, Split::Train);
        let dev = offset_corpus(32, 6, 4, Split::Dev);
        let cfg = TrainConfig { epochs: 8, lr: 2e-2, ..small_cfg() };
        let out = train(&train_c, &dev, &cfg).unwrap();
        let min = out.history.epochs.iter().map(|e| e.dev_loss).fold(f64::INFINITY, f64::min);
        let got = corpus_loss(&out.model, &dev, cfg.batch_size).unwrap().total();
        assert_eq!(got, min);
        assert_eq!(out.history.best().unwrap().dev_loss, min);
    }

    #[test]
    fn training_is_deterministic() {
        let train_c = offset_corpus(64, 6, 5, Split::Train);
        let dev = offset_corpus(16, 6, 6, Split::Dev);
        let cfg = TrainConfig { epochs: 3, ..small_cfg() };
        let a = train(&train_c, &dev, &cfg).unwrap();
        let b = train(&train_c, &dev, &cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn huge_learning_rate_diverges() {
        let train_c = offset_corpus(64, 6, 5, Split::Train);
        let dev = offset_corpus(16, 6, 6, Split::Dev);
        let cfg = TrainConfig { lr: 1e30, ..small_cfg() };
        assert!(matches!(train(&train_c, &dev, &cfg), Err(Error::Divergence { epoch: 1, .. })));
    }

    #[test]
    fn config_and_data_errors() {
        let c = offset_corpus(8, 4, 1, Split::Train);
        for bad in [
            TrainConfig { epochs: 0, ..small_cfg() },
            TrainConfig { patience: 0, ..small_cfg() },
            TrainConfig { batch_size: 0, ..small_cfg() },
        ] {
            assert!(matches!(train(&c, &c, &bad), Err(Error::Parameter(_))));
        }
        let empty = ParallelCorpus { matrices: c.matrices.clone(), links: vec![] };
        assert!(matches!(train(&empty, &c, &small_cfg()), Err(Error::Data(_))));
    }
}
