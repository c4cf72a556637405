//! Cross-lingual autoencoder: a shared encoder into a latent space and one
//! decoder per language, trained on parallel sentence embeddings.

mod checkpoint;
mod mlp;
mod model;
mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint};
pub use mlp::{Linear, Mlp, MlpGrads, MlpTrace};
pub use model::{AutoencoderModel, ModelGrads, PairLoss, DEFAULT_HIDDEN_DIMS, DEFAULT_LATENT_DIM, MAX_LAYERS};
pub use train::{
    corpus_loss, train, train_model, EarlyStopping, EpochRecord, PairLinks, ParallelCorpus, TrainConfig, TrainHistory,
    Trained, Verdict,
};
