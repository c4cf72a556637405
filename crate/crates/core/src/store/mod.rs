//! File formats and ingestion: embeddings, parallel pairs, score records,
//! attribute lists, debias annotations, transforms and the workspace manifest.

pub mod annotations;
pub mod attributes;
mod binio;
pub mod embeddings;
pub mod pairs;
pub mod scores;
pub mod transform;
pub mod types;
pub mod workspace;

pub use annotations::Annotation;
pub use attributes::{bundled_attribute_list, AttributeList};
pub use embeddings::{read_embeddings, write_embeddings, EmbeddingSet};
pub use pairs::{build_pair_dataset, Alignment, PairDataset, ParallelPairSet};
pub use scores::{read_scores, write_scores, EvalPair, PreferenceRecord};
pub use transform::{TransformFile, TransformHeader, TransformKind};
pub use types::{BiasType, LanguageId, SpaceTag, Split, Technique};
pub use workspace::Workspace;

pub(crate) use binio::{ByteReader, ByteWriter};
