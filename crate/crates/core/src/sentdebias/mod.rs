//! Bias subspace estimation by PCA over counterfactual sentence groups, and
//! its removal by orthogonal projection.

mod cda;
mod subspace;

use crate::store::BiasType;

pub use cda::{build_cda_sets, counterfactual, terms_in, CdaSets, SentenceEmbedder};
pub use subspace::{definitional_vectors, fit_bias_directions, BiasSubspace, ORTHONORMAL_TOL};

pub const DEFAULT_K: usize = 1;

/// How a list of embedding groups is turned into definitional vectors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GroupKind {
    /// Each group holds variants of one sentence that differ only in the attribute.
    #[default]
    Counterfactual,
    /// Each group holds sentences mentioning one attribute term.
    PerTerm,
}

impl GroupKind {
    /// Gender lists are paired; race and religion lists are not.
    pub fn for_bias(bias: BiasType) -> GroupKind {
        match bias {
            BiasType::Gender => GroupKind::Counterfactual,
            BiasType::Race | BiasType::Religion => GroupKind::PerTerm,
        }
    }
}
