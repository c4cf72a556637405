//! Either kind of fitted debias transform, applied in the space it was fit in.

use crate::autoencoder::{decode_checkpoint, encode_checkpoint, AutoencoderModel};
use crate::error::{Error, Result};
use crate::inlp::ProjectionMatrix;
use crate::numcore::Matrix;
use crate::sentdebias::BiasSubspace;
use crate::store::{BiasType, LanguageId, SpaceTag, Technique, TransformFile, TransformKind};

#[derive(Clone, Debug, PartialEq)]
pub enum DebiasTransform {
    Subspace(BiasSubspace),
    Projection(ProjectionMatrix),
}

/// Label for records scored without any transform.
pub const BASE_CONDITION: &str = "base";

/// `technique-space-language`, e.g. `inlp-latent-fr`.
pub fn condition_label(technique: Technique, space: SpaceTag, language: &LanguageId) -> String {
    format!("{technique}-{space}-{language}")
}

impl DebiasTransform {
    pub fn technique(&self) -> Technique {
        match self {
            DebiasTransform::Subspace(_) => Technique::SentDebias,
            DebiasTransform::Projection(_) => Technique::Inlp,
        }
    }

    pub fn space_tag(&self) -> SpaceTag {
        match self {
            DebiasTransform::Subspace(s) => s.space_tag,
            DebiasTransform::Projection(p) => p.space_tag,
        }
    }

    pub fn bias_type(&self) -> BiasType {
        match self {
            DebiasTransform::Subspace(s) => s.bias_type,
            DebiasTransform::Projection(p) => p.bias_type,
        }
    }

    pub fn fit_language(&self) -> &LanguageId {
        match self {
            DebiasTransform::Subspace(s) => &s.fit_language,
            DebiasTransform::Projection(p) => &p.fit_language,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DebiasTransform::Subspace(s) => s.dim(),
            DebiasTransform::Projection(p) => p.dim(),
        }
    }

    pub fn condition(&self) -> String {
        condition_label(self.technique(), self.space_tag(), self.fit_language())
    }

    /// Applies the transform to vectors that already live in its space.
    pub fn apply(&self, h: &Matrix) -> Result<Matrix> {
        match self {
            DebiasTransform::Subspace(s) => s.apply(h),
            DebiasTransform::Projection(p) => p.apply(h),
        }
    }

    /// Applies the transform to original-space embeddings of `language`.
    ///
    /// Latent transforms run `decode(apply(encode(h)), language)` and need the
    /// autoencoder they were fit with.
    pub fn apply_embeddings(
        &self,
        h: &Matrix,
        language: &LanguageId,
        model: Option<&AutoencoderModel>,
    ) -> Result<Matrix> {
        match self.space_tag() {
            SpaceTag::Original => self.apply(h),
            SpaceTag::Latent => {
                let model = model.ok_or_else(|| Error::Data("latent-space transform needs the autoencoder".into()))?;
                if model.latent_dim() != self.dim() {
                    return Err(Error::shape(
                        "apply_embeddings",
                        format!("transform is {}-dimensional, latent space is {}", self.dim(), model.latent_dim()),
                    ));
                }
                model.latent_round_trip(h, language, |z| self.apply(z))
            }
        }
    }

    /// Container for export; latent transforms carry the autoencoder checkpoint.
    pub fn to_transform_file(&self, model: Option<&AutoencoderModel>) -> Result<TransformFile> {
        let ae = match (self.space_tag(), model) {
            (SpaceTag::Latent, Some(m)) => Some(encode_checkpoint(m)?),
            (SpaceTag::Latent, None) => {
                return Err(Error::Data("exporting a latent-space transform needs the autoencoder".into()))
            }
            (SpaceTag::Original, _) => None,
        };
        Ok(match self {
            DebiasTransform::Subspace(s) => s.to_transform_file(ae),
            DebiasTransform::Projection(p) => p.to_transform_file(ae),
        })
    }

    pub fn from_transform_file(t: &TransformFile) -> Result<(Self, Option<AutoencoderModel>)> {
        let tr = match t.header.kind {
            TransformKind::Subspace => DebiasTransform::Subspace(BiasSubspace::from_transform_file(t)?),
            TransformKind::Projection => DebiasTransform::Projection(ProjectionMatrix::from_transform_file(t)?),
        };
        let model = t.autoencoder.as_deref().map(decode_checkpoint).transpose()?;
        Ok((tr, model))
    }
}
