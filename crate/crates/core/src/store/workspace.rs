//! A workspace is a directory of the binary/TSV files plus `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::annotations::{read_annotations, Annotation};
use super::embeddings::{read_embeddings_with_dim, EmbeddingSet};
use super::pairs::{read_pairs, Alignment};
use super::types::{BiasType, LanguageId, SpaceTag, Split, Technique};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingEntry {
    pub language: LanguageId,
    pub split: Split,
    pub file: String,
    pub rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DebiasEntry {
    pub language: LanguageId,
    pub bias_type: BiasType,
    pub embeddings: String,
    pub annotations: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeEntry {
    pub language: LanguageId,
    pub bias_type: BiasType,
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairing: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub file: String,
    pub history: String,
    pub languages: Vec<LanguageId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformEntry {
    pub name: String,
    pub file: String,
    pub technique: Technique,
    pub space: SpaceTag,
    pub language: LanguageId,
    pub bias_type: BiasType,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub dim: Option<usize>,
    #[serde(default)]
    pub embeddings: Vec<EmbeddingEntry>,
    /// Pair manifest file; sentences are aligned by id when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<String>,
    #[serde(default)]
    pub debias: Vec<DebiasEntry>,
    #[serde(default)]
    pub attributes: Vec<AttributeEntry>,
    #[serde(default)]
    pub scores: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelEntry>,
    #[serde(default)]
    pub transforms: Vec<TransformEntry>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            version: MANIFEST_VERSION,
            dim: None,
            embeddings: Vec::new(),
            pairs: None,
            debias: Vec::new(),
            attributes: Vec::new(),
            scores: Vec::new(),
            model: None,
            transforms: Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Workspace {
    pub root: PathBuf,
    pub manifest: Manifest,
}

impl Workspace {
    /// Opens an existing workspace or initialises an empty one.
    pub fn open_or_create(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        if root.join(MANIFEST_FILE).exists() {
            return Workspace::open(root);
        }
        fs::create_dir_all(&root)?;
        Ok(Workspace { root, manifest: Manifest::default() })
    }

    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let text = fs::read_to_string(root.join(MANIFEST_FILE))
            .map_err(|e| Error::Data(format!("cannot read {}: {e}", root.join(MANIFEST_FILE).display())))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::Data(format!("unsupported manifest version {}", manifest.version)));
        }
        Ok(Workspace { root, manifest })
    }

    pub fn save(&self) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        fs::write(self.root.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn dim(&self) -> Result<usize> {
        self.manifest.dim.ok_or_else(|| Error::Data("workspace has no embeddings yet".into()))
    }

    /// Records the workspace dimension, or checks it against the existing one.
    pub fn claim_dim(&mut self, d: usize) -> Result<()> {
        match self.manifest.dim {
            None => {
                self.manifest.dim = Some(d);
                Ok(())
            }
            Some(w) if w == d => Ok(()),
            Some(w) => Err(Error::Data(format!("dimension {d} does not match workspace dimension {w}"))),
        }
    }

    pub fn languages(&self) -> Vec<LanguageId> {
        let mut l: Vec<LanguageId> = self.manifest.embeddings.iter().map(|e| e.language.clone()).collect();
        l.sort();
        l.dedup();
        l
    }

    pub fn load_embeddings(&self, language: &LanguageId, split: Split) -> Result<EmbeddingSet> {
        let entry = self
            .manifest
            .embeddings
            .iter()
            .find(|e| &e.language == language && e.split == split)
            .ok_or_else(|| Error::Data(format!("no {split} embeddings for '{language}'")))?;
        read_embeddings_with_dim(self.path(&entry.file), self.dim()?)
    }

    pub fn load_split(&self, languages: &[LanguageId], split: Split) -> Result<Vec<EmbeddingSet>> {
        languages.iter().map(|l| self.load_embeddings(l, split)).collect()
    }

    pub fn alignment(&self) -> Result<Alignment> {
        Ok(match &self.manifest.pairs {
            Some(f) => Alignment::Manifest(read_pairs(self.path(f))?),
            None => Alignment::IdEquality,
        })
    }

    pub fn load_debias(&self, language: &LanguageId, bias_type: BiasType) -> Result<(EmbeddingSet, Vec<Annotation>)> {
        let entry = self
            .manifest
            .debias
            .iter()
            .find(|e| &e.language == language && e.bias_type == bias_type)
            .ok_or_else(|| Error::Data(format!("no {bias_type} debias data for '{language}'")))?;
        let set = read_embeddings_with_dim(self.path(&entry.embeddings), self.dim()?)?;
        let ann = read_annotations(self.path(&entry.annotations))?;
        Ok((set, ann))
    }

    pub fn upsert_embedding(&mut self, entry: EmbeddingEntry) {
        self.manifest.embeddings.retain(|e| !(e.language == entry.language && e.split == entry.split));
        self.manifest.embeddings.push(entry);
        self.manifest.embeddings.sort_by(|a, b| (&a.language, a.split).cmp(&(&b.language, b.split)));
    }

    pub fn upsert_debias(&mut self, entry: DebiasEntry) {
        self.manifest.debias.retain(|e| !(e.language == entry.language && e.bias_type == entry.bias_type));
        self.manifest.debias.push(entry);
        self.manifest.debias.sort_by(|a, b| (&a.language, a.bias_type).cmp(&(&b.language, b.bias_type)));
    }

    pub fn upsert_transform(&mut self, entry: TransformEntry) {
        self.manifest.transforms.retain(|e| e.name != entry.name);
        self.manifest.transforms.push(entry);
        self.manifest.transforms.sort_by(|a, b| a.name.cmp(&b.name));
    }

    pub fn transform(&self, name: &str) -> Result<&TransformEntry> {
        self.manifest
            .transforms
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Data(format!("no transform named '{name}'")))
    }
}
