//! `XLEB` embedding files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "XLEB"  u8 version=1  u32 rows  u32 cols
//! u32 len + UTF-8 language code
//! u32 len + UTF-8 split name
//! rows × (u32 len + UTF-8 id)
//! rows × cols f32, row-major
//! ```

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numcore::Matrix;

use super::binio::{ByteReader, ByteWriter};
use super::types::{LanguageId, Split};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"XLEB";
pub const EMBEDDING_VERSION: u8 = 1;

/// Pooled sentence representations for one language and split.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    pub language: LanguageId,
    pub split: Split,
    pub matrix: Matrix,
    pub ids: Vec<String>,
}

impl EmbeddingSet {
    pub fn new(language: LanguageId, split: Split, matrix: Matrix, ids: Vec<String>) -> Result<Self> {
        let set = EmbeddingSet { language, split, matrix, ids };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ids.len() != self.matrix.rows() {
            return Err(Error::Data(format!("{} ids for {} rows", self.ids.len(), self.matrix.rows())));
        }
        let mut seen = HashSet::with_capacity(self.ids.len());
        for id in &self.ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Data(format!("duplicate sentence id '{id}'")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Row index of every id.
    pub fn index(&self) -> std::collections::HashMap<&str, usize> {
        self.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
    }
}

pub fn encode_embeddings(set: &EmbeddingSet) -> Result<Vec<u8>> {
    set.validate()?;
    let mut w = ByteWriter::new();
    w.bytes(EMBEDDING_MAGIC);
    w.u8(EMBEDDING_VERSION);
    w.len_u32(set.matrix.rows())?;
    w.len_u32(set.matrix.cols())?;
    w.str(set.language.as_str())?;
    w.str(set.split.as_str())?;
    for id in &set.ids {
        w.str(id)?;
    }
    w.f32s(set.matrix.data());
    Ok(w.buf)
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingSet> {
    let mut r = ByteReader::new(bytes);
    r.magic(EMBEDDING_MAGIC)?;
    let at = r.offset();
    let version = r.u8("version")?;
    if version != EMBEDDING_VERSION {
        return Err(Error::format(at, format!("unsupported version {version}")));
    }
    let rows = r.u32("rows")? as usize;
    let cols = r.u32("cols")? as usize;
    let at = r.offset();
    let language = LanguageId::new(&r.str("language")?).map_err(|e| Error::format(at, e.to_string()))?;
    let at = r.offset();
    let split: Split = r.str("split")?.parse().map_err(|e: Error| Error::format(at, e.to_string()))?;
    let mut ids = Vec::with_capacity(rows.min(1 << 20));
    for _ in 0..rows {
        ids.push(r.str("id")?);
    }
    let data = r.f32s(rows * cols, "payload")?;
    r.finish()?;
    let matrix = Matrix::from_vec(rows, cols, data)?;
    EmbeddingSet::new(language, split, matrix, ids)
}

pub fn write_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_embeddings(set)?)?;
    Ok(())
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    decode_embeddings(&fs::read(path)?)
}

/// Reads a set and checks its width against the workspace dimension.
pub fn read_embeddings_with_dim(path: impl AsRef<Path>, dim: usize) -> Result<EmbeddingSet> {
    let set = read_embeddings(path)?;
    if set.dim() != dim {
        // cols lives at bytes 9..13
        return Err(Error::format(9, format!("dimension {} does not match workspace dimension {dim}", set.dim())));
    }
    Ok(set)
}
