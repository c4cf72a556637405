//! `XLTF` debias transform container, shared by subspaces and projections.
//!
//! ```text
//! "XLTF"  u8 version=1  u32 header_len  header JSON (UTF-8)
//! rows × cols f32 payload
//! [autoencoder checkpoint, `autoencoder_bytes` long]
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::Matrix;

use super::binio::{ByteReader, ByteWriter};
use super::types::{BiasType, LanguageId, SpaceTag};

pub const TRANSFORM_MAGIC: &[u8; 4] = b"XLTF";
pub const TRANSFORM_VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    /// K×d orthonormal bias directions, removed by `h − (h Vᵀ) V`.
    Subspace,
    /// d×d projection applied as `h Pᵀ`.
    Projection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformHeader {
    pub kind: TransformKind,
    pub k: usize,
    pub d: usize,
    pub bias_type: BiasType,
    pub space_tag: SpaceTag,
    pub fit_language: LanguageId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations_used: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_accuracies: Option<Vec<f32>>,
    #[serde(default)]
    pub autoencoder_bytes: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransformFile {
    pub header: TransformHeader,
    pub payload: Matrix,
    /// Encoded `XLAE` checkpoint for latent-space application.
    pub autoencoder: Option<Vec<u8>>,
}

impl TransformFile {
    fn expected_shape(&self) -> (usize, usize) {
        match self.header.kind {
            TransformKind::Subspace => (self.header.k, self.header.d),
            TransformKind::Projection => (self.header.d, self.header.d),
        }
    }
}

pub fn encode_transform(t: &TransformFile) -> Result<Vec<u8>> {
    if t.payload.shape() != t.expected_shape() {
        return Err(Error::shape(
            "encode_transform",
            format!("payload {:?} vs header {:?}", t.payload.shape(), t.expected_shape()),
        ));
    }
    let mut header = t.header.clone();
    header.autoencoder_bytes = t.autoencoder.as_ref().map_or(0, |b| b.len() as u64);
    let json = serde_json::to_vec(&header)?;
    let mut w = ByteWriter::new();
    w.bytes(TRANSFORM_MAGIC);
    w.u8(TRANSFORM_VERSION);
    w.len_u32(json.len())?;
    w.bytes(&json);
    w.f32s(t.payload.data());
    if let Some(ae) = &t.autoencoder {
        w.bytes(ae);
    }
    Ok(w.buf)
}

pub fn decode_transform(bytes: &[u8]) -> Result<TransformFile> {
    let mut r = ByteReader::new(bytes);
    r.magic(TRANSFORM_MAGIC)?;
    let at = r.offset();
    let version = r.u8("version")?;
    if version != TRANSFORM_VERSION {
        return Err(Error::format(at, format!("unsupported version {version}")));
    }
    let len = r.u32("header length")? as usize;
    let at = r.offset();
    let header: TransformHeader = serde_json::from_slice(r.take(len, "header")?)
        .map_err(|e| Error::format(at, format!("bad header JSON: {e}")))?;
    let (rows, cols) = match header.kind {
        TransformKind::Subspace => (header.k, header.d),
        TransformKind::Projection => (header.d, header.d),
    };
    let payload = Matrix::from_vec(rows, cols, r.f32s(rows * cols, "payload")?)?;
    let autoencoder = if header.autoencoder_bytes > 0 {
        Some(r.take(header.autoencoder_bytes as usize, "autoencoder")?.to_vec())
    } else {
        None
    };
    r.finish()?;
    Ok(TransformFile { header, payload, autoencoder })
}

pub fn write_transform(t: &TransformFile, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_transform(t)?)?;
    Ok(())
}

pub fn read_transform(path: impl AsRef<Path>) -> Result<TransformFile> {
    decode_transform(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(kind: TransformKind) -> TransformHeader {
        TransformHeader {
            kind,
            k: 1,
            d: 3,
            bias_type: BiasType::Gender,
            space_tag: SpaceTag::Original,
            fit_language: LanguageId::new("en").unwrap(),
            iterations_used: None,
            probe_accuracies: None,
            autoencoder_bytes: 0,
        }
    }

    #[test]
    fn subspace_round_trip() {
        let t = TransformFile {
            header: header(TransformKind::Subspace),
            payload: Matrix::from_rows(&[[0.6, 0.8, 0.0]]).unwrap(),
            autoencoder: None,
        };
        let bytes = encode_transform(&t).unwrap();
        assert_eq!(decode_transform(&bytes).unwrap(), t);
    }

    #[test]
    fn projection_with_autoencoder_round_trip() {
        let mut h = header(TransformKind::Projection);
        h.iterations_used = Some(2);
        h.probe_accuracies = Some(vec![0.9, 0.55]);
        h.space_tag = SpaceTag::Latent;
        let t = TransformFile { header: h, payload: Matrix::identity(3), autoencoder: Some(vec![1, 2, 3, 4, 5]) };
        let bytes = encode_transform(&t).unwrap();
        let back = decode_transform(&bytes).unwrap();
        assert_eq!(back.autoencoder, t.autoencoder);
        assert_eq!(back.header.autoencoder_bytes, 5);
        assert_eq!(encode_transform(&back).unwrap(), bytes);
    }

    #[test]
    fn payload_shape_checked() {
        let t = TransformFile {
            header: header(TransformKind::Projection),
            payload: Matrix::identity(2),
            autoencoder: None,
        };
        assert!(encode_transform(&t).is_err());
    }

    #[test]
    fn bad_magic() {
        assert!(matches!(decode_transform(b"NOPE\x01"), Err(Error::Format { offset: 0, .. })));
    }
}
