//! `XLAE` model checkpoint, little-endian throughout.
//!
//! ```text
//! "XLAE"  u8 version=1  u32 latent_dim  u32 input_dim  u32 n_langs
//! n_langs × (u32 len, UTF-8 language code)       sorted
//! encoder MLP
//! n_langs × decoder MLP                          same order as the table
//!
//! MLP: u32 n_layers, then per layer u32 in, u32 out, in×out f32 weight, out f32 bias
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numcore::Matrix;
use crate::store::{ByteReader, ByteWriter, LanguageId};

use super::mlp::{Linear, Mlp};
use super::model::{AutoencoderModel, MAX_LAYERS};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"XLAE";
pub const CHECKPOINT_VERSION: u8 = 1;

fn write_mlp(w: &mut ByteWriter, mlp: &Mlp) -> Result<()> {
    w.len_u32(mlp.layers.len())?;
    for l in &mlp.layers {
        w.len_u32(l.in_dim())?;
        w.len_u32(l.out_dim())?;
        w.f32s(l.weight.data());
        w.f32s(l.bias.data());
    }
    Ok(())
}

fn read_mlp(r: &mut ByteReader) -> Result<Mlp> {
    let at = r.offset();
    let n = r.u32("layer count")? as usize;
    if n == 0 || n > MAX_LAYERS {
        return Err(Error::format(at, format!("layer count {n} outside 1..={MAX_LAYERS}")));
    }
    let mut layers = Vec::with_capacity(n);
    for _ in 0..n {
        let i = r.u32("layer input dim")? as usize;
        let o = r.u32("layer output dim")? as usize;
        let weight = Matrix::from_vec(i, o, r.f32s(i * o, "weights")?)?;
        let bias = Matrix::from_vec(1, o, r.f32s(o, "bias")?)?;
        layers.push(Linear { weight, bias });
    }
    let at = r.offset();
    Mlp::from_layers(layers).map_err(|e| Error::format(at, e.to_string()))
}

pub fn encode_checkpoint(model: &AutoencoderModel) -> Result<Vec<u8>> {
    let mut w = ByteWriter::new();
    w.bytes(CHECKPOINT_MAGIC);
    w.u8(CHECKPOINT_VERSION);
    w.len_u32(model.latent_dim())?;
    w.len_u32(model.input_dim())?;
    w.len_u32(model.decoders.len())?;
    for l in model.decoders.keys() {
        w.str(l.as_str())?;
    }
    write_mlp(&mut w, &model.encoder)?;
    for d in model.decoders.values() {
        write_mlp(&mut w, d)?;
    }
    Ok(w.buf)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<AutoencoderModel> {
    let mut r = ByteReader::new(bytes);
    r.magic(CHECKPOINT_MAGIC)?;
    let at = r.offset();
    let version = r.u8("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(at, format!("unsupported version {version}")));
    }
    let latent = r.u32("latent dim")? as usize;
    let input = r.u32("input dim")? as usize;
    let n_langs = r.u32("language count")? as usize;
    let mut langs = Vec::with_capacity(n_langs.min(1024));
    for _ in 0..n_langs {
        let at = r.offset();
        let code = r.str("language code")?;
        let l = LanguageId::new(&code).map_err(|e| Error::format(at, e.to_string()))?;
        if langs.last().is_some_and(|p: &LanguageId| p >= &l) {
            return Err(Error::format(at, "language table is not strictly sorted"));
        }
        langs.push(l);
    }
    let at = r.offset();
    let encoder = read_mlp(&mut r)?;
    if encoder.input_dim() != input || encoder.output_dim() != latent {
        return Err(Error::format(at, "encoder dims disagree with header"));
    }
    let mut decoders = BTreeMap::new();
    for l in langs {
        decoders.insert(l, read_mlp(&mut r)?);
    }
    r.finish()?;
    let end = r.offset();
    AutoencoderModel::from_parts(encoder, decoders).map_err(|e| Error::format(end, e.to_string()))
}

pub fn write_checkpoint(model: &AutoencoderModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_checkpoint(model)?)?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<AutoencoderModel> {
    decode_checkpoint(&fs::read(path)?)
}
