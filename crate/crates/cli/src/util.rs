use std::path::Path;

use anyhow::{Context, Result};
use latent_debias::autoencoder::{read_checkpoint, AutoencoderModel};
use latent_debias::store::{EmbeddingSet, Workspace};

/// Copies `src` into the workspace as `rel` unless it already is that file.
pub fn copy_in(ws: &Workspace, src: &Path, rel: &str) -> Result<()> {
    let dst = ws.path(rel);
    if let Some(parent) = dst.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let same = match (src.canonicalize(), dst.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    if !same {
        std::fs::copy(src, &dst).with_context(|| format!("copying {} to {}", src.display(), dst.display()))?;
    }
    Ok(())
}

pub fn file_name(p: &Path) -> Result<String> {
    p.file_name()
        .and_then(|n| n.to_str())
        .map(str::to_string)
        .with_context(|| format!("{} has no usable file name", p.display()))
}

pub fn workspace_model(ws: &Workspace) -> Result<AutoencoderModel> {
    let entry =
        ws.manifest.model.as_ref().ok_or_else(|| {
            latent_debias::Error::Data("workspace has no trained autoencoder; run train-ae first".into())
        })?;
    Ok(read_checkpoint(ws.path(&entry.file))?)
}

/// Replaces every set's matrix by its latent encoding.
pub fn encode_sets(model: &AutoencoderModel, sets: Vec<EmbeddingSet>) -> Result<Vec<EmbeddingSet>> {
    sets.into_iter()
        .map(|mut s| {
            s.matrix = model.encode(&s.matrix)?;
            Ok(s)
        })
        .collect()
}

pub fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

pub fn print_json(v: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
