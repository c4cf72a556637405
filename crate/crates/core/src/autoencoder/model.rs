use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{Matrix, SeededRng};
use crate::store::LanguageId;

use super::mlp::{Mlp, MlpGrads};

pub const DEFAULT_LATENT_DIM: usize = 128;
pub const DEFAULT_HIDDEN_DIMS: [usize; 2] = [512, 256];
pub const MAX_LAYERS: usize = 4;

/// Shared encoder into the latent space plus one decoder per language.
#[derive(Clone, Debug, PartialEq)]
pub struct AutoencoderModel {
    pub encoder: Mlp,
    pub decoders: BTreeMap<LanguageId, Mlp>,
}

/// The four reconstruction terms of one parallel batch, each a mean-squared error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairLoss {
    /// x reconstructed from y's latent through x's decoder.
    pub cross_x: f64,
    /// y reconstructed from x's latent through y's decoder.
    pub cross_y: f64,
    pub self_x: f64,
    pub self_y: f64,
}

impl PairLoss {
    pub fn total(&self) -> f64 {
        self.cross_x + self.cross_y + self.self_x + self.self_y
    }

    pub fn cross(&self) -> f64 {
        self.cross_x + self.cross_y
    }

    pub fn components(&self) -> [f64; 4] {
        [self.cross_x, self.cross_y, self.self_x, self.self_y]
    }

    pub(crate) fn add_scaled(&mut self, w: f64, o: &PairLoss) {
        self.cross_x += w * o.cross_x;
        self.cross_y += w * o.cross_y;
        self.self_x += w * o.self_x;
        self.self_y += w * o.self_y;
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelGrads {
    pub encoder: MlpGrads,
    pub decoders: BTreeMap<LanguageId, MlpGrads>,
}

impl ModelGrads {
    pub fn zeros_like(model: &AutoencoderModel) -> Self {
        ModelGrads {
            encoder: MlpGrads::zeros_like(&model.encoder),
            decoders: model.decoders.iter().map(|(l, d)| (l.clone(), MlpGrads::zeros_like(d))).collect(),
        }
    }

    pub fn axpy(&mut self, alpha: f32, other: &ModelGrads) -> Result<()> {
        self.encoder.axpy(alpha, &other.encoder)?;
        for (l, g) in &other.decoders {
            match self.decoders.get_mut(l) {
                Some(dst) => dst.axpy(alpha, g)?,
                None => {
                    let mut z = g.clone();
                    for (w, b) in &mut z.layers {
                        w.scale(alpha);
                        b.scale(alpha);
                    }
                    self.decoders.insert(l.clone(), z);
                }
            }
        }
        Ok(())
    }

    /// Gradient tensors in the same order as [`AutoencoderModel::params_mut`].
    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut out = self.encoder.tensors();
        for g in self.decoders.values() {
            out.extend(g.tensors());
        }
        out
    }
}

fn mse(pred: &Matrix, target: &Matrix) -> f64 {
    let n = pred.len().max(1) as f64;
    pred.data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let e = p as f64 - t as f64;
            e * e
        })
        .sum::<f64>()
        / n
}

/// d mse / d pred, scaled by `weight`.
fn mse_grad(pred: &Matrix, target: &Matrix, weight: f32) -> Result<Matrix> {
    let scale = 2.0 * weight / pred.len().max(1) as f32;
    Ok(pred.sub(target)?.scaled(scale))
}

impl AutoencoderModel {
    /// Encoder `d → hidden.. → latent`, decoders mirror it back to `d`.
    pub fn new(
        input_dim: usize,
        latent_dim: usize,
        hidden_dims: &[usize],
        languages: &[LanguageId],
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if hidden_dims.len() + 1 > MAX_LAYERS {
            return Err(Error::Parameter(format!(
                "{} layers requested, at most {MAX_LAYERS} supported",
                hidden_dims.len() + 1
            )));
        }
        if languages.is_empty() {
            return Err(Error::Parameter("autoencoder needs at least one language".into()));
        }
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden_dims);
        dims.push(latent_dim);
        let encoder = Mlp::new(&dims, rng)?;
        dims.reverse();
        let mut decoders = BTreeMap::new();
        for l in languages {
            decoders.insert(l.clone(), Mlp::new(&dims, rng)?);
        }
        Ok(AutoencoderModel { encoder, decoders })
    }

    pub fn from_parts(encoder: Mlp, decoders: BTreeMap<LanguageId, Mlp>) -> Result<Self> {
        if decoders.is_empty() {
            return Err(Error::Parameter("autoencoder needs at least one decoder".into()));
        }
        for (l, d) in &decoders {
            if d.input_dim() != encoder.output_dim() || d.output_dim() != encoder.input_dim() {
                return Err(Error::shape(
                    "autoencoder",
                    format!(
                        "decoder '{l}' maps {} → {}, encoder maps {} → {}",
                        d.input_dim(),
                        d.output_dim(),
                        encoder.input_dim(),
                        encoder.output_dim()
                    ),
                ));
            }
        }
        Ok(AutoencoderModel { encoder, decoders })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn languages(&self) -> Vec<LanguageId> {
        self.decoders.keys().cloned().collect()
    }

    pub fn decoder(&self, lang: &LanguageId) -> Result<&Mlp> {
        self.decoders.get(lang).ok_or_else(|| Error::MissingDecoder(lang.to_string()))
    }

    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        self.encoder.forward(x)
    }

    pub fn decode(&self, z: &Matrix, lang: &LanguageId) -> Result<Matrix> {
        self.decoder(lang)?.forward(z)
    }

    /// `decode(f(encode(x)), lang)`.
    pub fn latent_round_trip<F>(&self, x: &Matrix, lang: &LanguageId, f: F) -> Result<Matrix>
    where
        F: FnOnce(&Matrix) -> Result<Matrix>,
    {
        let dec = self.decoder(lang)?;
        let z = f(&self.encode(x)?)?;
        dec.forward(&z)
    }

    pub fn pair_loss(&self, x: &Matrix, lang_x: &LanguageId, y: &Matrix, lang_y: &LanguageId) -> Result<PairLoss> {
        check_pair(x, y)?;
        let (dx, dy) = (self.decoder(lang_x)?, self.decoder(lang_y)?);
        let zx = self.encode(x)?;
        let zy = self.encode(y)?;
        Ok(PairLoss {
            cross_x: mse(&dx.forward(&zy)?, x),
            cross_y: mse(&dy.forward(&zx)?, y),
            self_x: mse(&dx.forward(&zx)?, x),
            self_y: mse(&dy.forward(&zy)?, y),
        })
    }

    /// Loss and gradients of `weight × total` with respect to every parameter.
    pub fn pair_loss_grad(
        &self,
        x: &Matrix,
        lang_x: &LanguageId,
        y: &Matrix,
        lang_y: &LanguageId,
        weight: f32,
    ) -> Result<(PairLoss, ModelGrads)> {
        check_pair(x, y)?;
        let (dx, dy) = (self.decoder(lang_x)?, self.decoder(lang_y)?);
        let tx = self.encoder.forward_traced(x)?;
        let ty = self.encoder.forward_traced(y)?;

        let mut loss = PairLoss::default();
        let mut dzx = Matrix::zeros(tx.output.rows(), tx.output.cols());
        let mut dzy = dzx.clone();
        let mut dec_grads: BTreeMap<LanguageId, MlpGrads> = BTreeMap::new();

        // (decoder, its language, latent source is x?, target, slot)
        let terms: [(&Mlp, &LanguageId, bool, &Matrix, &mut f64); 4] = [
            (dx, lang_x, false, x, &mut loss.cross_x),
            (dy, lang_y, true, y, &mut loss.cross_y),
            (dx, lang_x, true, x, &mut loss.self_x),
            (dy, lang_y, false, y, &mut loss.self_y),
        ];
        for (dec, lang, from_x, target, slot) in terms {
            let z = if from_x { &tx.output } else { &ty.output };
            let trace = dec.forward_traced(z)?;
            *slot = mse(&trace.output, target);
            let g_out = mse_grad(&trace.output, target, weight)?;
            let (g, dz) = dec.backward(&trace, &g_out)?;
            match dec_grads.get_mut(lang) {
                Some(acc) => acc.axpy(1.0, &g)?,
                None => {
                    dec_grads.insert(lang.clone(), g);
                }
            }
            if from_x {
                dzx.add_assign(&dz)?;
            } else {
                dzy.add_assign(&dz)?;
            }
        }
        let (mut enc, _) = self.encoder.backward(&tx, &dzx)?;
        let (ge_y, _) = self.encoder.backward(&ty, &dzy)?;
        enc.axpy(1.0, &ge_y)?;
        Ok((loss, ModelGrads { encoder: enc, decoders: dec_grads }))
    }

    /// Parameters in a fixed order: encoder layers, then decoders by language.
    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = self.encoder.params_mut();
        for d in self.decoders.values_mut() {
            out.extend(d.params_mut());
        }
        out
    }

    pub fn params(&self) -> Vec<&Matrix> {
        let mut out = self.encoder.params();
        for d in self.decoders.values() {
            out.extend(d.params());
        }
        out
    }
}

fn check_pair(x: &Matrix, y: &Matrix) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(Error::shape("pair_loss", format!("parallel batches differ: {:?} vs {:?}", x.shape(), y.shape())));
    }
    Ok(())
}
