use crate::error::{Error, Result};
use crate::numcore::{orthonormal_rows, Matrix};
use crate::store::{BiasType, LanguageId, SpaceTag, TransformFile, TransformHeader, TransformKind};

use super::probe::{train_probe, ProbeDataset};

pub const DEFAULT_ITERATIONS: usize = 40;
pub const DEFAULT_STOP_MARGIN: f64 = 0.02;
pub const DROP_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct InlpConfig {
    pub n_iters: usize,
    /// Stop once held-out accuracy is within this of the majority rate.
    pub stop_accuracy_margin: f64,
    pub seed: u64,
}

impl Default for InlpConfig {
    fn default() -> Self {
        InlpConfig { n_iters: DEFAULT_ITERATIONS, stop_accuracy_margin: DEFAULT_STOP_MARGIN, seed: 0 }
    }
}

/// Outcome of one nullspace step.
#[derive(Clone, Debug, PartialEq)]
pub struct NullspaceStep {
    pub p: Matrix,
    /// Number of independent directions removed; 0 means `w` was all zero.
    pub removed: usize,
}

/// `(I − BᵀB) · p_acc` with `B` the orthonormalised rows of `w`.
pub fn nullspace_step(p_acc: &Matrix, w: &Matrix) -> Result<NullspaceStep> {
    let d = p_acc.rows();
    if p_acc.cols() != d || w.cols() != d {
        return Err(Error::shape("nullspace_step", format!("p is {:?}, w is {:?}", p_acc.shape(), w.shape())));
    }
    let b = orthonormal_rows(w, DROP_TOL);
    if b.rows() == 0 {
        return Ok(NullspaceStep { p: p_acc.clone(), removed: 0 });
    }
    let mut q = Matrix::identity(d);
    q.axpy(-1.0, &b.t_matmul(&b)?)?;
    Ok(NullspaceStep { p: q.matmul(p_acc)?, removed: b.rows() })
}

/// Accumulated nullspace projection, applied as `h Pᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMatrix {
    pub p: Matrix,
    pub iterations_used: usize,
    pub probe_accuracies: Vec<f64>,
    pub bias_type: BiasType,
    pub space_tag: SpaceTag,
    pub fit_language: LanguageId,
}

/// Result of [`fit_inlp`] before it is tagged with its metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct InlpFit {
    pub p: Matrix,
    /// Orthonormal rows spanning everything removed.
    pub removed: Matrix,
    pub probe_accuracies: Vec<f64>,
    pub majority_rates: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Iteratively trains probes and removes their rowspace.
///
/// The removed directions are kept as one orthonormal basis `Q`, so that
/// `P = I − QᵀQ` stays symmetric and idempotent. Each probe's weights are
/// projected into the range of the current `P` first, which makes this equal
/// to composing [`nullspace_step`]s.
pub fn fit_inlp(data: &ProbeDataset, cfg: &InlpConfig) -> Result<InlpFit> {
    if cfg.n_iters == 0 {
        return Err(Error::Parameter("INLP needs at least one iteration".into()));
    }
    let d = data.x.cols();
    let mut q = Matrix::zeros(0, d);
    let mut p = Matrix::identity(d);
    let mut accs = Vec::new();
    let mut majors = Vec::new();
    let mut warnings = Vec::new();

    for it in 0..cfg.n_iters {
        let projected = data.with_x(data.x.matmul_t(&p)?)?;
        let probe = train_probe(&projected, cfg.seed.wrapping_add(it as u64))?;
        accs.push(probe.accuracy);
        majors.push(probe.majority);
        if probe.accuracy <= probe.majority + cfg.stop_accuracy_margin {
            break;
        }
        let w = probe.weights.matmul(&p)?;
        let next = orthonormal_rows(&Matrix::vstack(&[&q, &w])?, DROP_TOL);
        if next.rows() == q.rows() {
            warnings.push(format!("iteration {}: probe weights lie in the removed space, nothing removed", it + 1));
            break;
        }
        q = next;
        p = Matrix::identity(d);
        p.axpy(-1.0, &q.t_matmul(&q)?)?;
    }
    Ok(InlpFit { p, removed: q, probe_accuracies: accs, majority_rates: majors, warnings })
}

impl ProjectionMatrix {
    pub fn new(
        p: Matrix,
        iterations_used: usize,
        probe_accuracies: Vec<f64>,
        bias_type: BiasType,
        space_tag: SpaceTag,
        fit_language: LanguageId,
    ) -> Result<Self> {
        if p.rows() != p.cols() {
            return Err(Error::shape("projection", format!("P must be square, got {:?}", p.shape())));
        }
        Ok(ProjectionMatrix { p, iterations_used, probe_accuracies, bias_type, space_tag, fit_language })
    }

    pub fn fit(
        data: &ProbeDataset,
        cfg: &InlpConfig,
        bias_type: BiasType,
        space_tag: SpaceTag,
        fit_language: LanguageId,
    ) -> Result<(Self, InlpFit)> {
        let fit = fit_inlp(data, cfg)?;
        let pm = ProjectionMatrix::new(
            fit.p.clone(),
            fit.probe_accuracies.len(),
            fit.probe_accuracies.clone(),
            bias_type,
            space_tag,
            fit_language,
        )?;
        Ok((pm, fit))
    }

    pub fn dim(&self) -> usize {
        self.p.rows()
    }

    /// `h Pᵀ`.
    pub fn apply(&self, h: &Matrix) -> Result<Matrix> {
        if h.cols() != self.dim() {
            return Err(Error::shape(
                "inlp_apply",
                format!("input width {} but projection is {}×{}", h.cols(), self.dim(), self.dim()),
            ));
        }
        h.matmul_t(&self.p)
    }

    pub fn to_transform_file(&self, autoencoder: Option<Vec<u8>>) -> TransformFile {
        TransformFile {
            header: TransformHeader {
                kind: TransformKind::Projection,
                k: self.dim() - rank_estimate(&self.p),
                d: self.dim(),
                bias_type: self.bias_type,
                space_tag: self.space_tag,
                fit_language: self.fit_language.clone(),
                iterations_used: Some(self.iterations_used),
                probe_accuracies: Some(self.probe_accuracies.iter().map(|&a| a as f32).collect()),
                autoencoder_bytes: 0,
            },
            payload: self.p.clone(),
            autoencoder,
        }
    }

    pub fn from_transform_file(t: &TransformFile) -> Result<Self> {
        if t.header.kind != TransformKind::Projection {
            return Err(Error::Data("transform is not a projection".into()));
        }
        ProjectionMatrix::new(
            t.payload.clone(),
            t.header.iterations_used.unwrap_or(0),
            t.header.probe_accuracies.as_deref().unwrap_or_default().iter().map(|&a| a as f64).collect(),
            t.header.bias_type,
            t.header.space_tag,
            t.header.fit_language.clone(),
        )
    }
}

/// Rank of a projection matrix, read off its trace.
pub fn rank_estimate(p: &Matrix) -> usize {
    let tr: f64 = (0..p.rows().min(p.cols())).map(|i| p.get(i, i) as f64).sum();
    tr.round().max(0.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::SeededRng;

    fn diag(v: &[f32]) -> Matrix {
        let mut m = Matrix::zeros(v.len(), v.len());
        for (i, &x) in v.iter().enumerate() {
            m.set(i, i, x);
        }
        m
    }

    #[test]
    fn single_and_composed_steps() {
        let e1 = Matrix::from_rows(&[[1.0, 0.0, 0.0]]).unwrap();
        let e2 = Matrix::from_rows(&[[0.0, 1.0, 0.0]]).unwrap();
        let s1 = nullspace_step(&Matrix::identity(3), &e1).unwrap();
        assert_eq!(s1.p, diag(&[0.0, 1.0, 1.0]));
        let s2 = nullspace_step(&s1.p, &e2).unwrap();
        assert_eq!(s2.p, diag(&[0.0, 0.0, 1.0]));
        let zero = nullspace_step(&s2.p, &Matrix::zeros(1, 3)).unwrap();
        assert_eq!(zero.removed, 0);
        assert_eq!(zero.p, s2.p);
    }

    #[test]
    fn random_rank_two_rowspace_is_removed() {
        let mut rng = SeededRng::new(8);
        let w = rng.normal_matrix(2, 6, 1.0);
        let s = nullspace_step(&Matrix::identity(6), &w).unwrap();
        assert_eq!(s.removed, 2);
        assert!(w.matmul(&s.p).unwrap().frobenius_norm() < 1e-5);
    }

    fn planted(seed: u64, n: usize, d: usize) -> ProbeDataset {
        let mut rng = SeededRng::new(seed);
        let x = rng.normal_matrix(n, d, 1.0);
        let labels: Vec<usize> = x.iter_rows().map(|r| usize::from(r[0] > 0.0)).collect();
        ProbeDataset::new(x, &labels).unwrap()
    }

    #[test]
    fn planted_coordinate_is_removed() {
        let data = planted(11, 400, 5);
        let fit = fit_inlp(&data, &InlpConfig::default()).unwrap();
        let pm = ProjectionMatrix::new(
            fit.p.clone(),
            0,
            vec![],
            BiasType::Gender,
            SpaceTag::Original,
            LanguageId::new("en").unwrap(),
        )
        .unwrap();

        // a fresh probe on projected data is near chance
        let projected = data.with_x(pm.apply(&data.x).unwrap()).unwrap();
        let fresh = train_probe(&projected, 999).unwrap();
        assert!(fresh.accuracy <= fresh.majority + 0.05, "{} vs {}", fresh.accuracy, fresh.majority);

        // P sends the planted axis (nearly) to zero
        let e0 = Matrix::from_rows(&[[1.0, 0.0, 0.0, 0.0, 0.0]]).unwrap();
        assert!(pm.apply(&e0).unwrap().frobenius_norm() < 0.2);

        let acc = &fit.probe_accuracies;
        assert!(acc.last().unwrap() <= &acc[0]);
    }

    #[test]
    fn zero_iterations_rejected() {
        let data = planted(1, 20, 2);
        let cfg = InlpConfig { n_iters: 0, ..InlpConfig::default() };
        assert!(matches!(fit_inlp(&data, &cfg), Err(Error::Parameter(_))));
    }

    #[test]
    fn fit_matches_composed_nullspace_steps() {
        let data = planted(12, 200, 4);
        let cfg = InlpConfig { n_iters: 3, stop_accuracy_margin: -1.0, seed: 5 };
        let fit = fit_inlp(&data, &cfg).unwrap();
        // replay with the literal left-multiplied recipe
        let mut p = Matrix::identity(4);
        for it in 0..fit.probe_accuracies.len() {
            let projected = data.with_x(data.x.matmul_t(&p).unwrap()).unwrap();
            let probe = train_probe(&projected, cfg.seed + it as u64).unwrap();
            p = nullspace_step(&p, &probe.weights.matmul(&p).unwrap()).unwrap().p;
        }
        assert!(p.max_abs_diff(&fit.p).unwrap() < 1e-4);
    }

    #[test]
    fn transform_file_round_trip() {
        let pm = ProjectionMatrix::new(
            diag(&[0.0, 1.0, 1.0]),
            1,
            vec![0.75],
            BiasType::Race,
            SpaceTag::Latent,
            LanguageId::new("de").unwrap(),
        )
        .unwrap();
        let t = pm.to_transform_file(None);
        assert_eq!(t.header.k, 1);
        assert_eq!(ProjectionMatrix::from_transform_file(&t).unwrap(), pm);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(12))]
            #[test]
            fn fitted_projection_is_symmetric_idempotent(seed in 0u64..1000) {
                let mut rng = SeededRng::new(seed);
                let n = 120;
                let d = 6;
                let x = rng.normal_matrix(n, d, 1.0);
                let v = rng.unit_vector(d);
                let labels: Vec<usize> = x.iter_rows()
                    .map(|r| usize::from(r.iter().zip(&v).map(|(a, b)| a * b).sum::<f32>() > 0.0))
                    .collect();
                prop_assume!(labels.iter().filter(|&&l| l == 1).count() >= 10);
                prop_assume!(labels.iter().filter(|&&l| l == 0).count() >= 10);
                let data = ProbeDataset::new(x, &labels).unwrap();
                let cfg = InlpConfig { n_iters: 4, seed, ..InlpConfig::default() };
                let fit = fit_inlp(&data, &cfg).unwrap();
                let p = &fit.p;
                prop_assert!(p.max_abs_diff(&p.transpose()).unwrap() < 1e-5);
                prop_assert!(p.matmul(p).unwrap().max_abs_diff(p).unwrap() < 1e-4);
                // at most one direction per binary probe
                prop_assert!(d - rank_estimate(p) <= fit.probe_accuracies.len());
                // components orthogonal to everything removed pass through unchanged
                let h = rng.normal_matrix(3, d, 1.0);
                let keep = h.sub(&h.matmul_t(&fit.removed).unwrap().matmul(&fit.removed).unwrap()).unwrap();
                prop_assert!(keep.matmul_t(p).unwrap().max_abs_diff(&keep).unwrap() < 1e-5);
            }
        }
    }
}
