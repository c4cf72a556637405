use crate::error::{Error, Result};
use crate::numcore::{orthonormal_rows, pca_top_k, Matrix};
use crate::store::{BiasType, LanguageId, SpaceTag, TransformFile, TransformHeader, TransformKind};

use super::GroupKind;

/// Rows of `directions` must be orthonormal to within this.
pub const ORTHONORMAL_TOL: f32 = 1e-5;

/// Orthonormal bias directions, removed from embeddings by projection.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasSubspace {
    pub directions: Matrix,
    pub bias_type: BiasType,
    pub space_tag: SpaceTag,
    pub fit_language: LanguageId,
}

/// Stacks the vectors PCA runs on.
///
/// Counterfactual groups are centred on their own mean, leaving only the
/// attribute variation between variants of one sentence. Per-term groups are
/// reduced to their centroids, which then form a single group.
pub fn definitional_vectors(groups: &[Matrix], kind: GroupKind) -> Result<Matrix> {
    let d = groups.iter().map(Matrix::cols).next().ok_or_else(|| Error::Grouping("no groups to fit on".into()))?;
    if let Some(g) = groups.iter().find(|g| g.cols() != d) {
        return Err(Error::shape("fit_bias_subspace", format!("group of width {} among width {d}", g.cols())));
    }
    let groups: Vec<&Matrix> = groups.iter().filter(|g| g.rows() > 0).collect();
    match kind {
        GroupKind::Counterfactual => {
            let centred: Vec<Matrix> = groups
                .iter()
                .map(|g| {
                    let mut c = (*g).clone();
                    c.center_columns();
                    c
                })
                .collect();
            Matrix::vstack(&centred.iter().collect::<Vec<_>>())
        }
        GroupKind::PerTerm => {
            let means: Vec<Matrix> = groups.iter().map(|g| g.column_means()).collect();
            let mut stacked = Matrix::vstack(&means.iter().collect::<Vec<_>>())?;
            stacked.center_columns();
            Ok(stacked)
        }
    }
}

/// Top-`k` principal directions of the definitional vectors.
pub fn fit_bias_directions(groups: &[Matrix], kind: GroupKind, k: usize) -> Result<Matrix> {
    let x = definitional_vectors(groups, kind)?;
    if k == 0 {
        return Err(Error::Parameter("k must be ≥ 1".into()));
    }
    if x.rows() < k + 1 {
        return Err(Error::Rank { requested: k, rank: x.rows().saturating_sub(1).min(x.cols()) });
    }
    if k > x.cols() {
        return Err(Error::Rank { requested: k, rank: x.cols() });
    }
    let pca = pca_top_k(&x, k)?;
    if pca.rank_deficient {
        return Err(Error::Rank { requested: k, rank: pca.rank });
    }
    Ok(pca.components)
}

impl BiasSubspace {
    pub fn new(directions: Matrix, bias_type: BiasType, space_tag: SpaceTag, fit_language: LanguageId) -> Result<Self> {
        if directions.rows() == 0 {
            return Err(Error::Parameter("bias subspace needs at least one direction".into()));
        }
        let gram = directions.matmul_t(&directions)?;
        let err = gram.max_abs_diff(&Matrix::identity(directions.rows())).unwrap_or(f32::INFINITY);
        if err > ORTHONORMAL_TOL {
            return Err(Error::Parameter(format!("directions are not orthonormal (max deviation {err:e})")));
        }
        Ok(BiasSubspace { directions, bias_type, space_tag, fit_language })
    }

    pub fn fit(
        groups: &[Matrix],
        kind: GroupKind,
        k: usize,
        bias_type: BiasType,
        space_tag: SpaceTag,
        fit_language: LanguageId,
    ) -> Result<Self> {
        let v = fit_bias_directions(groups, kind, k)?;
        // PCA output is orthonormal in f64; re-orthonormalise after the f32 cast
        let v = orthonormal_rows(&v, 1e-8);
        BiasSubspace::new(v, bias_type, space_tag, fit_language)
    }

    pub fn k(&self) -> usize {
        self.directions.rows()
    }

    pub fn dim(&self) -> usize {
        self.directions.cols()
    }

    /// `h − (h Vᵀ) V`.
    pub fn apply(&self, h: &Matrix) -> Result<Matrix> {
        if h.cols() != self.dim() {
            return Err(Error::shape(
                "sentdebias_apply",
                format!("input width {} but subspace lives in dimension {}", h.cols(), self.dim()),
            ));
        }
        let coords = h.matmul_t(&self.directions)?;
        let mut out = h.clone();
        out.axpy(-1.0, &coords.matmul(&self.directions)?)?;
        Ok(out)
    }

    pub fn to_transform_file(&self, autoencoder: Option<Vec<u8>>) -> TransformFile {
        TransformFile {
            header: TransformHeader {
                kind: TransformKind::Subspace,
                k: self.k(),
                d: self.dim(),
                bias_type: self.bias_type,
                space_tag: self.space_tag,
                fit_language: self.fit_language.clone(),
                iterations_used: None,
                probe_accuracies: None,
                autoencoder_bytes: 0,
            },
            payload: self.directions.clone(),
            autoencoder,
        }
    }

    pub fn from_transform_file(t: &TransformFile) -> Result<Self> {
        if t.header.kind != TransformKind::Subspace {
            return Err(Error::Data("transform is not a bias subspace".into()));
        }
        BiasSubspace::new(t.payload.clone(), t.header.bias_type, t.header.space_tag, t.header.fit_language.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{dot_f64, norm_f64, SeededRng};

    fn meta() -> (BiasType, SpaceTag, LanguageId) {
        (BiasType::Gender, SpaceTag::Original, LanguageId::new("en").unwrap())
    }

    fn fit(groups: &[Matrix], kind: GroupKind, k: usize) -> Result<BiasSubspace> {
        let (b, s, l) = meta();
        BiasSubspace::fit(groups, kind, k, b, s, l)
    }

    #[test]
    fn pairs_differing_along_first_axis() {
        let groups = vec![
            Matrix::from_rows(&[[1.0, 5.0, 2.0], [-1.0, 5.0, 2.0]]).unwrap(),
            Matrix::from_rows(&[[3.0, -1.0, 0.0], [1.0, -1.0, 0.0]]).unwrap(),
        ];
        let s = fit(&groups, GroupKind::Counterfactual, 1).unwrap();
        assert!((s.directions.get(0, 0) - 1.0).abs() < 1e-6);
        assert!(s.directions.get(0, 1).abs() < 1e-6 && s.directions.get(0, 2).abs() < 1e-6);
    }

    #[test]
    fn identical_members_do_not_move_the_subspace() {
        let base = vec![
            Matrix::from_rows(&[[1.0, 0.0, 0.0], [-1.0, 0.2, 0.0]]).unwrap(),
            Matrix::from_rows(&[[2.0, 1.0, 1.0], [0.0, 1.0, 1.0]]).unwrap(),
        ];
        let mut extra = base.clone();
        extra.push(Matrix::from_rows(&[[7.0, 7.0, 7.0], [7.0, 7.0, 7.0]]).unwrap());
        let a = fit(&base, GroupKind::Counterfactual, 1).unwrap();
        let b = fit(&extra, GroupKind::Counterfactual, 1).unwrap();
        assert!(a.directions.max_abs_diff(&b.directions).unwrap() < 1e-6);
    }

    #[test]
    fn planted_direction_is_recovered() {
        let mut rng = SeededRng::new(17);
        let d = 16;
        let v = rng.unit_vector(d);
        let groups: Vec<Matrix> = (0..20)
            .map(|_| {
                let topic = rng.normal_matrix(1, d, 3.0);
                let a = rng.uniform(0.5, 1.5);
                let mut g = Matrix::vstack(&[&topic, &topic]).unwrap();
                for c in 0..d {
                    g.set(0, c, g.get(0, c) + a * v[c] + 0.01 * rng.normal());
                    g.set(1, c, g.get(1, c) - a * v[c] + 0.01 * rng.normal());
                }
                g
            })
            .collect();
        let s = fit(&groups, GroupKind::Counterfactual, 1).unwrap();
        assert!(dot_f64(s.directions.row(0), &v).abs() > 0.99);
    }

    #[test]
    fn per_term_centroids_recover_between_term_direction() {
        let mut rng = SeededRng::new(3);
        let d = 12;
        let v = rng.unit_vector(d);
        let groups: Vec<Matrix> = (0..6)
            .map(|t| {
                let shift = (t as f32 - 2.5) * 2.0;
                let mut g = rng.normal_matrix(30, d, 0.3);
                for r in 0..30 {
                    for c in 0..d {
                        g.set(r, c, g.get(r, c) + shift * v[c]);
                    }
                }
                g
            })
            .collect();
        let s = fit(&groups, GroupKind::PerTerm, 1).unwrap();
        assert!(dot_f64(s.directions.row(0), &v).abs() > 0.99);
    }

    #[test]
    fn rank_errors() {
        let g = vec![Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap()];
        assert!(matches!(fit(&g, GroupKind::Counterfactual, 2), Err(Error::Rank { .. })));
        let flat = vec![Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]).unwrap()];
        assert!(matches!(fit(&flat, GroupKind::Counterfactual, 1), Err(Error::Rank { rank: 0, .. })));
        assert!(matches!(fit(&[], GroupKind::Counterfactual, 1), Err(Error::Grouping(_))));
    }

    #[test]
    fn apply_examples() {
        let (b, s, l) = meta();
        let v = Matrix::from_rows(&[[0.6, 0.8, 0.0]]).unwrap();
        let sub = BiasSubspace::new(v.clone(), b, s, l).unwrap();
        let orth = Matrix::from_rows(&[[0.8, -0.6, 3.0]]).unwrap();
        assert!(sub.apply(&orth).unwrap().max_abs_diff(&orth).unwrap() < 1e-6);
        assert!(sub.apply(&v).unwrap().max_abs() < 1e-6);
        assert!(sub.apply(&Matrix::zeros(1, 4)).is_err());
    }

    #[test]
    fn random_rows_orthogonal_after_apply() {
        let mut rng = SeededRng::new(5);
        let w = rng.normal_matrix(2, 10, 1.0);
        let (b, s, l) = meta();
        let sub = BiasSubspace::new(orthonormal_rows(&w, 1e-8), b, s, l).unwrap();
        let h = rng.normal_matrix(6, 10, 1.0);
        let out = sub.apply(&h).unwrap();
        for r in out.iter_rows() {
            for k in 0..2 {
                // inner products computed directly in f64
                assert!(dot_f64(r, sub.directions.row(k)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn transform_file_round_trip() {
        let (b, _, l) = meta();
        let sub = BiasSubspace::new(Matrix::from_rows(&[[0.0, 1.0]]).unwrap(), b, SpaceTag::Latent, l).unwrap();
        let t = sub.to_transform_file(Some(vec![9, 9]));
        assert_eq!(BiasSubspace::from_transform_file(&t).unwrap(), sub);
        assert!(BiasSubspace::new(
            Matrix::from_rows(&[[0.0, 2.0]]).unwrap(),
            b,
            SpaceTag::Latent,
            sub.fit_language.clone()
        )
        .is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]
            #[test]
            fn apply_idempotent_and_contracting(seed in 0u64..10_000, k in 1usize..4, n in 1usize..8) {
                let mut rng = SeededRng::new(seed);
                let d = 8;
                let (b, s, l) = meta();
                let sub = BiasSubspace::new(orthonormal_rows(&rng.normal_matrix(k, d, 1.0), 1e-8), b, s, l).unwrap();
                prop_assert!(sub.directions.matmul_t(&sub.directions).unwrap()
                    .max_abs_diff(&Matrix::identity(sub.k())).unwrap() < 1e-5);
                let h = rng.normal_matrix(n, d, 2.0);
                let once = sub.apply(&h).unwrap();
                let twice = sub.apply(&once).unwrap();
                prop_assert!(once.max_abs_diff(&twice).unwrap() < 1e-5);
                for (a, o) in h.iter_rows().zip(once.iter_rows()) {
                    prop_assert!(norm_f64(o) <= norm_f64(a) + 1e-5);
                }
            }
        }
    }
}
