//! How well parallel sentences line up across languages: nearest-neighbour
//! retrieval, mean cosine of aligned pairs, and a 2-D PCA export for plots.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{norm_f64, pca_top_k, Matrix};
use crate::store::{EmbeddingSet, ParallelPairSet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub accuracy: f64,
    pub queries: usize,
    /// Queries whose best cosine was shared by more than one candidate.
    pub ties: usize,
}

fn unit_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for r in 0..out.rows() {
        let n = norm_f64(out.row(r));
        if n > 0.0 {
            for v in out.row_mut(r) {
                *v = (*v as f64 / n) as f32;
            }
        }
    }
    out
}

/// Row `i` of `a` should retrieve row `i` of `b` among all rows of `b`.
///
/// Cosine similarity; ties go to the lowest index and are counted.
pub fn retrieval_accuracy_rows(a: &Matrix, b: &Matrix) -> Result<RetrievalReport> {
    if a.shape() != b.shape() {
        return Err(Error::shape("retrieval_accuracy", format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    if a.rows() == 0 {
        return Err(Error::Data("no aligned rows to evaluate".into()));
    }
    let sims = unit_rows(a).matmul_t(&unit_rows(b))?;
    let mut hits = 0;
    let mut ties = 0;
    for (i, row) in sims.iter_rows().enumerate() {
        let mut best = 0;
        for (j, &s) in row.iter().enumerate() {
            if s > row[best] {
                best = j;
            }
        }
        if row.iter().filter(|&&s| s == row[best]).count() > 1 {
            ties += 1;
        }
        if best == i {
            hits += 1;
        }
    }
    Ok(RetrievalReport { accuracy: hits as f64 / a.rows() as f64, queries: a.rows(), ties })
}

/// Mean cosine between row `i` of `a` and row `i` of `b`.
pub fn mean_parallel_cosine_rows(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape("mean_parallel_cosine", format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    if a.rows() == 0 {
        return Err(Error::Data("no aligned rows to evaluate".into()));
    }
    let total: f64 = a
        .iter_rows()
        .zip(b.iter_rows())
        .map(|(x, y)| {
            let (nx, ny) = (norm_f64(x), norm_f64(y));
            if nx == 0.0 || ny == 0.0 {
                0.0
            } else {
                crate::numcore::dot_f64(x, y) / (nx * ny)
            }
        })
        .sum();
    Ok(total / a.rows() as f64)
}

/// Row-aligned matrices for the pairs of `pairs`, oriented `a → b`.
pub fn aligned_rows(a: &EmbeddingSet, b: &EmbeddingSet, pairs: &ParallelPairSet) -> Result<(Matrix, Matrix)> {
    let pairs = if pairs.lang_a == a.language && pairs.lang_b == b.language {
        pairs.clone()
    } else if pairs.lang_a == b.language && pairs.lang_b == a.language {
        pairs.swapped()
    } else {
        return Err(Error::Data(format!(
            "pair set {}–{} does not match sets {} and {}",
            pairs.lang_a, pairs.lang_b, a.language, b.language
        )));
    };
    let (ia, ib) = (a.index(), b.index());
    let mut ra = Vec::with_capacity(pairs.len());
    let mut rb = Vec::with_capacity(pairs.len());
    for (x, y) in &pairs.pairs {
        let (Some(&i), Some(&j)) = (ia.get(x.as_str()), ib.get(y.as_str())) else {
            return Err(Error::Data(format!("pair ({x}, {y}) does not resolve in the embedding sets")));
        };
        ra.push(i);
        rb.push(j);
    }
    Ok((a.matrix.select_rows(&ra), b.matrix.select_rows(&rb)))
}

pub fn retrieval_accuracy(a: &EmbeddingSet, b: &EmbeddingSet, pairs: &ParallelPairSet) -> Result<RetrievalReport> {
    let (x, y) = aligned_rows(a, b, pairs)?;
    retrieval_accuracy_rows(&x, &y)
}

pub fn mean_parallel_cosine(a: &EmbeddingSet, b: &EmbeddingSet, pairs: &ParallelPairSet) -> Result<f64> {
    let (x, y) = aligned_rows(a, b, pairs)?;
    mean_parallel_cosine_rows(&x, &y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub id: String,
    pub language: String,
    pub x: f32,
    pub y: f32,
}

/// Joint 2-D PCA coordinates of every row of every set.
pub fn project_2d_points(sets: &[EmbeddingSet]) -> Result<Vec<Point2>> {
    let n: usize = sets.iter().map(EmbeddingSet::len).sum();
    if n < 3 {
        return Err(Error::Rank { requested: 2, rank: n.saturating_sub(1) });
    }
    let parts: Vec<&Matrix> = sets.iter().map(|s| &s.matrix).collect();
    let all = Matrix::vstack(&parts)?;
    if all.cols() < 2 {
        return Err(Error::Rank { requested: 2, rank: all.cols() });
    }
    let pca = pca_top_k(&all, 2)?;
    let mut centred = all.clone();
    centred.center_columns();
    let coords = centred.matmul_t(&pca.components)?;
    let mut out = Vec::with_capacity(n);
    let mut r = 0;
    for s in sets {
        for id in &s.ids {
            let row = coords.row(r);
            out.push(Point2 {
                id: id.clone(),
                language: s.language.to_string(),
                x: row.first().copied().unwrap_or(0.0),
                y: row.get(1).copied().unwrap_or(0.0),
            });
            r += 1;
        }
    }
    Ok(out)
}

pub fn project_2d(sets: &[EmbeddingSet]) -> Result<String> {
    let mut csv = String::from("id,language,x,y\n");
    for p in project_2d_points(sets)? {
        let _ = writeln!(csv, "{},{},{},{}", p.id, p.language, p.x, p.y);
    }
    Ok(csv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::SeededRng;
    use crate::store::{LanguageId, Split};

    fn set(lang: &str, m: Matrix) -> EmbeddingSet {
        let ids = (0..m.rows()).map(|i| format!("s{i}")).collect();
        EmbeddingSet::new(LanguageId::new(lang).unwrap(), Split::Dev, m, ids).unwrap()
    }

    fn id_pairs(a: &EmbeddingSet, b: &EmbeddingSet) -> ParallelPairSet {
        ParallelPairSet {
            lang_a: a.language.clone(),
            lang_b: b.language.clone(),
            pairs: a.ids.iter().map(|i| (i.clone(), i.clone())).collect(),
        }
    }

    #[test]
    fn identical_sets_retrieve_perfectly() {
        let m = SeededRng::new(1).normal_matrix(30, 8, 1.0);
        let (a, b) = (set("en", m.clone()), set("fr", m));
        let p = id_pairs(&a, &b);
        assert_eq!(retrieval_accuracy(&a, &b, &p).unwrap().accuracy, 1.0);
        assert!((mean_parallel_cosine(&a, &b, &p).unwrap() - 1.0).abs() < 1e-6);
        // orientation of the pair set does not matter
        assert_eq!(retrieval_accuracy(&a, &b, &p.swapped()).unwrap().accuracy, 1.0);
    }

    #[test]
    fn unrelated_sets_are_near_chance() {
        let mut rng = SeededRng::new(2);
        let mut total = 0.0;
        for _ in 0..20 {
            let a = rng.normal_matrix(100, 16, 1.0);
            let b = rng.normal_matrix(100, 16, 1.0);
            total += retrieval_accuracy_rows(&a, &b).unwrap().accuracy;
        }
        // expected 1/100 per trial; 20 trials give mean 0.01 ± ~0.005
        assert!(total / 20.0 < 0.03, "{}", total / 20.0);
    }

    #[test]
    fn small_noise_retrieves() {
        let mut rng = SeededRng::new(3);
        let a = rng.normal_matrix(100, 32, 1.0);
        let b = a.add(&rng.normal_matrix(100, 32, 0.05)).unwrap();
        assert!(retrieval_accuracy_rows(&a, &b).unwrap().accuracy > 0.95);
    }

    #[test]
    fn duplicate_rows_are_reported_as_ties() {
        let a = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let r = retrieval_accuracy_rows(&a, &a).unwrap();
        assert_eq!(r.ties, 2);
        // row 1 ties with row 0 and the lower index wins
        assert!((r.accuracy - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_examples() {
        let a = Matrix::from_rows(&[[1.0, 0.0], [0.0, 2.0]]).unwrap();
        let orth = Matrix::from_rows(&[[0.0, 3.0], [1.0, 0.0]]).unwrap();
        assert_eq!(mean_parallel_cosine_rows(&a, &orth).unwrap(), 0.0);
        assert_eq!(mean_parallel_cosine_rows(&a, &a.scaled(-1.0)).unwrap(), -1.0);
    }

    #[test]
    fn projection_csv_and_errors() {
        let mut rng = SeededRng::new(4);
        let a = set("en", rng.normal_matrix(5, 4, 1.0));
        let b = set("de", rng.normal_matrix(5, 4, 1.0));
        let csv = project_2d(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(csv.lines().count(), 11);
        assert!(csv.starts_with("id,language,x,y\ns0,en,"));
        let two = set("en", rng.normal_matrix(2, 4, 1.0));
        assert!(matches!(project_2d(&[two]), Err(Error::Rank { .. })));
    }

    #[test]
    fn projection_is_order_invariant() {
        let mut rng = SeededRng::new(5);
        let a = set("en", rng.normal_matrix(6, 3, 1.0));
        let b = set("nl", rng.normal_matrix(6, 3, 1.0));
        let p1 = project_2d_points(&[a.clone(), b.clone()]).unwrap();
        let p2 = project_2d_points(&[b, a]).unwrap();
        for p in &p1 {
            let q = p2.iter().find(|q| q.id == p.id && q.language == p.language).unwrap();
            assert!((p.x - q.x).abs() < 1e-4 && (p.y - q.y).abs() < 1e-4);
        }
    }
}
