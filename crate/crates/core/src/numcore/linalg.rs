//! Symmetric eigen-decomposition, PCA and row orthonormalisation.
//!
//! Everything here works internally in `f64` and rounds to `f32` at the boundary.

use crate::error::{Error, Result};

use super::Matrix;

/// Eigenvalues below `RANK_RTOL * largest` count as zero when deciding rank.
pub const RANK_RTOL: f64 = 1e-9;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix stored row-major in `a` (n×n).
///
/// Returns `(eigenvalues, eigenvectors)` sorted by descending eigenvalue; the
/// eigenvectors are the rows of the second element.
pub fn symmetric_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(a.len(), n * n, "symmetric_eigen: bad buffer length");
    let mut m = a.to_vec();
    let mut v = vec![0f64; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let vectors = order.iter().map(|&i| (0..n).map(|k| v[k * n + i]).collect()).collect();
    (values, vectors)
}

/// Result of [`pca_top_k`].
#[derive(Clone, Debug)]
pub struct Pca {
    /// k'×d, orthonormal rows, descending variance.
    pub components: Matrix,
    /// Variance along each component (divisor n−1).
    pub explained_variance: Vec<f32>,
    pub mean: Matrix,
    /// Numerical rank of the centred data.
    pub rank: usize,
    /// Set when fewer than the requested `k` components exist.
    pub rank_deficient: bool,
}

/// Top-`k` principal directions of the rows of `x`.
///
/// The data is mean-centred here. Components are normalised so that the
/// largest-magnitude entry of each is positive. When the centred data has
/// rank below `k` only `rank` components are returned and the result is
/// flagged as rank deficient.
pub fn pca_top_k(x: &Matrix, k: usize) -> Result<Pca> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::Parameter(format!("PCA needs at least 2 rows, got {n}")));
    }
    if k == 0 || k > (n - 1).min(d) {
        return Err(Error::Parameter(format!("k = {k} out of range 1..={} for a {n}x{d} input", (n - 1).min(d))));
    }

    let mean = x.column_means();
    let centred: Vec<Vec<f64>> =
        x.iter_rows().map(|r| r.iter().zip(mean.data()).map(|(&v, &m)| v as f64 - m as f64).collect()).collect();

    let denom = (n - 1) as f64;
    let mut pairs: Vec<(f64, Vec<f64>)> = if d <= n {
        let mut cov = vec![0f64; d * d];
        for r in &centred {
            for i in 0..d {
                let ri = r[i];
                if ri == 0.0 {
                    continue;
                }
                for j in i..d {
                    cov[i * d + j] += ri * r[j];
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                let v = cov[i * d + j] / denom;
                cov[i * d + j] = v;
                cov[j * d + i] = v;
            }
        }
        let (vals, vecs) = symmetric_eigen(&cov, d);
        vals.into_iter().zip(vecs).collect()
    } else {
        // Wide input: decompose the n×n Gram matrix and map back.
        let mut gram = vec![0f64; n * n];
        for i in 0..n {
            for j in i..n {
                let g: f64 = centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum();
                gram[i * n + j] = g;
                gram[j * n + i] = g;
            }
        }
        let (vals, vecs) = symmetric_eigen(&gram, n);
        vals.into_iter()
            .zip(vecs)
            .map(|(mu, u)| {
                let mut comp = vec![0f64; d];
                for (row, &ui) in centred.iter().zip(&u) {
                    for (c, &rv) in comp.iter_mut().zip(row) {
                        *c += ui * rv;
                    }
                }
                normalize(&mut comp);
                (mu / denom, comp)
            })
            .collect()
    };

    let top = pairs.first().map(|p| p.0).unwrap_or(0.0).max(0.0);
    let rank = pairs.iter().filter(|(l, _)| *l > RANK_RTOL * top && *l > 0.0).count();
    let take = k.min(rank);
    pairs.truncate(take);

    // Re-orthonormalise (matters only for the Gram route) then fix signs.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(take);
    for (_, v) in &pairs {
        let mut v = v.clone();
        for b in &basis {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= p * y;
            }
        }
        normalize(&mut v);
        fix_sign(&mut v);
        basis.push(v);
    }

    let mut components = Matrix::zeros(take, d);
    for (i, b) in basis.iter().enumerate() {
        for (j, &v) in b.iter().enumerate() {
            components.set(i, j, v as f32);
        }
    }
    Ok(Pca {
        components,
        explained_variance: pairs.iter().map(|(l, _)| *l as f32).collect(),
        mean,
        rank,
        rank_deficient: rank < k,
    })
}

/// Orthonormalises the rows of `w` by modified Gram–Schmidt (two passes).
///
/// A row whose residual norm falls below `drop_tol` times its original norm
/// is dropped, as are all-zero rows.
pub fn orthonormal_rows(w: &Matrix, drop_tol: f64) -> Matrix {
    let d = w.cols();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for row in w.iter_rows() {
        let mut v: Vec<f64> = row.iter().map(|&x| x as f64).collect();
        let original = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if original == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for b in &basis {
                let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= p * y;
                }
            }
        }
        let residual = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if residual <= drop_tol * original {
            continue;
        }
        for x in &mut v {
            *x /= residual;
        }
        basis.push(v);
    }
    let mut out = Matrix::zeros(basis.len(), d);
    for (i, b) in basis.iter().enumerate() {
        for (j, &v) in b.iter().enumerate() {
            out.set(i, j, v as f32);
        }
    }
    out
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}
