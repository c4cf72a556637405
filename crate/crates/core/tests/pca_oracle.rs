use latent_debias::numcore::{pca_top_k, symmetric_eigen, Matrix, SeededRng};
use nalgebra::{DMatrix, SymmetricEigen};

/// Covariance eigenpairs from nalgebra, descending, with the
/// largest-magnitude entry of each vector made positive.
fn oracle(x: &Matrix, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (n, d) = x.shape();
    let m = DMatrix::from_fn(n, d, |r, c| x.get(r, c) as f64);
    let mean = m.row_mean();
    let centred = DMatrix::from_fn(n, d, |r, c| m[(r, c)] - mean[c]);
    let cov = centred.transpose() * &centred / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let mut vals = Vec::new();
    let mut vecs = Vec::new();
    for &i in order.iter().take(k) {
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let big = v.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if big < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        vals.push(eig.eigenvalues[i]);
        vecs.push(v);
    }
    (vals, vecs)
}

/// Data with a clear spectral gap so the top directions are well defined.
fn spread(rng: &mut SeededRng, n: usize, d: usize) -> Matrix {
    let mut x = rng.normal_matrix(n, d, 1.0);
    for r in 0..n {
        for c in 0..d {
            let s = x.get(r, c) * (d - c) as f32;
            x.set(r, c, s + 3.0);
        }
    }
    x
}

fn compare(x: &Matrix, k: usize) {
    let pca = pca_top_k(x, k).unwrap();
    let (vals, vecs) = oracle(x, k);
    for i in 0..k {
        let rel = (pca.explained_variance[i] as f64 - vals[i]).abs() / vals[i];
        assert!(rel < 1e-4, "eigenvalue {i}: {} vs {}", pca.explained_variance[i], vals[i]);
        for (a, b) in pca.components.row(i).iter().zip(&vecs[i]) {
            assert!((*a as f64 - b).abs() < 1e-3, "component {i}: {a} vs {b}");
        }
    }
}

#[test]
fn covariance_route_matches_nalgebra() {
    let mut rng = SeededRng::new(1);
    compare(&spread(&mut rng, 200, 6), 3);
}

#[test]
fn gram_route_matches_nalgebra() {
    // more columns than rows exercises the n×n Gram path
    let mut rng = SeededRng::new(2);
    compare(&spread(&mut rng, 12, 40), 4);
}

#[test]
fn jacobi_eigen_matches_nalgebra() {
    let mut rng = SeededRng::new(3);
    let n = 7;
    let b = rng.normal_matrix(n, n, 1.0);
    let s = b.t_matmul(&b).unwrap();
    let a: Vec<f64> = s.data().iter().map(|&v| v as f64).collect();
    let (vals, vecs) = symmetric_eigen(&a, n);
    let m = DMatrix::from_row_slice(n, n, &a);
    let mut want: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    want.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let mut got = vals.clone();
    got.sort_by(|x, y| y.partial_cmp(x).unwrap());
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-9 * w.abs().max(1.0));
    }
    // A v = λ v for each returned pair
    for (l, v) in vals.iter().zip(&vecs) {
        let av = &m * nalgebra::DVector::from_column_slice(v);
        for (x, y) in av.iter().zip(v) {
            assert!((x - l * y).abs() < 1e-8 * l.abs().max(1.0));
        }
    }
}
