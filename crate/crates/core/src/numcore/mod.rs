//! Dense linear algebra and optimisation substrate.

pub mod gradcheck;
pub mod linalg;
pub mod matrix;
pub mod optim;
pub mod rng;

pub use gradcheck::{grad_check, GradCheckReport};
pub use linalg::{orthonormal_rows, pca_top_k, symmetric_eigen, Pca};
pub use matrix::{dot, dot_f64, norm_f64, Matrix};
pub use optim::{AdamW, AdamWConfig};
pub use rng::SeededRng;
