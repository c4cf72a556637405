pub mod autoencoder;
pub mod debias;
pub mod diagnostics;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod inlp;
pub mod numcore;
pub mod sentdebias;
pub mod store;
pub mod synthetic;

pub use error::{Error, Result};
pub use numcore::Matrix;
