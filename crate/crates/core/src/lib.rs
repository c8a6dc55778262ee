//! Distribution of directed last-passage times with geometric weights,
//! evaluated through several independent representations: simulation and
//! exact dynamic programming on the row-vector Markov chain, a finite
//! difference determinant, the Meixner ensemble, and Fredholm determinants of
//! a double contour integral kernel.

pub mod contour;
pub mod detformulas;
pub mod error;
pub mod fredholm;
pub mod linalg;
pub mod lpp;
pub mod meixner;
pub mod report;
pub mod scalar;
pub mod weights;

pub use error::{Error, Result};
