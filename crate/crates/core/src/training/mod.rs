//! Reverse-mode gradients through the unrolled network, the two-stage
//! training schedule and the Adam optimizer.

mod adam;
mod backward;
mod loss;
mod train;

pub use adam::*;
pub use backward::*;
pub use loss::*;
pub use train::*;
