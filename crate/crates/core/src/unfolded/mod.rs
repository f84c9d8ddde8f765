//! The unfolded RNN-PGP network.
//!
//! Each iteration runs the same pipeline for every BS: neighbor selection,
//! feature assembly, a shared MLP predicting gradient coefficients and a
//! step size, a gradient-ascent step, projection onto the power budget and
//! a phase rotation that makes the own-channel inner product real.

mod coop;
mod ic;
mod mlp;
mod model;

pub use coop::*;
pub use ic::*;
pub use mlp::*;
pub use model::*;

/// Tag describing the input normalization and output coefficient scaling,
/// stored in model files.
pub const FEATURE_SCALING: &str = "log1p-snr+unit-ip+coef-norm/v3";

/// Tag describing the input layout (features grouped per neighbor slot).
pub const FEATURE_LAYOUT: &str = "slot-grouped";

pub const STEP_ACTIVATION: &str = "softplus";

/// `log10(1 + x/σ²)`.
#[inline]
pub(crate) fn log_scale(x: f64, sigma2: f64) -> f64 {
    (x / sigma2).ln_1p() * std::f64::consts::LOG10_E
}

/// Derivative of [`log_scale`] with respect to `x`.
#[inline]
pub(crate) fn log_scale_grad(x: f64, sigma2: f64) -> f64 {
    std::f64::consts::LOG10_E / (sigma2 + x)
}

/// Timing and per-iteration history of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnOutput<W> {
    pub w: W,
    /// Iterates `w^0 .. w^T` (the initial point first).
    pub iterates: Vec<W>,
    /// WSR of every iterate.
    pub wsr: Vec<f64>,
    pub iter_time_s: Vec<f64>,
}

/// Source of the gradient coefficients and step sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoefficientMode {
    /// MLP predicts coefficients and step.
    Learned,
    /// Exact gradient direction; the MLP predicts only the step.
    ExactGradient,
    /// Exact gradient direction with a fixed step; the MLP is unused.
    Oracle { step: f64 },
}
