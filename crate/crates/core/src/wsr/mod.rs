//! Rates, gradients, projections and phase rotations.
//!
//! Gradients are returned as the real gradient of the sum rate (in bits)
//! written in complex form: for a beamformer entry `w = x + iy` the returned
//! value is `∂R/∂x + i ∂R/∂y`, which equals `2 ∂R/∂w*`.

mod coop;
mod ic;

pub use coop::*;
pub use ic::*;

use crate::channel::ChannelSample;
use crate::cplx::{dot_h, norm_sqr, CVec, C64};
use crate::transform::{CoopReducedProblem, ReducedProblem};

/// `2 / ln 2`: converts `∂ ln / ∂w*` into the real gradient of a `log2` rate.
pub const KAPPA: f64 = 2.0 * std::f64::consts::LOG2_E;

/// Reduced beamformers of the interference channel, one vector per link.
pub type BeamformerSet = Vec<CVec>;

/// Cooperative beamformers `w[j][k]` (BS `j`, UE `k`).
pub type CoopBeamformerSet = Vec<Vec<CVec>>;

/// Channel access for interference-channel evaluations, in reduced or full
/// antenna space alike.
pub trait IcChannels: Sync {
    fn num_links(&self) -> usize;
    /// Channel from BS `j` to UE `k`.
    fn channel(&self, j: usize, k: usize) -> &[C64];
    fn alpha(&self) -> &[f64];
    fn sigma2(&self) -> &[f64];
    fn power(&self) -> &[f64];
}

/// Channel access for the cooperative problem.
pub trait CoopChannels: Sync {
    fn num_tx(&self) -> usize;
    fn num_rx(&self) -> usize;
    fn channel(&self, j: usize, k: usize) -> &[C64];
    /// Indexed by receiver.
    fn alpha(&self) -> &[f64];
    /// Indexed by receiver.
    fn sigma2(&self) -> &[f64];
    /// Indexed by transmitter.
    fn power(&self) -> &[f64];
}

macro_rules! channel_access {
    ($t:ty) => {
        impl IcChannels for $t {
            fn num_links(&self) -> usize {
                self.g.len()
            }
            fn channel(&self, j: usize, k: usize) -> &[C64] {
                &self.g[j][k]
            }
            fn alpha(&self) -> &[f64] {
                &self.alpha
            }
            fn sigma2(&self) -> &[f64] {
                &self.sigma2
            }
            fn power(&self) -> &[f64] {
                &self.power
            }
        }
    };
}

channel_access!(ReducedProblem);

impl IcChannels for ChannelSample {
    fn num_links(&self) -> usize {
        self.h.len()
    }
    fn channel(&self, j: usize, k: usize) -> &[C64] {
        &self.h[j][k]
    }
    fn alpha(&self) -> &[f64] {
        &self.alpha
    }
    fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }
    fn power(&self) -> &[f64] {
        &self.power
    }
}

impl CoopChannels for CoopReducedProblem {
    fn num_tx(&self) -> usize {
        self.g.len()
    }
    fn num_rx(&self) -> usize {
        self.g[0].len()
    }
    fn channel(&self, j: usize, k: usize) -> &[C64] {
        &self.g[j][k]
    }
    fn alpha(&self) -> &[f64] {
        &self.alpha
    }
    fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }
    fn power(&self) -> &[f64] {
        &self.power
    }
}

impl CoopChannels for ChannelSample {
    fn num_tx(&self) -> usize {
        self.h.len()
    }
    fn num_rx(&self) -> usize {
        self.h[0].len()
    }
    fn channel(&self, j: usize, k: usize) -> &[C64] {
        &self.h[j][k]
    }
    fn alpha(&self) -> &[f64] {
        &self.alpha
    }
    fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }
    fn power(&self) -> &[f64] {
        &self.power
    }
}

/// Vectors within this relative margin of the budget count as feasible, so
/// that projecting a projected vector returns it unchanged despite rounding.
pub const PROJECTION_SLACK: f64 = 1e-12;

/// Euclidean projection onto the ball `‖w‖² ≤ P`.
pub fn project_ball(w: &[C64], power: f64) -> CVec {
    let n2 = norm_sqr(w);
    if n2 <= power * (1.0 + PROJECTION_SLACK) {
        return w.to_vec();
    }
    let s = (power / n2).sqrt();
    w.iter().map(|z| z * s).collect()
}

/// Joint projection of a BS's beamformers onto `Σ_k ‖w_k‖² ≤ P`.
pub fn project_coop(w: &[CVec], power: f64) -> Vec<CVec> {
    let n2: f64 = w.iter().map(|v| norm_sqr(v)).sum();
    if n2 <= power * (1.0 + PROJECTION_SLACK) {
        return w.to_vec();
    }
    let s = (power / n2).sqrt();
    w.iter()
        .map(|v| v.iter().map(|z| z * s).collect())
        .collect()
}

/// Unit phasor `e^{-iφ}` with `φ = arg(ρ)`; one when `ρ = 0`.
pub fn derotation(rho: C64) -> C64 {
    let r = rho.norm();
    if r == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        let phi = rho.im.atan2(rho.re);
        C64::from_polar(1.0, -phi)
    }
}

/// Rotates `w` so that `g^H w` becomes real and nonnegative.
pub fn phase_rotate(w: &[C64], g_ref: &[C64]) -> CVec {
    let e = derotation(dot_h(g_ref, w));
    w.iter().map(|z| z * e).collect()
}
