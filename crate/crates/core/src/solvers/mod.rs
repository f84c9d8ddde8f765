//! Reference iterative solvers on the reduced problems.

mod oracle;
mod pgp;
mod wmmse;

pub use oracle::*;
pub use pgp::*;
pub use wmmse::*;

use serde::{Deserialize, Serialize};

use crate::cplx::{norm, CVec};
use crate::error::{Error, Result};
use crate::wsr::{BeamformerSet, CoopChannels, IcChannels};

/// Why an iterative solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    IterationLimit,
    Converged,
}

/// Iteration history of a solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace<W = BeamformerSet> {
    /// WSR at the initial point followed by one value per iteration.
    pub wsr: Vec<f64>,
    /// Iterates including the initial point, when recording was requested.
    pub beamformers: Option<Vec<W>>,
    /// Wall-clock seconds spent in each iteration.
    pub iter_time_s: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    /// Step accepted in each iteration (gradient methods only; zero when no
    /// ascent step was found).
    pub steps: Vec<f64>,
    /// WSR after every single-block update (ICCD only).
    pub block_wsr: Vec<f64>,
    pub final_w: W,
}

impl<W> SolveTrace<W> {
    pub fn final_wsr(&self) -> f64 {
        *self.wsr.last().expect("trace holds the initial point")
    }

    pub fn total_time_s(&self) -> f64 {
        self.iter_time_s.iter().sum()
    }
}

/// Step-size rule of the gradient methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    Constant(f64),
    /// Projected Armijo backtracking. Each iteration starts from twice the
    /// previously accepted step (from `s0` initially).
    Backtracking {
        s0: f64,
        beta: f64,
        c: f64,
    },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Backtracking {
            s0: 1.0,
            beta: 0.5,
            c: 1e-4,
        }
    }
}

impl StepRule {
    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            StepRule::Constant(s) if !(s > 0.0) || !s.is_finite() => Err(Error::invalid(format!(
                "step size must be positive, got {s}"
            ))),
            StepRule::Backtracking { s0, beta, c } => {
                if !(s0 > 0.0) || !s0.is_finite() {
                    Err(Error::invalid(format!(
                        "initial step must be positive, got {s0}"
                    )))
                } else if !(beta > 0.0 && beta < 1.0) {
                    Err(Error::invalid(format!(
                        "backtracking factor must lie in (0,1), got {beta}"
                    )))
                } else if !(c > 0.0 && c < 1.0) {
                    Err(Error::invalid(format!(
                        "Armijo constant must lie in (0,1), got {c}"
                    )))
                } else {
                    Ok(())
                }
            }
            StepRule::Constant(_) => Ok(()),
        }
    }
}

fn check_iterations(t: usize) -> Result<()> {
    if t == 0 {
        Err(Error::invalid("iteration count must be at least 1"))
    } else {
        Ok(())
    }
}

/// Links whose own reduced channel is zero.
pub fn zero_gain_links<P: IcChannels + ?Sized>(p: &P) -> Vec<usize> {
    (0..p.num_links())
        .filter(|&k| norm(p.channel(k, k)) == 0.0)
        .collect()
}

/// Maximum-ratio transmission at full power: `w_k = √P_k g_kk/‖g_kk‖`.
/// Links with a zero channel get a zero beamformer (see [`zero_gain_links`]).
pub fn mrt_init<P: IcChannels + ?Sized>(p: &P) -> BeamformerSet {
    (0..p.num_links())
        .map(|k| {
            let g = p.channel(k, k);
            let n = norm(g);
            if n == 0.0 {
                vec![crate::cplx::ZERO; g.len()]
            } else {
                let s = p.power()[k].sqrt() / n;
                g.iter().map(|z| z * s).collect()
            }
        })
        .collect()
}

/// Cooperative MRT with the budget split evenly over the receivers.
pub fn coop_mrt_init<P: CoopChannels + ?Sized>(p: &P) -> Vec<Vec<CVec>> {
    let kr = p.num_rx();
    (0..p.num_tx())
        .map(|j| {
            let share = (p.power()[j] / kr as f64).sqrt();
            (0..kr)
                .map(|k| {
                    let g = p.channel(j, k);
                    let n = norm(g);
                    if n == 0.0 {
                        vec![crate::cplx::ZERO; g.len()]
                    } else {
                        g.iter().map(|z| z * (share / n)).collect()
                    }
                })
                .collect()
        })
        .collect()
}
