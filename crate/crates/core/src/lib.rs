//! Weighted sum-rate beamforming for MISO interference channels and
//! cooperative multicell networks.
//!
//! The crate covers synthetic channel generation, the dimension-reducing
//! channel transforms, closed-form rates and gradients, classical iterative
//! solvers (PGP, ICCD, WMMSE) and the unfolded RNN-PGP network together with
//! its training loop.

pub mod channel;
pub mod cplx;
pub mod dataset;
pub mod eig;
pub mod error;
pub mod harness;
pub mod solvers;
pub mod training;
pub mod transform;
pub mod unfolded;
pub mod wsr;

use serde::{Deserialize, Serialize};

pub use channel::{ChannelOptions, ChannelSample, CoopChannelSample, NetworkGeometry};
pub use cplx::{CMat, CVec, C64};
pub use error::{Error, Result};
pub use transform::{CoopReducedProblem, ReducedProblem};

/// Network model a dataset, model or run refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// MISO interference channel: BS `k` serves UE `k` only.
    #[default]
    Ic,
    /// Cooperative multicell: every BS serves every UE jointly.
    Coop,
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scenario::Ic => "ic",
            Scenario::Coop => "coop",
        })
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ic" => Ok(Scenario::Ic),
            "coop" => Ok(Scenario::Coop),
            other => Err(Error::InvalidArgument(format!(
                "unknown scenario {other:?} (expected ic or coop)"
            ))),
        }
    }
}
