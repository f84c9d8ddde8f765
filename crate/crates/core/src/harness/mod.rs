//! Experiment drivers behind the command-line front end: dataset
//! generation, solver runs, training, evaluation and sweeps.

mod config;
mod data;
mod run;

pub use config::*;
pub use data::*;
pub use run::*;

use crate::error::{Error, Result};

/// Solver selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Solver {
    Pgp,
    Iccd,
    Wmmse,
    Oracle,
    RnnPgp,
}

impl Solver {
    pub const ALL: [Solver; 5] = [
        Solver::Pgp,
        Solver::Iccd,
        Solver::Wmmse,
        Solver::Oracle,
        Solver::RnnPgp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Solver::Pgp => "pgp",
            Solver::Iccd => "iccd",
            Solver::Wmmse => "wmmse",
            Solver::Oracle => "oracle",
            Solver::RnnPgp => "rnn-pgp",
        }
    }
}

impl std::fmt::Display for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Solver::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Solver::ALL.iter().map(|v| v.name()).collect();
                Error::invalid(format!(
                    "unknown solver {s:?}; choose one of {}",
                    names.join(", ")
                ))
            })
    }
}
