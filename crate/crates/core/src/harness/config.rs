use serde::{Deserialize, Serialize};

use crate::channel::{
    ChannelOptions, DEFAULT_BANDWIDTH_HZ, DEFAULT_NOISE_PSD_DBM_HZ, DEFAULT_TX_POWER_DBM,
};
use crate::error::{Error, Result};
use crate::training::TrainConfig;
use crate::unfolded::{
    default_coop_hidden, default_hidden, CoopRnnConfig, RnnPgpConfig, DEFAULT_ETA,
};
use crate::Scenario;

/// Antenna counts of a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NtSpec {
    /// Same count at every BS.
    Fixed(usize),
    /// One count per BS.
    PerBs(Vec<usize>),
    /// Equal-sized blocks of samples, one block per listed count.
    Mixed { mixed: Vec<usize> },
    /// Independent uniform draw per BS and sample.
    Range { min: usize, max: usize },
}

impl Default for NtSpec {
    fn default() -> Self {
        NtSpec::Fixed(8)
    }
}

/// A single value or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RnnSettings {
    pub t: usize,
    pub c: usize,
    pub eta: f64,
    /// Hidden widths; derived from `c` (or `k_r`) when absent.
    pub hidden: Option<Vec<usize>>,
    pub stepsize_only: bool,
}

impl Default for RnnSettings {
    fn default() -> Self {
        RnnSettings {
            t: 10,
            c: 6,
            eta: DEFAULT_ETA,
            hidden: None,
            stepsize_only: false,
        }
    }
}

impl RnnSettings {
    pub fn ic_config(&self) -> RnnPgpConfig {
        RnnPgpConfig {
            t: self.t,
            c: self.c,
            eta: self.eta,
            hidden: self
                .hidden
                .clone()
                .unwrap_or_else(|| default_hidden(self.c)),
            stepsize_only: self.stepsize_only,
        }
    }

    pub fn coop_config(&self, k_r: usize) -> CoopRnnConfig {
        CoopRnnConfig {
            t: self.t,
            k_r,
            hidden: self
                .hidden
                .clone()
                .unwrap_or_else(|| default_coop_hidden(k_r)),
        }
    }
}

/// One experiment, read from a JSON document. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Links of the interference channel.
    pub k: usize,
    pub k_t: usize,
    pub k_r: usize,
    pub nt: NtSpec,
    /// Half inter-BS distance in km; a list splits the samples into equal blocks.
    pub d: OneOrMany<f64>,
    /// Training / generated samples.
    pub l: usize,
    /// Held-out samples used for validation during training.
    pub l_val: usize,
    /// Test samples drawn by `gen --split test` and by sweeps.
    pub l_test: usize,
    pub seed: u64,
    pub weighted: bool,
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
    /// Solver that labels generated samples (`wmmse`, `pgp`, `iccd`, `oracle`).
    pub label_solver: Option<String>,
    /// Iterations of the label solver.
    pub label_iterations: usize,
    /// Iteration budget of the WMMSE run every accuracy is measured against.
    pub reference_iterations: usize,
    /// Iteration budget of `solve` runs.
    pub iterations: usize,
    pub oracle_restarts: usize,
    pub rnn: RnnSettings,
    pub train: TrainConfig,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: Scenario::Ic,
            k: 7,
            k_t: 3,
            k_r: 3,
            nt: NtSpec::default(),
            d: OneOrMany::One(1.0),
            l: 2000,
            l_val: 200,
            l_test: 500,
            seed: 0,
            weighted: false,
            tx_power_dbm: DEFAULT_TX_POWER_DBM,
            noise_psd_dbm_hz: DEFAULT_NOISE_PSD_DBM_HZ,
            bandwidth_hz: DEFAULT_BANDWIDTH_HZ,
            label_solver: Some("wmmse".into()),
            label_iterations: 100,
            reference_iterations: 100,
            iterations: 10,
            oracle_restarts: 8,
            rnn: RnnSettings::default(),
            train: TrainConfig::default(),
            jobs: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::invalid(format!("invalid configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn num_tx(&self) -> usize {
        match self.scenario {
            Scenario::Ic => self.k,
            Scenario::Coop => self.k_t,
        }
    }

    pub fn num_rx(&self) -> usize {
        match self.scenario {
            Scenario::Ic => self.k,
            Scenario::Coop => self.k_r,
        }
    }

    pub fn channel_options(&self) -> ChannelOptions {
        ChannelOptions {
            bandwidth_hz: self.bandwidth_hz,
            tx_power_dbm: self.tx_power_dbm,
            noise_psd_dbm_hz: self.noise_psd_dbm_hz,
            weighted: self.weighted,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_tx() == 0 || self.num_rx() == 0 {
            return Err(Error::invalid("network needs at least one BS and one UE"));
        }
        let d = self.d.to_vec();
        if d.is_empty() || d.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("half distances must be positive"));
        }
        match &self.nt {
            NtSpec::Fixed(n) if *n == 0 => {
                return Err(Error::invalid("antenna count must be positive"))
            }
            NtSpec::PerBs(v) if v.len() != self.num_tx() || v.contains(&0) => {
                return Err(Error::invalid(format!(
                    "need {} positive per-BS antenna counts",
                    self.num_tx()
                )))
            }
            NtSpec::Mixed { mixed } if mixed.is_empty() || mixed.contains(&0) => {
                return Err(Error::invalid(
                    "mixed antenna counts must be a nonempty list of positive values",
                ))
            }
            NtSpec::Range { min, max } if *min == 0 || min > max => {
                return Err(Error::invalid(format!(
                    "invalid antenna range {min}..={max}"
                )))
            }
            _ => {}
        }
        if self.scenario == Scenario::Ic && self.rnn.c >= self.k {
            return Err(Error::invalid(format!(
                "neighbor budget c = {} exceeds K - 1 = {}",
                self.rnn.c,
                self.k - 1
            )));
        }
        if self.jobs == Some(0) {
            return Err(Error::invalid("jobs must be positive"));
        }
        if self.label_iterations == 0 || self.reference_iterations == 0 || self.iterations == 0 {
            return Err(Error::invalid("iteration budgets must be positive"));
        }
        self.rnn.ic_config().validate()?;
        self.train.validate()
    }
}
