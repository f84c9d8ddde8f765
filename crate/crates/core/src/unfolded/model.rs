use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scenario;

use super::coop::CoopRnnConfig;
use super::ic::RnnPgpConfig;
use super::mlp::MlpParams;
use super::{FEATURE_LAYOUT, FEATURE_SCALING, STEP_ACTIVATION};

pub const MODEL_FORMAT: &str = "wsrnet-model";
pub const MODEL_VERSION: u32 = 1;

/// Loss schedule a model was trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainingSchedule {
    #[default]
    Untrained,
    Supervised,
    Unsupervised,
    Hybrid,
}

impl TrainingSchedule {
    pub fn from_epochs(stage1: usize, stage2: usize) -> Self {
        match (stage1 > 0, stage2 > 0) {
            (true, true) => TrainingSchedule::Hybrid,
            (true, false) => TrainingSchedule::Supervised,
            (false, true) => TrainingSchedule::Unsupervised,
            (false, false) => TrainingSchedule::Untrained,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    Ic(RnnPgpConfig),
    Coop(CoopRnnConfig),
}

impl ModelConfig {
    pub fn scenario(&self) -> Scenario {
        match self {
            ModelConfig::Ic(_) => Scenario::Ic,
            ModelConfig::Coop(_) => Scenario::Coop,
        }
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        match self {
            ModelConfig::Ic(c) => c.layer_sizes(),
            ModelConfig::Coop(c) => c.layer_sizes(),
        }
    }

    pub fn unroll_depth(&self) -> usize {
        match self {
            ModelConfig::Ic(c) => c.t,
            ModelConfig::Coop(c) => c.t,
        }
    }
}

/// First line of a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format: String,
    pub version: u32,
    pub scenario: Scenario,
    pub layer_sizes: Vec<usize>,
    pub t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_r: Option<usize>,
    pub stepsize_only: bool,
    pub step_activation: String,
    pub feature_scaling: String,
    pub feature_layout: String,
    pub training: TrainingSchedule,
    pub num_params: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub training: TrainingSchedule,
    pub params: MlpParams,
}

impl Model {
    pub fn new(config: ModelConfig, training: TrainingSchedule, params: MlpParams) -> Result<Self> {
        if params.layer_sizes != config.layer_sizes() {
            return Err(Error::invalid(format!(
                "parameter layer sizes {:?} do not match the configuration {:?}",
                params.layer_sizes,
                config.layer_sizes()
            )));
        }
        Ok(Model {
            config,
            training,
            params,
        })
    }

    pub fn header(&self) -> ModelHeader {
        let (c, eta, k_r, stepsize_only) = match &self.config {
            ModelConfig::Ic(c) => (Some(c.c), Some(c.eta), None, c.stepsize_only),
            ModelConfig::Coop(c) => (None, None, Some(c.k_r), false),
        };
        ModelHeader {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            scenario: self.config.scenario(),
            layer_sizes: self.params.layer_sizes.clone(),
            t: self.config.unroll_depth(),
            c,
            eta,
            k_r,
            stepsize_only,
            step_activation: STEP_ACTIVATION.into(),
            feature_scaling: FEATURE_SCALING.into(),
            feature_layout: FEATURE_LAYOUT.into(),
            training: self.training,
            num_params: self.params.num_params(),
        }
    }
}

fn config_from_header(h: &ModelHeader) -> Result<ModelConfig> {
    let bad = |m: String| Error::Header(m);
    if h.format != MODEL_FORMAT {
        return Err(bad(format!("not a model file (format {:?})", h.format)));
    }
    if h.version != MODEL_VERSION {
        return Err(bad(format!("unsupported model version {}", h.version)));
    }
    for (name, got, want) in [
        ("step activation", &h.step_activation, STEP_ACTIVATION),
        ("feature scaling", &h.feature_scaling, FEATURE_SCALING),
        ("feature layout", &h.feature_layout, FEATURE_LAYOUT),
    ] {
        if got != want {
            return Err(bad(format!(
                "unsupported {name} {got:?}, expected {want:?}"
            )));
        }
    }
    if h.layer_sizes.len() < 2 {
        return Err(bad(format!("invalid layer sizes {:?}", h.layer_sizes)));
    }
    let hidden = h.layer_sizes[1..h.layer_sizes.len() - 1].to_vec();
    let cfg = match h.scenario {
        Scenario::Ic => {
            let c = h.c.ok_or_else(|| bad("missing neighbor budget c".into()))?;
            let eta = h.eta.ok_or_else(|| bad("missing threshold eta".into()))?;
            let cfg = RnnPgpConfig {
                t: h.t,
                c,
                eta,
                hidden,
                stepsize_only: h.stepsize_only,
            };
            cfg.validate().map_err(|e| bad(e.to_string()))?;
            ModelConfig::Ic(cfg)
        }
        Scenario::Coop => {
            let k_r = h
                .k_r
                .ok_or_else(|| bad("missing receiver count k_r".into()))?;
            let cfg = CoopRnnConfig {
                t: h.t,
                k_r,
                hidden,
            };
            cfg.validate().map_err(|e| bad(e.to_string()))?;
            ModelConfig::Coop(cfg)
        }
    };
    if cfg.layer_sizes() != h.layer_sizes {
        return Err(bad(format!(
            "layer sizes {:?} inconsistent with the configuration",
            h.layer_sizes
        )));
    }
    Ok(cfg)
}

pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let header =
        serde_json::to_string(&model.header()).map_err(|e| Error::Header(e.to_string()))?;
    let flat =
        serde_json::to_string(&model.params.to_flat()).map_err(|e| Error::Header(e.to_string()))?;
    writeln!(out, "{header}")?;
    writeln!(out, "{flat}")?;
    out.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Header("empty model file".into()))??;
    let header: ModelHeader =
        serde_json::from_str(&first).map_err(|e| Error::Header(e.to_string()))?;
    let config = config_from_header(&header)?;
    let second = lines.next().ok_or_else(|| Error::Parse {
        record: 0,
        message: "missing parameter line".into(),
    })??;
    let flat: Vec<f64> = serde_json::from_str(&second).map_err(|e| Error::Parse {
        record: 0,
        message: e.to_string(),
    })?;
    if flat.len() != header.num_params {
        return Err(Error::Parse {
            record: 0,
            message: format!(
                "expected {} parameters, found {}",
                header.num_params,
                flat.len()
            ),
        });
    }
    let params = MlpParams::from_flat(&header.layer_sizes, &flat)?;
    if !params.is_finite() {
        return Err(Error::Parse {
            record: 0,
            message: "non-finite parameter".into(),
        });
    }
    Model::new(config, header.training, params)
}
