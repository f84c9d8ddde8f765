use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::derive_seed;
use crate::cplx::CVec;
use crate::error::{Error, Result};
use crate::solvers::{coop_mrt_init, mrt_init};
use crate::transform::{CoopReducedProblem, ReducedProblem};
use crate::unfolded::{
    coop_rnn_pgp_forward, rnn_pgp_forward, CoopRnnConfig, MlpParams, RnnPgpConfig,
};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::backward::{backward_coop, backward_ic, CoopLoss, IcLoss, SampleGradient};
use super::loss::{align_coop_label, align_ic_label};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub gamma: f64,
    pub stage1_epochs: usize,
    pub stage2_epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Scale of the initial output-layer weights.
    pub init_scale: f64,
    /// Batch gradients with a larger Euclidean norm are rescaled to it.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.95,
            stage1_epochs: 50,
            stage2_epochs: 20,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 0,
            init_scale: 0.1,
            clip_norm: Some(1.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::invalid(
                "initial output scale must be finite and nonnegative",
            ));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::invalid(format!(
                    "gradient clipping norm must be positive, got {c}"
                )));
            }
        }
        self.adam.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Supervised,
    Unsupervised,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Supervised => "supervised",
            Stage::Unsupervised => "unsupervised",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// 1-based, counted across both stages.
    pub epoch: usize,
    pub stage: Stage,
    /// Mean per-sample loss over the epoch.
    pub loss: f64,
    /// `100 · mean WSR / mean reference WSR` on the validation set.
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub config: TrainConfig,
    pub epochs: Vec<EpochStats>,
    /// Loss of every minibatch in update order.
    pub batch_losses: Vec<(Stage, f64)>,
    /// Validation accuracy of the initial parameters.
    pub initial_val_accuracy: Option<f64>,
    pub adam: AdamState,
    pub wall_clock_s: f64,
}

impl TrainRun {
    pub fn final_val_accuracy(&self) -> Option<f64> {
        self.epochs
            .last()
            .and_then(|e| e.val_accuracy)
            .or(self.initial_val_accuracy)
    }

    /// Writes `epoch,stage,loss,val_accuracy`; epoch 0 holds the initial
    /// validation accuracy.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["epoch", "stage", "loss", "val_accuracy"])
            .map_err(csv_err)?;
        let acc = |a: Option<f64>| a.map(|v| v.to_string()).unwrap_or_default();
        w.write_record(["0", "init", "", &acc(self.initial_val_accuracy)])
            .map_err(csv_err)?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.stage.to_string(),
                e.loss.to_string(),
                acc(e.val_accuracy),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// A training instance with an optional reduced-space solver label.
#[derive(Debug, Clone, PartialEq)]
pub struct IcSample {
    pub problem: ReducedProblem,
    pub label: Option<Vec<CVec>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoopSample {
    pub problem: CoopReducedProblem,
    pub label: Option<Vec<Vec<CVec>>>,
}

/// Held-out instances with the reference WSR each is scored against.
#[derive(Debug, Clone, PartialEq)]
pub struct Validation<P> {
    pub problems: Vec<P>,
    pub reference_wsr: Vec<f64>,
}

impl<P> Validation<P> {
    fn accuracy(&self, wsr: &[f64]) -> f64 {
        100.0 * wsr.iter().sum::<f64>() / self.reference_wsr.iter().sum::<f64>()
    }

    fn check(&self) -> Result<()> {
        if self.problems.is_empty() || self.problems.len() != self.reference_wsr.len() {
            return Err(Error::invalid(
                "validation set needs one reference WSR per instance",
            ));
        }
        Ok(())
    }
}

struct Schedule<'a> {
    n: usize,
    labeled: bool,
    tc: &'a TrainConfig,
}

fn run_schedule(
    s: Schedule,
    mut params: MlpParams,
    grad_fn: impl Fn(usize, &MlpParams, Stage) -> Result<SampleGradient> + Sync,
    val_fn: impl Fn(&MlpParams) -> Result<Option<f64>>,
) -> Result<(MlpParams, TrainRun)> {
    let tc = s.tc;
    tc.validate()?;
    if s.n == 0 {
        return Err(Error::invalid("training set is empty"));
    }
    if tc.stage1_epochs > 0 && !s.labeled {
        return Err(Error::invalid(
            "supervised stage needs solver labels on every training sample",
        ));
    }
    let start = Instant::now();
    let mut adam = AdamState::new(params.num_params());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(tc.seed, 0x5348_5546));
    let mut order: Vec<usize> = (0..s.n).collect();
    let mut epochs = Vec::new();
    let mut batch_losses = Vec::new();
    let initial_val_accuracy = val_fn(&params)?;
    let stages = std::iter::repeat_n(Stage::Supervised, tc.stage1_epochs)
        .chain(std::iter::repeat_n(Stage::Unsupervised, tc.stage2_epochs));
    for (e, stage) in stages.enumerate() {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(tc.batch_size) {
            let results: Vec<Result<SampleGradient>> = batch
                .par_iter()
                .map(|&i| grad_fn(i, &params, stage))
                .collect();
            let mut grad = params.zeros_like();
            let mut loss = 0.0;
            for r in results {
                let r = r?;
                grad.add_assign(&r.grad);
                loss += r.loss;
            }
            total += loss;
            grad.scale(1.0 / batch.len() as f64);
            if let Some(c) = tc.clip_norm {
                let n = grad.norm();
                if n > c {
                    grad.scale(c / n);
                }
            }
            batch_losses.push((stage, loss / batch.len() as f64));
            adam_step(&mut params, &grad, &mut adam, &tc.adam)?;
            if !params.is_finite() {
                return Err(Error::numerical(format!(
                    "parameters diverged in epoch {}",
                    e + 1
                )));
            }
        }
        epochs.push(EpochStats {
            epoch: e + 1,
            stage,
            loss: total / s.n as f64,
            val_accuracy: val_fn(&params)?,
        });
    }
    let run = TrainRun {
        config: tc.clone(),
        epochs,
        batch_losses,
        initial_val_accuracy,
        adam,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    Ok((params, run))
}

pub(crate) fn initial_params(sizes: &[usize], tc: &TrainConfig) -> Result<MlpParams> {
    MlpParams::init(sizes, derive_seed(tc.seed, 0x494e_4954), tc.init_scale)
}

/// Mean-WSR accuracy of `params` on `val` (parallel over instances).
pub fn validation_accuracy_ic(
    params: &MlpParams,
    cfg: &RnnPgpConfig,
    val: &Validation<ReducedProblem>,
) -> Result<f64> {
    val.check()?;
    let wsr: Result<Vec<f64>> = val
        .problems
        .par_iter()
        .map(|p| rnn_pgp_forward(p, params, cfg, &mrt_init(p)).map(|o| *o.wsr.last().unwrap()))
        .collect();
    Ok(val.accuracy(&wsr?))
}

pub fn validation_accuracy_coop(
    params: &MlpParams,
    cfg: &CoopRnnConfig,
    val: &Validation<CoopReducedProblem>,
) -> Result<f64> {
    val.check()?;
    let wsr: Result<Vec<f64>> = val
        .problems
        .par_iter()
        .map(|p| {
            coop_rnn_pgp_forward(p, params, cfg, &coop_mrt_init(p)).map(|o| *o.wsr.last().unwrap())
        })
        .collect();
    Ok(val.accuracy(&wsr?))
}

/// Two-stage training: `stage1_epochs` on the supervised loss against the
/// (phase-aligned) labels, then `stage2_epochs` on the negative WSR, all
/// from MRT initializations. Deterministic for a given seed.
pub fn train_hybrid(
    samples: &[IcSample],
    validation: Option<&Validation<ReducedProblem>>,
    tc: &TrainConfig,
    cfg: &RnnPgpConfig,
) -> Result<(MlpParams, TrainRun)> {
    cfg.validate()?;
    let params = initial_params(&cfg.layer_sizes(), tc)?;
    train_ic_from(samples, validation, tc, cfg, params)
}

/// Continues training from given parameters.
pub fn train_ic_from(
    samples: &[IcSample],
    validation: Option<&Validation<ReducedProblem>>,
    tc: &TrainConfig,
    cfg: &RnnPgpConfig,
    params: MlpParams,
) -> Result<(MlpParams, TrainRun)> {
    cfg.validate()?;
    cfg.check_params(&params)?;
    let labels: Vec<Option<Vec<CVec>>> = samples
        .iter()
        .map(|s| s.label.as_ref().map(|l| align_ic_label(&s.problem, l)))
        .collect();
    let inits: Vec<Vec<CVec>> = samples.iter().map(|s| mrt_init(&s.problem)).collect();
    let schedule = Schedule {
        n: samples.len(),
        labeled: labels.iter().all(Option::is_some),
        tc,
    };
    run_schedule(
        schedule,
        params,
        |i, params, stage| {
            let loss = match stage {
                Stage::Supervised => IcLoss::Supervised {
                    label: labels[i].as_deref().unwrap(),
                    gamma: tc.gamma,
                },
                Stage::Unsupervised => IcLoss::Unsupervised,
            };
            backward_ic(&samples[i].problem, params, cfg, &inits[i], loss)
        },
        |params| {
            validation
                .map(|v| validation_accuracy_ic(params, cfg, v))
                .transpose()
        },
    )
}

pub fn train_hybrid_coop(
    samples: &[CoopSample],
    validation: Option<&Validation<CoopReducedProblem>>,
    tc: &TrainConfig,
    cfg: &CoopRnnConfig,
) -> Result<(MlpParams, TrainRun)> {
    cfg.validate()?;
    let params = initial_params(&cfg.layer_sizes(), tc)?;
    let labels: Vec<Option<Vec<Vec<CVec>>>> = samples
        .iter()
        .map(|s| s.label.as_ref().map(|l| align_coop_label(&s.problem, l)))
        .collect();
    let inits: Vec<Vec<Vec<CVec>>> = samples.iter().map(|s| coop_mrt_init(&s.problem)).collect();
    let schedule = Schedule {
        n: samples.len(),
        labeled: labels.iter().all(Option::is_some),
        tc,
    };
    run_schedule(
        schedule,
        params,
        |i, params, stage| {
            let loss = match stage {
                Stage::Supervised => CoopLoss::Supervised {
                    label: labels[i].as_deref().unwrap(),
                    gamma: tc.gamma,
                },
                Stage::Unsupervised => CoopLoss::Unsupervised,
            };
            backward_coop(&samples[i].problem, params, cfg, &inits[i], loss)
        },
        |params| {
            validation
                .map(|v| validation_accuracy_coop(params, cfg, v))
                .transpose()
        },
    )
}
