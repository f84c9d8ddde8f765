use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::derive_seed;
use crate::dataset::{Dataset, DatasetMeta, DatasetRecord};
use crate::error::{Error, Result};
use crate::solvers::{
    coop_mrt_init, coop_pgp_solve, coop_wmmse_solve, iccd_solve, mrt_init, pgp_solve, upper_oracle,
    wmmse_solve, PgpOptions, SolveTrace, WmmseOptions,
};
use crate::training::{train_hybrid, train_hybrid_coop, TrainRun, Validation};
use crate::transform::{CoopReducedProblem, ReducedProblem};
use crate::unfolded::{
    coop_rnn_pgp_forward, rnn_pgp_forward, Model, ModelConfig, RnnOutput, TrainingSchedule,
};
use crate::wsr::wsr;
use crate::Scenario;

use super::config::{ExperimentConfig, NtSpec, OneOrMany};
use super::data::{
    coop_problems, coop_training_set, generate_records, ic_problems, ic_training_set, label_records,
};
use super::Solver;

/// Seed streams derived from the experiment seed.
pub const TRAIN_STREAM: u64 = 1;
pub const VAL_STREAM: u64 = 2;
pub const TEST_STREAM: u64 = 3;

/// Which part of an experiment a generated dataset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    /// `l` samples from the training stream.
    Train,
    /// `l_test` samples from the test stream.
    Test,
}

impl Split {
    fn stream(self) -> u64 {
        match self {
            Split::Train => TRAIN_STREAM,
            Split::Test => TEST_STREAM,
        }
    }

    fn size(self, cfg: &ExperimentConfig) -> usize {
        match self {
            Split::Train => cfg.l,
            Split::Test => cfg.l_test,
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(format!(
                "unknown split {other:?} (expected train or test)"
            ))),
        }
    }
}

/// Runs `f` on a pool of `jobs` threads, or on the global pool.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match jobs {
        None => f(),
        Some(0) => Err(Error::invalid("jobs must be positive")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start {n} worker threads: {e}")))?
            .install(f),
    }
}

/// Draws a split and labels it with the configured solver, if any.
pub fn generate_dataset(
    cfg: &ExperimentConfig,
    split: Split,
) -> Result<(DatasetMeta, Vec<DatasetRecord>)> {
    cfg.validate()?;
    let mut records =
        generate_records(cfg, split.size(cfg), derive_seed(cfg.seed, split.stream()))?;
    let label_solver = match &cfg.label_solver {
        Some(name) => {
            let solver: Solver = name.parse()?;
            label_records(&mut records, cfg.scenario, solver, cfg)?;
            Some(solver.name().to_string())
        }
        None => None,
    };
    let meta = DatasetMeta {
        scenario: cfg.scenario,
        weighted: cfg.weighted,
        bandwidth_hz: cfg.bandwidth_hz,
        label_solver,
    };
    Ok((meta, records))
}

/// Reduced problems of a dataset.
#[derive(Debug, Clone)]
pub enum Problems {
    Ic(Vec<ReducedProblem>),
    Coop(Vec<CoopReducedProblem>),
}

impl Problems {
    pub fn from_records(scenario: Scenario, records: &[DatasetRecord]) -> Result<Self> {
        Ok(match scenario {
            Scenario::Ic => Problems::Ic(ic_problems(records)?),
            Scenario::Coop => Problems::Coop(coop_problems(records)?),
        })
    }

    pub fn len(&self) -> usize {
        match self {
            Problems::Ic(v) => v.len(),
            Problems::Coop(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scenario(&self) -> Scenario {
        match self {
            Problems::Ic(_) => Scenario::Ic,
            Problems::Coop(_) => Scenario::Coop,
        }
    }
}

/// WSR history of one solver run on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRun {
    /// Initial point first.
    pub wsr: Vec<f64>,
    pub iter_time_s: Vec<f64>,
}

impl InstanceRun {
    pub fn final_wsr(&self) -> f64 {
        *self.wsr.last().expect("runs hold the initial point")
    }

    pub fn runtime_s(&self) -> f64 {
        self.iter_time_s.iter().sum()
    }
}

impl<W> From<SolveTrace<W>> for InstanceRun {
    fn from(t: SolveTrace<W>) -> Self {
        InstanceRun {
            wsr: t.wsr,
            iter_time_s: t.iter_time_s,
        }
    }
}

impl<W> From<RnnOutput<W>> for InstanceRun {
    fn from(o: RnnOutput<W>) -> Self {
        InstanceRun {
            wsr: o.wsr,
            iter_time_s: o.iter_time_s,
        }
    }
}

/// Learned model plus the unroll depth to run it with.
#[derive(Debug, Clone, Copy)]
pub struct Learned<'a> {
    pub model: &'a Model,
    pub t: Option<usize>,
}

/// Runs `solver` with `iterations` on every instance from MRT.
pub fn run_solver(
    problems: &Problems,
    solver: Solver,
    iterations: usize,
    cfg: &ExperimentConfig,
    learned: Option<Learned>,
) -> Result<Vec<InstanceRun>> {
    let pgp = PgpOptions {
        iterations,
        ..Default::default()
    };
    let wmmse = WmmseOptions {
        iterations,
        ..Default::default()
    };
    let need_model = || learned.ok_or_else(|| Error::invalid("solver rnn-pgp needs a model"));
    match problems {
        Problems::Ic(ps) => {
            let rnn_cfg = match solver {
                Solver::RnnPgp => {
                    let l = need_model()?;
                    let ModelConfig::Ic(c) = &l.model.config else {
                        return Err(Error::invalid(
                            "model was trained for the cooperative scenario",
                        ));
                    };
                    let mut c = c.clone();
                    c.t = l.t.unwrap_or(c.t);
                    check_neighbor_budget(c.c, ps)?;
                    Some(c)
                }
                _ => None,
            };
            ps.par_iter()
                .enumerate()
                .map(|(i, p)| {
                    let init = mrt_init(p);
                    Ok(match solver {
                        Solver::Pgp => pgp_solve(p, &init, &pgp)?.into(),
                        Solver::Iccd => iccd_solve(p, &init, &pgp)?.into(),
                        Solver::Wmmse => wmmse_solve(p, &init, &wmmse)?.into(),
                        Solver::Oracle => {
                            let start = Instant::now();
                            let o = upper_oracle(
                                p,
                                cfg.oracle_restarts,
                                iterations,
                                derive_seed(cfg.seed, i as u64),
                            )?;
                            InstanceRun {
                                wsr: vec![wsr(&init, p), o.wsr],
                                iter_time_s: vec![start.elapsed().as_secs_f64()],
                            }
                        }
                        Solver::RnnPgp => rnn_pgp_forward(
                            p,
                            &learned.unwrap().model.params,
                            rnn_cfg.as_ref().unwrap(),
                            &init,
                        )?
                        .into(),
                    })
                })
                .collect()
        }
        Problems::Coop(ps) => {
            let rnn_cfg = match solver {
                Solver::RnnPgp => {
                    let l = need_model()?;
                    let ModelConfig::Coop(c) = &l.model.config else {
                        return Err(Error::invalid(
                            "model was trained for the interference channel",
                        ));
                    };
                    let mut c = c.clone();
                    c.t = l.t.unwrap_or(c.t);
                    Some(c)
                }
                Solver::Iccd | Solver::Oracle => {
                    return Err(Error::invalid(format!(
                        "solver {solver} is not available for the cooperative scenario"
                    )))
                }
                _ => None,
            };
            ps.par_iter()
                .map(|p| {
                    let init = coop_mrt_init(p);
                    Ok(match solver {
                        Solver::Pgp => coop_pgp_solve(p, &init, &pgp)?.into(),
                        Solver::Wmmse => coop_wmmse_solve(p, &init, &wmmse)?.into(),
                        Solver::RnnPgp => coop_rnn_pgp_forward(
                            p,
                            &learned.unwrap().model.params,
                            rnn_cfg.as_ref().unwrap(),
                            &init,
                        )?
                        .into(),
                        Solver::Iccd | Solver::Oracle => unreachable!(),
                    })
                })
                .collect()
        }
    }
}

fn check_neighbor_budget(c: usize, ps: &[ReducedProblem]) -> Result<()> {
    match ps.iter().map(|p| p.num_links()).min() {
        Some(k) if c + 1 > k => Err(Error::invalid(format!(
            "model neighbor budget c = {c} exceeds K - 1 = {} of the test set",
            k - 1
        ))),
        _ => Ok(()),
    }
}

/// WMMSE WSR with the reference budget, the denominator of every accuracy.
pub fn reference_wsr(problems: &Problems, cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    let runs = run_solver(problems, Solver::Wmmse, cfg.reference_iterations, cfg, None)?;
    Ok(runs.iter().map(InstanceRun::final_wsr).collect())
}

/// Percentage of the summed reference WSR.
pub fn accuracy(wsr: &[f64], reference: &[f64]) -> f64 {
    100.0 * wsr.iter().sum::<f64>() / reference.iter().sum::<f64>()
}

/// One line of a metrics CSV. Aggregate rows leave `instance` empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scheme: String,
    pub instance: Option<usize>,
    pub iterations: usize,
    /// Mean WSR in bit/s/Hz.
    pub wsr: f64,
    /// Percent of the WMMSE reference on the same instances.
    pub accuracy: f64,
    /// Mean solver wall-clock seconds per instance.
    pub runtime_s: f64,
}

/// One line of a per-iteration trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub instance: usize,
    pub iteration: usize,
    pub wsr: f64,
    pub cum_runtime_s: f64,
}

/// JSON summary written next to every CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub command: String,
    pub scenario: Scenario,
    pub instances: usize,
    pub schemes: Vec<MetricsRow>,
    pub median_runtime_s: BTreeMap<String, f64>,
    pub reference_iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_accuracy: Option<f64>,
    pub wall_clock_s: f64,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Aggregate metrics of one scheme.
pub fn aggregate(
    scheme: &str,
    iterations: usize,
    runs: &[InstanceRun],
    reference: &[f64],
) -> MetricsRow {
    let n = runs.len().max(1) as f64;
    let finals: Vec<f64> = runs.iter().map(InstanceRun::final_wsr).collect();
    MetricsRow {
        scheme: scheme.into(),
        instance: None,
        iterations,
        wsr: finals.iter().sum::<f64>() / n,
        accuracy: accuracy(&finals, reference),
        runtime_s: runs.iter().map(InstanceRun::runtime_s).sum::<f64>() / n,
    }
}

fn instance_rows(
    scheme: &str,
    iterations: usize,
    runs: &[InstanceRun],
    reference: &[f64],
) -> Vec<MetricsRow> {
    runs.iter()
        .zip(reference)
        .enumerate()
        .map(|(i, (r, &rf))| MetricsRow {
            scheme: scheme.into(),
            instance: Some(i),
            iterations,
            wsr: r.final_wsr(),
            accuracy: 100.0 * r.final_wsr() / rf,
            runtime_s: r.runtime_s(),
        })
        .collect()
}

fn trace_rows(runs: &[InstanceRun]) -> Vec<TraceRow> {
    let mut rows = Vec::new();
    for (i, r) in runs.iter().enumerate() {
        let mut cum = 0.0;
        for (it, &v) in r.wsr.iter().enumerate() {
            if it > 0 {
                cum += r.iter_time_s.get(it - 1).copied().unwrap_or(0.0);
            }
            rows.push(TraceRow {
                instance: i,
                iteration: it,
                wsr: v,
                cum_runtime_s: cum,
            });
        }
    }
    rows
}

/// Output of `solve`.
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Per-instance rows followed by the aggregate row.
    pub rows: Vec<MetricsRow>,
    pub trace: Vec<TraceRow>,
    pub summary: RunSummary,
}

fn scenario_of(ds: &Dataset) -> Scenario {
    ds.header.scenario
}

/// Runs one solver over a dataset and scores it against WMMSE.
pub fn solve_dataset(
    ds: &Dataset,
    solver: Solver,
    iterations: usize,
    cfg: &ExperimentConfig,
    model: Option<&Model>,
) -> Result<SolveReport> {
    if iterations == 0 {
        return Err(Error::invalid("iteration count must be at least 1"));
    }
    let start = Instant::now();
    let problems = Problems::from_records(scenario_of(ds), &ds.records)?;
    if problems.is_empty() {
        return Err(Error::invalid("dataset has no records"));
    }
    let learned = model.map(|m| Learned {
        model: m,
        t: Some(iterations),
    });
    let runs = run_solver(&problems, solver, iterations, cfg, learned)?;
    let reference = reference_wsr(&problems, cfg)?;
    let agg = aggregate(solver.name(), iterations, &runs, &reference);
    let mut rows = instance_rows(solver.name(), iterations, &runs, &reference);
    rows.push(agg.clone());
    let times: Vec<f64> = runs.iter().map(InstanceRun::runtime_s).collect();
    let summary = RunSummary {
        command: "solve".into(),
        scenario: problems.scenario(),
        instances: problems.len(),
        schemes: vec![agg],
        median_runtime_s: BTreeMap::from([(solver.name().to_string(), median(&times))]),
        reference_iterations: cfg.reference_iterations,
        val_accuracy: None,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    Ok(SolveReport {
        rows,
        trace: trace_rows(&runs),
        summary,
    })
}

/// Scores the model, PGP and WMMSE at the model's unroll depth against the
/// WMMSE reference on the same instances.
pub fn score_model(
    problems: &Problems,
    model: &Model,
    cfg: &ExperimentConfig,
) -> Result<(Vec<MetricsRow>, BTreeMap<String, f64>)> {
    if model.config.scenario() != problems.scenario() {
        return Err(Error::invalid(format!(
            "model was trained for the {} scenario, the test set is {}",
            model.config.scenario(),
            problems.scenario()
        )));
    }
    let t = model.config.unroll_depth();
    let reference = reference_wsr(problems, cfg)?;
    let mut rows = Vec::new();
    let mut medians = BTreeMap::new();
    for solver in [Solver::RnnPgp, Solver::Pgp, Solver::Wmmse] {
        let runs = run_solver(problems, solver, t, cfg, Some(Learned { model, t: None }))?;
        rows.push(aggregate(solver.name(), t, &runs, &reference));
        medians.insert(
            solver.name().to_string(),
            median(&runs.iter().map(InstanceRun::runtime_s).collect::<Vec<_>>()),
        );
    }
    Ok((rows, medians))
}

/// Output of `eval`.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub rows: Vec<MetricsRow>,
    pub summary: RunSummary,
}

impl EvalReport {
    /// Accuracy of the learned model.
    pub fn model_accuracy(&self) -> f64 {
        self.rows[0].accuracy
    }
}

pub fn evaluate(model: &Model, ds: &Dataset, cfg: &ExperimentConfig) -> Result<EvalReport> {
    let start = Instant::now();
    let problems = Problems::from_records(scenario_of(ds), &ds.records)?;
    if problems.is_empty() {
        return Err(Error::invalid("dataset has no records"));
    }
    let (rows, medians) = score_model(&problems, model, cfg)?;
    let summary = RunSummary {
        command: "eval".into(),
        scenario: problems.scenario(),
        instances: problems.len(),
        schemes: rows.clone(),
        median_runtime_s: medians,
        reference_iterations: cfg.reference_iterations,
        val_accuracy: None,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    Ok(EvalReport { rows, summary })
}

/// Held-out validation set drawn from `cfg` with its WMMSE reference.
fn validation_problems(cfg: &ExperimentConfig) -> Result<Option<Problems>> {
    if cfg.l_val == 0 {
        return Ok(None);
    }
    let records = generate_records(cfg, cfg.l_val, derive_seed(cfg.seed, VAL_STREAM))?;
    Ok(Some(Problems::from_records(cfg.scenario, &records)?))
}

/// Trains a model on a labeled (or, for unsupervised-only schedules,
/// unlabeled) dataset. Validation instances come from `cfg`.
pub fn train_model(ds: &Dataset, cfg: &ExperimentConfig) -> Result<(Model, TrainRun)> {
    cfg.validate()?;
    let scenario = scenario_of(ds);
    if scenario != cfg.scenario {
        return Err(Error::invalid(format!(
            "dataset scenario {scenario} does not match the configured {}",
            cfg.scenario
        )));
    }
    let schedule = TrainingSchedule::from_epochs(cfg.train.stage1_epochs, cfg.train.stage2_epochs);
    let val = validation_problems(cfg)?;
    let reference = val.as_ref().map(|v| reference_wsr(v, cfg)).transpose()?;
    match scenario {
        Scenario::Ic => {
            let rc = cfg.rnn.ic_config();
            let samples = ic_training_set(ds)?;
            check_neighbor_budget(
                rc.c,
                &samples
                    .iter()
                    .map(|s| s.problem.clone())
                    .collect::<Vec<_>>(),
            )?;
            let validation = match (val, reference) {
                (Some(Problems::Ic(problems)), Some(reference_wsr)) => Some(Validation {
                    problems,
                    reference_wsr,
                }),
                _ => None,
            };
            let (params, run) = train_hybrid(&samples, validation.as_ref(), &cfg.train, &rc)?;
            Ok((Model::new(ModelConfig::Ic(rc), schedule, params)?, run))
        }
        Scenario::Coop => {
            if cfg.rnn.stepsize_only {
                return Err(Error::invalid(
                    "step-size-only mode is available for the interference channel only",
                ));
            }
            let samples = coop_training_set(ds)?;
            let rc = cfg.rnn.coop_config(ds.header.k_r);
            let validation = match (val, reference) {
                (Some(Problems::Coop(problems)), Some(reference_wsr)) => Some(Validation {
                    problems,
                    reference_wsr,
                }),
                _ => None,
            };
            let (params, run) = train_hybrid_coop(&samples, validation.as_ref(), &cfg.train, &rc)?;
            Ok((Model::new(ModelConfig::Coop(rc), schedule, params)?, run))
        }
    }
}

/// Axis of a generalization sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// Antennas per BS.
    Nt,
    /// Links (interference channel) or cooperating BSs.
    K,
    /// Half inter-BS distance in km.
    D,
    /// Training-set size; retrains per value.
    L,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Nt => "nt",
            SweepAxis::K => "k",
            SweepAxis::D => "d",
            SweepAxis::L => "l",
        }
    }

    fn apply(self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut c = cfg.clone();
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::invalid(format!(
                    "{} values must be positive integers, got {value}",
                    self.name()
                )))
            }
        };
        match self {
            SweepAxis::Nt => c.nt = NtSpec::Fixed(count()?),
            SweepAxis::K => match c.scenario {
                Scenario::Ic => c.k = count()?,
                Scenario::Coop => c.k_t = count()?,
            },
            SweepAxis::D => c.d = OneOrMany::One(value),
            SweepAxis::L => c.l = count()?,
        }
        if self == SweepAxis::K && c.scenario == Scenario::Ic {
            c.rnn.c = c.rnn.c.min(c.k.saturating_sub(1));
        }
        c.validate()?;
        Ok(c)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [SweepAxis::Nt, SweepAxis::K, SweepAxis::D, SweepAxis::L]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown sweep axis {s:?}; choose one of nt, k, d, l"
                ))
            })
    }
}

/// One line of a sweep CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub scheme: String,
    pub accuracy: f64,
    pub wsr: f64,
    pub runtime_s: f64,
}

fn test_problems(cfg: &ExperimentConfig) -> Result<Problems> {
    let records = generate_records(cfg, cfg.l_test, derive_seed(cfg.seed, TEST_STREAM))?;
    Problems::from_records(cfg.scenario, &records)
}

/// Evaluates `model` on fresh test sets along `axis`, or for the `l` axis
/// trains one model per training-set size and evaluates each on one test set.
pub fn sweep(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    model: Option<&Model>,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::invalid("sweep axis has no values"));
    }
    cfg.validate()?;
    let mut rows = Vec::new();
    let push = |rows: &mut Vec<SweepRow>, value: f64, scored: Vec<MetricsRow>| {
        rows.extend(scored.into_iter().map(|m| SweepRow {
            axis: axis.name().into(),
            value,
            scheme: m.scheme,
            accuracy: m.accuracy,
            wsr: m.wsr,
            runtime_s: m.runtime_s,
        }))
    };
    if axis == SweepAxis::L {
        let test = test_problems(cfg)?;
        for &v in values {
            let c = axis.apply(cfg, v)?;
            let (meta, records) = generate_dataset(&c, Split::Train)?;
            let ds = Dataset {
                header: crate::dataset::build_header(&meta, &records)?,
                records,
            };
            let mut c_train = c.clone();
            c_train.l_val = 0;
            let (m, _) = train_model(&ds, &c_train)?;
            push(&mut rows, v, score_model(&test, &m, cfg)?.0);
        }
    } else {
        let model = model.ok_or_else(|| {
            Error::invalid(format!("a {} sweep needs a trained model", axis.name()))
        })?;
        for &v in values {
            let c = axis.apply(cfg, v)?;
            push(&mut rows, v, score_model(&test_problems(&c)?, model, &c)?.0);
        }
    }
    Ok(rows)
}

/// Writes serializable rows as CSV with a header line.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(path: &Path, summary: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| Error::Io(e.into()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
