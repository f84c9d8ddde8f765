use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{derive_seed, place_coop_network, sample_channels};
use crate::cplx::CVec;
use crate::dataset::{Dataset, DatasetRecord};
use crate::error::{Error, Result};
use crate::solvers::{
    coop_mrt_init, coop_pgp_solve, coop_wmmse_solve, iccd_solve, mrt_init, pgp_solve, upper_oracle,
    PgpOptions, WmmseOptions,
};
use crate::training::{CoopSample, IcSample};
use crate::transform::{reduce_coop, reduce_ic, CoopReducedProblem, ReducedProblem};
use crate::Scenario;

use super::config::{ExperimentConfig, NtSpec};
use super::Solver;

/// Antenna counts and half distance of sample `i` out of `l`.
fn layout_of(cfg: &ExperimentConfig, i: usize, l: usize, seed: u64) -> (Vec<usize>, f64) {
    let kt = cfg.num_tx();
    let block = |n: usize| (i * n / l.max(1)).min(n - 1);
    let nt = match &cfg.nt {
        NtSpec::Fixed(n) => vec![*n; kt],
        NtSpec::PerBs(v) => v.clone(),
        NtSpec::Mixed { mixed } => vec![mixed[block(mixed.len())]; kt],
        NtSpec::Range { min, max } => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 3 * i as u64 + 2));
            (0..kt).map(|_| rng.random_range(*min..=*max)).collect()
        }
    };
    let d = cfg.d.to_vec();
    (nt, d[block(d.len())])
}

/// Draws `l` unlabeled samples. Sample `i` depends only on `(seed, i)` and
/// its block of the antenna/distance lists.
pub fn generate_records(cfg: &ExperimentConfig, l: usize, seed: u64) -> Result<Vec<DatasetRecord>> {
    cfg.validate()?;
    let opts = cfg.channel_options();
    (0..l)
        .map(|i| {
            let (nt, d) = layout_of(cfg, i, l, seed);
            let geom = place_coop_network(
                cfg.num_tx(),
                cfg.num_rx(),
                d,
                derive_seed(seed, 3 * i as u64),
            )?;
            let sample = sample_channels(&geom, &nt, derive_seed(seed, 3 * i as u64 + 1), &opts)?;
            Ok(DatasetRecord {
                sample,
                solution: None,
                half_distance_km: Some(d),
            })
        })
        .collect()
}

fn label_ic(
    p: &ReducedProblem,
    solver: Solver,
    cfg: &ExperimentConfig,
    index: usize,
) -> Result<Vec<CVec>> {
    let init = mrt_init(p);
    let iterations = cfg.label_iterations;
    Ok(match solver {
        Solver::Wmmse => {
            crate::solvers::wmmse_solve(
                p,
                &init,
                &WmmseOptions {
                    iterations,
                    ..Default::default()
                },
            )?
            .final_w
        }
        Solver::Pgp => {
            pgp_solve(
                p,
                &init,
                &PgpOptions {
                    iterations,
                    ..Default::default()
                },
            )?
            .final_w
        }
        Solver::Iccd => {
            iccd_solve(
                p,
                &init,
                &PgpOptions {
                    iterations,
                    ..Default::default()
                },
            )?
            .final_w
        }
        Solver::Oracle => {
            upper_oracle(
                p,
                cfg.oracle_restarts,
                iterations,
                derive_seed(cfg.seed, index as u64),
            )?
            .w
        }
        Solver::RnnPgp => {
            return Err(Error::invalid(
                "the unfolded network cannot label its own training data",
            ))
        }
    })
}

fn label_coop(
    p: &CoopReducedProblem,
    solver: Solver,
    cfg: &ExperimentConfig,
) -> Result<Vec<Vec<CVec>>> {
    let init = coop_mrt_init(p);
    let iterations = cfg.label_iterations;
    Ok(match solver {
        Solver::Wmmse => {
            coop_wmmse_solve(
                p,
                &init,
                &WmmseOptions {
                    iterations,
                    ..Default::default()
                },
            )?
            .final_w
        }
        Solver::Pgp => {
            coop_pgp_solve(
                p,
                &init,
                &PgpOptions {
                    iterations,
                    ..Default::default()
                },
            )?
            .final_w
        }
        other => {
            return Err(Error::invalid(format!(
                "solver {other} is not available for the cooperative scenario"
            )))
        }
    })
}

/// Solves every record with `solver` and stores the reduced-space result.
pub fn label_records(
    records: &mut [DatasetRecord],
    scenario: Scenario,
    solver: Solver,
    cfg: &ExperimentConfig,
) -> Result<()> {
    let labels: Result<Vec<Vec<CVec>>> = records
        .par_iter()
        .enumerate()
        .map(|(i, r)| match scenario {
            Scenario::Ic => label_ic(&reduce_ic(&r.sample)?, solver, cfg, i),
            Scenario::Coop => Ok(label_coop(&reduce_coop(&r.sample)?, solver, cfg)?
                .into_iter()
                .flatten()
                .collect()),
        })
        .collect();
    for (r, l) in records.iter_mut().zip(labels?) {
        r.solution = Some(l);
    }
    Ok(())
}

pub fn ic_problems(records: &[DatasetRecord]) -> Result<Vec<ReducedProblem>> {
    records.par_iter().map(|r| reduce_ic(&r.sample)).collect()
}

pub fn coop_problems(records: &[DatasetRecord]) -> Result<Vec<CoopReducedProblem>> {
    records.par_iter().map(|r| reduce_coop(&r.sample)).collect()
}

fn unflatten(label: &[CVec], k_r: usize) -> Vec<Vec<CVec>> {
    label.chunks(k_r).map(|c| c.to_vec()).collect()
}

fn check_label_shape(
    label: &[CVec],
    dims: impl Iterator<Item = usize>,
    index: usize,
) -> Result<()> {
    let dims: Vec<usize> = dims.collect();
    if label.len() != dims.len() || label.iter().zip(&dims).any(|(v, &d)| v.len() != d) {
        return Err(Error::Parse {
            record: index,
            message: "label does not match the reduced problem".into(),
        });
    }
    Ok(())
}

pub fn ic_training_set(ds: &Dataset) -> Result<Vec<IcSample>> {
    if ds.header.scenario != Scenario::Ic {
        return Err(Error::invalid("expected an interference-channel dataset"));
    }
    let problems = ic_problems(&ds.records)?;
    problems
        .into_iter()
        .zip(&ds.records)
        .enumerate()
        .map(|(i, (problem, r))| {
            if let Some(l) = &r.solution {
                check_label_shape(l, (0..problem.num_links()).map(|k| problem.dim(k)), i)?;
            }
            Ok(IcSample {
                label: r.solution.clone(),
                problem,
            })
        })
        .collect()
}

pub fn coop_training_set(ds: &Dataset) -> Result<Vec<CoopSample>> {
    if ds.header.scenario != Scenario::Coop {
        return Err(Error::invalid("expected a cooperative dataset"));
    }
    let problems = coop_problems(&ds.records)?;
    problems
        .into_iter()
        .zip(&ds.records)
        .enumerate()
        .map(|(i, (problem, r))| {
            let kr = problem.num_rx();
            let label = match &r.solution {
                Some(l) => {
                    check_label_shape(
                        l,
                        (0..problem.num_tx()).flat_map(|j| std::iter::repeat_n(problem.dim(j), kr)),
                        i,
                    )?;
                    Some(unflatten(l, kr))
                }
                None => None,
            };
            Ok(CoopSample { label, problem })
        })
        .collect()
}
