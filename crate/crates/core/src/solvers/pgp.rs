use std::time::Instant;

use crate::cplx::{real_dot, CVec};
use crate::error::{Error, Result};
use crate::wsr::{
    coop_wsr, gradient_block_ic, gradient_coop, gradient_ic, project_ball, project_coop, wsr,
    BeamformerSet, CoopChannels, IcChannels,
};

use super::{check_iterations, SolveTrace, StepRule, Termination};

const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct PgpOptions {
    pub iterations: usize,
    pub step: StepRule,
    pub record_beamformers: bool,
    /// Stop once an iteration improves the WSR by less than this fraction.
    pub rel_tol: Option<f64>,
}

impl Default for PgpOptions {
    fn default() -> Self {
        PgpOptions {
            iterations: 200,
            step: StepRule::default(),
            record_beamformers: false,
            rel_tol: None,
        }
    }
}

pub(crate) fn check_ic_init<P: IcChannels + ?Sized>(p: &P, w: &[CVec]) -> Result<()> {
    if w.len() != p.num_links() {
        return Err(Error::invalid(format!(
            "expected {} beamformers, got {}",
            p.num_links(),
            w.len()
        )));
    }
    for (k, v) in w.iter().enumerate() {
        if v.len() != p.channel(k, k).len() {
            return Err(Error::invalid(format!(
                "beamformer {k} has length {}, expected {}",
                v.len(),
                p.channel(k, k).len()
            )));
        }
    }
    Ok(())
}

pub(crate) fn check_coop_init<P: CoopChannels + ?Sized>(p: &P, w: &[Vec<CVec>]) -> Result<()> {
    if w.len() != p.num_tx() || w.iter().any(|wj| wj.len() != p.num_rx()) {
        return Err(Error::invalid(format!(
            "expected {}x{} beamformers",
            p.num_tx(),
            p.num_rx()
        )));
    }
    for (j, wj) in w.iter().enumerate() {
        if wj.iter().any(|v| v.len() != p.channel(j, 0).len()) {
            return Err(Error::invalid(format!(
                "beamformer length mismatch at BS {j}"
            )));
        }
    }
    Ok(())
}

/// Objective, gradient and projected step of one problem family.
trait Landscape {
    type W: Clone;
    fn value(&self, w: &Self::W) -> f64;
    fn gradient(&self, w: &Self::W) -> Self::W;
    /// Projection of `w + s d` onto the feasible set.
    fn step(&self, w: &Self::W, d: &Self::W, s: f64) -> Self::W;
    /// `⟨d, x − w⟩` in the real inner product.
    fn directional(&self, d: &Self::W, x: &Self::W, w: &Self::W) -> f64;
}

struct Ic<'a, P: ?Sized>(&'a P);
struct Coop<'a, P: ?Sized>(&'a P);

fn shifted(w: &[crate::cplx::C64], d: &[crate::cplx::C64], s: f64) -> CVec {
    w.iter().zip(d).map(|(a, b)| a + b * s).collect()
}

fn directional_ic(d: &[CVec], x: &[CVec], w: &[CVec]) -> f64 {
    d.iter()
        .zip(x)
        .zip(w)
        .map(|((dk, xk), wk)| real_dot(dk, xk) - real_dot(dk, wk))
        .sum()
}

impl<P: IcChannels + ?Sized> Landscape for Ic<'_, P> {
    type W = BeamformerSet;

    fn value(&self, w: &Self::W) -> f64 {
        wsr(w, self.0)
    }

    fn gradient(&self, w: &Self::W) -> Self::W {
        gradient_ic(w, self.0)
    }

    fn step(&self, w: &Self::W, d: &Self::W, s: f64) -> Self::W {
        w.iter()
            .zip(d)
            .zip(self.0.power())
            .map(|((wk, dk), &pk)| project_ball(&shifted(wk, dk, s), pk))
            .collect()
    }

    fn directional(&self, d: &Self::W, x: &Self::W, w: &Self::W) -> f64 {
        directional_ic(d, x, w)
    }
}

impl<P: CoopChannels + ?Sized> Landscape for Coop<'_, P> {
    type W = Vec<Vec<CVec>>;

    fn value(&self, w: &Self::W) -> f64 {
        coop_wsr(w, self.0)
    }

    fn gradient(&self, w: &Self::W) -> Self::W {
        gradient_coop(w, self.0)
    }

    fn step(&self, w: &Self::W, d: &Self::W, s: f64) -> Self::W {
        w.iter()
            .zip(d)
            .zip(self.0.power())
            .map(|((wj, dj), &pj)| {
                let moved: Vec<CVec> = wj.iter().zip(dj).map(|(a, b)| shifted(a, b, s)).collect();
                project_coop(&moved, pj)
            })
            .collect()
    }

    fn directional(&self, d: &Self::W, x: &Self::W, w: &Self::W) -> f64 {
        d.iter()
            .zip(x)
            .zip(w)
            .map(|((dj, xj), wj)| directional_ic(dj, xj, wj))
            .sum()
    }
}

fn run<L: Landscape>(l: &L, init: &L::W, opts: &PgpOptions) -> Result<SolveTrace<L::W>> {
    check_iterations(opts.iterations)?;
    opts.step.validate()?;
    let mut w = init.clone();
    let mut value = l.value(&w);
    let mut trace = SolveTrace {
        wsr: vec![value],
        beamformers: opts.record_beamformers.then(|| vec![w.clone()]),
        iter_time_s: Vec::with_capacity(opts.iterations),
        iterations: 0,
        termination: Termination::IterationLimit,
        steps: Vec::with_capacity(opts.iterations),
        block_wsr: Vec::new(),
        final_w: w.clone(),
    };
    let mut next_trial = match opts.step {
        StepRule::Constant(s) => s,
        StepRule::Backtracking { s0, .. } => s0,
    };
    for _ in 0..opts.iterations {
        let start = Instant::now();
        let d = l.gradient(&w);
        let mut accepted = 0.0;
        match opts.step {
            StepRule::Constant(s) => {
                w = l.step(&w, &d, s);
                value = l.value(&w);
                accepted = s;
            }
            StepRule::Backtracking { s0, beta, c } => {
                let mut s = next_trial;
                for _ in 0..MAX_BACKTRACKS {
                    let cand = l.step(&w, &d, s);
                    let v = l.value(&cand);
                    if v >= value + c * l.directional(&d, &cand, &w) {
                        w = cand;
                        value = v;
                        accepted = s;
                        break;
                    }
                    s *= beta;
                }
                next_trial = if accepted > 0.0 { accepted / beta } else { s0 };
            }
        }
        if !value.is_finite() {
            return Err(Error::numerical(format!(
                "objective became non-finite at iteration {}",
                trace.iterations
            )));
        }
        trace.iter_time_s.push(start.elapsed().as_secs_f64());
        trace.steps.push(accepted);
        let prev = *trace.wsr.last().unwrap();
        trace.wsr.push(value);
        if let Some(b) = trace.beamformers.as_mut() {
            b.push(w.clone());
        }
        trace.iterations += 1;
        if let Some(tol) = opts.rel_tol {
            if (value - prev).abs() <= tol * value.abs() {
                trace.termination = Termination::Converged;
                break;
            }
        }
    }
    trace.final_w = w;
    Ok(trace)
}

/// Parallel gradient projection: every beamformer moves along its gradient
/// with a common step, then is projected onto its power ball.
pub fn pgp_solve<P: IcChannels + ?Sized>(
    p: &P,
    init: &[CVec],
    opts: &PgpOptions,
) -> Result<SolveTrace> {
    check_ic_init(p, init)?;
    run(&Ic(p), &init.to_vec(), opts)
}

/// Gradient projection on the cooperative problem with per-BS projection.
pub fn coop_pgp_solve<P: CoopChannels + ?Sized>(
    p: &P,
    init: &[Vec<CVec>],
    opts: &PgpOptions,
) -> Result<SolveTrace<Vec<Vec<CVec>>>> {
    check_coop_init(p, init)?;
    run(&Coop(p), &init.to_vec(), opts)
}

/// Sequential (cyclic) gradient projection: one beamformer at a time, each
/// using the freshest values of the others. Backtracking keeps a separate
/// step memory per block.
pub fn iccd_solve<P: IcChannels + ?Sized>(
    p: &P,
    init: &[CVec],
    opts: &PgpOptions,
) -> Result<SolveTrace> {
    check_ic_init(p, init)?;
    check_iterations(opts.iterations)?;
    opts.step.validate()?;
    let k = p.num_links();
    let mut w = init.to_vec();
    let mut value = wsr(&w, p);
    let mut trace = SolveTrace {
        wsr: vec![value],
        beamformers: opts.record_beamformers.then(|| vec![w.clone()]),
        iter_time_s: Vec::with_capacity(opts.iterations),
        iterations: 0,
        termination: Termination::IterationLimit,
        steps: Vec::with_capacity(opts.iterations),
        block_wsr: Vec::with_capacity(opts.iterations * k),
        final_w: Vec::new(),
    };
    let mut trial = vec![
        match opts.step {
            StepRule::Constant(s) => s,
            StepRule::Backtracking { s0, .. } => s0,
        };
        k
    ];
    for _ in 0..opts.iterations {
        let start = Instant::now();
        let prev = value;
        let mut step_sum = 0.0;
        for b in 0..k {
            let d = gradient_block_ic(b, &w, p);
            let pk = p.power()[b];
            match opts.step {
                StepRule::Constant(s) => {
                    w[b] = project_ball(&shifted(&w[b], &d, s), pk);
                    value = wsr(&w, p);
                    step_sum += s;
                }
                StepRule::Backtracking { s0, beta, c } => {
                    let mut s = trial[b];
                    let mut accepted = 0.0;
                    for _ in 0..MAX_BACKTRACKS {
                        let cand = project_ball(&shifted(&w[b], &d, s), pk);
                        let old = std::mem::replace(&mut w[b], cand);
                        let v = wsr(&w, p);
                        let dir = real_dot(&d, &w[b]) - real_dot(&d, &old);
                        if v >= value + c * dir {
                            value = v;
                            accepted = s;
                            break;
                        }
                        w[b] = old;
                        s *= beta;
                    }
                    trial[b] = if accepted > 0.0 { accepted / beta } else { s0 };
                    step_sum += accepted;
                }
            }
            trace.block_wsr.push(value);
        }
        if !value.is_finite() {
            return Err(Error::numerical(format!(
                "objective became non-finite at iteration {}",
                trace.iterations
            )));
        }
        trace.iter_time_s.push(start.elapsed().as_secs_f64());
        trace.steps.push(step_sum / k as f64);
        trace.wsr.push(value);
        if let Some(bf) = trace.beamformers.as_mut() {
            bf.push(w.clone());
        }
        trace.iterations += 1;
        if let Some(tol) = opts.rel_tol {
            if (value - prev).abs() <= tol * value.abs() {
                trace.termination = Termination::Converged;
                break;
            }
        }
    }
    trace.final_w = w;
    Ok(trace)
}
