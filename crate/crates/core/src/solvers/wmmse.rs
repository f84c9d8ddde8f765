use std::time::Instant;

use crate::cplx::{axpy, dot_h, CMat, CVec, C64, ZERO};
use crate::eig::herm_eig;
use crate::error::{Error, Result};
use crate::wsr::{coop_stats, coop_wsr, ic_stats, wsr, BeamformerSet, CoopChannels, IcChannels};

use super::pgp::{check_coop_init, check_ic_init};
use super::{check_iterations, SolveTrace, Termination};

const MAX_HALVINGS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct WmmseOptions {
    pub iterations: usize,
    /// Relative tolerance on the power constraint when bisecting the dual
    /// variable.
    pub mu_tol: f64,
    /// Stop once an iteration improves the WSR by less than this fraction.
    pub rel_tol: Option<f64>,
    pub record_beamformers: bool,
}

impl Default for WmmseOptions {
    fn default() -> Self {
        WmmseOptions {
            iterations: 200,
            mu_tol: 1e-10,
            rel_tol: None,
            record_beamformers: false,
        }
    }
}

/// Receiver gains, MSE weights, beamformers and dual variables after one
/// WMMSE iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct WmmseState {
    pub u: Vec<C64>,
    pub omega: Vec<f64>,
    pub w: BeamformerSet,
    pub mu: Vec<f64>,
}

fn norm_at(lambda: &[f64], mass: &[f64], mu: f64) -> f64 {
    lambda
        .iter()
        .zip(mass)
        .map(|(&l, &m)| {
            if m == 0.0 {
                0.0
            } else {
                let d = l.max(0.0) + mu;
                if d <= 0.0 {
                    f64::INFINITY
                } else {
                    m / (d * d)
                }
            }
        })
        .sum()
}

/// Smallest `μ ≥ 0` (up to tolerance, from the feasible side) with
/// `Σ_i m_i / (λ_i + μ)² ≤ P`. `None` when bisection fails to converge.
fn dual_variable(lambda: &[f64], mass: &[f64], power: f64, mu_tol: f64) -> Option<f64> {
    if norm_at(lambda, mass, 0.0) <= power {
        return Some(0.0);
    }
    let mut hi = 1.0;
    let mut lo = 0.0;
    let mut doublings = 0;
    while norm_at(lambda, mass, hi) >= power {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_HALVINGS {
            return None;
        }
    }
    for _ in 0..MAX_HALVINGS {
        if power - norm_at(lambda, mass, hi) <= mu_tol * power {
            return Some(hi);
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Some(hi);
        }
        if norm_at(lambda, mass, mid) > power {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    None
}

/// Solves `(A + μI) x_l = b_l` for all right-hand sides with the dual
/// variable chosen so that `Σ_l ‖x_l‖² ≤ P`.
fn constrained_solve(a: &CMat, rhs: &[CVec], power: f64, mu_tol: f64) -> Option<(Vec<CVec>, f64)> {
    let (q, lambda) = herm_eig(a).ok()?;
    let coords: Vec<CVec> = rhs.iter().map(|b| q.adjoint_matvec(b)).collect();
    let mass: Vec<f64> = (0..lambda.len())
        .map(|i| coords.iter().map(|c| c[i].norm_sqr()).sum())
        .collect();
    if mass.iter().any(|m| !m.is_finite()) || lambda.iter().any(|l| !l.is_finite()) {
        return None;
    }
    let mu = dual_variable(&lambda, &mass, power, mu_tol)?;
    let xs = coords
        .iter()
        .map(|c| {
            let scaled: CVec = c
                .iter()
                .zip(&lambda)
                .map(|(z, &l)| {
                    let d = l.max(0.0) + mu;
                    if *z == ZERO || d <= 0.0 {
                        ZERO
                    } else {
                        z / d
                    }
                })
                .collect();
            q.matvec(&scaled)
        })
        .collect();
    Some((xs, mu))
}

fn weighted_outer_sum(dim: usize, terms: impl Iterator<Item = (f64, CVec)>) -> CMat {
    let mut a = CMat::zeros(dim, dim);
    for (c, g) in terms {
        if c == 0.0 {
            continue;
        }
        for r in 0..dim {
            for s in r..dim {
                let v = g[r] * g[s].conj() * c;
                a[(r, s)] += v;
                if s != r {
                    a[(s, r)] += v.conj();
                }
            }
        }
    }
    a
}

/// One WMMSE iteration: receiver update, MSE-weight update, then the
/// transmit update with bisection on the dual variable.
pub fn wmmse_step<P: IcChannels + ?Sized>(p: &P, w: &[CVec], mu_tol: f64) -> Result<WmmseState> {
    let k = p.num_links();
    let st = ic_stats(p, w);
    let alpha = p.alpha();
    let u: Vec<C64> = (0..k).map(|i| st.y[i][i] / st.total[i]).collect();
    let omega: Vec<f64> = (0..k).map(|i| st.total[i] / st.interference[i]).collect();
    let weight: Vec<f64> = (0..k)
        .map(|i| alpha[i] * omega[i] * u[i].norm_sqr())
        .collect();
    let mut out = Vec::with_capacity(k);
    let mut mu = Vec::with_capacity(k);
    for b in 0..k {
        let dim = p.channel(b, b).len();
        let a = weighted_outer_sum(dim, (0..k).map(|j| (weight[j], p.channel(b, j).to_vec())));
        let rhs: CVec = p
            .channel(b, b)
            .iter()
            .map(|g| g * (u[b] * alpha[b] * omega[b]))
            .collect();
        let (mut x, m) = constrained_solve(&a, &[rhs], p.power()[b], mu_tol)
            .ok_or_else(|| Error::numerical(format!("dual bisection failed for link {b}")))?;
        out.push(x.pop().unwrap());
        mu.push(m);
    }
    Ok(WmmseState {
        u,
        omega,
        w: out,
        mu,
    })
}

fn finish_iteration<W: Clone>(
    trace: &mut SolveTrace<W>,
    w: &W,
    value: f64,
    start: Instant,
    rel_tol: Option<f64>,
) -> Result<bool> {
    if !value.is_finite() {
        return Err(Error::numerical(format!(
            "objective became non-finite at iteration {}",
            trace.iterations
        )));
    }
    trace.iter_time_s.push(start.elapsed().as_secs_f64());
    let prev = *trace.wsr.last().unwrap();
    trace.wsr.push(value);
    if let Some(b) = trace.beamformers.as_mut() {
        b.push(w.clone());
    }
    trace.iterations += 1;
    if let Some(tol) = rel_tol {
        if (value - prev).abs() <= tol * value.abs() {
            trace.termination = Termination::Converged;
            return Ok(true);
        }
    }
    Ok(false)
}

fn new_trace<W: Clone>(w: &W, value: f64, opts: &WmmseOptions) -> SolveTrace<W> {
    SolveTrace {
        wsr: vec![value],
        beamformers: opts.record_beamformers.then(|| vec![w.clone()]),
        iter_time_s: Vec::with_capacity(opts.iterations),
        iterations: 0,
        termination: Termination::IterationLimit,
        steps: Vec::new(),
        block_wsr: Vec::new(),
        final_w: w.clone(),
    }
}

fn check_mu_tol(mu_tol: f64) -> Result<()> {
    if !(mu_tol > 0.0 && mu_tol < 1.0) {
        return Err(Error::invalid(format!(
            "dual tolerance must lie in (0,1), got {mu_tol}"
        )));
    }
    Ok(())
}

pub fn wmmse_solve<P: IcChannels + ?Sized>(
    p: &P,
    init: &[CVec],
    opts: &WmmseOptions,
) -> Result<SolveTrace> {
    check_ic_init(p, init)?;
    check_iterations(opts.iterations)?;
    check_mu_tol(opts.mu_tol)?;
    let mut w = init.to_vec();
    let mut trace = new_trace(&w, wsr(&w, p), opts);
    for _ in 0..opts.iterations {
        let start = Instant::now();
        w = wmmse_step(p, &w, opts.mu_tol)?.w;
        if finish_iteration(&mut trace, &w, wsr(&w, p), start, opts.rel_tol)? {
            break;
        }
    }
    trace.final_w = w;
    Ok(trace)
}

/// Cooperative WMMSE: receiver and weight updates for all UEs, then exact
/// block updates of each BS's beamformers in turn with one dual variable per
/// BS.
pub fn coop_wmmse_solve<P: CoopChannels + ?Sized>(
    p: &P,
    init: &[Vec<CVec>],
    opts: &WmmseOptions,
) -> Result<SolveTrace<Vec<Vec<CVec>>>> {
    check_coop_init(p, init)?;
    check_iterations(opts.iterations)?;
    check_mu_tol(opts.mu_tol)?;
    let (kt, kr) = (p.num_tx(), p.num_rx());
    let alpha = p.alpha();
    let mut w = init.to_vec();
    let mut trace = new_trace(&w, coop_wsr(&w, p), opts);
    for _ in 0..opts.iterations {
        let start = Instant::now();
        let st = coop_stats(p, &w);
        let u: Vec<C64> = (0..kr).map(|q| st.s[q][q] / st.total[q]).collect();
        let omega: Vec<f64> = (0..kr).map(|q| st.total[q] / st.interference[q]).collect();
        let weight: Vec<f64> = (0..kr)
            .map(|q| alpha[q] * omega[q] * u[q].norm_sqr())
            .collect();
        let mut s = st.s;
        for j in 0..kt {
            let dim = p.channel(j, 0).len();
            let a = weighted_outer_sum(dim, (0..kr).map(|q| (weight[q], p.channel(j, q).to_vec())));
            let rhs: Vec<CVec> = (0..kr)
                .map(|l| {
                    let mut r: CVec = p
                        .channel(j, l)
                        .iter()
                        .map(|g| g * (u[l] * alpha[l] * omega[l]))
                        .collect();
                    for q in 0..kr {
                        let other = s[q][l] - dot_h(p.channel(j, q), &w[j][l]);
                        axpy(-other * weight[q], p.channel(j, q), &mut r);
                    }
                    r
                })
                .collect();
            let (x, _) = constrained_solve(&a, &rhs, p.power()[j], opts.mu_tol)
                .ok_or_else(|| Error::numerical(format!("dual bisection failed for BS {j}")))?;
            for l in 0..kr {
                for q in 0..kr {
                    s[q][l] += dot_h(p.channel(j, q), &x[l]) - dot_h(p.channel(j, q), &w[j][l]);
                }
            }
            w[j] = x;
        }
        if finish_iteration(&mut trace, &w, coop_wsr(&w, p), start, opts.rel_tol)? {
            break;
        }
    }
    trace.final_w = w;
    Ok(trace)
}
