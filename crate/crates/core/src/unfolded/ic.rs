use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cplx::{axpy, dot_h, norm, CVec, C64, ZERO};
use crate::error::{Error, Result};
use crate::wsr::{
    combine_ic, derotation, grad_coeffs_from_stats, project_ball, GradCoeffs, IcChannels, IcStats,
};

use super::mlp::{softplus, MlpCache, MlpParams};
use super::{log_scale, CoefficientMode, RnnOutput};

/// Interference threshold relative to the receiver noise power.
pub const DEFAULT_ETA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnPgpConfig {
    /// Unrolled iterations.
    pub t: usize,
    /// Neighbor budget.
    pub c: usize,
    /// Interference threshold relative to the noise power.
    pub eta: f64,
    pub hidden: Vec<usize>,
    /// Use exact gradient directions and learn only the step size.
    #[serde(default)]
    pub stepsize_only: bool,
}

/// Hidden widths proportional to the reference `125:100:85` network used
/// with 18 neighbors.
pub fn default_hidden(c: usize) -> Vec<usize> {
    let f = (c + 1) as f64 / 19.0;
    [125.0, 100.0, 85.0]
        .iter()
        .map(|w| ((w * f).round() as usize).max(8))
        .collect()
}

impl Default for RnnPgpConfig {
    fn default() -> Self {
        RnnPgpConfig {
            t: 20,
            c: 6,
            eta: DEFAULT_ETA,
            hidden: default_hidden(6),
            stepsize_only: false,
        }
    }
}

impl RnnPgpConfig {
    pub fn input_size(&self) -> usize {
        4 * (self.c + 1)
    }

    pub fn output_size(&self) -> usize {
        if self.stepsize_only {
            1
        } else {
            2 * (self.c + 1) + 1
        }
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_size()];
        s.extend(&self.hidden);
        s.push(self.output_size());
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 {
            return Err(Error::invalid("unroll depth must be at least 1"));
        }
        if !(self.eta > 0.0) {
            return Err(Error::invalid(format!(
                "interference threshold must be positive, got {}",
                self.eta
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden layers must be nonempty"));
        }
        Ok(())
    }

    pub(crate) fn check_params(&self, params: &MlpParams) -> Result<()> {
        if params.layer_sizes[0] != self.input_size() || params.output_size() != self.output_size()
        {
            return Err(Error::invalid(format!(
                "network sizes {:?} do not fit c = {} (expected {} inputs and {} outputs)",
                params.layer_sizes,
                self.c,
                self.input_size(),
                self.output_size()
            )));
        }
        Ok(())
    }
}

/// Strongest interferers per link. `in_set[k]`: BSs interfering at UE `k`;
/// `out_set[k]`: UEs hit by BS `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborSets {
    pub in_set: Vec<Vec<usize>>,
    pub out_set: Vec<Vec<usize>>,
}

fn ranked(mut cands: Vec<(usize, f64)>, c: usize) -> Vec<usize> {
    cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    cands.truncate(c);
    cands.into_iter().map(|(i, _)| i).collect()
}

/// Selection from received powers `q[j][k] = |g_jk^H w_j|²`.
pub fn neighbor_sets_from_powers(
    q: &[Vec<f64>],
    sigma2: &[f64],
    eta: f64,
    c: usize,
) -> NeighborSets {
    let k = q.len();
    let in_set = (0..k)
        .map(|u| {
            let cands = (0..k)
                .filter(|&j| j != u && q[j][u] > eta * sigma2[u])
                .map(|j| (j, q[j][u]))
                .collect();
            ranked(cands, c)
        })
        .collect();
    let out_set = (0..k)
        .map(|b| {
            let cands = (0..k)
                .filter(|&j| j != b && q[b][j] > eta * sigma2[j])
                .map(|j| (j, q[b][j] / sigma2[j]))
                .collect();
            ranked(cands, c)
        })
        .collect();
    NeighborSets { in_set, out_set }
}

fn received_powers(y: &[Vec<C64>]) -> Vec<Vec<f64>> {
    y.iter()
        .map(|r| r.iter().map(|v| v.norm_sqr()).collect())
        .collect()
}

fn cross_products<P: IcChannels + ?Sized>(p: &P, w: &[CVec]) -> Vec<Vec<C64>> {
    let k = p.num_links();
    (0..k)
        .map(|j| (0..k).map(|u| dot_h(p.channel(j, u), &w[j])).collect())
        .collect()
}

pub fn neighbor_sets<P: IcChannels + ?Sized>(
    w: &[CVec],
    p: &P,
    eta: f64,
    c: usize,
) -> NeighborSets {
    neighbor_sets_from_powers(&received_powers(&cross_products(p, w)), p.sigma2(), eta, c)
}

/// Own-signal powers `D_j = α_j |y_jj|²` and truncated interference
/// `I_j(c) = Σ_{l ∈ in_set(j)} |y_lj|² + σ_j²`.
pub(crate) fn desired_and_interference(
    q: &[Vec<f64>],
    alpha: &[f64],
    sigma2: &[f64],
    sets: &NeighborSets,
) -> (Vec<f64>, Vec<f64>) {
    let d = (0..q.len()).map(|j| alpha[j] * q[j][j]).collect();
    let i = (0..q.len())
        .map(|j| sigma2[j] + sets.in_set[j].iter().map(|&l| q[l][j]).sum::<f64>())
        .collect();
    (d, i)
}

/// Slot `s` of link `k` refers to UE `slot_link(k, s)`: `k` itself first,
/// then the out-set in ranked order.
pub(crate) fn slot_links(k: usize, sets: &NeighborSets) -> Vec<usize> {
    std::iter::once(k)
        .chain(sets.out_set[k].iter().copied())
        .collect()
}

/// Channel norms `‖g_kj‖`.
pub(crate) fn channel_norms<P: IcChannels + ?Sized>(p: &P) -> Vec<Vec<f64>> {
    let k = p.num_links();
    (0..k)
        .map(|b| (0..k).map(|j| norm(p.channel(b, j))).collect())
        .collect()
}

/// Factor mapping an MLP coefficient of slot `(k, j)` to `a_kj`.
pub(crate) fn coef_scale(power: f64, gnorm: f64) -> f64 {
    if gnorm > 0.0 {
        power.sqrt() / gnorm
    } else {
        0.0
    }
}

/// Normalizer of the inner-product feature of slot `j` of link `k`:
/// `√T_k(c)` for the own slot, `√I_j(c)` otherwise.
#[inline]
pub(crate) fn ip_norm(k: usize, j: usize, i_pow: &[f64], q_kk: f64) -> f64 {
    if j == k {
        (i_pow[k] + q_kk).sqrt()
    } else {
        i_pow[j].sqrt()
    }
}

/// Factor `T_k(c) / (‖g_kk‖² N_kj Λ_k)` mapping the MLP coefficient of slot `j`
/// of link `k` to `a_kj`, divided by the curvature factor `lam`.
#[inline]
/// Curvature factor `Λ_k = 1 + Σ_j P_k ‖g_kj‖² / I_j(c)` over the
/// neighbor slots `j ≠ k`.
pub(crate) fn curvature(
    k: usize,
    slots: &[usize],
    power_k: f64,
    gn_k: &[f64],
    i_pow: &[f64],
) -> f64 {
    1.0 + slots
        .iter()
        .filter(|&&j| j != k)
        .map(|&j| power_k * gn_k[j] * gn_k[j] / i_pow[j])
        .sum::<f64>()
}

pub(crate) fn slot_scale(gnorm_kk: f64, t_k: f64, n_kj: f64, lam: f64) -> f64 {
    if gnorm_kk > 0.0 {
        t_k / (gnorm_kk * gnorm_kk * n_kj * lam)
    } else {
        0.0
    }
}

pub(crate) struct FeatureInputs<'a> {
    pub y: &'a [Vec<C64>],
    pub d_pow: &'a [f64],
    pub i_pow: &'a [f64],
    pub sigma2: &'a [f64],
}

pub(crate) fn features_for(k: usize, slots: &[usize], f: &FeatureInputs, c: usize) -> Vec<f64> {
    let mut x = vec![0.0; 4 * (c + 1)];
    for (s, &j) in slots.iter().enumerate().take(c + 1) {
        x[4 * s] = log_scale(f.d_pow[j], f.sigma2[j]);
        x[4 * s + 1] = log_scale(f.i_pow[j], f.sigma2[j]);
        let n = ip_norm(k, j, f.i_pow, f.y[k][k].norm_sqr());
        x[4 * s + 2] = f.y[k][j].re / n;
        x[4 * s + 3] = f.y[k][j].im / n;
    }
    x
}

/// MLP input of link `k`: per slot `[D_j, I_j(c), Re g_kj^H w_k, Im g_kj^H w_k]`
/// with powers on a `log10(1 + x/σ_j²)` scale and inner products divided by
/// `√T_k(c)` (own slot) or `√I_j(c)`; unused slots are zero.
pub fn assemble_features<P: IcChannels + ?Sized>(
    k: usize,
    w: &[CVec],
    p: &P,
    sets: &NeighborSets,
    c: usize,
) -> Vec<f64> {
    let y = cross_products(p, w);
    let q = received_powers(&y);
    let (d_pow, i_pow) = desired_and_interference(&q, p.alpha(), p.sigma2(), sets);
    let f = FeatureInputs {
        y: &y,
        d_pow: &d_pow,
        i_pow: &i_pow,
        sigma2: p.sigma2(),
    };
    features_for(k, &slot_links(k, sets), &f, c)
}

/// Splits an MLP output into unscaled slot coefficients and the step size.
pub fn mlp_forward(features: &[f64], params: &MlpParams) -> Result<(Vec<C64>, f64)> {
    let out = params.forward(features)?;
    if out.len() % 2 == 0 {
        return Err(Error::invalid(
            "coefficient network needs an odd output size",
        ));
    }
    let slots = (out.len() - 1) / 2;
    let a = (0..slots)
        .map(|s| C64::new(out[2 * s], out[2 * s + 1]))
        .collect();
    Ok((a, softplus(out[out.len() - 1])))
}

/// `Σ_s a_s g_{k, j_s}` over the own slot and the out-set of `k`; coefficients
/// of unused slots are ignored.
pub fn build_direction<P: IcChannels + ?Sized>(
    a: &[C64],
    k: usize,
    sets: &NeighborSets,
    p: &P,
) -> CVec {
    let mut d = vec![ZERO; p.channel(k, k).len()];
    for (s, &j) in slot_links(k, sets).iter().enumerate().take(a.len()) {
        axpy(a[s], p.channel(k, j), &mut d);
    }
    d
}

/// Values recorded per unrolled iteration for the reverse pass.
#[derive(Debug, Clone, Default)]
pub(crate) struct IcIterCache {
    pub y: Vec<Vec<C64>>,
    pub total: Vec<f64>,
    pub interference: Vec<f64>,
    pub sets: Option<NeighborSets>,
    pub d_pow: Vec<f64>,
    pub i_pow: Vec<f64>,
    pub mlp: Vec<MlpCache>,
    pub out: Vec<Vec<f64>>,
    pub coeffs: Option<GradCoeffs>,
    pub step: Vec<f64>,
    pub dir: Vec<CVec>,
    pub shifted: Vec<CVec>,
    pub projected: Vec<CVec>,
    pub rho: Vec<C64>,
}

fn stats_from(y: Vec<Vec<C64>>, sigma2: &[f64]) -> IcStats {
    let k = y.len();
    let mut total = vec![0.0; k];
    let mut interference = vec![0.0; k];
    for u in 0..k {
        let mut inter = sigma2[u];
        for (j, row) in y.iter().enumerate() {
            if j != u {
                inter += row[u].norm_sqr();
            }
        }
        interference[u] = inter;
        total[u] = inter + y[u][u].norm_sqr();
    }
    IcStats {
        y,
        total,
        interference,
    }
}

pub(crate) fn run_ic<P: IcChannels + ?Sized>(
    p: &P,
    params: Option<&MlpParams>,
    cfg: &RnnPgpConfig,
    mode: CoefficientMode,
    init: &[CVec],
    mut caches: Option<&mut Vec<IcIterCache>>,
) -> Result<RnnOutput<Vec<CVec>>> {
    cfg.validate()?;
    let k = p.num_links();
    if init.len() != k || (0..k).any(|b| init[b].len() != p.channel(b, b).len()) {
        return Err(Error::invalid(
            "initial beamformers do not match the problem",
        ));
    }
    let net = match mode {
        CoefficientMode::Oracle { step } => {
            if !(step > 0.0) {
                return Err(Error::invalid(format!(
                    "step size must be positive, got {step}"
                )));
            }
            None
        }
        _ => {
            let net = params
                .ok_or_else(|| Error::invalid("learned coefficients need network parameters"))?;
            cfg.check_params(net)?;
            Some(net)
        }
    };
    let sigma2 = p.sigma2();
    let power = p.power();
    let gn = channel_norms(p);

    let mut w = init.to_vec();
    let mut iterates = Vec::with_capacity(cfg.t + 1);
    let mut wsr_hist = Vec::with_capacity(cfg.t + 1);
    let mut times = Vec::with_capacity(cfg.t);
    let mut stats = stats_from(cross_products(p, &w), sigma2);
    iterates.push(w.clone());
    wsr_hist.push(stats.wsr(p.alpha()));
    if let Some(c) = caches.as_deref_mut() {
        c.clear();
    }

    for _ in 0..cfg.t {
        let start = Instant::now();
        let mut cache = IcIterCache::default();
        let q = received_powers(&stats.y);
        let coeffs = match mode {
            CoefficientMode::Learned => None,
            _ => Some(grad_coeffs_from_stats(p.alpha(), &stats)),
        };
        let sets = net.map(|_| neighbor_sets_from_powers(&q, sigma2, cfg.eta, cfg.c));
        let (d_pow, i_pow) = match &sets {
            Some(s) => desired_and_interference(&q, p.alpha(), sigma2, s),
            None => (Vec::new(), Vec::new()),
        };
        let mut next = Vec::with_capacity(k);
        for b in 0..k {
            let (dir, step) = match (net, &sets) {
                (Some(net), Some(sets)) => {
                    let slots = slot_links(b, sets);
                    let f = FeatureInputs {
                        y: &stats.y,
                        d_pow: &d_pow,
                        i_pow: &i_pow,
                        sigma2,
                    };
                    let x = features_for(b, &slots, &f, cfg.c);
                    let mut mc = MlpCache::default();
                    let out = net.forward_cached(&x, caches.is_some().then_some(&mut mc));
                    let step = softplus(out[out.len() - 1]);
                    let dir = match &coeffs {
                        Some(cf) => combine_ic(p, b, &cf.a[b]),
                        None => {
                            let mut d = vec![ZERO; p.channel(b, b).len()];
                            let t_b = i_pow[b] + q[b][b];
                            let slots = &slots[..slots.len().min(cfg.c + 1)];
                            let lam = curvature(b, slots, power[b], &gn[b], &i_pow);
                            for (s, &j) in slots.iter().enumerate() {
                                let scale =
                                    slot_scale(gn[b][b], t_b, ip_norm(b, j, &i_pow, q[b][b]), lam);
                                axpy(
                                    C64::new(out[2 * s], out[2 * s + 1]) * scale,
                                    p.channel(b, j),
                                    &mut d,
                                );
                            }
                            d
                        }
                    };
                    if caches.is_some() {
                        cache.mlp.push(mc);
                        cache.out.push(out);
                    }
                    (dir, step)
                }
                _ => {
                    let CoefficientMode::Oracle { step } = mode else {
                        unreachable!()
                    };
                    (combine_ic(p, b, &coeffs.as_ref().unwrap().a[b]), step)
                }
            };
            let shifted: CVec = w[b].iter().zip(&dir).map(|(x, d)| x + d * step).collect();
            let projected = project_ball(&shifted, power[b]);
            let rho = dot_h(p.channel(b, b), &projected);
            let e = derotation(rho);
            next.push(projected.iter().map(|z| z * e).collect::<CVec>());
            if caches.is_some() {
                cache.step.push(step);
                cache.dir.push(dir);
                cache.shifted.push(shifted);
                cache.projected.push(projected);
                cache.rho.push(rho);
            }
        }
        w = next;
        if w.iter().flatten().any(|z| !z.is_finite()) {
            return Err(Error::numerical(format!(
                "forward pass produced non-finite beamformers at iteration {}",
                times.len()
            )));
        }
        let new_stats = stats_from(cross_products(p, &w), sigma2);
        times.push(start.elapsed().as_secs_f64());
        wsr_hist.push(new_stats.wsr(p.alpha()));
        iterates.push(w.clone());
        if let Some(c) = caches.as_deref_mut() {
            let old = std::mem::replace(&mut stats, new_stats);
            cache.y = old.y;
            cache.total = old.total;
            cache.interference = old.interference;
            cache.sets = sets;
            cache.d_pow = d_pow;
            cache.i_pow = i_pow;
            cache.coeffs = coeffs;
            c.push(cache);
        } else {
            stats = new_stats;
        }
    }
    Ok(RnnOutput {
        w,
        iterates,
        wsr: wsr_hist,
        iter_time_s: times,
    })
}

/// Runs the unrolled network from `init`. With `stepsize_only` set the
/// directions are exact gradients and the network only predicts steps.
pub fn rnn_pgp_forward<P: IcChannels + ?Sized>(
    p: &P,
    params: &MlpParams,
    cfg: &RnnPgpConfig,
    init: &[CVec],
) -> Result<RnnOutput<Vec<CVec>>> {
    let mode = if cfg.stepsize_only {
        CoefficientMode::ExactGradient
    } else {
        CoefficientMode::Learned
    };
    run_ic(p, Some(params), cfg, mode, init, None)
}

/// The unrolled pipeline with exact gradient coefficients and a fixed step.
pub fn rnn_pgp_forward_oracle<P: IcChannels + ?Sized>(
    p: &P,
    cfg: &RnnPgpConfig,
    init: &[CVec],
    step: f64,
) -> Result<RnnOutput<Vec<CVec>>> {
    run_ic(p, None, cfg, CoefficientMode::Oracle { step }, init, None)
}
