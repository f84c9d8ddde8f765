use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cplx::{axpy, axpy_conj, dot_h, norm, CVec, C64, ZERO};
use crate::error::{Error, Result};
use crate::wsr::{
    coop_grad_coeffs_from_stats, coop_stats, derotation, project_coop, CoopChannels, CoopStats,
};

use super::ic::coef_scale;
use super::mlp::{softplus, MlpCache, MlpParams};
use super::{log_scale, CoefficientMode, RnnOutput};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoopRnnConfig {
    pub t: usize,
    /// Number of receivers the network is built for.
    pub k_r: usize,
    pub hidden: Vec<usize>,
}

pub fn default_coop_hidden(k_r: usize) -> Vec<usize> {
    [12, 10, 8].iter().map(|m| (m * k_r).max(8)).collect()
}

impl CoopRnnConfig {
    pub fn new(t: usize, k_r: usize) -> Self {
        CoopRnnConfig {
            t,
            k_r,
            hidden: default_coop_hidden(k_r),
        }
    }

    pub fn input_size(&self) -> usize {
        4 * self.k_r
    }

    pub fn output_size(&self) -> usize {
        4 * self.k_r + 1
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_size()];
        s.extend(&self.hidden);
        s.push(self.output_size());
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 || self.k_r == 0 {
            return Err(Error::invalid(
                "unroll depth and receiver count must be positive",
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden layers must be nonempty"));
        }
        Ok(())
    }
}

/// Receiver order of the MLP slots for UE `k`: `k` first, then the others
/// ascending.
pub(crate) fn coop_slots(k: usize, kr: usize) -> Vec<usize> {
    std::iter::once(k)
        .chain((0..kr).filter(|&q| q != k))
        .collect()
}

/// Unit phasor of `z` (1 at the origin); the `a` outputs of slot `q` are
/// expressed relative to the phase of `s_qk`.
#[inline]
pub(crate) fn unit_phase(z: C64) -> C64 {
    let r = z.norm();
    if r == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        z / r
    }
}

pub(crate) fn coop_features_from(
    j: usize,
    k: usize,
    st: &CoopStats,
    d_pow: &[f64],
    sigma2: &[f64],
) -> Vec<f64> {
    let kr = sigma2.len();
    let mut x = vec![0.0; 4 * kr];
    for (s, q) in coop_slots(k, kr).into_iter().enumerate() {
        let own = st.t[j][k][q];
        x[4 * s] = log_scale(own.norm_sqr(), sigma2[q]);
        x[4 * s + 1] = log_scale((st.s[q][k] - own).norm_sqr(), sigma2[q]);
        x[4 * s + 2] = log_scale(d_pow[q], sigma2[q]);
        x[4 * s + 3] = log_scale(st.interference[q], sigma2[q]);
    }
    x
}

/// MLP input of the pair `(j, k)`: per receiver `p` (own `p = k` first)
/// `[|g_jp^H w_jk|², |Σ_{q≠j} g_qp^H w_qk|², D_p, I_p]`, each on a
/// `log10(1 + x/σ_p²)` scale.
pub fn coop_features<P: CoopChannels + ?Sized>(
    j: usize,
    k: usize,
    w: &[Vec<CVec>],
    p: &P,
) -> Vec<f64> {
    let st = coop_stats(p, w);
    let d_pow: Vec<f64> = (0..p.num_rx())
        .map(|q| p.alpha()[q] * st.s[q][q].norm_sqr())
        .collect();
    coop_features_from(j, k, &st, &d_pow, p.sigma2())
}

#[derive(Debug, Clone, Default)]
pub(crate) struct CoopIterCache {
    pub stats: Option<CoopStats>,
    pub d_pow: Vec<f64>,
    pub mlp: Vec<Vec<MlpCache>>,
    pub out: Vec<Vec<Vec<f64>>>,
    pub step: Vec<Vec<f64>>,
    pub dir: Vec<Vec<CVec>>,
    pub shifted: Vec<Vec<CVec>>,
    pub projected: Vec<Vec<CVec>>,
    pub rho: Vec<C64>,
}

pub(crate) fn run_coop<P: CoopChannels + ?Sized>(
    p: &P,
    params: Option<&MlpParams>,
    cfg: &CoopRnnConfig,
    mode: CoefficientMode,
    init: &[Vec<CVec>],
    mut caches: Option<&mut Vec<CoopIterCache>>,
) -> Result<RnnOutput<Vec<Vec<CVec>>>> {
    cfg.validate()?;
    let (kt, kr) = (p.num_tx(), p.num_rx());
    if kr != cfg.k_r {
        return Err(Error::invalid(format!(
            "network built for {} receivers, problem has {kr}",
            cfg.k_r
        )));
    }
    if init.len() != kt
        || init
            .iter()
            .enumerate()
            .any(|(j, wj)| wj.len() != kr || wj.iter().any(|v| v.len() != p.channel(j, 0).len()))
    {
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
        CoefficientMode::ExactGradient => {
            return Err(Error::invalid(
                "step-size-only mode is available for the interference channel only",
            ));
        }
        CoefficientMode::Learned => {
            let net = params
                .ok_or_else(|| Error::invalid("learned coefficients need network parameters"))?;
            if net.layer_sizes[0] != cfg.input_size() || net.output_size() != cfg.output_size() {
                return Err(Error::invalid(format!(
                    "network sizes {:?} do not fit {} receivers",
                    net.layer_sizes, cfg.k_r
                )));
            }
            Some(net)
        }
    };
    let sigma2 = p.sigma2();
    let alpha = p.alpha();
    let power = p.power();
    let gn: Vec<Vec<f64>> = (0..kt)
        .map(|j| (0..kr).map(|q| norm(p.channel(j, q))).collect())
        .collect();

    let mut w = init.to_vec();
    let mut iterates = vec![w.clone()];
    let mut st = coop_stats(p, &w);
    let mut wsr_hist = vec![st.wsr(alpha)];
    let mut times = Vec::with_capacity(cfg.t);
    if let Some(c) = caches.as_deref_mut() {
        c.clear();
    }
    for _ in 0..cfg.t {
        let start = Instant::now();
        let record = caches.is_some();
        let mut cache = CoopIterCache::default();
        let d_pow: Vec<f64> = (0..kr).map(|q| alpha[q] * st.s[q][q].norm_sqr()).collect();
        let oracle = net
            .is_none()
            .then(|| coop_grad_coeffs_from_stats(kt, alpha, &st));
        let mut shifted = Vec::with_capacity(kt);
        for j in 0..kt {
            let mut row = Vec::with_capacity(kr);
            for k in 0..kr {
                let mut d = vec![ZERO; p.channel(j, 0).len()];
                let step = match net {
                    Some(net) => {
                        let x = coop_features_from(j, k, &st, &d_pow, sigma2);
                        let mut mc = MlpCache::default();
                        let out = net.forward_cached(&x, record.then_some(&mut mc));
                        for (s, q) in coop_slots(k, kr).into_iter().enumerate() {
                            let scale = coef_scale(power[j], gn[j][q]);
                            let a = C64::new(out[4 * s], out[4 * s + 1])
                                * unit_phase(st.s[q][k])
                                * scale;
                            axpy(a, p.channel(j, q), &mut d);
                            axpy_conj(
                                C64::new(out[4 * s + 2], out[4 * s + 3]) * scale,
                                p.channel(j, q),
                                &mut d,
                            );
                        }
                        let step = softplus(out[4 * kr]);
                        if record {
                            if cache.mlp.len() <= j {
                                cache.mlp.push(Vec::new());
                                cache.out.push(Vec::new());
                            }
                            cache.mlp[j].push(mc);
                            cache.out[j].push(out);
                        }
                        step
                    }
                    None => {
                        let cf = oracle.as_ref().unwrap();
                        for q in 0..kr {
                            axpy(cf.a[j][k][q], p.channel(j, q), &mut d);
                        }
                        let CoefficientMode::Oracle { step } = mode else {
                            unreachable!()
                        };
                        step
                    }
                };
                row.push(
                    w[j][k]
                        .iter()
                        .zip(&d)
                        .map(|(x, v)| x + v * step)
                        .collect::<CVec>(),
                );
                if record {
                    if cache.step.len() <= j {
                        cache.step.push(Vec::new());
                        cache.dir.push(Vec::new());
                    }
                    cache.step[j].push(step);
                    cache.dir[j].push(d);
                }
            }
            shifted.push(row);
        }
        let projected: Vec<Vec<CVec>> = shifted
            .iter()
            .zip(power)
            .map(|(row, &pj)| project_coop(row, pj))
            .collect();
        let rho: Vec<C64> = (0..kr)
            .map(|k| {
                (0..kt)
                    .map(|j| dot_h(p.channel(j, k), &projected[j][k]))
                    .sum()
            })
            .collect();
        let rot: Vec<C64> = rho.iter().map(|&r| derotation(r)).collect();
        w = projected
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&rot)
                    .map(|(v, e)| v.iter().map(|z| z * e).collect())
                    .collect()
            })
            .collect();
        if w.iter().flatten().flatten().any(|z| !z.is_finite()) {
            return Err(Error::numerical(format!(
                "forward pass produced non-finite beamformers at iteration {}",
                times.len()
            )));
        }
        let new_st = coop_stats(p, &w);
        times.push(start.elapsed().as_secs_f64());
        wsr_hist.push(new_st.wsr(alpha));
        iterates.push(w.clone());
        let old = std::mem::replace(&mut st, new_st);
        if let Some(c) = caches.as_deref_mut() {
            cache.stats = Some(old);
            cache.d_pow = d_pow;
            cache.shifted = shifted;
            cache.projected = projected;
            cache.rho = rho;
            c.push(cache);
        }
    }
    Ok(RnnOutput {
        w,
        iterates,
        wsr: wsr_hist,
        iter_time_s: times,
    })
}

pub fn coop_rnn_pgp_forward<P: CoopChannels + ?Sized>(
    p: &P,
    params: &MlpParams,
    cfg: &CoopRnnConfig,
    init: &[Vec<CVec>],
) -> Result<RnnOutput<Vec<Vec<CVec>>>> {
    run_coop(p, Some(params), cfg, CoefficientMode::Learned, init, None)
}

/// Cooperative pipeline with exact gradient coefficients and a fixed step.
pub fn coop_rnn_pgp_forward_oracle<P: CoopChannels + ?Sized>(
    p: &P,
    cfg: &CoopRnnConfig,
    init: &[Vec<CVec>],
    step: f64,
) -> Result<RnnOutput<Vec<Vec<CVec>>>> {
    run_coop(p, None, cfg, CoefficientMode::Oracle { step }, init, None)
}
