use crate::cplx::{axpy, dot_h, norm, norm_sqr, real_dot, CVec, C64, ZERO};
use crate::error::{Error, Result};
use crate::unfolded::{
    channel_norms, coef_scale, coop_slots, curvature, ip_norm, log_scale_grad, run_coop, run_ic,
    sigmoid, slot_links, slot_scale, unit_phase, CoefficientMode, CoopIterCache, CoopRnnConfig,
    IcIterCache, MlpParams, RnnPgpConfig,
};
use crate::wsr::{derotation, CoopChannels, IcChannels, KAPPA, PROJECTION_SLACK};

use super::loss::{supervised_coop, supervised_ic, unsupervised_coop, unsupervised_ic};

const I: C64 = C64::new(0.0, 1.0);

/// Objective of one interference-channel sample.
#[derive(Debug, Clone, Copy)]
pub enum IcLoss<'a> {
    /// Distance to an aligned label.
    Supervised { label: &'a [CVec], gamma: f64 },
    /// Negative per-link WSR of the final iterate.
    Unsupervised,
}

#[derive(Debug, Clone, Copy)]
pub enum CoopLoss<'a> {
    Supervised { label: &'a [Vec<CVec>], gamma: f64 },
    Unsupervised,
}

/// Loss and parameter gradient of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGradient {
    pub loss: f64,
    pub grad: MlpParams,
    /// WSR of the final iterate.
    pub wsr: f64,
}

fn check_finite<'a>(vals: impl IntoIterator<Item = &'a CVec>, iteration: usize) -> Result<()> {
    if vals.into_iter().flatten().all(|z| z.is_finite()) {
        Ok(())
    } else {
        Err(Error::numerical(format!(
            "non-finite gradient in the reverse pass at iteration {iteration}"
        )))
    }
}

/// Reverse of `w' = P(w̃)·e(ρ)` with `ρ = g^H P(w̃)`: adjoint of `P(w̃)`.
fn rotation_adjoint(projected: &[C64], rho: C64, wbar: &[C64], gref: &[C64]) -> CVec {
    let e = derotation(rho);
    let mut pbar: CVec = wbar.iter().map(|z| z * e.conj()).collect();
    let r2 = rho.norm_sqr();
    if r2 > 0.0 {
        let ebar = dot_h(projected, wbar);
        let phibar = (ebar.conj() * (-I * e)).re;
        let rhobar = I * rho * (phibar / r2);
        axpy(rhobar, gref, &mut pbar);
    }
    pbar
}

/// Reverse of the ball projection of the concatenation of `shifted`.
fn projection_adjoint(shifted: &[&CVec], pbar: &[CVec], power: f64) -> Vec<CVec> {
    let n2: f64 = shifted.iter().map(|v| norm_sqr(v)).sum();
    if n2 <= power * (1.0 + PROJECTION_SLACK) {
        return pbar.to_vec();
    }
    let n = n2.sqrt();
    let radial: f64 = shifted
        .iter()
        .zip(pbar)
        .map(|(v, b)| real_dot(v, b))
        .sum::<f64>()
        / n2;
    let f = power.sqrt() / n;
    shifted
        .iter()
        .zip(pbar)
        .map(|(v, b)| {
            b.iter()
                .zip(v.iter())
                .map(|(bz, vz)| (bz - vz * radial) * f)
                .collect()
        })
        .collect()
}

fn reverse_ic_iter<P: IcChannels + ?Sized>(
    p: &P,
    net: &MlpParams,
    cfg: &RnnPgpConfig,
    c: &IcIterCache,
    wbar: &[CVec],
    grad: &mut MlpParams,
    gn: &[Vec<f64>],
) -> Vec<CVec> {
    let k = p.num_links();
    let power = p.power();
    let sigma2 = p.sigma2();
    let alpha = p.alpha();
    let sets = c
        .sets
        .as_ref()
        .expect("learned iterations record neighbor sets");
    let mut out_bar: Vec<CVec> = (0..k).map(|b| vec![ZERO; wbar[b].len()]).collect();
    let mut ybar = vec![vec![ZERO; k]; k];
    let mut dpow_bar = vec![0.0; k];
    let mut ipow_bar = vec![0.0; k];
    let mut coef_bar = vec![vec![ZERO; k]; k];
    let mut qbb_bar = vec![0.0; k];
    let mut norm_bar = vec![vec![0.0; k]; k];

    for b in 0..k {
        let pbar = rotation_adjoint(&c.projected[b], c.rho[b], &wbar[b], p.channel(b, b));
        let shbar = projection_adjoint(&[&c.shifted[b]], std::slice::from_ref(&pbar), power[b])
            .pop()
            .unwrap();
        out_bar[b].iter_mut().zip(&shbar).for_each(|(o, s)| *o += s);
        let sbar = real_dot(&c.dir[b], &shbar);
        let step = c.step[b];
        let dbar: CVec = shbar.iter().map(|z| z * step).collect();
        let out = &c.out[b];
        let mut obar = vec![0.0; out.len()];
        let slots = slot_links(b, sets);
        if cfg.stepsize_only {
            for j in 0..k {
                coef_bar[b][j] = dot_h(p.channel(b, j), &dbar);
            }
        } else {
            let t_b = c.i_pow[b] + c.y[b][b].norm_sqr();
            let used = &slots[..slots.len().min(cfg.c + 1)];
            let lam = curvature(b, used, power[b], &gn[b], &c.i_pow);
            let mut lam_bar = 0.0;
            for (s, &j) in used.iter().enumerate() {
                let abar = dot_h(p.channel(b, j), &dbar);
                let n = ip_norm(b, j, &c.i_pow, c.y[b][b].norm_sqr());
                let scale = slot_scale(gn[b][b], t_b, n, lam);
                obar[2 * s] = scale * abar.re;
                obar[2 * s + 1] = scale * abar.im;
                if scale != 0.0 {
                    let scale_bar = (abar.conj() * C64::new(out[2 * s], out[2 * s + 1])).re * scale;
                    ipow_bar[b] += scale_bar / t_b;
                    qbb_bar[b] += scale_bar / t_b;
                    norm_bar[b][j] -= scale_bar / n;
                    lam_bar -= scale_bar / lam;
                }
            }
            for &j in used.iter().filter(|&&j| j != b) {
                ipow_bar[j] -= lam_bar * power[b] * gn[b][j] * gn[b][j] / (c.i_pow[j] * c.i_pow[j]);
            }
        }
        let last = out.len() - 1;
        obar[last] = sbar * sigmoid(out[last]);
        let xbar = net.backward(&c.mlp[b], &obar, grad);
        for (s, &j) in slots.iter().enumerate().take(cfg.c + 1) {
            dpow_bar[j] += xbar[4 * s] * log_scale_grad(c.d_pow[j], sigma2[j]);
            ipow_bar[j] += xbar[4 * s + 1] * log_scale_grad(c.i_pow[j], sigma2[j]);
            let y = c.y[b][j];
            let n = ip_norm(b, j, &c.i_pow, c.y[b][b].norm_sqr());
            let xc = C64::new(xbar[4 * s + 2], xbar[4 * s + 3]);
            ybar[b][j] += xc / n;
            norm_bar[b][j] -= (xc.conj() * y).re / (n * n);
        }
    }

    for b in 0..k {
        for j in 0..k {
            let nb = norm_bar[b][j];
            if nb != 0.0 {
                let m_bar = nb / (2.0 * ip_norm(b, j, &c.i_pow, c.y[b][b].norm_sqr()));
                ipow_bar[j] += m_bar;
                if j == b {
                    qbb_bar[b] += m_bar;
                }
            }
        }
    }

    // Adjoints of the received powers q[l][j] = |y_lj|².
    let mut qbar = vec![vec![0.0; k]; k];
    for j in 0..k {
        qbar[j][j] += alpha[j] * dpow_bar[j] + qbb_bar[j];
        for &l in &sets.in_set[j] {
            qbar[l][j] += ipow_bar[j];
        }
    }
    if cfg.stepsize_only {
        let y = &c.y;
        let mut tbar = vec![0.0; k];
        let mut ibar = vec![0.0; k];
        for u in 0..k {
            for j in 0..k {
                let abar = coef_bar[u][j];
                let (tj, ij, qjj) = (c.total[j], c.interference[j], y[j][j].norm_sqr());
                let cval = if j == u {
                    KAPPA * alpha[u] / tj
                } else {
                    -KAPPA * alpha[j] * qjj / (tj * ij)
                };
                ybar[u][j] += abar * cval;
                let cbar = (abar.conj() * y[u][j]).re;
                if j == u {
                    tbar[j] -= KAPPA * alpha[j] / (tj * tj) * cbar;
                } else {
                    qbar[j][j] -= KAPPA * alpha[j] / (tj * ij) * cbar;
                    tbar[j] += KAPPA * alpha[j] * qjj / (tj * tj * ij) * cbar;
                    ibar[j] += KAPPA * alpha[j] * qjj / (tj * ij * ij) * cbar;
                }
            }
        }
        for j in 0..k {
            for l in 0..k {
                qbar[l][j] += tbar[j];
                if l != j {
                    qbar[l][j] += ibar[j];
                }
            }
        }
    }
    for l in 0..k {
        for j in 0..k {
            let yb = ybar[l][j] + c.y[l][j] * (2.0 * qbar[l][j]);
            if yb != ZERO {
                axpy(yb, p.channel(l, j), &mut out_bar[l]);
            }
        }
    }
    out_bar
}

/// Loss and exact parameter gradient of one interference-channel sample,
/// differentiated through all unrolled iterations. Neighbor selection is
/// held fixed at its forward-pass value.
pub fn backward_ic<P: IcChannels + ?Sized>(
    p: &P,
    params: &MlpParams,
    cfg: &RnnPgpConfig,
    init: &[CVec],
    loss: IcLoss,
) -> Result<SampleGradient> {
    let mode = if cfg.stepsize_only {
        CoefficientMode::ExactGradient
    } else {
        CoefficientMode::Learned
    };
    let mut caches = Vec::with_capacity(cfg.t);
    let out = run_ic(p, Some(params), cfg, mode, init, Some(&mut caches))?;
    let (value, adj) = match loss {
        IcLoss::Supervised { label, gamma } => {
            supervised_ic(&out.iterates, label, p.alpha(), gamma, true)?
        }
        IcLoss::Unsupervised => unsupervised_ic(&out.iterates, p),
    };
    let gn = channel_norms(p);
    let mut grad = params.zeros_like();
    let mut wbar = adj[cfg.t].clone();
    for r in (0..cfg.t).rev() {
        check_finite(&wbar, r)?;
        wbar = reverse_ic_iter(p, params, cfg, &caches[r], &wbar, &mut grad, &gn);
        if r > 0 {
            for (acc, a) in wbar.iter_mut().zip(&adj[r]) {
                acc.iter_mut().zip(a).for_each(|(x, y)| *x += y);
            }
        }
    }
    if !grad.is_finite() {
        return Err(Error::numerical(
            "non-finite parameter gradient at iteration 0",
        ));
    }
    Ok(SampleGradient {
        loss: value,
        grad,
        wsr: *out.wsr.last().unwrap(),
    })
}

fn reverse_coop_iter<P: CoopChannels + ?Sized>(
    p: &P,
    net: &MlpParams,
    c: &CoopIterCache,
    wbar: &[Vec<CVec>],
    grad: &mut MlpParams,
    gn: &[Vec<f64>],
) -> Vec<Vec<CVec>> {
    let (kt, kr) = (p.num_tx(), p.num_rx());
    let power = p.power();
    let sigma2 = p.sigma2();
    let alpha = p.alpha();
    let st = c
        .stats
        .as_ref()
        .expect("iterations record their input statistics");

    let mut pbar: Vec<Vec<CVec>> = (0..kt)
        .map(|j| {
            (0..kr)
                .map(|k| {
                    wbar[j][k]
                        .iter()
                        .map(|z| z * derotation(c.rho[k]).conj())
                        .collect()
                })
                .collect()
        })
        .collect();
    for k in 0..kr {
        let rho = c.rho[k];
        let r2 = rho.norm_sqr();
        if r2 > 0.0 {
            let e = derotation(rho);
            let ebar: C64 = (0..kt)
                .map(|j| dot_h(&c.projected[j][k], &wbar[j][k]))
                .sum();
            let phibar = (ebar.conj() * (-I * e)).re;
            let rhobar = I * rho * (phibar / r2);
            for (j, pj) in pbar.iter_mut().enumerate() {
                axpy(rhobar, p.channel(j, k), &mut pj[k]);
            }
        }
    }

    let mut out_bar: Vec<Vec<CVec>> = Vec::with_capacity(kt);
    let mut tbar = vec![vec![vec![ZERO; kr]; kr]; kt];
    let mut sbar = vec![vec![ZERO; kr]; kr];
    let mut dpow_bar = vec![0.0; kr];
    let mut ipow_bar = vec![0.0; kr];
    for j in 0..kt {
        let shifted: Vec<&CVec> = c.shifted[j].iter().collect();
        let shbar = projection_adjoint(&shifted, &pbar[j], power[j]);
        for k in 0..kr {
            let step_bar = real_dot(&c.dir[j][k], &shbar[k]);
            let dbar: CVec = shbar[k].iter().map(|z| z * c.step[j][k]).collect();
            let out = &c.out[j][k];
            let mut obar = vec![0.0; out.len()];
            for (s, q) in coop_slots(k, kr).into_iter().enumerate() {
                let scale = coef_scale(power[j], gn[j][q]);
                let g = p.channel(j, q);
                let cbar = dot_h(g, &dbar);
                let sq = st.s[q][k];
                let u = unit_phase(sq);
                let abar = cbar * u.conj() * scale;
                let bbar = g.iter().zip(&dbar).map(|(x, y)| x * y).sum::<C64>() * scale;
                let r = sq.norm();
                if r > 0.0 {
                    let ubar = (C64::new(out[4 * s], out[4 * s + 1]) * scale).conj() * cbar;
                    sbar[q][k] += (ubar - u * (u.conj() * ubar).re) / r;
                }
                obar[4 * s] = abar.re;
                obar[4 * s + 1] = abar.im;
                obar[4 * s + 2] = bbar.re;
                obar[4 * s + 3] = bbar.im;
            }
            obar[4 * kr] = step_bar * sigmoid(out[4 * kr]);
            let xbar = net.backward(&c.mlp[j][k], &obar, grad);
            for (s, q) in coop_slots(k, kr).into_iter().enumerate() {
                let own = st.t[j][k][q];
                let others = st.s[q][k] - own;
                let ub = own * (2.0 * xbar[4 * s] * log_scale_grad(own.norm_sqr(), sigma2[q]));
                let vb =
                    others * (2.0 * xbar[4 * s + 1] * log_scale_grad(others.norm_sqr(), sigma2[q]));
                tbar[j][k][q] += ub - vb;
                sbar[q][k] += vb;
                dpow_bar[q] += xbar[4 * s + 2] * log_scale_grad(c.d_pow[q], sigma2[q]);
                ipow_bar[q] += xbar[4 * s + 3] * log_scale_grad(st.interference[q], sigma2[q]);
            }
        }
        out_bar.push(shbar);
    }
    for q in 0..kr {
        for k in 0..kr {
            let f = if k == q {
                alpha[q] * dpow_bar[q]
            } else {
                ipow_bar[q]
            };
            sbar[q][k] += st.s[q][k] * (2.0 * f);
        }
    }
    for j in 0..kt {
        for k in 0..kr {
            for q in 0..kr {
                let tb = tbar[j][k][q] + sbar[q][k];
                if tb != ZERO {
                    axpy(tb, p.channel(j, q), &mut out_bar[j][k]);
                }
            }
        }
    }
    out_bar
}

/// Loss and exact parameter gradient of one cooperative sample.
pub fn backward_coop<P: CoopChannels + ?Sized>(
    p: &P,
    params: &MlpParams,
    cfg: &CoopRnnConfig,
    init: &[Vec<CVec>],
    loss: CoopLoss,
) -> Result<SampleGradient> {
    let mut caches = Vec::with_capacity(cfg.t);
    let out = run_coop(
        p,
        Some(params),
        cfg,
        CoefficientMode::Learned,
        init,
        Some(&mut caches),
    )?;
    let (value, adj) = match loss {
        CoopLoss::Supervised { label, gamma } => {
            supervised_coop(&out.iterates, label, gamma, true)?
        }
        CoopLoss::Unsupervised => unsupervised_coop(&out.iterates, p),
    };
    let gn: Vec<Vec<f64>> = (0..p.num_tx())
        .map(|j| (0..p.num_rx()).map(|q| norm(p.channel(j, q))).collect())
        .collect();
    let mut grad = params.zeros_like();
    let mut wbar = adj[cfg.t].clone();
    for r in (0..cfg.t).rev() {
        check_finite(wbar.iter().flatten(), r)?;
        wbar = reverse_coop_iter(p, params, &caches[r], &wbar, &mut grad, &gn);
        if r > 0 {
            for (acc, a) in wbar.iter_mut().flatten().zip(adj[r].iter().flatten()) {
                acc.iter_mut().zip(a).for_each(|(x, y)| *x += y);
            }
        }
    }
    if !grad.is_finite() {
        return Err(Error::numerical(
            "non-finite parameter gradient at iteration 0",
        ));
    }
    Ok(SampleGradient {
        loss: value,
        grad,
        wsr: *out.wsr.last().unwrap(),
    })
}
