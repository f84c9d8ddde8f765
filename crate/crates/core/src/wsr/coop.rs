use crate::cplx::{axpy, axpy_conj, dot_h, norm_sqr, CVec, C64, ZERO};

use super::{derotation, CoopChannels, KAPPA};

#[derive(Debug, Clone, PartialEq)]
pub struct CoopStats {
    /// `t[j][k][p] = g_jp^H w_jk`: contribution of BS `j`'s stream for UE `k`
    /// at UE `p`.
    pub t: Vec<Vec<Vec<C64>>>,
    /// Coherent sums `s[p][k] = Σ_j t[j][k][p]`.
    pub s: Vec<Vec<C64>>,
    pub total: Vec<f64>,
    pub interference: Vec<f64>,
}

pub fn coop_stats<P: CoopChannels + ?Sized>(p: &P, w: &[Vec<CVec>]) -> CoopStats {
    let (kt, kr) = (p.num_tx(), p.num_rx());
    let t: Vec<Vec<Vec<C64>>> = (0..kt)
        .map(|j| {
            (0..kr)
                .map(|k| (0..kr).map(|q| dot_h(p.channel(j, q), &w[j][k])).collect())
                .collect()
        })
        .collect();
    let mut s = vec![vec![ZERO; kr]; kr];
    for tj in &t {
        for (k, tjk) in tj.iter().enumerate() {
            for (q, v) in tjk.iter().enumerate() {
                s[q][k] += v;
            }
        }
    }
    let sigma2 = p.sigma2();
    let mut total = vec![0.0; kr];
    let mut interference = vec![0.0; kr];
    for q in 0..kr {
        let mut inter = sigma2[q];
        for l in 0..kr {
            if l != q {
                inter += s[q][l].norm_sqr();
            }
        }
        interference[q] = inter;
        total[q] = inter + s[q][q].norm_sqr();
    }
    CoopStats {
        t,
        s,
        total,
        interference,
    }
}

impl CoopStats {
    pub fn sinr(&self, k: usize) -> f64 {
        self.s[k][k].norm_sqr() / self.interference[k]
    }

    pub fn wsr(&self, alpha: &[f64]) -> f64 {
        (0..alpha.len())
            .map(|k| alpha[k] * self.sinr(k).ln_1p())
            .sum::<f64>()
            * std::f64::consts::LOG2_E
    }
}

pub fn coop_sinr<P: CoopChannels + ?Sized>(k: usize, w: &[Vec<CVec>], p: &P) -> f64 {
    coop_stats(p, w).sinr(k)
}

pub fn coop_wsr<P: CoopChannels + ?Sized>(w: &[Vec<CVec>], p: &P) -> f64 {
    coop_stats(p, w).wsr(p.alpha())
}

/// `∇_{w_jk} R = Σ_p (a[j][k][p] g_jp + b[j][k][p] conj(g_jp))`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoopGradCoeffs {
    pub a: Vec<Vec<Vec<C64>>>,
    pub b: Vec<Vec<Vec<C64>>>,
}

pub fn coop_grad_coeffs_from_stats(kt: usize, alpha: &[f64], st: &CoopStats) -> CoopGradCoeffs {
    let kr = alpha.len();
    let cross: Vec<f64> = (0..kr)
        .map(|q| -KAPPA * alpha[q] * st.s[q][q].norm_sqr() / (st.total[q] * st.interference[q]))
        .collect();
    let per_k: Vec<Vec<C64>> = (0..kr)
        .map(|k| {
            (0..kr)
                .map(|q| {
                    if q == k {
                        st.s[k][k] * (KAPPA * alpha[k] / st.total[k])
                    } else {
                        st.s[q][k] * cross[q]
                    }
                })
                .collect()
        })
        .collect();
    CoopGradCoeffs {
        a: vec![per_k; kt],
        b: vec![vec![vec![ZERO; kr]; kr]; kt],
    }
}

pub fn grad_coeffs_coop<P: CoopChannels + ?Sized>(w: &[Vec<CVec>], p: &P) -> CoopGradCoeffs {
    coop_grad_coeffs_from_stats(p.num_tx(), p.alpha(), &coop_stats(p, w))
}

/// `Σ_q (a[q] g_jq + b[q] conj(g_jq))` for BS `j`.
pub fn combine_coop<P: CoopChannels + ?Sized>(p: &P, j: usize, a: &[C64], b: &[C64]) -> CVec {
    let mut d = vec![ZERO; p.channel(j, 0).len()];
    for q in 0..a.len() {
        if a[q] != ZERO {
            axpy(a[q], p.channel(j, q), &mut d);
        }
        if b[q] != ZERO {
            axpy_conj(b[q], p.channel(j, q), &mut d);
        }
    }
    d
}

pub fn coop_gradient_from_coeffs<P: CoopChannels + ?Sized>(
    p: &P,
    c: &CoopGradCoeffs,
) -> Vec<Vec<CVec>> {
    (0..p.num_tx())
        .map(|j| {
            (0..p.num_rx())
                .map(|k| combine_coop(p, j, &c.a[j][k], &c.b[j][k]))
                .collect()
        })
        .collect()
}

pub fn gradient_coop<P: CoopChannels + ?Sized>(w: &[Vec<CVec>], p: &P) -> Vec<Vec<CVec>> {
    coop_gradient_from_coeffs(p, &grad_coeffs_coop(w, p))
}

/// Applies a common phase per receiver so that `Σ_j g_jk^H w_jk` is real and
/// nonnegative for every `k`.
pub fn coop_phase_rotate<P: CoopChannels + ?Sized>(w: &mut [Vec<CVec>], p: &P) {
    for k in 0..p.num_rx() {
        let rho: C64 = (0..p.num_tx())
            .map(|j| dot_h(p.channel(j, k), &w[j][k]))
            .sum();
        let e = derotation(rho);
        for wj in w.iter_mut() {
            wj[k].iter_mut().for_each(|z| *z *= e);
        }
    }
}

pub fn is_feasible_coop<P: CoopChannels + ?Sized>(w: &[Vec<CVec>], p: &P, slack: f64) -> bool {
    w.iter()
        .zip(p.power())
        .all(|(wj, &pj)| wj.iter().map(|v| norm_sqr(v)).sum::<f64>() <= pj + slack)
}
