use crate::cplx::{axpy, dot_h, norm_sqr, CVec, C64, ZERO};

use super::{IcChannels, KAPPA};

/// Per-iteration quantities shared by rates and gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct IcStats {
    /// `y[j][k] = g_jk^H w_j`.
    pub y: Vec<Vec<C64>>,
    /// Received power plus noise, `T_k`.
    pub total: Vec<f64>,
    /// Interference plus noise, `I_k`.
    pub interference: Vec<f64>,
}

pub fn ic_stats<P: IcChannels + ?Sized>(p: &P, w: &[CVec]) -> IcStats {
    let k = p.num_links();
    let y: Vec<Vec<C64>> = (0..k)
        .map(|j| (0..k).map(|u| dot_h(p.channel(j, u), &w[j])).collect())
        .collect();
    let sigma2 = p.sigma2();
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

impl IcStats {
    pub fn sinr(&self, k: usize) -> f64 {
        self.y[k][k].norm_sqr() / self.interference[k]
    }

    pub fn wsr(&self, alpha: &[f64]) -> f64 {
        (0..alpha.len())
            .map(|k| alpha[k] * self.sinr(k).ln_1p())
            .sum::<f64>()
            * std::f64::consts::LOG2_E
    }
}

pub fn sinr<P: IcChannels + ?Sized>(k: usize, w: &[CVec], p: &P) -> f64 {
    let signal = dot_h(p.channel(k, k), &w[k]).norm_sqr();
    let mut inter = p.sigma2()[k];
    for j in 0..p.num_links() {
        if j != k {
            inter += dot_h(p.channel(j, k), &w[j]).norm_sqr();
        }
    }
    signal / inter
}

/// Per-link rates in bits.
pub fn rates<P: IcChannels + ?Sized>(w: &[CVec], p: &P) -> Vec<f64> {
    let s = ic_stats(p, w);
    (0..p.num_links())
        .map(|k| s.sinr(k).ln_1p() * std::f64::consts::LOG2_E)
        .collect()
}

/// Weighted sum rate `Σ α_k log2(1 + SINR_k)`.
pub fn wsr<P: IcChannels + ?Sized>(w: &[CVec], p: &P) -> f64 {
    ic_stats(p, w).wsr(p.alpha())
}

/// Gradient coefficients: `∇_{w_k} R = Σ_j a[k][j] g_kj`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCoeffs {
    pub a: Vec<Vec<C64>>,
}

pub fn grad_coeffs_from_stats(alpha: &[f64], s: &IcStats) -> GradCoeffs {
    let k = alpha.len();
    // c_j is the real factor shared by every a[.][j] with j != owner.
    let cross: Vec<f64> = (0..k)
        .map(|j| -KAPPA * alpha[j] * s.y[j][j].norm_sqr() / (s.total[j] * s.interference[j]))
        .collect();
    let a = (0..k)
        .map(|u| {
            (0..k)
                .map(|j| {
                    if j == u {
                        s.y[u][u] * (KAPPA * alpha[u] / s.total[u])
                    } else {
                        s.y[u][j] * cross[j]
                    }
                })
                .collect()
        })
        .collect();
    GradCoeffs { a }
}

pub fn grad_coeffs_ic<P: IcChannels + ?Sized>(w: &[CVec], p: &P) -> GradCoeffs {
    grad_coeffs_from_stats(p.alpha(), &ic_stats(p, w))
}

/// `Σ_j a[j] g_kj` for BS `k`.
pub fn combine_ic<P: IcChannels + ?Sized>(p: &P, k: usize, a: &[C64]) -> CVec {
    let mut d = vec![ZERO; p.channel(k, k).len()];
    for (j, &aj) in a.iter().enumerate() {
        if aj != ZERO {
            axpy(aj, p.channel(k, j), &mut d);
        }
    }
    d
}

pub fn gradient_from_coeffs<P: IcChannels + ?Sized>(p: &P, c: &GradCoeffs) -> Vec<CVec> {
    (0..p.num_links())
        .map(|k| combine_ic(p, k, &c.a[k]))
        .collect()
}

pub fn gradient_ic<P: IcChannels + ?Sized>(w: &[CVec], p: &P) -> Vec<CVec> {
    gradient_from_coeffs(p, &grad_coeffs_ic(w, p))
}

/// Gradient with respect to a single beamformer `w_k`.
pub fn gradient_block_ic<P: IcChannels + ?Sized>(k: usize, w: &[CVec], p: &P) -> CVec {
    let s = ic_stats(p, w);
    let c = grad_coeffs_from_stats(p.alpha(), &s);
    combine_ic(p, k, &c.a[k])
}

/// Whether every `‖w_k‖² ≤ P_k + slack`.
pub fn is_feasible_ic<P: IcChannels + ?Sized>(w: &[CVec], p: &P, slack: f64) -> bool {
    w.iter()
        .zip(p.power())
        .all(|(v, &pk)| norm_sqr(v) <= pk + slack)
}
