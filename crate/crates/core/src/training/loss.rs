use crate::cplx::dot_h;
use crate::cplx::{norm_sqr, sub, CVec, C64};
use crate::error::{Error, Result};
use crate::wsr::{
    coop_phase_rotate, coop_wsr, derotation, gradient_coop, gradient_ic, wsr, CoopChannels,
    IcChannels,
};

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid(format!(
            "gamma must lie in [0, 1], got {gamma}"
        )));
    }
    Ok(())
}

/// Weight of iterate `r` (of `0..=t`) in the supervised loss.
fn iterate_weight(r: usize, t: usize, gamma: f64) -> f64 {
    if r == t {
        gamma
    } else if r == 0 {
        0.0
    } else {
        1.0 - gamma
    }
}

/// Rotates every label so that `g_kk^H w_k` is real and nonnegative.
pub fn align_ic_label<P: IcChannels + ?Sized>(p: &P, label: &[CVec]) -> Vec<CVec> {
    label
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let e = derotation(dot_h(p.channel(k, k), w));
            w.iter().map(|z| z * e).collect()
        })
        .collect()
}

pub fn align_coop_label<P: CoopChannels + ?Sized>(p: &P, label: &[Vec<CVec>]) -> Vec<Vec<CVec>> {
    let mut w = label.to_vec();
    coop_phase_rotate(&mut w, p);
    w
}

/// Supervised loss of one sample over the iterates `w^0..w^T`:
/// `(1/2K) Σ_k α_k [γ ‖w*_k − w_k^T‖² + (1−γ) Σ_{r=1}^{T−1} ‖w*_k − w_k^r‖²]`.
pub fn supervised_loss_ic(
    iterates: &[Vec<CVec>],
    label: &[CVec],
    alpha: &[f64],
    gamma: f64,
) -> Result<f64> {
    Ok(supervised_ic(iterates, label, alpha, gamma, false)?.0)
}

pub(crate) fn supervised_ic(
    iterates: &[Vec<CVec>],
    label: &[CVec],
    alpha: &[f64],
    gamma: f64,
    with_adjoint: bool,
) -> Result<(f64, Vec<Vec<CVec>>)> {
    check_gamma(gamma)?;
    if iterates.len() < 2 {
        return Err(Error::invalid(
            "supervised loss needs at least one unrolled iteration",
        ));
    }
    let k = label.len();
    if alpha.len() != k
        || iterates
            .iter()
            .any(|w| w.len() != k || w.iter().zip(label).any(|(a, b)| a.len() != b.len()))
    {
        return Err(Error::invalid(
            "label shape does not match the network output",
        ));
    }
    let t = iterates.len() - 1;
    let mut loss = 0.0;
    let mut adj = Vec::new();
    for (r, w) in iterates.iter().enumerate() {
        let weight = iterate_weight(r, t, gamma);
        let mut adj_r = Vec::new();
        for u in 0..k {
            let diff = sub(&w[u], &label[u]);
            loss += weight * alpha[u] * norm_sqr(&diff);
            if with_adjoint {
                let f = weight * alpha[u] / k as f64;
                adj_r.push(diff.iter().map(|z| z * f).collect::<CVec>());
            }
        }
        adj.push(adj_r);
    }
    Ok((loss / (2.0 * k as f64), adj))
}

/// `−R(w^T)/K`.
pub fn unsupervised_loss_ic<P: IcChannels + ?Sized>(w: &[CVec], p: &P) -> f64 {
    -wsr(w, p) / p.num_links() as f64
}

pub(crate) fn unsupervised_ic<P: IcChannels + ?Sized>(
    iterates: &[Vec<CVec>],
    p: &P,
) -> (f64, Vec<Vec<CVec>>) {
    let k = p.num_links() as f64;
    let last = iterates.last().expect("iterates are never empty");
    let mut adj: Vec<Vec<CVec>> = iterates
        .iter()
        .map(|w| {
            w.iter()
                .map(|v| vec![C64::new(0.0, 0.0); v.len()])
                .collect()
        })
        .collect();
    *adj.last_mut().unwrap() = gradient_ic(last, p)
        .into_iter()
        .map(|g| g.iter().map(|z| -z / k).collect())
        .collect();
    (unsupervised_loss_ic(last, p), adj)
}

/// `(1/2 K_t K_r) Σ_j Σ_k [γ ‖w*_jk − w_jk^T‖² + (1−γ) Σ_{r=1}^{T−1} ‖w*_jk − w_jk^r‖²]`.
pub fn supervised_loss_coop(
    iterates: &[Vec<Vec<CVec>>],
    label: &[Vec<CVec>],
    gamma: f64,
) -> Result<f64> {
    Ok(supervised_coop(iterates, label, gamma, false)?.0)
}

pub(crate) fn supervised_coop(
    iterates: &[Vec<Vec<CVec>>],
    label: &[Vec<CVec>],
    gamma: f64,
    with_adjoint: bool,
) -> Result<(f64, Vec<Vec<Vec<CVec>>>)> {
    check_gamma(gamma)?;
    if iterates.len() < 2 {
        return Err(Error::invalid(
            "supervised loss needs at least one unrolled iteration",
        ));
    }
    let kt = label.len();
    let kr = label.first().map_or(0, |l| l.len());
    let shape_ok = |w: &Vec<Vec<CVec>>| {
        w.len() == kt
            && w.iter().zip(label).all(|(wj, lj)| {
                wj.len() == lj.len() && wj.iter().zip(lj).all(|(a, b)| a.len() == b.len())
            })
    };
    if kr == 0 || label.iter().any(|l| l.len() != kr) || !iterates.iter().all(shape_ok) {
        return Err(Error::invalid(
            "label shape does not match the network output",
        ));
    }
    let t = iterates.len() - 1;
    let n = (kt * kr) as f64;
    let mut loss = 0.0;
    let mut adj = Vec::new();
    for (r, w) in iterates.iter().enumerate() {
        let weight = iterate_weight(r, t, gamma);
        let mut adj_r = Vec::new();
        for (wj, lj) in w.iter().zip(label) {
            let mut row = Vec::new();
            for (a, b) in wj.iter().zip(lj) {
                let diff = sub(a, b);
                loss += weight * norm_sqr(&diff);
                if with_adjoint {
                    row.push(diff.iter().map(|z| z * (weight / n)).collect::<CVec>());
                }
            }
            adj_r.push(row);
        }
        adj.push(adj_r);
    }
    Ok((loss / (2.0 * n), adj))
}

/// `−R(w^T)/K_r`.
pub fn unsupervised_loss_coop<P: CoopChannels + ?Sized>(w: &[Vec<CVec>], p: &P) -> f64 {
    -coop_wsr(w, p) / p.num_rx() as f64
}

pub(crate) fn unsupervised_coop<P: CoopChannels + ?Sized>(
    iterates: &[Vec<Vec<CVec>>],
    p: &P,
) -> (f64, Vec<Vec<Vec<CVec>>>) {
    let kr = p.num_rx() as f64;
    let last = iterates.last().expect("iterates are never empty");
    let mut adj: Vec<Vec<Vec<CVec>>> = iterates
        .iter()
        .map(|w| {
            w.iter()
                .map(|wj| {
                    wj.iter()
                        .map(|v| vec![C64::new(0.0, 0.0); v.len()])
                        .collect()
                })
                .collect()
        })
        .collect();
    *adj.last_mut().unwrap() = gradient_coop(last, p)
        .into_iter()
        .map(|gj| {
            gj.into_iter()
                .map(|g| g.iter().map(|z| -z / kr).collect())
                .collect()
        })
        .collect();
    (unsupervised_loss_coop(last, p), adj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::mrt_init;
    use crate::solvers::testutil::random_problem;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn zero_when_outputs_equal_labels() {
        let label = vec![vec![c(1.0, 2.0), c(0.0, -1.0)], vec![c(0.5, 0.5)]];
        let iters = vec![label.clone(); 4];
        assert_eq!(
            supervised_loss_ic(&iters, &label, &[1.0, 2.0], 0.95).unwrap(),
            0.0
        );
    }

    #[test]
    fn hand_computed_single_link() {
        // K = 1, T = 2, α = 2: (1/2)·2·[γ·|3−1|² + (1−γ)·|1+1i − 1|²]
        let label = vec![vec![c(1.0, 0.0)]];
        let iters = vec![
            vec![vec![c(9.0, 9.0)]],
            vec![vec![c(1.0, 1.0)]],
            vec![vec![c(3.0, 0.0)]],
        ];
        let l = supervised_loss_ic(&iters, &label, &[2.0], 0.75).unwrap();
        assert!((l - (0.75 * 4.0 + 0.25 * 1.0)).abs() < 1e-15);
    }

    #[test]
    fn gamma_one_depends_on_final_iterate_only() {
        let label = vec![vec![c(1.0, 0.0)]];
        let a = vec![
            vec![vec![c(0.0, 0.0)]],
            vec![vec![c(5.0, 1.0)]],
            vec![vec![c(3.0, 0.0)]],
        ];
        let mut b = a.clone();
        b[1][0][0] = c(-7.0, 2.0);
        assert_eq!(
            supervised_loss_ic(&a, &label, &[1.0], 1.0).unwrap(),
            supervised_loss_ic(&b, &label, &[1.0], 1.0).unwrap()
        );
    }

    #[test]
    fn shape_and_gamma_errors() {
        let label = vec![vec![c(1.0, 0.0)]];
        let iters = vec![vec![vec![c(0.0, 0.0), c(0.0, 0.0)]]; 2];
        assert!(supervised_loss_ic(&iters, &label, &[1.0], 0.5).is_err());
        assert!(supervised_loss_ic(&[label.clone(), label.clone()], &label, &[1.0], 1.5).is_err());
    }

    #[test]
    fn unsupervised_matches_wsr() {
        let p = random_problem(3, 3, 1);
        let w = mrt_init(&p);
        assert!((unsupervised_loss_ic(&w, &p) + wsr(&w, &p) / 3.0).abs() < 1e-12);
        let zero: Vec<CVec> = w.iter().map(|v| vec![c(0.0, 0.0); v.len()]).collect();
        assert_eq!(unsupervised_loss_ic(&zero, &p), 0.0);
    }

    #[test]
    fn aligned_labels_are_real() {
        let p = random_problem(3, 3, 2);
        let mut w = mrt_init(&p);
        w[1].iter_mut()
            .for_each(|z| *z *= C64::from_polar(1.0, 1.1));
        let a = align_ic_label(&p, &w);
        for k in 0..3 {
            let v = dot_h(&p.g[k][k], &a[k]);
            assert!(v.im.abs() < 1e-12 && v.re > 0.0);
        }
    }
}
