//! Dimension reduction of the beamforming problems.
//!
//! For the interference channel, BS `k` only needs beamformers in the span of
//! its outgoing channels `H_k = [h_k1 .. h_kK]`. An orthonormal basis
//! `B_k = H_k U_k Λ_k^{-1/2}` of that span comes from the eigendecomposition
//! of `H_k^H H_k`, and all rates can be evaluated on the reduced channels
//! `g_jk = B_j^H h_jk`.
//!
//! The cooperative problem uses the same per-BS basis. The per-(j,k) spans
//! `{h_jk} ∪ {Π⊥_{h_jl} h_jk}` coincide with `span(H_j)` whenever the
//! projections are nonzero, so one basis per BS serves every UE.

use crate::channel::ChannelSample;
use crate::cplx::{dot_h, norm_sqr, CMat, CVec, C64};
use crate::eig::herm_eig;
use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest one are dropped.
pub const EIG_FLOOR_REL: f64 = 1e-12;

/// Reduced interference-channel problem. `g[j][k]` has the reduced
/// dimension of BS `j`; `basis[j]` maps reduced beamformers of BS `j` back to
/// antenna space.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedProblem {
    pub g: Vec<Vec<CVec>>,
    pub basis: Vec<CMat>,
    pub alpha: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub power: Vec<f64>,
    pub eig_floor_applied: Vec<bool>,
}

/// Reduced cooperative problem, `K_t` transmitters by `K_r` receivers.
#[derive(Debug, Clone, PartialEq)]
pub struct CoopReducedProblem {
    pub g: Vec<Vec<CVec>>,
    pub basis: Vec<CMat>,
    pub alpha: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub power: Vec<f64>,
    pub eig_floor_applied: Vec<bool>,
}

impl ReducedProblem {
    /// Builds a problem directly from reduced channels, with identity bases.
    pub fn from_channels(
        g: Vec<Vec<CVec>>,
        alpha: Vec<f64>,
        sigma2: Vec<f64>,
        power: Vec<f64>,
    ) -> Result<Self> {
        let k = g.len();
        if k == 0 || g.iter().any(|row| row.len() != k) {
            return Err(Error::invalid(
                "reduced channels must form a nonempty square array",
            ));
        }
        check_side(k, k, &alpha, &sigma2, &power)?;
        let basis = identity_bases(&g)?;
        Ok(ReducedProblem {
            g,
            basis,
            alpha,
            sigma2,
            power,
            eig_floor_applied: vec![false; k],
        })
    }

    pub fn num_links(&self) -> usize {
        self.g.len()
    }

    /// Reduced dimension of BS `k`.
    pub fn dim(&self, k: usize) -> usize {
        self.basis[k].cols
    }
}

impl CoopReducedProblem {
    pub fn from_channels(
        g: Vec<Vec<CVec>>,
        alpha: Vec<f64>,
        sigma2: Vec<f64>,
        power: Vec<f64>,
    ) -> Result<Self> {
        let kt = g.len();
        let kr = g.first().map_or(0, |r| r.len());
        if kt == 0 || kr == 0 || g.iter().any(|row| row.len() != kr) {
            return Err(Error::invalid(
                "reduced channels must form a nonempty rectangular array",
            ));
        }
        check_side(kt, kr, &alpha, &sigma2, &power)?;
        let basis = identity_bases(&g)?;
        Ok(CoopReducedProblem {
            g,
            basis,
            alpha,
            sigma2,
            power,
            eig_floor_applied: vec![false; kt],
        })
    }

    pub fn num_tx(&self) -> usize {
        self.g.len()
    }

    pub fn num_rx(&self) -> usize {
        self.g[0].len()
    }

    pub fn dim(&self, j: usize) -> usize {
        self.basis[j].cols
    }

    /// Lifting basis of the pair `(j, k)`; shared by every `k` of BS `j`.
    pub fn basis_for(&self, j: usize, _k: usize) -> &CMat {
        &self.basis[j]
    }
}

fn check_side(kt: usize, kr: usize, alpha: &[f64], sigma2: &[f64], power: &[f64]) -> Result<()> {
    if alpha.len() != kr || sigma2.len() != kr || power.len() != kt {
        return Err(Error::invalid(
            "weight, noise or power vector has the wrong length",
        ));
    }
    if sigma2.iter().any(|&s| !(s > 0.0))
        || power.iter().any(|&p| !(p > 0.0))
        || alpha.iter().any(|&a| !(a >= 0.0))
    {
        return Err(Error::invalid(
            "noise and power must be positive, weights nonnegative",
        ));
    }
    Ok(())
}

fn identity_bases(g: &[Vec<CVec>]) -> Result<Vec<CMat>> {
    g.iter()
        .enumerate()
        .map(|(j, row)| {
            let d = row[0].len();
            if row.iter().any(|v| v.len() != d) {
                return Err(Error::invalid(format!(
                    "reduced channels of BS {j} differ in length"
                )));
            }
            Ok(CMat::identity(d))
        })
        .collect()
}

/// Orthonormal basis of the column span of `h`, plus whether any eigenvalue
/// was floored.
fn span_basis(h: &CMat) -> Result<(CMat, bool)> {
    let (u, lambda) = herm_eig(&h.gram())?;
    let lmax = lambda.first().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..lambda.len())
        .filter(|&i| lambda[i] > EIG_FLOOR_REL * lmax && lambda[i] > 0.0)
        .collect();
    let floored = keep.len() < lambda.len();
    let mut scaled = CMat::zeros(u.rows, keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        let s = 1.0 / lambda[src].sqrt();
        for i in 0..u.rows {
            scaled[(i, dst)] = u[(i, src)] * s;
        }
    }
    Ok((h.matmul(&scaled), floored))
}

fn reduced_channels(sample: &ChannelSample, basis: &[CMat]) -> Vec<Vec<CVec>> {
    sample
        .h
        .iter()
        .zip(basis)
        .map(|(row, b)| row.iter().map(|h| b.adjoint_matvec(h)).collect())
        .collect()
}

fn check_nonzero(sample: &ChannelSample) -> Result<()> {
    for (j, row) in sample.h.iter().enumerate() {
        for (k, h) in row.iter().enumerate() {
            if norm_sqr(h) == 0.0 {
                return Err(Error::DegenerateChannel { bs: j, ue: k });
            }
        }
    }
    Ok(())
}

fn bs_bases(sample: &ChannelSample) -> Result<(Vec<CMat>, Vec<bool>)> {
    let mut bases = Vec::with_capacity(sample.num_tx());
    let mut floored = Vec::with_capacity(sample.num_tx());
    for row in &sample.h {
        let cols: Vec<&[C64]> = row.iter().map(|v| v.as_slice()).collect();
        let (b, f) = span_basis(&CMat::from_columns(&cols))?;
        bases.push(b);
        floored.push(f);
    }
    Ok((bases, floored))
}

/// Reduces an interference-channel sample (`K` BSs, `K` UEs).
pub fn reduce_ic(sample: &ChannelSample) -> Result<ReducedProblem> {
    sample.validate()?;
    if sample.num_tx() != sample.num_rx() {
        return Err(Error::invalid(
            "interference channel needs as many BSs as UEs",
        ));
    }
    check_nonzero(sample)?;
    let (basis, eig_floor_applied) = bs_bases(sample)?;
    Ok(ReducedProblem {
        g: reduced_channels(sample, &basis),
        basis,
        alpha: sample.alpha.clone(),
        sigma2: sample.sigma2.clone(),
        power: sample.power.clone(),
        eig_floor_applied,
    })
}

/// Reduces a cooperative sample (`K_t` BSs, `K_r` UEs).
pub fn reduce_coop(sample: &ChannelSample) -> Result<CoopReducedProblem> {
    sample.validate()?;
    check_nonzero(sample)?;
    let (basis, eig_floor_applied) = bs_bases(sample)?;
    Ok(CoopReducedProblem {
        g: reduced_channels(sample, &basis),
        basis,
        alpha: sample.alpha.clone(),
        sigma2: sample.sigma2.clone(),
        power: sample.power.clone(),
        eig_floor_applied,
    })
}

/// The matrix `H_jk` whose columns are `h_jk` (slot `k`) and the projections
/// `Π⊥_{h_jl} h_jk` (slot `l`). The returned flags mark slots whose
/// projector degenerated to the identity because `h_jl` is zero.
pub fn coop_projected_channels(sample: &ChannelSample, j: usize, k: usize) -> (CMat, Vec<bool>) {
    let row = &sample.h[j];
    let own = &row[k];
    let mut flags = vec![false; row.len()];
    let cols: Vec<CVec> = row
        .iter()
        .enumerate()
        .map(|(l, hl)| {
            if l == k {
                return own.clone();
            }
            let n2 = norm_sqr(hl);
            if n2 == 0.0 {
                flags[l] = true;
                return own.clone();
            }
            let c = dot_h(hl, own) / n2;
            own.iter().zip(hl).map(|(a, b)| a - c * b).collect()
        })
        .collect();
    let refs: Vec<&[C64]> = cols.iter().map(|c| c.as_slice()).collect();
    (CMat::from_columns(&refs), flags)
}

fn lift(basis: &[CMat], w: &[CVec]) -> Result<Vec<CVec>> {
    if basis.len() != w.len() {
        return Err(Error::invalid(format!(
            "expected {} beamformers, got {}",
            basis.len(),
            w.len()
        )));
    }
    basis
        .iter()
        .zip(w)
        .enumerate()
        .map(|(k, (b, wk))| {
            if b.cols != wk.len() {
                return Err(Error::invalid(format!(
                    "beamformer {k} has length {}, basis has {}",
                    wk.len(),
                    b.cols
                )));
            }
            Ok(b.matvec(wk))
        })
        .collect()
}

/// Maps reduced beamformers to antenna space: `v_k = B_k w_k`.
pub fn lift_ic(problem: &ReducedProblem, w: &[CVec]) -> Result<Vec<CVec>> {
    lift(&problem.basis, w)
}

/// Maps reduced cooperative beamformers `w[j][k]` to antenna space.
pub fn lift_coop(problem: &CoopReducedProblem, w: &[Vec<CVec>]) -> Result<Vec<Vec<CVec>>> {
    if w.len() != problem.num_tx() {
        return Err(Error::invalid(format!(
            "expected {} BS blocks, got {}",
            problem.num_tx(),
            w.len()
        )));
    }
    w.iter()
        .enumerate()
        .map(|(j, row)| {
            if row.len() != problem.num_rx() {
                return Err(Error::invalid(format!(
                    "BS {j} has {} beamformers, expected {}",
                    row.len(),
                    problem.num_rx()
                )));
            }
            lift(&vec![problem.basis[j].clone(); row.len()], row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{place_coop_network, place_network, sample_channels, ChannelOptions};
    use crate::cplx::{norm, ZERO};

    fn sample(k: usize, nt: usize, seed: u64) -> ChannelSample {
        let g = place_network(k, 1.0, seed).unwrap();
        sample_channels(&g, &vec![nt; k], seed + 1, &ChannelOptions::default()).unwrap()
    }

    fn rand_vec(n: usize, seed: u64) -> CVec {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    }

    #[test]
    fn single_link_is_mrt() {
        let s = sample(1, 4, 3);
        let p = reduce_ic(&s).unwrap();
        let h = &s.h[0][0];
        assert_eq!(p.g[0][0].len(), 1);
        assert!((p.g[0][0][0].re - norm(h)).abs() <= 1e-12 * norm(h));
        assert!(p.g[0][0][0].im.abs() <= 1e-12 * norm(h));
        let v = lift_ic(&p, &[vec![C64::new(2.0, 0.0)]]).unwrap();
        for (a, b) in v[0].iter().zip(h) {
            assert!((a - b * (2.0 / norm(h))).norm() < 1e-12);
        }
    }

    #[test]
    fn channels_consistent_with_basis() {
        let s = sample(4, 6, 9);
        let p = reduce_ic(&s).unwrap();
        for j in 0..4 {
            for k in 0..4 {
                let direct = p.basis[j].adjoint_matvec(&s.h[j][k]);
                let scale = norm(&s.h[j][k]);
                for (a, b) in direct.iter().zip(&p.g[j][k]) {
                    assert!((a - b).norm() <= 1e-10 * scale);
                }
                assert!((norm(&p.g[j][k]) - scale).abs() <= 1e-10 * scale);
            }
        }
        assert_eq!(p.eig_floor_applied, vec![false; 4]);
    }

    #[test]
    fn lift_preserves_norm() {
        let s = sample(5, 8, 21);
        let p = reduce_ic(&s).unwrap();
        let w: Vec<CVec> = (0..5).map(|k| rand_vec(5, k as u64)).collect();
        let v = lift_ic(&p, &w).unwrap();
        for (a, b) in v.iter().zip(&w) {
            assert!((norm(a) - norm(b)).abs() <= 1e-10 * norm(b));
        }
        let zero = lift_ic(&p, &vec![vec![ZERO; 5]; 5]).unwrap();
        assert!(zero.iter().flatten().all(|z| *z == ZERO));
    }

    #[test]
    fn orthonormal_channels_pass_through() {
        // Columns of the 3x3 identity as channels of every BS.
        let e = |i: usize| {
            let mut v = vec![ZERO; 3];
            v[i] = C64::new(1.0, 0.0);
            v
        };
        let s = ChannelSample {
            h: (0..3).map(|_| (0..3).map(e).collect()).collect(),
            alpha: vec![1.0; 3],
            sigma2: vec![1.0; 3],
            power: vec![1.0; 3],
            nt: vec![3; 3],
        };
        let p = reduce_ic(&s).unwrap();
        for j in 0..3 {
            for k in 0..3 {
                assert!(p.g[j][k]
                    .iter()
                    .zip(e(k))
                    .all(|(a, b)| (a - b).norm() < 1e-14));
            }
        }
    }

    #[test]
    fn fewer_antennas_than_links_truncates() {
        let s = sample(7, 3, 5);
        let p = reduce_ic(&s).unwrap();
        for k in 0..7 {
            assert_eq!(p.dim(k), 3);
            assert!(p.eig_floor_applied[k]);
            let b = &p.basis[k];
            assert!(b.adjoint().matmul(b).sub(&CMat::identity(3)).max_abs() < 1e-8);
        }
    }

    #[test]
    fn zero_channel_is_degenerate() {
        let mut s = sample(3, 4, 1);
        s.h[2][1] = vec![ZERO; 4];
        assert!(matches!(
            reduce_ic(&s),
            Err(Error::DegenerateChannel { bs: 2, ue: 1 })
        ));
        assert!(matches!(
            reduce_coop(&s),
            Err(Error::DegenerateChannel { bs: 2, ue: 1 })
        ));
    }

    #[test]
    fn coop_single_receiver() {
        let g = place_coop_network(2, 1, 1.0, 4).unwrap();
        let s = sample_channels(&g, &[4, 4], 5, &ChannelOptions::default()).unwrap();
        let p = reduce_coop(&s).unwrap();
        for j in 0..2 {
            assert_eq!(p.g[j][0].len(), 1);
            assert!((p.g[j][0][0].norm() - norm(&s.h[j][0])).abs() <= 1e-12 * norm(&s.h[j][0]));
        }
    }

    #[test]
    fn coop_projection_identity_on_orthogonal_channels() {
        let mut h1 = vec![ZERO; 3];
        h1[0] = C64::new(0.0, 2.0);
        let mut h2 = vec![ZERO; 3];
        h2[1] = C64::new(1.0, 1.0);
        let s = ChannelSample {
            h: vec![vec![h1.clone(), h2.clone()]],
            alpha: vec![1.0; 2],
            sigma2: vec![1.0; 2],
            power: vec![1.0],
            nt: vec![3],
        };
        let (m, flags) = coop_projected_channels(&s, 0, 0);
        assert_eq!(m.column(0), h1);
        assert_eq!(m.column(1), h1);
        assert_eq!(flags, vec![false, false]);
        assert!(dot_h(&m.column(0), &h2).norm() == 0.0);

        let mut z = s.clone();
        z.h[0][1] = vec![ZERO; 3];
        let (_, flags) = coop_projected_channels(&z, 0, 0);
        assert_eq!(flags, vec![false, true]);
    }

    #[test]
    fn coop_basis_spans_projected_channels() {
        let g = place_coop_network(3, 3, 1.0, 8).unwrap();
        let s = sample_channels(&g, &[6, 6, 6], 9, &ChannelOptions::default()).unwrap();
        let p = reduce_coop(&s).unwrap();
        for j in 0..3 {
            let b = &p.basis[j];
            for k in 0..3 {
                let (m, _) = coop_projected_channels(&s, j, k);
                for col in 0..3 {
                    let x = m.column(col);
                    let coeff = b.adjoint_matvec(&x);
                    let back = b.matvec(&coeff);
                    let resid = norm(&crate::cplx::sub(&x, &back));
                    assert!(resid <= 1e-9 * norm(&x));
                }
            }
        }
    }

    #[test]
    fn lift_dimension_mismatch() {
        let p = reduce_ic(&sample(2, 4, 2)).unwrap();
        assert!(lift_ic(&p, &[vec![ZERO; 2]]).is_err());
        assert!(lift_ic(&p, &[vec![ZERO; 3], vec![ZERO; 2]]).is_err());
    }
}
