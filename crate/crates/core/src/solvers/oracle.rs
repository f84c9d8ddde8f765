use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cplx::{norm, CVec, C64};
use crate::error::{Error, Result};
use crate::wsr::{BeamformerSet, IcChannels};

use super::{mrt_init, wmmse_solve, WmmseOptions};

/// Best WMMSE outcome over several starting points.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub wsr: f64,
    pub w: BeamformerSet,
    /// Index of the winning restart (0 is the MRT start).
    pub restart: usize,
}

/// Random full-power starting point.
pub fn random_init<P: IcChannels + ?Sized>(p: &P, rng: &mut ChaCha8Rng) -> BeamformerSet {
    (0..p.num_links())
        .map(|k| {
            let dim = p.channel(k, k).len();
            let v: CVec = (0..dim)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    C64::new(re, im)
                })
                .collect();
            let s = p.power()[k].sqrt() / norm(&v).max(f64::MIN_POSITIVE);
            v.iter().map(|z| z * s).collect()
        })
        .collect()
}

/// Multi-restart WMMSE: the MRT start plus `restarts − 1` random starts,
/// keeping the best final WSR. This is a strong local solution, not a
/// certified global bound.
pub fn upper_oracle<P: IcChannels + ?Sized>(
    p: &P,
    restarts: usize,
    iterations: usize,
    seed: u64,
) -> Result<OracleResult> {
    if restarts == 0 {
        return Err(Error::invalid("oracle needs at least one restart"));
    }
    let opts = WmmseOptions {
        iterations,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<OracleResult> = None;
    for r in 0..restarts {
        let init = if r == 0 {
            mrt_init(p)
        } else {
            random_init(p, &mut rng)
        };
        let t = wmmse_solve(p, &init, &opts)?;
        let v = t.final_wsr();
        if best.as_ref().is_none_or(|b| v > b.wsr) {
            best = Some(OracleResult {
                wsr: v,
                w: t.final_w,
                restart: r,
            });
        }
    }
    Ok(best.unwrap())
}
