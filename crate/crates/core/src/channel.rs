//! Synthetic network geometry and Rayleigh/pathloss channel generation.
//!
//! Distances are in km and powers in watts internally; dB and dBm appear
//! only in the conversion helpers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cplx::{CVec, C64};
use crate::error::{Error, Result};

/// Closest a UE may be to a BS when evaluating pathloss (km).
pub const MIN_DISTANCE_KM: f64 = 0.01;
pub const DEFAULT_BANDWIDTH_HZ: f64 = 10e6;
pub const DEFAULT_TX_POWER_DBM: f64 = 38.0;
pub const DEFAULT_NOISE_PSD_DBM_HZ: f64 = -174.0;

/// BS and UE placement. Positions are 2-D coordinates in km.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkGeometry {
    pub bs_positions: Vec<[f64; 2]>,
    pub ue_positions: Vec<[f64; 2]>,
    /// Index of the BS whose cell each UE was dropped in.
    pub serving_bs: Vec<usize>,
    pub half_distance_km: f64,
}

impl NetworkGeometry {
    pub fn num_bs(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn num_ue(&self) -> usize {
        self.ue_positions.len()
    }

    pub fn distance_km(&self, bs: usize, ue: usize) -> f64 {
        let [bx, by] = self.bs_positions[bs];
        let [ux, uy] = self.ue_positions[ue];
        ((bx - ux).powi(2) + (by - uy).powi(2)).sqrt()
    }
}

/// One network realization. `h[j][k]` is the channel from BS `j` to UE `k`
/// and has length `nt[j]`. `alpha` and `sigma2` are indexed by UE, `power`
/// by BS. In the interference-channel scenario the two counts coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    pub h: Vec<Vec<CVec>>,
    pub alpha: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub power: Vec<f64>,
    pub nt: Vec<usize>,
}

/// The cooperative scenario uses the same layout with `K_t` transmitters and
/// `K_r` receivers.
pub type CoopChannelSample = ChannelSample;

impl ChannelSample {
    pub fn num_tx(&self) -> usize {
        self.h.len()
    }

    pub fn num_rx(&self) -> usize {
        self.h.first().map_or(0, |row| row.len())
    }

    /// Checks dimensional consistency and the sign constraints.
    pub fn validate(&self) -> Result<()> {
        let kt = self.num_tx();
        let kr = self.num_rx();
        if kt == 0 || kr == 0 {
            return Err(Error::invalid("channel sample has no links"));
        }
        if self.nt.len() != kt || self.power.len() != kt {
            return Err(Error::invalid("per-BS fields do not match BS count"));
        }
        if self.alpha.len() != kr || self.sigma2.len() != kr {
            return Err(Error::invalid("per-UE fields do not match UE count"));
        }
        for (j, row) in self.h.iter().enumerate() {
            if row.len() != kr {
                return Err(Error::invalid(format!(
                    "channel row {j} has {} entries, expected {kr}",
                    row.len()
                )));
            }
            if row.iter().any(|v| v.len() != self.nt[j]) {
                return Err(Error::invalid(format!(
                    "channel length mismatch for BS {j}"
                )));
            }
        }
        if self.alpha.iter().any(|&a| !(a >= 0.0)) {
            return Err(Error::invalid("rate weights must be nonnegative"));
        }
        if self.sigma2.iter().any(|&s| !(s > 0.0)) || self.power.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::invalid(
                "noise powers and power budgets must be positive",
            ));
        }
        Ok(())
    }
}

/// Generation switches shared by every sample of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelOptions {
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    /// Random rate weights normalized to sum one; otherwise all ones.
    pub weighted: bool,
}

impl Default for ChannelOptions {
    fn default() -> Self {
        ChannelOptions {
            bandwidth_hz: DEFAULT_BANDWIDTH_HZ,
            tx_power_dbm: DEFAULT_TX_POWER_DBM,
            noise_psd_dbm_hz: DEFAULT_NOISE_PSD_DBM_HZ,
            weighted: false,
        }
    }
}

impl ChannelOptions {
    pub fn noise_power_watt(&self) -> f64 {
        dbm_to_watt(self.noise_psd_dbm_hz) * self.bandwidth_hz
    }
}

pub fn pathloss_db(distance_km: f64) -> Result<f64> {
    if !(distance_km > 0.0) {
        return Err(Error::invalid(format!(
            "distance must be positive, got {distance_km}"
        )));
    }
    Ok(128.1 + 37.6 * distance_km.log10())
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Mixes a master seed with an index (splitmix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Axial coordinates of the first `count` cells of a hexagonal lattice in
/// spiral order: center, then ring 1, ring 2, ...
fn hex_spiral(count: usize) -> Vec<(i64, i64)> {
    const DIRS: [(i64, i64); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];
    let mut cells = Vec::with_capacity(count);
    cells.push((0, 0));
    let mut ring = 1i64;
    while cells.len() < count {
        // start at the corner reached by walking `ring` steps along DIRS[4]
        let mut q = DIRS[4].0 * ring;
        let mut r = DIRS[4].1 * ring;
        for dir in DIRS {
            for _ in 0..ring {
                cells.push((q, r));
                q += dir.0;
                r += dir.1;
            }
        }
        ring += 1;
    }
    cells.truncate(count);
    cells
}

/// BS positions on a hexagonal grid with center spacing `2 * half_distance_km`.
pub fn hex_bs_layout(count: usize, half_distance_km: f64) -> Vec<[f64; 2]> {
    let spacing = 2.0 * half_distance_km;
    hex_spiral(count)
        .into_iter()
        .map(|(q, r)| {
            let (q, r) = (q as f64, r as f64);
            [spacing * (q + 0.5 * r), spacing * (3f64.sqrt() / 2.0) * r]
        })
        .collect()
}

fn drop_in_disc(rng: &mut ChaCha8Rng, center: [f64; 2], radius: f64) -> [f64; 2] {
    let rho = radius * rng.random::<f64>().sqrt();
    let theta = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    [center[0] + rho * theta.cos(), center[1] + rho * theta.sin()]
}

/// Hexagonal layout of `k` BSs with one UE dropped uniformly within
/// `half_distance_km` of each.
pub fn place_network(k: usize, half_distance_km: f64, seed: u64) -> Result<NetworkGeometry> {
    place_coop_network(k, k, half_distance_km, seed)
}

/// `k_t` BSs on the hex grid and `k_r` UEs, UE `k` dropped in the cell of BS
/// `k mod k_t`.
pub fn place_coop_network(
    k_t: usize,
    k_r: usize,
    half_distance_km: f64,
    seed: u64,
) -> Result<NetworkGeometry> {
    if k_t == 0 || k_r == 0 {
        return Err(Error::invalid("network needs at least one BS and one UE"));
    }
    if !(half_distance_km > 0.0) {
        return Err(Error::invalid(format!(
            "half distance must be positive, got {half_distance_km}"
        )));
    }
    let bs_positions = hex_bs_layout(k_t, half_distance_km);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let serving_bs: Vec<usize> = (0..k_r).map(|k| k % k_t).collect();
    let ue_positions = serving_bs
        .iter()
        .map(|&j| drop_in_disc(&mut rng, bs_positions[j], half_distance_km))
        .collect();
    Ok(NetworkGeometry {
        bs_positions,
        ue_positions,
        serving_bs,
        half_distance_km,
    })
}

/// Linear-scale power gain of the BS→UE link, distance floored at 10 m.
pub fn link_gain(geom: &NetworkGeometry, bs: usize, ue: usize) -> f64 {
    let s = geom.distance_km(bs, ue).max(MIN_DISTANCE_KM);
    let pl = 128.1 + 37.6 * s.log10();
    10f64.powf(-pl / 10.0)
}

/// Draws `h_jk = sqrt(gain_jk) * z` with `z ~ CN(0, I)`.
pub fn sample_channels(
    geom: &NetworkGeometry,
    nt: &[usize],
    seed: u64,
    opts: &ChannelOptions,
) -> Result<ChannelSample> {
    let kt = geom.num_bs();
    let kr = geom.num_ue();
    if nt.len() != kt {
        return Err(Error::invalid(format!(
            "{} antenna counts given for {kt} BSs",
            nt.len()
        )));
    }
    if nt.iter().any(|&n| n == 0) {
        return Err(Error::invalid("every BS needs at least one antenna"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = (0..kt)
        .map(|j| {
            (0..kr)
                .map(|k| {
                    let amp = link_gain(geom, j, k).sqrt() * std::f64::consts::FRAC_1_SQRT_2;
                    (0..nt[j])
                        .map(|_| {
                            let re: f64 = rng.sample(StandardNormal);
                            let im: f64 = rng.sample(StandardNormal);
                            C64::new(amp * re, amp * im)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let alpha = if opts.weighted {
        let raw: Vec<f64> = (0..kr).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|a| a / total).collect()
    } else {
        vec![1.0; kr]
    };
    Ok(ChannelSample {
        h,
        alpha,
        sigma2: vec![opts.noise_power_watt(); kr],
        power: vec![dbm_to_watt(opts.tx_power_dbm); kt],
        nt: nt.to_vec(),
    })
}
