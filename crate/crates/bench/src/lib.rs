//! Fixtures shared by the benchmarks.

use wsrnet::channel::{place_coop_network, place_network, sample_channels};
use wsrnet::transform::{reduce_coop, reduce_ic};
use wsrnet::{ChannelOptions, CoopReducedProblem, ReducedProblem};

/// Interference-channel instance at the default network geometry.
pub fn ic_problem(k: usize, nt: usize, seed: u64) -> ReducedProblem {
    let geom = place_network(k, 1.0, seed).expect("geometry");
    let s = sample_channels(&geom, &vec![nt; k], seed + 1, &ChannelOptions::default())
        .expect("channels");
    reduce_ic(&s).expect("reduction")
}

pub fn coop_problem(k_t: usize, k_r: usize, nt: usize, seed: u64) -> CoopReducedProblem {
    let geom = place_coop_network(k_t, k_r, 1.0, seed).expect("geometry");
    let s = sample_channels(&geom, &vec![nt; k_t], seed + 1, &ChannelOptions::default())
        .expect("channels");
    reduce_coop(&s).expect("reduction")
}
