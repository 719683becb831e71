//! Shared inputs for the criterion benches.

use ergolab_core::hyperbolic::sample_start;
use ergolab_core::{iterate, make_map, MapModel, MapSpec, OrbitRecord};

pub const MASTER: u64 = 4_242;

pub fn nue() -> MapModel {
    make_map(&MapSpec::NueDeform { a: 0.2 }).expect("valid parameter")
}

pub fn doubling() -> MapModel {
    make_map(&MapSpec::Doubling).expect("valid parameter")
}

/// A Lebesgue-random orbit of length `n`.
pub fn orbit(map: &MapModel, n: usize) -> OrbitRecord {
    let (x, seed) = sample_start(map, MASTER, 0);
    iterate(map, &x, n, seed).expect("orbit")
}
