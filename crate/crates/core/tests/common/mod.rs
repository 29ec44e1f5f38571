#![allow(dead_code)]

use qtransport::rng::stream;
use qtransport::{ReactionTiming, RegionSpec, TransportProblem};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    stream(seed, 0xace)
}

/// Strictly positive pmf of the given length, normalized.
pub fn random_pmf<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Pmf where some entries are exactly zero.
pub fn sparse_pmf<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    loop {
        let raw: Vec<f64> =
            (0..len).map(|_| if rng.random_bool(0.4) { 0.0 } else { rng.random_range(0.01..1.0) }).collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            return raw.into_iter().map(|v| v / total).collect();
        }
    }
}

/// Number of qubits of the transport circuit, flag included.
pub fn circuit_qubits(p: &TransportProblem) -> usize {
    p.x_qubits + 1 + p.max_flights * p.distance_width() + p.reaction_registers() + 2
}

/// A valid random problem whose circuit (with flag) fits in `max_qubits`.
pub fn random_problem<R: Rng>(rng: &mut R, max_qubits: usize) -> TransportProblem {
    loop {
        let x_qubits = rng.random_range(2..=6);
        let max_flights = rng.random_range(1..=4);
        let pmf_len = rng.random_range(2..=4);
        let sparse = rng.random_bool(0.3);
        let mut pmf = || if sparse { sparse_pmf(rng, pmf_len) } else { random_pmf(rng, pmf_len) };
        let regions = [pmf(), pmf()];
        let boundary = 1u64 << rng.random_range(0..x_qubits);
        let p = TransportProblem {
            x_qubits,
            max_flights,
            boundary,
            regions: [
                RegionSpec::new(regions[0].clone(), rng.random_range(0.0..1.0)),
                RegionSpec::new(regions[1].clone(), rng.random_range(0.0..1.0)),
            ],
            first_flight_always: rng.random_bool(0.7),
            reaction_timing: if rng.random_bool(0.5) {
                ReactionTiming::PreFlight
            } else {
                ReactionTiming::PostFlight
            },
        };
        if p.validate().is_ok() && circuit_qubits(&p) <= max_qubits {
            return p;
        }
    }
}
