//! Amplitude estimation over the transport circuit.
//!
//! `A = R·F` marks the flag qubit when the final position satisfies a
//! [`Predicate`], so `A|0⟩ = √(1-p)|ψ0⟩ + √p|ψ1⟩`. The Grover operator
//! `Q = A S0 A⁻¹ Sχ` rotates the flag amplitude to `sin((2m+1)θ)` after `m`
//! applications, `θ = asin √p`. Maximum-likelihood amplitude estimation
//! measures the flag after `Q^{m_k} A|0⟩` for a schedule of powers and
//! maximizes the joint likelihood over `θ`.
//!
//! Oracle calls are counted as one per `A` or `A⁻¹`: a shot at power `m`
//! costs `2m + 1` calls.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::{Circuit, Control, Gate};
use crate::error::{Error, Result};
use crate::qsim::{SimConfig, Statevector};
use crate::rng;
use crate::transport::{build_region_flag, TransportCircuit, TransportProblem};

pub const DEFAULT_GRID_POINTS: usize = 100_000;
const REFINE_ITERATIONS: usize = 80;

/// Which final positions set the flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predicate {
    /// `x >= threshold`, threshold a power of two.
    Geq(u64),
    /// `x == value`.
    Eq(u64),
    /// `x >= boundary` of the problem.
    Region2,
}

impl Predicate {
    /// Resolves [`Predicate::Region2`] and checks ranges against `problem`.
    pub fn resolve(&self, problem: &TransportProblem) -> Result<Predicate> {
        let positions = 1u64 << problem.x_qubits;
        match *self {
            Predicate::Region2 => Ok(Predicate::Geq(problem.boundary)),
            Predicate::Geq(t) if !t.is_power_of_two() => {
                Err(Error::InvalidPredicate(format!("geq threshold {t} is not a power of two")))
            }
            Predicate::Geq(t) if t >= positions => Err(Error::InvalidPredicate(format!(
                "geq threshold {t} is not below {positions}"
            ))),
            Predicate::Eq(v) if v >= positions => Err(Error::InvalidPredicate(format!(
                "eq value {v} is not below {positions}"
            ))),
            p => Ok(p),
        }
    }

    pub fn accepts(&self, problem: &TransportProblem, x: u64) -> bool {
        match *self {
            Predicate::Geq(t) => x >= t,
            Predicate::Eq(v) => x == v,
            Predicate::Region2 => x >= problem.boundary,
        }
    }
}

impl FromStr for Predicate {
    type Err = Error;

    /// `geq:K` (K a power of two), `eq:V` or `region2`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidPredicate(format!("`{s}` is not geq:K, eq:V or region2"));
        if s == "region2" {
            return Ok(Predicate::Region2);
        }
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        let value: u64 = arg.parse().map_err(|_| bad())?;
        match kind {
            "geq" if value.is_power_of_two() => Ok(Predicate::Geq(value)),
            "geq" => Err(Error::InvalidPredicate(format!("geq threshold {value} is not a power of two"))),
            "eq" => Ok(Predicate::Eq(value)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Geq(t) => write!(f, "geq:{t}"),
            Predicate::Eq(v) => write!(f, "eq:{v}"),
            Predicate::Region2 => f.write_str("region2"),
        }
    }
}

/// Flips the flag qubit iff the X register satisfies `pred`.
pub fn build_flag_oracle(tc: &TransportCircuit, pred: Predicate) -> Result<Circuit> {
    let n = tc.qubit_count();
    let x = tc.x_register();
    match pred.resolve(tc.problem())? {
        Predicate::Geq(t) => build_region_flag(n, x, t, tc.flag()),
        Predicate::Eq(v) => {
            let controls = x.iter().enumerate().map(|(bit, &q)| {
                if (v >> bit) & 1 == 1 {
                    Control::pos(q)
                } else {
                    Control::neg(q)
                }
            });
            let mut c = Circuit::new(n);
            c.push(Gate::mcx(controls, tc.flag()))?;
            Ok(c)
        }
        Predicate::Region2 => unreachable!("resolved above"),
    }
}

/// The transport circuit followed by the flag oracle.
pub fn build_a_operator(tc: &TransportCircuit, pred: Predicate) -> Result<Circuit> {
    tc.circuit().compose(&build_flag_oracle(tc, pred)?)
}

/// `Q = A S0 A⁻¹ Sχ` (applied right to left), up to global phase.
pub fn build_grover_operator(a: &Circuit, flag: usize) -> Result<Circuit> {
    let n = a.qubit_count();
    if flag >= n {
        return Err(Error::QubitOutOfRange { qubit: flag, qubit_count: n });
    }
    let mut q = Circuit::new(n);
    // Sχ: -1 on flag = |1⟩.
    q.push(Gate::phase(PI, flag))?;
    q.append(&a.inverse())?;
    // S0: -1 on |0…0⟩.
    q.push(Gate::x(0))?;
    q.push(Gate::phase(PI, 0).controlled((1..n).map(Control::neg)))?;
    q.push(Gate::x(0))?;
    q.append(a)?;
    Ok(q)
}

/// Flag probability of `A|0⟩`, read directly from the statevector.
pub fn exact_amplitude(a: &Circuit, flag: usize, config: &SimConfig) -> Result<f64> {
    let mut s = Statevector::zero_state_with(a.qubit_count(), config)?;
    s.apply(a)?;
    s.flag_probability(flag)
}

/// Flag probability after `Q^m A|0⟩` for each `m` in `powers`, computed by
/// applying `Q` incrementally in increasing order of power.
pub fn grover_flag_probabilities(
    a: &Circuit,
    flag: usize,
    powers: &[u64],
    config: &SimConfig,
) -> Result<Vec<f64>> {
    let q = build_grover_operator(a, flag)?;
    let mut order: Vec<usize> = (0..powers.len()).collect();
    order.sort_by_key(|&i| powers[i]);

    let mut state = Statevector::zero_state_with(a.qubit_count(), config)?;
    state.apply(a)?;
    let mut current = 0u64;
    let mut out = vec![0.0; powers.len()];
    for i in order {
        while current < powers[i] {
            state.apply(&q)?;
            current += 1;
        }
        out[i] = state.flag_probability(flag)?;
    }
    Ok(out)
}

/// Result of one amplitude-estimation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QaeEstimate {
    pub p_hat: f64,
    pub theta_hat: f64,
    pub total_oracle_calls: u64,
    pub schedule: Vec<u64>,
    pub shots_per_power: u64,
    pub hits: Vec<u64>,
}

/// Oracle calls for `shots` at each power of `schedule`.
pub fn oracle_calls(schedule: &[u64], shots: u64) -> u64 {
    schedule.iter().map(|m| shots * (2 * m + 1)).sum()
}

/// Parses `m0,m1,...` or `exp:K`, the latter meaning `0, 1, 2, 4, …, 2^K`.
pub fn parse_schedule(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidArgument(format!("bad schedule `{s}`"));
    let schedule = if let Some(k) = s.strip_prefix("exp:") {
        exponential_schedule(k.parse().map_err(|_| bad())?)
    } else {
        s.split(',').map(|m| m.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if schedule.is_empty() {
        return Err(bad());
    }
    Ok(schedule)
}

/// `0, 2^0, 2^1, …, 2^k`.
pub fn exponential_schedule(k: u32) -> Vec<u64> {
    std::iter::once(0).chain((0..=k).map(|i| 1u64 << i)).collect()
}

/// `ln L(θ)` for hit counts `hits[k]` out of `shots[k]` at power `schedule[k]`.
pub fn log_likelihood(theta: f64, schedule: &[u64], shots: &[f64], hits: &[f64]) -> f64 {
    schedule
        .iter()
        .zip(shots)
        .zip(hits)
        .map(|((&m, &s), &h)| {
            let (sin, cos) = ((2 * m + 1) as f64 * theta).sin_cos();
            let mut ll = 0.0;
            if h > 0.0 {
                ll += h * (sin * sin).max(f64::MIN_POSITIVE).ln();
            }
            if s - h > 0.0 {
                ll += (s - h) * (cos * cos).max(f64::MIN_POSITIVE).ln();
            }
            ll
        })
        .sum()
}

/// Argmax of [`log_likelihood`] over `θ ∈ [0, π/2]`: a uniform grid of
/// `grid_points` points, then golden-section refinement between the grid
/// neighbours of the best point.
pub fn maximize_likelihood(schedule: &[u64], shots: &[f64], hits: &[f64], grid_points: usize) -> f64 {
    let grid_points = grid_points.max(3);
    let step = FRAC_PI_2 / (grid_points - 1) as f64;
    let values: Vec<f64> = (0..grid_points)
        .into_par_iter()
        .with_min_len(4096)
        .map(|i| log_likelihood(i as f64 * step, schedule, shots, hits))
        .collect();
    let best = values
        .iter()
        .enumerate()
        .fold(0, |b, (i, &v)| if v > values[b] { i } else { b });

    let f = |t: f64| log_likelihood(t, schedule, shots, hits);
    let (mut lo, mut hi) = (
        best.saturating_sub(1) as f64 * step,
        ((best + 1).min(grid_points - 1)) as f64 * step,
    );
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..REFINE_ITERATIONS {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = f(d);
        }
    }
    let refined = (lo + hi) / 2.0;
    if f(refined) >= values[best] {
        refined
    } else {
        best as f64 * step
    }
}

/// Simulated measurement counts plus likelihood maximization, given the
/// exact flag probability at each power. Counts at schedule index `k` are
/// drawn from stream `(seed, k)`.
pub fn mlqae_from_probabilities(
    probabilities: &[f64],
    schedule: &[u64],
    shots_per_power: u64,
    seed: u64,
    grid_points: usize,
) -> Result<QaeEstimate> {
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("empty schedule".into()));
    }
    if shots_per_power == 0 {
        return Err(Error::InvalidArgument("shots_per_power must be at least 1".into()));
    }
    if probabilities.len() != schedule.len() {
        return Err(Error::InvalidArgument(format!(
            "{} probabilities for a {}-power schedule",
            probabilities.len(),
            schedule.len()
        )));
    }
    let hits: Vec<u64> = probabilities
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let dist = Binomial::new(shots_per_power, p.clamp(0.0, 1.0)).expect("valid binomial");
            dist.sample(&mut rng::stream(seed, k as u64))
        })
        .collect();

    let theta_hat = if hits.iter().all(|&h| h == 0) {
        0.0
    } else if hits.iter().all(|&h| h == shots_per_power) {
        FRAC_PI_2
    } else {
        let shots = vec![shots_per_power as f64; schedule.len()];
        let h: Vec<f64> = hits.iter().map(|&h| h as f64).collect();
        maximize_likelihood(schedule, &shots, &h, grid_points)
    };
    Ok(QaeEstimate {
        p_hat: theta_hat.sin().powi(2).clamp(0.0, 1.0),
        theta_hat,
        total_oracle_calls: oracle_calls(schedule, shots_per_power),
        schedule: schedule.to_vec(),
        shots_per_power,
        hits,
    })
}

/// Maximum-likelihood amplitude estimation of the flag probability of `a`.
pub fn mlqae_estimate(
    a: &Circuit,
    flag: usize,
    schedule: &[u64],
    shots_per_power: u64,
    seed: u64,
    config: &SimConfig,
) -> Result<QaeEstimate> {
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("empty schedule".into()));
    }
    let probabilities = grover_flag_probabilities(a, flag, schedule, config)?;
    mlqae_from_probabilities(&probabilities, schedule, shots_per_power, seed, DEFAULT_GRID_POINTS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{build_transport_circuit, RegionSpec};

    #[test]
    fn predicate_parsing() {
        assert_eq!("geq:4".parse::<Predicate>().unwrap(), Predicate::Geq(4));
        assert_eq!("eq:0".parse::<Predicate>().unwrap(), Predicate::Eq(0));
        assert_eq!("region2".parse::<Predicate>().unwrap(), Predicate::Region2);
        for bad in ["geq:3", "geq:0", "eq:-1", "lt:4", "region3", "geq", ""] {
            assert!(matches!(bad.parse::<Predicate>(), Err(Error::InvalidPredicate(_))), "{bad}");
        }
        for p in [Predicate::Geq(8), Predicate::Eq(3), Predicate::Region2] {
            assert_eq!(p.to_string().parse::<Predicate>().unwrap(), p);
        }
    }

    #[test]
    fn predicate_resolution() {
        let p = TransportProblem::reference();
        assert_eq!(Predicate::Region2.resolve(&p).unwrap(), Predicate::Geq(4));
        assert!(Predicate::Geq(16).resolve(&p).is_err());
        assert!(Predicate::Eq(16).resolve(&p).is_err());
        assert!(Predicate::Geq(6).resolve(&p).is_err());
    }

    #[test]
    fn schedules() {
        assert_eq!(parse_schedule("exp:3").unwrap(), vec![0, 1, 2, 4, 8]);
        assert_eq!(parse_schedule("0, 1,5").unwrap(), vec![0, 1, 5]);
        assert!(parse_schedule("").is_err());
        assert!(parse_schedule("exp:x").is_err());
        assert_eq!(oracle_calls(&[0, 1, 2], 10), 10 + 30 + 50);
    }

    #[test]
    fn eq_oracle_on_origin() {
        let mut p = TransportProblem::reference();
        p.regions = [RegionSpec::new(vec![1.0], 0.25), RegionSpec::new(vec![1.0], 0.4)];
        let tc = build_transport_circuit(&p).unwrap();
        let a = build_a_operator(&tc, Predicate::Eq(0)).unwrap();
        let p1 = exact_amplitude(&a, tc.flag(), &SimConfig::default()).unwrap();
        assert!((p1 - 1.0).abs() < 1e-12);
        let est = mlqae_estimate(&a, tc.flag(), &[0, 1, 2], 50, 3, &SimConfig::default()).unwrap();
        assert_eq!(est.p_hat, 1.0);
    }

    #[test]
    fn likelihood_with_exact_frequencies_recovers_theta() {
        let schedule = exponential_schedule(4);
        for p in [0.05, 0.2, 0.3, 0.5, 0.77, 0.93] {
            let theta = f64::asin(f64::sqrt(p));
            let shots = vec![100.0; schedule.len()];
            let hits: Vec<f64> = schedule
                .iter()
                .map(|&m| 100.0 * ((2 * m + 1) as f64 * theta).sin().powi(2))
                .collect();
            let est = maximize_likelihood(&schedule, &shots, &hits, DEFAULT_GRID_POINTS);
            assert!((est - theta).abs() < FRAC_PI_2 / DEFAULT_GRID_POINTS as f64, "p={p}");
        }
    }

    #[test]
    fn zero_probability_gives_zero_estimate() {
        for seed in 0..5 {
            let e = mlqae_from_probabilities(&[0.0; 4], &[0, 1, 2, 4], 100, seed, 1000).unwrap();
            assert_eq!(e.p_hat, 0.0);
            assert_eq!(e.total_oracle_calls, 100 * (1 + 3 + 5 + 9));
        }
    }

    #[test]
    fn estimate_errors() {
        assert!(mlqae_from_probabilities(&[], &[], 10, 0, 100).is_err());
        assert!(mlqae_from_probabilities(&[0.5], &[0], 0, 0, 100).is_err());
        assert!(mlqae_from_probabilities(&[0.5], &[0, 1], 10, 0, 100).is_err());
    }

    #[test]
    fn classical_limit_of_power_zero() {
        let e = mlqae_from_probabilities(&[0.3], &[0], 1_000_000, 8, DEFAULT_GRID_POINTS).unwrap();
        let mean = e.hits[0] as f64 / 1e6;
        assert!((e.p_hat - mean).abs() < 1e-6);
    }
}
