//! Classical references: the flowchart Monte Carlo sampler, an exact
//! dynamic program over all discrete histories, and the expected number of
//! flights in an absorbing medium.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qsim::PathDistribution;
use crate::rng;
use crate::transport::{ReactionTiming, RegionSpec, TransportProblem};

/// Hard cap on flights per history in [`mean_flights_uncapped`].
pub const UNCAPPED_FLIGHT_LIMIT: u64 = 1_000_000;

/// Final-position counts from a batch of simulated histories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McTally {
    pub counts: Vec<u64>,
    pub total_shots: u64,
    pub seed: u64,
}

impl McTally {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.total_shots as f64).collect()
    }

    pub fn distribution(&self) -> PathDistribution {
        PathDistribution::new_unchecked(self.frequencies())
    }
}

/// `d = -λ ln η`.
pub fn sample_flight_distance_continuous(lambda: f64, eta: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("mean free path {lambda} must be positive")));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidArgument(format!("uniform draw {eta} must lie in (0, 1]")));
    }
    Ok(-lambda * eta.ln())
}

/// Exponential flight lengths rounded to the nearest integer, with all mass
/// at or beyond `d_max - 0.5` lumped into `d_max`.
pub fn discretize_exponential(lambda: f64, d_max: usize) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("mean free path {lambda} must be positive")));
    }
    if d_max == 0 {
        return Err(Error::InvalidArgument("d_max must be at least 1".into()));
    }
    let survival = |d: f64| (-d / lambda).exp();
    let mut pmf = Vec::with_capacity(d_max + 1);
    pmf.push(-(-0.5 / lambda).exp_m1());
    for k in 1..d_max {
        pmf.push(survival(k as f64 - 0.5) - survival(k as f64 + 0.5));
    }
    pmf.push(survival(d_max as f64 - 0.5));
    Ok(pmf)
}

fn draw_distance<R: Rng>(pmf: &[f64], rng: &mut R) -> u64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (d, p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            return d as u64;
        }
    }
    // Rounding left u above the running sum: take the last supported value.
    pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0) as u64
}

fn absorbed<R: Rng>(region: &RegionSpec, rng: &mut R) -> bool {
    rng.random::<f64>() < region.p_absorb
}

/// One particle history; returns the final position.
pub fn run_history<R: Rng>(problem: &TransportProblem, rng: &mut R) -> u64 {
    let region = |x: u64| &problem.regions[problem.region_of(x)];
    let n = problem.max_flights;
    let mut x = 0u64;
    match problem.reaction_timing {
        ReactionTiming::PreFlight => {
            for m in 1..=n {
                let here = region(x);
                if !(m == 1 && problem.first_flight_always) && absorbed(here, rng) {
                    break;
                }
                x += draw_distance(&here.distance_pmf, rng);
            }
        }
        ReactionTiming::PostFlight => {
            if !problem.first_flight_always && absorbed(region(x), rng) {
                return x;
            }
            for m in 1..=n {
                x += draw_distance(&region(x).distance_pmf, rng);
                if m < n && absorbed(region(x), rng) {
                    break;
                }
            }
        }
    }
    x
}

/// Tallies `shots` histories; history `s` uses stream `(seed, s)`.
pub fn run_tally(problem: &TransportProblem, shots: u64, seed: u64) -> Result<McTally> {
    problem.validate()?;
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    let k = problem.positions();
    let counts = (0..shots)
        .into_par_iter()
        .fold(
            || vec![0u64; k],
            |mut acc, s| {
                acc[run_history(problem, &mut rng::stream(seed, s)) as usize] += 1;
                acc
            },
        )
        .reduce(
            || vec![0u64; k],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(McTally { counts, total_shots: shots, seed })
}

/// Exact final-position distribution by dynamic programming over
/// `(position, alive)`.
pub fn exact_distribution(problem: &TransportProblem) -> Result<PathDistribution> {
    problem.validate()?;
    let size = problem.positions();
    let n = problem.max_flights;
    let region = |x: usize| &problem.regions[problem.region_of(x as u64)];

    let mut alive = vec![0.0; size];
    let mut stopped = vec![0.0; size];
    alive[0] = 1.0;

    let fly = |alive: &[f64]| -> Vec<f64> {
        let mut moved = vec![0.0; size];
        for (x, &mass) in alive.iter().enumerate().filter(|(_, m)| **m > 0.0) {
            for (d, p) in region(x).distance_pmf.iter().enumerate() {
                moved[x + d] += mass * p;
            }
        }
        moved
    };
    let react = |alive: &mut [f64], stopped: &mut [f64]| {
        for x in 0..size {
            let p = region(x).p_absorb;
            stopped[x] += alive[x] * p;
            alive[x] *= 1.0 - p;
        }
    };

    match problem.reaction_timing {
        ReactionTiming::PreFlight => {
            for m in 1..=n {
                if !(m == 1 && problem.first_flight_always) {
                    react(&mut alive, &mut stopped);
                }
                alive = fly(&alive);
            }
        }
        ReactionTiming::PostFlight => {
            if !problem.first_flight_always {
                react(&mut alive, &mut stopped);
            }
            for m in 1..=n {
                alive = fly(&alive);
                if m < n {
                    react(&mut alive, &mut stopped);
                }
            }
        }
    }
    Ok(PathDistribution::new_unchecked(
        alive.iter().zip(&stopped).map(|(a, s)| a + s).collect(),
    ))
}

/// Mean number of flights before absorption, `1 / p_absorb`.
pub fn expected_flights(p_absorb: f64) -> Result<f64> {
    if !(p_absorb > 0.0 && p_absorb <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "p_absorb {p_absorb} must lie in (0, 1]; the flight count diverges at 0"
        )));
    }
    Ok(1.0 / p_absorb)
}

/// Empirical mean flight count in a single infinite region: every history
/// flies, then reacts, until absorbed.
pub fn mean_flights_uncapped(p_absorb: f64, histories: u64, seed: u64) -> Result<f64> {
    expected_flights(p_absorb)?;
    if histories == 0 {
        return Err(Error::InvalidArgument("histories must be at least 1".into()));
    }
    let total: u64 = (0..histories)
        .into_par_iter()
        .map(|h| {
            let mut rng = rng::stream(seed, h);
            let mut flights = 0u64;
            loop {
                flights += 1;
                if rng.random::<f64>() < p_absorb {
                    return Ok(flights);
                }
                if flights >= UNCAPPED_FLIGHT_LIMIT {
                    return Err(Error::InvalidArgument(format!(
                        "history {h} exceeded {UNCAPPED_FLIGHT_LIMIT} flights"
                    )));
                }
            }
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum();
    Ok(total as f64 / histories as f64)
}
