//! Error-versus-budget experiments comparing classical Monte Carlo with
//! maximum-likelihood amplitude estimation on the same predicate.
//!
//! Budgets are oracle calls: one particle history for Monte Carlo, one
//! application of `A` or `A⁻¹` for amplitude estimation. Repetition `s`
//! uses seed `base_seed + s`.

use rayon::prelude::*;
use serde::Serialize;

use crate::classical::{exact_distribution, run_tally};
use crate::error::{Error, Result};
use crate::qae::{
    build_a_operator, grover_flag_probabilities, mlqae_from_probabilities, oracle_calls, Predicate,
    DEFAULT_GRID_POINTS,
};
use crate::qsim::SimConfig;
use crate::transport::{build_transport_circuit, TransportProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Classical,
    Mlqae,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Classical => "classical",
            Method::Mlqae => "mlqae",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub method: Method,
    pub budget: u64,
    pub rmse: f64,
}

fn rmse(errors: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = errors.fold((0.0, 0usize), |(s, n), e| (s + e * e, n + 1));
    (sum / n as f64).sqrt()
}

fn check_seeds(seeds: u64) -> Result<()> {
    if seeds == 0 {
        return Err(Error::InvalidArgument("seeds must be at least 1".into()));
    }
    Ok(())
}

/// Exact probability of `pred` under the dynamic-programming oracle.
pub fn exact_predicate_probability(problem: &TransportProblem, pred: Predicate) -> Result<f64> {
    let pred = pred.resolve(problem)?;
    Ok(exact_distribution(problem)?.mass_where(|x| pred.accepts(problem, x as u64)))
}

/// RMSE of the Monte Carlo estimate of `pred` at each history budget.
pub fn classical_predicate_rmse(
    problem: &TransportProblem,
    pred: Predicate,
    budgets: &[u64],
    seeds: u64,
    base_seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    check_seeds(seeds)?;
    let pred = pred.resolve(problem)?;
    let exact = exact_predicate_probability(problem, pred)?;
    budgets
        .iter()
        .map(|&budget| {
            let errors = (0..seeds)
                .into_par_iter()
                .map(|s| {
                    let tally = run_tally(problem, budget, base_seed.wrapping_add(s))?;
                    let hits: u64 = tally
                        .counts
                        .iter()
                        .enumerate()
                        .filter(|(x, _)| pred.accepts(problem, *x as u64))
                        .map(|(_, c)| c)
                        .sum();
                    Ok(hits as f64 / budget as f64 - exact)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(ConvergenceRow { method: Method::Classical, budget, rmse: rmse(errors.into_iter()) })
        })
        .collect()
}

/// RMSE of the whole Monte Carlo final-position histogram against the
/// exact distribution, pooled over positions and seeds.
pub fn classical_distribution_rmse(
    problem: &TransportProblem,
    budgets: &[u64],
    seeds: u64,
    base_seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    check_seeds(seeds)?;
    let exact = exact_distribution(problem)?;
    budgets
        .iter()
        .map(|&budget| {
            let errors = (0..seeds)
                .into_par_iter()
                .map(|s| {
                    let freq = run_tally(problem, budget, base_seed.wrapping_add(s))?.frequencies();
                    Ok(freq.iter().enumerate().map(|(x, f)| f - exact.get(x)).collect::<Vec<_>>())
                })
                .collect::<Result<Vec<Vec<f64>>>>()?;
            Ok(ConvergenceRow {
                method: Method::Classical,
                budget,
                rmse: rmse(errors.into_iter().flatten()),
            })
        })
        .collect()
}

/// RMSE of amplitude estimation using the first `j` powers of `schedule`,
/// for every `j`; the budget of each row is its total oracle calls.
pub fn mlqae_rmse(
    problem: &TransportProblem,
    pred: Predicate,
    schedule: &[u64],
    shots_per_power: u64,
    seeds: u64,
    base_seed: u64,
    config: &SimConfig,
) -> Result<Vec<ConvergenceRow>> {
    check_seeds(seeds)?;
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("empty schedule".into()));
    }
    let tc = build_transport_circuit(problem)?;
    let a = build_a_operator(&tc, pred)?;
    let probabilities = grover_flag_probabilities(&a, tc.flag(), schedule, config)?;
    let exact = exact_predicate_probability(problem, pred)?;
    (1..=schedule.len())
        .map(|j| {
            let errors = (0..seeds)
                .map(|s| {
                    let est = mlqae_from_probabilities(
                        &probabilities[..j],
                        &schedule[..j],
                        shots_per_power,
                        base_seed.wrapping_add(s),
                        DEFAULT_GRID_POINTS,
                    )?;
                    Ok(est.p_hat - exact)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(ConvergenceRow {
                method: Method::Mlqae,
                budget: oracle_calls(&schedule[..j], shots_per_power),
                rmse: rmse(errors.into_iter()),
            })
        })
        .collect()
}

/// Least-squares slope of `ln rmse` against `ln budget`.
pub fn loglog_slope(rows: &[ConvergenceRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.rmse > 0.0)
        .map(|r| ((r.budget as f64).ln(), r.rmse.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}
