//! Logical-qubit accounting.
//!
//! [`full_scale_estimate`] sizes a practical transport circuit that tracks seven
//! 32-bit floating-point variables (3D position, 3D direction, energy) over
//! `n` flights: one register per variable per flight plus a final set, one
//! floating-point adder per variable per flight, one reaction qubit per
//! flight and one progress ancilla. [`circuit_budget`] reports the exact
//! layout of the circuit this crate actually builds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::transport::TransportProblem;

/// Constants behind [`full_scale_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResourceModel {
    /// Tracked state variables.
    pub variables: u64,
    /// Qubits per variable register.
    pub register_bits: u64,
    /// Ancilla qubits per floating-point adder (140 total minus two 32-bit operands).
    pub adder_ancillas: u64,
}

impl Default for ResourceModel {
    fn default() -> Self {
        Self { variables: 7, register_bits: 32, adder_ancillas: 76 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ResourceEstimate {
    pub flights: u64,
    pub register_qubits: u64,
    pub adder_ancilla_qubits: u64,
    pub reaction_qubits: u64,
    pub progress_ancilla: u64,
    pub total: u64,
}

impl ResourceEstimate {
    /// `variables · (n + 1)` registers.
    pub fn register_count(&self, model: &ResourceModel) -> u64 {
        model.variables * (self.flights + 1)
    }

    /// `variables · n` adders.
    pub fn adder_count(&self, model: &ResourceModel) -> u64 {
        model.variables * self.flights
    }
}

/// Estimate under the default [`ResourceModel`]; `total = 757 n + 225`.
pub fn full_scale_estimate(flights: u64) -> Result<ResourceEstimate> {
    estimate_with(flights, &ResourceModel::default())
}

pub fn estimate_with(flights: u64, model: &ResourceModel) -> Result<ResourceEstimate> {
    if flights < 1 {
        return Err(Error::InvalidArgument("flights must be at least 1".into()));
    }
    let register_qubits = model.register_bits * model.variables * (flights + 1);
    let adder_ancilla_qubits = model.adder_ancillas * model.variables * flights;
    let reaction_qubits = flights;
    let progress_ancilla = 1;
    Ok(ResourceEstimate {
        flights,
        register_qubits,
        adder_ancilla_qubits,
        reaction_qubits,
        progress_ancilla,
        total: register_qubits + adder_ancilla_qubits + reaction_qubits + progress_ancilla,
    })
}

/// Qubits per register of the transport circuit for a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CircuitBudget {
    pub position_qubits: usize,
    pub region_ancilla: usize,
    pub distance_width: usize,
    pub distance_qubits: usize,
    pub reaction_qubits: usize,
    pub progress_ancilla: usize,
    /// Everything except the estimation flag.
    pub transport_total: usize,
    pub flag: usize,
    pub total: usize,
}

pub fn circuit_budget(problem: &TransportProblem) -> Result<CircuitBudget> {
    problem.validate()?;
    let n = problem.max_flights;
    // ceil(log2(d_max + 1))
    let distance_width = (problem.d_max() + 1).next_power_of_two().trailing_zeros() as usize;
    let reaction_qubits = if problem.first_flight_always { n - 1 } else { n };
    let transport_total = problem.x_qubits + 1 + n * distance_width + reaction_qubits + 1;
    Ok(CircuitBudget {
        position_qubits: problem.x_qubits,
        region_ancilla: 1,
        distance_width,
        distance_qubits: n * distance_width,
        reaction_qubits,
        progress_ancilla: 1,
        transport_total,
        flag: 1,
        total: transport_total + 1,
    })
}
