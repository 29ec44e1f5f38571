//! Quantum circuits for a simplified one-dimensional radiation transport
//! calculation.
//!
//! A particle starts at `x = 0` and performs up to `n` integer-length
//! forward flights through two regions. Each flight distance and each
//! absorb/scatter reaction is drawn from the region the particle currently
//! occupies. The crate provides:
//!
//! - [`circuit`]: a small gate-level IR with polarity-tagged controls,
//!   inversion and control-wrapping;
//! - [`qsim`]: a dense statevector engine;
//! - [`transport`]: synthesis of the transport circuit (distribution
//!   loaders, region comparator, reaction rotations, progress flag and a
//!   Fourier-basis controlled adder);
//! - [`classical`]: the flowchart Monte Carlo sampler and an exact
//!   dynamic-programming oracle;
//! - [`qae`]: predicate oracles, the Grover operator and maximum-likelihood
//!   amplitude estimation;
//! - [`resources`]: logical-qubit accounting.

pub mod circuit;
pub mod classical;
pub mod convergence;
pub mod error;
pub mod qae;
pub mod qsim;
pub mod resources;
pub mod rng;
pub mod transport;

pub use circuit::{Circuit, Control, Gate, GateKind, Polarity};
pub use error::{Error, Result};
pub use qsim::{PathDistribution, SimConfig, Statevector};
pub use transport::{ReactionTiming, RegionSpec, TransportCircuit, TransportProblem};
