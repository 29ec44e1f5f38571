//! Synthesis of the transport circuit.
//!
//! Register layout (LSB-first within each register):
//!
//! ```text
//! X        position, x_qubits wide, starts at |0⟩
//! AncR     region ancilla, |1⟩ while x >= boundary
//! D1..Dn   flight distances, ceil(log2(d_max + 1)) wide
//! R1..Rn   reaction outcomes, |1⟩ = scatter (R1 omitted when the first
//!          flight always happens)
//! AncP     progress ancilla, AND of all prior reactions
//! flag     reserved for the amplitude-estimation predicate
//! ```
//!
//! Flight `m` applies: region flag onto AncR, load `Dm`/`Rm` from the region
//! selected by AncR, uncompute AncR, compute AncP from `R1..Rm`, add `Dm`
//! into X controlled on AncP, then recompute AncP back to |0⟩. Without the
//! uncompute, chaining the progress gates across flights would leave
//! `AND(r1..r_{m-1}) ⊕ AND(r1..r_m)` in AncP.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Control, Gate};
use crate::error::{Error, Result};
use crate::qsim::{PathDistribution, SimConfig, Statevector};

pub const X_REGISTER: &str = "X";
pub const ANC_R: &str = "AncR";
pub const ANC_P: &str = "AncP";
pub const FLAG: &str = "flag";

const PMF_TOLERANCE: f64 = 1e-9;

// Above this many high bits the region flag uses one negated MCT instead of
// the 2^k - 1 inclusion-exclusion terms.
const MAX_INCLUSION_EXCLUSION_BITS: usize = 4;

/// Which position selects the region used for the absorb/scatter split.
///
/// `PreFlight` reads it just before the flight it gates (the circuit's
/// order); `PostFlight` reads it right after the preceding move (the
/// flowchart's order). Both read the same position, so the two produce the
/// same history distribution; they are kept as separate code paths in the
/// classical references to make that checkable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionTiming {
    #[default]
    PreFlight,
    PostFlight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub distance_pmf: Vec<f64>,
    pub p_absorb: f64,
}

impl RegionSpec {
    pub fn new(distance_pmf: Vec<f64>, p_absorb: f64) -> Self {
        Self { distance_pmf, p_absorb }
    }

    pub fn p_scatter(&self) -> f64 {
        1.0 - self.p_absorb
    }

    pub fn validate(&self) -> Result<()> {
        validate_pmf(&self.distance_pmf)?;
        if !(0.0..=1.0).contains(&self.p_absorb) {
            return Err(Error::InvalidProblem(format!(
                "p_absorb {} outside [0, 1]",
                self.p_absorb
            )));
        }
        Ok(())
    }
}

fn validate_pmf(pmf: &[f64]) -> Result<()> {
    if pmf.is_empty() {
        return Err(Error::InvalidProblem("empty distance pmf".into()));
    }
    if let Some(p) = pmf.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::InvalidProblem(format!("pmf entry {p} is not a probability")));
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > PMF_TOLERANCE {
        return Err(Error::InvalidProblem(format!("pmf sums to {total}, not 1")));
    }
    Ok(())
}

fn default_true() -> bool {
    true
}

/// Two-region transport problem. Region 1 is `x < boundary`, region 2 is
/// `x >= boundary`; particles start at `x = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportProblem {
    pub x_qubits: usize,
    pub max_flights: usize,
    pub boundary: u64,
    pub regions: [RegionSpec; 2],
    #[serde(default = "default_true")]
    pub first_flight_always: bool,
    #[serde(default)]
    pub reaction_timing: ReactionTiming,
}

impl TransportProblem {
    /// Two regions split at x = 4, three flights, 4-bit position.
    pub fn reference() -> Self {
        Self {
            x_qubits: 4,
            max_flights: 3,
            boundary: 4,
            regions: [
                RegionSpec::new(vec![0.3, 0.4, 0.2, 0.1], 0.25),
                RegionSpec::new(vec![0.4, 0.4, 0.2, 0.0], 0.40),
            ],
            first_flight_always: true,
            reaction_timing: ReactionTiming::PreFlight,
        }
    }

    /// Parses the JSON problem schema. Malformed documents and unknown
    /// fields give [`Error::Parse`]; well-formed documents that break a
    /// problem invariant give [`Error::InvalidProblem`].
    pub fn from_json(text: &str) -> Result<Self> {
        let problem: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        problem.validate()?;
        Ok(problem)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_qubits == 0 || self.x_qubits > 62 {
            return Err(Error::InvalidProblem(format!(
                "x_qubits = {} must be in 1..=62",
                self.x_qubits
            )));
        }
        if self.max_flights == 0 {
            return Err(Error::InvalidProblem("max_flights must be at least 1".into()));
        }
        for r in &self.regions {
            r.validate()?;
        }
        if self.regions[0].distance_pmf.len() != self.regions[1].distance_pmf.len() {
            return Err(Error::InvalidProblem("region pmfs differ in length".into()));
        }
        let positions = 1u64 << self.x_qubits;
        if !self.boundary.is_power_of_two() || self.boundary >= positions {
            return Err(Error::InvalidProblem(format!(
                "boundary {} must be a power of two below {positions}",
                self.boundary
            )));
        }
        let reach = (self.max_flights as u128) * (self.d_max() as u128);
        if reach >= positions as u128 {
            return Err(Error::InvalidProblem(format!(
                "{} flights of up to {} can reach {reach}, which overflows a {}-qubit position",
                self.max_flights,
                self.d_max(),
                self.x_qubits
            )));
        }
        Ok(())
    }

    pub fn d_max(&self) -> usize {
        self.regions[0].distance_pmf.len() - 1
    }

    /// Width of each distance register, `ceil(log2(d_max + 1))`.
    pub fn distance_width(&self) -> usize {
        bits_for(self.d_max())
    }

    pub fn positions(&self) -> usize {
        1 << self.x_qubits
    }

    /// Index (0 or 1) of the region containing `x`.
    pub fn region_of(&self, x: u64) -> usize {
        usize::from(x >= self.boundary)
    }

    /// Number of reaction registers in the circuit.
    pub fn reaction_registers(&self) -> usize {
        if self.first_flight_always {
            self.max_flights - 1
        } else {
            self.max_flights
        }
    }
}

/// Bits needed to hold every value in `0..=max`.
pub(crate) fn bits_for(max: usize) -> usize {
    (usize::BITS - max.leading_zeros()) as usize
}

/// The built transport circuit together with its qubit layout.
#[derive(Debug, Clone)]
pub struct TransportCircuit {
    circuit: Circuit,
    problem: TransportProblem,
    x: Vec<usize>,
    anc_r: usize,
    anc_p: usize,
    flag: usize,
    distances: Vec<Vec<usize>>,
    reactions: Vec<Option<usize>>,
}

impl TransportCircuit {
    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn problem(&self) -> &TransportProblem {
        &self.problem
    }

    pub fn qubit_count(&self) -> usize {
        self.circuit.qubit_count()
    }

    pub fn x_register(&self) -> &[usize] {
        &self.x
    }

    pub fn anc_r(&self) -> usize {
        self.anc_r
    }

    pub fn anc_p(&self) -> usize {
        self.anc_p
    }

    pub fn flag(&self) -> usize {
        self.flag
    }

    /// Distance register of flight `m` (1-based).
    pub fn distance_register(&self, m: usize) -> &[usize] {
        &self.distances[m - 1]
    }

    /// Reaction qubit of flight `m` (1-based), absent for an always-taken
    /// first flight.
    pub fn reaction_qubit(&self, m: usize) -> Option<usize> {
        self.reactions[m - 1]
    }

    /// Runs the circuit on |0…0⟩.
    pub fn simulate(&self, config: &SimConfig) -> Result<Statevector> {
        let mut state = Statevector::zero_state_with(self.qubit_count(), config)?;
        state.apply(&self.circuit)?;
        Ok(state)
    }

    /// Final-position distribution read from the X register.
    pub fn position_distribution(&self, config: &SimConfig) -> Result<PathDistribution> {
        self.simulate(config)?.marginal(&self.x)
    }
}

/// Loader for a standalone `width`-qubit register (qubits `0..width`).
pub fn build_distribution_loader(pmf: &[f64], width: usize) -> Result<Circuit> {
    let qubits: Vec<usize> = (0..width).collect();
    distribution_loader(width, pmf, &qubits)
}

/// Prepares `Σ_d √pmf(d) |d⟩` on `qubits` from |0…0⟩.
///
/// A binary tree of Y rotations, most significant bit first: the rotation
/// on bit `b` under prefix `p` (the already-fixed higher bits, applied as
/// polarity controls) splits the prefix's mass between its `b = 0` and
/// `b = 1` halves with angle `2 acos √(mass(p, 0) / mass(p))`.
pub fn distribution_loader(qubit_count: usize, pmf: &[f64], qubits: &[usize]) -> Result<Circuit> {
    validate_pmf(pmf)?;
    let width = qubits.len();
    if width >= usize::BITS as usize || pmf.len() > 1 << width {
        return Err(Error::InvalidArgument(format!(
            "{} pmf entries do not fit in {width} qubits",
            pmf.len()
        )));
    }
    let mass = |lo: usize, hi: usize| -> f64 {
        pmf.get(lo.min(pmf.len())..hi.min(pmf.len())).map_or(0.0, |s| s.iter().sum())
    };
    let mut circuit = Circuit::new(qubit_count);
    for bit in (0..width).rev() {
        let span = 1usize << (bit + 1);
        for prefix in (0..1usize << (width - 1 - bit)).rev() {
            let lo = prefix * span;
            let total = mass(lo, lo + span);
            let low = mass(lo, lo + span / 2);
            let angle = if total > 0.0 {
                2.0 * (low / total).clamp(0.0, 1.0).sqrt().acos()
            } else {
                0.0
            };
            let controls = (bit + 1..width).map(|j| {
                if (lo >> j) & 1 == 1 {
                    Control::pos(qubits[j])
                } else {
                    Control::neg(qubits[j])
                }
            });
            circuit.push(Gate::ry(angle, qubits[bit]).controlled(controls))?;
        }
    }
    Ok(circuit)
}

/// Flips `anc` iff the value of `x` is at least `boundary` (a power of two),
/// i.e. iff any bit of `x` at or above `log2(boundary)` is set.
///
/// For up to four high bits this is the inclusion-exclusion expansion
/// `a ∨ b = a ⊕ b ⊕ ab` (two CNOTs and a Toffoli for two bits); wider
/// registers use `X(anc)` followed by an MCT on the negated high bits.
pub fn build_region_flag(qubit_count: usize, x: &[usize], boundary: u64, anc: usize) -> Result<Circuit> {
    if !boundary.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("boundary {boundary} is not a power of two")));
    }
    let k = boundary.trailing_zeros() as usize;
    if k >= x.len() {
        return Err(Error::InvalidArgument(format!(
            "boundary {boundary} is not below 2^{}",
            x.len()
        )));
    }
    if x.contains(&anc) {
        return Err(Error::InvalidArgument("region ancilla overlaps the position register".into()));
    }
    let high = &x[k..];
    let mut circuit = Circuit::new(qubit_count);
    if high.len() <= MAX_INCLUSION_EXCLUSION_BITS {
        // Subsets ordered by size, higher bits first within a size.
        let mut subsets: Vec<u32> = (1u32..1 << high.len()).collect();
        subsets.sort_by_key(|s| (s.count_ones(), std::cmp::Reverse(*s)));
        for s in subsets {
            let controls = (0..high.len()).rev().filter(|i| s >> i & 1 == 1).map(|i| Control::pos(high[i]));
            circuit.push(Gate::mcx(controls, anc))?;
        }
    } else {
        circuit.push(Gate::x(anc))?;
        circuit.push(Gate::mcx(high.iter().map(|&q| Control::neg(q)), anc))?;
    }
    Ok(circuit)
}

/// Rotates `r` so its |1⟩ (scatter) weight is the scatter probability of
/// the region selected by `anc_r` (|0⟩ = region 1, |1⟩ = region 2).
pub fn build_reaction_rotation(
    qubit_count: usize,
    regions: &[RegionSpec; 2],
    anc_r: usize,
    r: usize,
) -> Result<Circuit> {
    for spec in regions {
        spec.validate()?;
    }
    let mut circuit = Circuit::new(qubit_count);
    circuit.push(Gate::ry(absorb_angle(regions[0].p_absorb), r).controlled([Control::neg(anc_r)]))?;
    circuit.push(Gate::ry(absorb_angle(regions[1].p_absorb), r).controlled([Control::pos(anc_r)]))?;
    Ok(circuit)
}

/// `2 acos √p_absorb`: the Y angle leaving `p_absorb` on |0⟩.
pub fn absorb_angle(p_absorb: f64) -> f64 {
    2.0 * p_absorb.clamp(0.0, 1.0).sqrt().acos()
}

/// Fourier transform on `x` without the final bit reversal: qubit `j` ends
/// up with relative phase `e^{2πi x / 2^{j+1}}`.
pub fn fourier_transform(qubit_count: usize, x: &[usize]) -> Result<Circuit> {
    let mut circuit = Circuit::new(qubit_count);
    for j in (0..x.len()).rev() {
        circuit.push(Gate::h(x[j]))?;
        for k in (0..j).rev() {
            let angle = PI / (1u64 << (j - k)) as f64;
            circuit.push(Gate::phase(angle, x[j]).controlled([Control::pos(x[k])]))?;
        }
    }
    Ok(circuit)
}

/// In-place `|x⟩|d⟩ → |(x + d) mod 2^w⟩|d⟩`, with no ancilla.
///
/// Transforms `x` to the Fourier basis, adds `d` as phases controlled on
/// each bit of `d` (and on `control`, if given), then transforms back. The
/// transforms are left uncontrolled since they cancel when the phase layer
/// is inactive.
pub fn build_controlled_adder(
    qubit_count: usize,
    x: &[usize],
    d: &[usize],
    control: Option<Control>,
) -> Result<Circuit> {
    if d.len() > x.len() {
        return Err(Error::InvalidArgument(format!(
            "addend width {} exceeds target width {}",
            d.len(),
            x.len()
        )));
    }
    let mut used: Vec<usize> = x.iter().chain(d).copied().chain(control.map(|c| c.qubit)).collect();
    used.sort_unstable();
    if used.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("adder registers overlap".into()));
    }
    if d.is_empty() {
        return Ok(Circuit::new(qubit_count));
    }
    let qft = fourier_transform(qubit_count, x)?;
    let mut circuit = qft.clone();
    for (j, &xj) in x.iter().enumerate() {
        for (i, &di) in d.iter().enumerate().take(j + 1) {
            let angle = 2.0 * PI / (1u64 << (j + 1 - i)) as f64;
            let gate = Gate::phase(angle, xj).controlled([Control::pos(di)]).controlled(control);
            circuit.push(gate)?;
        }
    }
    circuit.append(&qft.inverse())?;
    Ok(circuit)
}

/// Builds the full transport circuit for `problem`.
pub fn build_transport_circuit(problem: &TransportProblem) -> Result<TransportCircuit> {
    problem.validate()?;
    let n = problem.max_flights;
    let w = problem.x_qubits;
    let dw = problem.distance_width();

    let mut next = 0usize;
    let mut take = |k: usize| -> Vec<usize> {
        let qs = (next..next + k).collect();
        next += k;
        qs
    };
    let x = take(w);
    let anc_r = take(1)[0];
    let mut distances = Vec::with_capacity(n);
    let mut reactions = Vec::with_capacity(n);
    for m in 1..=n {
        distances.push(take(dw));
        let omit = m == 1 && problem.first_flight_always;
        reactions.push(if omit { None } else { Some(take(1)[0]) });
    }
    let anc_p = take(1)[0];
    let flag = take(1)[0];
    let qubit_count = next;

    let mut circuit = Circuit::new(qubit_count);
    circuit.add_register(X_REGISTER, x.clone())?;
    circuit.add_register(ANC_R, vec![anc_r])?;
    for m in 1..=n {
        circuit.add_register(&format!("D{m}"), distances[m - 1].clone())?;
        if let Some(r) = reactions[m - 1] {
            circuit.add_register(&format!("R{m}"), vec![r])?;
        }
    }
    circuit.add_register(ANC_P, vec![anc_p])?;
    circuit.add_register(FLAG, vec![flag])?;

    let region = build_region_flag(qubit_count, &x, problem.boundary, anc_r)?;
    let [region1, region2] = &problem.regions;

    for m in 1..=n {
        let d = &distances[m - 1];
        circuit.append(&region)?;
        let load1 = distribution_loader(qubit_count, &region1.distance_pmf, d)?;
        let load2 = distribution_loader(qubit_count, &region2.distance_pmf, d)?;
        circuit.append(&load1.add_controls(&[Control::neg(anc_r)])?)?;
        circuit.append(&load2.add_controls(&[Control::pos(anc_r)])?)?;
        if let Some(r) = reactions[m - 1] {
            circuit.append(&build_reaction_rotation(qubit_count, &problem.regions, anc_r, r)?)?;
        }
        circuit.append(&region.inverse())?;

        let progress: Vec<Control> = reactions[..m].iter().flatten().map(|&r| Control::pos(r)).collect();
        if progress.is_empty() {
            circuit.append(&build_controlled_adder(qubit_count, &x, d, None)?)?;
        } else {
            let mct = Gate::mcx(progress, anc_p);
            circuit.push(mct.clone())?;
            circuit.append(&build_controlled_adder(qubit_count, &x, d, Some(Control::pos(anc_p)))?)?;
            circuit.push(mct)?;
        }
    }

    Ok(TransportCircuit {
        circuit,
        problem: problem.clone(),
        x,
        anc_r,
        anc_p,
        flag,
        distances,
        reactions,
    })
}
