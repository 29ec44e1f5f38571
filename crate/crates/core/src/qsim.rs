//! Dense statevector simulation.
//!
//! Amplitudes are stored in a flat `Vec<Complex64>` indexed by basis state,
//! bit `i` of the index being qubit `i`. Single-target gates walk the
//! amplitude pairs that differ only in the target bit and skip pairs whose
//! index fails the control mask; no control-expanded matrices are built.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::circuit::{read_bits, Circuit, Control, Gate, GateKind, Polarity};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_MAX_QUBITS: usize = 26;

/// Environment variable that overrides [`SimConfig::max_qubits`].
pub const MAX_QUBITS_ENV: &str = "QTRANSPORT_MAX_QUBITS";

// Below this many amplitudes a gate is applied on the calling thread.
const PAR_MIN_AMPLITUDES: usize = 1 << 14;
const CHUNK: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub max_qubits: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { max_qubits: DEFAULT_MAX_QUBITS }
    }
}

impl SimConfig {
    /// Default config, with the ceiling taken from `QTRANSPORT_MAX_QUBITS`
    /// when set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(MAX_QUBITS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map(|max_qubits| Self { max_qubits })
                .map_err(|_| Error::InvalidArgument(format!("{MAX_QUBITS_ENV}={v} is not a qubit count"))),
            Err(_) => Ok(Self::default()),
        }
    }

    pub fn check(&self, qubits: usize) -> Result<()> {
        if qubits > self.max_qubits || qubits >= usize::BITS as usize {
            return Err(Error::Capacity { requested: qubits, ceiling: self.max_qubits });
        }
        Ok(())
    }
}

/// Probability of each value of a register.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDistribution {
    probabilities: Vec<f64>,
}

impl PathDistribution {
    /// Validates that entries are nonnegative and sum to one within 1e-9.
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if let Some(p) = probabilities.iter().find(|p| !(**p >= 0.0 && **p <= 1.0 + 1e-12)) {
            return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("probabilities sum to {total}")));
        }
        Ok(Self { probabilities })
    }

    pub(crate) fn new_unchecked(probabilities: Vec<f64>) -> Self {
        Self { probabilities }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn get(&self, value: usize) -> f64 {
        self.probabilities.get(value).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probabilities.iter().enumerate().map(|(x, p)| x as f64 * p).sum()
    }

    /// Total probability of the values accepted by `pred`.
    pub fn mass_where(&self, pred: impl Fn(usize) -> bool) -> f64 {
        self.probabilities.iter().enumerate().filter(|(x, _)| pred(*x)).map(|(_, p)| p).sum()
    }

    /// `max |self[x] - other[x]|`, treating missing entries as zero.
    pub fn max_abs_diff(&self, other: &PathDistribution) -> f64 {
        let n = self.len().max(other.len());
        (0..n).map(|x| (self.get(x) - other.get(x)).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    qubit_count: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// |0…0⟩ under the default engine ceiling.
    pub fn zero_state(qubit_count: usize) -> Result<Self> {
        Self::zero_state_with(qubit_count, &SimConfig::default())
    }

    pub fn zero_state_with(qubit_count: usize, config: &SimConfig) -> Result<Self> {
        Self::basis_state_with(qubit_count, 0, config)
    }

    pub fn basis_state(qubit_count: usize, index: usize) -> Result<Self> {
        Self::basis_state_with(qubit_count, index, &SimConfig::default())
    }

    pub fn basis_state_with(qubit_count: usize, index: usize, config: &SimConfig) -> Result<Self> {
        if qubit_count == 0 {
            return Err(Error::InvalidArgument("a statevector needs at least one qubit".into()));
        }
        config.check(qubit_count)?;
        let len = 1usize << qubit_count;
        if index >= len {
            return Err(Error::InvalidArgument(format!("basis index {index} >= {len}")));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); len];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self { qubit_count, amplitudes })
    }

    /// Wraps raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("{len} amplitudes is not a power of two >= 2")));
        }
        Ok(Self { qubit_count: len.trailing_zeros() as usize, amplitudes })
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(Complex64::norm_sqr).collect()
    }

    /// Applies every gate of `circuit` in order.
    pub fn apply(&mut self, circuit: &Circuit) -> Result<()> {
        if circuit.qubit_count() != self.qubit_count {
            return Err(Error::QubitCountMismatch {
                expected: self.qubit_count,
                found: circuit.qubit_count(),
            });
        }
        for gate in circuit.gates() {
            self.apply_unchecked(gate);
        }
        Ok(())
    }

    /// Applies a single gate after validating it against this state.
    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate()?;
        if let Some(q) = gate.qubits().find(|&q| q >= self.qubit_count) {
            return Err(Error::QubitOutOfRange { qubit: q, qubit_count: self.qubit_count });
        }
        self.apply_unchecked(gate);
        Ok(())
    }

    fn apply_unchecked(&mut self, gate: &Gate) {
        let (mask, value) = control_masks(&gate.controls);
        let amps = &mut self.amplitudes;
        match gate.kind {
            GateKind::X => for_each_pair(amps, gate.targets[0], mask, value, |a, b| {
                std::mem::swap(a, b)
            }),
            GateKind::H => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                for_each_pair(amps, gate.targets[0], mask, value, |a, b| {
                    let (x, y) = (*a, *b);
                    *a = (x + y) * s;
                    *b = (x - y) * s;
                })
            }
            GateKind::RotY(theta) => {
                let (s, c) = (theta / 2.0).sin_cos();
                for_each_pair(amps, gate.targets[0], mask, value, |a, b| {
                    let (x, y) = (*a, *b);
                    *a = x * c - y * s;
                    *b = x * s + y * c;
                })
            }
            GateKind::Phase(phi) => {
                let w = Complex64::from_polar(1.0, phi);
                for_each_pair(amps, gate.targets[0], mask, value, |_, b| *b *= w)
            }
            GateKind::Swap => {
                let (p, q) = (gate.targets[0], gate.targets[1]);
                let flip = (1 << p) | (1 << q);
                for i in 0..amps.len() {
                    if (i >> p) & 1 == 1 && (i >> q) & 1 == 0 && i & mask == value {
                        amps.swap(i, i ^ flip);
                    }
                }
            }
        }
    }

    /// Distribution of the integer encoded LSB-first by `qubits`.
    pub fn marginal(&self, qubits: &[usize]) -> Result<PathDistribution> {
        if let Some(&q) = qubits.iter().find(|&&q| q >= self.qubit_count) {
            return Err(Error::QubitOutOfRange { qubit: q, qubit_count: self.qubit_count });
        }
        let mut probabilities = vec![0.0; 1 << qubits.len()];
        for (i, a) in self.amplitudes.iter().enumerate() {
            probabilities[read_bits(qubits, i) as usize] += a.norm_sqr();
        }
        Ok(PathDistribution::new_unchecked(probabilities))
    }

    /// Marginal of a named register of `circuit`.
    pub fn register_marginal(&self, circuit: &Circuit, register: &str) -> Result<PathDistribution> {
        self.marginal(circuit.register(register)?)
    }

    /// Probability that `qubit` reads |1⟩.
    pub fn flag_probability(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.qubit_count {
            return Err(Error::QubitOutOfRange { qubit, qubit_count: self.qubit_count });
        }
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| (i >> qubit) & 1 == 1)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Measures `qubits` `shots` times; returns counts per outcome value.
    pub fn sample(&self, qubits: &[usize], shots: u64, seed: u64) -> Result<Vec<u64>> {
        sample_counts(self.marginal(qubits)?.probabilities(), shots, seed)
    }
}

/// Draws `shots` i.i.d. outcomes from `probabilities`, shot `s` using
/// stream `(seed, s)`.
pub fn sample_counts(probabilities: &[f64], shots: u64, seed: u64) -> Result<Vec<u64>> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    let total: f64 = probabilities.iter().sum();
    if probabilities.is_empty() || total.is_nan() || total <= 0.0 {
        return Err(Error::InvalidArgument("cannot sample from an empty distribution".into()));
    }
    let mut cdf: Vec<f64> = probabilities
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p / total;
            Some(*acc)
        })
        .collect();
    // Trailing zero-probability outcomes must stay unreachable.
    let last = probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    for c in &mut cdf[last..] {
        *c = 1.0;
    }
    let k = cdf.len();
    Ok((0..shots)
        .into_par_iter()
        .fold(
            || vec![0u64; k],
            |mut acc, s| {
                let u: f64 = rng::stream(seed, s).random();
                acc[cdf.partition_point(|&c| c <= u)] += 1;
                acc
            },
        )
        .reduce(|| vec![0u64; k], |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        }))
}

fn control_masks(controls: &[Control]) -> (usize, usize) {
    controls.iter().fold((0, 0), |(mask, value), c| {
        let bit = 1 << c.qubit;
        match c.polarity {
            Polarity::Positive => (mask | bit, value | bit),
            Polarity::Negative => (mask | bit, value),
        }
    })
}

/// Calls `f(lo, hi)` on every amplitude pair `(i, i | 1<<target)` with
/// target bit of `i` clear and `i & mask == value`.
fn for_each_pair<F>(amps: &mut [Complex64], target: usize, mask: usize, value: usize, f: F)
where
    F: Fn(&mut Complex64, &mut Complex64) + Sync,
{
    let half = 1usize << target;
    let block = half << 1;
    let run = |base: usize, lo: &mut [Complex64], hi: &mut [Complex64]| {
        for (k, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
            if (base + k) & mask == value {
                f(a, b);
            }
        }
    };

    if amps.len() < PAR_MIN_AMPLITUDES {
        for (bi, blk) in amps.chunks_mut(block).enumerate() {
            let (lo, hi) = blk.split_at_mut(half);
            run(bi * block, lo, hi);
        }
    } else if half >= CHUNK {
        // Few wide blocks: split each half into chunks.
        for (bi, blk) in amps.chunks_mut(block).enumerate() {
            let (lo, hi) = blk.split_at_mut(half);
            lo.par_chunks_mut(CHUNK)
                .zip(hi.par_chunks_mut(CHUNK))
                .enumerate()
                .for_each(|(ci, (l, h))| run(bi * block + ci * CHUNK, l, h));
        }
    } else {
        // Many narrow blocks: each chunk holds whole blocks.
        amps.par_chunks_mut(CHUNK).enumerate().for_each(|(si, span)| {
            for (bi, blk) in span.chunks_mut(block).enumerate() {
                let (lo, hi) = blk.split_at_mut(half);
                run(si * CHUNK + bi * block, lo, hi);
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn run(n: usize, gates: &[Gate], from: usize) -> Statevector {
        let mut s = Statevector::basis_state(n, from).unwrap();
        for g in gates {
            s.apply_gate(g).unwrap();
        }
        s
    }

    #[test]
    fn zero_state_basics() {
        let s = Statevector::zero_state(1).unwrap();
        assert_eq!(s.amplitudes(), &[c(1.0), c(0.0)]);
        assert!((Statevector::zero_state(4).unwrap().norm() - 1.0).abs() < 1e-15);
        assert_eq!(Statevector::zero_state(15).unwrap().amplitudes().len(), 32768);
        assert!(Statevector::zero_state(0).is_err());
        assert!(matches!(
            Statevector::zero_state_with(10, &SimConfig { max_qubits: 8 }),
            Err(Error::Capacity { requested: 10, ceiling: 8 })
        ));
    }

    #[test]
    fn roty_matches_matrix() {
        for theta in [0.0, 0.3, 1.0, PI / 2.0, 2.5, PI] {
            let s = run(1, &[Gate::ry(theta, 0)], 0);
            assert!((s.amplitudes()[0] - c((theta / 2.0).cos())).norm() < 1e-15);
            assert!((s.amplitudes()[1] - c((theta / 2.0).sin())).norm() < 1e-15);
            // Second column: R_y|1⟩ = -sin|0⟩ + cos|1⟩.
            let s = run(1, &[Gate::ry(theta, 0)], 1);
            assert!((s.amplitudes()[0] - c(-(theta / 2.0).sin())).norm() < 1e-15);
            assert!((s.amplitudes()[1] - c((theta / 2.0).cos())).norm() < 1e-15);
        }
    }

    #[test]
    fn toffoli_truth_table() {
        let g = Gate::mcx([Control::pos(0), Control::pos(2)], 1);
        for b in 0..8 {
            let s = run(3, std::slice::from_ref(&g), b);
            let expect = if b & 0b101 == 0b101 { b ^ 0b010 } else { b };
            assert_eq!(s.amplitudes()[expect], c(1.0), "input {b:03b}");
        }
        // |101⟩ → |111⟩
        assert_eq!(run(3, &[g], 0b101).amplitudes()[0b111], c(1.0));
    }

    #[test]
    fn negative_controls_equal_x_sandwich() {
        let n = 4;
        let neg = Gate::ry(0.7, 3).controlled([Control::neg(0), Control::pos(1)]);
        let sandwich = [Gate::x(0), Gate::ry(0.7, 3).controlled([Control::pos(0), Control::pos(1)]), Gate::x(0)];
        for b in 0..16 {
            let s1 = run(n, &[Gate::h(2), neg.clone()], b);
            let mut gates = vec![Gate::h(2)];
            gates.extend(sandwich.iter().cloned());
            let s2 = run(n, &gates, b);
            for (a, z) in s1.amplitudes().iter().zip(s2.amplitudes()) {
                assert!((a - z).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn phase_and_swap() {
        let s = run(2, &[Gate::h(0), Gate::phase(PI / 3.0, 0)], 0);
        let w = Complex64::from_polar(std::f64::consts::FRAC_1_SQRT_2, PI / 3.0);
        assert!((s.amplitudes()[1] - w).norm() < 1e-15);
        let s = run(3, &[Gate::swap(0, 2)], 0b001);
        assert_eq!(s.amplitudes()[0b100], c(1.0));
        let s = run(3, &[Gate::swap(0, 2).controlled([Control::pos(1)])], 0b001);
        assert_eq!(s.amplitudes()[0b001], c(1.0));
        let s = run(3, &[Gate::swap(0, 2).controlled([Control::pos(1)])], 0b011);
        assert_eq!(s.amplitudes()[0b110], c(1.0));
    }

    #[test]
    fn parallel_kernel_agrees_with_serial() {
        // 16 qubits crosses the parallel threshold; compare against a
        // direct per-index evaluation of a controlled RY.
        let n = 16;
        let mut s = Statevector::zero_state(n).unwrap();
        for q in 0..n {
            s.apply_gate(&Gate::h(q)).unwrap();
        }
        let before = s.amplitudes().to_vec();
        for target in [0, 5, 12, 15] {
            let ctrl = if target == 3 { 4 } else { 3 };
            let g = Gate::ry(0.9, target).controlled([Control::neg(ctrl)]);
            let mut t = Statevector::from_amplitudes(before.clone()).unwrap();
            t.apply_gate(&g).unwrap();
            let (sn, cs) = 0.45f64.sin_cos();
            for i in 0..before.len() {
                let bit = 1 << target;
                let expect = if i & (1 << ctrl) != 0 {
                    before[i]
                } else if i & bit == 0 {
                    before[i] * cs - before[i | bit] * sn
                } else {
                    before[i ^ bit] * sn + before[i] * cs
                };
                assert!((t.amplitudes()[i] - expect).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn marginal_and_flag() {
        let s = Statevector::zero_state(3).unwrap();
        assert_eq!(s.marginal(&[0, 1]).unwrap().probabilities(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.flag_probability(2).unwrap(), 0.0);
        let s = run(3, &[Gate::x(2)], 0);
        assert_eq!(s.flag_probability(2).unwrap(), 1.0);
        assert!(s.flag_probability(3).is_err());
        assert!(s.marginal(&[3]).is_err());

        let theta = 2.0 * 0.25f64.sqrt().acos();
        let s = run(1, &[Gate::ry(theta, 0)], 0);
        assert!((s.flag_probability(0).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn sampling_contracts() {
        let s = run(3, &[Gate::x(1)], 0);
        assert_eq!(s.sample(&[0, 1], 500, 9).unwrap(), vec![0, 0, 500, 0]);
        assert!(s.sample(&[0], 0, 1).is_err());
        let h = run(2, &[Gate::h(0), Gate::ry(1.1, 1)], 0);
        let a = h.sample(&[0, 1], 10_000, 42).unwrap();
        assert_eq!(a, h.sample(&[0, 1], 10_000, 42).unwrap());
        assert_ne!(a, h.sample(&[0, 1], 10_000, 43).unwrap());
        assert_eq!(a.iter().sum::<u64>(), 10_000);
    }

    #[test]
    fn sampling_is_independent_of_thread_count() {
        let probs = [0.1, 0.2, 0.3, 0.4];
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = single.install(|| sample_counts(&probs, 50_000, 3).unwrap());
        let b = many.install(|| sample_counts(&probs, 50_000, 3).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn path_distribution_validation() {
        assert!(PathDistribution::new(vec![0.5, 0.5]).is_ok());
        assert!(PathDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(PathDistribution::new(vec![-0.1, 1.1]).is_err());
        let d = PathDistribution::new(vec![0.25, 0.25, 0.5]).unwrap();
        assert!((d.mean() - 1.25).abs() < 1e-15);
        assert!((d.mass_where(|x| x >= 1) - 0.75).abs() < 1e-15);
    }
}
