//! Gate-level circuit IR.
//!
//! Gates carry an arbitrary list of polarity-tagged controls, so a
//! multi-controlled Toffoli is a single [`GateKind::X`] gate and the
//! X-conjugated "control on |0⟩" idiom is expressed directly as a
//! [`Polarity::Negative`] control.
//!
//! Register qubit lists are LSB-first: qubit `i` of a register carries the
//! `2^i` place of the integer it encodes.

use std::fmt;

use indexmap::IndexMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateKind {
    X,
    H,
    /// `[[cos θ/2, -sin θ/2], [sin θ/2, cos θ/2]]`
    RotY(f64),
    /// `diag(1, e^{iφ})`
    Phase(f64),
    Swap,
}

impl GateKind {
    fn arity(&self) -> usize {
        match self {
            GateKind::Swap => 2,
            _ => 1,
        }
    }

    fn angle(&self) -> Option<f64> {
        match *self {
            GateKind::RotY(a) | GateKind::Phase(a) => Some(a),
            _ => None,
        }
    }

    pub fn inverse(&self) -> GateKind {
        match *self {
            GateKind::RotY(a) => GateKind::RotY(-a),
            GateKind::Phase(a) => GateKind::Phase(-a),
            k => k,
        }
    }

    fn mnemonic(&self) -> &'static str {
        match self {
            GateKind::X => "X",
            GateKind::H => "H",
            GateKind::RotY(_) => "RY",
            GateKind::Phase(_) => "P",
            GateKind::Swap => "SWAP",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    /// Satisfied when the control qubit is |1⟩.
    Positive,
    /// Satisfied when the control qubit is |0⟩.
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Control {
    pub qubit: usize,
    pub polarity: Polarity,
}

impl Control {
    pub fn pos(qubit: usize) -> Self {
        Self { qubit, polarity: Polarity::Positive }
    }

    pub fn neg(qubit: usize) -> Self {
        Self { qubit, polarity: Polarity::Negative }
    }

    /// Whether basis state `index` satisfies this control.
    pub fn is_satisfied(&self, index: usize) -> bool {
        let bit = (index >> self.qubit) & 1 == 1;
        match self.polarity {
            Polarity::Positive => bit,
            Polarity::Negative => !bit,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    pub controls: Vec<Control>,
}

impl Gate {
    pub fn new(kind: GateKind, targets: Vec<usize>, controls: Vec<Control>) -> Self {
        Self { kind, targets, controls }
    }

    pub fn x(target: usize) -> Self {
        Self::new(GateKind::X, vec![target], Vec::new())
    }

    pub fn h(target: usize) -> Self {
        Self::new(GateKind::H, vec![target], Vec::new())
    }

    pub fn ry(angle: f64, target: usize) -> Self {
        Self::new(GateKind::RotY(angle), vec![target], Vec::new())
    }

    pub fn phase(angle: f64, target: usize) -> Self {
        Self::new(GateKind::Phase(angle), vec![target], Vec::new())
    }

    pub fn swap(a: usize, b: usize) -> Self {
        Self::new(GateKind::Swap, vec![a, b], Vec::new())
    }

    /// Multi-controlled X. With one positive control this is CNOT, with two
    /// it is Toffoli.
    pub fn mcx(controls: impl IntoIterator<Item = Control>, target: usize) -> Self {
        Self::new(GateKind::X, vec![target], controls.into_iter().collect())
    }

    /// Appends controls to this gate.
    pub fn controlled(mut self, controls: impl IntoIterator<Item = Control>) -> Self {
        self.controls.extend(controls);
        self
    }

    pub fn inverse(&self) -> Self {
        Self {
            kind: self.kind.inverse(),
            targets: self.targets.clone(),
            controls: self.controls.clone(),
        }
    }

    /// Targets followed by control qubits.
    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        self.targets.iter().copied().chain(self.controls.iter().map(|c| c.qubit))
    }

    /// Checks the structural invariants that do not depend on a circuit.
    pub fn validate(&self) -> Result<()> {
        if self.targets.len() != self.kind.arity() {
            return Err(Error::InvalidGate(format!(
                "{} takes {} target(s), got {}",
                self.kind.mnemonic(),
                self.kind.arity(),
                self.targets.len()
            )));
        }
        if let Some(a) = self.kind.angle() {
            if !a.is_finite() {
                return Err(Error::InvalidGate(format!("non-finite angle {a}")));
            }
        }
        let mut seen: Vec<usize> = self.qubits().collect();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidGate(format!(
                "repeated qubit in {}",
                self
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.mnemonic())?;
        if let Some(a) = self.kind.angle() {
            write!(f, "({a:?})")?;
        }
        write!(f, " targets=[")?;
        for (i, t) in self.targets.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, "] controls=[")?;
        for (i, c) in self.controls.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            let sign = match c.polarity {
                Polarity::Positive => '+',
                Polarity::Negative => '-',
            };
            write!(f, "{sign}{}", c.qubit)?;
        }
        f.write_str("]")
    }
}

/// An ordered gate list over a fixed number of qubits, with named registers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    qubit_count: usize,
    gates: Vec<Gate>,
    registers: IndexMap<String, Vec<usize>>,
}

impl Circuit {
    pub fn new(qubit_count: usize) -> Self {
        Self { qubit_count, gates: Vec::new(), registers: IndexMap::new() }
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn registers(&self) -> &IndexMap<String, Vec<usize>> {
        &self.registers
    }

    pub fn register(&self, name: &str) -> Result<&[usize]> {
        self.registers
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownRegister(name.to_string()))
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.qubit_count {
            return Err(Error::QubitOutOfRange { qubit, qubit_count: self.qubit_count });
        }
        Ok(())
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate()?;
        for q in gate.qubits() {
            self.check_qubit(q)?;
        }
        self.gates.push(gate);
        Ok(())
    }

    /// Registers `qubits` under `name`. Re-adding an identical register is a
    /// no-op; any other overlap is an error.
    pub fn add_register(&mut self, name: &str, qubits: Vec<usize>) -> Result<()> {
        if let Some(existing) = self.registers.get(name) {
            if *existing == qubits {
                return Ok(());
            }
            return Err(Error::RegisterConflict(format!(
                "register `{name}` already maps to {existing:?}"
            )));
        }
        for (i, &q) in qubits.iter().enumerate() {
            self.check_qubit(q)?;
            if qubits[..i].contains(&q) {
                return Err(Error::RegisterConflict(format!(
                    "register `{name}` lists qubit {q} twice"
                )));
            }
            if let Some((other, _)) = self.registers.iter().find(|(_, qs)| qs.contains(&q)) {
                return Err(Error::RegisterConflict(format!(
                    "qubit {q} of `{name}` already belongs to `{other}`"
                )));
            }
        }
        self.registers.insert(name.to_string(), qubits);
        Ok(())
    }

    /// Appends every gate of `other` and merges its registers.
    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if other.qubit_count != self.qubit_count {
            return Err(Error::QubitCountMismatch {
                expected: self.qubit_count,
                found: other.qubit_count,
            });
        }
        for (name, qubits) in &other.registers {
            self.add_register(name, qubits.clone())?;
        }
        self.gates.extend(other.gates.iter().cloned());
        Ok(())
    }

    /// Gates of `self` followed by gates of `other`.
    pub fn compose(&self, other: &Circuit) -> Result<Circuit> {
        let mut out = self.clone();
        out.append(other)?;
        Ok(out)
    }

    /// The exact inverse: gates reversed and each gate inverted.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            qubit_count: self.qubit_count,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
            registers: self.registers.clone(),
        }
    }

    /// Returns a circuit that acts as `self` when every control is
    /// satisfied and as the identity otherwise.
    pub fn add_controls(&self, controls: &[Control]) -> Result<Circuit> {
        for (i, c) in controls.iter().enumerate() {
            self.check_qubit(c.qubit)?;
            if controls[..i].iter().any(|o| o.qubit == c.qubit) {
                return Err(Error::InvalidGate(format!(
                    "control qubit {} listed twice",
                    c.qubit
                )));
            }
            if self.gates.iter().any(|g| g.qubits().any(|q| q == c.qubit)) {
                return Err(Error::InvalidGate(format!(
                    "control qubit {} is already used by the circuit",
                    c.qubit
                )));
            }
        }
        Ok(Circuit {
            qubit_count: self.qubit_count,
            gates: self
                .gates
                .iter()
                .map(|g| g.clone().controlled(controls.iter().copied()))
                .collect(),
            registers: self.registers.clone(),
        })
    }

    /// Basis index with each listed register holding the given value and
    /// every other qubit |0⟩.
    pub fn basis_index(&self, values: &[(&str, u64)]) -> Result<usize> {
        let mut index = 0usize;
        for &(name, value) in values {
            let qubits = self.register(name)?;
            if qubits.len() < 64 && value >> qubits.len() != 0 {
                return Err(Error::InvalidArgument(format!(
                    "value {value} does not fit in {}-qubit register `{name}`",
                    qubits.len()
                )));
            }
            for (bit, &q) in qubits.iter().enumerate() {
                if (value >> bit) & 1 == 1 {
                    index |= 1 << q;
                }
            }
        }
        Ok(index)
    }

    /// Integer held by register `name` in basis state `index`.
    pub fn register_value(&self, name: &str, index: usize) -> Result<u64> {
        Ok(read_bits(self.register(name)?, index))
    }

    /// Parses the text produced by the `Display` impl.
    pub fn parse_dump(text: &str) -> Result<Circuit> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty circuit dump".into()))?;
        let qubit_count = header
            .strip_prefix("qubits=")
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad header `{header}`")))?;
        let mut circuit = Circuit::new(qubit_count);
        for line in lines {
            if let Some(rest) = line.strip_prefix("register ") {
                let (name, list) = rest
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("bad register line `{line}`")))?;
                let qubits = parse_list(list, |s| {
                    s.parse().map_err(|_| Error::Parse(format!("bad qubit `{s}`")))
                })?;
                circuit.add_register(name, qubits)?;
            } else {
                circuit.push(parse_gate(line)?)?;
            }
        }
        Ok(circuit)
    }
}

pub(crate) fn read_bits(qubits: &[usize], index: usize) -> u64 {
    qubits
        .iter()
        .enumerate()
        .fold(0, |acc, (bit, &q)| acc | ((((index >> q) & 1) as u64) << bit))
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "qubits={}", self.qubit_count)?;
        for (name, qubits) in &self.registers {
            let list: Vec<String> = qubits.iter().map(usize::to_string).collect();
            writeln!(f, "register {name}=[{}]", list.join(","))?;
        }
        for g in &self.gates {
            writeln!(f, "{g}")?;
        }
        Ok(())
    }
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let inner = s
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| Error::Parse(format!("expected a bracketed list, got `{s}`")))?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner.split(',').map(|s| item(s.trim())).collect()
}

fn parse_gate(line: &str) -> Result<Gate> {
    let bad = || Error::Parse(format!("bad gate line `{line}`"));
    let mut parts = line.split_whitespace();
    let head = parts.next().ok_or_else(bad)?;
    let targets = parts.next().and_then(|p| p.strip_prefix("targets=")).ok_or_else(bad)?;
    let controls = parts.next().and_then(|p| p.strip_prefix("controls=")).ok_or_else(bad)?;
    if parts.next().is_some() {
        return Err(bad());
    }

    let (name, angle) = match head.split_once('(') {
        Some((name, rest)) => {
            let a = rest.strip_suffix(')').ok_or_else(bad)?;
            (name, Some(a.parse::<f64>().map_err(|_| bad())?))
        }
        None => (head, None),
    };
    let kind = match (name, angle) {
        ("X", None) => GateKind::X,
        ("H", None) => GateKind::H,
        ("SWAP", None) => GateKind::Swap,
        ("RY", Some(a)) => GateKind::RotY(a),
        ("P", Some(a)) => GateKind::Phase(a),
        _ => return Err(bad()),
    };
    let targets = parse_list(targets, |s| s.parse().map_err(|_| bad()))?;
    let controls = parse_list(controls, |s| {
        let (polarity, q) = match s.split_at_checked(1) {
            Some(("+", q)) => (Polarity::Positive, q),
            Some(("-", q)) => (Polarity::Negative, q),
            _ => return Err(bad()),
        };
        Ok(Control { qubit: q.parse().map_err(|_| bad())?, polarity })
    })?;
    Ok(Gate::new(kind, targets, controls))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Circuit {
        let mut c = Circuit::new(4);
        c.add_register("a", vec![0, 1]).unwrap();
        c.push(Gate::h(0)).unwrap();
        c.push(Gate::ry(0.25, 1).controlled([Control::neg(0)])).unwrap();
        c.push(Gate::mcx([Control::pos(0), Control::neg(1)], 3)).unwrap();
        c.push(Gate::phase(-1.5, 2)).unwrap();
        c.push(Gate::swap(1, 2)).unwrap();
        c
    }

    #[test]
    fn rejects_bad_gates() {
        let mut c = Circuit::new(3);
        assert!(matches!(c.push(Gate::x(3)), Err(Error::QubitOutOfRange { .. })));
        assert!(c.push(Gate::mcx([Control::pos(1)], 1)).is_err());
        assert!(c.push(Gate::new(GateKind::Swap, vec![0], vec![])).is_err());
        assert!(c.push(Gate::new(GateKind::X, vec![0, 1], vec![])).is_err());
        assert!(c.push(Gate::ry(f64::NAN, 0)).is_err());
        assert!(c.push(Gate::phase(f64::INFINITY, 0)).is_err());
        assert!(c.is_empty());
    }

    #[test]
    fn compose_with_empty_is_identity() {
        let c = sample();
        assert_eq!(Circuit::new(4).compose(&c).unwrap(), c);
        assert_eq!(c.compose(&Circuit::new(4)).unwrap(), c);
    }

    #[test]
    fn compose_concatenates() {
        let c = sample();
        let d = c.inverse();
        let cd = c.compose(&d).unwrap();
        assert_eq!(cd.len(), c.len() + d.len());
        assert_eq!(&cd.gates()[..c.len()], c.gates());
    }

    #[test]
    fn compose_errors() {
        let c = sample();
        assert!(matches!(
            c.compose(&Circuit::new(5)),
            Err(Error::QubitCountMismatch { expected: 4, found: 5 })
        ));
        let mut other = Circuit::new(4);
        other.add_register("a", vec![2, 3]).unwrap();
        assert!(matches!(c.compose(&other), Err(Error::RegisterConflict(_))));
        let mut same = Circuit::new(4);
        same.add_register("a", vec![0, 1]).unwrap();
        assert!(c.compose(&same).is_ok());
    }

    #[test]
    fn overlapping_registers_rejected() {
        let mut c = Circuit::new(4);
        c.add_register("a", vec![0, 1]).unwrap();
        assert!(c.add_register("b", vec![1, 2]).is_err());
        assert!(c.add_register("c", vec![2, 2]).is_err());
        assert!(c.add_register("d", vec![4]).is_err());
    }

    #[test]
    fn inverse_negates_angles_and_reverses() {
        let c = sample();
        let inv = c.inverse();
        assert_eq!(inv.gates()[0].kind, GateKind::Swap);
        assert_eq!(inv.gates()[1].kind, GateKind::Phase(1.5));
        assert_eq!(inv.gates()[3].kind, GateKind::RotY(-0.25));
        assert_eq!(inv.gates()[3].controls, vec![Control::neg(0)]);
        assert_eq!(inv.inverse(), c);
    }

    #[test]
    fn add_controls_rejects_overlap() {
        let c = sample();
        assert!(c.add_controls(&[Control::pos(2)]).is_err());
        let mut wide = Circuit::new(6);
        for g in c.gates() {
            wide.push(g.clone()).unwrap();
        }
        let wrapped = wide.add_controls(&[Control::pos(4), Control::neg(5)]).unwrap();
        assert!(wrapped
            .gates()
            .iter()
            .all(|g| g.controls.ends_with(&[Control::pos(4), Control::neg(5)])));
        assert!(wide.add_controls(&[Control::pos(4), Control::neg(4)]).is_err());
    }

    #[test]
    fn register_round_trip() {
        let mut c = Circuit::new(7);
        c.add_register("x", vec![5, 1, 3]).unwrap();
        c.add_register("y", vec![0, 6]).unwrap();
        for v in 0..8 {
            for w in 0..4 {
                let idx = c.basis_index(&[("x", v), ("y", w)]).unwrap();
                assert_eq!(c.register_value("x", idx).unwrap(), v);
                assert_eq!(c.register_value("y", idx).unwrap(), w);
            }
        }
        assert!(c.basis_index(&[("x", 8)]).is_err());
        assert!(matches!(c.register_value("z", 0), Err(Error::UnknownRegister(_))));
    }

    #[test]
    fn dump_round_trips() {
        let c = sample();
        let text = c.to_string();
        assert!(text.starts_with("qubits=4\nregister a=[0,1]\nH targets=[0] controls=[]\n"));
        assert!(text.contains("X targets=[3] controls=[+0,-1]"));
        assert_eq!(Circuit::parse_dump(&text).unwrap(), c);
    }

    #[test]
    fn parse_dump_errors() {
        assert!(Circuit::parse_dump("").is_err());
        assert!(Circuit::parse_dump("qubits=x").is_err());
        assert!(Circuit::parse_dump("qubits=2\nFOO targets=[0] controls=[]").is_err());
        assert!(Circuit::parse_dump("qubits=2\nRY targets=[0] controls=[]").is_err());
        assert!(Circuit::parse_dump("qubits=2\nX targets=[0] controls=[*1]").is_err());
        assert!(Circuit::parse_dump("qubits=2\nX targets=[2] controls=[]").is_err());
    }
}
