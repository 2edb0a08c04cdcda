use serde::{Deserialize, Serialize};

use super::GcError;

pub type WireId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    Xor,
    Not,
    Or,
    And,
}

impl GateKind {
    /// XOR and NOT cost no garbled table.
    pub fn is_free(self) -> bool {
        matches!(self, GateKind::Xor | GateKind::Not)
    }

    pub fn eval(self, a: bool, b: bool) -> bool {
        match self {
            GateKind::Xor => a ^ b,
            GateKind::Not => !a,
            GateKind::Or => a | b,
            GateKind::And => a & b,
        }
    }
}

/// A gate; `b` is ignored for NOT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub a: WireId,
    pub b: WireId,
    pub out: WireId,
}

/// Match-counting circuit over `records` label pairs of `label_bits` bits.
///
/// Wire 0 is the constant-true wire. The garbler's (pool's) input bits come
/// next, then the evaluator's (requester's), record-major and LSB first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoolCircuit {
    records: u32,
    label_bits: u32,
    wire_count: u32,
    gates: Vec<Gate>,
    outputs: Vec<WireId>,
    /// Depth of the adder tree in pairwise levels.
    adder_levels: u32,
}

pub const CONST_ONE: WireId = 0;

/// `ceil(log2(x))` for `x >= 1`.
pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// Bits needed for a count in `0..=n`.
pub fn count_width(n: u64) -> u32 {
    ceil_log2(n + 1).max(1)
}

struct Builder {
    next: WireId,
    gates: Vec<Gate>,
}

impl Builder {
    fn wire(&mut self) -> WireId {
        let w = self.next;
        self.next += 1;
        w
    }

    fn gate(&mut self, kind: GateKind, a: WireId, b: WireId) -> WireId {
        let out = self.wire();
        self.gates.push(Gate { kind, a, b, out });
        out
    }

    fn xor(&mut self, a: WireId, b: WireId) -> WireId {
        self.gate(GateKind::Xor, a, b)
    }

    fn not(&mut self, a: WireId) -> WireId {
        self.gate(GateKind::Not, a, a)
    }

    fn and(&mut self, a: WireId, b: WireId) -> WireId {
        self.gate(GateKind::And, a, b)
    }

    fn or(&mut self, a: WireId, b: WireId) -> WireId {
        self.gate(GateKind::Or, a, b)
    }

    /// Full adder with one AND: `cout = c ^ ((a ^ c) & (b ^ c))`.
    fn full_add(&mut self, a: WireId, b: WireId, c: WireId) -> (WireId, WireId) {
        let ac = self.xor(a, c);
        let bc = self.xor(b, c);
        let ab = self.xor(a, b);
        let sum = self.xor(ab, c);
        let t = self.and(ac, bc);
        let cout = self.xor(c, t);
        (sum, cout)
    }

    fn half_add(&mut self, a: WireId, b: WireId) -> (WireId, WireId) {
        (self.xor(a, b), self.and(a, b))
    }

    /// Ripple-carry sum of two LSB-first numbers, truncated to `width` bits.
    fn add(&mut self, x: &[WireId], y: &[WireId], width: usize) -> Vec<WireId> {
        let (long, short) = if x.len() >= y.len() { (x, y) } else { (y, x) };
        let mut out = Vec::with_capacity(width);
        let mut carry: Option<WireId> = None;
        for i in 0..long.len() {
            if out.len() == width {
                return out;
            }
            // the final carry is only needed if it still fits
            let need_carry = out.len() + 1 < width;
            let (s, c) = match (short.get(i), carry) {
                (Some(&b), None) => {
                    if need_carry {
                        self.half_add(long[i], b)
                    } else {
                        (self.xor(long[i], b), CONST_ONE)
                    }
                }
                (Some(&b), Some(c)) => {
                    if need_carry {
                        self.full_add(long[i], b, c)
                    } else {
                        let ab = self.xor(long[i], b);
                        (self.xor(ab, c), CONST_ONE)
                    }
                }
                (None, Some(c)) => {
                    if need_carry {
                        self.half_add(long[i], c)
                    } else {
                        (self.xor(long[i], c), CONST_ONE)
                    }
                }
                (None, None) => {
                    out.push(long[i]);
                    continue;
                }
            };
            out.push(s);
            carry = need_carry.then_some(c);
        }
        if let Some(c) = carry {
            if out.len() < width {
                out.push(c);
            }
        }
        out
    }
}

impl BoolCircuit {
    /// Per record: bitwise XOR, OR-reduction, NOT gives the match bit. A tree
    /// of ripple adders sums the match bits into `N`.
    pub fn comparison(records: u32, label_bits: u32) -> Result<Self, GcError> {
        if records == 0 || label_bits == 0 {
            return Err(GcError::Shape(format!(
                "need at least one record and one label bit (got I={records}, l={label_bits})"
            )));
        }
        if label_bits > 32 {
            return Err(GcError::Shape(format!("label width {label_bits} exceeds 32 bits")));
        }
        let inputs = u64::from(records) * u64::from(label_bits);
        if inputs > u64::from(u32::MAX / 16) {
            return Err(GcError::Shape(format!("{records} records of {label_bits} bits is too large")));
        }
        let mut b = Builder { next: 1 + 2 * inputs as u32, gates: Vec::new() };
        let pool = |i: u32, bit: u32| 1 + i * label_bits + bit;
        let req = |i: u32, bit: u32| 1 + inputs as u32 + i * label_bits + bit;

        // (bits, how many match bits this operand counts)
        let mut operands: Vec<(Vec<WireId>, u64)> = Vec::with_capacity(records as usize);
        for i in 0..records {
            let diff: Vec<WireId> = (0..label_bits).map(|bit| b.xor(pool(i, bit), req(i, bit))).collect();
            let mut any = diff[0];
            for &d in &diff[1..] {
                any = b.or(any, d);
            }
            operands.push((vec![b.not(any)], 1));
        }

        let mut levels = 0;
        while operands.len() > 1 {
            levels += 1;
            let mut next = Vec::with_capacity(operands.len().div_ceil(2));
            let mut it = operands.into_iter();
            while let Some((x, nx)) = it.next() {
                match it.next() {
                    Some((y, ny)) => {
                        let covered = nx + ny;
                        let sum = b.add(&x, &y, count_width(covered) as usize);
                        next.push((sum, covered));
                    }
                    None => next.push((x, nx)),
                }
            }
            operands = next;
        }
        let (outputs, _) = operands.pop().expect("at least one record");
        debug_assert_eq!(outputs.len() as u32, count_width(u64::from(records)));
        Ok(Self { records, label_bits, wire_count: b.next, gates: b.gates, outputs, adder_levels: levels })
    }

    pub fn records(&self) -> u32 {
        self.records
    }

    pub fn label_bits(&self) -> u32 {
        self.label_bits
    }

    pub fn wire_count(&self) -> u32 {
        self.wire_count
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn outputs(&self) -> &[WireId] {
        &self.outputs
    }

    pub fn adder_levels(&self) -> u32 {
        self.adder_levels
    }

    pub fn input_bits_per_party(&self) -> u32 {
        self.records * self.label_bits
    }

    pub fn pool_input_wires(&self) -> std::ops::Range<WireId> {
        1..1 + self.input_bits_per_party()
    }

    pub fn requester_input_wires(&self) -> std::ops::Range<WireId> {
        let n = self.input_bits_per_party();
        1 + n..1 + 2 * n
    }

    pub fn nonfree_gate_count(&self) -> usize {
        self.gates.iter().filter(|g| !g.kind.is_free()).count()
    }

    /// Evaluates on clear bits; each slice is record-major, LSB first.
    pub fn eval_plain(&self, pool_bits: &[bool], requester_bits: &[bool]) -> Result<u64, GcError> {
        let n = self.input_bits_per_party() as usize;
        if pool_bits.len() != n || requester_bits.len() != n {
            return Err(GcError::Shape(format!(
                "expected {n} input bits per party, got {} and {}",
                pool_bits.len(),
                requester_bits.len()
            )));
        }
        let mut wires = vec![false; self.wire_count as usize];
        wires[CONST_ONE as usize] = true;
        wires[1..1 + n].copy_from_slice(pool_bits);
        wires[1 + n..1 + 2 * n].copy_from_slice(requester_bits);
        for g in &self.gates {
            wires[g.out as usize] = g.kind.eval(wires[g.a as usize], wires[g.b as usize]);
        }
        Ok(self.outputs.iter().enumerate().fold(0u64, |acc, (i, &w)| acc | (u64::from(wires[w as usize]) << i)))
    }
}

/// Splits labels into record-major LSB-first bits.
pub fn labels_to_bits(labels: &[u32], label_bits: u32) -> Result<Vec<bool>, GcError> {
    if label_bits < 32 {
        if let Some(bad) = labels.iter().find(|&&v| v >> label_bits != 0) {
            return Err(GcError::Shape(format!("label {bad} does not fit in {label_bits} bits")));
        }
    }
    Ok(labels.iter().flat_map(|&v| (0..label_bits).map(move |b| (v >> b) & 1 == 1)).collect())
}

/// Reference match count.
pub fn plaintext_oracle(predicted: &[u32], actual: &[u32]) -> Result<u64, GcError> {
    if predicted.len() != actual.len() {
        return Err(GcError::Shape(format!(
            "{} predicted labels against {} actual",
            predicted.len(),
            actual.len()
        )));
    }
    Ok(predicted.iter().zip(actual).filter(|(a, b)| a == b).count() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Two-input non-free gates actually present.
    Raw,
    /// One OR per record and `I/2` adder gates per tree level.
    Nominal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateCounts {
    pub normalization: Normalization,
    pub records: u32,
    pub label_bits: u32,
    pub or_gates: f64,
    pub adder_gates: f64,
    pub total: f64,
    pub free_gates: u64,
}

pub fn count_nonfree_gates(circuit: &BoolCircuit, normalization: Normalization) -> GateCounts {
    let free_gates = circuit.gates.iter().filter(|g| g.kind.is_free()).count() as u64;
    let (or_gates, adder_gates) = match normalization {
        Normalization::Raw => {
            let ors = circuit.gates.iter().filter(|g| g.kind == GateKind::Or).count();
            let ands = circuit.gates.iter().filter(|g| g.kind == GateKind::And).count();
            (ors as f64, ands as f64)
        }
        Normalization::Nominal => {
            let i = f64::from(circuit.records);
            (i, i * f64::from(circuit.adder_levels) / 2.0)
        }
    };
    GateCounts {
        normalization,
        records: circuit.records,
        label_bits: circuit.label_bits,
        or_gates,
        adder_gates,
        total: or_gates + adder_gates,
        free_gates,
    }
}

/// `I + I ceil(log2 I) / 2`.
pub fn table_formula(records: u64) -> f64 {
    let i = records as f64;
    i + i * f64::from(ceil_log2(records)) / 2.0
}
