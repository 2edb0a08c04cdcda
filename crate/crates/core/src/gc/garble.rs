//! Free-XOR garbling with point-and-permute and four-row tables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::circuit::{BoolCircuit, GateKind, CONST_ONE};
use super::GcError;

/// Wire label width in bits.
pub const LABEL_BITS: u32 = 128;

pub type Label = u128;

fn permute_bit(l: Label) -> usize {
    (l & 1) as usize
}

/// `SHA-256(a || b || gate)` truncated to 128 bits.
fn prf(a: Label, b: Label, gate: u64) -> Label {
    let mut h = Sha256::new();
    h.update(a.to_be_bytes());
    h.update(b.to_be_bytes());
    h.update(gate.to_be_bytes());
    let d = h.finalize();
    u128::from_be_bytes(d[..16].try_into().expect("16 bytes"))
}

fn output_tag(l: Label, index: u64) -> u128 {
    let mut h = Sha256::new();
    h.update(b"out");
    h.update(l.to_be_bytes());
    h.update(index.to_be_bytes());
    let d = h.finalize();
    u128::from_be_bytes(d[..16].try_into().expect("16 bytes"))
}

/// Everything the evaluator needs apart from its own input labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GarbledTables {
    pub records: u32,
    pub label_bits: u32,
    /// One table per non-free gate, in gate order, rows indexed by
    /// `2 * permute(a) + permute(b)`.
    pub tables: Vec<[Label; 4]>,
    /// Active label of the constant-true wire.
    pub const_one: Label,
    /// Hashes of the 0 and 1 labels of every output wire, LSB first.
    pub decoding: Vec<(u128, u128)>,
}

impl GarbledTables {
    /// Bytes the pool ships to the evaluator: tables, the constant label and
    /// the decoding hashes.
    pub fn wire_len(&self) -> usize {
        16 + self.tables.len() * 64 + 16 + self.decoding.len() * 32
    }
}

/// A garbled circuit as held by the garbler: tables plus both labels of
/// every input wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GarbledCircuit {
    pub tables: GarbledTables,
    pub pool_pairs: Vec<(Label, Label)>,
    pub requester_pairs: Vec<(Label, Label)>,
}

/// Labels on the output wires produced by evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedOutput(pub Vec<Label>);

impl EncodedOutput {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.iter().flat_map(|l| l.to_be_bytes()).collect()
    }
}

pub fn garble(circuit: &BoolCircuit, seed: u64) -> GarbledCircuit {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let delta: Label = rng.gen::<u128>() | 1;
    let mut zero = vec![0u128; circuit.wire_count() as usize];
    zero[CONST_ONE as usize] = rng.gen();
    for w in circuit.pool_input_wires().chain(circuit.requester_input_wires()) {
        zero[w as usize] = rng.gen();
    }

    let mut tables = Vec::with_capacity(circuit.nonfree_gate_count());
    for (id, g) in circuit.gates().iter().enumerate() {
        let (a0, b0) = (zero[g.a as usize], zero[g.b as usize]);
        match g.kind {
            GateKind::Xor => zero[g.out as usize] = a0 ^ b0,
            GateKind::Not => zero[g.out as usize] = a0 ^ zero[CONST_ONE as usize],
            GateKind::Or | GateKind::And => {
                let out0: Label = rng.gen();
                zero[g.out as usize] = out0;
                let mut table = [0u128; 4];
                for va in [false, true] {
                    for vb in [false, true] {
                        let la = if va { a0 ^ delta } else { a0 };
                        let lb = if vb { b0 ^ delta } else { b0 };
                        let lo = if g.kind.eval(va, vb) { out0 ^ delta } else { out0 };
                        table[2 * permute_bit(la) + permute_bit(lb)] = prf(la, lb, id as u64) ^ lo;
                    }
                }
                tables.push(table);
            }
        }
    }

    let decoding = circuit
        .outputs()
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let l0 = zero[w as usize];
            (output_tag(l0, i as u64), output_tag(l0 ^ delta, i as u64))
        })
        .collect();
    let pairs = |range: std::ops::Range<u32>| range.map(|w| (zero[w as usize], zero[w as usize] ^ delta)).collect();
    GarbledCircuit {
        tables: GarbledTables {
            records: circuit.records(),
            label_bits: circuit.label_bits(),
            tables,
            const_one: zero[CONST_ONE as usize] ^ delta,
            decoding,
        },
        pool_pairs: pairs(circuit.pool_input_wires()),
        requester_pairs: pairs(circuit.requester_input_wires()),
    }
}

impl GarbledCircuit {
    /// Active labels for the garbler's own input bits.
    pub fn encode_pool_inputs(&self, bits: &[bool]) -> Result<Vec<Label>, GcError> {
        select(&self.pool_pairs, bits)
    }

    /// Labels the evaluator would obtain by OT; for tests and the dealer.
    pub fn encode_requester_inputs(&self, bits: &[bool]) -> Result<Vec<Label>, GcError> {
        select(&self.requester_pairs, bits)
    }
}

fn select(pairs: &[(Label, Label)], bits: &[bool]) -> Result<Vec<Label>, GcError> {
    if pairs.len() != bits.len() {
        return Err(GcError::Shape(format!("{} input bits for {} wires", bits.len(), pairs.len())));
    }
    Ok(pairs.iter().zip(bits).map(|(&(l0, l1), &b)| if b { l1 } else { l0 }).collect())
}

/// Evaluates gate by gate on one label per wire.
pub fn evaluate(
    gc: &GarbledTables,
    circuit: &BoolCircuit,
    pool_labels: &[Label],
    requester_labels: &[Label],
) -> Result<EncodedOutput, GcError> {
    if gc.records != circuit.records() || gc.label_bits != circuit.label_bits() {
        return Err(GcError::CorruptCircuit("tables do not belong to this circuit".into()));
    }
    if gc.tables.len() != circuit.nonfree_gate_count() || gc.decoding.len() != circuit.outputs().len() {
        return Err(GcError::CorruptCircuit(format!(
            "{} tables for {} non-free gates",
            gc.tables.len(),
            circuit.nonfree_gate_count()
        )));
    }
    let n = circuit.input_bits_per_party() as usize;
    if pool_labels.len() != n || requester_labels.len() != n {
        return Err(GcError::Shape(format!(
            "expected {n} labels per party, got {} and {}",
            pool_labels.len(),
            requester_labels.len()
        )));
    }
    let mut wires = vec![0u128; circuit.wire_count() as usize];
    wires[CONST_ONE as usize] = gc.const_one;
    wires[1..1 + n].copy_from_slice(pool_labels);
    wires[1 + n..1 + 2 * n].copy_from_slice(requester_labels);
    let mut next_table = 0;
    for (id, g) in circuit.gates().iter().enumerate() {
        let (la, lb) = (wires[g.a as usize], wires[g.b as usize]);
        wires[g.out as usize] = match g.kind {
            GateKind::Xor => la ^ lb,
            GateKind::Not => la ^ gc.const_one,
            GateKind::Or | GateKind::And => {
                let row = gc.tables[next_table][2 * permute_bit(la) + permute_bit(lb)];
                next_table += 1;
                prf(la, lb, id as u64) ^ row
            }
        };
    }
    Ok(EncodedOutput(circuit.outputs().iter().map(|&w| wires[w as usize]).collect()))
}

/// Maps output labels to the bits of `N`.
pub fn decode_output(gc: &GarbledTables, encoded: &EncodedOutput) -> Result<u64, GcError> {
    if encoded.0.len() != gc.decoding.len() {
        return Err(GcError::CorruptCircuit(format!(
            "{} output labels for {} output wires",
            encoded.0.len(),
            gc.decoding.len()
        )));
    }
    let mut n = 0u64;
    for (i, (&l, &(h0, h1))) in encoded.0.iter().zip(&gc.decoding).enumerate() {
        let tag = output_tag(l, i as u64);
        if tag == h1 {
            n |= 1 << i;
        } else if tag != h0 {
            return Err(GcError::CorruptCircuit(format!("output wire {i} carries an unknown label")));
        }
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    use super::super::circuit::{labels_to_bits, plaintext_oracle};
    use super::*;

    fn run(pred: &[u32], act: &[u32], l: u32, seed: u64) -> Result<u64, GcError> {
        let c = BoolCircuit::comparison(pred.len() as u32, l)?;
        let gc = garble(&c, seed);
        let pl = gc.encode_pool_inputs(&labels_to_bits(pred, l)?)?;
        let rl = gc.encode_requester_inputs(&labels_to_bits(act, l)?)?;
        decode_output(&gc.tables, &evaluate(&gc.tables, &c, &pl, &rl)?)
    }

    #[test]
    fn perfect_and_disjoint() {
        let all: Vec<u32> = (0..8).collect();
        assert_eq!(run(&all, &all, 8, 1).unwrap(), 8);
        let other: Vec<u32> = (0..8).map(|v| v + 100).collect();
        assert_eq!(run(&all, &other, 8, 1).unwrap(), 0);
    }

    #[test]
    fn random_instances_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for seed in 0..50 {
            let i = rng.gen_range(1..=100);
            let pred: Vec<u32> = (0..i).map(|_| rng.gen_range(0..16)).collect();
            let act: Vec<u32> = (0..i).map(|_| rng.gen_range(0..16)).collect();
            assert_eq!(run(&pred, &act, 4, seed).unwrap(), plaintext_oracle(&pred, &act).unwrap());
        }
    }

    #[test]
    fn one_table_per_nonfree_gate() {
        let c = BoolCircuit::comparison(13, 3).unwrap();
        let gc = garble(&c, 0);
        assert_eq!(gc.tables.tables.len(), c.nonfree_gate_count());
    }

    #[test]
    fn deterministic_for_seed() {
        let c = BoolCircuit::comparison(5, 3).unwrap();
        assert_eq!(garble(&c, 9), garble(&c, 9));
        assert_ne!(garble(&c, 9), garble(&c, 10));
    }

    #[test]
    fn free_xor_offset_shared_and_odd() {
        let c = BoolCircuit::comparison(3, 2).unwrap();
        let gc = garble(&c, 4);
        let delta = gc.pool_pairs[0].0 ^ gc.pool_pairs[0].1;
        assert_eq!(delta & 1, 1);
        assert!(gc.pool_pairs.iter().chain(&gc.requester_pairs).all(|(a, b)| a ^ b == delta));
    }

    #[test]
    fn tampered_table_detected_at_output() {
        let pred = [1u32, 2, 3, 4];
        let c = BoolCircuit::comparison(4, 3).unwrap();
        let mut gc = garble(&c, 3);
        for t in gc.tables.tables.iter_mut() {
            for row in t.iter_mut() {
                *row ^= 1 << 77;
            }
        }
        let bits = labels_to_bits(&pred, 3).unwrap();
        let pl = gc.encode_pool_inputs(&bits).unwrap();
        let rl = gc.encode_requester_inputs(&bits).unwrap();
        let out = evaluate(&gc.tables, &c, &pl, &rl).unwrap();
        assert!(matches!(decode_output(&gc.tables, &out), Err(GcError::CorruptCircuit(_))));
    }
}
