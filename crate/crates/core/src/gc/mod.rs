//! Garbled-circuit label comparison: the pool garbles a match-counting
//! circuit, the requester fetches labels for its true labels by OT and
//! evaluates, and the pool decodes the number of correct predictions `N`.

mod circuit;
mod garble;
mod ot;
mod serial;

pub use circuit::{
    ceil_log2, count_nonfree_gates, count_width, labels_to_bits, plaintext_oracle, table_formula,
    BoolCircuit, Gate, GateCounts, GateKind, Normalization, WireId, CONST_ONE,
};
pub use garble::{decode_output, evaluate, garble, EncodedOutput, GarbledCircuit, GarbledTables, Label, LABEL_BITS};
pub use ot::{ot_transfer, ot_wire_len, OtBackend, OtReceiver, OtSender, POINT_BYTES};
pub use serial::PublishedCircuit;

use rand::{CryptoRng, RngCore};

use crate::transcript::{MessageKind, Party, Transcript};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GcError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("corrupt garbled circuit: {0}")]
    CorruptCircuit(String),
    #[error("malformed garbled circuit bytes: {0}")]
    Malformed(String),
    #[error("oblivious transfer failed: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonRun {
    pub n: u64,
    pub published: PublishedCircuit,
}


/// Requester side of the evaluation once it holds the published material:
/// obtains its labels from `sender` by OT, evaluates and returns the
/// encoded output.
fn requester_evaluate<R: RngCore + CryptoRng + ?Sized>(
    published: &PublishedCircuit,
    circuit: &BoolCircuit,
    actual: &[u32],
    backend: OtBackend,
    sender: Party,
    rng: &mut R,
    transcript: &mut Transcript,
) -> Result<EncodedOutput, GcError> {
    let bits = labels_to_bits(actual, circuit.label_bits())?;
    let labels = ot_transfer(&published.requester_pairs, &bits, backend, sender, rng, transcript)?;
    let out = evaluate(&published.tables, circuit, &published.pool_labels, &labels)?;
    transcript.record(Party::Requester, sender, MessageKind::EncodedOutput, &out.to_bytes());
    Ok(out)
}

/// Runs the two-party comparison between the pool (`predicted`) and the
/// requester (`actual`).
pub fn compare_labels<R: RngCore + CryptoRng + ?Sized>(
    predicted: &[u32],
    actual: &[u32],
    label_bits: u32,
    garble_seed: u64,
    backend: OtBackend,
    rng: &mut R,
    transcript: &mut Transcript,
) -> Result<ComparisonRun, GcError> {
    if predicted.len() != actual.len() {
        return Err(GcError::Shape(format!(
            "{} predicted labels against {} actual",
            predicted.len(),
            actual.len()
        )));
    }
    let records = u32::try_from(predicted.len()).map_err(|_| GcError::Shape("too many records".into()))?;
    let circuit = BoolCircuit::comparison(records, label_bits)?;
    let gc = garble(&circuit, garble_seed);
    let published = gc.publish(&labels_to_bits(predicted, label_bits)?)?;

    transcript.record_size(Party::Pool, Party::Requester, MessageKind::GarbledCircuit, gc.tables.wire_len() as u64);
    let pool_bytes: Vec<u8> = published.pool_labels.iter().flat_map(|l| l.to_be_bytes()).collect();
    transcript.record(Party::Pool, Party::Requester, MessageKind::PoolInputLabels, &pool_bytes);

    let out = requester_evaluate(&published, &circuit, actual, backend, Party::Pool, rng, transcript)?;
    let n = decode_output(&published.tables, &out)?;
    Ok(ComparisonRun { n, published })
}

/// Replays the comparison against a published circuit, with `verifier`
/// acting as OT sender and the requester evaluating on its true labels.
pub fn verify_published<R: RngCore + CryptoRng + ?Sized>(
    published: &PublishedCircuit,
    actual: &[u32],
    backend: OtBackend,
    verifier: Party,
    rng: &mut R,
    transcript: &mut Transcript,
) -> Result<u64, GcError> {
    let circuit = published.circuit()?;
    if actual.len() != circuit.records() as usize {
        return Err(GcError::Shape(format!(
            "{} labels for a circuit over {} records",
            actual.len(),
            circuit.records()
        )));
    }
    let out = requester_evaluate(published, &circuit, actual, backend, verifier, rng, transcript)?;
    decode_output(&published.tables, &out)
}
