//! 1-out-of-2 oblivious transfer of wire labels.
//!
//! The discrete-log backend is the "simplest OT" of Chou and Orlandi over the
//! Ristretto group, secure against honest-but-curious parties. The sender
//! publishes `A = aG`; for choice `c` the receiver sends `B = bG + cA`; the
//! sender masks `m0` with `H(aB)` and `m1` with `H(a(B - A))`, and the
//! receiver can only form `H(bA)`.

use curve25519_dalek::constants::RISTRETTO_BASEPOINT_POINT;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::garble::Label;
use super::GcError;
use crate::transcript::{MessageKind, Party, Transcript};

pub const POINT_BYTES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OtBackend {
    DiscreteLog,
    /// A trusted third party hands the receiver its chosen labels directly.
    TrustedDealer,
}

fn decompress(bytes: &[u8]) -> Result<RistrettoPoint, GcError> {
    CompressedRistretto::from_slice(bytes)
        .ok()
        .and_then(|c| c.decompress())
        .ok_or_else(|| GcError::Protocol("malformed group element".into()))
}

fn pad_key(a: &RistrettoPoint, b: &RistrettoPoint, shared: &RistrettoPoint, index: u64) -> u128 {
    let mut h = Sha256::new();
    h.update(a.compress().as_bytes());
    h.update(b.compress().as_bytes());
    h.update(shared.compress().as_bytes());
    h.update(index.to_be_bytes());
    u128::from_be_bytes(h.finalize()[..16].try_into().expect("16 bytes"))
}

pub struct OtSender {
    a: Scalar,
    big_a: RistrettoPoint,
}

impl OtSender {
    pub fn new<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Self {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        Self::from_scalar(Scalar::from_bytes_mod_order_wide(&wide))
    }

    pub fn from_scalar(a: Scalar) -> Self {
        Self { a, big_a: a * RISTRETTO_BASEPOINT_POINT }
    }

    pub fn setup_message(&self) -> [u8; POINT_BYTES] {
        self.big_a.compress().to_bytes()
    }

    /// Encrypts both labels of every pair under the receiver's choice points.
    pub fn respond(&self, choices: &[[u8; POINT_BYTES]], pairs: &[(Label, Label)]) -> Result<Vec<[u8; 32]>, GcError> {
        if choices.len() != pairs.len() {
            return Err(GcError::Protocol(format!("{} choice messages for {} pairs", choices.len(), pairs.len())));
        }
        choices
            .iter()
            .zip(pairs)
            .enumerate()
            .map(|(i, (msg, &(m0, m1)))| {
                let b = decompress(msg)?;
                let k0 = pad_key(&self.big_a, &b, &(self.a * b), i as u64);
                let k1 = pad_key(&self.big_a, &b, &(self.a * (b - self.big_a)), i as u64);
                let mut out = [0u8; 32];
                out[..16].copy_from_slice(&(m0 ^ k0).to_be_bytes());
                out[16..].copy_from_slice(&(m1 ^ k1).to_be_bytes());
                Ok(out)
            })
            .collect()
    }
}

pub struct OtReceiver {
    big_a: RistrettoPoint,
    choices: Vec<bool>,
    points: Vec<RistrettoPoint>,
    scalars: Vec<Scalar>,
}

impl OtReceiver {
    pub fn new<R: RngCore + CryptoRng + ?Sized>(
        setup: &[u8; POINT_BYTES],
        choices: &[bool],
        rng: &mut R,
    ) -> Result<Self, GcError> {
        let scalars = choices
            .iter()
            .map(|_| {
                let mut wide = [0u8; 64];
                rng.fill_bytes(&mut wide);
                Scalar::from_bytes_mod_order_wide(&wide)
            })
            .collect();
        Self::with_scalars(setup, choices, scalars)
    }

    /// Receiver with fixed per-bit secrets.
    pub fn with_scalars(setup: &[u8; POINT_BYTES], choices: &[bool], scalars: Vec<Scalar>) -> Result<Self, GcError> {
        if scalars.len() != choices.len() {
            return Err(GcError::Protocol("one scalar per choice bit required".into()));
        }
        let big_a = decompress(setup)?;
        let points = choices
            .iter()
            .zip(&scalars)
            .map(|(&c, b)| {
                let bg = b * RISTRETTO_BASEPOINT_POINT;
                if c {
                    big_a + bg
                } else {
                    bg
                }
            })
            .collect();
        Ok(Self { big_a, choices: choices.to_vec(), points, scalars })
    }

    pub fn choice_messages(&self) -> Vec<[u8; POINT_BYTES]> {
        self.points.iter().map(|p| p.compress().to_bytes()).collect()
    }

    pub fn finish(&self, transfers: &[[u8; 32]]) -> Result<Vec<Label>, GcError> {
        if transfers.len() != self.choices.len() {
            return Err(GcError::Protocol(format!(
                "{} transfers for {} choices",
                transfers.len(),
                self.choices.len()
            )));
        }
        Ok(transfers
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let k = pad_key(&self.big_a, &self.points[i], &(self.scalars[i] * self.big_a), i as u64);
                let half = if self.choices[i] { &t[16..] } else { &t[..16] };
                u128::from_be_bytes(half.try_into().expect("16 bytes")) ^ k
            })
            .collect())
    }
}

/// Bytes the discrete-log exchange puts on the wire for `choices` transfers.
pub fn ot_wire_len(choices: usize) -> u64 {
    if choices == 0 {
        return 0;
    }
    (POINT_BYTES + choices * (POINT_BYTES + 32)) as u64
}

/// Delivers `pairs[i].choices[i]` to the receiver and logs the exchange.
pub fn ot_transfer<R: RngCore + CryptoRng + ?Sized>(
    pairs: &[(Label, Label)],
    choices: &[bool],
    backend: OtBackend,
    sender_party: Party,
    rng: &mut R,
    transcript: &mut Transcript,
) -> Result<Vec<Label>, GcError> {
    if pairs.len() != choices.len() {
        return Err(GcError::Protocol(format!("{} pairs for {} choice bits", pairs.len(), choices.len())));
    }
    match backend {
        OtBackend::TrustedDealer => {
            Ok(pairs.iter().zip(choices).map(|(&(m0, m1), &c)| if c { m1 } else { m0 }).collect())
        }
        OtBackend::DiscreteLog => {
            if pairs.is_empty() {
                return Ok(Vec::new());
            }
            let sender = OtSender::new(rng);
            let setup = sender.setup_message();
            transcript.record(sender_party, Party::Requester, MessageKind::OtSetup, &setup);
            let receiver = OtReceiver::new(&setup, choices, rng)?;
            let msgs = receiver.choice_messages();
            transcript.record(Party::Requester, sender_party, MessageKind::OtChoice, &msgs.concat());
            let transfers = sender.respond(&msgs, pairs)?;
            transcript.record(sender_party, Party::Requester, MessageKind::OtTransfer, &transfers.concat());
            receiver.finish(&transfers)
        }
    }
}
