//! Masked first-layer label prediction between the pool and the requester.
//!
//! The requester encrypts its test features under its own key. The pool
//! evaluates the first layer homomorphically, hides each pre-activation
//! behind an encrypted random mask and sends the result back. The requester
//! decrypts only `z + h`; the pool removes `h`, applies the activation and
//! finishes the forward pass in the clear.

use std::collections::BTreeSet;

use num_bigint::{BigInt, RandBigInt};
use num_traits::One;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use super::cipher::{decrypt, encrypt, encrypt_with_secret, he_add, he_dot, Ciphertext};
use super::encoding::{FixedPointEncoding, Plaintext};
use super::paillier::{KeyPair, PublicKey};
use super::HeError;
use crate::fedmining::{argmax, sigmoid, Layer, ModelParams};
use crate::transcript::{MessageKind, Party, Transcript};

/// Masks are uniform integers in `[-2^40, 2^40]` at the encoding scale.
pub const MASK_BITS: u32 = 40;

/// Bytes used on the wire for one plaintext `z + h`.
pub const MASKED_PLAINTEXT_BYTES: usize = 16;

/// The requester's features, encrypted row by row. Labels are not part of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncryptedTestSet {
    rows: Vec<Vec<Ciphertext>>,
    width: usize,
}

impl EncryptedTestSet {
    pub fn encrypt<R: RngCore + CryptoRng + ?Sized>(
        kp: &KeyPair,
        enc: &FixedPointEncoding,
        features: &[Vec<f64>],
        rng: &mut R,
    ) -> Result<Self, HeError> {
        let width = features.first().map(Vec::len).unwrap_or(0);
        if features.iter().any(|r| r.len() != width) {
            return Err(HeError::Shape("test rows have different widths".into()));
        }
        let rows = features
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&v| encrypt_with_secret(kp, &enc.encode(v)?, rng))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { rows, width })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> &[Vec<Ciphertext>] {
        &self.rows
    }

    pub fn to_bytes(&self, pk: &PublicKey) -> Vec<u8> {
        self.rows.iter().flatten().flat_map(|c| c.to_bytes(pk)).collect()
    }
}

/// One-time additive mask for a single record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskVector {
    session: u64,
    values: Vec<Plaintext>,
}

impl MaskVector {
    pub fn sample<R: RngCore + ?Sized>(session: u64, k: usize, enc: &FixedPointEncoding, rng: &mut R) -> Self {
        let bound = BigInt::one() << MASK_BITS;
        let values = (0..k)
            .map(|_| Plaintext {
                value: rng.gen_bigint_range(&-bound.clone(), &(&bound + 1)),
                scale: enc.frac_bits(),
            })
            .collect();
        Self { session, values }
    }

    pub fn session(&self) -> u64 {
        self.session
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Plaintext] {
        &self.values
    }
}

/// Rejects any mask whose session has already been used.
#[derive(Debug, Clone, Default)]
pub struct MaskRegistry {
    used: BTreeSet<u64>,
}

impl MaskRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, mask: &MaskVector) -> Result<(), HeError> {
        if !self.used.insert(mask.session) {
            return Err(HeError::Protocol(format!("mask for session {} reused", mask.session)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.used.len()
    }

    pub fn is_empty(&self) -> bool {
        self.used.is_empty()
    }
}

/// `<z_k + h_k>` for one record, sent to the requester.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedActivations {
    pub session: u64,
    pub values: Vec<Ciphertext>,
}

/// `z_k + h_k` in the clear, sent back to the pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedReply {
    pub session: u64,
    pub values: Vec<Plaintext>,
}

impl MaskedReply {
    pub fn wire_len(&self) -> usize {
        self.values
            .iter()
            .map(|p| p.value.to_signed_bytes_be().len().max(MASKED_PLAINTEXT_BYTES))
            .sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        for p in &self.values {
            let raw = p.value.to_signed_bytes_be();
            let pad = MASKED_PLAINTEXT_BYTES.saturating_sub(raw.len());
            let fill = if p.value.sign() == num_bigint::Sign::Minus { 0xff } else { 0 };
            out.extend(std::iter::repeat(fill).take(pad));
            out.extend_from_slice(&raw);
        }
        out
    }
}

/// First-layer weights and biases encrypted under the requester's key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncryptedLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<Ciphertext>,
    /// Biases at the product scale, ready to be added to a dot product.
    pub bias: Vec<Ciphertext>,
}

impl EncryptedLayer {
    pub fn encrypt<R: RngCore + CryptoRng + ?Sized>(
        pk: &PublicKey,
        layer: &Layer,
        enc: &FixedPointEncoding,
        rng: &mut R,
    ) -> Result<Self, HeError> {
        let weights = layer
            .weights()
            .iter()
            .map(|&w| encrypt(pk, &enc.encode(w)?, rng))
            .collect::<Result<Vec<_>, _>>()?;
        let product_scale = 2 * enc.frac_bits();
        let bias = layer
            .bias()
            .iter()
            .map(|&b| encrypt(pk, &enc.encode(b)?.rescaled(product_scale)?, rng))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { inputs: layer.inputs(), outputs: layer.outputs(), weights, bias })
    }

    pub fn to_bytes(&self, pk: &PublicKey) -> Vec<u8> {
        self.weights.iter().chain(&self.bias).flat_map(|c| c.to_bytes(pk)).collect()
    }
}

/// Pool side: `<z_k + h_k> = sum_j <a_j> (x) w_kj (+) <b_k> (+) <h_k>`.
///
/// Weights are the pool's own plaintext values; `bias` comes from
/// [`EncryptedLayer::encrypt`] on the same layer.
pub fn first_layer_masked<R: RngCore + CryptoRng + ?Sized>(
    pk: &PublicKey,
    row: &[Ciphertext],
    layer: &Layer,
    bias: &[Ciphertext],
    mask: &MaskVector,
    enc: &FixedPointEncoding,
    rng: &mut R,
) -> Result<MaskedActivations, HeError> {
    if row.len() != layer.inputs() {
        return Err(HeError::Shape(format!(
            "record has {} features, first layer expects {}",
            row.len(),
            layer.inputs()
        )));
    }
    if mask.len() != layer.outputs() || bias.len() != layer.outputs() {
        return Err(HeError::Shape(format!(
            "first layer has {} outputs, mask {} and bias {}",
            layer.outputs(),
            mask.len(),
            bias.len()
        )));
    }
    let product_scale = 2 * enc.frac_bits();
    let mut values = Vec::with_capacity(layer.outputs());
    for k in 0..layer.outputs() {
        let w = layer.row(k).iter().map(|&w| enc.encode(w)).collect::<Result<Vec<_>, _>>()?;
        let z = he_add(pk, &he_dot(pk, row, &w)?, &bias[k])?;
        let h = encrypt(pk, &mask.values[k].rescaled(product_scale)?, rng)?;
        values.push(he_add(pk, &z, &h)?);
    }
    Ok(MaskedActivations { session: mask.session, values })
}

/// Requester side: decrypts the masked pre-activations.
pub fn requester_unmask_reply(kp: &KeyPair, msg: &MaskedActivations) -> Result<MaskedReply, HeError> {
    let values = msg.values.iter().map(|c| decrypt(kp, c)).collect::<Result<Vec<_>, _>>()?;
    Ok(MaskedReply { session: msg.session, values })
}

/// Pool side: `sigma((z + h) - h)` for every node.
pub fn unmask_and_activate(reply: &MaskedReply, mask: &MaskVector) -> Result<Vec<f64>, HeError> {
    if reply.session != mask.session {
        return Err(HeError::Protocol(format!(
            "reply for session {} unmasked with session {}",
            reply.session, mask.session
        )));
    }
    if reply.values.len() != mask.len() {
        return Err(HeError::Protocol(format!(
            "reply carries {} values, mask has {}",
            reply.values.len(),
            mask.len()
        )));
    }
    reply
        .values
        .iter()
        .zip(&mask.values)
        .map(|(zh, h)| {
            let h = h.rescaled(zh.scale)?;
            let z = Plaintext { value: &zh.value - &h.value, scale: zh.scale };
            Ok(sigmoid(z.to_f64()))
        })
        .collect()
}

/// Finishes the forward pass in the clear and returns the predicted label.
pub fn forward_rest(tail: &[Layer], activations: &[f64]) -> Result<usize, HeError> {
    let mut x = activations.to_vec();
    let last = tail.len().saturating_sub(1);
    for (i, layer) in tail.iter().enumerate() {
        if layer.inputs() != x.len() {
            return Err(HeError::Shape(format!(
                "layer expects {} inputs, got {}",
                layer.inputs(),
                x.len()
            )));
        }
        x = layer.affine(&x);
        if i != last {
            x.iter_mut().for_each(|v| *v = sigmoid(*v));
        }
    }
    if x.is_empty() {
        return Err(HeError::Shape("no activations".into()));
    }
    Ok(argmax(&x))
}

/// Runs the whole exchange for every record and returns the predicted labels.
///
/// Each record uses its own mask; sessions are numbered from `first_session`.
#[allow(clippy::too_many_arguments)]
pub fn private_inference<R: RngCore + CryptoRng + ?Sized>(
    requester: &KeyPair,
    test: &EncryptedTestSet,
    model: &ModelParams,
    enc: &FixedPointEncoding,
    registry: &mut MaskRegistry,
    first_session: u64,
    rng: &mut R,
    transcript: &mut Transcript,
) -> Result<Vec<usize>, HeError> {
    let pk = requester.public();
    let first = &model.layers()[0];
    if !test.is_empty() && test.width() != first.inputs() {
        return Err(HeError::Shape(format!(
            "test set has {} features, model expects {}",
            test.width(),
            first.inputs()
        )));
    }
    transcript.record(Party::Requester, Party::Pool, MessageKind::PublicKey, &pk.modulus().to_bytes_be());
    if test.is_empty() {
        return Ok(Vec::new());
    }
    transcript.record(Party::Requester, Party::Pool, MessageKind::EncryptedFeatures, &test.to_bytes(pk));

    let bias = EncryptedLayer::encrypt(pk, first, enc, rng)?.bias;
    let tail = &model.layers()[1..];
    let mut labels = Vec::with_capacity(test.len());
    for (i, row) in test.rows().iter().enumerate() {
        let mask = MaskVector::sample(first_session + i as u64, first.outputs(), enc, rng);
        registry.register(&mask)?;
        let msg = first_layer_masked(pk, row, first, &bias, &mask, enc, rng)?;
        let out: Vec<u8> = msg.values.iter().flat_map(|c| c.to_bytes(pk)).collect();
        transcript.record(Party::Pool, Party::Requester, MessageKind::MaskedActivations, &out);

        let reply = requester_unmask_reply(requester, &msg)?;
        transcript.record(Party::Requester, Party::Pool, MessageKind::MaskedPlaintext, &reply.to_bytes());

        let act = unmask_and_activate(&reply, &mask)?;
        labels.push(forward_rest(tail, &act)?);
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    use super::super::cipher::decrypt_f64;
    use super::super::paillier::keygen;
    use super::*;

    fn setup() -> (KeyPair, ChaCha20Rng, FixedPointEncoding) {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        (keygen(512, &mut rng).unwrap(), rng, FixedPointEncoding::default())
    }

    #[test]
    fn worked_example_decrypts_to_sixteen() {
        let (kp, mut rng, enc) = setup();
        let pk = kp.public();
        let layer = Layer::new(2, 1, vec![2.0, 3.0], vec![1.0]).unwrap();
        let test = EncryptedTestSet::encrypt(&kp, &enc, &[vec![1.0, 1.0]], &mut rng).unwrap();
        let bias = EncryptedLayer::encrypt(pk, &layer, &enc, &mut rng).unwrap().bias;
        let mask = MaskVector {
            session: 0,
            values: vec![enc.encode(10.0).unwrap()],
        };
        let out = first_layer_masked(pk, &test.rows()[0], &layer, &bias, &mask, &enc, &mut rng).unwrap();
        assert_eq!(decrypt_f64(&kp, &out.values[0]).unwrap(), 16.0);
    }

    #[test]
    fn zero_layer_zero_mask_is_zero() {
        let (kp, mut rng, enc) = setup();
        let pk = kp.public();
        let layer = Layer::zeros(3, 2);
        let test = EncryptedTestSet::encrypt(&kp, &enc, &[vec![0.3, -1.0, 2.0]], &mut rng).unwrap();
        let bias = EncryptedLayer::encrypt(pk, &layer, &enc, &mut rng).unwrap().bias;
        let mask = MaskVector { session: 0, values: vec![Plaintext::integer(0); 2] };
        let out = first_layer_masked(pk, &test.rows()[0], &layer, &bias, &mask, &enc, &mut rng).unwrap();
        for c in &out.values {
            assert_eq!(decrypt_f64(&kp, c).unwrap(), 0.0);
        }
    }

    #[test]
    fn width_mismatch_is_shape_error() {
        let (kp, mut rng, enc) = setup();
        let pk = kp.public();
        let layer = Layer::zeros(3, 1);
        let test = EncryptedTestSet::encrypt(&kp, &enc, &[vec![1.0, 2.0]], &mut rng).unwrap();
        let bias = EncryptedLayer::encrypt(pk, &layer, &enc, &mut rng).unwrap().bias;
        let mask = MaskVector::sample(0, 1, &enc, &mut rng);
        let err = first_layer_masked(pk, &test.rows()[0], &layer, &bias, &mask, &enc, &mut rng);
        assert!(matches!(err, Err(HeError::Shape(_))));
    }

    #[test]
    fn unmask_of_mask_is_half() {
        let (_, mut rng, enc) = setup();
        let mask = MaskVector::sample(4, 3, &enc, &mut rng);
        let reply = MaskedReply { session: 4, values: mask.values.clone() };
        assert_eq!(unmask_and_activate(&reply, &mask).unwrap(), vec![0.5; 3]);
    }

    #[test]
    fn unmask_of_ten() {
        let (_, _, enc) = setup();
        let mask = MaskVector { session: 1, values: vec![enc.encode(3.0).unwrap()] };
        let reply = MaskedReply { session: 1, values: vec![enc.encode(13.0).unwrap()] };
        let a = unmask_and_activate(&reply, &mask).unwrap();
        assert!((a[0] - 0.9999546).abs() < 1e-7);
    }

    #[test]
    fn session_mismatch_rejected() {
        let (_, mut rng, enc) = setup();
        let mask = MaskVector::sample(1, 2, &enc, &mut rng);
        let reply = MaskedReply { session: 2, values: mask.values.clone() };
        assert!(matches!(unmask_and_activate(&reply, &mask), Err(HeError::Protocol(_))));
    }

    #[test]
    fn mask_reuse_rejected() {
        let (_, mut rng, enc) = setup();
        let mut reg = MaskRegistry::new();
        let mask = MaskVector::sample(9, 2, &enc, &mut rng);
        reg.register(&mask).unwrap();
        assert!(reg.register(&mask).is_err());
    }

    #[test]
    fn masks_stay_in_range() {
        let (_, mut rng, enc) = setup();
        let bound = BigInt::one() << MASK_BITS;
        for s in 0..50 {
            for h in MaskVector::sample(s, 4, &enc, &mut rng).values() {
                assert!(h.value <= bound && h.value >= -bound.clone());
            }
        }
    }

    #[test]
    fn forward_rest_ties_and_identity() {
        assert_eq!(forward_rest(&[], &[0.0, 1.0, 0.0]).unwrap(), 1);
        assert_eq!(forward_rest(&[], &[0.5, 0.5]).unwrap(), 0);
        let id = Layer::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(forward_rest(&[id], &[0.0, 1.0]).unwrap(), 1);
    }

    #[test]
    fn private_labels_match_plaintext() {
        let (kp, mut rng, enc) = setup();
        let model = ModelParams::random(&[3, 4, 3], 1.5, &mut rng).unwrap();
        let features: Vec<Vec<f64>> = (0..12)
            .map(|i| (0..3).map(|j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0).collect())
            .collect();
        let test = EncryptedTestSet::encrypt(&kp, &enc, &features, &mut rng).unwrap();
        let mut reg = MaskRegistry::new();
        let mut t = Transcript::new("t");
        let labels = private_inference(&kp, &test, &model, &enc, &mut reg, 0, &mut rng, &mut t).unwrap();
        let plain: Vec<usize> = features.iter().map(|x| model.predict_label(x)).collect();
        assert_eq!(labels, plain);
        assert_eq!(reg.len(), 12);
    }
}
