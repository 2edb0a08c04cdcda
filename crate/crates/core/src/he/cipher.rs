use num_bigint::{BigInt, BigUint};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use super::encoding::{decode_at, Plaintext};
use super::paillier::{KeyPair, PublicKey};
use super::HeError;

/// A Paillier ciphertext tagged with the scale of the value it carries.
///
/// `mag_bits` bounds the magnitude of the plaintext, so operations that could
/// wrap around the plaintext space are refused before they happen and a
/// decryption exceeding the bound is reported as tampering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ciphertext {
    #[serde(with = "hex_biguint")]
    payload: BigUint,
    scale: u32,
    key_id: u64,
    mag_bits: u64,
}

mod hex_biguint {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v.to_bytes_be()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map(|b| BigUint::from_bytes_be(&b)).map_err(serde::de::Error::custom)
    }
}

impl Ciphertext {
    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn key_id(&self) -> u64 {
        self.key_id
    }

    pub fn magnitude_bits(&self) -> u64 {
        self.mag_bits
    }

    pub fn payload(&self) -> &BigUint {
        &self.payload
    }

    /// Fixed-width big-endian payload, as sent on the wire.
    pub fn to_bytes(&self, pk: &PublicKey) -> Vec<u8> {
        let width = pk.ciphertext_len();
        let raw = self.payload.to_bytes_be();
        let mut out = vec![0u8; width.saturating_sub(raw.len())];
        out.extend_from_slice(&raw);
        out
    }

    /// Inverse of [`Ciphertext::to_bytes`]; the metadata travels out of band.
    pub fn from_bytes(pk: &PublicKey, bytes: &[u8], scale: u32, mag_bits: u64) -> Result<Self, HeError> {
        if bytes.len() != pk.ciphertext_len() {
            return Err(HeError::Malformed(format!(
                "ciphertext of {} bytes, expected {}",
                bytes.len(),
                pk.ciphertext_len()
            )));
        }
        let payload = BigUint::from_bytes_be(bytes);
        pk.check_ciphertext(&payload)?;
        Ok(Self { payload, scale, key_id: pk.key_id(), mag_bits })
    }

    /// Flips one payload bit; used to exercise tamper handling.
    pub fn with_flipped_bit(&self, bit: u64) -> Self {
        let mut out = self.clone();
        let set = out.payload.bit(bit);
        out.payload.set_bit(bit, !set);
        out
    }
}

fn check_key(pk: &PublicKey, c: &Ciphertext) -> Result<(), HeError> {
    if c.key_id != pk.key_id() {
        return Err(HeError::WrongKey { expected: pk.key_id(), found: c.key_id });
    }
    Ok(())
}

fn check_headroom(pk: &PublicKey, bits: u64) -> Result<(), HeError> {
    if bits > pk.plaintext_headroom_bits() {
        return Err(HeError::Overflow(format!(
            "result may need {bits} bits, headroom is {}",
            pk.plaintext_headroom_bits()
        )));
    }
    Ok(())
}

fn magnitude(m: &BigInt) -> u64 {
    m.bits().max(1)
}

pub fn encrypt<R: RngCore + CryptoRng + ?Sized>(
    pk: &PublicKey,
    m: &Plaintext,
    rng: &mut R,
) -> Result<Ciphertext, HeError> {
    let payload = pk.encrypt_raw(&m.value, rng)?;
    Ok(Ciphertext { payload, scale: m.scale, key_id: pk.key_id(), mag_bits: magnitude(&m.value) })
}

/// Encryption by the key owner, using the factorisation.
pub fn encrypt_with_secret<R: RngCore + CryptoRng + ?Sized>(
    kp: &KeyPair,
    m: &Plaintext,
    rng: &mut R,
) -> Result<Ciphertext, HeError> {
    let pk = kp.public();
    let payload = kp.encrypt_raw(&m.value, rng)?;
    Ok(Ciphertext { payload, scale: m.scale, key_id: pk.key_id(), mag_bits: magnitude(&m.value) })
}

pub fn decrypt(kp: &KeyPair, c: &Ciphertext) -> Result<Plaintext, HeError> {
    check_key(kp.public(), c)?;
    let value = kp.decrypt_raw(&c.payload)?;
    if value.bits() > c.mag_bits {
        return Err(HeError::Integrity(format!(
            "decrypted {} bits where at most {} were possible",
            value.bits(),
            c.mag_bits
        )));
    }
    Ok(Plaintext { value, scale: c.scale })
}

pub fn decrypt_f64(kp: &KeyPair, c: &Ciphertext) -> Result<f64, HeError> {
    let p = decrypt(kp, c)?;
    Ok(decode_at(&p.value, p.scale))
}

pub fn he_add(pk: &PublicKey, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HeError> {
    check_key(pk, a)?;
    check_key(pk, b)?;
    if a.scale != b.scale {
        return Err(HeError::Encoding(format!("adding scale {} to scale {}", a.scale, b.scale)));
    }
    let mag_bits = a.mag_bits.max(b.mag_bits) + 1;
    check_headroom(pk, mag_bits)?;
    Ok(Ciphertext { payload: pk.add_raw(&a.payload, &b.payload), scale: a.scale, key_id: a.key_id, mag_bits })
}

/// Adds a plaintext of the same scale without re-randomising.
pub fn he_add_plain(pk: &PublicKey, a: &Ciphertext, k: &Plaintext) -> Result<Ciphertext, HeError> {
    check_key(pk, a)?;
    if a.scale != k.scale {
        return Err(HeError::Encoding(format!("adding scale {} to scale {}", k.scale, a.scale)));
    }
    let mag_bits = a.mag_bits.max(magnitude(&k.value)) + 1;
    check_headroom(pk, mag_bits)?;
    Ok(Ciphertext {
        payload: pk.add_plain_raw(&a.payload, &k.value),
        scale: a.scale,
        key_id: a.key_id,
        mag_bits,
    })
}

/// Ciphertext times plaintext; the result carries the sum of both scales.
pub fn he_plain_mul(pk: &PublicKey, a: &Ciphertext, k: &Plaintext) -> Result<Ciphertext, HeError> {
    check_key(pk, a)?;
    let mag_bits = a.mag_bits + magnitude(&k.value);
    check_headroom(pk, mag_bits)?;
    Ok(Ciphertext {
        payload: pk.mul_plain_raw(&a.payload, &k.value)?,
        scale: a.scale + k.scale,
        key_id: a.key_id,
        mag_bits,
    })
}

/// `sum_j a_j * k_j`, all products at a common scale.
pub fn he_dot(pk: &PublicKey, a: &[Ciphertext], k: &[Plaintext]) -> Result<Ciphertext, HeError> {
    if a.len() != k.len() || a.is_empty() {
        return Err(HeError::Shape(format!("dot product of {} and {} entries", a.len(), k.len())));
    }
    let mut acc = he_plain_mul(pk, &a[0], &k[0])?;
    let mut bound = acc.mag_bits;
    for (c, w) in a.iter().zip(k).skip(1) {
        let term = he_plain_mul(pk, c, w)?;
        if term.scale != acc.scale {
            return Err(HeError::Encoding("dot product terms at different scales".into()));
        }
        bound = bound.max(term.mag_bits);
        acc = Ciphertext {
            payload: pk.add_raw(&acc.payload, &term.payload),
            scale: acc.scale,
            key_id: acc.key_id,
            mag_bits: 0,
        };
    }
    // a sum of n terms grows by at most ceil(log2 n) bits
    let mag_bits = bound + u64::from(usize::BITS - (a.len() - 1).leading_zeros());
    check_headroom(pk, mag_bits)?;
    acc.mag_bits = mag_bits;
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    use super::super::encoding::FixedPointEncoding;
    use super::super::paillier::keygen;
    use super::*;

    fn setup() -> (KeyPair, ChaCha20Rng) {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        (keygen(512, &mut rng).unwrap(), rng)
    }

    #[test]
    fn probabilistic_encryption() {
        let (kp, mut rng) = setup();
        let m = Plaintext::integer(42);
        let a = encrypt(kp.public(), &m, &mut rng).unwrap();
        let b = encrypt(kp.public(), &m, &mut rng).unwrap();
        assert_ne!(a.payload(), b.payload());
        assert_eq!(decrypt(&kp, &a).unwrap(), decrypt(&kp, &b).unwrap());
    }

    #[test]
    fn add_two_and_three() {
        let (kp, mut rng) = setup();
        let enc = FixedPointEncoding::default();
        let a = encrypt(kp.public(), &enc.encode(2.0).unwrap(), &mut rng).unwrap();
        let b = encrypt(kp.public(), &enc.encode(3.0).unwrap(), &mut rng).unwrap();
        let s = he_add(kp.public(), &a, &b).unwrap();
        assert_eq!(decrypt_f64(&kp, &s).unwrap(), 5.0);
    }

    #[test]
    fn multiply_by_one_is_identity() {
        let (kp, mut rng) = setup();
        let enc = FixedPointEncoding::default();
        let a = encrypt(kp.public(), &enc.encode(-7.25).unwrap(), &mut rng).unwrap();
        let one = enc.encode(1.0).unwrap();
        let p = he_plain_mul(kp.public(), &a, &one).unwrap();
        assert_eq!(p.scale(), 48);
        assert_eq!(decrypt_f64(&kp, &p).unwrap(), -7.25);
    }

    #[test]
    fn scale_mismatch_rejected() {
        let (kp, mut rng) = setup();
        let enc = FixedPointEncoding::default();
        let a = encrypt(kp.public(), &enc.encode(1.0).unwrap(), &mut rng).unwrap();
        let b = he_plain_mul(kp.public(), &a, &enc.encode(1.0).unwrap()).unwrap();
        assert!(matches!(he_add(kp.public(), &a, &b), Err(HeError::Encoding(_))));
    }

    #[test]
    fn overflow_detected_before_wrap() {
        let (kp, mut rng) = setup();
        let big = Plaintext { value: BigInt::from(1) << 400u32, scale: 0 };
        let a = encrypt(kp.public(), &big, &mut rng).unwrap();
        assert!(matches!(he_plain_mul(kp.public(), &a, &big), Err(HeError::Overflow(_))));
    }

    #[test]
    fn wrong_key_rejected() {
        let (kp, mut rng) = setup();
        let other = keygen(512, &mut rng).unwrap();
        let a = encrypt(kp.public(), &Plaintext::integer(1), &mut rng).unwrap();
        assert!(matches!(decrypt(&other, &a), Err(HeError::WrongKey { .. })));
    }

    #[test]
    fn bit_flip_flagged() {
        let (kp, mut rng) = setup();
        let a = encrypt(kp.public(), &Plaintext::integer(1234), &mut rng).unwrap();
        for bit in [0, 17, 300, 1000] {
            assert!(decrypt(&kp, &a.with_flipped_bit(bit)).is_err(), "bit {bit}");
        }
    }

    #[test]
    fn wire_bytes_roundtrip() {
        let (kp, mut rng) = setup();
        let a = encrypt(kp.public(), &Plaintext::integer(-9), &mut rng).unwrap();
        let bytes = a.to_bytes(kp.public());
        assert_eq!(bytes.len(), 128);
        let b = Ciphertext::from_bytes(kp.public(), &bytes, a.scale(), a.magnitude_bits()).unwrap();
        assert_eq!(a, b);
    }
}
