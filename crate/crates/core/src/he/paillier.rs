//! Paillier encryption with `g = n + 1` and CRT-accelerated secret-key paths.

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HeError;

/// Smallest modulus accepted by [`keygen`]; suitable for tests only.
pub const MIN_KEY_BITS: u32 = 512;
/// Modulus size used unless a configuration asks for less.
pub const DEFAULT_KEY_BITS: u32 = 2048;

const SMALL_PRIMES: [u32; 53] = [
    3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PublicKeyRepr", into = "PublicKeyRepr")]
pub struct PublicKey {
    n: BigUint,
    n_sq: BigUint,
    key_id: u64,
}

#[derive(Serialize, Deserialize)]
struct PublicKeyRepr {
    modulus: String,
}

impl From<PublicKey> for PublicKeyRepr {
    fn from(pk: PublicKey) -> Self {
        Self { modulus: hex::encode(pk.n.to_bytes_be()) }
    }
}

impl TryFrom<PublicKeyRepr> for PublicKey {
    type Error = String;
    fn try_from(r: PublicKeyRepr) -> Result<Self, String> {
        let bytes = hex::decode(&r.modulus).map_err(|e| e.to_string())?;
        let n = BigUint::from_bytes_be(&bytes);
        if n.bits() < u64::from(MIN_KEY_BITS) {
            return Err(format!("modulus of {} bits is too small", n.bits()));
        }
        Ok(Self::from_modulus(n))
    }
}

impl PublicKey {
    fn from_modulus(n: BigUint) -> Self {
        let n_sq = &n * &n;
        let digest = Sha256::digest(n.to_bytes_be());
        let key_id = u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"));
        Self { n, n_sq, key_id }
    }

    /// Rebuilds a key from its big-endian modulus.
    pub fn from_modulus_bytes(bytes: &[u8]) -> Self {
        Self::from_modulus(BigUint::from_bytes_be(bytes))
    }

    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn modulus_squared(&self) -> &BigUint {
        &self.n_sq
    }

    pub fn bits(&self) -> u64 {
        self.n.bits()
    }

    /// Short fingerprint of the modulus stamped on every ciphertext.
    pub fn key_id(&self) -> u64 {
        self.key_id
    }

    /// Bytes of one serialised ciphertext.
    pub fn ciphertext_len(&self) -> usize {
        self.n_sq.bits().div_ceil(8) as usize
    }

    /// Largest magnitude (in bits) a signed plaintext may carry without
    /// wrapping around the plaintext space.
    pub fn plaintext_headroom_bits(&self) -> u64 {
        self.n.bits() - 2
    }

    fn to_residue(&self, m: &BigInt) -> BigUint {
        let n = BigInt::from_biguint(Sign::Plus, self.n.clone());
        m.mod_floor(&n).to_biguint().expect("mod_floor is non-negative")
    }

    fn from_residue(&self, m: BigUint) -> BigInt {
        let half = &self.n >> 1u32;
        if m > half {
            BigInt::from_biguint(Sign::Plus, m) - BigInt::from_biguint(Sign::Plus, self.n.clone())
        } else {
            BigInt::from_biguint(Sign::Plus, m)
        }
    }

    /// `1 + m n mod n^2`, i.e. `g^m` for `g = n + 1`.
    fn g_pow(&self, m: &BigUint) -> BigUint {
        (BigUint::one() + m * &self.n) % &self.n_sq
    }

    fn random_unit<R: RngCore + CryptoRng + ?Sized>(&self, rng: &mut R) -> BigUint {
        loop {
            let r = rng.gen_biguint_below(&self.n);
            if !r.is_zero() && r.gcd(&self.n).is_one() {
                return r;
            }
        }
    }

    /// Encrypts a signed integer plaintext.
    pub fn encrypt_raw<R: RngCore + CryptoRng + ?Sized>(&self, m: &BigInt, rng: &mut R) -> Result<BigUint, HeError> {
        if m.bits() > self.plaintext_headroom_bits() {
            return Err(HeError::Overflow(format!(
                "plaintext of {} bits exceeds headroom of {} bits",
                m.bits(),
                self.plaintext_headroom_bits()
            )));
        }
        let r = self.random_unit(rng);
        let rn = r.modpow(&self.n, &self.n_sq);
        Ok(self.g_pow(&self.to_residue(m)) * rn % &self.n_sq)
    }

    pub fn add_raw(&self, a: &BigUint, b: &BigUint) -> BigUint {
        a * b % &self.n_sq
    }

    /// Adds a plaintext without fresh randomness.
    pub fn add_plain_raw(&self, a: &BigUint, k: &BigInt) -> BigUint {
        a * self.g_pow(&self.to_residue(k)) % &self.n_sq
    }

    /// Multiplies the plaintext under `a` by the signed constant `k`.
    pub fn mul_plain_raw(&self, a: &BigUint, k: &BigInt) -> Result<BigUint, HeError> {
        let e = k.magnitude();
        if k.sign() == Sign::Minus {
            let inv = a
                .modinv(&self.n_sq)
                .ok_or_else(|| HeError::Malformed("ciphertext not invertible".into()))?;
            Ok(inv.modpow(e, &self.n_sq))
        } else {
            Ok(a.modpow(e, &self.n_sq))
        }
    }

    pub(crate) fn check_ciphertext(&self, c: &BigUint) -> Result<(), HeError> {
        if c.is_zero() || c >= &self.n_sq {
            return Err(HeError::Malformed("ciphertext outside the group".into()));
        }
        Ok(())
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey {
    p: BigUint,
    q: BigUint,
    p_sq: BigUint,
    q_sq: BigUint,
    /// `L_p(g^(p-1) mod p^2)^{-1} mod p`
    hp: BigUint,
    hq: BigUint,
    /// `q^{-1} mod p`
    q_inv: BigUint,
    /// `n mod p(p-1)` and `n mod q(q-1)` for CRT encryption.
    n_mod_phi_p_sq: BigUint,
    n_mod_phi_q_sq: BigUint,
    /// `q^2` inverse modulo `p^2`
    q_sq_inv: BigUint,
}

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

fn l_function(x: &BigUint, d: &BigUint) -> BigUint {
    (x - BigUint::one()) / d
}

impl SecretKey {
    fn new(p: BigUint, q: BigUint, n: &BigUint) -> Result<Self, HeError> {
        let one = BigUint::one();
        let p_sq = &p * &p;
        let q_sq = &q * &q;
        let g = n + &one;
        let hp = l_function(&g.modpow(&(&p - &one), &p_sq), &p)
            .modinv(&p)
            .ok_or_else(|| HeError::KeyGeneration("h_p not invertible".into()))?;
        let hq = l_function(&g.modpow(&(&q - &one), &q_sq), &q)
            .modinv(&q)
            .ok_or_else(|| HeError::KeyGeneration("h_q not invertible".into()))?;
        let q_inv = q.modinv(&p).ok_or_else(|| HeError::KeyGeneration("q not invertible".into()))?;
        let q_sq_inv = q_sq
            .modinv(&p_sq)
            .ok_or_else(|| HeError::KeyGeneration("q^2 not invertible".into()))?;
        let n_mod_phi_p_sq = n % (&p * (&p - &one));
        let n_mod_phi_q_sq = n % (&q * (&q - &one));
        Ok(Self { p, q, p_sq, q_sq, hp, hq, q_inv, n_mod_phi_p_sq, n_mod_phi_q_sq, q_sq_inv })
    }

    fn crt(&self, mp: &BigUint, mq: &BigUint) -> BigUint {
        // m = mq + q * ((mp - mq) * q^{-1} mod p)
        let diff = (mp + &self.p - (mq % &self.p)) % &self.p;
        mq + &self.q * (diff * &self.q_inv % &self.p)
    }
}

/// A Paillier key pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPair {
    public: PublicKey,
    secret: SecretKey,
}

impl KeyPair {
    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    /// Decrypts to the signed representative in `(-n/2, n/2]`.
    pub fn decrypt_raw(&self, c: &BigUint) -> Result<BigInt, HeError> {
        self.public.check_ciphertext(c)?;
        let sk = &self.secret;
        let one = BigUint::one();
        let mp = l_function(&c.modpow(&(&sk.p - &one), &sk.p_sq), &sk.p) * &sk.hp % &sk.p;
        let mq = l_function(&c.modpow(&(&sk.q - &one), &sk.q_sq), &sk.q) * &sk.hq % &sk.q;
        Ok(self.public.from_residue(sk.crt(&mp, &mq)))
    }

    /// Encryption using the factorisation; same distribution as
    /// [`PublicKey::encrypt_raw`] but roughly twice as fast.
    pub fn encrypt_raw<R: RngCore + CryptoRng + ?Sized>(&self, m: &BigInt, rng: &mut R) -> Result<BigUint, HeError> {
        let pk = &self.public;
        if m.bits() > pk.plaintext_headroom_bits() {
            return Err(HeError::Overflow(format!(
                "plaintext of {} bits exceeds headroom of {} bits",
                m.bits(),
                pk.plaintext_headroom_bits()
            )));
        }
        let sk = &self.secret;
        let r = pk.random_unit(rng);
        let rp = (&r % &sk.p_sq).modpow(&sk.n_mod_phi_p_sq, &sk.p_sq);
        let rq = (&r % &sk.q_sq).modpow(&sk.n_mod_phi_q_sq, &sk.q_sq);
        // CRT over p^2, q^2
        let diff = (&rp + &sk.p_sq - (&rq % &sk.p_sq)) % &sk.p_sq;
        let rn = &rq + &sk.q_sq * (diff * &sk.q_sq_inv % &sk.p_sq);
        Ok(pk.g_pow(&pk.to_residue(m)) * rn % &pk.n_sq)
    }
}

fn is_probable_prime<R: RngCore + ?Sized>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    let two = BigUint::from(2u8);
    if n < &two {
        return false;
    }
    for &sp in SMALL_PRIMES.iter() {
        let sp = BigUint::from(sp);
        if n == &sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }
    if n.is_even() {
        return false;
    }
    let one = BigUint::one();
    let n_minus_one = n - &one;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;
    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &n_minus_one);
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn random_prime<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    loop {
        let mut candidate = rng.gen_biguint(bits);
        // top two bits set so the product of two primes has exactly 2*bits bits
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(bits - 2, true);
        candidate.set_bit(0, true);
        if is_probable_prime(&candidate, 40, rng) {
            return candidate;
        }
    }
}

/// Generates a key pair whose modulus has exactly `bits` bits.
pub fn keygen<R: RngCore + CryptoRng + ?Sized>(bits: u32, rng: &mut R) -> Result<KeyPair, HeError> {
    if bits < MIN_KEY_BITS || bits % 2 != 0 {
        return Err(HeError::KeyGeneration(format!(
            "key size must be even and at least {MIN_KEY_BITS} bits (got {bits})"
        )));
    }
    let half = u64::from(bits / 2);
    loop {
        let p = random_prime(half, rng);
        let q = random_prime(half, rng);
        if p == q {
            continue;
        }
        let n = &p * &q;
        let one = BigUint::one();
        // gcd(n, (p-1)(q-1)) = 1 holds for equal-size primes, but check anyway
        if !n.gcd(&((&p - &one) * (&q - &one))).is_one() {
            continue;
        }
        let secret = SecretKey::new(p, q, &n)?;
        return Ok(KeyPair { public: PublicKey::from_modulus(n), secret });
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    use super::*;

    fn keys() -> KeyPair {
        keygen(512, &mut ChaCha20Rng::seed_from_u64(5)).unwrap()
    }

    #[test]
    fn modulus_has_requested_size() {
        assert_eq!(keys().public().bits(), 512);
    }

    #[test]
    fn rejects_small_keys() {
        assert!(keygen(256, &mut ChaCha20Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn primality_on_known_values() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        assert!(is_probable_prime(&BigUint::from(65537u32), 20, &mut rng));
        assert!(!is_probable_prime(&BigUint::from(65535u32), 20, &mut rng));
        // Carmichael number
        assert!(!is_probable_prime(&BigUint::from(561u32), 20, &mut rng));
        let m127 = (BigUint::one() << 127u32) - BigUint::one();
        assert!(is_probable_prime(&m127, 20, &mut rng));
    }

    #[test]
    fn both_encryption_paths_decrypt() {
        let kp = keys();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        for m in [0i64, 1, -1, 123456789, -987654321] {
            let m = BigInt::from(m);
            let c1 = kp.public().encrypt_raw(&m, &mut rng).unwrap();
            let c2 = kp.encrypt_raw(&m, &mut rng).unwrap();
            assert_eq!(kp.decrypt_raw(&c1).unwrap(), m);
            assert_eq!(kp.decrypt_raw(&c2).unwrap(), m);
        }
    }

    #[test]
    fn negative_scalar_multiplication() {
        let kp = keys();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let c = kp.encrypt_raw(&BigInt::from(7), &mut rng).unwrap();
        let d = kp.public().mul_plain_raw(&c, &BigInt::from(-6)).unwrap();
        assert_eq!(kp.decrypt_raw(&d).unwrap(), BigInt::from(-42));
        let e = kp.public().add_plain_raw(&d, &BigInt::from(50));
        assert_eq!(kp.decrypt_raw(&e).unwrap(), BigInt::from(8));
    }

    #[test]
    fn out_of_group_ciphertext_rejected() {
        let kp = keys();
        assert!(kp.decrypt_raw(&BigUint::zero()).is_err());
        assert!(kp.decrypt_raw(kp.public().modulus_squared()).is_err());
    }
}
