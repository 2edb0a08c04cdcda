//! Additively homomorphic encryption and the masked label-prediction protocol.

mod cipher;
mod encoding;
mod paillier;
mod protocol;

pub use cipher::{
    decrypt, decrypt_f64, encrypt, encrypt_with_secret, he_add, he_add_plain, he_dot, he_plain_mul,
    Ciphertext,
};
pub use encoding::{FixedPointEncoding, Plaintext, DEFAULT_FRAC_BITS};
pub use paillier::{keygen, KeyPair, PublicKey, DEFAULT_KEY_BITS, MIN_KEY_BITS};
pub use protocol::{
    first_layer_masked, forward_rest, private_inference, requester_unmask_reply,
    unmask_and_activate, EncryptedLayer, EncryptedTestSet, MaskRegistry, MaskVector,
    MaskedActivations, MaskedReply, MASKED_PLAINTEXT_BYTES, MASK_BITS,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HeError {
    #[error("key generation failed: {0}")]
    KeyGeneration(String),
    #[error("encoding error: {0}")]
    Encoding(String),
    #[error("plaintext overflow: {0}")]
    Overflow(String),
    #[error("ciphertext under key {found:016x}, expected {expected:016x}")]
    WrongKey { expected: u64, found: u64 },
    #[error("malformed ciphertext: {0}")]
    Malformed(String),
    #[error("decryption failed integrity check: {0}")]
    Integrity(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
}
