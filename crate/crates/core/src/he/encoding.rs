use num_bigint::BigInt;
use num_traits::{FromPrimitive, ToPrimitive};
use serde::{Deserialize, Serialize};

use super::HeError;

/// Fractional bits used for test-set features, weights and masks.
pub const DEFAULT_FRAC_BITS: u32 = 24;

/// Signed fixed-point encoding `v -> round(v * 2^f)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointEncoding {
    frac_bits: u32,
}

impl Default for FixedPointEncoding {
    fn default() -> Self {
        Self { frac_bits: DEFAULT_FRAC_BITS }
    }
}

impl FixedPointEncoding {
    pub fn new(frac_bits: u32) -> Result<Self, HeError> {
        if frac_bits == 0 || frac_bits > 256 {
            return Err(HeError::Encoding(format!("unsupported fractional width {frac_bits}")));
        }
        Ok(Self { frac_bits })
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    /// Quantisation step `2^-f`.
    pub fn resolution(&self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    pub fn encode(&self, v: f64) -> Result<Plaintext, HeError> {
        Ok(Plaintext { value: encode_at(v, self.frac_bits)?, scale: self.frac_bits })
    }

    /// Decodes an integer carrying `scale` fractional bits.
    pub fn decode(&self, m: &BigInt, scale: u32) -> f64 {
        decode_at(m, scale)
    }
}

pub(crate) fn encode_at(v: f64, scale: u32) -> Result<BigInt, HeError> {
    if !v.is_finite() {
        return Err(HeError::Encoding(format!("cannot encode {v}")));
    }
    let scaled = v * (scale as f64).exp2();
    BigInt::from_f64(scaled.round()).ok_or_else(|| HeError::Encoding(format!("cannot encode {v}")))
}

pub(crate) fn decode_at(m: &BigInt, scale: u32) -> f64 {
    // split so very large scales do not underflow the divisor
    let whole: BigInt = m >> scale;
    let frac: BigInt = m - (&whole << scale);
    let frac = frac.to_f64().unwrap_or(0.0) * (-(scale as f64)).exp2();
    whole.to_f64().unwrap_or(f64::NAN) + frac
}

/// An encoded plaintext together with its fractional scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plaintext {
    pub value: BigInt,
    pub scale: u32,
}

impl Plaintext {
    pub fn integer(v: i64) -> Self {
        Self { value: BigInt::from(v), scale: 0 }
    }

    pub fn to_f64(&self) -> f64 {
        decode_at(&self.value, self.scale)
    }

    /// Shifts to a larger scale without changing the represented value.
    pub fn rescaled(&self, scale: u32) -> Result<Self, HeError> {
        if scale < self.scale {
            return Err(HeError::Encoding(format!("cannot lower scale {} to {scale}", self.scale)));
        }
        Ok(Self { value: &self.value << (scale - self.scale), scale })
    }
}
