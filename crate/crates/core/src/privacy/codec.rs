use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{FromPrimitive, ToPrimitive, Zero};

use super::paillier::PaillierPublicKey;
use crate::error::{invalid, Error, Result};

pub const DEFAULT_SCALE_BITS: u32 = 40;
pub const DEFAULT_MAX_MAGNITUDE: f64 = 1024.0;

/// Maps reals in `[-max, max]` to `Z_n` at resolution `2^-scale_bits`.
/// Negative values encode as `n − |v·F|`, so residues above `n/2` decode
/// as negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointCodec {
    n: BigUint,
    scale_bits: u32,
    max_magnitude: f64,
}

impl FixedPointCodec {
    pub fn new(n: BigUint, scale_bits: u32, max_magnitude: f64) -> Result<Self> {
        if !(max_magnitude > 0.0) || !max_magnitude.is_finite() {
            return Err(invalid("max_magnitude must be positive and finite"));
        }
        if n < BigUint::from(3u32) {
            return Err(invalid("modulus too small"));
        }
        let codec = FixedPointCodec { n, scale_bits, max_magnitude };
        if codec.capacity() == 0 {
            return Err(invalid("modulus too small for a single encoded value"));
        }
        Ok(codec)
    }

    /// `F = 2⁴⁰`, values up to 1024 in magnitude.
    pub fn for_key(pk: &PaillierPublicKey) -> Result<Self> {
        Self::new(pk.n.clone(), DEFAULT_SCALE_BITS, DEFAULT_MAX_MAGNITUDE)
    }

    pub fn scale(&self) -> f64 {
        (self.scale_bits as f64).exp2()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.max_magnitude
    }

    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    fn bound(&self) -> BigUint {
        // Largest encoded magnitude of one value.
        BigUint::from_f64((self.max_magnitude * self.scale()).ceil()).unwrap_or_default()
    }

    /// Number of encodings `K` whose sum always decodes without wraparound:
    /// the largest `K` with `K · max · F ≤ (n − 1) / 2`.
    pub fn capacity(&self) -> u64 {
        let half = (&self.n - 1u32) >> 1u32;
        let b = self.bound();
        if b.is_zero() {
            return u64::MAX;
        }
        (half / b).to_u64().unwrap_or(u64::MAX)
    }

    fn encode_at(&self, coordinate: usize, v: f64) -> Result<BigUint> {
        if !v.is_finite() || v.abs() > self.max_magnitude {
            return Err(Error::CodecOverflow { coordinate, value: v });
        }
        let scaled = BigInt::from_f64((v * self.scale()).round()).unwrap_or_default();
        let n = BigInt::from(self.n.clone());
        let r = ((scaled % &n) + &n) % &n;
        Ok(r.to_biguint().unwrap_or_default())
    }

    pub fn encode(&self, v: f64) -> Result<BigUint> {
        self.encode_at(0, v)
    }

    pub fn encode_all(&self, values: &[f64]) -> Result<Vec<BigUint>> {
        values.iter().enumerate().map(|(i, &v)| self.encode_at(i, v)).collect()
    }

    /// Decodes a residue holding the sum of `expected_terms` encodings.
    pub fn decode(&self, z: &BigUint, expected_terms: u64) -> Result<f64> {
        if *z >= self.n {
            return Err(invalid("residue not below the modulus"));
        }
        if expected_terms > self.capacity() {
            return Err(invalid(format!(
                "{expected_terms} summands exceed codec capacity {}",
                self.capacity()
            )));
        }
        let half = &self.n >> 1u32;
        let signed = if *z > half {
            BigInt::from_biguint(Sign::Minus, &self.n - z)
        } else {
            BigInt::from(z.clone())
        };
        let limit = self.bound() * expected_terms.max(1);
        if signed.magnitude() > &limit {
            return Err(invalid("decoded magnitude exceeds the bound for this many terms"));
        }
        Ok(signed.to_f64().unwrap_or(f64::NAN) / self.scale())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn codec() -> FixedPointCodec {
        FixedPointCodec::new((BigUint::one() << 127u32) - 1u32, 40, 1024.0).unwrap()
    }

    #[test]
    fn zero_encodes_to_zero() {
        assert!(codec().encode(0.0).unwrap().is_zero());
    }

    #[test]
    fn negative_encoding() {
        let c = codec();
        let z = c.encode(-1.0).unwrap();
        assert_eq!(&z + (BigUint::one() << 40u32), c.modulus().clone());
    }

    #[test]
    fn signed_sum_decodes_exactly() {
        let c = codec();
        let s = (c.encode(-1.5).unwrap() + c.encode(2.5).unwrap()) % c.modulus();
        assert_eq!(c.decode(&s, 2).unwrap(), 1.0);
    }

    #[test]
    fn round_trip_at_resolution() {
        let c = codec();
        for v in [0.1, -0.1, 3.75, -1023.999, 1e-9, 1024.0] {
            let back = c.decode(&c.encode(v).unwrap(), 1).unwrap();
            assert!((back - v).abs() <= 0.5 / c.scale(), "{v} -> {back}");
        }
        // Multiples of 1/F round-trip exactly.
        let v = 12345.0 / c.scale();
        assert_eq!(c.decode(&c.encode(v).unwrap(), 1).unwrap(), v);
    }

    #[test]
    fn overflow_is_reported() {
        let c = codec();
        assert!(matches!(c.encode(1024.5), Err(Error::CodecOverflow { .. })));
        assert!(matches!(
            c.encode_all(&[0.0, f64::NAN]),
            Err(Error::CodecOverflow { coordinate: 1, .. })
        ));
    }

    #[test]
    fn capacity_matches_closed_form() {
        // n ≈ 2^127, one value ≤ 2^50 after scaling, so K = 2^126 / 2^50 = 2^76 → saturates u64.
        assert_eq!(codec().capacity(), u64::MAX);
        let small = FixedPointCodec::new(BigUint::from(1u128 << 63), 40, 1024.0).unwrap();
        assert_eq!(small.capacity(), ((1u64 << 62) - 1) / (1u64 << 50));
        assert!(small.decode(&BigUint::zero(), small.capacity() + 1).is_err());
    }
}
