//! Paillier cryptosystem with generator `g = n + 1`.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use serde_json::json;

use super::primes::random_prime;
use crate::checkpoint::{Checkpoint, Entry, EntryData};
use crate::error::{Error, Result};

pub const MIN_KEY_BITS: u64 = 64;
pub const DEFAULT_KEY_BITS: u64 = 2048;
pub const KEY_KIND: &str = "paillier_keypair";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaillierPublicKey {
    pub n: BigUint,
    pub n_squared: BigUint,
    pub g: BigUint,
    pub key_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaillierPrivateKey {
    pub lambda: BigUint,
    pub mu: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaillierKeypair {
    pub public: PaillierPublicKey,
    pub private: PaillierPrivateKey,
    p: BigUint,
    q: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ciphertext(pub BigUint);

impl PaillierPublicKey {
    fn new(n: BigUint) -> Self {
        let n_squared = &n * &n;
        let g = &n + 1u32;
        let key_bits = n.bits();
        PaillierPublicKey { n, n_squared, g, key_bits }
    }

    /// `c = (1 + m·n) · rⁿ mod n²` with `r` uniform in `Z_n*`.
    pub fn encrypt<R: rand::Rng + ?Sized>(&self, m: &BigUint, rng: &mut R) -> Result<Ciphertext> {
        if *m >= self.n {
            return Err(Error::Crypto("plaintext not below the modulus".into()));
        }
        let one = BigUint::one();
        let r = loop {
            let r = rng.gen_biguint_range(&one, &self.n);
            if r.gcd(&self.n).is_one() {
                break r;
            }
        };
        Ok(self.encrypt_with_nonce(m, &r))
    }

    pub fn encrypt_with_nonce(&self, m: &BigUint, r: &BigUint) -> Ciphertext {
        let gm = (BigUint::one() + m * &self.n) % &self.n_squared;
        let rn = r.modpow(&self.n, &self.n_squared);
        Ciphertext(gm * rn % &self.n_squared)
    }

    /// Ciphertext of `m₁ + m₂ mod n`.
    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Ciphertext {
        Ciphertext(&a.0 * &b.0 % &self.n_squared)
    }

    /// Ciphertext of `k·m mod n`.
    pub fn scalar_mul(&self, c: &Ciphertext, k: &BigUint) -> Ciphertext {
        Ciphertext(c.0.modpow(k, &self.n_squared))
    }

    /// Deterministic encryption of zero, the additive identity.
    pub fn zero(&self) -> Ciphertext {
        Ciphertext(BigUint::one())
    }
}

impl PaillierKeypair {
    /// Generates a key whose modulus has exactly `bits` bits.
    pub fn generate<R: rand::Rng + ?Sized>(bits: u64, rng: &mut R) -> Result<Self> {
        if bits < MIN_KEY_BITS {
            return Err(Error::Crypto(format!("key size {bits} below minimum {MIN_KEY_BITS}")));
        }
        let p_bits = bits.div_ceil(2);
        let q_bits = bits - p_bits;
        loop {
            let p = random_prime(p_bits, rng);
            let q = random_prime(q_bits, rng);
            if p == q {
                continue;
            }
            if let Ok(kp) = Self::from_primes(&p, &q) {
                debug_assert_eq!(kp.public.key_bits, bits);
                return Ok(kp);
            }
        }
    }

    /// Seeded key generation.
    pub fn generate_seeded(bits: u64, seed: u64) -> Result<Self> {
        Self::generate(bits, &mut crate::rng::stream(seed, 0x5041_494c))
    }

    /// Builds a key from caller-supplied primes. Performs no size check, so
    /// toy keys such as `(5, 7)` are accepted; primality is not verified.
    pub fn from_primes(p: &BigUint, q: &BigUint) -> Result<Self> {
        let one = BigUint::one();
        if p == q || *p <= one || *q <= one || p.is_even() || q.is_even() {
            return Err(Error::Crypto("need two distinct odd primes".into()));
        }
        let n = p * q;
        let phi = (p - 1u32) * (q - 1u32);
        if !n.gcd(&phi).is_one() {
            return Err(Error::Crypto("gcd(n, φ(n)) ≠ 1".into()));
        }
        let lambda = (p - 1u32).lcm(&(q - 1u32));
        let public = PaillierPublicKey::new(n);
        let u = public.g.modpow(&lambda, &public.n_squared);
        let l = (u - 1u32) / &public.n;
        let mu = l
            .modinv(&public.n)
            .ok_or_else(|| Error::Crypto("L(g^λ) not invertible".into()))?;
        Ok(PaillierKeypair {
            public,
            private: PaillierPrivateKey { lambda, mu },
            p: p.clone(),
            q: q.clone(),
        })
    }

    /// `m = L(c^λ mod n²) · μ mod n`.
    pub fn decrypt(&self, c: &Ciphertext) -> Result<BigUint> {
        let pk = &self.public;
        if c.0.is_zero() || c.0 >= pk.n_squared {
            return Err(Error::Crypto("ciphertext outside Z_{n²}*".into()));
        }
        let u = c.0.modpow(&self.private.lambda, &pk.n_squared);
        let l = (u - 1u32) / &pk.n;
        Ok(l * &self.private.mu % &pk.n)
    }

    pub fn primes(&self) -> (&BigUint, &BigUint) {
        (&self.p, &self.q)
    }
}

fn big_entry(name: &str, v: &BigUint) -> Entry {
    Entry {
        name: name.to_string(),
        shape: vec![],
        data: EntryData::BigUint(v.to_bytes_be()),
    }
}

pub fn keypair_to_checkpoint(kp: &PaillierKeypair) -> Checkpoint {
    Checkpoint {
        entries: vec![
            big_entry("n", &kp.public.n),
            big_entry("p", &kp.p),
            big_entry("q", &kp.q),
            big_entry("lambda", &kp.private.lambda),
            big_entry("mu", &kp.private.mu),
        ],
        document: json!({ "kind": KEY_KIND, "key_bits": kp.public.key_bits }).to_string(),
    }
}

pub fn keypair_from_checkpoint(ck: &Checkpoint) -> Result<PaillierKeypair> {
    if ck.kind()? != KEY_KIND {
        return Err(Error::Format(format!("expected a {KEY_KIND} checkpoint")));
    }
    let big = |name: &str| -> Result<BigUint> {
        match &ck.get(name)?.data {
            EntryData::BigUint(bytes) => Ok(BigUint::from_bytes_be(bytes)),
            _ => Err(Error::Format(format!("entry `{name}` is not an integer"))),
        }
    };
    let kp = PaillierKeypair::from_primes(&big("p")?, &big("q")?)?;
    if kp.public.n != big("n")? || kp.private.lambda != big("lambda")? || kp.private.mu != big("mu")? {
        return Err(Error::Format("stored key fields are inconsistent".into()));
    }
    Ok(kp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn toy() -> PaillierKeypair {
        PaillierKeypair::from_primes(&BigUint::from(5u32), &BigUint::from(7u32)).unwrap()
    }

    #[test]
    fn toy_key_parameters() {
        let kp = toy();
        assert_eq!(kp.public.n, BigUint::from(35u32));
        assert_eq!(kp.private.lambda, BigUint::from(12u32));
        assert_eq!(kp.public.g, BigUint::from(36u32));
    }

    #[test]
    fn toy_key_exhaustive() {
        let kp = toy();
        let n = 35u32;
        for m in 0..n {
            for r in 1..n {
                let r = BigUint::from(r);
                if !r.gcd(&kp.public.n).is_one() {
                    continue;
                }
                let c = kp.public.encrypt_with_nonce(&BigUint::from(m), &r);
                assert_eq!(kp.decrypt(&c).unwrap(), BigUint::from(m));
            }
        }
    }

    #[test]
    fn keygen_size_and_determinism() {
        let a = PaillierKeypair::generate_seeded(128, 7).unwrap();
        let b = PaillierKeypair::generate_seeded(128, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.public.n.bits(), 128);
        let c = PaillierKeypair::generate_seeded(65, 1).unwrap();
        assert_eq!(c.public.n.bits(), 65);
        assert!(PaillierKeypair::generate_seeded(63, 7).is_err());
    }

    #[test]
    fn semantic_security_smoke() {
        let kp = PaillierKeypair::generate_seeded(128, 3).unwrap();
        let mut r = rng::seeded(0);
        let m = BigUint::from(42u32);
        let c1 = kp.public.encrypt(&m, &mut r).unwrap();
        let c2 = kp.public.encrypt(&m, &mut r).unwrap();
        assert_ne!(c1, c2);
        assert_eq!(kp.decrypt(&c1).unwrap(), m);
        assert_eq!(kp.decrypt(&c2).unwrap(), m);
        let z = kp.public.encrypt(&BigUint::zero(), &mut r).unwrap();
        assert!(kp.decrypt(&z).unwrap().is_zero());
    }

    #[test]
    fn homomorphic_identities() {
        let kp = PaillierKeypair::generate_seeded(128, 5).unwrap();
        let pk = &kp.public;
        let mut r = rng::seeded(1);
        let half = &pk.n >> 1u32;
        for _ in 0..50 {
            let a = r.gen_biguint_below(&half);
            let b = r.gen_biguint_below(&half);
            let ca = pk.encrypt(&a, &mut r).unwrap();
            let cb = pk.encrypt(&b, &mut r).unwrap();
            assert_eq!(kp.decrypt(&pk.add(&ca, &cb)).unwrap(), &a + &b);
            let z = pk.encrypt(&BigUint::zero(), &mut r).unwrap();
            assert_eq!(kp.decrypt(&pk.add(&ca, &z)).unwrap(), a);
            assert_eq!(kp.decrypt(&pk.scalar_mul(&ca, &BigUint::one())).unwrap(), a);
            let k = r.gen_biguint(32);
            assert_eq!(kp.decrypt(&pk.scalar_mul(&ca, &k)).unwrap(), &a * &k % &pk.n);
        }
    }

    #[test]
    fn rejects_out_of_range() {
        let kp = toy();
        let mut r = rng::seeded(0);
        assert!(kp.public.encrypt(&BigUint::from(35u32), &mut r).is_err());
        assert!(kp.decrypt(&Ciphertext(BigUint::zero())).is_err());
        assert!(PaillierKeypair::from_primes(&BigUint::from(5u32), &BigUint::from(5u32)).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let kp = PaillierKeypair::generate_seeded(96, 11).unwrap();
        let bytes = keypair_to_checkpoint(&kp).to_bytes().unwrap();
        let back = keypair_from_checkpoint(&Checkpoint::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(back, kp);
    }
}
