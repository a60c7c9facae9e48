use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};

const SMALL_PRIMES: [u32; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

/// Miller–Rabin rounds; a composite passes all of them with probability < 4⁻⁴⁰ = 2⁻⁸⁰.
pub const MR_ROUNDS: usize = 40;

/// Trial division by small primes followed by Miller–Rabin with random bases.
pub fn is_probable_prime<R: rand::Rng + ?Sized>(n: &BigUint, rng: &mut R) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for &p in &SMALL_PRIMES {
        let p = BigUint::from(p);
        if *n == p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }

    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;

    'witness: for _ in 0..MR_ROUNDS {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Random prime with exactly `bits` bits whose two leading bits are set,
/// so the product of two such primes has exactly the sum of their sizes.
pub(crate) fn random_prime<R: rand::Rng + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    debug_assert!(bits >= 3);
    let top = (BigUint::one() << (bits - 1)) | (BigUint::one() << (bits - 2));
    loop {
        let mut candidate = rng.gen_biguint(bits) | &top;
        if candidate.is_even() {
            candidate += 1u32;
        }
        if candidate.bits() == bits && is_probable_prime(&candidate, rng) {
            return candidate;
        }
    }
}
