//! Differential privacy mechanisms and the Paillier cryptosystem.

mod codec;
mod dplr;
mod dpsgd;
mod ledger;
mod paillier;
mod primes;

pub use codec::{FixedPointCodec, DEFAULT_MAX_MAGNITUDE, DEFAULT_SCALE_BITS};
pub use dplr::{dp_logistic_regression, fit_logistic_regression, sample_output_noise, DpLogisticRegression};
pub use dpsgd::{clip_to_norm, dpsgd_sanitize, DpParams};
pub use ledger::PrivacyLedger;
pub use paillier::{
    keypair_from_checkpoint, keypair_to_checkpoint, Ciphertext, PaillierKeypair, PaillierPrivateKey,
    PaillierPublicKey, DEFAULT_KEY_BITS, KEY_KIND, MIN_KEY_BITS,
};
pub use primes::is_probable_prime;
