use std::sync::Arc;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{FusionModel, Sample, Trainer};
use crate::privacy::{Ciphertext, FixedPointCodec, PaillierKeypair};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMode {
    Plain,
    Encrypted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FederatedRoundConfig {
    pub local_epochs: usize,
    pub mode: AggregationMode,
    pub seed: u64,
}

impl Default for FederatedRoundConfig {
    fn default() -> Self {
        FederatedRoundConfig { local_epochs: 1, mode: AggregationMode::Plain, seed: 0 }
    }
}

/// Key material for encrypted aggregation.
pub struct EncryptionContext<'a> {
    pub keypair: &'a PaillierKeypair,
    pub codec: &'a FixedPointCodec,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AggregationStats {
    pub encryptions: usize,
    pub decryptions: usize,
}

/// Uniform average of client update vectors. In encrypted mode every
/// coordinate of every update is fixed-point encoded and encrypted, the
/// ciphertexts of a coordinate are multiplied together, and only that
/// aggregate is decrypted.
pub fn aggregate_updates(
    updates: &[Vec<f64>],
    mode: AggregationMode,
    crypto: Option<&EncryptionContext<'_>>,
    seed: u64,
) -> Result<(Vec<f64>, AggregationStats)> {
    let m = updates.len();
    if m == 0 {
        return Err(invalid("aggregation needs at least one client"));
    }
    let p = updates[0].len();
    if updates.iter().any(|u| u.len() != p) {
        return Err(Error::Shape("client updates differ in length".into()));
    }
    match mode {
        AggregationMode::Plain => {
            let mut sum = vec![0.0; p];
            for u in updates {
                sum.iter_mut().zip(u).for_each(|(s, v)| *s += v);
            }
            Ok((sum.into_iter().map(|s| s / m as f64).collect(), AggregationStats::default()))
        }
        AggregationMode::Encrypted => {
            let ctx = crypto.ok_or_else(|| invalid("encrypted aggregation needs a key and codec"))?;
            if (m as u64) > ctx.codec.capacity() {
                return Err(invalid(format!(
                    "{m} clients exceed codec capacity {}",
                    ctx.codec.capacity()
                )));
            }
            if ctx.codec.modulus() != &ctx.keypair.public.n {
                return Err(invalid("codec modulus differs from the key modulus"));
            }
            let encrypted: Vec<Vec<Ciphertext>> = std::thread::scope(|scope| {
                let handles: Vec<_> = updates
                    .iter()
                    .enumerate()
                    .map(|(client, u)| {
                        scope.spawn(move || -> Result<Vec<Ciphertext>> {
                            let mut r = rng::stream(seed, client as u64);
                            let encoded = ctx.codec.encode_all(u)?;
                            encoded.iter().map(|z| ctx.keypair.public.encrypt(z, &mut r)).collect()
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("client thread panicked")).collect::<Result<_>>()
            })?;
            let pk = &ctx.keypair.public;
            let mut out = Vec::with_capacity(p);
            for j in 0..p {
                let agg = encrypted.iter().fold(pk.zero(), |acc, c| pk.add(&acc, &c[j]));
                let z: BigUint = ctx.keypair.decrypt(&agg)?;
                out.push(ctx.codec.decode(&z, m as u64)? / m as f64);
            }
            Ok((out, AggregationStats { encryptions: m * p, decryptions: p }))
        }
    }
}

#[derive(Debug, Clone)]
pub struct RoundReport {
    pub model: FusionModel,
    pub stats: AggregationStats,
}

/// Each client trains a copy of `global` on its own data for
/// `local_epochs`; the server averages the weight deltas uniformly.
pub fn federated_round(
    clients: &[Vec<Sample>],
    global: &FusionModel,
    config: &FederatedRoundConfig,
    crypto: Option<&EncryptionContext<'_>>,
) -> Result<RoundReport> {
    let base = global.params.flatten();
    let mut deltas = Vec::with_capacity(clients.len());
    for data in clients {
        // Every client uses the round seed, so a client's update depends
        // only on its data.
        let mut local = global.clone();
        local.config.seed = config.seed;
        let mut trainer = Trainer::new(local, Arc::from(data.as_slice()), Arc::from(Vec::new()))?;
        for _ in 0..config.local_epochs {
            trainer.run_epoch()?;
        }
        let trained = trainer.model.params.flatten();
        deltas.push(trained.iter().zip(&base).map(|(a, b)| a - b).collect::<Vec<f64>>());
    }
    let (mean, stats) = aggregate_updates(&deltas, config.mode, crypto, rng::derive(config.seed, "encrypt"))?;
    let mut model = global.clone();
    let updated: Vec<f64> = base.iter().zip(&mean).map(|(w, d)| w + d).collect();
    model.params.assign_flat(&updated);
    Ok(RoundReport { model, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TrainConfig;
    use rand::Rng;

    fn keys() -> (PaillierKeypair, FixedPointCodec) {
        let kp = PaillierKeypair::generate_seeded(128, 21).unwrap();
        let codec = FixedPointCodec::for_key(&kp.public).unwrap();
        (kp, codec)
    }

    #[test]
    fn plain_and_encrypted_agree() {
        let (kp, codec) = keys();
        let ctx = EncryptionContext { keypair: &kp, codec: &codec };
        let mut r = rng::seeded(2);
        for m in [1usize, 3, 5] {
            let updates: Vec<Vec<f64>> = (0..m).map(|_| (0..20).map(|_| r.gen_range(-2.0..2.0)).collect()).collect();
            let (plain, _) = aggregate_updates(&updates, AggregationMode::Plain, None, 0).unwrap();
            let (enc, stats) = aggregate_updates(&updates, AggregationMode::Encrypted, Some(&ctx), 0).unwrap();
            assert_eq!(stats.decryptions, 20);
            for (a, b) in plain.iter().zip(&enc) {
                assert!((a - b).abs() <= m as f64 / codec.scale());
            }
        }
    }

    #[test]
    fn overflow_names_coordinate() {
        let (kp, codec) = keys();
        let ctx = EncryptionContext { keypair: &kp, codec: &codec };
        let updates = vec![vec![0.0, 1e9, 0.0]];
        assert!(matches!(
            aggregate_updates(&updates, AggregationMode::Encrypted, Some(&ctx), 0),
            Err(Error::CodecOverflow { coordinate: 1, .. })
        ));
    }

    fn client_data(seed: u64) -> Vec<Sample> {
        let mut r = rng::seeded(seed);
        (0..16)
            .map(|i| Sample {
                statics: vec![r.gen_range(-1.0..1.0)],
                series: (0..3).map(|_| r.gen_range(-1.0..1.0)).collect(),
                label: (i % 2) as u8,
            })
            .collect()
    }

    #[test]
    fn identical_clients_match_single_client() {
        let cfg = TrainConfig { lstm_layers: 1, hidden_size: 2, mlp_hidden: vec![2], batch_size: 4, ..Default::default() };
        let global = FusionModel::new(&cfg, 1).unwrap();
        let round = FederatedRoundConfig::default();
        let one = federated_round(&[client_data(1)], &global, &round, None).unwrap();
        let three = federated_round(&vec![client_data(1); 3], &global, &round, None).unwrap();
        for (a, b) in one.model.params.flatten().iter().zip(three.model.params.flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_ne!(one.model.params, global.params);
    }
}
