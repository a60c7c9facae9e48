use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::fusion::FusionModel;
use super::quantize::{dequantize, QuantizedModel, QuantizedTensor};
use crate::checkpoint::{Checkpoint, Entry, EntryData};
use crate::error::{Error, Result};

pub const MODEL_KIND: &str = "fusion_model";

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    kind: String,
    static_dim: usize,
    quantized: bool,
    param_count: usize,
    config: TrainConfig,
}

fn doc(model: &FusionModel, quantized: bool) -> Result<String> {
    Ok(serde_json::to_string(&ModelDoc {
        kind: MODEL_KIND.into(),
        static_dim: model.static_dim,
        quantized,
        param_count: model.param_count(),
        config: model.config.clone(),
    })?)
}

pub fn model_to_checkpoint(model: &FusionModel) -> Result<Checkpoint> {
    let entries = model
        .params
        .tensors()
        .into_iter()
        .map(|(name, t)| Entry {
            name,
            shape: t.shape.iter().map(|&d| d as u64).collect(),
            data: EntryData::F64(t.data.clone()),
        })
        .collect();
    Ok(Checkpoint {
        entries,
        document: doc(model, false)?,
    })
}

pub fn quantized_to_checkpoint(q: &QuantizedModel) -> Result<Checkpoint> {
    let entries = q
        .tensors
        .iter()
        .map(|t| Entry {
            name: t.name.clone(),
            shape: t.shape.iter().map(|&d| d as u64).collect(),
            data: EntryData::I8 {
                codes: t.codes.clone(),
                scale: t.scale,
                zero_point: t.zero_point,
            },
        })
        .collect();
    Ok(Checkpoint {
        entries,
        document: doc(&q.skeleton, true)?,
    })
}

/// Loads a full-precision or quantized model checkpoint (the latter is dequantized).
pub fn model_from_checkpoint(ck: &Checkpoint) -> Result<FusionModel> {
    let d: ModelDoc = serde_json::from_str(&ck.document)?;
    if d.kind != MODEL_KIND {
        return Err(Error::Format(format!("expected a {MODEL_KIND} checkpoint, found {}", d.kind)));
    }
    let mut model = FusionModel::zeros(&d.config, d.static_dim);
    let names: Vec<(String, Vec<usize>)> = model
        .params
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.shape.clone()))
        .collect();
    let mut quantized = Vec::new();
    let mut values = Vec::new();
    for (name, shape) in &names {
        let e = ck.get(name)?;
        if e.shape.iter().map(|&x| x as usize).collect::<Vec<_>>() != *shape {
            return Err(Error::Format(format!("entry `{name}` has shape {:?}, expected {shape:?}", e.shape)));
        }
        match &e.data {
            EntryData::F64(v) if !d.quantized => values.push(v.clone()),
            EntryData::I8 { codes, scale, zero_point } if d.quantized => quantized.push(QuantizedTensor {
                name: name.clone(),
                shape: shape.clone(),
                codes: codes.clone(),
                scale: *scale,
                zero_point: *zero_point,
            }),
            _ => return Err(Error::Format(format!("entry `{name}` has an unexpected dtype"))),
        }
    }
    if d.quantized {
        return Ok(dequantize(&QuantizedModel {
            skeleton: model,
            tensors: quantized,
        }));
    }
    let mut it = values.into_iter();
    model.params.for_each_mut(|_, t| t.data = it.next().expect("one entry per tensor"));
    Ok(model)
}

pub fn save_model(model: &FusionModel, path: &std::path::Path) -> Result<()> {
    model_to_checkpoint(model)?.write(path)
}

pub fn load_model(path: &std::path::Path) -> Result<FusionModel> {
    model_from_checkpoint(&Checkpoint::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::quantize_int8;

    #[test]
    fn model_survives_checkpoint_bytes() {
        let cfg = TrainConfig { lstm_layers: 2, hidden_size: 5, seed: 11, ..Default::default() };
        let m = FusionModel::new(&cfg, 4).unwrap();
        let bytes = model_to_checkpoint(&m).unwrap().to_bytes().unwrap();
        let back = model_from_checkpoint(&Checkpoint::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn quantized_checkpoint_loads_dequantized() {
        let cfg = TrainConfig { lstm_layers: 2, hidden_size: 32, ..Default::default() };
        let m = FusionModel::new(&cfg, 8).unwrap();
        let q = quantize_int8(&m);
        let ck = quantized_to_checkpoint(&q).unwrap();
        let back = model_from_checkpoint(&Checkpoint::from_bytes(&ck.to_bytes().unwrap()).unwrap()).unwrap();
        assert_eq!(back, dequantize(&q));
        let full = model_to_checkpoint(&m).unwrap().to_bytes().unwrap().len();
        let small = ck.to_bytes().unwrap().len();
        assert!(small < full / 3);
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let ck = Checkpoint { entries: vec![], document: r#"{"kind":"paillier_keypair"}"#.into() };
        assert!(model_from_checkpoint(&ck).is_err());
    }
}
