//! Affine per-tensor 8-bit quantization.
//!
//! A tensor with range `[lo, hi]` uses `scale = (hi − lo) / 255` and code
//! `q ∈ [−128, 127]` decoding to `lo + (q + 128) · scale`. The offset `lo`
//! is stored as a real zero point so both range ends are representable and
//! the round-trip error is at most half a step.

use super::fusion::FusionModel;
use super::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub codes: Vec<i8>,
    pub scale: f64,
    pub zero_point: f64,
}

impl QuantizedTensor {
    pub fn quantize(name: &str, t: &Tensor) -> Self {
        let lo = t.data.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = t.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if t.data.is_empty() { (0.0, 0.0) } else { (lo, hi) };
        let scale = (hi - lo) / 255.0;
        let codes = t
            .data
            .iter()
            .map(|&v| {
                let step = if scale > 0.0 { ((v - lo) / scale).round() } else { 0.0 };
                (step.clamp(0.0, 255.0) as i32 - 128) as i8
            })
            .collect();
        QuantizedTensor {
            name: name.to_string(),
            shape: t.shape.clone(),
            codes,
            scale,
            zero_point: lo,
        }
    }

    pub fn dequantize(&self) -> Tensor {
        Tensor::from_vec(
            &self.shape,
            self.codes
                .iter()
                .map(|&q| self.zero_point + (q as i32 + 128) as f64 * self.scale)
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedModel {
    /// Model with its architecture; its parameter values are not used.
    pub skeleton: FusionModel,
    pub tensors: Vec<QuantizedTensor>,
}

impl QuantizedModel {
    /// Bytes of weight payload (one per parameter).
    pub fn weight_bytes(&self) -> usize {
        self.tensors.iter().map(|t| t.codes.len()).sum()
    }

    /// Weight payload of the same model at 32-bit precision.
    pub fn baseline_f32_bytes(&self) -> usize {
        4 * self.weight_bytes()
    }
}

pub fn quantize_int8(model: &FusionModel) -> QuantizedModel {
    QuantizedModel {
        skeleton: model.clone(),
        tensors: model
            .params
            .tensors()
            .into_iter()
            .map(|(name, t)| QuantizedTensor::quantize(&name, t))
            .collect(),
    }
}

pub fn dequantize(q: &QuantizedModel) -> FusionModel {
    let mut model = q.skeleton.clone();
    let mut it = q.tensors.iter();
    model.params.for_each_mut(|_, t| {
        *t = it.next().expect("one quantized tensor per parameter").dequantize();
    });
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng as _;

    #[test]
    fn zero_tensor_round_trips_exactly() {
        let t = Tensor::zeros(&[3, 4]);
        assert_eq!(QuantizedTensor::quantize("z", &t).dequantize(), t);
    }

    proptest! {
        #[test]
        fn error_within_half_step(data in prop::collection::vec(-50.0f64..50.0, 1..200)) {
            let t = Tensor::from_vec(&[data.len()], data);
            let q = QuantizedTensor::quantize("t", &t);
            let back = q.dequantize();
            let lo = t.data.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = t.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let bound = (hi - lo) / 255.0 / 2.0;
            for (a, b) in t.data.iter().zip(&back.data) {
                prop_assert!((a - b).abs() <= bound + 4.0 * f64::EPSILON * hi.abs().max(lo.abs()));
            }
        }
    }

    #[test]
    fn payload_is_quarter_of_f32_and_count_preserved() {
        let cfg = crate::model::TrainConfig { lstm_layers: 1, hidden_size: 6, ..Default::default() };
        let m = FusionModel::new(&cfg, 4).unwrap();
        let q = quantize_int8(&m);
        assert_eq!(q.weight_bytes() * 4, q.baseline_f32_bytes());
        assert_eq!(q.weight_bytes(), m.param_count());
        assert_eq!(dequantize(&q).param_count(), m.param_count());
    }

    #[test]
    fn dequantized_model_tracks_original() {
        let cfg = crate::model::TrainConfig { lstm_layers: 1, hidden_size: 6, ..Default::default() };
        let m = FusionModel::new(&cfg, 3).unwrap();
        let d = dequantize(&quantize_int8(&m));
        let mut r = rng::seeded(2);
        for _ in 0..20 {
            let s: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
            let x: Vec<f64> = (0..5).map(|_| r.gen_range(-1.0..1.0)).collect();
            assert!((m.predict(&s, &x).unwrap() - d.predict(&s, &x).unwrap()).abs() < 0.02);
        }
    }
}
