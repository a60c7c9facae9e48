/// One model-ready example: preprocessed statics, preprocessed series, label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub statics: Vec<f64>,
    pub series: Vec<f64>,
    pub label: u8,
}

pub fn labels(samples: &[Sample]) -> Vec<bool> {
    samples.iter().map(|s| s.label == 1).collect()
}

pub(crate) fn has_both_classes(samples: &[Sample]) -> bool {
    let pos = samples.iter().filter(|s| s.label == 1).count();
    pos > 0 && pos < samples.len()
}
