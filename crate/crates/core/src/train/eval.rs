use rayon::prelude::*;

use super::{cross_entropy_labels, LabeledClip, TrainError};
use crate::audio::{DatasetIndex, Split};
use crate::command::argmax;
use crate::features::window_features;
use crate::nn::{Network, Real};
use crate::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub count: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// Mean cross-entropy in inference mode.
    pub loss: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl Evaluation {
    pub fn to_json(&self, class_names: &[String]) -> serde_json::Value {
        serde_json::json!({
            "count": self.count,
            "correct": self.correct,
            "accuracy": self.accuracy,
            "loss": self.loss,
            "classes": class_names,
            "confusion": self.confusion,
        })
    }
}

/// Inference-mode classification of every clip.
pub fn evaluate<F: Real>(network: &Network<F>, clips: &[LabeledClip]) -> Result<Evaluation, Error> {
    if clips.is_empty() {
        return Err(TrainError::EmptySplit("evaluation".into()).into());
    }
    let probs: Vec<Vec<F>> = clips
        .par_iter()
        .map(|c| {
            let f = window_features(c.window()?.values())?;
            Ok(network.infer_one(&f.to_tensor())?)
        })
        .collect::<Result<_, Error>>()?;
    let classes = network.num_classes();
    let mut confusion = vec![vec![0; classes]; classes];
    let labels: Vec<usize> = clips.iter().map(|c| c.label.index()).collect();
    for (p, &l) in probs.iter().zip(&labels) {
        confusion[l][argmax(p)] += 1;
    }
    let correct = (0..classes).map(|i| confusion[i][i]).sum();
    let loss = cross_entropy_labels(&probs, &labels)?.f64();
    Ok(Evaluation {
        count: clips.len(),
        correct,
        accuracy: correct as f64 / clips.len() as f64,
        loss,
        confusion,
    })
}

pub fn evaluate_index<F: Real>(network: &Network<F>, index: &DatasetIndex, split: Split) -> Result<Evaluation, Error> {
    let clips = super::clips_for_split(index, split);
    if clips.is_empty() {
        return Err(TrainError::EmptySplit(split.name().into()).into());
    }
    evaluate(network, &clips)
}
