use super::TrainError;
use crate::nn::Real;

/// Probabilities below this are clamped before the log.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn one_hot<F: Real>(class: usize, classes: usize) -> Vec<F> {
    let mut v = vec![F::zero(); classes];
    v[class] = F::one();
    v
}

/// `−(1/B) Σ_b Σ_k y_bk ln max(p_bk, 1e-12)`.
pub fn cross_entropy<F: Real>(probs: &[Vec<F>], targets: &[Vec<F>]) -> Result<F, TrainError> {
    if probs.len() != targets.len() {
        return Err(TrainError::shape("targets", probs.len(), targets.len()));
    }
    if probs.is_empty() {
        return Err(TrainError::shape("batch", 1, 0));
    }
    let floor = F::of(PROB_FLOOR);
    let mut total = F::zero();
    for (p, y) in probs.iter().zip(targets) {
        if p.len() != y.len() {
            return Err(TrainError::shape("classes", p.len(), y.len()));
        }
        for (p, y) in p.iter().zip(y) {
            if *y != F::zero() {
                total = total - *y * p.max(floor).ln();
            }
        }
    }
    Ok(total / F::of(probs.len() as f64))
}

/// Cross-entropy against integer labels.
pub fn cross_entropy_labels<F: Real>(probs: &[Vec<F>], labels: &[usize]) -> Result<F, TrainError> {
    let classes = probs.first().map_or(0, Vec::len);
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(TrainError::shape("label", classes, bad));
    }
    let targets: Vec<Vec<F>> = labels.iter().map(|&l| one_hot(l, classes)).collect();
    cross_entropy(probs, &targets)
}
