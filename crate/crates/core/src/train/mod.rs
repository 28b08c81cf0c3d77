//! Loss, optimizer, epoch loop, evaluation and gradient checking.

mod adam;
mod data;
mod eval;
mod fit;
mod gradcheck;
mod loss;

use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use data::{clips_for_split, ClipSource, LabeledClip};
pub use eval::{evaluate, evaluate_index, Evaluation};
pub use fit::{fit, train_epoch, AugmentConfig, EpochReport, TrainConfig, TrainData, CSV_HEADER};
pub use gradcheck::{gradient_check, GradCheckReport, GroupError};
pub use loss::{cross_entropy, cross_entropy_labels, one_hot};

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("the training split is empty")]
    EmptyTrainingSplit,
    #[error("the {0} split is empty")]
    EmptySplit(String),
    #[error("{what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

impl TrainError {
    pub(crate) fn shape(what: &'static str, expected: usize, found: usize) -> Self {
        TrainError::ShapeMismatch { what, expected, found }
    }
}
