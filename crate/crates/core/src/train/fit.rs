use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::{clips_for_split, cross_entropy_labels, evaluate, one_hot, AdamConfig, AdamState, LabeledClip, TrainError};
use crate::audio::{mix_noise, subsample_unknown, DatasetIndex, NoisePool, Split};
use crate::checkpoint::{self, Metadata};
use crate::command::argmax;
use crate::features::window_features;
use crate::nn::{Mode, Network, Tensor3};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::Error;

pub const CSV_HEADER: &str = "epoch,train_loss,train_acc,val_acc,seconds";

/// Background-noise augmentation: with `probability`, add a noise crop at a
/// gain drawn uniformly from `[0, max_gain)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub probability: f64,
    pub max_gain: f32,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            probability: 0.8,
            max_gain: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// `None` disables augmentation.
    pub augment: Option<AugmentConfig>,
    pub balance_unknown: bool,
    pub dropout: bool,
    /// Write measured wall-clock seconds to the CSV; when false the column
    /// is 0 so two runs produce identical files.
    pub record_timing: bool,
    /// Directory for `epochs.csv`, `best.kws` and `final.kws`.
    pub out_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 90,
            batch_size: 64,
            seed: 17,
            adam: AdamConfig::default(),
            augment: Some(AugmentConfig::default()),
            balance_unknown: true,
            dropout: true,
            record_timing: true,
            out_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(self.adam.lr > 0.0) {
            return bad("learning rate must be positive");
        }
        if let Some(a) = self.augment {
            if !(0.0..=1.0).contains(&a.probability) || !(0.0..=1.0).contains(&a.max_gain) {
                return bad("augmentation probability and gain must be in [0, 1]");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainData {
    pub train: Vec<LabeledClip>,
    /// Validation set used for model selection (balanced when requested).
    pub val: Vec<LabeledClip>,
    /// Unbalanced validation set, when it differs from `val`.
    pub val_raw: Option<Vec<LabeledClip>>,
    pub noise: NoisePool,
}

impl TrainData {
    pub fn from_index(index: &DatasetIndex, config: &TrainConfig) -> Result<Self, Error> {
        let noise = if config.augment.is_some() {
            NoisePool::load(&index.noise_files)?
        } else {
            NoisePool::empty()
        };
        let raw_val = clips_for_split(index, Split::Val);
        let (train, val) = if config.balance_unknown {
            let balanced = subsample_unknown(index, config.seed);
            (clips_for_split(&balanced, Split::Train), clips_for_split(&balanced, Split::Val))
        } else {
            (clips_for_split(index, Split::Train), raw_val.clone())
        };
        let val_raw = (raw_val.len() != val.len()).then_some(raw_val);
        log::info!(
            "{} training clips, {} validation clips, {} noise recordings",
            train.len(),
            val.len(),
            noise.len()
        );
        Ok(TrainData {
            train,
            val,
            val_raw,
            noise,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
    pub val_acc_raw: Option<f64>,
    pub seconds: f64,
}

impl EpochReport {
    pub fn csv_row(&self) -> String {
        let val = self.val_acc.map(|v| format!("{v:.6}")).unwrap_or_default();
        format!(
            "{},{:.6},{:.6},{},{:.3}",
            self.epoch, self.train_loss, self.train_acc, val, self.seconds
        )
    }
}

fn training_input(
    clip: &LabeledClip,
    index: usize,
    epoch: usize,
    noise: &NoisePool,
    config: &TrainConfig,
) -> Result<Tensor3<f32>, Error> {
    let mut window = clip.window()?;
    if let Some(aug) = config.augment {
        if !noise.is_empty() {
            let mut rng = stream_rng(config.seed, Stream::Augment, &[epoch as u64, index as u64]);
            if rng.gen::<f64>() < aug.probability {
                let gain = rng.gen::<f32>() * aug.max_gain;
                window = mix_noise(&window, noise, gain, rng.gen())?;
            }
        }
    }
    Ok(window_features(window.values())?.to_tensor())
}

/// One pass over the shuffled training split. `epoch` is 0-based.
///
/// Loss and accuracy are the running training-mode figures (dropout on,
/// batch statistics); validation accuracy uses inference mode.
pub fn train_epoch(
    network: &mut Network<f32>,
    data: &TrainData,
    state: &mut AdamState<f32>,
    config: &TrainConfig,
    epoch: usize,
) -> Result<EpochReport, Error> {
    config.validate()?;
    if data.train.is_empty() {
        return Err(TrainError::EmptyTrainingSplit.into());
    }
    let started = Instant::now();
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    order.shuffle(&mut stream_rng(config.seed, Stream::Shuffle, &[epoch as u64]));

    let classes = network.num_classes();
    let (mut loss_sum, mut correct) = (0.0f64, 0usize);
    for (b, batch) in order.chunks(config.batch_size).enumerate() {
        let inputs: Vec<Tensor3<f32>> = batch
            .par_iter()
            .map(|&i| training_input(&data.train[i], i, epoch, &data.noise, config))
            .collect::<Result<_, Error>>()?;
        let labels: Vec<usize> = batch.iter().map(|&i| data.train[i].label.index()).collect();
        let dropout_seed = config
            .dropout
            .then(|| derive_seed(config.seed, Stream::Dropout, &[epoch as u64, b as u64]));
        let (probs, trace) = network.forward(&inputs, Mode::Train { dropout_seed })?;
        let trace = trace.expect("training forward returns a trace");
        loss_sum += f64::from(cross_entropy_labels(&probs, &labels)?) * batch.len() as f64;
        correct += probs.iter().zip(&labels).filter(|(p, &l)| argmax(p) == l).count();

        let targets: Vec<Vec<f32>> = labels.iter().map(|&l| one_hot(l, classes)).collect();
        let grads = network.backward(&trace, &targets)?;
        network.apply_batch_statistics(&trace);
        state.step(&mut network.trainable_mut(), &grads.groups)?;
    }

    let val_acc = match data.val.is_empty() {
        true => None,
        false => Some(evaluate(network, &data.val)?.accuracy),
    };
    let val_acc_raw = match &data.val_raw {
        Some(raw) if !raw.is_empty() => Some(evaluate(network, raw)?.accuracy),
        _ => None,
    };
    let n = data.train.len() as f64;
    Ok(EpochReport {
        epoch: epoch + 1,
        train_loss: loss_sum / n,
        train_acc: correct as f64 / n,
        val_acc,
        val_acc_raw,
        seconds: if config.record_timing {
            started.elapsed().as_secs_f64()
        } else {
            0.0
        },
    })
}

fn write_line(file: &mut File, path: &Path, line: &str) -> Result<(), Error> {
    writeln!(file, "{line}")
        .and_then(|_| file.flush())
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Runs `config.epochs` epochs. With an output directory, appends each
/// epoch to `epochs.csv`, keeps `best.kws` (highest validation accuracy)
/// and writes `final.kws` at the end.
pub fn fit(network: &mut Network<f32>, data: &TrainData, config: &TrainConfig) -> Result<Vec<EpochReport>, Error> {
    config.validate()?;
    if data.train.is_empty() {
        return Err(TrainError::EmptyTrainingSplit.into());
    }
    let mut csv = match &config.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
            let path = dir.join("epochs.csv");
            let mut f = File::create(&path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
            write_line(&mut f, &path, CSV_HEADER)?;
            Some((f, path))
        }
        None => None,
    };

    let mut state = AdamState::for_network(config.adam, network);
    let mut reports = Vec::with_capacity(config.epochs);
    let mut best: Option<f64> = None;
    for epoch in 0..config.epochs {
        let r = train_epoch(network, data, &mut state, config, epoch)?;
        log::info!(
            "epoch {:>3}: loss {:.4} train {:.4} val {} raw val {} ({:.1}s)",
            r.epoch,
            r.train_loss,
            r.train_acc,
            r.val_acc.map_or("-".into(), |v| format!("{v:.4}")),
            r.val_acc_raw.map_or("-".into(), |v| format!("{v:.4}")),
            r.seconds
        );
        if let Some((f, path)) = csv.as_mut() {
            write_line(f, path, &r.csv_row())?;
        }
        if let Some(v) = r.val_acc {
            if best.map_or(true, |b| v > b) {
                best = Some(v);
                if let Some(dir) = &config.out_dir {
                    let meta = Metadata {
                        epochs_completed: r.epoch,
                        best_val_accuracy: best,
                        seed: config.seed,
                    };
                    checkpoint::save(network, &meta, dir.join("best.kws"))?;
                }
            }
        }
        reports.push(r);
    }
    if let Some(dir) = &config.out_dir {
        let meta = Metadata {
            epochs_completed: config.epochs,
            best_val_accuracy: best,
            seed: config.seed,
        };
        checkpoint::save(network, &meta, dir.join("final.kws"))?;
    }
    Ok(reports)
}
