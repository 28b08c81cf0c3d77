use std::path::Path;

use rand::Rng;

use super::{read_wav, AudioError, SampleWindow, PCM_SCALE, WINDOW_SAMPLES};
use crate::rng::rng_from;

/// Background-noise recordings used for augmentation, each at least one
/// second long.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NoisePool {
    clips: Vec<Vec<f32>>,
}

impl NoisePool {
    pub fn new(clips: Vec<Vec<f32>>) -> Result<Self, AudioError> {
        if let Some((index, c)) = clips.iter().enumerate().find(|(_, c)| c.len() < WINDOW_SAMPLES) {
            return Err(AudioError::ShortNoiseClip { index, len: c.len() });
        }
        Ok(NoisePool { clips })
    }

    pub fn empty() -> Self {
        NoisePool::default()
    }

    /// Loads noise WAVs, skipping files shorter than one second.
    pub fn load<P: AsRef<Path>>(paths: &[P]) -> Result<Self, AudioError> {
        let mut clips = Vec::new();
        for p in paths {
            let clip = read_wav(p)?;
            if clip.len() < WINDOW_SAMPLES {
                log::warn!("skipping short noise file {}", p.as_ref().display());
                continue;
            }
            clips.push(clip.samples().iter().map(|&v| f32::from(v) / PCM_SCALE).collect());
        }
        Ok(NoisePool { clips })
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    /// The seeded 16000-sample crop that [`mix_noise`] adds.
    pub fn crop(&self, offset_seed: u64) -> Option<&[f32]> {
        if self.clips.is_empty() {
            return None;
        }
        let mut rng = rng_from(offset_seed);
        let clip = &self.clips[rng.gen_range(0..self.clips.len())];
        let start = rng.gen_range(0..=clip.len() - WINDOW_SAMPLES);
        Some(&clip[start..start + WINDOW_SAMPLES])
    }
}

/// `clamp(window + gain * crop, -1, 1)`; gain 0 returns the input unchanged.
pub fn mix_noise(window: &SampleWindow, pool: &NoisePool, gain: f32, offset_seed: u64) -> Result<SampleWindow, AudioError> {
    if gain == 0.0 {
        return Ok(window.clone());
    }
    let crop = pool.crop(offset_seed).ok_or(AudioError::EmptyNoisePool(gain))?;
    let mixed: Vec<f32> = window
        .values()
        .iter()
        .zip(crop)
        .map(|(w, n)| (w + gain * n).clamp(-1.0, 1.0))
        .collect();
    Ok(SampleWindow::from_samples(&mixed))
}
