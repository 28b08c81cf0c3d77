//! PCM ingest: WAV decoding, one-second windows, dataset indexing and
//! background-noise mixing.

mod dataset;
mod noise;
mod wav;

use thiserror::Error;

pub use dataset::{index_dataset, subsample_unknown, DatasetEntry, DatasetIndex, Split};
pub use noise::{mix_noise, NoisePool};
pub use wav::{decode_wav, encode_wav, read_wav};

/// The only accepted sample rate.
pub const SAMPLE_RATE_HZ: u32 = 16_000;
/// Samples in the one-second network window.
pub const WINDOW_SAMPLES: usize = 16_000;
/// PCM normalization divisor: the full i16 range maps into [-1, 1).
pub const PCM_SCALE: f32 = 32_768.0;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("not a RIFF/WAVE container")]
    NotRiff,
    #[error("unsupported encoding: format code {format}, {bits} bits per sample")]
    UnsupportedEncoding { format: u16, bits: u16 },
    #[error("unsupported channel count {0}, expected mono")]
    UnsupportedChannels(u16),
    #[error("unsupported sample rate {0} Hz, expected 16000 Hz")]
    UnsupportedSampleRate(u32),
    #[error("malformed WAV: {0}")]
    Malformed(&'static str),
    #[error("dataset root is missing {0}")]
    MissingSplitLists(String),
    #[error("no labeled WAV files found under {0}")]
    EmptyDataset(String),
    #[error("noise gain {0} requested with an empty noise pool")]
    EmptyNoisePool(f32),
    #[error("noise clip {index} has {len} samples, at least 16000 required")]
    ShortNoiseClip { index: usize, len: usize },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

/// Decoded 16 kHz mono 16-bit PCM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioClip {
    samples: Vec<i16>,
}

impl AudioClip {
    pub fn new(samples: Vec<i16>) -> Self {
        AudioClip { samples }
    }

    pub fn samples(&self) -> &[i16] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        SAMPLE_RATE_HZ
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<i16> {
        self.samples
    }

    /// Scales to [-1, 1), zero-pads short clips at the end and keeps the
    /// first 16000 samples of long ones.
    pub fn to_window(&self) -> SampleWindow {
        SampleWindow::from_pcm(&self.samples)
    }
}

/// Exactly one second of normalized audio, every value in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWindow {
    values: Vec<f32>,
}

impl SampleWindow {
    pub fn silence() -> Self {
        SampleWindow {
            values: vec![0.0; WINDOW_SAMPLES],
        }
    }

    pub fn from_pcm(pcm: &[i16]) -> Self {
        let mut values: Vec<f32> = pcm
            .iter()
            .take(WINDOW_SAMPLES)
            .map(|&v| f32::from(v) / PCM_SCALE)
            .collect();
        values.resize(WINDOW_SAMPLES, 0.0);
        SampleWindow { values }
    }

    /// Builds a window from real samples, clamping into [-1, 1] and fixing
    /// the length the same way as [`SampleWindow::from_pcm`].
    pub fn from_samples(samples: &[f32]) -> Self {
        let mut values: Vec<f32> = samples
            .iter()
            .take(WINDOW_SAMPLES)
            .map(|v| v.clamp(-1.0, 1.0))
            .collect();
        values.resize(WINDOW_SAMPLES, 0.0);
        SampleWindow { values }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Back to 16-bit PCM (rounded, saturating).
    pub fn to_pcm(&self) -> Vec<i16> {
        self.values
            .iter()
            .map(|v| (v * PCM_SCALE).round().clamp(-32768.0, 32767.0) as i16)
            .collect()
    }
}

/// Same as [`AudioClip::to_window`].
pub fn to_window(clip: &AudioClip) -> SampleWindow {
    clip.to_window()
}
