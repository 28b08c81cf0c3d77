//! Log power spectrogram features.
//!
//! A one-second window is cut into 71 frames of 256 samples with a hop of
//! 224, each frame is Hann-weighted and transformed, and the one-sided
//! squared magnitudes (129 bins) are log-compressed with a 1e-10 floor.
//! The result is laid out bin-major: row `k` is frequency bin `k`, column `t`
//! is frame `t`, which is also the (height, width) order the network sees.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::audio::{AudioClip, WINDOW_SAMPLES};
use crate::nn::{Real, Tensor3};

pub const FFT_BINS: usize = 129;
pub const FRAMES: usize = 71;
pub const LOG_EPSILON: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("expected {expected} samples, got {found}")]
    BadWindowLength { expected: usize, found: usize },
    #[error("invalid STFT geometry: {0}")]
    BadSpec(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowFunction {
    /// Periodic Hann, `0.5 - 0.5 cos(2πn/N)`.
    Hann,
    Rectangular,
}

impl WindowFunction {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowFunction::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
            WindowFunction::Rectangular => vec![1.0; len],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftSpec {
    pub input_length: usize,
    pub segment_length: usize,
    pub hop: usize,
    pub window: WindowFunction,
    pub epsilon: f64,
}

impl Default for StftSpec {
    fn default() -> Self {
        StftSpec {
            input_length: WINDOW_SAMPLES,
            segment_length: 256,
            hop: 224,
            window: WindowFunction::Hann,
            epsilon: LOG_EPSILON,
        }
    }
}

impl StftSpec {
    pub fn fft_bins(&self) -> usize {
        self.segment_length / 2 + 1
    }

    /// Whole frames that fit in `samples` samples.
    pub fn frame_count(&self, samples: usize) -> usize {
        if samples < self.segment_length {
            0
        } else {
            (samples - self.segment_length) / self.hop + 1
        }
    }

    fn validate(&self) -> Result<(), FeatureError> {
        if self.segment_length < 2 || self.hop == 0 {
            return Err(FeatureError::BadSpec("segment length must be ≥ 2 and hop ≥ 1"));
        }
        if self.input_length < self.segment_length {
            return Err(FeatureError::BadSpec("input shorter than one segment"));
        }
        if !(self.epsilon > 0.0) {
            return Err(FeatureError::BadSpec("epsilon must be positive"));
        }
        Ok(())
    }
}

/// Dense bins × frames grid, bin-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    bins: usize,
    frames: usize,
    values: Vec<f64>,
}

impl Grid {
    pub fn new(bins: usize, frames: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), bins * frames, "grid data length");
        Grid { bins, frames, values }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.bins, self.frames)
    }

    pub fn get(&self, bin: usize, frame: usize) -> f64 {
        self.values[bin * self.frames + frame]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column `frame` as a vector over bins.
    pub fn frame(&self, frame: usize) -> Vec<f64> {
        (0..self.bins).map(|k| self.get(k, frame)).collect()
    }
}

/// The network input: natural log of spectrogram power plus epsilon.
#[derive(Debug, Clone, PartialEq)]
pub struct LogSpectrogram(Grid);

impl LogSpectrogram {
    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn grid(&self) -> &Grid {
        &self.0
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn to_tensor<F: Real>(&self) -> Tensor3<F> {
        let (h, w) = self.shape();
        Tensor3::from_vec(h, w, 1, self.values().iter().map(|&v| F::of(v)).collect())
    }

    /// 129 rows of 71 comma-separated values, row `k` = bin `k`.
    pub fn to_csv(&self) -> String {
        let (bins, frames) = self.shape();
        let mut out = String::with_capacity(bins * frames * 20);
        for k in 0..bins {
            for t in 0..frames {
                if t > 0 {
                    out.push(',');
                }
                write!(out, "{}", self.0.get(k, t)).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

struct Stft {
    spec: StftSpec,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl Stft {
    fn new(spec: StftSpec) -> Self {
        Stft {
            spec,
            window: spec.window.coefficients(spec.segment_length),
            fft: FftPlanner::new().plan_fft_forward(spec.segment_length),
        }
    }

    fn power<T: Copy + Into<f64>>(&self, samples: &[T]) -> Grid {
        let seg = self.spec.segment_length;
        let bins = self.spec.fft_bins();
        let frames = self.spec.frame_count(samples.len());
        let mut values = vec![0.0; bins * frames];
        let mut buf = vec![Complex::new(0.0, 0.0); seg];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for t in 0..frames {
            let frame = &samples[t * self.spec.hop..t * self.spec.hop + seg];
            for ((b, &s), &w) in buf.iter_mut().zip(frame).zip(&self.window) {
                *b = Complex::new(s.into() * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (k, c) in buf.iter().take(bins).enumerate() {
                values[k * frames + t] = c.norm_sqr();
            }
        }
        Grid::new(bins, frames, values)
    }
}

fn default_stft() -> &'static Stft {
    static STFT: OnceLock<Stft> = OnceLock::new();
    STFT.get_or_init(|| Stft::new(StftSpec::default()))
}

/// Squared-magnitude STFT of exactly `spec.input_length` samples.
pub fn stft_power<T: Copy + Into<f64>>(samples: &[T], spec: &StftSpec) -> Result<Grid, FeatureError> {
    spec.validate()?;
    if samples.len() != spec.input_length {
        return Err(FeatureError::BadWindowLength {
            expected: spec.input_length,
            found: samples.len(),
        });
    }
    if *spec == StftSpec::default() {
        Ok(default_stft().power(samples))
    } else {
        Ok(Stft::new(*spec).power(samples))
    }
}

/// `ln(power + epsilon)` elementwise.
pub fn log_compress(power: &Grid, epsilon: f64) -> LogSpectrogram {
    let (bins, frames) = power.shape();
    LogSpectrogram(Grid::new(
        bins,
        frames,
        power.values().iter().map(|&p| (p + epsilon).ln()).collect(),
    ))
}

/// Clip → one-second window → power spectrogram → log.
pub fn compute_features(clip: &AudioClip) -> Result<LogSpectrogram, FeatureError> {
    window_features(clip.to_window().values())
}

/// Features of an already normalized one-second window.
pub fn window_features(window: &[f32]) -> Result<LogSpectrogram, FeatureError> {
    let spec = StftSpec::default();
    Ok(log_compress(&stft_power(window, &spec)?, spec.epsilon))
}
