//! Speech-command recognition for a voice-controlled prosthetic hand.
//!
//! The pipeline runs from raw 16 kHz PCM to hand commands:
//!
//! 1. [`audio`] decodes WAV clips, fixes them to a one-second window and
//!    indexes the speech-commands dataset layout.
//! 2. [`features`] turns the window into a 129×71 log power spectrogram.
//! 3. [`nn`] holds the compact two-convolution network (forward, backward,
//!    parameter accounting) with 9 output classes.
//! 4. [`train`] supplies cross-entropy, Adam, the epoch loop and the
//!    finite-difference gradient check.
//! 5. [`command`] maps a class to a finger trajectory, 16-bit DAC codes and
//!    3-byte I2C frames, and runs sliding-window streaming decode.
//! 6. [`checkpoint`] and [`cli`] persist networks and expose the workflows.
//!
//! Runnable walkthroughs for each stage live in the crate's `examples/`
//! directory (`cargo run --example <name>`).

pub mod audio;
pub mod checkpoint;
pub mod cli;
pub mod command;
pub mod config;
pub mod error;
pub mod features;
pub mod nn;
pub mod rng;
pub mod synth;
pub mod train;

pub use audio::{AudioClip, SampleWindow, SAMPLE_RATE_HZ, WINDOW_SAMPLES};
pub use command::{GestureClass, GestureTable};
pub use error::{Error, Result};
pub use features::{compute_features, LogSpectrogram, StftSpec};
pub use nn::{Mode, Network, NetworkSpec, Real, Tensor3};
