//! From class probabilities to hand commands: class decision, gesture
//! lookup, DAC codes, I2C frames and sliding-window streaming.

mod dac;
mod gesture;
mod stream;

use serde::Serialize;
use thiserror::Error;

pub use dac::{encode_dac_frames, trajectory_to_codes, DacFrame, DAC_CHANNELS, WRITE_AND_UPDATE};
pub use gesture::{FingerTrajectory, GestureClass, GestureTable, DEFAULT_CHANNEL_MAP};
pub use stream::{stream_decode, stream_decode_with, StreamConfig, StreamDecoder};

use crate::features::LogSpectrogram;
use crate::nn::{NetError, Network, Real};

#[derive(Debug, Error, PartialEq)]
pub enum CommandError {
    #[error("channel {0} is assigned to more than one finger")]
    DuplicateChannel(u8),
    #[error("channel {0} out of range, the DAC has channels 0-7")]
    ChannelOutOfRange(u8),
    #[error("code {0} does not fit in 16 bits")]
    CodeOutOfRange(u32),
    #[error("invalid gesture table: {0}")]
    InvalidTable(String),
    #[error("invalid stream config: {0}")]
    InvalidStreamConfig(String),
}

/// Index of the largest probability; ties go to the lowest index.
pub fn argmax<F: Real>(probs: &[F]) -> usize {
    let mut best = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > probs[best] {
            best = i;
        }
    }
    best
}

/// Infer-mode classification of one spectrogram.
pub fn classify<F: Real>(network: &Network<F>, features: &LogSpectrogram) -> Result<(GestureClass, Vec<F>), NetError> {
    let probs = network.infer_one(&features.to_tensor())?;
    let class = GestureClass::from_index(argmax(&probs)).unwrap_or(GestureClass::Unknown);
    Ok((class, probs))
}

/// One recognized command. Unknown never carries a trajectory or frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub t_ms: u64,
    pub class: GestureClass,
    pub prob: f32,
    pub trajectory: Option<FingerTrajectory>,
    pub frames: Vec<DacFrame>,
}

#[derive(Serialize)]
struct DecisionWire<'a> {
    t_ms: u64,
    class: &'a str,
    prob: f32,
    trajectory: Option<[f64; 5]>,
    frames: Vec<[u8; 3]>,
}

impl Decision {
    /// Looks up the trajectory for `class` and encodes its frames.
    pub fn new(t_ms: u64, class: GestureClass, prob: f32, table: &GestureTable) -> Result<Self, CommandError> {
        let trajectory = table.lookup(class);
        let frames = match &trajectory {
            Some(t) => encode_dac_frames(&trajectory_to_codes(t, &table.channel_map, &table.max_fraction)?)?,
            None => Vec::new(),
        };
        Ok(Decision {
            t_ms,
            class,
            prob,
            trajectory,
            frames,
        })
    }

    /// A decision that carries no command (below threshold or unknown).
    pub fn no_command(t_ms: u64, class: GestureClass, prob: f32) -> Self {
        Decision {
            t_ms,
            class,
            prob,
            trajectory: None,
            frames: Vec::new(),
        }
    }

    /// `{"t_ms":..,"class":..,"prob":..,"trajectory":[..]|null,"frames":[[..],..]}`
    pub fn to_json(&self) -> String {
        serde_json::to_string(&DecisionWire {
            t_ms: self.t_ms,
            class: self.class.name(),
            prob: self.prob,
            trajectory: self.trajectory.map(|t| t.to_array()),
            frames: self.frames.iter().map(|f| f.bytes()).collect(),
        })
        .expect("decision serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Layer, NetworkSpec};

    #[test]
    fn argmax_tie_breaks_low() {
        assert_eq!(argmax(&[1.0f32 / 9.0; 9]), 0);
        assert_eq!(argmax(&[0.1f32, 0.4, 0.4, 0.1]), 1);
    }

    #[test]
    fn argmax_invariant_under_logit_shift() {
        let z = [0.3f64, -1.0, 2.5, 2.4, 0.0, 0.0, 1.0, -3.0, 2.0];
        let base = argmax(&crate::nn::softmax(&z));
        for c in [0.0, 100.0, -100.0] {
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            assert_eq!(argmax(&crate::nn::softmax(&shifted)), base);
        }
    }

    #[test]
    fn uniform_network_classifies_as_zero() {
        let net = Network::<f32>::zeros(NetworkSpec::reference()).unwrap();
        let f = crate::features::compute_features(&crate::audio::AudioClip::new(vec![0; 16000])).unwrap();
        let (class, probs) = classify(&net, &f).unwrap();
        assert_eq!(class, GestureClass::Zero);
        assert!(probs.iter().all(|&p| (p - 1.0 / 9.0).abs() < 1e-6));
        assert_eq!(classify(&net, &f).unwrap(), (class, probs));
    }

    #[test]
    fn biased_network_picks_class() {
        let mut net = Network::<f32>::zeros(NetworkSpec::reference()).unwrap();
        if let Some(Layer::Dense(d)) = net.layers_mut().last_mut() {
            d.bias[GestureClass::On.index()] = 5.0;
        }
        let f = crate::features::compute_features(&crate::audio::AudioClip::new(vec![0; 16000])).unwrap();
        assert_eq!(classify(&net, &f).unwrap().0, GestureClass::On);
    }

    #[test]
    fn decision_json_layout() {
        let table = GestureTable::default();
        let d = Decision::new(1500, GestureClass::Two, 0.93, &table).unwrap();
        assert_eq!(
            d.to_json(),
            r#"{"t_ms":1500,"class":"two","prob":0.93,"trajectory":[1.0,0.0,0.0,1.0,1.0],"frames":[[48,255,255],[49,0,0],[50,0,0],[51,255,255],[52,255,255]]}"#
        );
        let u = Decision::new(0, GestureClass::Unknown, 0.9, &table).unwrap();
        assert!(u.frames.is_empty() && u.trajectory.is_none());
        assert!(u.to_json().contains(r#""trajectory":null,"frames":[]"#));
    }
}
