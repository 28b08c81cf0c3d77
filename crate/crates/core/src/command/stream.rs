use std::io::Read;

use super::{argmax, CommandError, Decision, GestureClass, GestureTable};
use crate::audio::{SampleWindow, SAMPLE_RATE_HZ, WINDOW_SAMPLES};
use crate::features::window_features;
use crate::nn::{Network, Real};
use crate::Error;

const SAMPLES_PER_MS: u64 = SAMPLE_RATE_HZ as u64 / 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamConfig {
    pub hop_ms: u64,
    pub decision_threshold: f32,
    pub refractory_ms: u64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            hop_ms: 500,
            decision_threshold: 0.7,
            refractory_ms: 1000,
        }
    }
}

impl StreamConfig {
    pub fn validate(&self) -> Result<(), CommandError> {
        let bad = |m: &str| Err(CommandError::InvalidStreamConfig(m.to_string()));
        if self.hop_ms == 0 {
            return bad("hop_ms must be positive");
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold <= 1.0) {
            return bad("threshold must be in (0, 1]");
        }
        if self.refractory_ms < self.hop_ms {
            return bad("refractory_ms must be at least hop_ms");
        }
        Ok(())
    }
}

/// Sliding one-second window over a PCM stream.
///
/// A window is evaluated every `hop_ms` once it is completely filled; the
/// decision timestamp is the window's end time in stream milliseconds.
pub struct StreamDecoder<'a, F> {
    network: &'a Network<F>,
    table: &'a GestureTable,
    config: StreamConfig,
    /// Samples from `buffer_start` onwards.
    buffer: Vec<i16>,
    buffer_start: u64,
    next_window: u64,
    last_emit_ms: Option<u64>,
    evaluations: usize,
    last_evaluation: Option<(u64, GestureClass, f32)>,
}

impl<'a, F: Real> StreamDecoder<'a, F> {
    pub fn new(network: &'a Network<F>, table: &'a GestureTable, config: StreamConfig) -> Result<Self, CommandError> {
        config.validate()?;
        Ok(StreamDecoder {
            network,
            table,
            config,
            buffer: Vec::new(),
            buffer_start: 0,
            next_window: 0,
            last_emit_ms: None,
            evaluations: 0,
            last_evaluation: None,
        })
    }

    /// Windows evaluated so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// `(t_ms, class, prob)` of the most recent evaluation, emitted or not.
    pub fn last_evaluation(&self) -> Option<(u64, GestureClass, f32)> {
        self.last_evaluation
    }

    pub fn push(&mut self, pcm: &[i16]) -> Result<Vec<Decision>, Error> {
        self.buffer.extend_from_slice(pcm);
        let hop = self.config.hop_ms * SAMPLES_PER_MS;
        let mut out = Vec::new();
        while self.next_window + WINDOW_SAMPLES as u64 <= self.buffer_start + self.buffer.len() as u64 {
            let from = (self.next_window - self.buffer_start) as usize;
            let window = SampleWindow::from_pcm(&self.buffer[from..from + WINDOW_SAMPLES]);
            let t_ms = (self.next_window + WINDOW_SAMPLES as u64) / SAMPLES_PER_MS;
            if let Some(d) = self.evaluate(&window, t_ms)? {
                out.push(d);
            }
            self.next_window += hop;
        }
        let keep_from = self.next_window.min(self.buffer_start + self.buffer.len() as u64);
        let drop = (keep_from - self.buffer_start) as usize;
        self.buffer.drain(..drop);
        self.buffer_start = keep_from;
        Ok(out)
    }

    /// Ends the stream. A stream shorter than one window is evaluated once,
    /// zero-padded; otherwise the partial tail is discarded.
    pub fn finish(mut self) -> Result<Vec<Decision>, Error> {
        if self.evaluations > 0 || self.buffer.is_empty() {
            return Ok(Vec::new());
        }
        let window = SampleWindow::from_pcm(&self.buffer);
        let t_ms = (self.buffer_start + self.buffer.len() as u64) / SAMPLES_PER_MS;
        Ok(self.evaluate(&window, t_ms)?.into_iter().collect())
    }

    fn evaluate(&mut self, window: &SampleWindow, t_ms: u64) -> Result<Option<Decision>, Error> {
        let features = window_features(window.values())?;
        let probs = self.network.infer_one(&features.to_tensor())?;
        let best = argmax(&probs);
        let class = GestureClass::from_index(best).unwrap_or(GestureClass::Unknown);
        let prob = probs[best].f64() as f32;
        self.evaluations += 1;
        self.last_evaluation = Some((t_ms, class, prob));
        log::debug!("window ending {t_ms} ms: {class} ({prob:.3})");

        let refractory_ok = self
            .last_emit_ms
            .map_or(true, |last| t_ms - last >= self.config.refractory_ms);
        if prob < self.config.decision_threshold || class == GestureClass::Unknown || !refractory_ok {
            return Ok(None);
        }
        self.last_emit_ms = Some(t_ms);
        Ok(Some(Decision::new(t_ms, class, prob, self.table)?))
    }
}

/// Decodes a little-endian 16-bit mono PCM byte stream to completion.
pub fn stream_decode<F: Real, R: Read>(
    reader: R,
    network: &Network<F>,
    table: &GestureTable,
    config: StreamConfig,
) -> Result<Vec<Decision>, Error> {
    let mut decisions = Vec::new();
    stream_decode_with(reader, network, table, config, |d| {
        decisions.push(d);
        Ok(())
    })?;
    Ok(decisions)
}

/// Like [`stream_decode`] but hands each decision to `sink` as soon as it
/// is made.
pub fn stream_decode_with<F: Real, R: Read>(
    mut reader: R,
    network: &Network<F>,
    table: &GestureTable,
    config: StreamConfig,
    mut sink: impl FnMut(Decision) -> Result<(), Error>,
) -> Result<(), Error> {
    let mut decoder = StreamDecoder::new(network, table, config)?;
    let mut chunk = vec![0u8; 8192];
    let mut carry: Option<u8> = None;
    loop {
        let n = match reader.read(&mut chunk) {
            Ok(n) => n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(Error::io("reading PCM stream", e)),
        };
        if n == 0 {
            break;
        }
        let mut bytes = Vec::with_capacity(n + 1);
        bytes.extend(carry.take());
        bytes.extend_from_slice(&chunk[..n]);
        if bytes.len() % 2 == 1 {
            carry = bytes.pop();
        }
        let pcm: Vec<i16> = bytes.chunks_exact(2).map(|b| i16::from_le_bytes([b[0], b[1]])).collect();
        for d in decoder.push(&pcm)? {
            sink(d)?;
        }
    }
    for d in decoder.finish()? {
        sink(d)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Layer, NetworkSpec};

    fn biased(class: GestureClass, bias: f32) -> Network<f32> {
        let mut net = Network::<f32>::zeros(NetworkSpec::reference()).unwrap();
        if let Some(Layer::Dense(d)) = net.layers_mut().last_mut() {
            d.bias[class.index()] = bias;
        }
        net
    }

    #[test]
    fn window_count_for_two_and_a_half_seconds() {
        let net = biased(GestureClass::Unknown, 0.0);
        let table = GestureTable::default();
        let mut dec = StreamDecoder::new(&net, &table, StreamConfig::default()).unwrap();
        for chunk in vec![0i16; 40_000].chunks(777) {
            dec.push(chunk).unwrap();
        }
        assert_eq!(dec.evaluations(), 4);
        assert_eq!(dec.last_evaluation().unwrap().0, 2500);
    }

    #[test]
    fn refractory_spacing() {
        // Constant confident "two": windows end at 1000, 1500, 2000, ... ms.
        let net = biased(GestureClass::Two, 10.0);
        let table = GestureTable::default();
        let d = stream_decode(&vec![0u8; 2 * 16_000 * 4][..], &net, &table, StreamConfig::default()).unwrap();
        let times: Vec<u64> = d.iter().map(|d| d.t_ms).collect();
        assert_eq!(times, [1000, 2000, 3000, 4000]);
        assert!(d.iter().all(|d| d.class == GestureClass::Two && d.frames.len() == 5));
    }

    #[test]
    fn unknown_and_low_confidence_are_silent() {
        let table = GestureTable::default();
        let pcm = vec![0u8; 2 * 16_000 * 3];
        let unk = biased(GestureClass::Unknown, 10.0);
        assert!(stream_decode(&pcm[..], &unk, &table, StreamConfig::default()).unwrap().is_empty());
        let flat = biased(GestureClass::Two, 0.0);
        assert!(stream_decode(&pcm[..], &flat, &table, StreamConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn short_stream_is_padded_once() {
        let net = biased(GestureClass::On, 10.0);
        let table = GestureTable::default();
        let d = stream_decode(&vec![0u8; 2 * 8000][..], &net, &table, StreamConfig::default()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].t_ms, 500);
    }

    #[test]
    fn config_validation() {
        let mut c = StreamConfig::default();
        assert!(c.validate().is_ok());
        c.refractory_ms = 100;
        assert!(c.validate().is_err());
        c = StreamConfig { decision_threshold: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
