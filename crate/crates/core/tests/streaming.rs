//! Streaming and recognition against a model trained on the tone task,
//! with silence, noise and short tone fragments as the unknown class.

use std::sync::OnceLock;

use kws::audio::{encode_wav, SampleWindow};
use kws::checkpoint::{self, Metadata};
use kws::cli::run_with;
use kws::command::{stream_decode, StreamConfig, StreamDecoder};
use kws::train::{self, LabeledClip, TrainConfig};
use kws::{synth, GestureClass, GestureTable, Network};
use rand::{Rng, SeedableRng};

fn unknown_clips(n: usize, seed: u64) -> Vec<LabeledClip> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut samples = synth::white_noise(16_000, rng.gen_range(0.0001..0.05), seed + i as u64);
            if i % 3 == 2 {
                // A fragment too short to count as a word.
                let freq = [500.0, 2000.0, 6000.0][i % 9 / 3];
                let len = rng.gen_range(400..2400);
                let start = rng.gen_range(0..16_000 - len);
                for (k, s) in synth::tone(freq, 0.4, len).iter().enumerate() {
                    samples[start + k] += f32::from(*s) / 32768.0;
                }
            }
            if i % 5 == 0 {
                samples.iter_mut().for_each(|s| *s = 0.0);
            }
            LabeledClip::pcm(SampleWindow::from_samples(&samples).to_pcm(), GestureClass::Unknown)
        })
        .collect()
}

fn model() -> &'static Network<f32> {
    static MODEL: OnceLock<Network<f32>> = OnceLock::new();
    MODEL.get_or_init(|| {
        let mut data = synth::tone_dataset(80, 21);
        data.train.extend(unknown_clips(90, 1000));
        data.val.extend(unknown_clips(20, 5000));
        let config = TrainConfig {
            epochs: 12,
            batch_size: 16,
            record_timing: false,
            ..Default::default()
        };
        let mut net = Network::reference(config.seed);
        train::fit(&mut net, &data, &config).unwrap();
        let e = train::evaluate(&net, &data.val).unwrap();
        assert!(e.accuracy >= 0.9, "tone model val accuracy {}", e.accuracy);
        net
    })
}

fn bytes(pcm: &[i16]) -> Vec<u8> {
    pcm.iter().flat_map(|s| s.to_le_bytes()).collect()
}

#[test]
fn silence_yields_no_decisions() {
    let d = stream_decode(&bytes(&vec![0; 48_000])[..], model(), &GestureTable::default(), StreamConfig::default()).unwrap();
    assert!(d.is_empty(), "{d:?}");
}

#[test]
fn embedded_word_yields_one_decision() {
    let mut pcm = vec![0i16; 64_000];
    let burst = synth::tone(6000.0, 0.5, 9_600);
    pcm[16_000..16_000 + burst.len()].copy_from_slice(&burst);
    let d = stream_decode(&bytes(&pcm)[..], model(), &GestureTable::default(), StreamConfig::default()).unwrap();
    let in_range: Vec<_> = d.iter().filter(|d| (1000..=3000).contains(&d.t_ms)).collect();
    assert_eq!(in_range.len(), 1, "{d:?}");
    assert_eq!(in_range[0].class, GestureClass::Two);
    assert_eq!(in_range[0].trajectory.unwrap().to_array(), [1.0, 0.0, 0.0, 1.0, 1.0]);
    assert_eq!(d.len(), 1);
}

#[test]
fn decisions_respect_threshold_and_refractory() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    let mut pcm = vec![0i16; 16_000 * 8];
    for k in 0..6 {
        let freq = [500.0, 2000.0, 6000.0][rng.gen_range(0..3)];
        let burst = synth::tone(freq, 0.4, rng.gen_range(7000..11000));
        let at = k * 20_000 + rng.gen_range(0..4000);
        pcm[at..at + burst.len()].copy_from_slice(&burst);
    }
    let config = StreamConfig {
        hop_ms: 250,
        ..Default::default()
    };
    let table = GestureTable::default();
    let mut dec = StreamDecoder::new(model(), &table, config).unwrap();
    let mut out = Vec::new();
    for chunk in pcm.chunks(1234) {
        out.extend(dec.push(chunk).unwrap());
    }
    assert!(!out.is_empty());
    for w in out.windows(2) {
        assert!(w[1].t_ms - w[0].t_ms >= 1000);
    }
    for d in &out {
        assert!(d.prob >= 0.7 && d.class != GestureClass::Unknown);
        assert!(d.frames.iter().all(|f| f.bytes()[0] >> 4 == 0x3 && f.channel() < 8));
    }
    assert_eq!(dec.evaluations(), (pcm.len() - 16_000) / 4000 + 1);
}

#[test]
fn recognize_silence_is_not_a_command() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("tones.kws");
    checkpoint::save(model(), &Metadata::default(), &ckpt).unwrap();
    let wav = dir.path().join("silence.wav");
    std::fs::write(&wav, encode_wav(&vec![0; 16_000])).unwrap();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let args = ["kws", "recognize", "--checkpoint", ckpt.to_str().unwrap(), "--wav", wav.to_str().unwrap(), "--threshold", "0.7"];
    let code = run_with(args, &[][..], &mut out, &mut err);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
    let below = v["prob"].as_f64().unwrap() < 0.7;
    assert!(v["class"] == "unknown" || below, "{v}");
    assert_eq!(v["frames"], serde_json::json!([]));
}

#[test]
fn held_out_tones_are_recognized() {
    // The tone analogue of "held-out 'on' clips recognized >= 85%".
    let data = synth::tone_dataset(40, 999);
    let clips: Vec<_> = data.val.iter().chain(&data.train).filter(|c| c.label == GestureClass::One).cloned().collect();
    let e = train::evaluate(model(), &clips).unwrap();
    assert!(e.accuracy >= 0.85, "{}", e.accuracy);
}
