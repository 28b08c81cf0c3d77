//! Synthetic audio for tests, examples and the desk-scale acceptance runs:
//! tones, white noise and small speech-commands style directory trees.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::audio::{encode_wav, mix_noise, NoisePool, SampleWindow, PCM_SCALE, WINDOW_SAMPLES};
use crate::command::GestureClass;
use crate::rng::rng_from;
use crate::train::{LabeledClip, TrainData};
use crate::Error;

/// Class and frequency of the three-tone separability task.
pub const TONE_CLASSES: [(GestureClass, f64); 3] = [
    (GestureClass::Zero, 500.0),
    (GestureClass::One, 2000.0),
    (GestureClass::Two, 6000.0),
];

fn to_pcm(v: f64) -> i16 {
    (v * f64::from(PCM_SCALE)).round().clamp(-32768.0, 32767.0) as i16
}

/// `amplitude · sin(2π f n / 16000)` as PCM.
pub fn tone(freq_hz: f64, amplitude: f64, len: usize) -> Vec<i16> {
    (0..len)
        .map(|n| to_pcm(amplitude * (TAU * freq_hz * n as f64 / 16_000.0).sin()))
        .collect()
}

pub fn white_noise(len: usize, amplitude: f32, seed: u64) -> Vec<f32> {
    let mut rng = rng_from(seed);
    (0..len).map(|_| rng.gen_range(-amplitude..amplitude)).collect()
}

/// `clips` two-second white-noise recordings.
pub fn noise_pool(clips: usize, seed: u64) -> NoisePool {
    let clips = (0..clips)
        .map(|i| white_noise(2 * WINDOW_SAMPLES, 0.5, seed.wrapping_add(i as u64)))
        .collect();
    NoisePool::new(clips).expect("clips are two seconds long")
}

/// A tone burst with random amplitude, phase, onset and length, plus a
/// little background noise.
pub fn tone_clip(freq_hz: f64, seed: u64, pool: &NoisePool) -> Vec<i16> {
    let mut rng = rng_from(seed);
    let amp = rng.gen_range(0.2..0.8);
    let phase = rng.gen_range(0.0..TAU);
    let onset = rng.gen_range(0..4000);
    let len = rng.gen_range(8000..12000);
    let fade = 160.0;
    let mut samples = vec![0.0f32; WINDOW_SAMPLES];
    for n in 0..len {
        let edge = (n as f64 / fade).min((len - n) as f64 / fade).min(1.0);
        samples[onset + n] = (edge * amp * (TAU * freq_hz * n as f64 / 16_000.0 + phase).sin()) as f32;
    }
    let gain = rng.gen_range(0.0..0.1);
    let window = mix_noise(&SampleWindow::from_samples(&samples), pool, gain, rng.gen()).expect("pool is not empty");
    window.to_pcm()
}

/// The three-class tone task: `per_class` clips per tone, every fifth one
/// held out for validation.
pub fn tone_dataset(per_class: usize, seed: u64) -> TrainData {
    let noise = noise_pool(4, seed ^ 0x5eed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (c, (class, freq)) in TONE_CLASSES.iter().enumerate() {
        for i in 0..per_class {
            let s = seed.wrapping_mul(1_000_003).wrapping_add((c * per_class + i) as u64);
            let clip = LabeledClip::pcm(tone_clip(*freq, s, &noise), *class);
            if i % 5 == 4 {
                val.push(clip);
            } else {
                train.push(clip);
            }
        }
    }
    TrainData {
        train,
        val,
        val_raw: None,
        noise,
    }
}

/// Writes a speech-commands style tree: one folder per `(word, freq)` with
/// `per_word` tone clips, a noise folder and the two split lists. Clip `i`
/// goes to validation when `i % 5 == 3` and to test when `i % 5 == 4`.
pub fn write_dataset(root: &Path, words: &[(&str, f64)], per_word: usize, seed: u64) -> Result<(), Error> {
    let io = |p: &Path| {
        let p = p.display().to_string();
        move |e| Error::io(format!("writing {p}"), e)
    };
    let noise = noise_pool(1, seed);
    let (mut val, mut test) = (String::new(), String::new());
    for (w, (word, freq)) in words.iter().enumerate() {
        let dir = root.join(word);
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        for i in 0..per_word {
            let name = format!("{word}/{:08x}_nohash_{i}.wav", seed.wrapping_add(w as u64));
            let pcm = tone_clip(*freq, seed.wrapping_add((w * per_word + i) as u64), &noise);
            let path = root.join(&name);
            fs::write(&path, encode_wav(&pcm)).map_err(io(&path))?;
            match i % 5 {
                3 => val.push_str(&format!("{name}\n")),
                4 => test.push_str(&format!("{name}\n")),
                _ => {}
            }
        }
    }
    let noise_dir = root.join("_background_noise_");
    fs::create_dir_all(&noise_dir).map_err(io(&noise_dir))?;
    let pcm: Vec<i16> = white_noise(2 * WINDOW_SAMPLES, 0.3, seed)
        .iter()
        .map(|&v| to_pcm(f64::from(v)))
        .collect();
    let path = noise_dir.join("white_noise.wav");
    fs::write(&path, encode_wav(&pcm)).map_err(io(&path))?;
    for (file, text) in [("validation_list.txt", val), ("testing_list.txt", test)] {
        let path = root.join(file);
        fs::write(&path, text).map_err(io(&path))?;
    }
    Ok(())
}
