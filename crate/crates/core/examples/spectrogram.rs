//! Log spectrogram of a tone, optionally written as CSV.
//!
//!     cargo run --example spectrogram -- [freq_hz] [out.csv]

use kws::features::compute_features;
use kws::{synth, AudioClip};

fn main() -> kws::Result<()> {
    let mut args = std::env::args().skip(1);
    let freq: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(2000.0);
    let clip = AudioClip::new(synth::tone(freq, 0.5, 16_000));
    let spec = compute_features(&clip)?;
    let (bins, frames) = spec.shape();
    println!("{bins} bins x {frames} frames");

    // Strongest bin of the middle frame; bin k is k * 62.5 Hz.
    let mid = spec.grid().frame(frames / 2);
    let (k, v) = mid
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty frame");
    println!("{freq} Hz tone: peak at bin {k} ({} Hz), log power {v:.2}", k as f64 * 62.5);

    if let Some(path) = args.next() {
        std::fs::write(&path, spec.to_csv()).map_err(|e| kws::Error::io(path.clone(), e))?;
        println!("wrote {path}");
    }
    Ok(())
}
