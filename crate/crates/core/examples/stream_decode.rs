//! Sliding-window decode over a synthetic stream: silence, a tone burst,
//! silence. Uses a checkpoint if one is given, otherwise trains a quick
//! tone model first.
//!
//!     cargo run --release --example stream_decode -- [checkpoint.kws]

use kws::command::{stream_decode, StreamConfig};
use kws::train::{fit, TrainConfig};
use kws::{checkpoint, synth, GestureTable, Network};

fn main() -> kws::Result<()> {
    let net = match std::env::args().nth(1) {
        Some(path) => checkpoint::load(path)?.0,
        None => {
            eprintln!("no checkpoint given, training a small tone model");
            let data = synth::tone_dataset(60, 11);
            let config = TrainConfig {
                epochs: 8,
                batch_size: 16,
                ..Default::default()
            };
            let mut net = Network::reference(config.seed);
            fit(&mut net, &data, &config)?;
            net
        }
    };

    // 4 s stream with a 6 kHz burst ("two" in the tone task) at 1.0-1.6 s.
    let mut pcm = vec![0i16; 64_000];
    let burst = synth::tone(6000.0, 0.5, 9_600);
    pcm[16_000..16_000 + burst.len()].copy_from_slice(&burst);
    let bytes: Vec<u8> = pcm.iter().flat_map(|s| s.to_le_bytes()).collect();

    let decisions = stream_decode(&bytes[..], &net, &GestureTable::default(), StreamConfig::default())?;
    println!("{} decision(s)", decisions.len());
    for d in decisions {
        println!("{}", d.to_json());
    }
    Ok(())
}
