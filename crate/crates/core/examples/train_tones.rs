//! Train on the synthetic three-tone task and save a checkpoint.
//!
//!     cargo run --release --example train_tones -- [epochs] [out_dir]

use kws::train::{fit, TrainConfig};
use kws::{synth, Network};

fn main() -> kws::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let epochs = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);
    let out = args.next().unwrap_or_else(|| "tones-run".into());

    let data = synth::tone_dataset(100, 3);
    let config = TrainConfig {
        epochs,
        batch_size: 32,
        out_dir: Some(out.clone().into()),
        ..Default::default()
    };
    let mut net = Network::reference(config.seed);
    let reports = fit(&mut net, &data, &config)?;
    let last = reports.last().expect("at least one epoch");
    println!(
        "after {} epochs: train acc {:.3}, val acc {:.3}; checkpoints and epochs.csv in {out}/",
        last.epoch,
        last.train_acc,
        last.val_acc.unwrap_or(f64::NAN)
    );
    Ok(())
}
