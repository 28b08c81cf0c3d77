//! The `kws` command line: train, eval, recognize, stream, inspect and
//! features. Exit codes: 0 success, 1 usage, 2 data, 3 checkpoint.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::audio::{index_dataset, read_wav, subsample_unknown, Split};
use crate::checkpoint;
use crate::command::{classify, stream_decode_with, CommandError, Decision, GestureClass, GestureTable, StreamDecoder};
use crate::config::{ConfigLayer, RunConfig};
use crate::features::compute_features;
use crate::nn::{Network, NetworkSpec};
use crate::train::{clips_for_split, evaluate, fit, TrainData};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_CHECKPOINT: i32 = 3;

/// Parameter counts per layer of the reference architecture.
pub const REFERENCE_PARAMS: [usize; 10] = [568, 0, 32, 8992, 0, 128, 0, 12352, 0, 585];
pub const REFERENCE_TRAINABLE: usize = 22_577;

#[derive(Debug, Parser)]
#[command(name = "kws", version, about = "Speech-command recognition for prosthetic hand control")]
struct Cli {
    /// JSON config file; keys use the flag names (e.g. "batch-size").
    #[arg(long, global = true, value_name = "P")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Train from a speech-commands directory.
    Train(TrainArgs),
    /// Accuracy and confusion matrix on a split.
    Eval(EvalArgs),
    /// Classify one WAV file and print its decision.
    Recognize(RecognizeArgs),
    /// Sliding-window decode of a WAV file or raw PCM on stdin.
    Stream(StreamArgs),
    /// Print the layer table with shapes and parameter counts.
    Inspect(InspectArgs),
    /// Export the 129x71 log spectrogram of a WAV file as CSV.
    Features(FeaturesArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_name = "P")]
    data_dir: Option<PathBuf>,
    #[arg(long, value_name = "P")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,
    #[arg(long, value_name = "N")]
    batch_size: Option<usize>,
    #[arg(long, value_name = "X")]
    lr: Option<f64>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Disable background-noise augmentation.
    #[arg(long)]
    no_augment: bool,
    /// Keep every unknown-word clip instead of subsampling.
    #[arg(long)]
    no_balance: bool,
    /// Write 0 in the CSV seconds column (byte-reproducible output).
    #[arg(long)]
    no_timing: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, value_name = "P")]
    checkpoint: PathBuf,
    #[arg(long, value_name = "P")]
    data_dir: Option<PathBuf>,
    #[arg(long, default_value = "val", value_parser = ["val", "test"])]
    split: String,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct RecognizeArgs {
    #[arg(long, value_name = "P")]
    checkpoint: PathBuf,
    #[arg(long, value_name = "P")]
    wav: PathBuf,
    #[arg(long, value_name = "P")]
    gesture_table: Option<PathBuf>,
    #[arg(long, value_name = "X")]
    threshold: Option<f32>,
}

#[derive(Debug, Args)]
struct StreamArgs {
    #[arg(long, value_name = "P")]
    checkpoint: PathBuf,
    /// `wav:PATH` or `pcm-stdin` (16-bit little-endian mono at 16 kHz).
    #[arg(long, value_name = "SRC")]
    input: String,
    #[arg(long, value_name = "N")]
    hop_ms: Option<u64>,
    #[arg(long, value_name = "X")]
    threshold: Option<f32>,
    #[arg(long, value_name = "N")]
    refractory_ms: Option<u64>,
    #[arg(long, value_name = "P")]
    gesture_table: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct InspectArgs {
    #[arg(long, value_name = "P")]
    checkpoint: Option<PathBuf>,
    /// Inspect a freshly initialized network.
    #[arg(long)]
    fresh: bool,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    #[arg(long, value_name = "P")]
    wav: PathBuf,
    #[arg(long, value_name = "P")]
    out: PathBuf,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Checkpoint(_) => EXIT_CHECKPOINT,
        Error::Config(_) | Error::Command(CommandError::InvalidStreamConfig(_)) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Runs the CLI against the process's standard streams.
pub fn run(args: impl IntoIterator<Item = impl Into<OsString> + Clone>) -> i32 {
    let stdin = std::io::stdin();
    run_with(args, stdin.lock(), &mut std::io::stdout(), &mut std::io::stderr())
}

/// Runs the CLI with explicit streams and returns the exit code.
pub fn run_with<R: Read, W: Write, E: Write>(
    args: impl IntoIterator<Item = impl Into<OsString> + Clone>,
    stdin: R,
    out: &mut W,
    err: &mut E,
) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli, stdin, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch<R: Read, W: Write>(cli: Cli, stdin: R, out: &mut W) -> Result<i32, Error> {
    let file = cli.config.as_deref().map(ConfigLayer::from_file).transpose()?;
    let resolve = |flags: ConfigLayer| RunConfig::resolve(flags, file.clone(), ConfigLayer::from_env());
    match cli.command {
        Cmd::Train(a) => {
            let cfg = resolve(ConfigLayer {
                data_dir: a.data_dir,
                out: a.out,
                epochs: a.epochs,
                batch_size: a.batch_size,
                lr: a.lr,
                seed: a.seed,
                no_augment: a.no_augment.then_some(true),
                no_balance: a.no_balance.then_some(true),
                no_timing: a.no_timing.then_some(true),
                ..Default::default()
            });
            cmd_train(&cfg, out)
        }
        Cmd::Eval(a) => {
            let cfg = resolve(ConfigLayer {
                data_dir: a.data_dir,
                seed: a.seed,
                ..Default::default()
            });
            let split = a.split.parse::<Split>().map_err(Error::Config)?;
            cmd_eval(&cfg, &a.checkpoint, split, a.json, out)
        }
        Cmd::Recognize(a) => {
            let cfg = resolve(ConfigLayer {
                threshold: a.threshold,
                gesture_table: a.gesture_table,
                ..Default::default()
            });
            cmd_recognize(&cfg, &a.checkpoint, &a.wav, out)
        }
        Cmd::Stream(a) => {
            let cfg = resolve(ConfigLayer {
                threshold: a.threshold,
                hop_ms: a.hop_ms,
                refractory_ms: a.refractory_ms,
                gesture_table: a.gesture_table,
                ..Default::default()
            });
            cmd_stream(&cfg, &a.checkpoint, &a.input, stdin, out)
        }
        Cmd::Inspect(a) => {
            let network = match a.checkpoint {
                Some(p) => checkpoint::load(p)?.0,
                None => Network::reference(resolve(ConfigLayer::default()).seed),
            };
            let (table, ok) = inspect_table(&network);
            write!(out, "{table}").map_err(|e| Error::io("writing output", e))?;
            Ok(if ok { EXIT_OK } else { EXIT_DATA })
        }
        Cmd::Features(a) => {
            let clip = read_wav(&a.wav)?;
            let csv = compute_features(&clip)?.to_csv();
            std::fs::write(&a.out, csv).map_err(|e| Error::io(format!("writing {}", a.out.display()), e))?;
            writeln!(out, "wrote 129x71 spectrogram to {}", a.out.display()).map_err(|e| Error::io("writing output", e))?;
            Ok(EXIT_OK)
        }
    }
}

fn emit<W: Write>(out: &mut W, line: &str) -> Result<(), Error> {
    writeln!(out, "{line}").map_err(|e| Error::io("writing output", e))
}

fn require<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, Error> {
    value
        .as_deref()
        .ok_or_else(|| Error::Config(format!("--{flag} is required")))
}

fn gesture_table(cfg: &RunConfig) -> Result<GestureTable, Error> {
    Ok(match &cfg.gesture_table {
        Some(p) => GestureTable::load(p)?,
        None => GestureTable::default(),
    })
}

fn cmd_train<W: Write>(cfg: &RunConfig, out: &mut W) -> Result<i32, Error> {
    let root = require(&cfg.data_dir, "data-dir")?;
    require(&cfg.out, "out")?;
    let config = cfg.train_config();
    config.validate()?;
    let index = index_dataset(root, &GestureClass::KNOWN)?;
    let data = TrainData::from_index(&index, &config)?;
    let mut network = Network::reference(config.seed);
    let reports = fit(&mut network, &data, &config)?;
    let last = reports.last().expect("at least one epoch");
    let best = reports.iter().filter_map(|r| r.val_acc).fold(None, |b: Option<f64>, v| Some(b.map_or(v, |b| b.max(v))));
    emit(
        out,
        &serde_json::json!({
            "epochs": last.epoch,
            "train_loss": last.train_loss,
            "train_acc": last.train_acc,
            "val_acc": last.val_acc,
            "val_acc_raw": last.val_acc_raw,
            "best_val_acc": best,
            "out": config.out_dir,
        })
        .to_string(),
    )?;
    Ok(EXIT_OK)
}

fn cmd_eval<W: Write>(cfg: &RunConfig, ckpt: &Path, split: Split, json: bool, out: &mut W) -> Result<i32, Error> {
    let (network, _) = checkpoint::load(ckpt)?;
    let root = require(&cfg.data_dir, "data-dir")?;
    let index = index_dataset(root, &GestureClass::KNOWN)?;
    let raw = evaluate(&network, &clips_for_split(&index, split))?;
    let balanced_index = subsample_unknown(&index, cfg.seed);
    let balanced = if balanced_index.count(split) != index.count(split) {
        Some(evaluate(&network, &clips_for_split(&balanced_index, split))?)
    } else {
        None
    };
    let names = &network.spec().class_names;
    if json {
        let mut v = raw.to_json(names);
        v["split"] = split.name().into();
        v["balanced"] = match &balanced {
            Some(b) => serde_json::json!({"count": b.count, "accuracy": b.accuracy}),
            None => serde_json::Value::Null,
        };
        emit(out, &v.to_string())?;
    } else {
        emit(out, &format!("split {}: accuracy {:.4} ({}/{})", split.name(), raw.accuracy, raw.correct, raw.count))?;
        if let Some(b) = &balanced {
            emit(out, &format!("balanced unknown: accuracy {:.4} over {} clips", b.accuracy, b.count))?;
        }
        let mut header = format!("{:>8}", "");
        for n in names {
            header.push_str(&format!("{n:>8}"));
        }
        emit(out, &header)?;
        for (n, row) in names.iter().zip(&raw.confusion) {
            let mut line = format!("{n:>8}");
            for c in row {
                line.push_str(&format!("{c:>8}"));
            }
            emit(out, &line)?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_recognize<W: Write>(cfg: &RunConfig, ckpt: &Path, wav: &Path, out: &mut W) -> Result<i32, Error> {
    let (network, _) = checkpoint::load(ckpt)?;
    let table = gesture_table(cfg)?;
    let features = compute_features(&read_wav(wav)?)?;
    let (class, probs) = classify(&network, &features)?;
    let prob = probs[class.index()];
    let t_ms = 1000;
    let decision = if prob >= cfg.threshold && class != GestureClass::Unknown {
        Decision::new(t_ms, class, prob, &table)?
    } else {
        if class != GestureClass::Unknown {
            log::info!("{class} at {prob:.3} is below the threshold {}", cfg.threshold);
        }
        Decision::no_command(t_ms, class, prob)
    };
    emit(out, &decision.to_json())?;
    Ok(EXIT_OK)
}

fn cmd_stream<R: Read, W: Write>(cfg: &RunConfig, ckpt: &Path, input: &str, stdin: R, out: &mut W) -> Result<i32, Error> {
    let stream = cfg.stream_config();
    stream.validate()?;
    let (network, _) = checkpoint::load(ckpt)?;
    let table = gesture_table(cfg)?;
    let mut sink = |d: Decision| emit(out, &d.to_json());
    if input == "pcm-stdin" {
        stream_decode_with(stdin, &network, &table, stream, &mut sink)?;
    } else if let Some(path) = input.strip_prefix("wav:") {
        let clip = read_wav(path)?;
        let mut decoder = StreamDecoder::new(&network, &table, stream)?;
        for d in decoder.push(clip.samples())? {
            sink(d)?;
        }
        for d in decoder.finish()? {
            sink(d)?;
        }
    } else {
        return Err(Error::Config(format!("--input must be wav:PATH or pcm-stdin, got `{input}`")));
    }
    Ok(EXIT_OK)
}

/// Renders the layer table and reports whether the parameter counts match
/// the reference architecture.
pub fn inspect_table(network: &Network<f32>) -> (String, bool) {
    let spec = network.spec();
    let params = network.count_params();
    let mut s = format!("{:<10} {:<20} {:<14} {:>10}\n", "layer", "type", "output shape", "params");
    s.push_str(&format!("{:<10} {:<20} {:<14} {:>10}\n", "input", "Log spectrogram", spec.input.to_string(), "-"));
    for (((name, layer), shape), p) in spec
        .layer_names()
        .iter()
        .zip(&spec.layers)
        .zip(network.output_shapes())
        .zip(&params.per_layer)
    {
        s.push_str(&format!("{:<10} {:<20} {:<14} {:>10}\n", name, layer.kind(), shape.to_string(), p));
    }
    s.push_str(&format!("total: {}\n", params.total()));
    s.push_str(&format!("non-trainable: {}\n", params.non_trainable));
    s.push_str(&format!("trainable: {}\n", params.trainable));
    let ok = *spec == NetworkSpec::reference() && params.per_layer == REFERENCE_PARAMS && params.trainable == REFERENCE_TRAINABLE;
    if !ok {
        s.push_str("parameter counts differ from the reference architecture\n");
    }
    (s, ok)
}
