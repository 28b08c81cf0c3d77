use std::path::Path;
use std::process::Command;

use kws::audio::encode_wav;
use kws::checkpoint::{self, Metadata};
use kws::cli::{run_with, EXIT_CHECKPOINT, EXIT_DATA, EXIT_OK, EXIT_USAGE};
use kws::nn::{Layer, NetworkSpec};
use kws::{synth, GestureClass, Network};

fn run(args: &[&str]) -> (i32, String, String) {
    run_stdin(args, &[])
}

fn run_stdin(args: &[&str], stdin: &[u8]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(std::iter::once("kws").chain(args.iter().copied()), stdin, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// A network that always answers `class` with high confidence.
fn stub_checkpoint(path: &Path, class: GestureClass) {
    let mut net = Network::<f32>::zeros(NetworkSpec::reference()).unwrap();
    if let Some(Layer::Dense(d)) = net.layers_mut().last_mut() {
        d.bias[class.index()] = 8.0;
    }
    checkpoint::save(&net, &Metadata::default(), path).unwrap();
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn inspect_fresh_prints_reference_table() {
    let (code, out, _) = run(&["inspect", "--fresh"]);
    assert_eq!(code, EXIT_OK);
    let params: Vec<usize> = out
        .lines()
        .skip(2)
        .take(10)
        .map(|l| l.split_whitespace().last().unwrap().parse().unwrap())
        .collect();
    assert_eq!(params, [568, 0, 32, 8992, 0, 128, 0, 12352, 0, 585]);
    assert!(out.contains("120 x 65 x 8"));
    assert!(out.contains("2 x 3 x 32"));
    assert_eq!(out.lines().last(), Some("trainable: 22577"));
    // Pure function of the architecture.
    assert_eq!(run(&["inspect", "--fresh"]).1, out);
}

#[test]
fn features_exports_grid() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("tone.wav");
    std::fs::write(&wav, encode_wav(&synth::tone(1000.0, 0.3, 16_000))).unwrap();
    let csv = dir.path().join("tone.csv");
    let (code, _, _) = run(&["features", "--wav", p(&wav), "--out", p(&csv)]);
    assert_eq!(code, EXIT_OK);
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 129);
    assert!(rows.iter().all(|r| r.split(',').count() == 71));
    let v: f64 = rows[16].split(',').nth(30).unwrap().parse().unwrap();
    assert!(v > 0.0, "1 kHz sits in bin 16");
}

#[test]
fn eval_perfect_stub_on_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    std::fs::create_dir_all(root.join("off")).unwrap();
    let mut list = String::new();
    for i in 0..3 {
        let name = format!("off/{i:04}_nohash_0.wav");
        std::fs::write(root.join(&name), encode_wav(&synth::tone(700.0, 0.2, 12_000))).unwrap();
        list.push_str(&name);
        list.push('\n');
    }
    std::fs::write(root.join("validation_list.txt"), list).unwrap();
    std::fs::write(root.join("testing_list.txt"), "").unwrap();
    let ckpt = dir.path().join("stub.kws");
    stub_checkpoint(&ckpt, GestureClass::Off);

    let (code, out, err) = run(&["eval", "--checkpoint", p(&ckpt), "--data-dir", p(&root), "--split", "val", "--json"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(v["accuracy"], 1.0);
    assert_eq!(v["count"], 3);
    assert_eq!(v["confusion"][7][7], 3);

    let (code, out, _) = run(&["eval", "--checkpoint", p(&ckpt), "--data-dir", p(&root)]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("split val: accuracy 1.0000 (3/3)"));

    let (code, _, _) = run(&["eval", "--checkpoint", p(&ckpt), "--data-dir", p(&root), "--split", "test"]);
    assert_eq!(code, EXIT_DATA);
}

#[test]
fn recognize_outputs_one_decision() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("x.wav");
    std::fs::write(&wav, encode_wav(&vec![0; 16_000])).unwrap();

    let ckpt = dir.path().join("two.kws");
    stub_checkpoint(&ckpt, GestureClass::Two);
    let (code, out, _) = run(&["recognize", "--checkpoint", p(&ckpt), "--wav", p(&wav)]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(v["class"], "two");
    assert_eq!(v["trajectory"], serde_json::json!([1.0, 0.0, 0.0, 1.0, 1.0]));
    assert_eq!(v["frames"][0], serde_json::json!([48, 255, 255]));

    // Above any reachable confidence: reported, but no command.
    let (code, out, _) = run(&["recognize", "--checkpoint", p(&ckpt), "--wav", p(&wav), "--threshold", "1.0"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains(r#""trajectory":null,"frames":[]"#));

    // A custom gesture table changes the frames.
    let mut table = kws::GestureTable::default();
    table.max_fraction[1] = 0.5;
    table.max_fraction[0] = 0.5;
    let table_path = dir.path().join("table.json");
    std::fs::write(&table_path, table.to_json()).unwrap();
    let (_, out, _) = run(&["recognize", "--checkpoint", p(&ckpt), "--wav", p(&wav), "--gesture-table", p(&table_path)]);
    assert!(out.contains("[48,128,0]"), "{out}");
}

#[test]
fn stream_from_wav_and_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("on.kws");
    stub_checkpoint(&ckpt, GestureClass::On);
    let pcm = vec![0i16; 40_000];
    let wav = dir.path().join("s.wav");
    std::fs::write(&wav, encode_wav(&pcm)).unwrap();

    let (code, out, _) = run(&["stream", "--checkpoint", p(&ckpt), "--input", &format!("wav:{}", p(&wav))]);
    assert_eq!(code, EXIT_OK);
    let times: Vec<u64> = out
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["t_ms"].as_u64().unwrap())
        .collect();
    assert_eq!(times, [1000, 2000]);

    let bytes: Vec<u8> = pcm.iter().flat_map(|s| s.to_le_bytes()).collect();
    let (code, out2, _) = run_stdin(&["stream", "--checkpoint", p(&ckpt), "--input", "pcm-stdin"], &bytes);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, out2);

    let (code, out, _) = run_stdin(
        &["stream", "--checkpoint", p(&ckpt), "--input", "pcm-stdin", "--hop-ms", "250", "--refractory-ms", "250"],
        &bytes,
    );
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().count(), 7);

    let (code, _, _) = run(&["stream", "--checkpoint", p(&ckpt), "--input", "mic"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = run(&["stream", "--checkpoint", p(&ckpt), "--input", "pcm-stdin", "--refractory-ms", "10"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("ok.kws");
    stub_checkpoint(&ckpt, GestureClass::Two);

    let bad = dir.path().join("bad.kws");
    let mut bytes = std::fs::read(&ckpt).unwrap();
    bytes[0] = b'Z';
    std::fs::write(&bad, &bytes).unwrap();
    assert_eq!(run(&["inspect", "--checkpoint", p(&bad)]).0, EXIT_CHECKPOINT);

    let truncated = dir.path().join("short.kws");
    std::fs::write(&truncated, &std::fs::read(&ckpt).unwrap()[..1000]).unwrap();
    assert_eq!(run(&["inspect", "--checkpoint", p(&truncated)]).0, EXIT_CHECKPOINT);
    assert_eq!(run(&["inspect", "--checkpoint", p(&ckpt)]).0, EXIT_OK);

    let missing = dir.path().join("missing.wav");
    assert_eq!(run(&["recognize", "--checkpoint", p(&ckpt), "--wav", p(&missing)]).0, EXIT_DATA);
    let stereo = dir.path().join("junk.wav");
    std::fs::write(&stereo, b"RIFFjunk").unwrap();
    assert_eq!(run(&["recognize", "--checkpoint", p(&ckpt), "--wav", p(&stereo)]).0, EXIT_DATA);

    assert_eq!(run(&["eval", "--split", "val"]).0, EXIT_USAGE);
    assert_eq!(run(&["eval", "--checkpoint", p(&ckpt), "--split", "train"]).0, EXIT_USAGE);
    assert_eq!(run(&["inspect", "--fresh", "--checkpoint", p(&ckpt)]).0, EXIT_USAGE);
}

#[test]
fn binary_exit_codes_and_env_data_dir() {
    let exe = env!("CARGO_BIN_EXE_kws");
    let status = Command::new(exe).args(["inspect", "--fresh"]).output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_OK));
    assert!(String::from_utf8_lossy(&status.stdout).contains("trainable: 22577"));

    let status = Command::new(exe).arg("--bogus").output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_USAGE));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = Command::new(exe)
        .env_remove("KWS_DATA_DIR")
        .args(["train", "--out", p(&out)])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_USAGE));

    // The environment variable supplies the data directory.
    let data = dir.path().join("data");
    synth::write_dataset(&data, &[("on", 800.0), ("off", 5000.0)], 5, 3).unwrap();
    let status = Command::new(exe)
        .env("KWS_DATA_DIR", &data)
        .env("RUST_LOG", "warn")
        .args(["train", "--out", p(&out), "--epochs", "1", "--batch-size", "4"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(out.join("final.kws").exists());
}

#[test]
fn train_writes_reproducible_outputs_and_honors_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth::write_dataset(&data, &[("zero", 600.0), ("five", 4000.0), ("tree", 2000.0)], 10, 7).unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(&config, r#"{"epochs": 1, "batch-size": 8, "seed": 3}"#).unwrap();

    let train = |sub: &str, extra: &[&str]| {
        let out = dir.path().join(sub);
        let mut args = vec!["--config", p(&config), "train", "--data-dir", p(&data), "--out", p(&out), "--no-timing"];
        args.extend_from_slice(extra);
        let (code, stdout, err) = run(&args);
        assert_eq!(code, EXIT_OK, "{err}");
        let csv = std::fs::read_to_string(out.join("epochs.csv")).unwrap();
        (csv, stdout, out)
    };
    let (a, summary, out) = train("a", &["--epochs", "2"]);
    let (b, _, _) = train("b", &["--epochs", "2"]);
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "epoch,train_loss,train_acc,val_acc,seconds");
    assert_eq!(lines.len(), 3, "flag beats the file's epochs");
    assert!(lines[1].starts_with("1,") && lines[2].starts_with("2,"));
    assert!(lines.iter().skip(1).all(|l| l.ends_with(",0.000")));
    assert!(out.join("best.kws").exists() && out.join("final.kws").exists());
    let v: serde_json::Value = serde_json::from_str(summary.trim()).unwrap();
    assert_eq!(v["epochs"], 2);

    let (_, meta) = checkpoint::load(out.join("final.kws")).unwrap();
    assert_eq!(meta.epochs_completed, 2);
    assert_eq!(meta.seed, 3, "seed comes from the config file");

    let (c, _, _) = train("c", &[]);
    assert_eq!(c.lines().count(), 2, "file supplies epochs when the flag is absent");
}
