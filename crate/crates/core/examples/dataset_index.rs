//! Index a speech-commands style directory and show split/class counts
//! before and after unknown balancing. Without an argument a small
//! synthetic tree is generated in a temporary directory.
//!
//!     cargo run --example dataset_index -- [dataset_root]

use kws::audio::{index_dataset, subsample_unknown, DatasetIndex, Split};
use kws::{synth, GestureClass};

fn show(label: &str, index: &DatasetIndex) {
    println!("{label}");
    for split in Split::ALL {
        let counts = index.class_counts(split);
        let cells: Vec<String> = GestureClass::ALL
            .iter()
            .map(|c| format!("{}={}", c.name(), counts[c.index()]))
            .collect();
        println!("  {:<5} {:>6}  {}", split.name(), index.count(split), cells.join(" "));
    }
}

fn main() -> kws::Result<()> {
    let mut tmp = None;
    let root = match std::env::args().nth(1) {
        Some(r) => std::path::PathBuf::from(r),
        None => {
            let dir = std::env::temp_dir().join(format!("kws-dataset-{}", std::process::id()));
            let words: Vec<(&str, f64)> = vec![
                ("zero", 500.0),
                ("one", 900.0),
                ("two", 1300.0),
                ("bed", 3000.0),
                ("cat", 3500.0),
                ("dog", 4000.0),
            ];
            synth::write_dataset(&dir, &words, 10, 1)?;
            tmp = Some(dir.clone());
            dir
        }
    };
    let index = index_dataset(&root, &GestureClass::KNOWN)?;
    println!("{} labeled files, {} noise files", index.entries.len(), index.noise_files.len());
    show("as indexed:", &index);
    show("unknown balanced:", &subsample_unknown(&index, 17));
    if let Some(dir) = tmp {
        let _ = std::fs::remove_dir_all(dir);
    }
    Ok(())
}
