use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use super::AudioError;
use crate::command::GestureClass;
use crate::rng::{stream_rng, Stream};

const NOISE_DIR: &str = "_background_noise_";
const VALIDATION_LIST: &str = "validation_list.txt";
const TESTING_LIST: &str = "testing_list.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "validation" => Ok(Split::Val),
            "test" | "testing" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// One labeled utterance. `path` is relative to the dataset root, with
/// forward slashes, as it appears in the split lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub path: String,
    pub label: GestureClass,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub entries: Vec<DatasetEntry>,
    pub noise_files: Vec<PathBuf>,
}

impl DatasetIndex {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &DatasetEntry> + '_ {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }

    /// Per-class counts for one split, indexed by class index.
    pub fn class_counts(&self, split: Split) -> [usize; GestureClass::COUNT] {
        let mut counts = [0; GestureClass::COUNT];
        for e in self.split(split) {
            counts[e.label.index()] += 1;
        }
        counts
    }

    pub fn absolute(&self, entry: &DatasetEntry) -> PathBuf {
        self.root.join(&entry.path)
    }
}

fn io_err(context: String) -> impl FnOnce(std::io::Error) -> AudioError {
    move |source| AudioError::Io { context, source }
}

fn read_list(path: &Path) -> Result<HashSet<String>, AudioError> {
    let text = fs::read_to_string(path).map_err(io_err(format!("reading {}", path.display())))?;
    Ok(text
        .lines()
        .map(|l| l.trim().replace('\\', "/"))
        .filter(|l| !l.is_empty())
        .collect())
}

fn sorted_dir(path: &Path) -> Result<Vec<fs::DirEntry>, AudioError> {
    let mut entries = fs::read_dir(path)
        .map_err(io_err(format!("listing {}", path.display())))?
        .collect::<Result<Vec<_>, _>>()
        .map_err(io_err(format!("listing {}", path.display())))?;
    entries.sort_by_key(|e| e.file_name());
    Ok(entries)
}

fn is_wav(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

/// Walks a speech-commands style directory.
///
/// Word folders listed in `known_words` keep their label; every other word
/// folder is labeled Unknown. Split membership comes from the two list files;
/// anything not listed is training data.
pub fn index_dataset(root: impl AsRef<Path>, known_words: &[GestureClass]) -> Result<DatasetIndex, AudioError> {
    let root = root.as_ref();
    let val_path = root.join(VALIDATION_LIST);
    let test_path = root.join(TESTING_LIST);
    for p in [&val_path, &test_path] {
        if !p.is_file() {
            return Err(AudioError::MissingSplitLists(p.display().to_string()));
        }
    }
    let val = read_list(&val_path)?;
    let test = read_list(&test_path)?;

    let mut entries = Vec::new();
    let mut noise_files = Vec::new();
    for dir in sorted_dir(root)? {
        let dir_path = dir.path();
        if !dir_path.is_dir() {
            continue;
        }
        let word = dir.file_name().to_string_lossy().into_owned();
        if word.starts_with('.') {
            continue;
        }
        let files = sorted_dir(&dir_path)?;
        if word == NOISE_DIR {
            noise_files.extend(files.iter().map(|f| f.path()).filter(|p| is_wav(p)));
            continue;
        }
        let label = GestureClass::from_name(&word)
            .filter(|c| known_words.contains(c) && *c != GestureClass::Unknown)
            .unwrap_or(GestureClass::Unknown);
        for f in files {
            let p = f.path();
            if !p.is_file() || !is_wav(&p) {
                continue;
            }
            let rel = format!("{}/{}", word, f.file_name().to_string_lossy());
            let split = if val.contains(&rel) {
                Split::Val
            } else if test.contains(&rel) {
                Split::Test
            } else {
                Split::Train
            };
            entries.push(DatasetEntry { path: rel, label, split });
        }
    }
    if entries.is_empty() {
        return Err(AudioError::EmptyDataset(root.display().to_string()));
    }
    Ok(DatasetIndex {
        root: root.to_path_buf(),
        entries,
        noise_files,
    })
}

/// Caps each split's Unknown entries at the mean count of the eight known
/// words in that split. Retained entries keep their original order.
pub fn subsample_unknown(index: &DatasetIndex, seed: u64) -> DatasetIndex {
    let mut keep = vec![true; index.entries.len()];
    for (si, split) in Split::ALL.into_iter().enumerate() {
        let counts = index.class_counts(split);
        let known: usize = GestureClass::KNOWN.iter().map(|c| counts[c.index()]).sum();
        let cap = known / GestureClass::KNOWN.len();
        let unknown: Vec<usize> = index
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.split == split && e.label == GestureClass::Unknown)
            .map(|(i, _)| i)
            .collect();
        if unknown.len() <= cap {
            continue;
        }
        let mut order = unknown.clone();
        order.shuffle(&mut stream_rng(seed, Stream::Subsample, &[si as u64]));
        for &i in &order[cap..] {
            keep[i] = false;
        }
    }
    DatasetIndex {
        root: index.root.clone(),
        entries: index
            .entries
            .iter()
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(e, _)| e.clone())
            .collect(),
        noise_files: index.noise_files.clone(),
    }
}
