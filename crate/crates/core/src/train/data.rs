use std::path::PathBuf;

use crate::audio::{read_wav, DatasetIndex, SampleWindow, Split};
use crate::command::GestureClass;
use crate::Error;

/// Where a clip's samples come from. File-backed clips are read on demand
/// so a full dataset never has to sit in memory.
#[derive(Debug, Clone, PartialEq)]
pub enum ClipSource {
    Pcm(Vec<i16>),
    Samples(SampleWindow),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledClip {
    pub source: ClipSource,
    pub label: GestureClass,
}

impl LabeledClip {
    pub fn pcm(samples: Vec<i16>, label: GestureClass) -> Self {
        LabeledClip {
            source: ClipSource::Pcm(samples),
            label,
        }
    }

    pub fn window(&self) -> Result<SampleWindow, Error> {
        Ok(match &self.source {
            ClipSource::Pcm(s) => SampleWindow::from_pcm(s),
            ClipSource::Samples(w) => w.clone(),
            ClipSource::File(p) => read_wav(p)?.to_window(),
        })
    }
}

/// File-backed clips for one split, in index order.
pub fn clips_for_split(index: &DatasetIndex, split: Split) -> Vec<LabeledClip> {
    index
        .split(split)
        .map(|e| LabeledClip {
            source: ClipSource::File(index.absolute(e)),
            label: e.label,
        })
        .collect()
}
