use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dac::DAC_CHANNELS;
use super::CommandError;

/// The nine output classes in network order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GestureClass {
    Zero,
    One,
    Two,
    Three,
    Four,
    Five,
    On,
    Off,
    Unknown,
}

impl GestureClass {
    pub const COUNT: usize = 9;

    pub const ALL: [GestureClass; 9] = [
        GestureClass::Zero,
        GestureClass::One,
        GestureClass::Two,
        GestureClass::Three,
        GestureClass::Four,
        GestureClass::Five,
        GestureClass::On,
        GestureClass::Off,
        GestureClass::Unknown,
    ];

    /// The eight vocabulary words (everything except Unknown).
    pub const KNOWN: [GestureClass; 8] = [
        GestureClass::Zero,
        GestureClass::One,
        GestureClass::Two,
        GestureClass::Three,
        GestureClass::Four,
        GestureClass::Five,
        GestureClass::On,
        GestureClass::Off,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            GestureClass::Zero => "zero",
            GestureClass::One => "one",
            GestureClass::Two => "two",
            GestureClass::Three => "three",
            GestureClass::Four => "four",
            GestureClass::Five => "five",
            GestureClass::On => "on",
            GestureClass::Off => "off",
            GestureClass::Unknown => "unknown",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl std::fmt::Display for GestureClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-finger contraction, 0 = fully relaxed, 1 = fully contracted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerTrajectory {
    pub thumb: f64,
    pub index: f64,
    pub middle: f64,
    pub ring: f64,
    pub little: f64,
}

impl FingerTrajectory {
    /// Thumb → little order.
    pub fn from_array(v: [f64; 5]) -> Result<Self, CommandError> {
        if let Some(bad) = v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(CommandError::InvalidTable(format!("finger value {bad} outside [0, 1]")));
        }
        Ok(FingerTrajectory {
            thumb: v[0],
            index: v[1],
            middle: v[2],
            ring: v[3],
            little: v[4],
        })
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.thumb, self.index, self.middle, self.ring, self.little]
    }

    const fn of(v: [f64; 5]) -> Self {
        FingerTrajectory {
            thumb: v[0],
            index: v[1],
            middle: v[2],
            ring: v[3],
            little: v[4],
        }
    }
}

/// Thumb, index, middle, ring, little → DAC channels 0-4.
pub const DEFAULT_CHANNEL_MAP: [u8; 5] = [0, 1, 2, 3, 4];

/// Word → trajectory lookup plus the per-channel output scaling.
///
/// Unknown has no row: it produces no command and the hand holds its pose.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureTable {
    rows: BTreeMap<GestureClass, FingerTrajectory>,
    pub channel_map: [u8; 5],
    /// Fraction of full scale each DAC channel may reach, in (0, 1].
    pub max_fraction: [f64; DAC_CHANNELS],
}

impl Default for GestureTable {
    /// Counting convention: an extended finger is relaxed (0), a folded one
    /// contracted (1). "on" opens the hand, "off" closes it.
    fn default() -> Self {
        use GestureClass::*;
        let rows = [
            (Zero, [1.0, 1.0, 1.0, 1.0, 1.0]),
            (One, [1.0, 0.0, 1.0, 1.0, 1.0]),
            (Two, [1.0, 0.0, 0.0, 1.0, 1.0]),
            (Three, [1.0, 0.0, 0.0, 0.0, 1.0]),
            (Four, [1.0, 0.0, 0.0, 0.0, 0.0]),
            (Five, [0.0, 0.0, 0.0, 0.0, 0.0]),
            (On, [0.0, 0.0, 0.0, 0.0, 0.0]),
            (Off, [1.0, 1.0, 1.0, 1.0, 1.0]),
        ];
        GestureTable {
            rows: rows.into_iter().map(|(c, v)| (c, FingerTrajectory::of(v))).collect(),
            channel_map: DEFAULT_CHANNEL_MAP,
            max_fraction: [1.0; DAC_CHANNELS],
        }
    }
}

#[derive(Serialize, Deserialize)]
struct GestureRecord {
    word: String,
    trajectory: [f64; 5],
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    gestures: Vec<GestureRecord>,
    max_fraction: [f64; DAC_CHANNELS],
    #[serde(default = "default_map")]
    channel_map: [u8; 5],
}

fn default_map() -> [u8; 5] {
    DEFAULT_CHANNEL_MAP
}

impl GestureTable {
    pub fn new(
        rows: BTreeMap<GestureClass, FingerTrajectory>,
        channel_map: [u8; 5],
        max_fraction: [f64; DAC_CHANNELS],
    ) -> Result<Self, CommandError> {
        if rows.contains_key(&GestureClass::Unknown) {
            return Err(CommandError::InvalidTable("unknown must not have a trajectory".into()));
        }
        if let Some(missing) = GestureClass::KNOWN.iter().find(|c| !rows.contains_key(c)) {
            return Err(CommandError::InvalidTable(format!("no row for `{missing}`")));
        }
        if let Some(f) = max_fraction.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return Err(CommandError::InvalidTable(format!("max_fraction {f} outside (0, 1]")));
        }
        super::dac::check_channel_map(&channel_map)?;
        Ok(GestureTable {
            rows,
            channel_map,
            max_fraction,
        })
    }

    pub fn lookup(&self, class: GestureClass) -> Option<FingerTrajectory> {
        self.rows.get(&class).copied()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Self, CommandError> {
        let file: TableFile = serde_json::from_str(text).map_err(|e| CommandError::InvalidTable(e.to_string()))?;
        let mut rows = BTreeMap::new();
        for r in file.gestures {
            let class = GestureClass::from_name(&r.word)
                .ok_or_else(|| CommandError::InvalidTable(format!("unknown word `{}`", r.word)))?;
            if rows.insert(class, FingerTrajectory::from_array(r.trajectory)?).is_some() {
                return Err(CommandError::InvalidTable(format!("duplicate row for `{}`", r.word)));
            }
        }
        GestureTable::new(rows, file.channel_map, file.max_fraction)
    }

    pub fn to_json(&self) -> String {
        let file = TableFile {
            gestures: self
                .rows
                .iter()
                .map(|(c, t)| GestureRecord {
                    word: c.name().to_string(),
                    trajectory: t.to_array(),
                })
                .collect(),
            max_fraction: self.max_fraction,
            channel_map: self.channel_map,
        };
        serde_json::to_string_pretty(&file).expect("table serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CommandError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CommandError::InvalidTable(format!("{}: {e}", path.display())))?;
        GestureTable::from_json(&text)
    }
}
