use serde::Serialize;

use super::{CommandError, FingerTrajectory};

pub const DAC_CHANNELS: usize = 8;
/// Command nibble for "write to input register and update output".
pub const WRITE_AND_UPDATE: u8 = 0x3;
const FULL_SCALE: f64 = 65_535.0;

/// One I2C write: command/address byte, code high byte, code low byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DacFrame([u8; 3]);

impl DacFrame {
    pub fn bytes(&self) -> [u8; 3] {
        self.0
    }

    pub fn channel(&self) -> u8 {
        self.0[0] & 0x0F
    }

    pub fn code(&self) -> u16 {
        u16::from_be_bytes([self.0[1], self.0[2]])
    }
}

pub(crate) fn check_channel_map(map: &[u8; 5]) -> Result<(), CommandError> {
    for (i, &ch) in map.iter().enumerate() {
        if usize::from(ch) >= DAC_CHANNELS {
            return Err(CommandError::ChannelOutOfRange(ch));
        }
        if map[..i].contains(&ch) {
            return Err(CommandError::DuplicateChannel(ch));
        }
    }
    Ok(())
}

/// `round(value · max_fraction[channel] · 65535)` per finger, thumb first.
pub fn trajectory_to_codes(
    traj: &FingerTrajectory,
    channel_map: &[u8; 5],
    max_fraction: &[f64; DAC_CHANNELS],
) -> Result<Vec<(u8, u32)>, CommandError> {
    check_channel_map(channel_map)?;
    Ok(traj
        .to_array()
        .iter()
        .zip(channel_map)
        .map(|(&v, &ch)| {
            let scaled = (v.clamp(0.0, 1.0) * max_fraction[usize::from(ch)] * FULL_SCALE).round();
            (ch, scaled as u32)
        })
        .collect())
}

/// `[0x30 | channel, code >> 8, code & 0xFF]` per entry.
pub fn encode_dac_frames(codes: &[(u8, u32)]) -> Result<Vec<DacFrame>, CommandError> {
    codes
        .iter()
        .map(|&(ch, code)| {
            if usize::from(ch) >= DAC_CHANNELS {
                return Err(CommandError::ChannelOutOfRange(ch));
            }
            let code = u16::try_from(code).map_err(|_| CommandError::CodeOutOfRange(code))?;
            let [hi, lo] = code.to_be_bytes();
            Ok(DacFrame([(WRITE_AND_UPDATE << 4) | ch, hi, lo]))
        })
        .collect()
}
