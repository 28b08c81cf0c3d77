use std::path::Path;

use super::{AudioClip, AudioError, SAMPLE_RATE_HZ};

const FORMAT_PCM: u16 = 1;

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Decodes a RIFF/WAVE file holding 16 kHz mono 16-bit PCM.
///
/// Unknown chunks (`LIST`, `fact`, ...) are skipped. A data chunk whose
/// declared size runs past the end of the buffer is read up to the end.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::NotRiff);
    }

    let mut pos = 12;
    let mut format: Option<(u16, u16, u32, u16)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + 16 > bytes.len() {
                    return Err(AudioError::Malformed("fmt chunk truncated"));
                }
                format = Some((
                    u16_at(bytes, body),
                    u16_at(bytes, body + 2),
                    u32_at(bytes, body + 4),
                    u16_at(bytes, body + 14),
                ));
            }
            b"data" => {
                let (code, channels, rate, bits) =
                    format.ok_or(AudioError::Malformed("data chunk before fmt chunk"))?;
                if code != FORMAT_PCM || bits != 16 {
                    return Err(AudioError::UnsupportedEncoding { format: code, bits });
                }
                if channels != 1 {
                    return Err(AudioError::UnsupportedChannels(channels));
                }
                if rate != SAMPLE_RATE_HZ {
                    return Err(AudioError::UnsupportedSampleRate(rate));
                }
                let end = body.saturating_add(size).min(bytes.len());
                let samples = bytes[body..end]
                    .chunks_exact(2)
                    .map(|p| i16::from_le_bytes([p[0], p[1]]))
                    .collect();
                return Ok(AudioClip::new(samples));
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body.saturating_add(size).saturating_add(size & 1);
    }
    Err(AudioError::Malformed(if format.is_some() {
        "no data chunk"
    } else {
        "no fmt chunk"
    }))
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| AudioError::Io {
        context: format!("reading {}", path.display()),
        source,
    })?;
    decode_wav(&bytes)
}

/// Canonical 44-byte-header writer for 16 kHz mono 16-bit PCM.
pub fn encode_wav(samples: &[i16]) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + samples.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&SAMPLE_RATE_HZ.to_le_bytes());
    out.extend_from_slice(&(SAMPLE_RATE_HZ * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}
