//! RIFF/WAVE reading and writing.
//!
//! Reads 16-bit PCM and 32-bit float files; multi-channel input is folded
//! to mono by averaging. Writing emits 16-bit PCM scaled by 32768, so a
//! write/read round trip stays within one quantization step.

use crate::dsp::{DspError, Waveform};
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum WavError {
    #[error("wav io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a RIFF/WAVE file")]
    BadMagic,
    #[error("missing {0:?} chunk")]
    MissingChunk(&'static str),
    #[error("truncated {chunk:?} chunk: declared {declared} bytes, {available} available")]
    TruncatedChunk {
        chunk: String,
        declared: usize,
        available: usize,
    },
    #[error("unsupported codec: format tag {format}, {bits} bits")]
    UnsupportedCodec { format: u16, bits: u16 },
    #[error("zero channels declared")]
    ZeroChannels,
    #[error(transparent)]
    Dsp(#[from] DspError),
}

struct FmtChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

fn le_u16(b: &[u8]) -> u16 {
    u16::from_le_bytes([b[0], b[1]])
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

/// Parses a mono waveform from WAV bytes.
pub fn parse_wav(bytes: &[u8]) -> Result<Waveform, WavError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(WavError::BadMagic);
    }
    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12usize;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = le_u32(&bytes[pos + 4..pos + 8]) as usize;
        let body_start = pos + 8;
        if body_start + size > bytes.len() {
            return Err(WavError::TruncatedChunk {
                chunk: String::from_utf8_lossy(id).into_owned(),
                declared: size,
                available: bytes.len() - body_start,
            });
        }
        let body = &bytes[body_start..body_start + size];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(WavError::TruncatedChunk {
                        chunk: "fmt ".into(),
                        declared: 16,
                        available: size,
                    });
                }
                fmt = Some(FmtChunk {
                    format: le_u16(&body[0..2]),
                    channels: le_u16(&body[2..4]),
                    sample_rate: le_u32(&body[4..8]),
                    bits: le_u16(&body[14..16]),
                });
            }
            b"data" => data = Some(body),
            _ => {}
        }
        pos = body_start + size + (size & 1); // chunks are word-aligned
    }
    let fmt = fmt.ok_or(WavError::MissingChunk("fmt "))?;
    let data = data.ok_or(WavError::MissingChunk("data"))?;
    if fmt.channels == 0 {
        return Err(WavError::ZeroChannels);
    }

    let channels = fmt.channels as usize;
    let interleaved: Vec<f32> = match (fmt.format, fmt.bits) {
        (1, 16) => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32 / 32768.0)
            .collect(),
        (3, 32) => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
        (format, bits) => return Err(WavError::UnsupportedCodec { format, bits }),
    };
    let frames = interleaved.len() / channels;
    let mono: Vec<f32> = (0..frames)
        .map(|i| {
            let sum: f32 = interleaved[i * channels..(i + 1) * channels].iter().sum();
            sum / channels as f32
        })
        .collect();
    Ok(Waveform::new(mono, fmt.sample_rate)?)
}

pub fn read_wav(path: &Path) -> Result<Waveform, WavError> {
    parse_wav(&fs::read(path)?)
}

/// Serializes to 16-bit PCM. Returns the number of samples clipped to full
/// scale.
pub fn wav_bytes(wave: &Waveform) -> (Vec<u8>, usize) {
    let n = wave.len();
    let data_len = n * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&wave.sample_rate().to_le_bytes());
    out.extend_from_slice(&(wave.sample_rate() * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());

    let mut clipped = 0usize;
    for &s in wave.samples() {
        let v = (s as f64 * 32768.0).round();
        let q = if v > 32767.0 {
            clipped += 1;
            32767
        } else if v < -32768.0 {
            clipped += 1;
            -32768
        } else {
            v as i32
        };
        out.extend_from_slice(&(q as i16).to_le_bytes());
    }
    (out, clipped)
}

/// Writes 16-bit PCM; returns how many samples were clipped.
pub fn write_wav(path: &Path, wave: &Waveform) -> Result<usize, WavError> {
    let (bytes, clipped) = wav_bytes(wave);
    fs::write(path, bytes)?;
    Ok(clipped)
}
