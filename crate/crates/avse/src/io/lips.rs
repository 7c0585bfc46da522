//! Lip-frame container: a flat binary format for 40x80 grayscale
//! sequences, plus PGM directory import.
//!
//! Layout (little-endian): magic `LIPS`, version u16, n_frames u32,
//! height u16, width u16, fps u16, presence bitmap (one bit per frame,
//! LSB first), then `n_frames * height * width` bytes of row-major 8-bit
//! grayscale. Absent frames are stored as zero bytes.

use crate::model::lips::{LipError, LipSequence, LIP_FPS, LIP_HEIGHT, LIP_WIDTH};
use ndarray::Array2;
use std::fs;
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 4] = b"LIPS";
const VERSION: u16 = 1;

#[derive(Error, Debug)]
pub enum LipsIoError {
    #[error("lips io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected LIPS")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("container declares {declared}x{width} at {fps} fps; expected 40x80 at 25 fps")]
    BadGeometry { declared: u16, width: u16, fps: u16 },
    #[error("payload is {got} bytes, header implies {expected}")]
    SizeMismatch { got: usize, expected: usize },
    #[error("frame {index}: {path:?} is {got_w}x{got_h}, expected 80x40")]
    BadFrameDimensions {
        index: usize,
        path: std::path::PathBuf,
        got_w: usize,
        got_h: usize,
    },
    #[error("pgm parse error in {path:?}: {reason}")]
    BadPgm {
        path: std::path::PathBuf,
        reason: String,
    },
    #[error("no PGM frames found in {0:?}")]
    EmptyDirectory(std::path::PathBuf),
    #[error(transparent)]
    Lip(#[from] LipError),
}

/// Serializes a sequence; absent frames are written as zeros.
pub fn lips_bytes(lips: &LipSequence) -> Vec<u8> {
    let n = lips.len();
    let bitmap_len = n.div_ceil(8);
    let mut out = Vec::with_capacity(14 + bitmap_len + n * LIP_HEIGHT * LIP_WIDTH);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(LIP_HEIGHT as u16).to_le_bytes());
    out.extend_from_slice(&(LIP_WIDTH as u16).to_le_bytes());
    out.extend_from_slice(&(LIP_FPS as u16).to_le_bytes());

    let mut bitmap = vec![0u8; bitmap_len];
    for (i, &present) in lips.present().iter().enumerate() {
        if present {
            bitmap[i / 8] |= 1 << (i % 8);
        }
    }
    out.extend_from_slice(&bitmap);

    for (frame, &present) in lips.frames().iter().zip(lips.present()) {
        if present {
            for &v in frame.iter() {
                out.push((v as f64 * 255.0).round().clamp(0.0, 255.0) as u8);
            }
        } else {
            out.extend(std::iter::repeat_n(0u8, LIP_HEIGHT * LIP_WIDTH));
        }
    }
    out
}

pub fn parse_lips(bytes: &[u8]) -> Result<LipSequence, LipsIoError> {
    if bytes.len() < 14 {
        return Err(LipsIoError::BadMagic);
    }
    if &bytes[0..4] != MAGIC {
        return Err(LipsIoError::BadMagic);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(LipsIoError::UnsupportedVersion(version));
    }
    let n = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
    let height = u16::from_le_bytes([bytes[10], bytes[11]]);
    let width = u16::from_le_bytes([bytes[12], bytes[13]]);
    let fps = u16::from_le_bytes([bytes[14], bytes[15]]);
    if height as usize != LIP_HEIGHT || width as usize != LIP_WIDTH || fps as u32 != LIP_FPS {
        return Err(LipsIoError::BadGeometry {
            declared: height,
            width,
            fps,
        });
    }
    let bitmap_len = n.div_ceil(8);
    let expected = 16 + bitmap_len + n * LIP_HEIGHT * LIP_WIDTH;
    if bytes.len() != expected {
        return Err(LipsIoError::SizeMismatch {
            got: bytes.len(),
            expected,
        });
    }
    let bitmap = &bytes[16..16 + bitmap_len];
    let payload = &bytes[16 + bitmap_len..];
    let mut frames = Vec::with_capacity(n);
    let mut present = Vec::with_capacity(n);
    for i in 0..n {
        let is_present = bitmap[i / 8] & (1 << (i % 8)) != 0;
        present.push(is_present);
        if is_present {
            let start = i * LIP_HEIGHT * LIP_WIDTH;
            frames.push(Array2::from_shape_fn((LIP_HEIGHT, LIP_WIDTH), |(y, x)| {
                payload[start + y * LIP_WIDTH + x] as f32 / 255.0
            }));
        } else {
            frames.push(Array2::zeros((LIP_HEIGHT, LIP_WIDTH)));
        }
    }
    Ok(LipSequence::new(frames, present)?)
}

pub fn write_lips(path: &Path, lips: &LipSequence) -> Result<(), LipsIoError> {
    fs::write(path, lips_bytes(lips))?;
    Ok(())
}

pub fn read_lips(path: &Path) -> Result<LipSequence, LipsIoError> {
    parse_lips(&fs::read(path)?)
}

/// Minimal binary PGM (P5, maxval 255) decoder.
fn parse_pgm(path: &Path, bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), LipsIoError> {
    let bad = |reason: &str| LipsIoError::BadPgm {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if !bytes.starts_with(b"P5") {
        return Err(bad("missing P5 signature"));
    }
    let mut pos = 2usize;
    let mut fields = Vec::new();
    while fields.len() < 3 && pos < bytes.len() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let text = std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii header"))?;
        fields.push(
            text.parse::<usize>()
                .map_err(|_| bad("non-numeric header field"))?,
        );
    }
    if fields.len() < 3 {
        return Err(bad("incomplete header"));
    }
    let (w, h, maxval) = (fields[0], fields[1], fields[2]);
    if maxval != 255 {
        return Err(bad("only maxval 255 supported"));
    }
    pos += 1; // single whitespace after maxval
    if bytes.len() < pos + w * h {
        return Err(bad("pixel payload truncated"));
    }
    Ok((w, h, bytes[pos..pos + w * h].to_vec()))
}

/// Imports a directory of `*.pgm` frames (sorted by filename) as a
/// sequence of present frames.
pub fn import_pgm_dir(dir: &Path) -> Result<LipSequence, LipsIoError> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .map(|e| e.eq_ignore_ascii_case("pgm"))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(LipsIoError::EmptyDirectory(dir.to_path_buf()));
    }
    let mut frames = Vec::with_capacity(paths.len());
    for (index, path) in paths.iter().enumerate() {
        let bytes = fs::read(path)?;
        let (w, h, pixels) = parse_pgm(path, &bytes)?;
        if w != LIP_WIDTH || h != LIP_HEIGHT {
            return Err(LipsIoError::BadFrameDimensions {
                index,
                path: path.clone(),
                got_w: w,
                got_h: h,
            });
        }
        frames.push(Array2::from_shape_fn((LIP_HEIGHT, LIP_WIDTH), |(y, x)| {
            pixels[y * LIP_WIDTH + x] as f32 / 255.0
        }));
    }
    let n = frames.len();
    Ok(LipSequence::new(frames, vec![true; n])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;

    fn random_lips(seed: u64, n: usize) -> LipSequence {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let frames: Vec<Array2<f32>> = (0..n)
            .map(|_| {
                Array2::from_shape_fn((LIP_HEIGHT, LIP_WIDTH), |_| {
                    rng.gen_range(0u16..256) as f32 / 255.0
                })
            })
            .collect();
        let mut present = vec![true; n];
        present[n / 2] = false;
        let mut lips = LipSequence::new(frames, present).unwrap();
        lips.blank_frame(n / 2);
        lips
    }

    #[test]
    fn container_round_trip_is_byte_identical() {
        let lips = random_lips(1, 75);
        let bytes = lips_bytes(&lips);
        let back = parse_lips(&bytes).unwrap();
        assert_eq!(back.len(), 75);
        assert_eq!(lips_bytes(&back), bytes);
        assert_eq!(back.present(), lips.present());
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let lips = random_lips(2, 5);
        let mut bytes = lips_bytes(&lips);
        bytes.push(0);
        assert!(matches!(
            parse_lips(&bytes),
            Err(LipsIoError::SizeMismatch { .. })
        ));
        bytes.truncate(bytes.len() - 10);
        assert!(matches!(
            parse_lips(&bytes),
            Err(LipsIoError::SizeMismatch { .. })
        ));
    }

    #[test]
    fn bad_magic_and_geometry_are_rejected() {
        assert!(matches!(parse_lips(b"NOPE"), Err(LipsIoError::BadMagic)));
        let lips = random_lips(3, 2);
        let mut bytes = lips_bytes(&lips);
        bytes[10] = 41; // height
        assert!(matches!(
            parse_lips(&bytes),
            Err(LipsIoError::BadGeometry { .. })
        ));
    }

    fn pgm_bytes(w: usize, h: usize, value: u8) -> Vec<u8> {
        let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
        bytes.extend(std::iter::repeat_n(value, w * h));
        bytes
    }

    #[test]
    fn pgm_directory_import() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..75 {
            fs::write(dir.path().join(format!("f{i:03}.pgm")), pgm_bytes(80, 40, i as u8))
                .unwrap();
        }
        let lips = import_pgm_dir(dir.path()).unwrap();
        assert_eq!(lips.len(), 75);
        assert!((lips.duration_s() - 3.0).abs() < 1e-9);
        // sorted order: first frame is all zeros, last is 74/255
        assert_eq!(lips.frames()[0][(0, 0)], 0.0);
        assert!((lips.frames()[74][(0, 0)] - 74.0 / 255.0).abs() < 1e-6);
    }

    #[test]
    fn wrong_pgm_dimensions_name_the_frame() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.pgm"), pgm_bytes(80, 40, 1)).unwrap();
        fs::write(dir.path().join("b.pgm"), pgm_bytes(64, 64, 1)).unwrap();
        match import_pgm_dir(dir.path()).unwrap_err() {
            LipsIoError::BadFrameDimensions { index, .. } => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.lips");
        let lips = random_lips(4, 10);
        write_lips(&path, &lips).unwrap();
        let back = read_lips(&path).unwrap();
        assert_eq!(lips_bytes(&back), lips_bytes(&lips));
    }
}
