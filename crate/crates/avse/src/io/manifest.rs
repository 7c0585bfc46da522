//! Dataset manifests: one JSONL record per training/evaluation clip.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum ManifestError {
    #[error("manifest io: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("manifest serialize: {0}")]
    Serialize(#[from] serde_json::Error),
    #[error("duplicate clip_id {0:?}")]
    DuplicateClipId(String),
    #[error("manifest is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Val => write!(f, "val"),
            Split::Test => write!(f, "test"),
        }
    }
}

fn unit_scale() -> f64 {
    1.0
}

fn is_unit_scale(v: &f64) -> bool {
    *v == 1.0
}

/// One mixture assignment: which clean clip, which noise, where in the
/// noise file, and the target SNR.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifestRecord {
    pub clip_id: String,
    pub clean_path: PathBuf,
    pub noise_path: PathBuf,
    pub noise_offset: u64,
    pub snr_db: f64,
    pub lips_path: Option<PathBuf>,
    pub split: Split,
    /// Trailing zero samples appended when the source utterance did not
    /// fill the clip.
    pub pad_samples: u64,
    /// Rescale applied to mixture and components when the clipping guard
    /// fired at materialization; 1.0 otherwise.
    #[serde(default = "unit_scale", skip_serializing_if = "is_unit_scale")]
    pub peak_scale: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn new(records: Vec<ManifestRecord>) -> Result<Self, ManifestError> {
        let mut seen = std::collections::HashSet::new();
        for r in &records {
            if !seen.insert(r.clip_id.clone()) {
                return Err(ManifestError::DuplicateClipId(r.clip_id.clone()));
            }
        }
        Ok(Self { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn to_jsonl(&self) -> Result<String, ManifestError> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self, ManifestError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r = serde_json::from_str(line)
                .map_err(|source| ManifestError::Parse { line: i + 1, source })?;
            records.push(r);
        }
        if records.is_empty() {
            return Err(ManifestError::Empty);
        }
        Manifest::new(records)
    }

    pub fn write_file(&self, path: &Path) -> Result<(), ManifestError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(self.to_jsonl()?.as_bytes())?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self, ManifestError> {
        let reader = BufReader::new(File::open(path)?);
        let mut text = String::new();
        for line in reader.lines() {
            text.push_str(&line?);
            text.push('\n');
        }
        Self::from_jsonl(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str) -> ManifestRecord {
        ManifestRecord {
            clip_id: id.into(),
            clean_path: "clean/a.wav".into(),
            noise_path: "noise/n.wav".into(),
            noise_offset: 123,
            snr_db: -6.0,
            lips_path: Some("clean/a.lips".into()),
            split: Split::Train,
            pad_samples: 0,
            peak_scale: 1.0,
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let m = Manifest::new(vec![record("a"), record("b")]).unwrap();
        let text = m.to_jsonl().unwrap();
        assert_eq!(text.lines().count(), 2);
        let back = Manifest::from_jsonl(&text).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn duplicate_ids_rejected() {
        assert!(matches!(
            Manifest::new(vec![record("a"), record("a")]),
            Err(ManifestError::DuplicateClipId(_))
        ));
    }

    #[test]
    fn unit_peak_scale_not_serialized() {
        let m = Manifest::new(vec![record("a")]).unwrap();
        let text = m.to_jsonl().unwrap();
        assert!(!text.contains("peak_scale"));
        let mut r = record("b");
        r.peak_scale = 0.5;
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("peak_scale"));
    }

    #[test]
    fn empty_manifest_rejected_on_parse() {
        assert!(matches!(
            Manifest::from_jsonl("\n\n"),
            Err(ManifestError::Empty)
        ));
    }
}
