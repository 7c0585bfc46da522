//! Batch evaluation of enhancement systems over a manifest.
//!
//! Each record is materialized (clean + noise mixed at the recorded offset
//! and SNR), run through the selected system, and scored with SI-SDR and
//! STOI against the clean component; mask-based systems also report mask
//! accuracy against the oracle mask. Results aggregate into per-SNR means.

use crate::baselines::{self, BaselineError, LmmseConfig, SsConfig};
use crate::dsp::{self, DspError, StftConfig, Waveform};
use crate::io::lips::LipsIoError;
use crate::io::manifest::{Manifest, ManifestError, Split};
use crate::io::wav::WavError;
use crate::mask::{self, MaskConfig, MaskError};
use crate::metrics::{mask_accuracy, si_sdr, stoi, MetricError};
use crate::mix::{self, MixError, Mixture};
use crate::model::{self, Checkpoint, EnhanceMode, LipSequence, ModelError};
use serde::Serialize;
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum EvalError {
    #[error("system 'model' needs a checkpoint")]
    MissingCheckpoint,
    #[error("unknown system {0:?}")]
    UnknownSystem(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error(transparent)]
    Lips(#[from] LipsIoError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Mix(#[from] MixError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// Enhancement system under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Noisy,
    SpectralSubtraction,
    LogMmse,
    Oracle,
    Model,
}

impl SystemKind {
    pub fn parse(s: &str) -> Result<Self, EvalError> {
        match s {
            "noisy" => Ok(Self::Noisy),
            "ss" => Ok(Self::SpectralSubtraction),
            "lmmse" => Ok(Self::LogMmse),
            "oracle" => Ok(Self::Oracle),
            "model" => Ok(Self::Model),
            other => Err(EvalError::UnknownSystem(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Noisy => "noisy",
            Self::SpectralSubtraction => "ss",
            Self::LogMmse => "lmmse",
            Self::Oracle => "oracle",
            Self::Model => "model",
        }
    }
}

/// Evaluation parameters.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Analysis config for the oracle mask and the baselines.
    pub stft: StftConfig,
    /// Oracle mask parameters (local criterion).
    pub mask_cfg: MaskConfig,
    /// Required for [`SystemKind::Model`].
    pub checkpoint: Option<Checkpoint>,
    /// Base directory for manifest-relative paths.
    pub base_dir: PathBuf,
    /// When set, enhanced signals are written here as
    /// `<clip_id>__<system>.wav`.
    pub outputs_dir: Option<PathBuf>,
    /// Restrict to one split; `None` evaluates every record.
    pub split: Option<Split>,
    /// Blank this fraction of lip frames (seeded) before enhancement.
    pub occlusion: Option<(f64, u64)>,
    pub mode: EnhanceMode,
}

impl EvalOptions {
    pub fn new(stft: StftConfig, base_dir: impl Into<PathBuf>) -> Self {
        Self {
            stft,
            mask_cfg: MaskConfig::default(),
            checkpoint: None,
            base_dir: base_dir.into(),
            outputs_dir: None,
            split: None,
            occlusion: None,
            mode: EnhanceMode::Whole,
        }
    }
}

/// Per-clip metric record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClipMetrics {
    pub clip_id: String,
    pub system: String,
    pub snr_db: f64,
    pub si_sdr_db: f64,
    pub stoi: f64,
    pub mask_accuracy: Option<f64>,
}

/// Per-SNR aggregate of one system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub system: String,
    pub snr_db: f64,
    pub count: usize,
    pub mean_si_sdr_db: f64,
    pub mean_stoi: f64,
}

#[derive(Debug, Clone, Default)]
pub struct MetricReport {
    pub records: Vec<ClipMetrics>,
}

impl MetricReport {
    /// CSV with the fixed header
    /// `clip_id,system,snr_db,si_sdr_db,stoi,mask_accuracy`.
    pub fn csv(&self) -> String {
        let mut out = String::from("clip_id,system,snr_db,si_sdr_db,stoi,mask_accuracy\n");
        for r in &self.records {
            let acc = r
                .mask_accuracy
                .map(|a| format!("{a:.6}"))
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{:.4},{:.6},{}\n",
                r.clip_id.replace(',', "_"),
                r.system,
                r.snr_db,
                r.si_sdr_db,
                r.stoi,
                acc
            ));
        }
        out
    }

    /// Means grouped by (system, snr), ordered by system then SNR.
    pub fn aggregate(&self) -> Vec<AggregateRow> {
        let mut groups: Vec<(String, i64, Vec<&ClipMetrics>)> = Vec::new();
        for r in &self.records {
            let key = (r.snr_db * 1000.0).round() as i64;
            match groups
                .iter_mut()
                .find(|(s, k, _)| *s == r.system && *k == key)
            {
                Some((_, _, v)) => v.push(r),
                None => groups.push((r.system.clone(), key, vec![r])),
            }
        }
        groups.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        groups
            .into_iter()
            .map(|(system, key, v)| AggregateRow {
                system,
                snr_db: key as f64 / 1000.0,
                count: v.len(),
                mean_si_sdr_db: v.iter().map(|r| r.si_sdr_db).sum::<f64>() / v.len() as f64,
                mean_stoi: v.iter().map(|r| r.stoi).sum::<f64>() / v.len() as f64,
            })
            .collect()
    }

    pub fn aggregate_json(&self) -> String {
        serde_json::to_string_pretty(&self.aggregate()).expect("aggregate serializes")
    }
}

/// Loads WAVs at most once per path.
#[derive(Default)]
struct WaveCache {
    map: HashMap<PathBuf, Waveform>,
}

impl WaveCache {
    fn get(&mut self, path: &Path) -> Result<Waveform, EvalError> {
        if let Some(w) = self.map.get(path) {
            return Ok(w.clone());
        }
        let w = crate::io::wav::read_wav(path)?;
        self.map.insert(path.to_path_buf(), w.clone());
        Ok(w)
    }
}

/// Runs one system over a materialized mixture. Returns the enhanced
/// waveform and, for mask-based systems, the mask accuracy.
pub fn run_system(
    system: SystemKind,
    mixture: &Mixture,
    lips: Option<&LipSequence>,
    opts: &EvalOptions,
) -> Result<(Waveform, Option<f64>), EvalError> {
    match system {
        SystemKind::Noisy => Ok((mixture.mixture.clone(), None)),
        SystemKind::SpectralSubtraction => {
            let cfg = SsConfig::default_for(&opts.stft, mixture.mixture.sample_rate());
            Ok((
                baselines::spectral_subtraction(&mixture.mixture, &cfg, &opts.stft)?,
                None,
            ))
        }
        SystemKind::LogMmse => {
            let cfg = LmmseConfig::default_for(&opts.stft, mixture.mixture.sample_rate());
            Ok((baselines::log_mmse(&mixture.mixture, &cfg, &opts.stft)?, None))
        }
        SystemKind::Oracle => {
            let noisy = dsp::stft(&mixture.mixture, &opts.stft, None)?;
            let frames = noisy.frames();
            let clean = dsp::stft(&mixture.clean, &opts.stft, Some(frames))?;
            let noise = dsp::stft(&mixture.scaled_noise, &opts.stft, Some(frames))?;
            let ibm = mask::ideal_binary_mask(&clean, &noise, &opts.mask_cfg)?;
            let out = mask::resynthesize(&ibm, &noisy, mixture.mixture.len())?;
            Ok((out, Some(1.0)))
        }
        SystemKind::Model => {
            let ckpt = opts.checkpoint.as_ref().ok_or(EvalError::MissingCheckpoint)?;
            let occluded = match (lips, opts.occlusion) {
                (Some(l), Some((fraction, seed))) => {
                    Some(model::occlude_visuals(l, fraction, seed))
                }
                (Some(l), None) => Some(l.clone()),
                (None, _) => None,
            };
            let out = model::enhance(&mixture.mixture, occluded.as_ref(), ckpt, opts.mode)?;

            // oracle target at the model's own analysis parameters
            let model_stft = ckpt.config.stft()?;
            let frames = out.mask.dim().0;
            let clean = dsp::stft(&mixture.clean, &model_stft, Some(frames))?;
            let noise = dsp::stft(&mixture.scaled_noise, &model_stft, Some(frames))?;
            let ibm = mask::ideal_binary_mask(&clean, &noise, &opts.mask_cfg)?;
            let acc = mask_accuracy(&out.mask, &ibm, 0.5)?.accuracy;
            Ok((out.audio, Some(acc)))
        }
    }
}

/// Evaluates every (selected) manifest record under one system.
pub fn evaluate_manifest(
    manifest: &Manifest,
    system: SystemKind,
    opts: &EvalOptions,
) -> Result<MetricReport, EvalError> {
    if system == SystemKind::Model && opts.checkpoint.is_none() {
        return Err(EvalError::MissingCheckpoint);
    }
    if let Some(dir) = &opts.outputs_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut cache = WaveCache::default();
    let mut records = Vec::new();
    for record in &manifest.records {
        if opts.split.is_some_and(|s| s != record.split) {
            continue;
        }
        let clean = cache.get(&opts.base_dir.join(&record.clean_path))?;
        let noise = cache.get(&opts.base_dir.join(&record.noise_path))?;
        let mixture = mix::mix_at_snr(&clean, &noise, record.noise_offset, record.snr_db)?;
        let lips = match &record.lips_path {
            Some(p) => Some(crate::io::lips::read_lips(&opts.base_dir.join(p))?),
            None => None,
        };

        let (enhanced, acc) = run_system(system, &mixture, lips.as_ref(), opts)?;
        let si = si_sdr(&enhanced, &mixture.clean)?;
        let st = stoi(&enhanced, &mixture.clean, mixture.clean.sample_rate())?;
        if let Some(dir) = &opts.outputs_dir {
            let name = format!(
                "{}__{}.wav",
                record.clip_id.replace(['/', ','], "_"),
                system.name()
            );
            crate::io::wav::write_wav(&dir.join(name), &enhanced)?;
        }
        records.push(ClipMetrics {
            clip_id: record.clip_id.clone(),
            system: system.name().to_string(),
            snr_db: record.snr_db,
            si_sdr_db: si,
            stoi: st,
            mask_accuracy: acc,
        });
    }
    Ok(MetricReport { records })
}
