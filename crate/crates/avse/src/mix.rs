//! Synthetic mixture generation at controlled SNRs and manifest assembly.
//!
//! All randomness is drawn from a caller-provided seed, so manifests and the
//! mixtures materialized from them are byte-reproducible.

use crate::dsp::Waveform;
use crate::io::manifest::{Manifest, ManifestError, ManifestRecord, Split};
use crate::model::lips::LipSequence;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum MixError {
    #[error("{0} signal has zero energy")]
    ZeroEnergy(&'static str),
    #[error("clean and noise lengths differ: {clean} vs {noise}")]
    LengthMismatch { clean: usize, noise: usize },
    #[error("sample rates differ: {clean} vs {noise}")]
    RateMismatch { clean: u32, noise: u32 },
    #[error("audio spans {audio_s:.3} s but lips span {lips_s:.3} s")]
    SpanMismatch { audio_s: f64, lips_s: f64 },
    #[error("utterance shorter than one video frame")]
    UtteranceTooShort,
    #[error("{0} list is empty")]
    EmptyInput(&'static str),
    #[error("invalid SNR grid: {0}")]
    BadGrid(String),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Dsp(#[from] crate::dsp::DspError),
}

/// Assignment of one mixture, as stored in a manifest record.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub clean_id: String,
    pub noise_id: String,
    pub noise_offset: u64,
    pub target_snr_db: f64,
    pub gain: f64,
    pub clip_len: usize,
}

/// Inclusive SNR grid `{lo, lo+step, ..., hi}` in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrGrid {
    pub lo_db: f64,
    pub hi_db: f64,
    pub step_db: f64,
}

impl SnrGrid {
    pub fn new(lo_db: f64, hi_db: f64, step_db: f64) -> Result<Self, MixError> {
        if lo_db > hi_db {
            return Err(MixError::BadGrid(format!("lo {lo_db} > hi {hi_db}")));
        }
        if step_db <= 0.0 {
            return Err(MixError::BadGrid(format!("step {step_db} must be > 0")));
        }
        Ok(Self {
            lo_db,
            hi_db,
            step_db,
        })
    }

    /// The training grid used throughout: -12..9 dB in 3 dB steps.
    pub fn default_training() -> Self {
        Self::new(-12.0, 9.0, 3.0).unwrap()
    }

    pub fn values(&self) -> Vec<f64> {
        let n = ((self.hi_db - self.lo_db) / self.step_db + 1e-9).floor() as usize + 1;
        (0..n)
            .map(|i| self.lo_db + i as f64 * self.step_db)
            .collect()
    }
}

/// Gain on the noise so that `10 log10(E_clean / (g^2 E_noise))` hits the
/// target SNR.
pub fn snr_gain(clean: &Waveform, noise: &Waveform, target_snr_db: f64) -> Result<f64, MixError> {
    if clean.len() != noise.len() {
        return Err(MixError::LengthMismatch {
            clean: clean.len(),
            noise: noise.len(),
        });
    }
    let e_clean = clean.energy();
    let e_noise = noise.energy();
    if e_clean <= 0.0 {
        return Err(MixError::ZeroEnergy("clean"));
    }
    if e_noise <= 0.0 {
        return Err(MixError::ZeroEnergy("noise"));
    }
    Ok((e_clean / (e_noise * 10f64.powf(target_snr_db / 10.0))).sqrt())
}

/// A materialized mixture and its exact components.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub mixture: Waveform,
    /// The interfering signal exactly as added, for oracle-mask targets.
    pub scaled_noise: Waveform,
    /// The speech component exactly as added (rescaled along with the
    /// mixture when the clipping guard fires).
    pub clean: Waveform,
    /// 1.0 unless the clipping guard rescaled everything.
    pub peak_scale: f64,
}

/// Adds noise (taken from `offset` with wraparound) to the clean signal at
/// the requested SNR. If the sum would exceed full scale, mixture and both
/// components are rescaled together, preserving the SNR.
pub fn mix_at_snr(
    clean: &Waveform,
    noise: &Waveform,
    offset: u64,
    target_snr_db: f64,
) -> Result<Mixture, MixError> {
    if clean.sample_rate() != noise.sample_rate() {
        return Err(MixError::RateMismatch {
            clean: clean.sample_rate(),
            noise: noise.sample_rate(),
        });
    }
    if noise.is_empty() {
        return Err(MixError::ZeroEnergy("noise"));
    }
    let n = clean.len();
    let noise_samples = noise.samples();
    let segment: Vec<f32> = (0..n)
        .map(|i| noise_samples[((offset as usize) + i) % noise_samples.len()])
        .collect();
    let segment = Waveform::new(segment, clean.sample_rate())?;
    let gain = snr_gain(clean, &segment, target_snr_db)?;

    let mut clean_part: Vec<f32> = clean.samples().to_vec();
    let mut noise_part: Vec<f32> = segment
        .samples()
        .iter()
        .map(|&s| (gain * s as f64) as f32)
        .collect();
    let mut mixture: Vec<f32> = clean_part
        .iter()
        .zip(noise_part.iter())
        .map(|(&c, &v)| c + v)
        .collect();

    let peak = mixture.iter().fold(0.0f32, |m, &s| m.max(s.abs()));
    let mut peak_scale = 1.0f64;
    if peak > 1.0 {
        // rescale the components and re-sum so the mixture stays the exact
        // sample-wise sum of its parts
        peak_scale = 1.0 / (peak as f64 * 1.001);
        for s in clean_part.iter_mut() {
            *s = (*s as f64 * peak_scale) as f32;
        }
        for s in noise_part.iter_mut() {
            *s = (*s as f64 * peak_scale) as f32;
        }
        mixture = clean_part
            .iter()
            .zip(noise_part.iter())
            .map(|(&c, &v)| c + v)
            .collect();
    }

    let rate = clean.sample_rate();
    Ok(Mixture {
        mixture: Waveform::new(mixture, rate)?,
        scaled_noise: Waveform::new(noise_part, rate)?,
        clean: Waveform::new(clean_part, rate)?,
        peak_scale,
    })
}

/// Measured SNR in dB between a speech component and an interferer.
pub fn measured_snr_db(clean: &Waveform, scaled_noise: &Waveform) -> f64 {
    10.0 * (clean.energy() / scaled_noise.energy().max(1e-300)).log10()
}

/// One aligned audio/lips window produced by [`segment_clips`].
#[derive(Debug, Clone)]
pub struct AlignedClip {
    pub audio: Waveform,
    pub lips: LipSequence,
    /// Trailing audio samples that are padding.
    pub pad_samples: usize,
    /// Trailing lip frames that are blank padding.
    pub pad_lip_frames: usize,
}

/// Splits an utterance into consecutive fixed-length clips; the final
/// partial clip is zero-padded in audio and blank-padded in lips.
pub fn segment_clips(
    utterance: &Waveform,
    lips: &LipSequence,
    clip_s: f64,
) -> Result<Vec<AlignedClip>, MixError> {
    let rate = utterance.sample_rate();
    let frame_samples = rate as usize / crate::model::lips::LIP_FPS as usize;
    if utterance.len() < frame_samples {
        return Err(MixError::UtteranceTooShort);
    }
    let audio_s = utterance.duration_s();
    let lips_s = lips.duration_s();
    if (audio_s - lips_s).abs() > 1.0 / crate::model::lips::LIP_FPS as f64 + 1e-9 {
        return Err(MixError::SpanMismatch { audio_s, lips_s });
    }

    let clip_samples = (clip_s * rate as f64).round() as usize;
    let clip_frames = (clip_s * crate::model::lips::LIP_FPS as f64).round() as usize;
    let n_clips = utterance.len().div_ceil(clip_samples);

    let mut out = Vec::with_capacity(n_clips);
    for k in 0..n_clips {
        let start = k * clip_samples;
        let end = ((k + 1) * clip_samples).min(utterance.len());
        let mut audio = utterance.samples()[start..end].to_vec();
        let pad_samples = clip_samples - audio.len();
        audio.resize(clip_samples, 0.0);

        let lip_start = k * clip_frames;
        let avail = lips.len().saturating_sub(lip_start).min(clip_frames);
        let clip_lips = lips.window(lip_start, clip_frames);
        out.push(AlignedClip {
            audio: Waveform::new(audio, rate)?,
            lips: clip_lips,
            pad_samples,
            pad_lip_frames: clip_frames - avail,
        });
    }
    Ok(out)
}

/// A clean clip available for manifest assembly.
#[derive(Debug, Clone)]
pub struct CleanClipEntry {
    pub clip_id: String,
    pub clean_path: PathBuf,
    pub lips_path: Option<PathBuf>,
    pub pad_samples: u64,
    pub split: Split,
}

/// A noise file available for manifest assembly.
#[derive(Debug, Clone)]
pub struct NoiseEntry {
    pub path: PathBuf,
    pub len_samples: u64,
}

/// Seeded assignment of a noise, offset and grid SNR to every clean clip.
///
/// With `replicate_all_snrs`, each clip appears once per grid value instead
/// of receiving a single draw.
pub fn build_manifest(
    clips: &[CleanClipEntry],
    noises: &[NoiseEntry],
    grid: &SnrGrid,
    seed: u64,
    replicate_all_snrs: bool,
) -> Result<Manifest, MixError> {
    if clips.is_empty() {
        return Err(MixError::EmptyInput("clean clip"));
    }
    if noises.is_empty() {
        return Err(MixError::EmptyInput("noise"));
    }
    let snrs = grid.values();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    for clip in clips {
        let targets: Vec<f64> = if replicate_all_snrs {
            snrs.clone()
        } else {
            vec![snrs[rng.gen_range(0..snrs.len())]]
        };
        for snr_db in targets {
            let noise = &noises[rng.gen_range(0..noises.len())];
            let noise_offset = rng.gen_range(0..noise.len_samples.max(1));
            let clip_id = if replicate_all_snrs {
                format!("{}@{:+}dB", clip.clip_id, snr_db)
            } else {
                clip.clip_id.clone()
            };
            records.push(ManifestRecord {
                clip_id,
                clean_path: clip.clean_path.clone(),
                noise_path: noise.path.clone(),
                noise_offset,
                snr_db,
                lips_path: clip.lips_path.clone(),
                split: clip.split,
                pad_samples: clip.pad_samples,
                peak_scale: 1.0,
            });
        }
    }
    Ok(Manifest::new(records)?)
}
