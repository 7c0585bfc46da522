//! Binary masks over time-frequency planes.
//!
//! The oracle mask assigns 0 to bins where the local SNR is at or below the
//! local criterion and 1 otherwise; estimated masks carry raw sigmoid values
//! in (0, 1). Resynthesis multiplies the noisy magnitude by the mask and
//! keeps the noisy phase.

use crate::dsp::{self, DspError, Spectrogram, Waveform};
use ndarray::Array2;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum MaskError {
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("mask value {value} at {index:?} outside [0, 1]")]
    ValueOutOfRange { value: f32, index: (usize, usize) },
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// Time-frequency mask with values in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Mask {
    values: Array2<f32>,
}

impl Mask {
    pub fn new(values: Array2<f32>) -> Result<Self, MaskError> {
        for (index, &value) in values.indexed_iter() {
            if !(0.0..=1.0).contains(&value) {
                return Err(MaskError::ValueOutOfRange { value, index });
            }
        }
        Ok(Self { values })
    }

    pub fn ones(frames: usize, bins: usize) -> Self {
        Self {
            values: Array2::from_elem((frames, bins), 1.0),
        }
    }

    pub fn zeros(frames: usize, bins: usize) -> Self {
        Self {
            values: Array2::zeros((frames, bins)),
        }
    }

    pub fn values(&self) -> &Array2<f32> {
        &self.values
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    /// True when every value is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

/// Parameters of the oracle mask.
#[derive(Debug, Clone, Copy)]
pub struct MaskConfig {
    /// Local criterion in dB; bins at or below it are suppressed.
    pub lc_db: f32,
    /// Magnitude floor added to both numerator and denominator of the SNR
    /// ratio, so 0/0 bins land at 0 dB.
    pub eps: f32,
}

impl Default for MaskConfig {
    /// LC defaults to 0 dB (speech-dominance reading of the criterion);
    /// tune per corpus if needed.
    fn default() -> Self {
        Self {
            lc_db: 0.0,
            eps: 1e-8,
        }
    }
}

fn check_shapes(a: &Spectrogram, b: &Spectrogram) -> Result<(), MaskError> {
    if a.magnitude.dim() != b.magnitude.dim() {
        return Err(MaskError::ShapeMismatch {
            left: a.magnitude.dim(),
            right: b.magnitude.dim(),
        });
    }
    Ok(())
}

/// Per-bin SNR in dB: `20 log10((|S| + eps) / (|N| + eps))`.
pub fn local_snr(
    clean: &Spectrogram,
    noise: &Spectrogram,
    eps: f32,
) -> Result<Array2<f32>, MaskError> {
    check_shapes(clean, noise)?;
    let mut out = Array2::zeros(clean.magnitude.dim());
    for ((idx, &s), &n) in clean.magnitude.indexed_iter().zip(noise.magnitude.iter()) {
        out[idx] = 20.0 * ((s + eps) / (n + eps)).log10();
    }
    Ok(out)
}

/// Oracle binary mask: 0 where `SNR(t,f) <= lc_db`, 1 otherwise.
pub fn ideal_binary_mask(
    clean: &Spectrogram,
    noise: &Spectrogram,
    cfg: &MaskConfig,
) -> Result<Mask, MaskError> {
    let snr = local_snr(clean, noise, cfg.eps)?;
    let values = snr.mapv(|v| if v <= cfg.lc_db { 0.0 } else { 1.0 });
    Ok(Mask { values })
}

/// Multiplies the noisy magnitude by the mask; phase is copied unchanged.
pub fn apply_mask(mask: &Mask, noisy: &Spectrogram) -> Result<Spectrogram, MaskError> {
    if mask.dim() != noisy.magnitude.dim() {
        return Err(MaskError::ShapeMismatch {
            left: mask.dim(),
            right: noisy.magnitude.dim(),
        });
    }
    let mut out = noisy.clone();
    out.magnitude = &noisy.magnitude * &mask.values;
    Ok(out)
}

/// Masked magnitude combined with the noisy phase, back to the time domain.
pub fn resynthesize(
    mask: &Mask,
    noisy: &Spectrogram,
    out_len: usize,
) -> Result<Waveform, MaskError> {
    let masked = apply_mask(mask, noisy)?;
    Ok(dsp::istft(&masked, out_len)?)
}

/// Outcome of the silent-region comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SilentRegionMse {
    /// Mean squared error over silent frames, with the frame count.
    Mse { mse: f64, silent_frames: usize },
    /// No frame fell below the silence floor.
    NoSilentFrames,
}

/// Mask error restricted to silent speech frames.
///
/// A frame is silent when its clean log-energy sits more than
/// `silence_floor_db` below the loudest frame of the utterance.
pub fn silent_region_mask_mse(
    pred: &Mask,
    ibm: &Mask,
    clean: &Spectrogram,
    silence_floor_db: f32,
) -> Result<SilentRegionMse, MaskError> {
    if pred.dim() != ibm.dim() {
        return Err(MaskError::ShapeMismatch {
            left: pred.dim(),
            right: ibm.dim(),
        });
    }
    if pred.dim() != clean.magnitude.dim() {
        return Err(MaskError::ShapeMismatch {
            left: pred.dim(),
            right: clean.magnitude.dim(),
        });
    }

    let frames = clean.frames();
    let energy_db: Vec<f32> = (0..frames)
        .map(|t| {
            let e: f32 = clean.magnitude.row(t).iter().map(|&m| m * m).sum();
            10.0 * (e + 1e-12).log10()
        })
        .collect();
    let max_db = energy_db.iter().cloned().fold(f32::NEG_INFINITY, f32::max);

    let mut sum = 0.0f64;
    let mut count = 0usize;
    let mut silent_frames = 0usize;
    for t in 0..frames {
        if energy_db[t] < max_db - silence_floor_db {
            silent_frames += 1;
            for f in 0..pred.dim().1 {
                let d = pred.values[(t, f)] as f64 - ibm.values[(t, f)] as f64;
                sum += d * d;
                count += 1;
            }
        }
    }
    if silent_frames == 0 {
        return Ok(SilentRegionMse::NoSilentFrames);
    }
    Ok(SilentRegionMse::Mse {
        mse: sum / count as f64,
        silent_frames,
    })
}

/// Default silence floor below the loudest frame, in dB.
pub const DEFAULT_SILENCE_FLOOR_DB: f32 = 40.0;
