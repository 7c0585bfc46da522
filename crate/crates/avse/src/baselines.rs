//! Classical single-channel enhancement baselines: spectral subtraction
//! and log-MMSE spectral amplitude estimation.
//!
//! Both estimate the noise from the initial frames of the signal (250 ms
//! by default), operate on the magnitude spectrogram, keep the noisy
//! phase, and preserve the input length.

use crate::dsp::{self, DspError, Spectrogram, StftConfig, Waveform};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum BaselineError {
    #[error("signal has {frames} frames but noise estimation needs {needed}")]
    SignalTooShort { frames: usize, needed: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// Number of leading frames that fit entirely inside `duration_s`.
fn frames_in(stft: &StftConfig, rate: u32, duration_s: f64) -> usize {
    let span = (duration_s * rate as f64) as usize;
    if span < stft.window_len() {
        1
    } else {
        (span - stft.window_len()) / stft.hop() + 1
    }
}

/// Spectral subtraction parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsConfig {
    /// Oversubtraction factor, >= 1.
    pub alpha: f32,
    /// Spectral floor as a fraction of the noisy magnitude, in (0, 1).
    pub beta: f32,
    /// Leading frames used for the noise estimate.
    pub noise_frames: usize,
}

impl SsConfig {
    pub fn new(alpha: f32, beta: f32, noise_frames: usize) -> Result<Self, BaselineError> {
        if alpha < 1.0 {
            return Err(BaselineError::InvalidConfig(format!(
                "oversubtraction {alpha} must be >= 1"
            )));
        }
        if !(0.0..1.0).contains(&beta) || beta == 0.0 {
            return Err(BaselineError::InvalidConfig(format!(
                "floor {beta} must be in (0, 1)"
            )));
        }
        if noise_frames == 0 {
            return Err(BaselineError::InvalidConfig(
                "noise_frames must be positive".into(),
            ));
        }
        Ok(Self {
            alpha,
            beta,
            noise_frames,
        })
    }

    /// alpha 2.0, beta 0.02, noise estimated from the first 250 ms.
    pub fn default_for(stft: &StftConfig, rate: u32) -> Self {
        Self {
            alpha: 2.0,
            beta: 0.02,
            noise_frames: frames_in(stft, rate, 0.25),
        }
    }
}

/// Masked spectrogram of spectral subtraction:
/// `max(|Y| - alpha * mean_noise, beta * |Y|)` with the noisy phase.
pub fn spectral_subtraction_spec(
    noisy: &Spectrogram,
    cfg: &SsConfig,
) -> Result<Spectrogram, BaselineError> {
    let frames = noisy.frames();
    if frames < cfg.noise_frames {
        return Err(BaselineError::SignalTooShort {
            frames,
            needed: cfg.noise_frames,
        });
    }
    let bins = noisy.bins();
    let mut noise_mag = vec![0.0f32; bins];
    for t in 0..cfg.noise_frames {
        for (b, acc) in noise_mag.iter_mut().enumerate() {
            *acc += noisy.magnitude[(t, b)];
        }
    }
    for acc in noise_mag.iter_mut() {
        *acc /= cfg.noise_frames as f32;
    }

    let mut out = noisy.clone();
    for t in 0..frames {
        for b in 0..bins {
            let y = noisy.magnitude[(t, b)];
            out.magnitude[(t, b)] = (y - cfg.alpha * noise_mag[b]).max(cfg.beta * y);
        }
    }
    Ok(out)
}

/// Spectral subtraction over a waveform; length-preserving.
pub fn spectral_subtraction(
    noisy: &Waveform,
    cfg: &SsConfig,
    stft_cfg: &StftConfig,
) -> Result<Waveform, BaselineError> {
    let spec = dsp::stft(noisy, stft_cfg, None)?;
    let masked = spectral_subtraction_spec(&spec, cfg)?;
    Ok(dsp::istft(&masked, noisy.len())?)
}

/// Log-MMSE parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmmseConfig {
    /// Decision-directed smoothing factor, in (0, 1).
    pub dd_smoothing: f32,
    /// A-priori SNR floor.
    pub xi_floor: f32,
    /// Lower gain bound; gains live in (gain_floor, 1].
    pub gain_floor: f32,
    /// Leading frames used for the noise PSD estimate.
    pub noise_frames: usize,
}

impl LmmseConfig {
    pub fn new(
        dd_smoothing: f32,
        xi_floor: f32,
        gain_floor: f32,
        noise_frames: usize,
    ) -> Result<Self, BaselineError> {
        if !(0.0..1.0).contains(&dd_smoothing) || dd_smoothing == 0.0 {
            return Err(BaselineError::InvalidConfig(format!(
                "smoothing {dd_smoothing} must be in (0, 1)"
            )));
        }
        if xi_floor <= 0.0 || gain_floor <= 0.0 || gain_floor >= 1.0 {
            return Err(BaselineError::InvalidConfig(
                "xi_floor must be > 0 and gain_floor in (0, 1)".into(),
            ));
        }
        if noise_frames == 0 {
            return Err(BaselineError::InvalidConfig(
                "noise_frames must be positive".into(),
            ));
        }
        Ok(Self {
            dd_smoothing,
            xi_floor,
            gain_floor,
            noise_frames,
        })
    }

    /// a = 0.98, floors at -25 dB, noise from the first 250 ms.
    pub fn default_for(stft: &StftConfig, rate: u32) -> Self {
        let floor = 10f32.powf(-25.0 / 10.0);
        Self {
            dd_smoothing: 0.98,
            xi_floor: floor,
            gain_floor: floor,
            noise_frames: frames_in(stft, rate, 0.25),
        }
    }
}

/// Exponential integral `E1(x)` for `x > 0`: series for small arguments,
/// continued fraction for large. Absolute error below 1e-10.
pub fn expint_e1(x: f64) -> f64 {
    const EULER: f64 = 0.577_215_664_901_532_9;
    assert!(x > 0.0, "E1 domain is x > 0");
    if x <= 1.0 {
        let mut sum = 0.0f64;
        let mut term = 1.0f64;
        for k in 1..=30 {
            term *= -x / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < 1e-16 {
                break;
            }
        }
        -EULER - x.ln() + sum
    } else {
        // modified Lentz continued fraction
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=200 {
            let a = -(i as f64) * (i as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-15 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// Log-MMSE masked spectrogram with decision-directed a-priori SNR.
pub fn log_mmse_spec(
    noisy: &Spectrogram,
    cfg: &LmmseConfig,
) -> Result<Spectrogram, BaselineError> {
    let frames = noisy.frames();
    if frames < cfg.noise_frames {
        return Err(BaselineError::SignalTooShort {
            frames,
            needed: cfg.noise_frames,
        });
    }
    let bins = noisy.bins();
    let mut noise_psd = vec![0.0f64; bins];
    for t in 0..cfg.noise_frames {
        for (b, acc) in noise_psd.iter_mut().enumerate() {
            let m = noisy.magnitude[(t, b)] as f64;
            *acc += m * m;
        }
    }
    for acc in noise_psd.iter_mut() {
        *acc = (*acc / cfg.noise_frames as f64).max(1e-20);
    }

    let a = cfg.dd_smoothing as f64;
    let xi_floor = cfg.xi_floor as f64;
    let gain_floor = cfg.gain_floor as f64;
    let mut prev_masked_psd = vec![0.0f64; bins];
    let mut out = noisy.clone();
    for t in 0..frames {
        for b in 0..bins {
            let y = noisy.magnitude[(t, b)] as f64;
            let gamma = (y * y / noise_psd[b]).min(1e8);
            let xi = if t == 0 {
                a + (1.0 - a) * (gamma - 1.0).max(0.0)
            } else {
                a * prev_masked_psd[b] / noise_psd[b] + (1.0 - a) * (gamma - 1.0).max(0.0)
            }
            .max(xi_floor);
            let v = (xi * gamma / (1.0 + xi)).max(1e-50);
            let gain = ((xi / (1.0 + xi)) * (0.5 * expint_e1(v)).exp()).clamp(gain_floor, 1.0);
            let masked = gain * y;
            out.magnitude[(t, b)] = masked as f32;
            prev_masked_psd[b] = masked * masked;
        }
    }
    Ok(out)
}

/// Log-MMSE enhancement over a waveform; length-preserving.
pub fn log_mmse(
    noisy: &Waveform,
    cfg: &LmmseConfig,
    stft_cfg: &StftConfig,
) -> Result<Waveform, BaselineError> {
    let spec = dsp::stft(noisy, stft_cfg, None)?;
    let masked = log_mmse_spec(&spec, cfg)?;
    Ok(dsp::istft(&masked, noisy.len())?)
}
