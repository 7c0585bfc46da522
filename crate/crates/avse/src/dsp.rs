//! STFT analysis/synthesis frontend and resampling.
//!
//! The analysis chain is magnitude/phase based: frames taken every `hop`
//! samples, Hann-windowed, zero-padded to `fft_len` and transformed. The
//! synthesis side is weighted overlap-add with window-squared normalization,
//! so `istft(stft(x))` reconstructs mid-signal samples to well above 50 dB
//! for any non-degenerate configuration.

use ndarray::Array2;
use rustfft::num_complex::Complex32;
use rustfft::FftPlanner;
use thiserror::Error;

/// Floor for the overlap-add normalization denominator.
const OLA_FLOOR: f32 = 1e-8;

#[derive(Error, Debug)]
pub enum DspError {
    #[error("signal is empty")]
    EmptySignal,
    #[error("sample {index} is not finite")]
    NonFiniteSample { index: usize },
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("invalid STFT config: {0}")]
    InvalidConfig(String),
    #[error("target_frames {target} is smaller than the natural frame count {natural}")]
    TargetFramesTooSmall { target: usize, natural: usize },
    #[error("spectrogram sample rate {spec} does not match signal rate {signal}")]
    SampleRateMismatch { spec: u32, signal: u32 },
}

/// Mono time-domain signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl Waveform {
    /// Builds a waveform, rejecting NaN/Inf samples and a zero sample rate.
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self, DspError> {
        if sample_rate == 0 {
            return Err(DspError::ZeroSampleRate);
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(DspError::NonFiniteSample { index });
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|&s| s as f64 * s as f64).sum()
    }

    pub fn peak(&self) -> f32 {
        self.samples.iter().fold(0.0f32, |m, &s| m.max(s.abs()))
    }
}

/// Periodic Hann window (denominator `N`), chosen for clean overlap-add.
pub fn hann_window(len: usize) -> Vec<f32> {
    let n = len as f64;
    (0..len)
        .map(|i| (0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n).cos()) as f32)
        .collect()
}

/// STFT framing parameters plus the analysis window.
#[derive(Debug, Clone, PartialEq)]
pub struct StftConfig {
    window_len: usize,
    fft_len: usize,
    hop: usize,
    window: Vec<f32>,
}

impl StftConfig {
    /// Hann-windowed config. Rejects inconsistent sizes and configurations
    /// whose steady-state overlap-add denominator vanishes somewhere.
    pub fn new(window_len: usize, fft_len: usize, hop: usize) -> Result<Self, DspError> {
        if hop == 0 || window_len == 0 {
            return Err(DspError::InvalidConfig(
                "window_len and hop must be positive".into(),
            ));
        }
        if !(hop <= window_len && window_len <= fft_len) {
            return Err(DspError::InvalidConfig(format!(
                "need hop <= window_len <= fft_len, got hop={hop} window={window_len} fft={fft_len}"
            )));
        }
        let window = hann_window(window_len);
        let cfg = Self {
            window_len,
            fft_len,
            hop,
            window,
        };
        // Steady-state denominator at sample offset r is the sum of w^2 over
        // window positions r, r+hop, r+2*hop, ... A zero there would make
        // mid-signal samples unrecoverable.
        let denom_min = (0..hop)
            .map(|r| cfg.steady_denominator(r))
            .fold(f32::INFINITY, f32::min);
        if denom_min <= OLA_FLOOR {
            return Err(DspError::InvalidConfig(format!(
                "degenerate overlap-add: window-squared sum reaches {denom_min:e}"
            )));
        }
        Ok(cfg)
    }

    /// 16 kHz preset: 1242-sample Hann frames (fft 1242, hop 213) giving
    /// 622 frequency bins and 75 frames per second.
    pub fn preset_full() -> Self {
        Self::new(1242, 1242, 213).expect("full preset is valid")
    }

    /// Small 16 kHz preset: 400-sample frames zero-padded to a 512 FFT
    /// (257 bins), same 213-sample hop.
    pub fn preset_desk() -> Self {
        Self::new(400, 512, 213).expect("desk preset is valid")
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn fft_len(&self) -> usize {
        self.fft_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn window(&self) -> &[f32] {
        &self.window
    }

    /// Number of frequency bins: `fft_len / 2 + 1`.
    pub fn bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// Frame count needed to cover `len` samples (the last frame may run
    /// past the end; the overhang is zero-padded).
    pub fn natural_frames(&self, len: usize) -> usize {
        if len <= self.window_len {
            1
        } else {
            1 + (len - self.window_len).div_ceil(self.hop)
        }
    }

    /// Sample span of `frames` consecutive frames.
    pub fn span_of_frames(&self, frames: usize) -> usize {
        assert!(frames >= 1);
        (frames - 1) * self.hop + self.window_len
    }

    fn steady_denominator(&self, offset: usize) -> f32 {
        let mut acc = 0.0f32;
        let mut o = offset;
        while o < self.window_len {
            acc += self.window[o] * self.window[o];
            o += self.hop;
        }
        acc
    }
}

/// Magnitude/phase planes of shape `[frames, bins]`.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    pub magnitude: Array2<f32>,
    pub phase: Array2<f32>,
    pub config: StftConfig,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn frames(&self) -> usize {
        self.magnitude.nrows()
    }

    pub fn bins(&self) -> usize {
        self.magnitude.ncols()
    }

    pub fn same_shape(&self, other: &Spectrogram) -> bool {
        self.magnitude.dim() == other.magnitude.dim()
    }
}

/// Short-time Fourier transform.
///
/// Frames are taken at offsets `k * hop`, windowed, zero-padded to `fft_len`
/// and transformed; magnitude and phase of bins `0..=fft_len/2` are kept.
/// With `target_frames` the signal is treated as tail-padded with zeros so
/// exactly that many frames are produced.
pub fn stft(
    signal: &Waveform,
    cfg: &StftConfig,
    target_frames: Option<usize>,
) -> Result<Spectrogram, DspError> {
    if signal.is_empty() {
        return Err(DspError::EmptySignal);
    }
    let natural = cfg.natural_frames(signal.len());
    let frames = match target_frames {
        Some(target) if target < natural => {
            return Err(DspError::TargetFramesTooSmall { target, natural });
        }
        Some(target) => target,
        None => natural,
    };

    let bins = cfg.bins();
    let mut magnitude = Array2::zeros((frames, bins));
    let mut phase = Array2::zeros((frames, bins));

    let mut planner = FftPlanner::<f32>::new();
    let fft = planner.plan_fft_forward(cfg.fft_len);
    let mut buf = vec![Complex32::default(); cfg.fft_len];
    let mut scratch = vec![Complex32::default(); fft.get_inplace_scratch_len()];

    let x = signal.samples();
    for k in 0..frames {
        let start = k * cfg.hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            let v = if i < cfg.window_len {
                x.get(start + i).copied().unwrap_or(0.0) * cfg.window[i]
            } else {
                0.0
            };
            *slot = Complex32::new(v, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (b, c) in buf.iter().take(bins).enumerate() {
            let mag = c.norm();
            magnitude[(k, b)] = mag;
            phase[(k, b)] = if mag == 0.0 {
                0.0
            } else {
                let p = c.im.atan2(c.re);
                // keep the convention (-pi, pi]
                if p == -std::f32::consts::PI {
                    std::f32::consts::PI
                } else {
                    p
                }
            };
        }
    }

    Ok(Spectrogram {
        magnitude,
        phase,
        config: cfg.clone(),
        sample_rate: signal.sample_rate(),
    })
}

/// Inverse STFT via weighted overlap-add with window-squared normalization.
/// The output is truncated or zero-padded to `out_len` samples.
pub fn istft(spec: &Spectrogram, out_len: usize) -> Result<Waveform, DspError> {
    let cfg = &spec.config;
    let frames = spec.frames();
    let bins = spec.bins();
    let full_len = cfg.span_of_frames(frames.max(1));

    let mut planner = FftPlanner::<f32>::new();
    let ifft = planner.plan_fft_inverse(cfg.fft_len);
    let mut buf = vec![Complex32::default(); cfg.fft_len];
    let mut scratch = vec![Complex32::default(); ifft.get_inplace_scratch_len()];

    let mut num = vec![0.0f32; full_len];
    let mut den = vec![0.0f32; full_len];
    let scale = 1.0 / cfg.fft_len as f32;

    for k in 0..frames {
        // rebuild the full Hermitian spectrum from the half-plane
        for b in 0..bins {
            let (mag, ph) = (spec.magnitude[(k, b)], spec.phase[(k, b)]);
            buf[b] = Complex32::from_polar(mag, ph);
        }
        for b in bins..cfg.fft_len {
            buf[b] = buf[cfg.fft_len - b].conj();
        }
        ifft.process_with_scratch(&mut buf, &mut scratch);

        let start = k * cfg.hop;
        for i in 0..cfg.window_len {
            let w = cfg.window[i];
            num[start + i] += w * buf[i].re * scale;
            den[start + i] += w * w;
        }
    }

    let mut out = vec![0.0f32; out_len];
    for (i, slot) in out.iter_mut().enumerate().take(full_len.min(out_len)) {
        *slot = num[i] / den[i].max(OLA_FLOOR);
    }
    Waveform::new(out, spec.sample_rate)
}

/// Windowed-sinc resampler. Output length is `round(len * target / source)`;
/// per-sample kernel-sum normalization keeps DC exact.
pub fn resample(signal: &Waveform, target_rate: u32) -> Result<Waveform, DspError> {
    if target_rate == 0 {
        return Err(DspError::ZeroSampleRate);
    }
    let src_rate = signal.sample_rate();
    if target_rate == src_rate {
        return Ok(signal.clone());
    }
    let x = signal.samples();
    let ratio = target_rate as f64 / src_rate as f64;
    let out_len = (x.len() as f64 * ratio).round() as usize;

    // cutoff relative to the source Nyquist; widen the kernel when
    // downsampling so it still spans enough lobes
    let fc = ratio.min(1.0);
    let half_width = (16.0 / fc).ceil();

    let mut out = vec![0.0f32; out_len];
    for (m, slot) in out.iter_mut().enumerate() {
        let center = m as f64 / ratio;
        let lo = (center - half_width).ceil() as i64;
        let hi = (center + half_width).floor() as i64;
        let mut acc = 0.0f64;
        let mut wsum = 0.0f64;
        for j in lo..=hi {
            if j < 0 || j as usize >= x.len() {
                continue;
            }
            let u = j as f64 - center;
            let s = sinc(fc * u) * fc;
            let taper = 0.5 + 0.5 * (std::f64::consts::PI * u / half_width).cos();
            let w = s * taper;
            acc += w * x[j as usize] as f64;
            wsum += w;
        }
        *slot = if wsum.abs() > 1e-12 {
            (acc / wsum) as f32
        } else {
            0.0
        };
    }
    Waveform::new(out, target_rate)
}

fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-12 {
        1.0
    } else {
        let p = std::f64::consts::PI * u;
        p.sin() / p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;

    /// Naive O(N^2) DFT of a real frame; the independent oracle for stft.
    fn dft_magnitude(frame: &[f32], fft_len: usize) -> Vec<f64> {
        let bins = fft_len / 2 + 1;
        (0..bins)
            .map(|b| {
                let mut re = 0.0f64;
                let mut im = 0.0f64;
                for (n, &v) in frame.iter().enumerate() {
                    let ang = -2.0 * std::f64::consts::PI * b as f64 * n as f64 / fft_len as f64;
                    re += v as f64 * ang.cos();
                    im += v as f64 * ang.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    fn sine(freq: f64, rate: u32, len: usize, amp: f32) -> Waveform {
        let w = (0..len)
            .map(|n| amp * (2.0 * std::f64::consts::PI * freq * n as f64 / rate as f64).sin() as f32)
            .collect();
        Waveform::new(w, rate).unwrap()
    }

    fn random_signal(seed: u64, len: usize, rate: u32) -> Waveform {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let samples = (0..len).map(|_| rng.gen_range(-0.8f32..0.8)).collect();
        Waveform::new(samples, rate).unwrap()
    }

    /// SNR in dB of `rec` against `orig` over `range`.
    fn reconstruction_snr(orig: &[f32], rec: &[f32], range: std::ops::Range<usize>) -> f64 {
        let mut sig = 0.0f64;
        let mut err = 0.0f64;
        for i in range {
            sig += (orig[i] as f64).powi(2);
            err += (orig[i] as f64 - rec[i] as f64).powi(2);
        }
        10.0 * (sig / err.max(1e-30)).log10()
    }

    #[test]
    fn waveform_rejects_non_finite() {
        let err = Waveform::new(vec![0.0, f32::NAN], 16000).unwrap_err();
        assert!(matches!(err, DspError::NonFiniteSample { index: 1 }));
        assert!(Waveform::new(vec![0.0], 0).is_err());
    }

    #[test]
    fn full_preset_has_622_bins() {
        let cfg = StftConfig::preset_full();
        assert_eq!(cfg.bins(), 622);
        assert_eq!(StftConfig::preset_desk().bins(), 257);
    }

    #[test]
    fn window_is_symmetric_and_bounded() {
        for len in [400, 512, 1242] {
            let w = hann_window(len);
            for (i, &v) in w.iter().enumerate() {
                assert!((0.0..=1.0).contains(&v));
                assert_relative_eq!(v, w[(len - i) % len], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn degenerate_hop_equals_window_rejected() {
        // periodic Hann has w[0] = 0, so hop == window leaves gaps
        let err = StftConfig::new(512, 512, 512).unwrap_err();
        assert!(matches!(err, DspError::InvalidConfig(_)));
    }

    #[test]
    fn stft_zero_input_gives_zero_magnitude() {
        let cfg = StftConfig::preset_desk();
        let x = Waveform::new(vec![0.0; 16000], 16000).unwrap();
        let spec = stft(&x, &cfg, None).unwrap();
        assert!(spec.magnitude.iter().all(|&m| m == 0.0));
        assert!(spec.phase.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn stft_full_preset_3s_target_shape() {
        let cfg = StftConfig::preset_full();
        let x = random_signal(7, 48000, 16000);
        let spec = stft(&x, &cfg, Some(225)).unwrap();
        assert_eq!(spec.magnitude.dim(), (225, 622));
        assert_eq!(spec.phase.dim(), (225, 622));
        // padded span covers 224*213 + 1242 samples
        assert_eq!(cfg.span_of_frames(225), 48954);
    }

    #[test]
    fn stft_target_below_natural_rejected() {
        let cfg = StftConfig::preset_desk();
        let x = random_signal(8, 16000, 16000);
        let natural = cfg.natural_frames(16000);
        let err = stft(&x, &cfg, Some(natural - 1)).unwrap_err();
        assert!(matches!(err, DspError::TargetFramesTooSmall { .. }));
    }

    #[test]
    fn stft_sine_peak_bin_matches_dft_oracle() {
        // 1 kHz at 16 kHz, 512-point FFT: bin 32
        let cfg = StftConfig::preset_desk();
        let x = sine(1000.0, 16000, 16000, 0.7);
        let spec = stft(&x, &cfg, None).unwrap();
        for k in 0..spec.frames().min(20) {
            let row = spec.magnitude.row(k);
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(argmax, 32, "frame {k}");

            // cross-check the whole frame against the naive DFT
            let start = k * cfg.hop();
            let frame: Vec<f32> = (0..cfg.window_len())
                .map(|i| x.samples().get(start + i).copied().unwrap_or(0.0) * cfg.window()[i])
                .collect();
            let oracle = dft_magnitude(&frame, cfg.fft_len());
            for (b, &m) in oracle.iter().enumerate() {
                assert!(
                    (spec.magnitude[(k, b)] as f64 - m).abs() <= 1e-2 + 1e-4 * m,
                    "frame {k} bin {b}: {} vs oracle {m}",
                    spec.magnitude[(k, b)]
                );
            }
        }
    }

    #[test]
    fn stft_linearity_in_amplitude() {
        let cfg = StftConfig::preset_desk();
        let x = random_signal(21, 8000, 16000);
        let scaled = Waveform::new(x.samples().iter().map(|&s| 0.25 * s).collect(), 16000).unwrap();
        let a = stft(&x, &cfg, None).unwrap();
        let b = stft(&scaled, &cfg, None).unwrap();
        for (ma, mb) in a.magnitude.iter().zip(b.magnitude.iter()) {
            assert!((0.25 * ma - mb).abs() <= 1e-6 * ma.max(1.0));
        }
    }

    #[test]
    fn parseval_per_frame() {
        let cfg = StftConfig::preset_desk();
        let x = random_signal(3, 4000, 16000);
        let spec = stft(&x, &cfg, None).unwrap();
        for k in 0..spec.frames() {
            let start = k * cfg.hop();
            let frame_energy: f64 = (0..cfg.window_len())
                .map(|i| {
                    let v = x.samples().get(start + i).copied().unwrap_or(0.0) * cfg.window()[i];
                    (v as f64).powi(2)
                })
                .sum();
            // fold the half spectrum back to full-spectrum energy
            let mut spec_energy = 0.0f64;
            for b in 0..spec.bins() {
                let m = spec.magnitude[(k, b)] as f64;
                let w = if b == 0 || b == spec.bins() - 1 { 1.0 } else { 2.0 };
                spec_energy += w * m * m;
            }
            spec_energy /= cfg.fft_len() as f64;
            assert!(
                (frame_energy - spec_energy).abs() <= 1e-6 * frame_energy.max(1e-9),
                "frame {k}: {frame_energy} vs {spec_energy}"
            );
        }
    }

    #[test]
    fn istft_round_trip_both_presets() {
        for cfg in [StftConfig::preset_full(), StftConfig::preset_desk()] {
            let x = random_signal(42, 48000, 16000);
            let spec = stft(&x, &cfg, None).unwrap();
            let y = istft(&spec, x.len()).unwrap();
            let w = cfg.window_len();
            let snr = reconstruction_snr(x.samples(), y.samples(), w..x.len() - w);
            assert!(snr > 50.0, "round-trip SNR {snr} dB (window {w})");
        }
    }

    #[test]
    fn istft_zero_spectrogram_is_silence() {
        let cfg = StftConfig::preset_desk();
        let spec = Spectrogram {
            magnitude: Array2::zeros((10, cfg.bins())),
            phase: Array2::zeros((10, cfg.bins())),
            config: cfg,
            sample_rate: 16000,
        };
        let y = istft(&spec, 4000).unwrap();
        assert!(y.samples().iter().all(|&s| s == 0.0));
        assert_eq!(y.len(), 4000);
    }

    #[test]
    fn istft_single_frame_matches_closed_form() {
        let cfg = StftConfig::new(64, 64, 16).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let frame: Vec<f32> = (0..64).map(|_| rng.gen_range(-1.0f32..1.0)).collect();

        // analysis of exactly one frame
        let x = Waveform::new(frame.clone(), 16000).unwrap();
        let spec = stft(&x, &cfg, Some(1)).unwrap();
        assert_eq!(spec.frames(), 1);
        let y = istft(&spec, 64).unwrap();

        // oracle: w^2 x / max(w^2, floor)
        for i in 0..64 {
            let w = cfg.window()[i];
            let expect = (w * w * frame[i]) / (w * w).max(OLA_FLOOR);
            assert!(
                (y.samples()[i] - expect).abs() < 1e-4,
                "sample {i}: {} vs {expect}",
                y.samples()[i]
            );
        }
    }

    #[test]
    fn resample_identity_same_rate() {
        let x = random_signal(9, 1000, 16000);
        let y = resample(&x, 16000).unwrap();
        assert_eq!(x.samples(), y.samples());
    }

    #[test]
    fn resample_preserves_dc() {
        let x = Waveform::new(vec![0.5; 44100], 44100).unwrap();
        let y = resample(&x, 16000).unwrap();
        assert_eq!(y.len(), 16000);
        for &s in &y.samples()[100..y.len() - 100] {
            assert!((s - 0.5).abs() < 1e-3, "{s}");
        }
    }

    #[test]
    fn resample_keeps_tone_at_1khz() {
        let x = sine(1000.0, 44100, 44100, 0.7);
        let y = resample(&x, 16000).unwrap();
        // direct DFT over a mid slice; dominant bin should sit at 1 kHz
        let n = 4096;
        let slice = &y.samples()[4000..4000 + n];
        let mags = dft_magnitude(slice, n);
        let argmax = mags
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let freq = argmax as f64 * 16000.0 / n as f64;
        assert!((freq - 1000.0).abs() < 16000.0 / n as f64 * 1.5, "{freq}");
    }

    #[test]
    fn natural_frames_examples() {
        let cfg = StftConfig::preset_full();
        assert_eq!(cfg.natural_frames(48000), 221);
        assert_eq!(cfg.natural_frames(1242), 1);
        assert_eq!(cfg.natural_frames(1), 1);
        let desk = StftConfig::preset_desk();
        assert_eq!(desk.natural_frames(400), 1);
        assert_eq!(desk.natural_frames(401), 2);
    }
}
