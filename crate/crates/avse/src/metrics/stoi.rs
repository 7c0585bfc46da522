//! Short-time objective intelligibility.
//!
//! The classic construction: both signals resampled to 10 kHz, silent
//! frames removed by the reference's 40 dB activity range, 256-sample
//! half-overlapped Hann frames zero-padded to a 512-point FFT, 15
//! one-third-octave bands from 150 Hz, and per-band correlations of
//! normalized, clipped 30-frame envelope segments, averaged over all
//! bands and segments.

use crate::dsp::{self, Waveform};
use crate::metrics::MetricError;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

const STOI_FS: u32 = 10_000;
const FRAME: usize = 256;
const HOP: usize = 128;
const NFFT: usize = 512;
const N_BANDS: usize = 15;
const SEG_LEN: usize = 30;
const DYN_RANGE_DB: f64 = 40.0;
/// Lower SDR bound of the clipping step, in dB.
const BETA_DB: f64 = -15.0;
/// Minimum speech-active duration after silence removal.
const MIN_ACTIVE_S: f64 = 0.5;
const EPS: f64 = 1e-15;

/// Interior Hann window: `hanning(n + 2)` with the zero endpoints dropped.
fn hann_interior(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            0.5 - 0.5 * (2.0 * std::f64::consts::PI * (i + 1) as f64 / (n + 1) as f64).cos()
        })
        .collect()
}

fn frame_count(len: usize) -> usize {
    if len < FRAME {
        0
    } else {
        (len - FRAME) / HOP + 1
    }
}

/// Drops frames whose reference energy is more than 40 dB below the
/// loudest reference frame; both signals are rebuilt by overlap-adding the
/// kept windowed frames.
fn remove_silent_frames(reference: &[f64], estimate: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let w = hann_interior(FRAME);
    let n = frame_count(reference.len());
    let mut energies = Vec::with_capacity(n);
    for k in 0..n {
        let e: f64 = (0..FRAME)
            .map(|i| {
                let v = reference[k * HOP + i] * w[i];
                v * v
            })
            .sum();
        energies.push(20.0 * (e.sqrt() + EPS).log10());
    }
    let max_e = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<usize> = (0..n)
        .filter(|&k| energies[k] > max_e - DYN_RANGE_DB)
        .collect();

    let out_len = if kept.is_empty() {
        0
    } else {
        (kept.len() - 1) * HOP + FRAME
    };
    let mut r = vec![0.0f64; out_len];
    let mut e = vec![0.0f64; out_len];
    for (slot, &k) in kept.iter().enumerate() {
        for i in 0..FRAME {
            r[slot * HOP + i] += reference[k * HOP + i] * w[i];
            e[slot * HOP + i] += estimate[k * HOP + i] * w[i];
        }
    }
    (r, e)
}

/// Power spectrogram `[frames, 257]` with the interior Hann window.
fn power_spectrogram(x: &[f64]) -> Vec<Vec<f64>> {
    let w = hann_interior(FRAME);
    let n = frame_count(x.len());
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(NFFT);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];

    (0..n)
        .map(|k| {
            let mut buf = vec![Complex64::default(); NFFT];
            for i in 0..FRAME {
                buf[i] = Complex64::new(x[k * HOP + i] * w[i], 0.0);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            buf.iter().take(NFFT / 2 + 1).map(|c| c.norm_sqr()).collect()
        })
        .collect()
}

/// One-third-octave band edges as FFT bin ranges `[lo, hi)` for centers
/// `150 * 2^(k/3)`.
fn band_edges() -> [(usize, usize); N_BANDS] {
    let bins = NFFT / 2 + 1;
    let bin_freq = |j: usize| j as f64 * STOI_FS as f64 / NFFT as f64;
    let argmin = |target: f64| {
        (0..bins)
            .min_by(|&a, &b| {
                (bin_freq(a) - target)
                    .abs()
                    .partial_cmp(&(bin_freq(b) - target).abs())
                    .unwrap()
            })
            .unwrap()
    };
    let mut edges = [(0usize, 0usize); N_BANDS];
    for (k, e) in edges.iter_mut().enumerate() {
        let cf = 150.0 * 2f64.powf(k as f64 / 3.0);
        let lo = cf * 2f64.powf(-1.0 / 6.0);
        let hi = cf * 2f64.powf(1.0 / 6.0);
        *e = (argmin(lo), argmin(hi));
    }
    edges
}

/// STOI score of `estimate` against `reference`, both at sample rate `fs`.
pub fn stoi(estimate: &Waveform, reference: &Waveform, fs: u32) -> Result<f64, MetricError> {
    if estimate.len() != reference.len() {
        return Err(MetricError::LengthMismatch {
            estimate: estimate.len(),
            reference: reference.len(),
        });
    }
    if estimate.sample_rate() != fs || reference.sample_rate() != fs {
        return Err(MetricError::SampleRateMismatch {
            got: estimate.sample_rate(),
            stated: fs,
        });
    }
    let (est10, ref10) = if fs == STOI_FS {
        (estimate.clone(), reference.clone())
    } else {
        (
            dsp::resample(estimate, STOI_FS)?,
            dsp::resample(reference, STOI_FS)?,
        )
    };
    let ref64: Vec<f64> = ref10.samples().iter().map(|&v| v as f64).collect();
    let est64: Vec<f64> = est10.samples().iter().map(|&v| v as f64).collect();

    let (r_act, e_act) = remove_silent_frames(&ref64, &est64);
    let active_s = r_act.len() as f64 / STOI_FS as f64;
    if active_s < MIN_ACTIVE_S || frame_count(r_act.len()) < SEG_LEN {
        return Err(MetricError::TooShort { active_s });
    }

    let r_spec = power_spectrogram(&r_act);
    let e_spec = power_spectrogram(&e_act);
    let edges = band_edges();
    let frames = r_spec.len();
    let band_env = |spec: &[Vec<f64>]| -> Vec<[f64; N_BANDS]> {
        spec.iter()
            .map(|row| {
                let mut out = [0.0f64; N_BANDS];
                for (k, &(lo, hi)) in edges.iter().enumerate() {
                    out[k] = row[lo..hi].iter().sum::<f64>().sqrt();
                }
                out
            })
            .collect()
    };
    let x = band_env(&r_spec);
    let y = band_env(&e_spec);

    let clip = 10f64.powf(-BETA_DB / 20.0);
    let mut total = 0.0f64;
    let mut count = 0usize;
    for m in SEG_LEN - 1..frames {
        for j in 0..N_BANDS {
            let xs: Vec<f64> = (m + 1 - SEG_LEN..=m).map(|t| x[t][j]).collect();
            let ys: Vec<f64> = (m + 1 - SEG_LEN..=m).map(|t| y[t][j]).collect();
            let xn = xs.iter().map(|v| v * v).sum::<f64>().sqrt();
            let yn = ys.iter().map(|v| v * v).sum::<f64>().sqrt();
            let alpha = xn / (yn + EPS);
            let clipped: Vec<f64> = ys
                .iter()
                .zip(&xs)
                .map(|(&yv, &xv)| (alpha * yv).min((1.0 + clip) * xv))
                .collect();

            let mx = xs.iter().sum::<f64>() / SEG_LEN as f64;
            let my = clipped.iter().sum::<f64>() / SEG_LEN as f64;
            let mut num = 0.0;
            let mut dx = 0.0;
            let mut dy = 0.0;
            for t in 0..SEG_LEN {
                let a = xs[t] - mx;
                let b = clipped[t] - my;
                num += a * b;
                dx += a * a;
                dy += b * b;
            }
            total += num / (dx.sqrt() * dy.sqrt() + EPS);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mix::mix_at_snr;
    use crate::synth;
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn identical_signals_score_one() {
        let x = synth::speech_like(1, 2.0, 16000);
        let score = stoi(&x, &x, 16000).unwrap();
        assert!((score - 1.0).abs() < 1e-6, "{score}");
    }

    #[test]
    fn score_decreases_with_noise_level() {
        let clean = synth::speech_like(2, 3.0, 16000);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let noise = Waveform::new(
            (0..clean.len())
                .map(|_| rng.gen_range(-0.5f32..0.5))
                .collect(),
            16000,
        )
        .unwrap();
        let mut scores = Vec::new();
        for snr in [10.0, 0.0, -10.0] {
            let mix = mix_at_snr(&clean, &noise, 0, snr).unwrap();
            scores.push(stoi(&mix.mixture, &mix.clean, 16000).unwrap());
        }
        assert!(
            scores[0] > scores[1] && scores[1] > scores[2],
            "{scores:?}"
        );
    }

    #[test]
    fn scores_stay_in_correlation_bounds() {
        let clean = synth::speech_like(4, 2.0, 16000);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let unrelated = Waveform::new(
            (0..clean.len())
                .map(|_| rng.gen_range(-0.5f32..0.5))
                .collect(),
            16000,
        )
        .unwrap();
        let score = stoi(&unrelated, &clean, 16000).unwrap();
        assert!((-1.0..=1.0).contains(&score), "{score}");
    }

    #[test]
    fn too_short_signal_is_rejected() {
        let x = synth::speech_like(6, 0.3, 16000);
        assert!(matches!(
            stoi(&x, &x, 16000),
            Err(MetricError::TooShort { .. })
        ));
    }

    #[test]
    fn band_edges_are_monotone_and_in_range() {
        let edges = band_edges();
        let mut prev_hi = 0;
        for (k, &(lo, hi)) in edges.iter().enumerate() {
            assert!(lo < hi, "band {k}: [{lo}, {hi})");
            assert!(lo >= prev_hi, "band {k} overlaps previous");
            assert!(hi <= NFFT / 2 + 1);
            prev_hi = hi;
        }
        // highest center 150 * 2^(14/3) ~ 3810 Hz stays under Nyquist
        let cf = 150.0 * 2f64.powf(14.0 / 3.0);
        assert!(cf < 5000.0);
    }

    #[test]
    fn silence_removal_drops_quiet_frames() {
        // half a second of speech-scale signal, then near-silence
        let mut samples = vec![0.0f64; 20000];
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        for s in samples.iter_mut().take(10000) {
            *s = rng.gen_range(-0.5..0.5);
        }
        for s in samples.iter_mut().skip(10000) {
            *s = rng.gen_range(-1e-6..1e-6);
        }
        let (kept, _) = remove_silent_frames(&samples, &samples);
        assert!(kept.len() < 12000, "kept {} samples", kept.len());
    }
}
