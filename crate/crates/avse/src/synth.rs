//! Seeded synthetic signals for tests and demos.
//!
//! `speech_like` produces harmonic, formant-shaped, syllabically modulated
//! tones with silence gaps; the noise generators cover broadband and
//! structured interferers. These stand in for a speech corpus at desk
//! scale: they have the spectro-temporal structure a mask estimator needs
//! to learn from, while remaining fully reproducible.

use crate::dsp::Waveform;
use crate::model::lips::{LipSequence, LIP_FPS, LIP_HEIGHT, LIP_WIDTH};
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Speech-like signal: pitch drift, two moving formants, syllabic
/// amplitude bursts separated by pauses. Peak-normalized to 0.5.
pub fn speech_like(seed: u64, dur_s: f64, rate: u32) -> Waveform {
    speech_with_envelope(seed, dur_s, rate).0
}

/// As [`speech_like`], additionally returning the amplitude envelope
/// sampled at the video frame rate (25 fps).
pub fn speech_with_envelope(seed: u64, dur_s: f64, rate: u32) -> (Waveform, Vec<f32>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = (dur_s * rate as f64).round() as usize;
    let dt = 1.0 / rate as f64;

    // syllable on/off envelope
    let mut env = vec![0.0f32; n];
    let mut pos = 0usize;
    while pos < n {
        let burst = (rng.gen_range(0.12..0.35) * rate as f64) as usize;
        let gap = (rng.gen_range(0.05..0.25) * rate as f64) as usize;
        let end = (pos + burst).min(n);
        let len = end - pos;
        for i in 0..len {
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / len as f64).cos();
            env[pos + i] = w as f32;
        }
        pos = end + gap;
    }

    let mut f0: f64 = rng.gen_range(95.0..220.0);
    let f0_drift = rng.gen_range(-8.0..8.0);
    let mut formant1: f64 = rng.gen_range(300.0..700.0);
    let mut formant2: f64 = rng.gen_range(900.0..2100.0);
    let nyquist = rate as f64 / 2.0;
    let n_harm = ((4000.0 / f0).floor() as usize).clamp(4, 40);

    let mut phases = vec![0.0f64; n_harm];
    let mut gains = vec![0.0f64; n_harm];
    let mut samples = vec![0.0f32; n];
    for (i, s) in samples.iter_mut().enumerate() {
        if i % 160 == 0 {
            // refresh the slow controls every 10 ms
            f0 = (f0 + f0_drift * 0.01 + rng.gen_range(-1.5..1.5)).clamp(85.0, 260.0);
            formant1 = (formant1 + rng.gen_range(-12.0..12.0)).clamp(250.0, 900.0);
            formant2 = (formant2 + rng.gen_range(-20.0..20.0)).clamp(800.0, 2400.0);
            for (k, gain) in gains.iter_mut().enumerate() {
                let f = (k + 1) as f64 * f0;
                if f >= nyquist {
                    *gain = 0.0;
                    continue;
                }
                let tilt = 1.0 / (k + 1) as f64;
                let r1 = ((f - formant1) / 160.0).powi(2);
                let r2 = ((f - formant2) / 220.0).powi(2);
                *gain = tilt * (0.4 + 2.0 * (-r1).exp() + 1.2 * (-r2).exp());
            }
        }
        let mut acc = 0.0f64;
        for k in 0..n_harm {
            phases[k] += 2.0 * std::f64::consts::PI * (k + 1) as f64 * f0 * dt;
            if gains[k] > 0.0 {
                acc += gains[k] * phases[k].sin();
            }
        }
        let breath = rng.gen_range(-1.0f64..1.0) * 0.02;
        *s = (env[i] as f64 * (acc + breath)) as f32;
    }

    let peak = samples.iter().fold(0.0f32, |m, &v| m.max(v.abs()));
    if peak > 0.0 {
        let scale = 0.5 / peak;
        for s in samples.iter_mut() {
            *s *= scale;
        }
    }

    let spf = rate as usize / LIP_FPS as usize;
    let frames = n.div_ceil(spf);
    let envelope = (0..frames)
        .map(|f| {
            let lo = f * spf;
            let hi = ((f + 1) * spf).min(n);
            env[lo..hi].iter().sum::<f32>() / (hi - lo).max(1) as f32
        })
        .collect();
    (
        Waveform::new(samples, rate).expect("finite synth output"),
        envelope,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    White,
    Pink,
    /// Mains-style hum plus a broadband floor.
    Hum,
    /// Pink noise with slow crowd-like amplitude modulation.
    Modulated,
}

impl NoiseKind {
    pub fn all() -> [NoiseKind; 4] {
        [
            NoiseKind::White,
            NoiseKind::Pink,
            NoiseKind::Hum,
            NoiseKind::Modulated,
        ]
    }
}

/// Seeded noise generator, peak-normalized to 0.5.
pub fn noise_like(kind: NoiseKind, seed: u64, dur_s: f64, rate: u32) -> Waveform {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = (dur_s * rate as f64).round() as usize;
    let mut samples = vec![0.0f32; n];
    match kind {
        NoiseKind::White => {
            for s in samples.iter_mut() {
                *s = rng.gen_range(-1.0..1.0);
            }
        }
        NoiseKind::Pink => {
            pink(&mut rng, &mut samples);
        }
        NoiseKind::Hum => {
            let base = 50.0;
            for (i, s) in samples.iter_mut().enumerate() {
                let t = i as f64 / rate as f64;
                let mut acc = 0.0;
                for (k, a) in [(1.0, 1.0), (2.0, 0.5), (3.0, 0.33), (4.0, 0.2)] {
                    acc += a * (2.0 * std::f64::consts::PI * base * k * t).sin();
                }
                *s = (acc * 0.5) as f32 + rng.gen_range(-0.1f32..0.1);
            }
        }
        NoiseKind::Modulated => {
            pink(&mut rng, &mut samples);
            let mut mod_rng = ChaCha20Rng::seed_from_u64(seed ^ 0xA5A5_A5A5);
            let mut level = 1.0f64;
            let mut target = mod_rng.gen_range(0.3..1.0);
            for (i, s) in samples.iter_mut().enumerate() {
                if i % 800 == 0 {
                    target = mod_rng.gen_range(0.25..1.0);
                }
                level += (target - level) * 0.002;
                *s = (*s as f64 * level) as f32;
            }
        }
    }
    let peak = samples.iter().fold(0.0f32, |m, &v| m.max(v.abs()));
    if peak > 0.0 {
        let scale = 0.5 / peak;
        for s in samples.iter_mut() {
            *s *= scale;
        }
    }
    Waveform::new(samples, rate).expect("finite noise")
}

/// Paul Kellet's economy pink-noise filter.
fn pink(rng: &mut ChaCha20Rng, out: &mut [f32]) {
    let (mut b0, mut b1, mut b2) = (0.0f64, 0.0f64, 0.0f64);
    for s in out.iter_mut() {
        let white: f64 = rng.gen_range(-1.0..1.0);
        b0 = 0.99765 * b0 + white * 0.0990460;
        b1 = 0.96300 * b1 + white * 0.2965164;
        b2 = 0.57000 * b2 + white * 1.0526913;
        *s = ((b0 + b1 + b2 + white * 0.1848) * 0.25) as f32;
    }
}

/// Synthetic lip frames whose mouth opening tracks the speech envelope:
/// a face-toned background with a dark mouth ellipse that opens with
/// energy. One frame per envelope value.
pub fn lips_for_envelope(envelope: &[f32], seed: u64) -> LipSequence {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (cy, cx) = (LIP_HEIGHT as f32 / 2.0, LIP_WIDTH as f32 / 2.0);
    let frames: Vec<Array2<f32>> = envelope
        .iter()
        .map(|&e| {
            let open = 2.0 + 12.0 * e.clamp(0.0, 1.0);
            let mut frame = Array2::from_shape_fn((LIP_HEIGHT, LIP_WIDTH), |_| {
                0.45 + rng.gen_range(-0.03f32..0.03)
            });
            for y in 0..LIP_HEIGHT {
                for x in 0..LIP_WIDTH {
                    let dy = (y as f32 - cy) / open;
                    let dx = (x as f32 - cx) / 26.0;
                    let r = dx * dx + dy * dy;
                    if r < 1.0 {
                        frame[(y, x)] = 0.08; // mouth interior
                    } else if r < 1.6 {
                        frame[(y, x)] = 0.75; // lip ring
                    }
                }
            }
            frame
        })
        .collect();
    let present = vec![true; frames.len()];
    LipSequence::new(frames, present).expect("frames are in range")
}
