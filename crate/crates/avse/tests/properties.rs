//! Property tests of the core invariants over randomized inputs.

use avse::dsp::{self, StftConfig, Waveform};
use avse::mask::{apply_mask, ideal_binary_mask, MaskConfig};
use avse::metrics::si_sdr;
use avse::mix::{measured_snr_db, mix_at_snr};
use ndarray::Array2;
use proptest::prelude::*;

fn wave(samples: Vec<f32>) -> Waveform {
    Waveform::new(samples, 16000).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Mid-signal reconstruction exceeds 50 dB for any valid configuration
    /// whose overlap-add denominator is bounded away from zero.
    #[test]
    fn stft_istft_round_trip_over_random_configs(
        seed in 0u64..1000,
        window_exp in 6usize..10,
        hop_div in 2usize..5,
        pad in 0usize..65,
    ) {
        let window = 1usize << window_exp;
        let fft = window + 2 * pad;
        let hop = window / hop_div;
        let cfg = StftConfig::new(window, fft, hop).unwrap();

        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let len = 4 * window + 3 * hop;
        let x = wave((0..len).map(|_| rng.gen_range(-0.8f32..0.8)).collect());
        let spec = dsp::stft(&x, &cfg, None).unwrap();
        let y = dsp::istft(&spec, x.len()).unwrap();

        let mut sig = 0.0f64;
        let mut err = 0.0f64;
        for i in window..len - window {
            sig += (x.samples()[i] as f64).powi(2);
            err += (x.samples()[i] as f64 - y.samples()[i] as f64).powi(2);
        }
        let snr = 10.0 * (sig / err.max(1e-30)).log10();
        prop_assert!(snr > 50.0, "cfg ({window},{fft},{hop}): {snr} dB");
    }

    /// Raising the local criterion can only shrink the mask's 1-set, and
    /// masking never increases a magnitude.
    #[test]
    fn ibm_threshold_monotonicity(seed in 0u64..10_000, lc1 in -12.0f32..6.0, dlc in 0.1f32..12.0) {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let dims = (rng.gen_range(2..6), rng.gen_range(2..8));
        let make = |rng: &mut rand::rngs::StdRng| {
            let m = Array2::from_shape_fn(dims, |_| rng.gen_range(0.0f32..2.0));
            dsp::Spectrogram {
                phase: Array2::zeros(dims),
                magnitude: m,
                config: StftConfig::preset_desk(),
                sample_rate: 16000,
            }
        };
        let clean = make(&mut rng);
        let noise = make(&mut rng);
        let lo = ideal_binary_mask(&clean, &noise, &MaskConfig { lc_db: lc1, eps: 1e-8 }).unwrap();
        let hi = ideal_binary_mask(&clean, &noise, &MaskConfig { lc_db: lc1 + dlc, eps: 1e-8 }).unwrap();
        for (h, l) in hi.values().iter().zip(lo.values().iter()) {
            prop_assert!(h <= l);
        }
        let masked = apply_mask(&lo, &clean).unwrap();
        for (m, c) in masked.magnitude.iter().zip(clean.magnitude.iter()) {
            prop_assert!(m <= c);
        }
    }

    /// Power-of-two rescaling of either argument leaves SI-SDR bit-identical.
    #[test]
    fn si_sdr_scale_invariance(seed in 0u64..10_000, exp in -3i32..4) {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let n = rng.gen_range(64..512);
        let r = wave((0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect());
        let e = wave((0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect());
        let c = 2.0f32.powi(exp);
        let base = si_sdr(&e, &r).unwrap();
        let e2 = wave(e.samples().iter().map(|&v| c * v).collect());
        let r2 = wave(r.samples().iter().map(|&v| c * v).collect());
        prop_assert_eq!(si_sdr(&e2, &r).unwrap(), base);
        prop_assert_eq!(si_sdr(&e, &r2).unwrap(), base);
    }

    /// Generated mixtures hit their target SNR and decompose exactly.
    #[test]
    fn mixtures_hit_target_snr(seed in 0u64..10_000, snr in -20.0f64..20.0) {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let n = rng.gen_range(1000..4000);
        let clean = wave((0..n).map(|_| rng.gen_range(-0.5f32..0.5)).collect());
        let noise_len = rng.gen_range(500..5000);
        let noise = wave((0..noise_len).map(|_| rng.gen_range(-0.5f32..0.5)).collect());
        let offset = rng.gen_range(0..10_000u64);
        let m = mix_at_snr(&clean, &noise, offset, snr).unwrap();
        let measured = measured_snr_db(&m.clean, &m.scaled_noise);
        prop_assert!((measured - snr).abs() < 0.01, "target {snr} measured {measured}");
        for i in 0..n {
            prop_assert_eq!(m.mixture.samples()[i], m.clean.samples()[i] + m.scaled_noise.samples()[i]);
        }
    }
}
