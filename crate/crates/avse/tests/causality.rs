//! End-to-end causality of the enhancement chain (causal configuration):
//! perturbing future audio or future lip frames must leave earlier output
//! samples untouched up to the one-window analysis latency.

use avse::model::{enhance, Checkpoint, EnhanceMode, ModelConfig, Variant};
use avse::dsp::Waveform;
use avse::synth;
use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

#[test]
fn future_audio_does_not_affect_past_output() {
    let ckpt = Checkpoint::init(ModelConfig::desk(Variant::AudioOnly), 1).unwrap();
    let window = ckpt.config.window_len;
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let base: Vec<f32> = (0..48000).map(|_| rng.gen_range(-0.5f32..0.5)).collect();

    let perturb_at = 30_000usize;
    let mut altered = base.clone();
    for s in altered.iter_mut().skip(perturb_at) {
        *s = -*s * 0.3 + 0.1;
    }

    let a = enhance(
        &Waveform::new(base, 16000).unwrap(),
        None,
        &ckpt,
        EnhanceMode::Whole,
    )
    .unwrap();
    let b = enhance(
        &Waveform::new(altered, 16000).unwrap(),
        None,
        &ckpt,
        EnhanceMode::Whole,
    )
    .unwrap();

    // every output sample more than one window before the perturbation is
    // bit-identical
    let safe = perturb_at - window;
    assert_eq!(
        &a.audio.samples()[..safe],
        &b.audio.samples()[..safe],
        "outputs diverge before the causal horizon"
    );
    // and the perturbation does reach later samples
    assert_ne!(
        &a.audio.samples()[perturb_at..],
        &b.audio.samples()[perturb_at..]
    );
}

#[test]
fn future_lip_frames_do_not_affect_past_output() {
    let ckpt = Checkpoint::init(ModelConfig::desk(Variant::AudioVisual), 3).unwrap();
    let hop = ckpt.config.hop;
    let clean = synth::speech_like(4, 3.0, 16000);
    let (_, env) = synth::speech_with_envelope(4, 3.0, 16000);
    let lips = synth::lips_for_envelope(&env, 5);

    let mut altered = lips.clone();
    let v = 50usize; // perturb lip frame 50 of 75
    altered.blank_frame(v);

    let a = enhance(&clean, Some(&lips), &ckpt, EnhanceMode::Whole).unwrap();
    let b = enhance(&clean, Some(&altered), &ckpt, EnhanceMode::Whole).unwrap();

    // lip frame v first enters mask frame 3v, which first touches sample
    // 3v * hop
    let safe = 3 * v * hop;
    assert_eq!(&a.audio.samples()[..safe], &b.audio.samples()[..safe]);
    assert_ne!(a.audio.samples(), b.audio.samples());
}
