//! Shape and range checks of the full (622-bin) preset at real size.
//! These allocate the large fusion stack (~600 MB of parameters), so each
//! check runs in its own test and frees everything on exit.

use avse::autodiff::{Graph, Tensor};
use avse::dsp::Waveform;
use avse::model::network::{audio_encoder, fuse_and_estimate, visual_encoder, GraphParams};
use avse::model::params::init_params;
use avse::model::{enhance, Checkpoint, EnhanceMode, ModelConfig, Variant};
use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

fn random_mag(seed: u64, t: usize, bins: usize) -> Tensor<f32> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Tensor::from_fn(&[t, bins], |_| rng.gen_range(0.0f32..1.0))
}

#[test]
fn audio_encoder_flattens_to_96_by_622_per_frame() {
    let cfg = ModelConfig::full(Variant::AudioOnly);
    let store = init_params::<f32>(&cfg, 1).unwrap();
    let mut g = Graph::new();
    let p = GraphParams::register(&mut g, &store, false);
    let mag = g.input(random_mag(2, 225, 622));
    let feats = audio_encoder(&mut g, &cfg, &p, mag).unwrap();
    assert_eq!(g.value(feats).shape(), &[225, 96 * 622]);
}

#[test]
fn visual_encoder_produces_256_units_per_frame() {
    let cfg = ModelConfig::full(Variant::AudioVisual);
    let store = init_params::<f32>(&cfg, 3).unwrap();
    let mut g = Graph::new();
    let p = GraphParams::register(&mut g, &store, false);
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let lips = g.input(Tensor::from_fn(&[75, 1, 40, 80], |_| {
        rng.gen_range(0.0f32..1.0)
    }));
    let v = visual_encoder(&mut g, &cfg, &p, lips).unwrap();
    assert_eq!(g.value(v).shape(), &[75, 256]);
}

#[test]
fn fusion_upsamples_75_frames_to_a_225_by_622_mask() {
    let cfg = ModelConfig::full(Variant::AudioVisual);
    let store = init_params::<f32>(&cfg, 5).unwrap();
    let mut g = Graph::new();
    let p = GraphParams::register(&mut g, &store, false);
    let mag = g.input(random_mag(6, 225, 622));
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let lips = g.input(Tensor::from_fn(&[75, 1, 40, 80], |_| {
        rng.gen_range(0.0f32..1.0)
    }));
    let audio = audio_encoder(&mut g, &cfg, &p, mag).unwrap();
    let visual = visual_encoder(&mut g, &cfg, &p, lips).unwrap();
    let mask = fuse_and_estimate(&mut g, &cfg, &p, audio, Some(visual)).unwrap();
    assert_eq!(g.value(mask).shape(), &[225, 622]);
    assert!(g.value(mask).data().iter().all(|&v| v > 0.0 && v < 1.0));
}

#[test]
fn three_second_clip_enhances_through_225_frames() {
    let ckpt = Checkpoint::init(ModelConfig::full(Variant::AudioOnly), 9).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let noisy = Waveform::new(
        (0..48000).map(|_| rng.gen_range(-0.4f32..0.4)).collect(),
        16000,
    )
    .unwrap();
    let out = enhance(&noisy, None, &ckpt, EnhanceMode::Whole).unwrap();
    assert_eq!(out.mask.dim(), (225, 622));
    assert_eq!(out.audio.len(), 48000);
}
