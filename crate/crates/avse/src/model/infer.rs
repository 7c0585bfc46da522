//! Whole-utterance and streaming inference.
//!
//! Both modes run the same per-frame kernels; streaming carries the
//! convolution time context and the LSTM states across consecutive
//! 3-second chunks, so chunked output is sample-identical to a single
//! whole-utterance pass.

use crate::autodiff::kernels::{self, Activation, ConvSpec, LstmState, LstmWeights, PadMode};
use crate::autodiff::Tensor;
use crate::dsp::{self, Spectrogram, Waveform};
use crate::mask::Mask;
use crate::model::config::{ModelConfig, Variant};
use crate::model::lips::{LipSequence, LIP_FPS};
use crate::model::params::{Checkpoint, ParamStore};
use crate::model::ModelError;
use ndarray::Array2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnhanceMode {
    /// One pass over the whole utterance.
    Whole,
    /// Consecutive 3-second chunks with state carried across chunks.
    Streaming,
}

/// Recurrent inference state carried between chunks.
pub struct StreamState {
    /// Per audio conv layer: the last `(kh-1)*dilation` input rows,
    /// `[c_in, ctx_rows, bins]`.
    audio_ctx: Vec<Tensor<f32>>,
    visual_lstm: LstmState<f32>,
    fusion_lstm: LstmState<f32>,
}

impl StreamState {
    pub fn new(cfg: &ModelConfig) -> Self {
        let mut audio_ctx = Vec::new();
        let mut c_in = 1usize;
        for layer in &cfg.audio_conv {
            let ctx_rows = (layer.kernel.0 - 1) * layer.dilation.0;
            audio_ctx.push(Tensor::zeros(&[c_in, ctx_rows, cfg.mask_bins]));
            c_in = layer.filters;
        }
        Self {
            audio_ctx,
            visual_lstm: LstmState::zeros(cfg.visual_lstm_units),
            fusion_lstm: LstmState::zeros(cfg.fusion_lstm_units),
        }
    }
}

/// Keeps the last `ctx_rows` input rows of a layer for the next chunk.
fn update_ctx(ctx: &mut Tensor<f32>, x: &[f32], (c, t, w): (usize, usize, usize)) {
    let rows = ctx.shape()[1];
    if rows == 0 {
        return;
    }
    let old = ctx.data().to_vec();
    let new = ctx.data_mut();
    for ci in 0..c {
        for r in 0..rows {
            // conceptual row index t + r of [old ctx | chunk]
            let src: &[f32] = if t + r < rows {
                &old[(ci * rows + t + r) * w..(ci * rows + t + r + 1) * w]
            } else {
                let xr = t + r - rows;
                &x[(ci * t + xr) * w..(ci * t + xr + 1) * w]
            };
            new[(ci * rows + r) * w..(ci * rows + r + 1) * w].copy_from_slice(src);
        }
    }
}

fn relu_in_place(x: &mut [f32]) {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

fn lstm_weights<'a>(params: &'a ParamStore<f32>, prefix: &str) -> LstmWeights<'a, f32> {
    LstmWeights {
        w_x: params.get(&format!("{prefix}.wx")).unwrap().data(),
        w_h: params.get(&format!("{prefix}.wh")).unwrap().data(),
        b: params.get(&format!("{prefix}.b")).unwrap().data(),
    }
}

/// Runs one chunk of `t` frames (and `t / upsample_factor` lip frames for
/// the audio-visual variant) through the network, updating `state`.
pub fn process_chunk(
    cfg: &ModelConfig,
    params: &ParamStore<f32>,
    state: &mut StreamState,
    mag_chunk: &Tensor<f32>,
    lips_chunk: Option<&Tensor<f32>>,
) -> Result<Tensor<f32>, ModelError> {
    let shape = mag_chunk.shape().to_vec();
    if shape.len() != 2 || shape[1] != cfg.mask_bins {
        return Err(ModelError::BinCountMismatch {
            input: shape.last().copied().unwrap_or(0),
            expected: cfg.mask_bins,
        });
    }
    let t = shape[0];
    let bins = cfg.mask_bins;

    // audio stack
    let mut x = mag_chunk.data().to_vec();
    let mut c_in = 1usize;
    for (i, layer) in cfg.audio_conv.iter().enumerate() {
        let w = params.get(&format!("audio.conv{}.w", i + 1)).unwrap();
        let b = params.get(&format!("audio.conv{}.b", i + 1)).unwrap();
        let spec = ConvSpec {
            dilation: layer.dilation,
            pad: PadMode::CausalPast,
        };
        let mut out = vec![0.0f32; layer.filters * t * bins];
        kernels::conv2d_forward(
            &x,
            (c_in, t, bins),
            w.data(),
            (layer.filters, layer.kernel.0, layer.kernel.1),
            b.data(),
            &spec,
            Some(state.audio_ctx[i].data()),
            &mut out,
        );
        update_ctx(&mut state.audio_ctx[i], &x, (c_in, t, bins));
        relu_in_place(&mut out);
        x = out;
        c_in = layer.filters;
    }

    // optional projection + frequency stride, then per-frame flatten
    let audio_feats: Vec<f32> = if let Some(proj) = &cfg.audio_projection {
        let w = params.get("audio.proj.w").unwrap();
        let b = params.get("audio.proj.b").unwrap();
        let mut out = vec![0.0f32; proj.channels * t * bins];
        kernels::conv2d_forward(
            &x,
            (c_in, t, bins),
            w.data(),
            (proj.channels, 1, 1),
            b.data(),
            &ConvSpec {
                dilation: (1, 1),
                pad: PadMode::Symmetric,
            },
            None,
            &mut out,
        );
        relu_in_place(&mut out);
        let fs = bins.div_ceil(proj.freq_stride);
        let mut feats = vec![0.0f32; t * proj.channels * fs];
        for ch in 0..proj.channels {
            for ti in 0..t {
                for j in 0..fs {
                    feats[ti * proj.channels * fs + ch * fs + j] =
                        out[(ch * t + ti) * bins + j * proj.freq_stride];
                }
            }
        }
        feats
    } else {
        let c = c_in;
        let mut feats = vec![0.0f32; t * c * bins];
        for ch in 0..c {
            for ti in 0..t {
                feats[ti * c * bins + ch * bins..ti * c * bins + (ch + 1) * bins]
                    .copy_from_slice(&x[(ch * t + ti) * bins..(ch * t + ti + 1) * bins]);
            }
        }
        feats
    };
    let d_a = cfg.audio_feature_dim();

    // visual stack + fusion input
    let (fused, d_fused) = match cfg.variant {
        Variant::AudioOnly => (audio_feats, d_a),
        Variant::AudioVisual => {
            let lips = lips_chunk.ok_or_else(|| {
                ModelError::InvalidConfig("audio_visual chunk requires lip frames".into())
            })?;
            let t_v = lips.shape()[0];
            if t != cfg.upsample_factor * t_v {
                return Err(ModelError::AlignmentMismatch {
                    audio_frames: t,
                    visual_frames: t_v,
                });
            }
            let v = visual_features(cfg, params, state, lips)?;
            let u = cfg.visual_lstm_units;
            let d = d_a + u;
            let mut fused = vec![0.0f32; t * d];
            for ti in 0..t {
                fused[ti * d..ti * d + d_a]
                    .copy_from_slice(&audio_feats[ti * d_a..(ti + 1) * d_a]);
                let vi = ti / cfg.upsample_factor;
                fused[ti * d + d_a..(ti + 1) * d].copy_from_slice(&v[vi * u..(vi + 1) * u]);
            }
            (fused, d)
        }
    };

    // fusion LSTM and dense head
    let u = cfg.fusion_lstm_units;
    let mut hs = vec![0.0f32; t * u];
    state.fusion_lstm = kernels::lstm_forward(
        &fused,
        (t, d_fused),
        u,
        &lstm_weights(params, "fusion.lstm"),
        &state.fusion_lstm,
        &mut hs,
        None,
    );

    let fc = cfg.fc_units;
    let mut h1 = vec![0.0f32; t * fc];
    kernels::dense_forward(
        &hs,
        (t, u),
        params.get("fc1.w").unwrap().data(),
        params.get("fc1.b").unwrap().data(),
        fc,
        Activation::Relu,
        &mut h1,
    );
    let mut h2 = vec![0.0f32; t * fc];
    kernels::dense_forward(
        &h1,
        (t, fc),
        params.get("fc2.w").unwrap().data(),
        params.get("fc2.b").unwrap().data(),
        fc,
        Activation::Relu,
        &mut h2,
    );
    let mut mask = vec![0.0f32; t * bins];
    kernels::dense_forward(
        &h2,
        (t, fc),
        params.get("out.w").unwrap().data(),
        params.get("out.b").unwrap().data(),
        bins,
        Activation::Sigmoid,
        &mut mask,
    );
    Ok(Tensor::new(vec![t, bins], mask).expect("mask shape"))
}

/// Spatial conv/pool stack per frame followed by the visual LSTM.
fn visual_features(
    cfg: &ModelConfig,
    params: &ParamStore<f32>,
    state: &mut StreamState,
    lips: &Tensor<f32>,
) -> Result<Vec<f32>, ModelError> {
    let frames = lips.shape()[0];
    let (mut h, mut w) = (
        crate::model::lips::LIP_HEIGHT,
        crate::model::lips::LIP_WIDTH,
    );
    let mut x = lips.data().to_vec();
    let mut c_in = 1usize;
    for (i, layer) in cfg.visual_conv.iter().enumerate() {
        let wt = params.get(&format!("visual.conv{}.w", i + 1)).unwrap();
        let bt = params.get(&format!("visual.conv{}.b", i + 1)).unwrap();
        let spec = ConvSpec {
            dilation: layer.dilation,
            pad: PadMode::Symmetric,
        };
        let mut out = vec![0.0f32; frames * layer.filters * h * w];
        for fr in 0..frames {
            kernels::conv2d_forward(
                &x[fr * c_in * h * w..(fr + 1) * c_in * h * w],
                (c_in, h, w),
                wt.data(),
                (layer.filters, layer.kernel.0, layer.kernel.1),
                bt.data(),
                &spec,
                None,
                &mut out[fr * layer.filters * h * w..(fr + 1) * layer.filters * h * w],
            );
        }
        relu_in_place(&mut out);
        x = out;
        c_in = layer.filters;
        if i == 1 || i == 3 {
            let (ph, pw) = cfg.visual_pool;
            let (oh, ow) = (h / ph, w / pw);
            let mut out = vec![0.0f32; frames * c_in * oh * ow];
            let mut argmax = vec![0usize; c_in * oh * ow];
            for fr in 0..frames {
                kernels::maxpool2d_forward(
                    &x[fr * c_in * h * w..(fr + 1) * c_in * h * w],
                    (c_in, h, w),
                    (ph, pw),
                    &mut out[fr * c_in * oh * ow..(fr + 1) * c_in * oh * ow],
                    &mut argmax,
                );
            }
            x = out;
            h = oh;
            w = ow;
        }
    }

    let d = cfg.visual_flatten_dim();
    debug_assert_eq!(d, c_in * h * w);
    let u = cfg.visual_lstm_units;
    let mut hs = vec![0.0f32; frames * u];
    state.visual_lstm = kernels::lstm_forward(
        &x,
        (frames, d),
        u,
        &lstm_weights(params, "visual.lstm"),
        &state.visual_lstm,
        &mut hs,
        None,
    );
    Ok(hs)
}

/// Result of an enhancement call. From [`estimate_mask`] the `audio`
/// field is empty; [`enhance`] fills it with the resynthesized signal.
pub struct EnhanceOutput {
    pub audio: Waveform,
    pub mask: Mask,
    pub noisy_spec: Spectrogram,
    pub warnings: Vec<String>,
}

/// Frame counts for an utterance: lip frames and the 3x audio frames,
/// bumped when the hop drift makes the natural frame count larger.
pub(crate) fn frame_plan(cfg: &ModelConfig, len: usize) -> Result<(usize, usize), ModelError> {
    let spf = cfg.samples_per_lip_frame();
    let stft = cfg.stft()?;
    let mut t_v = len.div_ceil(spf).max(1);
    let natural = stft.natural_frames(len);
    if natural > cfg.upsample_factor * t_v {
        t_v = natural.div_ceil(cfg.upsample_factor);
    }
    Ok((t_v, cfg.upsample_factor * t_v))
}

/// Mask estimation over a full utterance.
pub fn estimate_mask(
    noisy: &Waveform,
    lips: Option<&LipSequence>,
    ckpt: &Checkpoint,
    mode: EnhanceMode,
) -> Result<EnhanceOutput, ModelError> {
    let cfg = &ckpt.config;
    cfg.validate()?;
    if noisy.sample_rate() != cfg.sample_rate {
        return Err(ModelError::SampleRateMismatch {
            input: noisy.sample_rate(),
            expected: cfg.sample_rate,
        });
    }
    if mode == EnhanceMode::Streaming && !cfg.causal {
        return Err(ModelError::StreamingNeedsCausal);
    }

    let mut warnings = Vec::new();
    let (t_v, t) = frame_plan(cfg, noisy.len())?;
    let stft_cfg = cfg.stft()?;
    let spec = dsp::stft(noisy, &stft_cfg, Some(t))?;

    let lips_tensor: Option<Tensor<f32>> = match (cfg.variant, lips) {
        (Variant::AudioOnly, None) => None,
        (Variant::AudioOnly, Some(_)) => {
            warnings.push("audio-only model ignores the provided lip frames".into());
            None
        }
        (Variant::AudioVisual, Some(l)) => {
            if l.len().abs_diff(t_v) > 1 {
                warnings.push(format!(
                    "lip count {} does not match expected {t_v}; padding/truncating",
                    l.len()
                ));
            }
            Some(super::network::lips_to_tensor(&l.window(0, t_v)))
        }
        (Variant::AudioVisual, None) => {
            warnings.push("no lip frames provided; substituting blank frames".into());
            Some(super::network::lips_to_tensor(&LipSequence::blank(t_v)))
        }
    };

    // whole mode is a single chunk; streaming walks 3-second chunks
    let chunk_tv = match mode {
        EnhanceMode::Whole => t_v,
        EnhanceMode::Streaming => 3 * LIP_FPS as usize,
    };
    let chunk_t = cfg.upsample_factor * chunk_tv;

    let mut state = StreamState::new(cfg);
    let mut mask_values = Array2::zeros((t, cfg.mask_bins));
    let mut t0 = 0usize;
    let mut tv0 = 0usize;
    while t0 < t {
        let ct = chunk_t.min(t - t0);
        let ctv = chunk_tv.min(t_v - tv0);
        let mut mag = Tensor::zeros(&[ct, cfg.mask_bins]);
        for ti in 0..ct {
            for b in 0..cfg.mask_bins {
                mag.data_mut()[ti * cfg.mask_bins + b] = spec.magnitude[(t0 + ti, b)];
            }
        }
        let lips_chunk = lips_tensor.as_ref().map(|lt| {
            let hw = crate::model::lips::LIP_HEIGHT * crate::model::lips::LIP_WIDTH;
            Tensor::new(
                vec![ctv, 1, crate::model::lips::LIP_HEIGHT, crate::model::lips::LIP_WIDTH],
                lt.data()[tv0 * hw..(tv0 + ctv) * hw].to_vec(),
            )
            .expect("lip chunk shape")
        });
        let chunk_mask = process_chunk(cfg, &ckpt.params, &mut state, &mag, lips_chunk.as_ref())?;
        for ti in 0..ct {
            for b in 0..cfg.mask_bins {
                mask_values[(t0 + ti, b)] = chunk_mask.data()[ti * cfg.mask_bins + b];
            }
        }
        t0 += ct;
        tv0 += ctv;
    }

    let mask = Mask::new(mask_values)?;
    Ok(EnhanceOutput {
        audio: Waveform::new(Vec::new(), cfg.sample_rate)?,
        mask,
        noisy_spec: spec,
        warnings,
    })
}

/// Full enhancement: mask estimation, masking with the noisy phase, and
/// resynthesis to the input length.
pub fn enhance(
    noisy: &Waveform,
    lips: Option<&LipSequence>,
    ckpt: &Checkpoint,
    mode: EnhanceMode,
) -> Result<EnhanceOutput, ModelError> {
    let mut out = estimate_mask(noisy, lips, ckpt, mode)?;
    out.audio = crate::mask::resynthesize(&out.mask, &out.noisy_spec, noisy.len())?;
    Ok(out)
}
