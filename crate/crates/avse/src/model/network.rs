//! Graph-based forward pass of the mask estimator.
//!
//! Audio: dilated causal convolutions over the magnitude spectrogram,
//! flattened per frame (optionally projected). Visual: per-frame spatial
//! conv/pool stack followed by an LSTM over frames. Fusion: visual features
//! repeated to the audio frame rate, concatenated, then LSTM and
//! time-shared dense layers ending in a sigmoid mask. No thresholding is
//! applied to the output.

use crate::autodiff::{Activation, ConvSpec, Graph, NodeId, PadMode, Scalar, Tensor};
use crate::model::config::{ModelConfig, Variant};
use crate::model::params::ParamStore;
use crate::model::ModelError;

/// Node ids of registered parameters, looked up by canonical name.
pub struct GraphParams {
    names: Vec<String>,
    ids: Vec<NodeId>,
}

impl GraphParams {
    /// Registers every parameter with the graph, as differentiable leaves
    /// when `trainable`.
    pub fn register<F: Scalar>(
        graph: &mut Graph<F>,
        store: &ParamStore<F>,
        trainable: bool,
    ) -> Self {
        let mut names = Vec::with_capacity(store.len());
        let mut ids = Vec::with_capacity(store.len());
        for (name, tensor) in store.iter() {
            names.push(name.to_string());
            ids.push(if trainable {
                graph.param(tensor.clone())
            } else {
                graph.input(tensor.clone())
            });
        }
        Self { names, ids }
    }

    pub fn id(&self, name: &str) -> NodeId {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .unwrap_or_else(|| panic!("parameter {name} not registered"));
        self.ids[i]
    }

    /// Ids in canonical order, for gradient extraction.
    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }
}

fn conv_pad(cfg: &ModelConfig) -> PadMode {
    if cfg.causal {
        PadMode::CausalPast
    } else {
        PadMode::Symmetric
    }
}

/// `[t, bins]` magnitude input to `[t, audio_feature_dim]` features.
pub fn audio_encoder<F: Scalar>(
    graph: &mut Graph<F>,
    cfg: &ModelConfig,
    params: &GraphParams,
    noisy_mag: NodeId,
) -> Result<NodeId, ModelError> {
    let shape = graph.value(noisy_mag).shape().to_vec();
    if shape.len() != 2 || shape[1] != cfg.mask_bins {
        return Err(ModelError::BinCountMismatch {
            input: shape.last().copied().unwrap_or(0),
            expected: cfg.mask_bins,
        });
    }
    let t = shape[0];
    let mut x = graph.reshape(noisy_mag, &[1, t, cfg.mask_bins])?;
    for (i, layer) in cfg.audio_conv.iter().enumerate() {
        let spec = ConvSpec {
            dilation: layer.dilation,
            pad: conv_pad(cfg),
        };
        let w = params.id(&format!("audio.conv{}.w", i + 1));
        let b = params.id(&format!("audio.conv{}.b", i + 1));
        let y = graph.conv2d(x, w, b, spec)?;
        x = graph.relu(y);
    }
    if let Some(proj) = &cfg.audio_projection {
        let spec = ConvSpec {
            dilation: (1, 1),
            pad: PadMode::Symmetric,
        };
        let y = graph.conv2d(x, params.id("audio.proj.w"), params.id("audio.proj.b"), spec)?;
        let y = graph.relu(y);
        x = graph.subsample_freq(y, proj.freq_stride)?;
    }
    Ok(graph.flatten_time_major(x)?)
}

/// `[t_v, 1, 40, 80]` lip frames to `[t_v, visual_lstm_units]` features.
pub fn visual_encoder<F: Scalar>(
    graph: &mut Graph<F>,
    cfg: &ModelConfig,
    params: &GraphParams,
    lips: NodeId,
) -> Result<NodeId, ModelError> {
    let shape = graph.value(lips).shape().to_vec();
    if shape.len() != 4
        || shape[1] != 1
        || shape[2] != crate::model::lips::LIP_HEIGHT
        || shape[3] != crate::model::lips::LIP_WIDTH
    {
        return Err(ModelError::InvalidConfig(format!(
            "visual input must be [frames, 1, 40, 80], got {shape:?}"
        )));
    }
    let frames = shape[0];
    let mut x = lips;
    for (i, layer) in cfg.visual_conv.iter().enumerate() {
        let spec = ConvSpec {
            dilation: layer.dilation,
            pad: PadMode::Symmetric,
        };
        let w = params.id(&format!("visual.conv{}.w", i + 1));
        let b = params.id(&format!("visual.conv{}.b", i + 1));
        let y = graph.conv2d(x, w, b, spec)?;
        x = graph.relu(y);
        if i == 1 || i == 3 {
            x = graph.maxpool2d(x, cfg.visual_pool)?;
        }
    }
    let x = graph.reshape(x, &[frames, cfg.visual_flatten_dim()])?;
    Ok(graph.lstm_seq(
        x,
        params.id("visual.lstm.wx"),
        params.id("visual.lstm.wh"),
        params.id("visual.lstm.b"),
    )?)
}

/// Upsamples visual features to the audio rate, concatenates, and runs the
/// fusion LSTM plus dense head. Returns the `[t, mask_bins]` sigmoid mask.
pub fn fuse_and_estimate<F: Scalar>(
    graph: &mut Graph<F>,
    cfg: &ModelConfig,
    params: &GraphParams,
    audio: NodeId,
    visual: Option<NodeId>,
) -> Result<NodeId, ModelError> {
    let fused = match (cfg.variant, visual) {
        (Variant::AudioVisual, Some(v)) => {
            let t = graph.value(audio).shape()[0];
            let t_v = graph.value(v).shape()[0];
            if t != cfg.upsample_factor * t_v {
                return Err(ModelError::AlignmentMismatch {
                    audio_frames: t,
                    visual_frames: t_v,
                });
            }
            let up = graph.repeat_rows(v, cfg.upsample_factor)?;
            graph.concat_cols(audio, up)?
        }
        (Variant::AudioOnly, _) => audio,
        (Variant::AudioVisual, None) => {
            return Err(ModelError::InvalidConfig(
                "audio_visual forward requires visual features".into(),
            ))
        }
    };
    let h = graph.lstm_seq(
        fused,
        params.id("fusion.lstm.wx"),
        params.id("fusion.lstm.wh"),
        params.id("fusion.lstm.b"),
    )?;
    let h = graph.dense(h, params.id("fc1.w"), params.id("fc1.b"), Activation::Relu)?;
    let h = graph.dense(h, params.id("fc2.w"), params.id("fc2.b"), Activation::Relu)?;
    Ok(graph.dense(h, params.id("out.w"), params.id("out.b"), Activation::Sigmoid)?)
}

/// Full forward pass: magnitude (and lips for the audio-visual variant) to
/// the estimated mask node.
pub fn forward_mask<F: Scalar>(
    graph: &mut Graph<F>,
    cfg: &ModelConfig,
    params: &GraphParams,
    noisy_mag: NodeId,
    lips: Option<NodeId>,
) -> Result<NodeId, ModelError> {
    let audio = audio_encoder(graph, cfg, params, noisy_mag)?;
    let visual = match (cfg.variant, lips) {
        (Variant::AudioVisual, Some(l)) => Some(visual_encoder(graph, cfg, params, l)?),
        (Variant::AudioVisual, None) => {
            return Err(ModelError::InvalidConfig(
                "audio_visual forward requires a lip tensor (use blank lips when absent)".into(),
            ))
        }
        (Variant::AudioOnly, _) => None,
    };
    fuse_and_estimate(graph, cfg, params, audio, visual)
}

/// Converts lip frames to the `[frames, 1, 40, 80]` network input tensor.
pub fn lips_to_tensor<F: Scalar>(lips: &crate::model::lips::LipSequence) -> Tensor<F> {
    let (h, w) = (
        crate::model::lips::LIP_HEIGHT,
        crate::model::lips::LIP_WIDTH,
    );
    let frames = lips.len();
    let mut t = Tensor::zeros(&[frames, 1, h, w]);
    for (i, frame) in lips.frames().iter().enumerate() {
        for (j, &v) in frame.iter().enumerate() {
            t.data_mut()[i * h * w + j] = F::from_f64(v as f64);
        }
    }
    t
}
