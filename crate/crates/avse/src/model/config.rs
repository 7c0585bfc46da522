//! Network configuration and the two built-in presets.

use crate::dsp::StftConfig;
use crate::model::lips::LIP_FPS;
use crate::model::ModelError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    AudioOnly,
    AudioVisual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    /// 622-bin configuration: 96-filter audio stack, 256-unit visual LSTM,
    /// 622-unit fusion LSTM, full feature flatten.
    Full,
    /// 257-bin configuration small enough to train on a laptop CPU.
    Desk,
}

/// One convolution stage: `filters` output channels, `kernel` (time/height,
/// freq/width), `dilation` likewise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub filters: usize,
    pub kernel: (usize, usize),
    pub dilation: (usize, usize),
}

/// Learned 1x1-conv reduction of the audio feature map followed by
/// frequency striding, applied before fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub channels: usize,
    pub freq_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub preset: PresetName,
    pub variant: Variant,
    /// Causal time padding in the audio convolutions (the LSTMs are always
    /// unidirectional). Disable for the centered-padding ablation.
    pub causal: bool,
    pub sample_rate: u32,
    pub window_len: usize,
    pub fft_len: usize,
    pub hop: usize,
    pub mask_bins: usize,
    /// Visual-to-audio rate ratio; visual features are repeated this many
    /// times along time before fusion.
    pub upsample_factor: usize,
    pub audio_conv: Vec<ConvLayerSpec>,
    pub audio_projection: Option<ProjectionSpec>,
    pub visual_conv: Vec<ConvLayerSpec>,
    pub visual_pool: (usize, usize),
    pub visual_lstm_units: usize,
    pub fusion_lstm_units: usize,
    pub fc_units: usize,
}

impl ModelConfig {
    /// The large configuration: five 96-filter 5x5 audio convs with time
    /// dilations 1,2,4,8 and a final 1x1; visual 32/48 + pool + 64/96 +
    /// pool + LSTM 256; fusion LSTM 622 and 622-wide dense layers over the
    /// full flattened audio features.
    pub fn full(variant: Variant) -> Self {
        let d = |t| (t, 1);
        Self {
            preset: PresetName::Full,
            variant,
            causal: true,
            sample_rate: 16000,
            window_len: 1242,
            fft_len: 1242,
            hop: 213,
            mask_bins: 622,
            upsample_factor: 3,
            audio_conv: vec![
                ConvLayerSpec { filters: 96, kernel: (5, 5), dilation: d(1) },
                ConvLayerSpec { filters: 96, kernel: (5, 5), dilation: d(2) },
                ConvLayerSpec { filters: 96, kernel: (5, 5), dilation: d(4) },
                ConvLayerSpec { filters: 96, kernel: (5, 5), dilation: d(8) },
                ConvLayerSpec { filters: 96, kernel: (1, 1), dilation: d(1) },
            ],
            audio_projection: None,
            visual_conv: vec![
                ConvLayerSpec { filters: 32, kernel: (3, 3), dilation: (1, 1) },
                ConvLayerSpec { filters: 48, kernel: (3, 3), dilation: (1, 1) },
                ConvLayerSpec { filters: 64, kernel: (3, 3), dilation: (2, 2) },
                ConvLayerSpec { filters: 96, kernel: (3, 3), dilation: (3, 3) },
            ],
            visual_pool: (2, 3),
            visual_lstm_units: 256,
            fusion_lstm_units: 622,
            fc_units: 622,
        }
    }

    /// Small configuration with the same topology: 16-filter audio stack,
    /// a learned projection to 8 channels with frequency stride 4, visual
    /// 8/12/16/24 + LSTM 64, fusion LSTM 128.
    pub fn desk(variant: Variant) -> Self {
        let d = |t| (t, 1);
        Self {
            preset: PresetName::Desk,
            variant,
            causal: true,
            sample_rate: 16000,
            window_len: 400,
            fft_len: 512,
            hop: 213,
            mask_bins: 257,
            upsample_factor: 3,
            audio_conv: vec![
                ConvLayerSpec { filters: 16, kernel: (5, 5), dilation: d(1) },
                ConvLayerSpec { filters: 16, kernel: (5, 5), dilation: d(2) },
                ConvLayerSpec { filters: 16, kernel: (5, 5), dilation: d(4) },
                ConvLayerSpec { filters: 16, kernel: (5, 5), dilation: d(8) },
                ConvLayerSpec { filters: 16, kernel: (1, 1), dilation: d(1) },
            ],
            audio_projection: Some(ProjectionSpec {
                channels: 8,
                freq_stride: 4,
            }),
            visual_conv: vec![
                ConvLayerSpec { filters: 8, kernel: (3, 3), dilation: (1, 1) },
                ConvLayerSpec { filters: 12, kernel: (3, 3), dilation: (1, 1) },
                ConvLayerSpec { filters: 16, kernel: (3, 3), dilation: (2, 2) },
                ConvLayerSpec { filters: 24, kernel: (3, 3), dilation: (3, 3) },
            ],
            visual_pool: (2, 3),
            visual_lstm_units: 64,
            fusion_lstm_units: 128,
            fc_units: 128,
        }
    }

    pub fn by_name(preset: PresetName, variant: Variant) -> Self {
        match preset {
            PresetName::Full => Self::full(variant),
            PresetName::Desk => Self::desk(variant),
        }
    }

    pub fn stft(&self) -> Result<StftConfig, ModelError> {
        Ok(StftConfig::new(self.window_len, self.fft_len, self.hop)?)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.mask_bins != self.fft_len / 2 + 1 {
            return Err(ModelError::InvalidConfig(format!(
                "mask_bins {} must equal fft_len/2+1 = {}",
                self.mask_bins,
                self.fft_len / 2 + 1
            )));
        }
        let audio_fps = (self.sample_rate as f64 / self.hop as f64).round() as usize;
        if audio_fps != self.upsample_factor * LIP_FPS as usize {
            return Err(ModelError::InvalidConfig(format!(
                "audio frame rate {audio_fps} must be upsample_factor x {LIP_FPS}",
            )));
        }
        if self.audio_conv.is_empty() || self.visual_conv.len() != 4 {
            return Err(ModelError::InvalidConfig(
                "expected a non-empty audio stack and a 4-conv visual stack".into(),
            ));
        }
        Ok(())
    }

    /// Samples covered by one video frame.
    pub fn samples_per_lip_frame(&self) -> usize {
        self.sample_rate as usize / LIP_FPS as usize
    }

    /// Width of one per-frame audio feature row after flatten and the
    /// optional projection.
    pub fn audio_feature_dim(&self) -> usize {
        match &self.audio_projection {
            Some(p) => p.channels * self.mask_bins.div_ceil(p.freq_stride),
            None => self.audio_conv.last().unwrap().filters * self.mask_bins,
        }
    }

    /// Spatial size of the visual stack output for 40x80 inputs.
    pub fn visual_spatial_dims(&self) -> (usize, usize) {
        let (h, w) = (crate::model::lips::LIP_HEIGHT, crate::model::lips::LIP_WIDTH);
        let (ph, pw) = self.visual_pool;
        let (h, w) = (h / ph, w / pw);
        (h / ph, w / pw)
    }

    /// Flattened per-frame width entering the visual LSTM.
    pub fn visual_flatten_dim(&self) -> usize {
        let (h, w) = self.visual_spatial_dims();
        self.visual_conv.last().unwrap().filters * h * w
    }

    /// Width of the fusion LSTM input.
    pub fn fusion_input_dim(&self) -> usize {
        match self.variant {
            Variant::AudioOnly => self.audio_feature_dim(),
            Variant::AudioVisual => self.audio_feature_dim() + self.visual_lstm_units,
        }
    }
}
