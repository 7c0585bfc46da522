//! The mask-estimation model: configuration, parameters, graph forward,
//! training, inference, and the occlusion harness.

pub mod config;
pub mod infer;
pub mod lips;
pub mod network;
pub mod occlusion;
pub mod params;
pub mod train;

pub use config::{ModelConfig, PresetName, Variant};
pub use infer::{enhance, estimate_mask, EnhanceMode, EnhanceOutput};
pub use lips::LipSequence;
pub use occlusion::occlude_visuals;
pub use params::{Checkpoint, ParamStore, TrainMeta};
pub use train::{train_on_clips, EpochStats, Hyper, TrainOutcome, TrainingClip};

use crate::autodiff::AutodiffError;
use crate::dsp::DspError;
use crate::mask::MaskError;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum ModelError {
    #[error("input has {input} frequency bins, model expects {expected}")]
    BinCountMismatch { input: usize, expected: usize },
    #[error("audio frames {audio_frames} not aligned to visual frames {visual_frames}")]
    AlignmentMismatch {
        audio_frames: usize,
        visual_frames: usize,
    },
    #[error("sample rate {input} Hz does not match model rate {expected} Hz")]
    SampleRateMismatch { input: u32, expected: u32 },
    #[error("no usable training clips")]
    EmptyManifest,
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("streaming mode requires a causal model")]
    StreamingNeedsCausal,
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Mask(#[from] MaskError),
}
