//! Objective evaluation: SI-SDR, STOI, mask accuracy, and batch
//! evaluation of enhancement systems over dataset manifests.

pub mod accuracy;
pub mod evaluate;
mod si_sdr;
mod stoi;

pub use accuracy::{mask_accuracy, MaskAccuracy};
pub use evaluate::{
    evaluate_manifest, ClipMetrics, EvalError, EvalOptions, MetricReport, SystemKind,
};
pub use si_sdr::{si_sdr, SI_SDR_CAP_DB};
pub use stoi::stoi;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum MetricError {
    #[error("length mismatch: estimate {estimate}, reference {reference}")]
    LengthMismatch { estimate: usize, reference: usize },
    #[error("{0} signal has zero energy")]
    ZeroEnergy(&'static str),
    #[error("only {active_s:.3} s of speech-active signal after silence removal")]
    TooShort { active_s: f64 },
    #[error("waveform is at {got} Hz but {stated} Hz was stated")]
    SampleRateMismatch { got: u32, stated: u32 },
    #[error("mask shapes differ: prediction {pred:?}, oracle {ibm:?}")]
    MaskShapeMismatch {
        pred: (usize, usize),
        ibm: (usize, usize),
    },
    #[error(transparent)]
    Dsp(#[from] crate::dsp::DspError),
}
