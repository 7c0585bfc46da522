//! Audio-visual speech enhancement pipeline.
//!
//! The crate covers the full chain from waveforms to enhanced speech:
//!
//! * [`dsp`] — STFT analysis/synthesis and resampling,
//! * [`mask`] — ideal binary masks, mask application and resynthesis,
//! * [`mix`] — synthetic mixture generation at controlled SNRs,
//! * [`autodiff`] — a small reverse-mode differentiation engine with the
//!   layers the mask estimator needs (dilated conv, LSTM, dense) plus Adam,
//! * [`model`] — the audio-only / audio-visual mask-estimation network,
//!   training loop, and whole/streaming inference,
//! * [`baselines`] — spectral subtraction and log-MMSE references,
//! * [`metrics`] — SI-SDR, STOI, mask accuracy and manifest evaluation,
//! * [`io`] — WAV, lip-sequence and checkpoint file formats, manifests,
//! * [`synth`] — seeded speech-like/noise test-signal generators.

pub mod autodiff;
pub mod baselines;
pub mod cli;
pub mod dsp;
pub mod io;
pub mod mask;
pub mod metrics;
pub mod mix;
pub mod model;
pub mod synth;
