//! File formats and persistence: WAV, lip containers, checkpoints,
//! dataset manifests.

pub mod checkpoint;
pub mod lips;
pub mod manifest;
pub mod wav;
