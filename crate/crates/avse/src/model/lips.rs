//! Lip-region frame sequences: 40x80 grayscale at 25 fps.

use ndarray::Array2;
use thiserror::Error;

pub const LIP_HEIGHT: usize = 40;
pub const LIP_WIDTH: usize = 80;
pub const LIP_FPS: u32 = 25;

#[derive(Error, Debug)]
pub enum LipError {
    #[error("frame {index} has shape {got:?}, expected (40, 80)")]
    BadFrameShape { index: usize, got: (usize, usize) },
    #[error("frame {index} holds value {value} outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f32 },
    #[error("{frames} frames but {flags} presence flags")]
    FlagCountMismatch { frames: usize, flags: usize },
}

/// Ordered lip frames with per-frame presence flags. Absent frames are
/// stored all-zero with `present = false`.
#[derive(Debug, Clone, PartialEq)]
pub struct LipSequence {
    frames: Vec<Array2<f32>>,
    present: Vec<bool>,
}

impl LipSequence {
    pub fn new(frames: Vec<Array2<f32>>, present: Vec<bool>) -> Result<Self, LipError> {
        if frames.len() != present.len() {
            return Err(LipError::FlagCountMismatch {
                frames: frames.len(),
                flags: present.len(),
            });
        }
        for (index, f) in frames.iter().enumerate() {
            if f.dim() != (LIP_HEIGHT, LIP_WIDTH) {
                return Err(LipError::BadFrameShape {
                    index,
                    got: f.dim(),
                });
            }
            if let Some(&value) = f.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(LipError::ValueOutOfRange { index, value });
            }
        }
        Ok(Self { frames, present })
    }

    /// All-absent sequence of `n` zero frames.
    pub fn blank(n: usize) -> Self {
        Self {
            frames: vec![Array2::zeros((LIP_HEIGHT, LIP_WIDTH)); n],
            present: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Array2<f32>] {
        &self.frames
    }

    pub fn present(&self) -> &[bool] {
        &self.present
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / LIP_FPS as f64
    }

    /// Zeroes the frame and clears its presence flag.
    pub fn blank_frame(&mut self, index: usize) {
        self.frames[index].fill(0.0);
        self.present[index] = false;
    }

    /// Sub-range `[start, start+len)`, blank-padded past the end.
    pub fn window(&self, start: usize, len: usize) -> Self {
        let mut frames = Vec::with_capacity(len);
        let mut present = Vec::with_capacity(len);
        for i in start..start + len {
            if i < self.frames.len() {
                frames.push(self.frames[i].clone());
                present.push(self.present[i]);
            } else {
                frames.push(Array2::zeros((LIP_HEIGHT, LIP_WIDTH)));
                present.push(false);
            }
        }
        Self { frames, present }
    }

    pub fn blank_count(&self) -> usize {
        self.present.iter().filter(|p| !**p).count()
    }
}
