//! Visual-occlusion experiment mechanics.

use crate::model::lips::LipSequence;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Blanks exactly `round(fraction * frames)` lip frames, chosen uniformly
/// without replacement from the given seed. Fractions outside `[0, 1]` are
/// clamped.
pub fn occlude_visuals(lips: &LipSequence, fraction: f64, seed: u64) -> LipSequence {
    let n = lips.len();
    let k = (fraction.clamp(0.0, 1.0) * n as f64).round() as usize;
    let mut out = lips.clone();
    if k == 0 || n == 0 {
        return out;
    }
    // partial Fisher-Yates: the first k slots are the chosen indices
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..k.min(n) {
        let j = rng.gen_range(i..n);
        indices.swap(i, j);
    }
    for &idx in &indices[..k.min(n)] {
        out.blank_frame(idx);
    }
    out
}
