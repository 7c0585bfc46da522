//! Training loop: seeded, single-threaded, deterministic.
//!
//! Targets are oracle binary masks computed from the mixture components;
//! the loss is mean binary cross-entropy on the sigmoid mask outputs.
//! Batches accumulate clip gradients in a fixed order before each Adam
//! update, validation runs at every epoch end, and the best-validation
//! parameters are returned with early stopping on stalls.

use crate::autodiff::{AdamConfig, AdamState, Graph, Tensor};
use crate::dsp;
use crate::io::manifest::Split;
use crate::mask::{ideal_binary_mask, MaskConfig};
use crate::mix::Mixture;
use crate::model::config::{ModelConfig, Variant};
use crate::model::infer::frame_plan;
use crate::model::lips::LipSequence;
use crate::model::network::{forward_mask, lips_to_tensor, GraphParams};
use crate::model::params::{init_params, Checkpoint, TrainMeta, INIT_SCHEME};
use crate::model::ModelError;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub lr: f64,
    pub batch: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Optional early exit once the epoch training BCE drops below this.
    pub stop_at_train_bce: Option<f64>,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            batch: 1,
            max_epochs: 50,
            patience: 5,
            seed: 0,
            stop_at_train_bce: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_bce: f64,
    pub val_bce: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochStats>,
    pub warnings: Vec<String>,
}

/// One prepared example: input magnitude, target mask, optional lip tensor.
#[derive(Debug, Clone)]
pub struct TrainingClip {
    pub id: String,
    pub split: Split,
    /// `[t, bins]` noisy magnitude.
    pub noisy_mag: Tensor<f32>,
    /// `[t, bins]` oracle mask target.
    pub target: Tensor<f32>,
    /// `[t_v, 1, 40, 80]`, present for the audio-visual variant.
    pub lips: Option<Tensor<f32>>,
}

/// Builds the network input and oracle target from a materialized mixture.
/// Missing lip frames become zero vectors.
pub fn prepare_training_clip(
    id: impl Into<String>,
    split: Split,
    mixture: &Mixture,
    lips: Option<&LipSequence>,
    cfg: &ModelConfig,
    mask_cfg: &MaskConfig,
) -> Result<TrainingClip, ModelError> {
    let stft_cfg = cfg.stft()?;
    let (t_v, t) = frame_plan(cfg, mixture.mixture.len())?;
    let noisy = dsp::stft(&mixture.mixture, &stft_cfg, Some(t))?;
    let clean = dsp::stft(&mixture.clean, &stft_cfg, Some(t))?;
    let noise = dsp::stft(&mixture.scaled_noise, &stft_cfg, Some(t))?;
    let ibm = ideal_binary_mask(&clean, &noise, mask_cfg)?;

    let to_tensor = |a: &ndarray::Array2<f32>| {
        Tensor::new(vec![a.nrows(), a.ncols()], a.iter().copied().collect()).expect("plane shape")
    };
    let lips_tensor = match cfg.variant {
        Variant::AudioOnly => None,
        Variant::AudioVisual => Some(match lips {
            Some(l) => lips_to_tensor(&l.window(0, t_v)),
            None => lips_to_tensor(&LipSequence::blank(t_v)),
        }),
    };
    Ok(TrainingClip {
        id: id.into(),
        split,
        noisy_mag: to_tensor(&noisy.magnitude),
        target: to_tensor(ibm.values()),
        lips: lips_tensor,
    })
}

fn clip_loss_and_grads(
    cfg: &ModelConfig,
    store: &crate::model::params::ParamStore<f32>,
    clip: &TrainingClip,
    want_grads: bool,
) -> Result<(f64, Vec<Option<Tensor<f32>>>), ModelError> {
    let mut g = Graph::new();
    let params = GraphParams::register(&mut g, store, want_grads);
    let mag = g.input(clip.noisy_mag.clone());
    let lips = clip.lips.as_ref().map(|l| g.input(l.clone()));
    let mask = forward_mask(&mut g, cfg, &params, mag, lips)?;
    let target = g.input(clip.target.clone());
    let loss = g.bce_loss(mask, target)?;
    let loss_v = g.value(loss).data()[0] as f64;
    if !want_grads {
        return Ok((loss_v, Vec::new()));
    }
    g.backward(loss)?;
    let grads = params
        .ids()
        .iter()
        .map(|&id| g.grad(id).cloned())
        .collect();
    Ok((loss_v, grads))
}

/// Trains on prepared clips. `on_epoch` observes every epoch's statistics.
pub fn train_on_clips(
    cfg: &ModelConfig,
    clips: &[TrainingClip],
    hyper: &Hyper,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainOutcome, ModelError> {
    cfg.validate()?;
    if clips.is_empty() {
        return Err(ModelError::EmptyManifest);
    }
    for clip in clips {
        if clip.noisy_mag.shape() != clip.target.shape() {
            return Err(ModelError::InvalidConfig(format!(
                "clip {}: input {:?} and target {:?} differ",
                clip.id,
                clip.noisy_mag.shape(),
                clip.target.shape()
            )));
        }
        if clip.noisy_mag.shape()[1] != cfg.mask_bins {
            return Err(ModelError::BinCountMismatch {
                input: clip.noisy_mag.shape()[1],
                expected: cfg.mask_bins,
            });
        }
        if cfg.variant == Variant::AudioVisual && clip.lips.is_none() {
            return Err(ModelError::InvalidConfig(format!(
                "clip {}: audio_visual training needs a lip tensor (blank allowed)",
                clip.id
            )));
        }
    }

    let mut warnings = Vec::new();
    let train_idx: Vec<usize> = (0..clips.len())
        .filter(|&i| clips[i].split == Split::Train)
        .collect();
    let mut val_idx: Vec<usize> = (0..clips.len())
        .filter(|&i| clips[i].split == Split::Val)
        .collect();
    if train_idx.is_empty() {
        return Err(ModelError::EmptyManifest);
    }
    if val_idx.is_empty() {
        warnings.push("no validation clips; validating on the training set".into());
        val_idx = train_idx.clone();
    }

    let mut store = init_params::<f32>(cfg, hyper.seed)?;
    let mut adam = AdamState::new(AdamConfig::with_lr(hyper.lr), store.tensors());
    let batch = hyper.batch.max(1);

    let mut best_params = store.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut stale = 0usize;
    let mut log = Vec::new();

    for epoch in 1..=hyper.max_epochs {
        let mut order = train_idx.clone();
        let mut rng =
            ChaCha20Rng::seed_from_u64(hyper.seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        order.shuffle(&mut rng);

        let mut train_bce = 0.0f64;
        for chunk in order.chunks(batch) {
            let mut acc: Vec<Option<Tensor<f32>>> = vec![None; store.len()];
            for &ci in chunk {
                let (loss, grads) = clip_loss_and_grads(cfg, &store, &clips[ci], true)?;
                train_bce += loss;
                for (slot, g) in acc.iter_mut().zip(grads) {
                    match (slot.as_mut(), g) {
                        (Some(a), Some(g)) => a.add_assign(&g),
                        (None, Some(g)) => *slot = Some(g),
                        _ => {}
                    }
                }
            }
            let scale = 1.0 / chunk.len() as f64;
            for g in acc.iter_mut().flatten() {
                for v in g.data_mut() {
                    *v = (*v as f64 * scale) as f32;
                }
            }
            let grad_refs: Vec<Option<&Tensor<f32>>> = acc.iter().map(|g| g.as_ref()).collect();
            adam.step(store.tensors_mut(), &grad_refs)?;
        }
        train_bce /= train_idx.len() as f64;

        let mut val_bce = 0.0f64;
        for &vi in &val_idx {
            val_bce += clip_loss_and_grads(cfg, &store, &clips[vi], false)?.0;
        }
        val_bce /= val_idx.len() as f64;

        let stats = EpochStats {
            epoch,
            train_bce,
            val_bce,
        };
        log.push(stats);
        on_epoch(&stats);

        if val_bce < best_val {
            best_val = val_bce;
            best_epoch = epoch;
            best_params = store.clone();
            stale = 0;
        } else {
            stale += 1;
        }

        if hyper
            .stop_at_train_bce
            .is_some_and(|target| train_bce < target)
        {
            break;
        }
        if stale > hyper.patience {
            break;
        }
    }

    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            config: cfg.clone(),
            params: best_params,
            meta: TrainMeta {
                seed: hyper.seed,
                epoch: best_epoch,
                best_val_loss: Some(best_val),
                init_scheme: INIT_SCHEME.to_string(),
            },
        },
        log,
        warnings,
    })
}
