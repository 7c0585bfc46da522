//! Named parameter storage and seeded initialization.

use crate::autodiff::{Scalar, Tensor};
use crate::model::config::{ModelConfig, Variant};
use crate::model::ModelError;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Initialization scheme identifier recorded in checkpoints.
pub const INIT_SCHEME: &str = "glorot-uniform; lstm uniform 1/sqrt(units), forget bias 1";

/// Ordered, named parameter tensors. Order is the canonical enumeration
/// order used by the optimizer and the checkpoint payload.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<F> {
    names: Vec<String>,
    tensors: Vec<Tensor<F>>,
}

impl<F: Scalar> ParamStore<F> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor<F>) {
        let name = name.into();
        debug_assert!(self.get(&name).is_none(), "duplicate parameter {name}");
        self.names.push(name);
        self.tensors.push(tensor);
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<F>> {
        self.index(name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<F>> {
        self.index(name).map(move |i| &mut self.tensors[i])
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<F>)> {
        self.names
            .iter()
            .map(|n| n.as_str())
            .zip(self.tensors.iter())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor<F>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<F>] {
        &mut self.tensors
    }

    pub fn total_parameters(&self) -> usize {
        self.tensors.iter().map(|t| t.numel()).sum()
    }

    pub fn cast<G: Scalar>(&self) -> ParamStore<G> {
        ParamStore {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| t.cast()).collect(),
        }
    }
}

impl<F: Scalar> Default for ParamStore<F> {
    fn default() -> Self {
        Self::new()
    }
}

fn glorot<F: Scalar>(rng: &mut ChaCha20Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor<F> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::from_fn(shape, |_| F::from_f64(rng.gen_range(-limit..limit)))
}

fn lstm_uniform<F: Scalar>(rng: &mut ChaCha20Rng, shape: &[usize], units: usize) -> Tensor<F> {
    let limit = 1.0 / (units as f64).sqrt();
    Tensor::from_fn(shape, |_| F::from_f64(rng.gen_range(-limit..limit)))
}

/// Bias vector for a 4-gate LSTM with the forget block set to one.
fn lstm_bias<F: Scalar>(units: usize) -> Tensor<F> {
    Tensor::from_fn(&[4 * units], |i| {
        if i >= units && i < 2 * units {
            F::one()
        } else {
            F::zero()
        }
    })
}

/// How one parameter tensor is initialized.
enum Init {
    Glorot { fan_in: usize, fan_out: usize },
    LstmUniform { units: usize },
    LstmBias { units: usize },
    Zero,
}

/// Canonical parameter enumeration: names, shapes and init rules.
fn param_plan(cfg: &ModelConfig) -> Vec<(String, Vec<usize>, Init)> {
    let mut plan = Vec::new();
    let mut c_in = 1usize;
    for (i, layer) in cfg.audio_conv.iter().enumerate() {
        let (kh, kw) = layer.kernel;
        plan.push((
            format!("audio.conv{}.w", i + 1),
            vec![layer.filters, c_in, kh, kw],
            Init::Glorot {
                fan_in: c_in * kh * kw,
                fan_out: layer.filters * kh * kw,
            },
        ));
        plan.push((
            format!("audio.conv{}.b", i + 1),
            vec![layer.filters],
            Init::Zero,
        ));
        c_in = layer.filters;
    }
    if let Some(proj) = &cfg.audio_projection {
        plan.push((
            "audio.proj.w".into(),
            vec![proj.channels, c_in, 1, 1],
            Init::Glorot {
                fan_in: c_in,
                fan_out: proj.channels,
            },
        ));
        plan.push(("audio.proj.b".into(), vec![proj.channels], Init::Zero));
    }

    if cfg.variant == Variant::AudioVisual {
        let mut c_in = 1usize;
        for (i, layer) in cfg.visual_conv.iter().enumerate() {
            let (kh, kw) = layer.kernel;
            plan.push((
                format!("visual.conv{}.w", i + 1),
                vec![layer.filters, c_in, kh, kw],
                Init::Glorot {
                    fan_in: c_in * kh * kw,
                    fan_out: layer.filters * kh * kw,
                },
            ));
            plan.push((
                format!("visual.conv{}.b", i + 1),
                vec![layer.filters],
                Init::Zero,
            ));
            c_in = layer.filters;
        }
        let u = cfg.visual_lstm_units;
        let d = cfg.visual_flatten_dim();
        plan.push((
            "visual.lstm.wx".into(),
            vec![4 * u, d],
            Init::LstmUniform { units: u },
        ));
        plan.push((
            "visual.lstm.wh".into(),
            vec![4 * u, u],
            Init::LstmUniform { units: u },
        ));
        plan.push(("visual.lstm.b".into(), vec![4 * u], Init::LstmBias { units: u }));
    }

    let u = cfg.fusion_lstm_units;
    let d = cfg.fusion_input_dim();
    plan.push((
        "fusion.lstm.wx".into(),
        vec![4 * u, d],
        Init::LstmUniform { units: u },
    ));
    plan.push((
        "fusion.lstm.wh".into(),
        vec![4 * u, u],
        Init::LstmUniform { units: u },
    ));
    plan.push(("fusion.lstm.b".into(), vec![4 * u], Init::LstmBias { units: u }));

    let fc = cfg.fc_units;
    plan.push((
        "fc1.w".into(),
        vec![fc, u],
        Init::Glorot {
            fan_in: u,
            fan_out: fc,
        },
    ));
    plan.push(("fc1.b".into(), vec![fc], Init::Zero));
    plan.push((
        "fc2.w".into(),
        vec![fc, fc],
        Init::Glorot {
            fan_in: fc,
            fan_out: fc,
        },
    ));
    plan.push(("fc2.b".into(), vec![fc], Init::Zero));
    plan.push((
        "out.w".into(),
        vec![cfg.mask_bins, fc],
        Init::Glorot {
            fan_in: fc,
            fan_out: cfg.mask_bins,
        },
    ));
    plan.push(("out.b".into(), vec![cfg.mask_bins], Init::Zero));
    plan
}

/// Seeded parameter initialization in the canonical order.
pub fn init_params<F: Scalar>(cfg: &ModelConfig, seed: u64) -> Result<ParamStore<F>, ModelError> {
    cfg.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    for (name, shape, init) in param_plan(cfg) {
        let tensor = match init {
            Init::Glorot { fan_in, fan_out } => glorot(&mut rng, &shape, fan_in, fan_out),
            Init::LstmUniform { units } => lstm_uniform(&mut rng, &shape, units),
            Init::LstmBias { units } => lstm_bias(units),
            Init::Zero => Tensor::zeros(&shape),
        };
        store.push(name, tensor);
    }
    Ok(store)
}

/// Training provenance stored alongside the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub epoch: usize,
    /// Validation BCE of the stored parameters; `None` for an untrained
    /// initialization.
    pub best_val_loss: Option<f64>,
    pub init_scheme: String,
}

impl Default for TrainMeta {
    fn default() -> Self {
        Self {
            seed: 0,
            epoch: 0,
            best_val_loss: None,
            init_scheme: INIT_SCHEME.to_string(),
        }
    }
}

/// Everything needed for bit-exact inference: config, parameters, metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ParamStore<f32>,
    pub meta: TrainMeta,
}

impl Checkpoint {
    /// Freshly initialized model.
    pub fn init(cfg: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        let params = init_params(&cfg, seed)?;
        Ok(Self {
            config: cfg,
            params,
            meta: TrainMeta {
                seed,
                ..TrainMeta::default()
            },
        })
    }

    /// Validates that the parameter set matches the architecture exactly
    /// (names, order and shapes).
    pub fn validate(&self) -> Result<(), ModelError> {
        self.config.validate()?;
        let plan = param_plan(&self.config);
        if plan.len() != self.params.len() {
            return Err(ModelError::CorruptCheckpoint(format!(
                "expected {} parameters, found {}",
                plan.len(),
                self.params.len()
            )));
        }
        for ((en, es, _), (gn, gt)) in plan.iter().zip(self.params.iter()) {
            if en != gn || es.as_slice() != gt.shape() {
                return Err(ModelError::CorruptCheckpoint(format!(
                    "parameter {gn} {:?} does not match architecture entry {en} {es:?}",
                    gt.shape(),
                )));
            }
        }
        Ok(())
    }
}
