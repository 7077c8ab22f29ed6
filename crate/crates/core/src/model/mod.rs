//! Sentence classifier abstraction, parameter transplant and windowing.
//!
//! A [`ClassifierModel`] owns its parameters (backbone [`ParameterSet`] plus
//! a freshly initialised two-way head) and delegates the math to an
//! [`Encoder`] looked up by name in an [`EncoderRegistry`].

mod checkpoint;
mod params;
mod toy;
mod window;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;

pub use checkpoint::{
    classify_layer, load_backbone, load_json_checkpoint, load_safetensors, save_json_checkpoint, save_safetensors,
    EnsembleManifest, LayerRole, LoadedBackbone,
};
pub use params::{compatibility, ensemble_init, Group, LayerMismatch, ParameterSet, Tensor, TensorData};
pub use toy::ToyEncoder;
pub use window::{make_windows, meeting_windows, merge_window_probabilities, WindowSpec};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("empty input")]
    EmptyInput,
    #[error("shape error: {0}")]
    Shape(String),
    #[error("incompatible parameter sets: {}", .0.iter().map(|m| m.to_string()).collect::<Vec<_>>().join("; "))]
    Incompatible(Vec<LayerMismatch>),
    #[error("unknown encoder '{0}'")]
    UnknownEncoder(String),
    #[error("invalid model spec: {0}")]
    Spec(String),
    #[error("sentence {sentence_id} needs {len} units but window capacity is {capacity}")]
    SentenceTooLong {
        sentence_id: usize,
        len: usize,
        capacity: usize,
    },
    #[error("window of {sentences} sentence(s) cannot overlap by {overlap}")]
    OverlapTooLarge { sentences: usize, overlap: usize },
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },
}

/// Probability distribution over the two labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution(pub [f64; 2]);

impl Distribution {
    pub fn prob(&self, label: Label) -> f64 {
        self.0[label.index()]
    }

    pub fn positive(&self) -> f64 {
        self.0[1]
    }

    pub fn from_logits(z: [f64; 2]) -> Self {
        let m = z[0].max(z[1]);
        let e = [(z[0] - m).exp(), (z[1] - m).exp()];
        let s = e[0] + e[1];
        Distribution([e[0] / s, e[1] / s])
    }
}

/// Architecture hyper-parameters, serialised into checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub encoder: String,
    pub dropout: f64,
    pub max_input_units: usize,
    pub hidden_size: usize,
    pub feature_buckets: usize,
    pub ngram_orders: Vec<usize>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            encoder: ToyEncoder::NAME.to_string(),
            dropout: 0.3,
            max_input_units: 128,
            hidden_size: 32,
            feature_buckets: 1024,
            ngram_orders: vec![1, 2],
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Spec(format!("dropout must lie in [0,1), got {}", self.dropout)));
        }
        if self.max_input_units == 0 || self.hidden_size == 0 || self.feature_buckets == 0 {
            return Err(ModelError::Spec("sizes must be positive".into()));
        }
        if self.ngram_orders.is_empty() || self.ngram_orders.contains(&0) {
            return Err(ModelError::Spec("ngram_orders must be non-empty and >= 1".into()));
        }
        Ok(())
    }
}

/// Per-parameter gradient buffers keyed by parameter name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients(pub BTreeMap<String, Vec<f64>>);

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.0.get(name).map(Vec::as_slice)
    }

    pub fn get_mut(&mut self, name: &str) -> &mut [f64] {
        self.0
            .get_mut(name)
            .unwrap_or_else(|| panic!("no gradient buffer for {name}"))
    }

    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (name, g) in &other.0 {
            let dst = self.0.entry(name.clone()).or_insert_with(|| vec![0.0; g.len()]);
            for (d, s) in dst.iter_mut().zip(g) {
                *d += scale * s;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in self.0.values_mut() {
            for v in g {
                *v *= s;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.values().all(|g| g.iter().all(|v| v.is_finite()))
    }
}

/// Activations of one forward pass, kept for back-propagation.
pub trait PassTrace: Send {
    fn probs(&self) -> Distribution;
    /// Accumulates parameter gradients given d(loss)/d(logits).
    fn backward(&self, model: &ClassifierModel, dlogits: [f64; 2], grads: &mut Gradients);
}

/// The math behind a classifier: initialisation and a traced forward pass.
pub trait Encoder: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Fresh backbone parameters.
    fn init_backbone(&self, spec: &ModelSpec, rng: &mut ChaCha8Rng) -> Result<ParameterSet, ModelError>;

    /// Fresh classification head on top of the pooled representation.
    fn init_head(&self, spec: &ModelSpec, rng: &mut ChaCha8Rng) -> Result<BTreeMap<String, Tensor>, ModelError>;

    fn trace(
        &self,
        model: &ClassifierModel,
        input: &str,
        seed: u64,
        train_mode: bool,
    ) -> Result<Box<dyn PassTrace>, ModelError>;
}

/// Encoders selectable by name.
#[derive(Debug, Clone)]
pub struct EncoderRegistry {
    encoders: BTreeMap<String, Arc<dyn Encoder>>,
}

impl Default for EncoderRegistry {
    fn default() -> Self {
        let mut r = EncoderRegistry {
            encoders: BTreeMap::new(),
        };
        r.register(Arc::new(ToyEncoder));
        r
    }
}

impl EncoderRegistry {
    pub fn register(&mut self, encoder: Arc<dyn Encoder>) {
        self.encoders.insert(encoder.name().to_string(), encoder);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Encoder>, ModelError> {
        self.encoders
            .get(name)
            .cloned()
            .ok_or_else(|| ModelError::UnknownEncoder(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.encoders.keys().map(String::as_str)
    }
}

/// Serialised classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierCheckpoint {
    pub spec: ModelSpec,
    pub backbone: ParameterSet,
    pub head: BTreeMap<String, Tensor>,
}

#[derive(Clone)]
pub struct ClassifierModel {
    spec: ModelSpec,
    encoder: Arc<dyn Encoder>,
    pub backbone: ParameterSet,
    pub head: BTreeMap<String, Tensor>,
}

impl fmt::Debug for ClassifierModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClassifierModel")
            .field("encoder", &self.encoder.name())
            .field("parameters", &self.num_parameters())
            .finish()
    }
}

impl ClassifierModel {
    /// Randomly initialised model; `seed` drives every initial value.
    pub fn new(registry: &EncoderRegistry, spec: ModelSpec, seed: u64) -> Result<Self, ModelError> {
        spec.validate()?;
        let encoder = registry.get(&spec.encoder)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let backbone = encoder.init_backbone(&spec, &mut rng)?;
        let head = encoder.init_head(&spec, &mut rng)?;
        Ok(ClassifierModel {
            spec,
            encoder,
            backbone,
            head,
        })
    }

    /// Wraps an existing backbone (for instance a transplanted one) with a
    /// freshly initialised head.
    pub fn with_backbone(
        registry: &EncoderRegistry,
        spec: ModelSpec,
        backbone: ParameterSet,
        head_seed: u64,
    ) -> Result<Self, ModelError> {
        let mut model = Self::new(registry, spec, head_seed)?;
        let mismatches = compatibility(&model.backbone, &backbone);
        if !mismatches.is_empty() {
            return Err(ModelError::Incompatible(mismatches));
        }
        model.backbone = backbone;
        Ok(model)
    }

    pub fn from_checkpoint(registry: &EncoderRegistry, ckpt: ClassifierCheckpoint) -> Result<Self, ModelError> {
        let mut model = Self::new(registry, ckpt.spec, 0)?;
        let mismatches = compatibility(&model.backbone, &ckpt.backbone);
        if !mismatches.is_empty() {
            return Err(ModelError::Incompatible(mismatches));
        }
        for (name, t) in &model.head {
            match ckpt.head.get(name) {
                Some(c) if c.shape == t.shape && c.as_f64().is_some() => {}
                _ => return Err(ModelError::Shape(format!("head tensor {name} missing or misshapen"))),
            }
        }
        model.backbone = ckpt.backbone;
        model.head = ckpt.head;
        Ok(model)
    }

    pub fn checkpoint(&self) -> ClassifierCheckpoint {
        ClassifierCheckpoint {
            spec: self.spec.clone(),
            backbone: self.backbone.clone(),
            head: self.head.clone(),
        }
    }

    /// Same parameters with a different dropout rate.
    pub fn with_dropout(mut self, dropout: f64) -> Result<Self, ModelError> {
        let spec = ModelSpec { dropout, ..self.spec.clone() };
        spec.validate()?;
        self.spec = spec;
        Ok(self)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn encoder_name(&self) -> &'static str {
        self.encoder.name()
    }

    /// Backbone plus head scalar count.
    pub fn num_parameters(&self) -> usize {
        self.backbone.num_parameters() + self.head.values().map(Tensor::numel).sum::<usize>()
    }

    /// Class distribution. With `train_mode` dropout masks are drawn from
    /// `seed`; otherwise the pass is deterministic and `seed` is unused.
    pub fn forward(&self, input: &str, seed: u64, train_mode: bool) -> Result<Distribution, ModelError> {
        Ok(self.trace(input, seed, train_mode)?.probs())
    }

    pub fn trace(&self, input: &str, seed: u64, train_mode: bool) -> Result<Box<dyn PassTrace>, ModelError> {
        if input.trim().is_empty() {
            return Err(ModelError::EmptyInput);
        }
        self.encoder.trace(self, input, seed, train_mode)
    }

    /// Zeroed gradient buffers for every trainable tensor.
    pub fn zero_gradients(&self) -> Gradients {
        let mut g = BTreeMap::new();
        for (_, name, t) in self.backbone.iter() {
            g.insert(name.to_string(), vec![0.0; t.numel()]);
        }
        for (name, t) in &self.head {
            g.insert(name.clone(), vec![0.0; t.numel()]);
        }
        Gradients(g)
    }

    pub(crate) fn tensor(&self, name: &str) -> &[f64] {
        self.backbone
            .get(name)
            .or_else(|| self.head.get(name))
            .and_then(Tensor::as_f64)
            .unwrap_or_else(|| panic!("missing f64 tensor {name}"))
    }

    /// Visits every trainable tensor in a fixed order.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&str, &mut [f64])) {
        for (_, name, t) in self.backbone.iter_mut() {
            if let Some(v) = t.as_f64_mut() {
                f(name, v);
            }
        }
        for (name, t) in self.head.iter_mut() {
            if let Some(v) = t.as_f64_mut() {
                f(name, v);
            }
        }
    }
}
