//! Deterministic toy encoder: hashed n-gram features feeding a one-layer
//! tanh encoder, a tanh pooler and a two-way linear head, with inverted
//! dropout after the encoder and after the pooler.
//!
//! Focus-sentence and context units hash into separate feature namespaces,
//! and each namespace is L2-normalised on its own, so the network can tell
//! the sentence under classification apart from its surroundings.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    ClassifierModel, Distribution, Encoder, Gradients, Group, ModelError, ModelSpec, ParameterSet, PassTrace, Tensor,
};
use crate::context::{CONTEXT_SEPARATOR, FOCUS_CLOSE, FOCUS_OPEN};
use crate::text;

pub const ENCODER_WEIGHT: &str = "encoder.dense.weight";
pub const ENCODER_BIAS: &str = "encoder.dense.bias";
pub const POOLER_WEIGHT: &str = "pooler.dense.weight";
pub const POOLER_BIAS: &str = "pooler.dense.bias";
pub const HEAD_WEIGHT: &str = "classifier.weight";
pub const HEAD_BIAS: &str = "classifier.bias";

#[derive(Debug, Clone, Copy, Default)]
pub struct ToyEncoder;

impl ToyEncoder {
    pub const NAME: &'static str = "toy";
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Namespace {
    Focus,
    Context,
}

/// Splits a rendered input into (namespace, units) segments, truncated to
/// `max_units` in reading order. Unmarked text is all focus.
fn segments(input: &str, max_units: usize) -> Vec<(Namespace, Vec<String>)> {
    let has_marker = input.contains(FOCUS_OPEN);
    let mut budget = max_units;
    let mut out = Vec::new();
    for part in input.split(CONTEXT_SEPARATOR) {
        if budget == 0 {
            break;
        }
        let ns = if !has_marker || part.starts_with(FOCUS_OPEN) {
            Namespace::Focus
        } else {
            Namespace::Context
        };
        let body = part.trim_start_matches(FOCUS_OPEN).trim_end_matches(FOCUS_CLOSE);
        let mut units = text::units(body);
        units.truncate(budget);
        budget -= units.len();
        out.push((ns, units));
    }
    out
}

/// Sparse feature vector: (bucket, value), sorted by bucket.
pub(crate) fn features(input: &str, spec: &ModelSpec) -> Vec<(usize, f64)> {
    let mut per_ns: [HashMap<usize, f64>; 2] = [HashMap::new(), HashMap::new()];
    for (ns, units) in segments(input, spec.max_input_units) {
        let slot = match ns {
            Namespace::Focus => 0,
            Namespace::Context => 1,
        };
        for &n in &spec.ngram_orders {
            if n == 0 || n > units.len() {
                continue;
            }
            for gram in units.windows(n) {
                let key = format!("{slot}\u{1f}{n}\u{1f}{}", gram.join("\u{1f}"));
                let bucket = (text::fnv1a(key.as_bytes()) % spec.feature_buckets as u64) as usize;
                *per_ns[slot].entry(bucket).or_insert(0.0) += 1.0;
            }
        }
    }
    let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
    for counts in &per_ns {
        let norm = counts.values().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        for (b, v) in counts {
            *merged.entry(*b).or_insert(0.0) += v / norm;
        }
    }
    merged.into_iter().collect()
}

fn dropout_mask(rng: &mut ChaCha8Rng, n: usize, rate: f64) -> Vec<f64> {
    let scale = 1.0 / (1.0 - rate);
    (0..n)
        .map(|_| if rng.gen::<f64>() >= rate { scale } else { 0.0 })
        .collect()
}

struct ToyTrace {
    features: Vec<(usize, f64)>,
    hidden: Vec<f64>,
    hidden_mask: Vec<f64>,
    pooled: Vec<f64>,
    pooled_mask: Vec<f64>,
    probs: Distribution,
}

impl PassTrace for ToyTrace {
    fn probs(&self) -> Distribution {
        self.probs
    }

    fn backward(&self, model: &ClassifierModel, dlogits: [f64; 2], grads: &mut Gradients) {
        let h = self.hidden.len();
        let wc = model.tensor(HEAD_WEIGHT);
        let wp = model.tensor(POOLER_WEIGHT);

        let pooled_in: Vec<f64> = self.pooled.iter().zip(&self.pooled_mask).map(|(g, m)| g * m).collect();
        {
            let dwc = grads.get_mut(HEAD_WEIGHT);
            for c in 0..2 {
                for j in 0..h {
                    dwc[c * h + j] += dlogits[c] * pooled_in[j];
                }
            }
        }
        {
            let dbc = grads.get_mut(HEAD_BIAS);
            dbc[0] += dlogits[0];
            dbc[1] += dlogits[1];
        }
        // through head, pooler dropout and tanh
        let dpre_pool: Vec<f64> = (0..h)
            .map(|j| {
                let dg = (dlogits[0] * wc[j] + dlogits[1] * wc[h + j]) * self.pooled_mask[j];
                dg * (1.0 - self.pooled[j] * self.pooled[j])
            })
            .collect();

        let hidden_in: Vec<f64> = self.hidden.iter().zip(&self.hidden_mask).map(|(x, m)| x * m).collect();
        {
            let dwp = grads.get_mut(POOLER_WEIGHT);
            for i in 0..h {
                for j in 0..h {
                    dwp[i * h + j] += dpre_pool[i] * hidden_in[j];
                }
            }
        }
        {
            let dbp = grads.get_mut(POOLER_BIAS);
            for i in 0..h {
                dbp[i] += dpre_pool[i];
            }
        }
        let dpre_hidden: Vec<f64> = (0..h)
            .map(|j| {
                let dh: f64 = (0..h).map(|i| wp[i * h + j] * dpre_pool[i]).sum::<f64>() * self.hidden_mask[j];
                dh * (1.0 - self.hidden[j] * self.hidden[j])
            })
            .collect();

        let d = model.spec().feature_buckets;
        {
            let dwe = grads.get_mut(ENCODER_WEIGHT);
            for i in 0..h {
                for &(b, x) in &self.features {
                    dwe[i * d + b] += dpre_hidden[i] * x;
                }
            }
        }
        let dbe = grads.get_mut(ENCODER_BIAS);
        for i in 0..h {
            dbe[i] += dpre_hidden[i];
        }
    }
}

impl Encoder for ToyEncoder {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn init_backbone(&self, spec: &ModelSpec, rng: &mut ChaCha8Rng) -> Result<ParameterSet, ModelError> {
        let (h, d) = (spec.hidden_size, spec.feature_buckets);
        let mut set = ParameterSet::new();
        // inputs are unit-norm per namespace, so preactivations have std ~0.5
        let enc_bound = 0.5 * 3f64.sqrt();
        set.insert(Group::Encoder, ENCODER_WEIGHT, Tensor::from_f64(vec![h, d], uniform(rng, h * d, enc_bound))?)?;
        set.insert(Group::Encoder, ENCODER_BIAS, Tensor::zeros(vec![h]))?;
        let pool_bound = (6.0 / (2 * h) as f64).sqrt();
        set.insert(Group::Pooler, POOLER_WEIGHT, Tensor::from_f64(vec![h, h], uniform(rng, h * h, pool_bound))?)?;
        set.insert(Group::Pooler, POOLER_BIAS, Tensor::zeros(vec![h]))?;
        Ok(set)
    }

    fn init_head(&self, spec: &ModelSpec, rng: &mut ChaCha8Rng) -> Result<BTreeMap<String, Tensor>, ModelError> {
        let h = spec.hidden_size;
        let bound = (6.0 / (h + 2) as f64).sqrt();
        let mut head = BTreeMap::new();
        head.insert(HEAD_WEIGHT.to_string(), Tensor::from_f64(vec![2, h], uniform(rng, 2 * h, bound))?);
        head.insert(HEAD_BIAS.to_string(), Tensor::zeros(vec![2]));
        Ok(head)
    }

    fn trace(
        &self,
        model: &ClassifierModel,
        input: &str,
        seed: u64,
        train_mode: bool,
    ) -> Result<Box<dyn PassTrace>, ModelError> {
        let spec = model.spec();
        let (h, d) = (spec.hidden_size, spec.feature_buckets);
        let features = features(input, spec);

        let we = model.tensor(ENCODER_WEIGHT);
        let be = model.tensor(ENCODER_BIAS);
        let hidden: Vec<f64> = (0..h)
            .map(|i| {
                let row = &we[i * d..(i + 1) * d];
                (be[i] + features.iter().map(|&(b, x)| row[b] * x).sum::<f64>()).tanh()
            })
            .collect();

        let (hidden_mask, pooled_mask_seedable) = if train_mode && spec.dropout > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (dropout_mask(&mut rng, h, spec.dropout), Some(rng))
        } else {
            (vec![1.0; h], None)
        };

        let wp = model.tensor(POOLER_WEIGHT);
        let bp = model.tensor(POOLER_BIAS);
        let pooled: Vec<f64> = (0..h)
            .map(|i| {
                let s: f64 = (0..h).map(|j| wp[i * h + j] * hidden[j] * hidden_mask[j]).sum();
                (bp[i] + s).tanh()
            })
            .collect();
        let pooled_mask = match pooled_mask_seedable {
            Some(mut rng) => dropout_mask(&mut rng, h, spec.dropout),
            None => vec![1.0; h],
        };

        let wc = model.tensor(HEAD_WEIGHT);
        let bc = model.tensor(HEAD_BIAS);
        let mut logits = [bc[0], bc[1]];
        for (c, logit) in logits.iter_mut().enumerate() {
            *logit += (0..h).map(|j| wc[c * h + j] * pooled[j] * pooled_mask[j]).sum::<f64>();
        }
        Ok(Box::new(ToyTrace {
            features,
            hidden,
            hidden_mask,
            pooled,
            pooled_mask,
            probs: Distribution::from_logits(logits),
        }))
    }
}
