//! Consistency-regularised training: two stochastic passes per focus
//! sentence, cross-entropy on both plus a weighted symmetric KL between
//! them.
//!
//! The way the two inputs are built is a [`PairStrategy`] looked up by
//! name in a [`StrategyRegistry`]; the built-in ones cover plain
//! cross-entropy, R-Drop on sentences or contexts, and Context-Drop with
//! fixed or dynamically sampled context.

mod config;
mod loss;
mod optim;
mod strategy;
mod trainer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{ContextError, ContextMode};
use crate::evaluation::EvalError;
use crate::model::{ClassifierModel, Gradients, ModelError};

pub use config::ExperimentConfig;
pub use loss::{bidirectional_kl, ce_loss, LossBreakdown, EPSILON};
pub use optim::{scheduled_lr, AdamW, OptimizerConfig};
pub use strategy::{
    build_pair, build_pair_from_plan, inference_input, Method, PairStrategy, StrategyRegistry, TrainingPair, ViewSpec,
};
pub use trainer::{
    CellSummary, Dataset, EpochLog, GridOutcome, PreparedSplit, RunCell, SeedResult, TrainOutcome, TrainRunConfig,
    Trainer,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("distribution {0:?} is not normalised")]
    NotNormalized([f64; 2]),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("{0} set is empty")]
    EmptyDataset(&'static str),
    #[error("loss diverged at epoch {epoch}, batch {batch} (value {value})")]
    Divergent { epoch: usize, batch: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub alpha: f64,
    pub method: Method,
    pub context_mode: ContextMode,
    pub keep_prob: f64,
    /// Separate keep probabilities for the two dynamic views; overrides
    /// `keep_prob` when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub view_keep_probs: Option<[f64; 2]>,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig::new(Method::ContextDropDynamic, ContextMode::LocalAndGlobal)
    }
}

impl LossConfig {
    /// Default alpha for the method and default keep probability for the mode.
    pub fn new(method: Method, context_mode: ContextMode) -> Self {
        LossConfig {
            alpha: method.default_alpha(),
            method,
            context_mode,
            keep_prob: context_mode.default_keep_prob(),
            view_keep_probs: None,
        }
    }

    /// Alpha actually applied: always 0 for plain cross-entropy.
    pub fn effective_alpha(&self) -> f64 {
        if self.method == Method::CeOnly {
            0.0
        } else {
            self.alpha
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(TrainError::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        let probs = std::iter::once(self.keep_prob).chain(self.view_keep_probs.into_iter().flatten());
        for p in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(TrainError::Config(format!("keep probabilities must lie in [0,1], got {p}")));
            }
        }
        Ok(())
    }
}

fn pair_loss_inner(
    model: &ClassifierModel,
    pair: &TrainingPair,
    cfg: &LossConfig,
    grads: Option<&mut Gradients>,
) -> Result<LossBreakdown, TrainError> {
    let t1 = model.trace(&pair.input_1, pair.seeds.0, true)?;
    let t2 = model.trace(&pair.input_2, pair.seeds.1, true)?;
    let (breakdown, [d1, d2]) = loss::loss_and_logit_grads(&t1.probs(), &t2.probs(), pair.label, cfg.effective_alpha())?;
    if let Some(g) = grads {
        t1.backward(model, d1, g);
        t2.backward(model, d2, g);
    }
    Ok(breakdown)
}

/// Runs both passes in train mode and combines them into the loss.
pub fn pair_loss(model: &ClassifierModel, pair: &TrainingPair, cfg: &LossConfig) -> Result<LossBreakdown, TrainError> {
    pair_loss_inner(model, pair, cfg, None)
}

/// Like [`pair_loss`], also accumulating parameter gradients into `grads`.
pub fn pair_loss_with_grad(
    model: &ClassifierModel,
    pair: &TrainingPair,
    cfg: &LossConfig,
    grads: &mut Gradients,
) -> Result<LossBreakdown, TrainError> {
    pair_loss_inner(model, pair, cfg, Some(grads))
}

/// Mean loss over a batch and the gradient of that mean.
pub fn batch_loss(
    model: &ClassifierModel,
    pairs: &[TrainingPair],
    cfg: &LossConfig,
) -> Result<(LossBreakdown, Gradients), TrainError> {
    let mut grads = model.zero_gradients();
    let mut sum = LossBreakdown::default();
    for p in pairs {
        let b = pair_loss_with_grad(model, p, cfg, &mut grads)?;
        sum.ce += b.ce;
        sum.kl += b.kl;
        sum.total += b.total;
    }
    let n = pairs.len().max(1) as f64;
    grads.scale(1.0 / n);
    Ok((
        LossBreakdown {
            ce: sum.ce / n,
            kl: sum.kl / n,
            total: sum.total / n,
        },
        grads,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::ContextConfig;
    use crate::corpus::synthetic::{generate, SyntheticConfig};
    use crate::model::{EncoderRegistry, ModelSpec};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> ClassifierModel {
        ClassifierModel::new(&EncoderRegistry::default(), ModelSpec::default(), 1).unwrap()
    }

    fn pairs(cfg: &LossConfig, n: usize) -> Vec<TrainingPair> {
        let m = generate(&SyntheticConfig::default(), 4).remove(0);
        let ctx = ContextConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        (0..n).map(|i| build_pair(&m, i % m.len(), cfg, &ctx, &mut rng).unwrap()).collect()
    }

    #[test]
    fn alpha_zero_total_is_ce() {
        let mut cfg = LossConfig::new(Method::ContextDropFixed, ContextMode::Local);
        cfg.alpha = 0.0;
        let m = model();
        for p in pairs(&cfg, 8) {
            let b = pair_loss(&m, &p, &cfg).unwrap();
            assert_eq!(b.total, b.ce);
        }
    }

    #[test]
    fn alpha_zero_matches_plain_ce_per_batch() {
        let mut fixed = LossConfig::new(Method::ContextDropFixed, ContextMode::LocalAndGlobal);
        fixed.alpha = 0.0;
        let ce_only = LossConfig {
            method: Method::CeOnly,
            alpha: 4.0,
            ..fixed.clone()
        };
        let m = model();
        let ps = pairs(&fixed, 24);
        for batch in ps.chunks(8) {
            let (a, ga) = batch_loss(&m, batch, &fixed).unwrap();
            let (b, gb) = batch_loss(&m, batch, &ce_only).unwrap();
            assert_eq!(a.total, b.total);
            assert_eq!(ga, gb);
        }
    }

    #[test]
    fn identical_passes_have_zero_kl() {
        let cfg = LossConfig::new(Method::RDropContext, ContextMode::Local);
        let m = model();
        let mut p = pairs(&cfg, 1).remove(0);
        p.seeds.1 = p.seeds.0;
        let b = pair_loss(&m, &p, &cfg).unwrap();
        assert_eq!(b.kl, 0.0);
        assert_eq!(b.total, b.ce);
    }

    #[test]
    fn batch_mean_ignores_order() {
        let cfg = LossConfig::default();
        let m = model();
        let mut ps = pairs(&cfg, 16);
        let (a, _) = batch_loss(&m, &ps, &cfg).unwrap();
        ps.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
        let (b, _) = batch_loss(&m, &ps, &cfg).unwrap();
        assert!((a.total - b.total).abs() < 1e-12);
    }

    #[test]
    fn validate_rejects_bad_values() {
        let mut c = LossConfig::default();
        c.alpha = -1.0;
        assert!(c.validate().is_err());
        let mut c = LossConfig::default();
        c.view_keep_probs = Some([0.5, 1.5]);
        assert!(c.validate().is_err());
        assert!(LossConfig::default().validate().is_ok());
    }

    #[test]
    fn defaults_follow_method_and_mode() {
        assert_eq!(LossConfig::new(Method::RDropSentence, ContextMode::Local).alpha, 4.0);
        assert_eq!(LossConfig::new(Method::ContextDropDynamic, ContextMode::Local).keep_prob, 0.5);
        let d = LossConfig::default();
        assert_eq!((d.alpha, d.keep_prob), (1.0, 0.7));
        assert_eq!(LossConfig::new(Method::CeOnly, ContextMode::Sentence).effective_alpha(), 0.0);
    }
}
