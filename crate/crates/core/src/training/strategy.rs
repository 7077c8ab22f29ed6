use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LossConfig, TrainError};
use crate::context::{build_plan, render_input, sample_view, ContextConfig, ContextPlan, RenderOptions};
use crate::corpus::{Label, Meeting};

/// Training method names accepted in configs and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    CeOnly,
    RDropSentence,
    RDropContext,
    ContextDropFixed,
    ContextDropDynamic,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::CeOnly,
        Method::RDropSentence,
        Method::RDropContext,
        Method::ContextDropFixed,
        Method::ContextDropDynamic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::CeOnly => "ce_only",
            Method::RDropSentence => "r_drop_sentence",
            Method::RDropContext => "r_drop_context",
            Method::ContextDropFixed => "context_drop_fixed",
            Method::ContextDropDynamic => "context_drop_dynamic",
        }
    }

    /// 4.0 for R-Drop, 1.0 for Context-Drop, 0 for plain cross-entropy.
    pub fn default_alpha(self) -> f64 {
        match self {
            Method::CeOnly => 0.0,
            Method::RDropSentence | Method::RDropContext => 4.0,
            Method::ContextDropFixed | Method::ContextDropDynamic => 1.0,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method '{s}'"))
    }
}

/// How one of the two training inputs is rendered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ViewSpec {
    SentenceOnly,
    FullContext,
    /// Each context sentence kept independently with this probability.
    Sampled(f64),
}

/// A training method: how the two views of a pair are built and how the
/// model is queried at evaluation time.
pub trait PairStrategy: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn views(&self, cfg: &LossConfig) -> [ViewSpec; 2];

    /// Whether dev/test inputs carry the (fully kept) context.
    fn inference_uses_context(&self) -> bool {
        true
    }

    /// Whether the consistency term is active; when false alpha is 0.
    fn uses_consistency(&self) -> bool {
        true
    }
}

#[derive(Debug)]
struct CeOnly;
#[derive(Debug)]
struct RDropSentence;
#[derive(Debug)]
struct RDropContext;
#[derive(Debug)]
struct ContextDropFixed;
#[derive(Debug)]
struct ContextDropDynamic;

impl PairStrategy for CeOnly {
    fn name(&self) -> &'static str {
        Method::CeOnly.as_str()
    }
    fn views(&self, _: &LossConfig) -> [ViewSpec; 2] {
        [ViewSpec::FullContext; 2]
    }
    fn uses_consistency(&self) -> bool {
        false
    }
}

impl PairStrategy for RDropSentence {
    fn name(&self) -> &'static str {
        Method::RDropSentence.as_str()
    }
    fn views(&self, _: &LossConfig) -> [ViewSpec; 2] {
        [ViewSpec::SentenceOnly; 2]
    }
    fn inference_uses_context(&self) -> bool {
        false
    }
}

impl PairStrategy for RDropContext {
    fn name(&self) -> &'static str {
        Method::RDropContext.as_str()
    }
    fn views(&self, _: &LossConfig) -> [ViewSpec; 2] {
        [ViewSpec::FullContext; 2]
    }
}

impl PairStrategy for ContextDropFixed {
    fn name(&self) -> &'static str {
        Method::ContextDropFixed.as_str()
    }
    fn views(&self, _: &LossConfig) -> [ViewSpec; 2] {
        [ViewSpec::SentenceOnly, ViewSpec::FullContext]
    }
}

impl PairStrategy for ContextDropDynamic {
    fn name(&self) -> &'static str {
        Method::ContextDropDynamic.as_str()
    }
    fn views(&self, cfg: &LossConfig) -> [ViewSpec; 2] {
        let [a, b] = cfg.view_keep_probs.unwrap_or([cfg.keep_prob; 2]);
        [ViewSpec::Sampled(a), ViewSpec::Sampled(b)]
    }
}

/// Strategies selectable by name.
#[derive(Debug, Clone)]
pub struct StrategyRegistry {
    strategies: BTreeMap<String, Arc<dyn PairStrategy>>,
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        let mut r = StrategyRegistry {
            strategies: BTreeMap::new(),
        };
        r.register(Arc::new(CeOnly));
        r.register(Arc::new(RDropSentence));
        r.register(Arc::new(RDropContext));
        r.register(Arc::new(ContextDropFixed));
        r.register(Arc::new(ContextDropDynamic));
        r
    }
}

impl StrategyRegistry {
    pub fn register(&mut self, strategy: Arc<dyn PairStrategy>) {
        self.strategies.insert(strategy.name().to_string(), strategy);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn PairStrategy>, TrainError> {
        self.strategies
            .get(name)
            .cloned()
            .ok_or_else(|| TrainError::Config(format!("no training strategy named '{name}'")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.strategies.keys().map(String::as_str)
    }
}

/// Two inputs for the same focus sentence plus the dropout seeds of the
/// two forward passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub input_1: String,
    pub input_2: String,
    pub label: Label,
    pub seeds: (u64, u64),
}

fn render_view(
    meeting: &Meeting,
    plan: &ContextPlan,
    view: ViewSpec,
    seed: u64,
    opts: &RenderOptions,
) -> Result<String, TrainError> {
    let focus = plan.focus.sentence_id;
    Ok(match view {
        ViewSpec::SentenceOnly => render_input(meeting, focus, &[], opts)?,
        ViewSpec::FullContext => render_input(meeting, focus, &plan.context_ids(), opts)?,
        ViewSpec::Sampled(p) => sample_view(meeting, plan, p, seed, opts)?.rendered_text,
    })
}

/// Builds a pair from a precomputed plan.
///
/// Exactly four values are drawn from `rng` whatever the strategy: two
/// view-sampling seeds, then two dropout seeds.
pub fn build_pair_from_plan<R: Rng>(
    meeting: &Meeting,
    plan: &ContextPlan,
    strategy: &dyn PairStrategy,
    cfg: &LossConfig,
    render: &RenderOptions,
    rng: &mut R,
) -> Result<TrainingPair, TrainError> {
    let view_seeds: [u64; 2] = [rng.gen(), rng.gen()];
    let seeds = (rng.gen(), rng.gen());
    let [v1, v2] = strategy.views(cfg);
    let label = meeting.sentences[plan.focus.sentence_id].label;
    Ok(TrainingPair {
        input_1: render_view(meeting, plan, v1, view_seeds[0], render)?,
        input_2: render_view(meeting, plan, v2, view_seeds[1], render)?,
        label,
        seeds,
    })
}

/// Builds a pair for `focus_id` using the built-in strategy for
/// `cfg.method`; `ctx.mode` is replaced by `cfg.context_mode`.
pub fn build_pair<R: Rng>(
    meeting: &Meeting,
    focus_id: usize,
    cfg: &LossConfig,
    ctx: &ContextConfig,
    rng: &mut R,
) -> Result<TrainingPair, TrainError> {
    let ctx = ContextConfig {
        mode: cfg.context_mode,
        keep_prob: cfg.keep_prob,
        ..ctx.clone()
    };
    let plan = build_plan(meeting, focus_id, &ctx)?;
    let strategy = StrategyRegistry::default().get(cfg.method.as_str())?;
    build_pair_from_plan(meeting, &plan, strategy.as_ref(), cfg, &ctx.render, rng)
}

/// The dev/test input for a focus sentence: full context without dropping,
/// or the bare sentence for strategies trained on sentences only.
pub fn inference_input(
    meeting: &Meeting,
    plan: &ContextPlan,
    strategy: &dyn PairStrategy,
    render: &RenderOptions,
) -> Result<String, TrainError> {
    let view = if strategy.inference_uses_context() {
        ViewSpec::FullContext
    } else {
        ViewSpec::SentenceOnly
    };
    render_view(meeting, plan, view, 0, render)
}
