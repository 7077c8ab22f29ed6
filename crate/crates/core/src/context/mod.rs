//! Local and global context selection and keep/drop context views.

mod render;
mod similarity;

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Meeting;

pub use render::{render_input, RenderOptions, CONTEXT_SEPARATOR, FOCUS_CLOSE, FOCUS_OPEN};
pub use similarity::ngram_cosine;

#[derive(Debug, Error)]
pub enum ContextError {
    #[error("meeting {meeting_id}: sentence {sentence_id} out of range (len {len})")]
    SentenceOutOfRange {
        meeting_id: String,
        sentence_id: usize,
        len: usize,
    },
    #[error("invalid context config: {0}")]
    Config(String),
    #[error("context plan line {line}: {message}")]
    PlanFormat { line: usize, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Which context an input is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    Sentence,
    Local,
    Global,
    LocalAndGlobal,
}

impl ContextMode {
    pub const ALL: [ContextMode; 4] = [
        ContextMode::Sentence,
        ContextMode::Local,
        ContextMode::Global,
        ContextMode::LocalAndGlobal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ContextMode::Sentence => "sentence",
            ContextMode::Local => "local",
            ContextMode::Global => "global",
            ContextMode::LocalAndGlobal => "local_and_global",
        }
    }

    pub fn uses_local(self) -> bool {
        matches!(self, ContextMode::Local | ContextMode::LocalAndGlobal)
    }

    pub fn uses_global(self) -> bool {
        matches!(self, ContextMode::Global | ContextMode::LocalAndGlobal)
    }

    /// 0.5 for a single context source, 0.7 when both are combined.
    pub fn default_keep_prob(self) -> f64 {
        match self {
            ContextMode::LocalAndGlobal => 0.7,
            _ => 0.5,
        }
    }
}

impl fmt::Display for ContextMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContextMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ContextMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown context mode '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextConfig {
    pub num_preceding: usize,
    pub num_following: usize,
    pub global_top_k: usize,
    pub ngram_orders: BTreeSet<usize>,
    pub keep_prob: f64,
    pub mode: ContextMode,
    pub render: RenderOptions,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig::for_mode(ContextMode::LocalAndGlobal)
    }
}

impl ContextConfig {
    /// One preceding and one following sentence, top-2 global, unigrams and
    /// bigrams, keep probability from [`ContextMode::default_keep_prob`].
    pub fn for_mode(mode: ContextMode) -> Self {
        ContextConfig {
            num_preceding: 1,
            num_following: 1,
            global_top_k: 2,
            ngram_orders: [1, 2].into_iter().collect(),
            keep_prob: mode.default_keep_prob(),
            mode,
            render: RenderOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ContextError> {
        if !(0.0..=1.0).contains(&self.keep_prob) {
            return Err(ContextError::Config(format!(
                "keep_prob must lie in [0,1], got {}",
                self.keep_prob
            )));
        }
        if self.ngram_orders.is_empty() || self.ngram_orders.contains(&0) {
            return Err(ContextError::Config("ngram_orders must be a non-empty set of integers >= 1".into()));
        }
        Ok(())
    }
}

/// A retrieved global-context sentence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredSentence {
    pub sentence_id: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FocusRef {
    pub meeting_id: String,
    pub sentence_id: usize,
}

/// Context references for one focus sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextPlan {
    pub focus: FocusRef,
    pub local_ids: Vec<usize>,
    pub global_ids: Vec<ScoredSentence>,
}

impl ContextPlan {
    pub fn sentence_only(meeting: &Meeting, focus_id: usize) -> Self {
        ContextPlan {
            focus: FocusRef {
                meeting_id: meeting.meeting_id.clone(),
                sentence_id: focus_id,
            },
            local_ids: Vec::new(),
            global_ids: Vec::new(),
        }
    }

    /// Local and global ids merged in document order.
    pub fn context_ids(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .local_ids
            .iter()
            .copied()
            .chain(self.global_ids.iter().map(|g| g.sentence_id))
            .collect();
        set.into_iter().collect()
    }
}

/// A plan with the subset of its context that survived sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextView {
    pub plan: ContextPlan,
    pub kept_ids: Vec<usize>,
    pub rendered_text: String,
}

fn check_focus(meeting: &Meeting, focus_id: usize) -> Result<(), ContextError> {
    if focus_id >= meeting.len() {
        return Err(ContextError::SentenceOutOfRange {
            meeting_id: meeting.meeting_id.clone(),
            sentence_id: focus_id,
            len: meeting.len(),
        });
    }
    Ok(())
}

/// Up to `num_preceding` prior and `num_following` later ids, clipped at
/// the meeting boundaries, in document order.
pub fn select_local_context(meeting: &Meeting, focus_id: usize, cfg: &ContextConfig) -> Result<Vec<usize>, ContextError> {
    check_focus(meeting, focus_id)?;
    let start = focus_id.saturating_sub(cfg.num_preceding);
    let end = (focus_id + cfg.num_following).min(meeting.len() - 1);
    Ok((start..=end).filter(|i| *i != focus_id).collect())
}

/// Top-k sentences by n-gram cosine to the focus.
///
/// Ordering: higher score, then closer to the focus, then smaller id.
pub fn select_global_context(
    meeting: &Meeting,
    focus_id: usize,
    cfg: &ContextConfig,
) -> Result<Vec<ScoredSentence>, ContextError> {
    check_focus(meeting, focus_id)?;
    if cfg.global_top_k == 0 {
        return Ok(Vec::new());
    }
    let mut scored = similarity::score_all(meeting, focus_id, &cfg.ngram_orders);
    scored.sort_by(|(ia, sa), (ib, sb)| {
        sb.total_cmp(sa)
            .then_with(|| ia.abs_diff(focus_id).cmp(&ib.abs_diff(focus_id)))
            .then_with(|| ia.cmp(ib))
    });
    scored.truncate(cfg.global_top_k);
    Ok(scored
        .into_iter()
        .map(|(sentence_id, score)| ScoredSentence { sentence_id, score })
        .collect())
}

/// Builds the plan for `cfg.mode`. Global sentences already present in the
/// local window are dropped from the global list so each appears once.
pub fn build_plan(meeting: &Meeting, focus_id: usize, cfg: &ContextConfig) -> Result<ContextPlan, ContextError> {
    check_focus(meeting, focus_id)?;
    let mut plan = ContextPlan::sentence_only(meeting, focus_id);
    if cfg.mode.uses_local() {
        plan.local_ids = select_local_context(meeting, focus_id, cfg)?;
    }
    if cfg.mode.uses_global() {
        let local: BTreeSet<usize> = plan.local_ids.iter().copied().collect();
        plan.global_ids = select_global_context(meeting, focus_id, cfg)?
            .into_iter()
            .filter(|g| !local.contains(&g.sentence_id))
            .collect();
    }
    Ok(plan)
}

/// Plans for every sentence of a meeting.
pub fn plan_meeting(meeting: &Meeting, cfg: &ContextConfig) -> Result<Vec<ContextPlan>, ContextError> {
    (0..meeting.len()).map(|i| build_plan(meeting, i, cfg)).collect()
}

/// Keeps each context sentence (visited in document order) with
/// probability `keep_prob`, one uniform draw per sentence.
pub fn sample_kept<R: Rng>(plan: &ContextPlan, keep_prob: f64, rng: &mut R) -> Vec<usize> {
    plan.context_ids()
        .into_iter()
        .filter(|_| rng.gen::<f64>() < keep_prob)
        .collect()
}

/// Samples a context view with a generator seeded from `seed`.
pub fn sample_view(
    meeting: &Meeting,
    plan: &ContextPlan,
    keep_prob: f64,
    seed: u64,
    opts: &RenderOptions,
) -> Result<ContextView, ContextError> {
    if !(0.0..=1.0).contains(&keep_prob) {
        return Err(ContextError::Config(format!("keep_prob must lie in [0,1], got {keep_prob}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kept_ids = sample_kept(plan, keep_prob, &mut rng);
    let rendered_text = render_input(meeting, plan.focus.sentence_id, &kept_ids, opts)?;
    Ok(ContextView {
        plan: plan.clone(),
        kept_ids,
        rendered_text,
    })
}

pub fn write_plans<W: Write>(mut w: W, plans: &[ContextPlan]) -> Result<(), ContextError> {
    for p in plans {
        let line = serde_json::to_string(p).map_err(|e| ContextError::PlanFormat {
            line: 0,
            message: e.to_string(),
        })?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_plans<R: BufRead>(r: R) -> Result<Vec<ContextPlan>, ContextError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ContextError::PlanFormat {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
