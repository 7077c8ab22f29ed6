use serde::{Deserialize, Serialize};

use super::{check_focus, ContextError};
use crate::corpus::Meeting;

pub const CONTEXT_SEPARATOR: &str = " ⟂ ";
pub const FOCUS_OPEN: &str = "⟦";
pub const FOCUS_CLOSE: &str = "⟧";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderOptions {
    /// Prefix each sentence with `speaker: `.
    pub include_speaker: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions { include_speaker: true }
    }
}

/// Renders the focus sentence with the kept context sentences.
///
/// Sentences appear in document order joined by [`CONTEXT_SEPARATOR`]; the
/// focus is wrapped in [`FOCUS_OPEN`]/[`FOCUS_CLOSE`]. Duplicate ids and the
/// focus id inside `kept_ids` are ignored.
pub fn render_input(
    meeting: &Meeting,
    focus_id: usize,
    kept_ids: &[usize],
    opts: &RenderOptions,
) -> Result<String, ContextError> {
    check_focus(meeting, focus_id)?;
    let mut ids: Vec<usize> = kept_ids.iter().copied().filter(|i| *i != focus_id).collect();
    for &id in &ids {
        check_focus(meeting, id)?;
    }
    ids.push(focus_id);
    ids.sort_unstable();
    ids.dedup();

    let parts: Vec<String> = ids
        .into_iter()
        .map(|id| {
            let s = &meeting.sentences[id];
            let body = if opts.include_speaker {
                format!("{}: {}", s.speaker, s.text)
            } else {
                s.text.clone()
            };
            if id == focus_id {
                format!("{FOCUS_OPEN}{body}{FOCUS_CLOSE}")
            } else {
                body
            }
        })
        .collect();
    Ok(parts.join(CONTEXT_SEPARATOR))
}
