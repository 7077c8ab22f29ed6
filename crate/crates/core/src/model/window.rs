use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::corpus::Meeting;
use crate::text;

/// Sliding-window layout for the sequence-labelling formulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    /// Input units per window.
    pub capacity: usize,
    /// Sentences shared by consecutive windows.
    pub overlap_sentences: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            capacity: 4096,
            overlap_sentences: 1,
        }
    }
}

/// Greedy windows over consecutive sentences.
///
/// Each window is filled up to `capacity` units; the next one restarts
/// `overlap_sentences` sentences before the previous end. A meeting that
/// fits entirely yields a single window.
pub fn make_windows(unit_lengths: &[usize], spec: &WindowSpec) -> Result<Vec<Vec<usize>>, ModelError> {
    if spec.capacity == 0 {
        return Err(ModelError::Spec("window capacity must be positive".into()));
    }
    if let Some((sentence_id, &len)) = unit_lengths.iter().enumerate().find(|(_, l)| **l > spec.capacity) {
        return Err(ModelError::SentenceTooLong {
            sentence_id,
            len,
            capacity: spec.capacity,
        });
    }
    let n = unit_lengths.len();
    let mut windows = Vec::new();
    let mut start = 0;
    while start < n {
        let mut used = 0;
        let mut end = start;
        while end < n && used + unit_lengths[end] <= spec.capacity {
            used += unit_lengths[end];
            end += 1;
        }
        windows.push((start..end).collect::<Vec<_>>());
        if end == n {
            break;
        }
        let count = end - start;
        if spec.overlap_sentences >= count {
            return Err(ModelError::OverlapTooLarge {
                sentences: count,
                overlap: spec.overlap_sentences,
            });
        }
        start = end - spec.overlap_sentences;
    }
    Ok(windows)
}

/// Windows over a meeting using its unit counts as lengths.
pub fn meeting_windows(meeting: &Meeting, spec: &WindowSpec) -> Result<Vec<Vec<usize>>, ModelError> {
    let lens: Vec<usize> = meeting.sentences.iter().map(|s| text::units(&s.text).len().max(1)).collect();
    make_windows(&lens, spec)
}

/// Averages per-sentence probabilities predicted inside overlapping
/// windows. `window_probs[w][i]` belongs to sentence `windows[w][i]`.
pub fn merge_window_probabilities(
    n_sentences: usize,
    windows: &[Vec<usize>],
    window_probs: &[Vec<f64>],
) -> Result<Vec<f64>, ModelError> {
    let mut sum = vec![0.0; n_sentences];
    let mut count = vec![0usize; n_sentences];
    for (w, probs) in windows.iter().zip(window_probs) {
        if w.len() != probs.len() {
            return Err(ModelError::Shape(format!(
                "window of {} sentences has {} probabilities",
                w.len(),
                probs.len()
            )));
        }
        for (&id, &p) in w.iter().zip(probs) {
            sum[id] += p;
            count[id] += 1;
        }
    }
    if let Some(missing) = count.iter().position(|c| *c == 0) {
        return Err(ModelError::Shape(format!("sentence {missing} not covered by any window")));
    }
    Ok(sum.iter().zip(&count).map(|(s, c)| s / *c as f64).collect())
}
