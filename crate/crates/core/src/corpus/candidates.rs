use std::collections::BTreeSet;
use std::path::Path;

use super::{CorpusError, Meeting};
use crate::text;

/// Temporal-expression and action-verb lexicons for candidate pre-selection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateLexicons {
    temporal_expressions: BTreeSet<String>,
    action_verbs: BTreeSet<String>,
}

impl CandidateLexicons {
    pub fn new<I, J, S, T>(temporal: I, verbs: J) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let norm = |it: Vec<String>| -> BTreeSet<String> {
            it.iter()
                .map(|s| text::normalize(s))
                .filter(|s| !s.is_empty())
                .collect()
        };
        let temporal_expressions = norm(temporal.into_iter().map(|s| s.as_ref().to_string()).collect());
        let action_verbs = norm(verbs.into_iter().map(|s| s.as_ref().to_string()).collect());
        if temporal_expressions.is_empty() || action_verbs.is_empty() {
            return Err(CorpusError::Lexicon("both lexicons must be non-empty".into()));
        }
        Ok(CandidateLexicons {
            temporal_expressions,
            action_verbs,
        })
    }

    /// The illustrative English/Chinese lexicons shipped in `lexicons/`.
    pub fn builtin() -> Self {
        let parse = |t: &'static str| t.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        Self::new(
            parse(include_str!("../../lexicons/temporal.txt")),
            parse(include_str!("../../lexicons/action_verbs.txt")),
        )
        .expect("shipped lexicons are non-empty")
    }

    /// Loads two plain-text lexicon files (one entry per line).
    pub fn load(temporal: &Path, verbs: &Path) -> Result<Self, CorpusError> {
        Self::new(load_lexicon(temporal)?, load_lexicon(verbs)?)
    }

    pub fn temporal_expressions(&self) -> &BTreeSet<String> {
        &self.temporal_expressions
    }

    pub fn action_verbs(&self) -> &BTreeSet<String> {
        &self.action_verbs
    }

    /// True when the text hits both lexicons.
    pub fn is_candidate(&self, sentence: &str) -> bool {
        let normalized = text::normalize(sentence);
        let units = text::units(sentence);
        let hit = |set: &BTreeSet<String>| set.iter().any(|e| entry_matches(e, &normalized, &units));
        hit(&self.temporal_expressions) && hit(&self.action_verbs)
    }
}

/// Entries with unsegmented-script characters match as substrings; others
/// must match a contiguous run of whole units.
fn entry_matches(entry: &str, normalized: &str, units: &[String]) -> bool {
    if text::has_unsegmented(entry) {
        return normalized.contains(entry);
    }
    let needle = text::units(entry);
    if needle.is_empty() {
        return false;
    }
    units.windows(needle.len()).any(|w| w == needle.as_slice())
}

/// Reads a UTF-8 lexicon file; blank lines and `#` comments are ignored.
pub fn load_lexicon(path: &Path) -> Result<Vec<String>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

/// Sentence ids of a meeting that contain a temporal expression and an
/// action verb.
pub fn select_candidates(meeting: &Meeting, lexicons: &CandidateLexicons) -> BTreeSet<usize> {
    meeting
        .sentences
        .iter()
        .filter(|s| lexicons.is_candidate(&s.text))
        .map(|s| s.sentence_id)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use proptest::prelude::*;

    fn lex(t: &[&str], v: &[&str]) -> CandidateLexicons {
        CandidateLexicons::new(t, v).unwrap()
    }

    #[test]
    fn both_hits_required() {
        let l = lex(&["tomorrow"], &["finish"]);
        assert!(l.is_candidate("We will finish the report tomorrow."));
        assert!(!l.is_candidate("The weather is nice."));
        assert!(l.is_candidate("Finish it now, not tomorrow"));
        assert!(!l.is_candidate("tomorrow is fine"));
    }

    #[test]
    fn english_uses_word_boundaries() {
        let l = lex(&["today"], &["send"]);
        assert!(!l.is_candidate("Todays sender"));
        assert!(l.is_candidate("Send it today!"));
        let multi = lex(&["next week"], &["send"]);
        assert!(multi.is_candidate("send the slides next  week"));
        assert!(!multi.is_candidate("send the next slides this week"));
    }

    #[test]
    fn chinese_uses_substrings() {
        let l = lex(&["明天"], &["完成"]);
        assert!(l.is_candidate("我们明天要完成这个报告。"));
        assert!(!l.is_candidate("我们今天要完成这个报告。"));
    }

    #[test]
    fn builtin_lexicons_cover_both_scripts() {
        let lex = CandidateLexicons::builtin();
        assert!(lex.is_candidate("We will finish the report tomorrow."));
        assert!(!lex.is_candidate("The weather is nice."));
        assert!(lex.is_candidate("明天完成报告"));
    }

    #[test]
    fn empty_lexicon_rejected() {
        assert!(CandidateLexicons::new(Vec::<String>::new(), ["a"]).is_err());
        assert!(CandidateLexicons::new(["  "], ["a"]).is_err());
    }

    #[test]
    fn select_over_meeting() {
        let m = Meeting::from_triples(
            "m",
            [
                ("A", "Hello all.", Label::Negative),
                ("B", "I will finish it tomorrow.", Label::Positive),
                ("A", "Tomorrow is Friday.", Label::Negative),
            ],
        );
        let ids = select_candidates(&m, &lex(&["tomorrow"], &["finish"]));
        assert_eq!(ids.into_iter().collect::<Vec<_>>(), vec![1]);
    }

    const WORDS: &[&str] = &["finish", "send", "tomorrow", "friday", "report", "we", "the", "call"];

    proptest! {
        #[test]
        fn enlarging_lexicons_never_removes_candidates(
            sentence in prop::collection::vec(prop::sample::select(WORDS), 1..8),
            t in prop::collection::vec(prop::sample::select(WORDS), 1..3),
            v in prop::collection::vec(prop::sample::select(WORDS), 1..3),
            extra_t in prop::collection::vec(prop::sample::select(WORDS), 0..3),
            extra_v in prop::collection::vec(prop::sample::select(WORDS), 0..3),
        ) {
            let text = sentence.join(" ");
            let small = lex(&t, &v);
            let big = CandidateLexicons::new(
                t.iter().chain(&extra_t),
                v.iter().chain(&extra_v),
            ).unwrap();
            if small.is_candidate(&text) {
                prop_assert!(big.is_candidate(&text));
            }
        }
    }
}
