//! Transcript data model, ingestion, splitting, candidate pre-selection and
//! corpus statistics.

mod candidates;
mod kappa;
mod split;
mod stats;
pub mod synthetic;

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use candidates::{load_lexicon, select_candidates, CandidateLexicons};
pub use kappa::{cohen_kappa, pairwise_kappa, Kappa, KappaReport, PairKappa};
pub use split::{split_corpus, CorpusSplit, SplitManifest, SplitName, SplitRatio};
pub use stats::{corpus_stats, CorpusStats, SplitStats};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed meeting record: {message}")]
    Parse { line: usize, message: String },
    #[error("meeting {meeting_id}: invalid {field}: {message}")]
    Validation {
        meeting_id: String,
        field: String,
        message: String,
    },
    #[error("split error: {0}")]
    Split(String),
    #[error("lexicon error: {0}")]
    Lexicon(String),
    #[error("annotator labels: {0}")]
    Annotators(String),
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    fn invalid(meeting_id: &str, field: impl Into<String>, message: impl Into<String>) -> Self {
        CorpusError::Validation {
            meeting_id: meeting_id.to_string(),
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Binary action-item label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    pub fn index(self) -> usize {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Negative => Label::Positive,
            Label::Positive => Label::Negative,
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Label::Negative),
            1 => Ok(Label::Positive),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.index() as u8
    }
}

impl From<bool> for Label {
    fn from(b: bool) -> Self {
        if b {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

/// One sentence of a transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub meeting_id: String,
    pub sentence_id: usize,
    pub speaker: String,
    pub text: String,
    pub label: Label,
    pub annotator_labels: Option<Vec<Label>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meeting {
    pub meeting_id: String,
    pub sentences: Vec<SentenceRecord>,
}

impl Meeting {
    /// Builds a meeting from `(speaker, text, label)` triples, assigning
    /// consecutive sentence ids.
    pub fn from_triples<'a>(
        meeting_id: &str,
        triples: impl IntoIterator<Item = (&'a str, &'a str, Label)>,
    ) -> Meeting {
        let sentences = triples
            .into_iter()
            .enumerate()
            .map(|(i, (speaker, text, label))| SentenceRecord {
                meeting_id: meeting_id.to_string(),
                sentence_id: i,
                speaker: speaker.to_string(),
                text: text.to_string(),
                label,
                annotator_labels: None,
            })
            .collect();
        Meeting {
            meeting_id: meeting_id.to_string(),
            sentences,
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.sentences.iter().filter(|s| s.label.is_positive()).count()
    }

    pub fn sentence(&self, id: usize) -> Option<&SentenceRecord> {
        self.sentences.get(id)
    }

    /// Checks every meeting-level and sentence-level invariant.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let id = &self.meeting_id;
        if id.trim().is_empty() {
            return Err(CorpusError::invalid(id, "meeting_id", "empty identifier"));
        }
        for (i, s) in self.sentences.iter().enumerate() {
            if s.meeting_id != *id {
                return Err(CorpusError::invalid(
                    id,
                    format!("sentences[{i}].meeting_id"),
                    format!("sentence belongs to {}", s.meeting_id),
                ));
            }
            if s.sentence_id != i {
                return Err(CorpusError::invalid(
                    id,
                    format!("sentences[{i}].id"),
                    format!("expected consecutive id {i}, found {}", s.sentence_id),
                ));
            }
            if s.text.trim().is_empty() {
                return Err(CorpusError::invalid(
                    id,
                    format!("sentences[{i}].text"),
                    "text is empty after trimming",
                ));
            }
        }
        Ok(())
    }
}

// Wire schema: one meeting per JSONL line.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeetingLine {
    meeting_id: String,
    sentences: Vec<SentenceLine>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SentenceLine {
    id: i64,
    speaker: String,
    text: String,
    label: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    annotator_labels: Option<Vec<i64>>,
}

fn binary_label(meeting_id: &str, field: String, v: i64) -> Result<Label, CorpusError> {
    match v {
        0 => Ok(Label::Negative),
        1 => Ok(Label::Positive),
        other => Err(CorpusError::invalid(
            meeting_id,
            field,
            format!("must be 0 or 1, got {other}"),
        )),
    }
}

impl MeetingLine {
    fn into_meeting(self) -> Result<Meeting, CorpusError> {
        let mid = self.meeting_id;
        let mut sentences = Vec::with_capacity(self.sentences.len());
        for (i, s) in self.sentences.into_iter().enumerate() {
            let sentence_id = usize::try_from(s.id).map_err(|_| {
                CorpusError::invalid(&mid, format!("sentences[{i}].id"), "negative id")
            })?;
            let label = binary_label(&mid, format!("sentences[{i}].label"), s.label)?;
            let annotator_labels = s
                .annotator_labels
                .map(|ls| {
                    ls.into_iter()
                        .enumerate()
                        .map(|(a, v)| {
                            binary_label(&mid, format!("sentences[{i}].annotator_labels[{a}]"), v)
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
                .transpose()?;
            sentences.push(SentenceRecord {
                meeting_id: mid.clone(),
                sentence_id,
                speaker: s.speaker,
                text: s.text,
                label,
                annotator_labels,
            });
        }
        let meeting = Meeting {
            meeting_id: mid,
            sentences,
        };
        meeting.validate()?;
        Ok(meeting)
    }

    fn from_meeting(m: &Meeting) -> MeetingLine {
        MeetingLine {
            meeting_id: m.meeting_id.clone(),
            sentences: m
                .sentences
                .iter()
                .map(|s| SentenceLine {
                    id: s.sentence_id as i64,
                    speaker: s.speaker.clone(),
                    text: s.text.clone(),
                    label: s.label.index() as i64,
                    annotator_labels: s
                        .annotator_labels
                        .as_ref()
                        .map(|ls| ls.iter().map(|l| l.index() as i64).collect()),
                })
                .collect(),
        }
    }
}

/// Supported transcript encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TranscriptFormat {
    #[default]
    Jsonl,
}

/// Parses meetings from a JSONL reader. Blank lines are skipped; line
/// numbers in errors are 1-based.
pub fn read_transcripts<R: BufRead>(reader: R) -> Result<Vec<Meeting>, CorpusError> {
    let mut meetings = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: MeetingLine = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let meeting = raw.into_meeting()?;
        if !seen.insert(meeting.meeting_id.clone()) {
            return Err(CorpusError::invalid(
                &meeting.meeting_id,
                "meeting_id",
                format!("duplicate meeting on line {line_no}"),
            ));
        }
        meetings.push(meeting);
    }
    Ok(meetings)
}

/// Reads and validates a transcript file, preserving file order.
pub fn ingest_transcripts(path: &Path, format: TranscriptFormat) -> Result<Vec<Meeting>, CorpusError> {
    match format {
        TranscriptFormat::Jsonl => {
            let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
            read_transcripts(BufReader::new(file))
        }
    }
}

pub fn write_transcripts<W: Write>(mut w: W, meetings: &[Meeting]) -> std::io::Result<()> {
    for m in meetings {
        let line = serde_json::to_string(&MeetingLine::from_meeting(m))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Vec<Meeting>, CorpusError> {
        read_transcripts(s.as_bytes())
    }

    #[test]
    fn one_meeting_two_sentences() {
        let ms = parse(
            r#"{"meeting_id":"m1","sentences":[{"id":0,"speaker":"A","text":"Hello.","label":0},{"id":1,"speaker":"B","text":"Send it tomorrow.","label":1}]}"#,
        )
        .unwrap();
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0].sentences.len(), 2);
        assert_eq!(ms[0].positives(), 1);
        assert_eq!(ms[0].sentences[1].speaker, "B");
    }

    #[test]
    fn empty_input_is_empty_corpus() {
        assert!(parse("").unwrap().is_empty());
        assert!(parse("\n  \n").unwrap().is_empty());
    }

    #[test]
    fn label_two_is_validation_error() {
        let err = parse(
            r#"{"meeting_id":"m9","sentences":[{"id":0,"speaker":"A","text":"x","label":2}]}"#,
        )
        .unwrap_err();
        match err {
            CorpusError::Validation { meeting_id, field, .. } => {
                assert_eq!(meeting_id, "m9");
                assert_eq!(field, "sentences[0].label");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let input = "\n{\"meeting_id\":\"a\",\"sentences\":[]}\n{not json";
        match parse(input).unwrap_err() {
            CorpusError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_consecutive_ids_rejected() {
        let err = parse(
            r#"{"meeting_id":"m","sentences":[{"id":0,"speaker":"A","text":"a","label":0},{"id":2,"speaker":"A","text":"b","label":0}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::Validation { ref field, .. } if field == "sentences[1].id"));
    }

    #[test]
    fn blank_text_and_bad_annotator_rejected() {
        assert!(parse(r#"{"meeting_id":"m","sentences":[{"id":0,"speaker":"A","text":"  ","label":0}]}"#).is_err());
        assert!(parse(
            r#"{"meeting_id":"m","sentences":[{"id":0,"speaker":"A","text":"a","label":0,"annotator_labels":[0,3]}]}"#
        )
        .is_err());
    }

    #[test]
    fn duplicate_meetings_rejected() {
        let line = r#"{"meeting_id":"m","sentences":[]}"#;
        assert!(parse(&format!("{line}\n{line}")).is_err());
    }

    #[test]
    fn write_then_read_is_identity() {
        let mut m = Meeting::from_triples("x", [("A", "one.", Label::Negative), ("B", "two!", Label::Positive)]);
        m.sentences[1].annotator_labels = Some(vec![Label::Positive, Label::Negative]);
        let mut buf = Vec::new();
        write_transcripts(&mut buf, std::slice::from_ref(&m)).unwrap();
        assert_eq!(read_transcripts(&buf[..]).unwrap(), vec![m]);
    }
}
