use std::fmt;

use serde::{Deserialize, Serialize};

use super::{pairwise_kappa, CorpusSplit, Meeting, SplitName};

/// Counts for one slice of the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub name: String,
    pub meetings: usize,
    pub utterances: usize,
    pub positives: usize,
    pub mean_positives_per_meeting: f64,
    /// Population standard deviation.
    pub std_positives_per_meeting: f64,
    /// Mean pairwise kappa when every record carries annotator labels.
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub all: SplitStats,
    pub splits: Vec<SplitStats>,
}

fn slice_stats(name: &str, meetings: &[&Meeting]) -> SplitStats {
    let per_meeting: Vec<f64> = meetings.iter().map(|m| m.positives() as f64).collect();
    let n = per_meeting.len();
    let (mean, std) = if n == 0 {
        (0.0, 0.0)
    } else {
        let mean = per_meeting.iter().sum::<f64>() / n as f64;
        let var = per_meeting.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        (mean, var.sqrt())
    };
    let records: Vec<_> = meetings.iter().flat_map(|m| m.sentences.iter()).collect();
    let kappa = if !records.is_empty() && records.iter().all(|r| r.annotator_labels.is_some()) {
        pairwise_kappa(&records).ok().and_then(|r| r.mean)
    } else {
        None
    };
    SplitStats {
        name: name.to_string(),
        meetings: n,
        utterances: meetings.iter().map(|m| m.len()).sum(),
        positives: meetings.iter().map(|m| m.positives()).sum(),
        mean_positives_per_meeting: mean,
        std_positives_per_meeting: std,
        kappa,
    }
}

/// Meeting, utterance and action-item counts overall and per split.
pub fn corpus_stats(meetings: &[Meeting], split: Option<&CorpusSplit>) -> CorpusStats {
    let all: Vec<&Meeting> = meetings.iter().collect();
    let splits = split
        .map(|s| {
            SplitName::ALL
                .iter()
                .map(|n| slice_stats(n.as_str(), &s.select(meetings, *n)))
                .collect()
        })
        .unwrap_or_default();
    CorpusStats {
        all: slice_stats("all", &all),
        splits,
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# std is the population standard deviation over meetings")?;
        let cols: Vec<&SplitStats> = std::iter::once(&self.all).chain(&self.splits).collect();
        write!(f, "{:<28}", "")?;
        for c in &cols {
            write!(f, "{:>12}", c.name)?;
        }
        writeln!(f)?;
        let row = |f: &mut fmt::Formatter<'_>, label: &str, cell: &dyn Fn(&SplitStats) -> String| {
            write!(f, "{label:<28}")?;
            for c in &cols {
                write!(f, "{:>12}", cell(c))?;
            }
            writeln!(f)
        };
        row(f, "Total # Meetings", &|s| s.meetings.to_string())?;
        row(f, "Total # Utterances", &|s| s.utterances.to_string())?;
        row(f, "Total # Action", &|s| s.positives.to_string())?;
        row(f, "Kappa Coefficient", &|s| {
            s.kappa.map_or_else(|| "/".to_string(), |k| format!("{k:.2}"))
        })?;
        row(f, "Avg. # Action per Meeting", &|s| format!("{:.2}", s.mean_positives_per_meeting))?;
        row(f, "Std. # Action per Meeting", &|s| format!("{:.2}", s.std_positives_per_meeting))
    }
}
