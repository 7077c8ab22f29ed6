use serde::{Deserialize, Serialize};

use super::{CorpusError, Label, SentenceRecord};

/// Cohen's kappa for one annotator pair. `Undefined` when chance agreement
/// is 1 (both annotators used a single, identical class throughout).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "status", content = "value")]
pub enum Kappa {
    Value(f64),
    Undefined,
}

impl Kappa {
    pub fn value(self) -> Option<f64> {
        match self {
            Kappa::Value(v) => Some(v),
            Kappa::Undefined => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairKappa {
    pub annotator_a: usize,
    pub annotator_b: usize,
    pub kappa: Kappa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub pairs: Vec<PairKappa>,
    /// Unweighted mean over pairs with a defined kappa.
    pub mean: Option<f64>,
}

/// κ = (p_o − p_e) / (1 − p_e) over two binary label vectors of equal length.
pub fn cohen_kappa(a: &[Label], b: &[Label]) -> Kappa {
    assert_eq!(a.len(), b.len(), "label vectors differ in length");
    let n = a.len();
    if n == 0 {
        return Kappa::Undefined;
    }
    let nf = n as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count();
    let pos_a = a.iter().filter(|l| l.is_positive()).count() as f64 / nf;
    let pos_b = b.iter().filter(|l| l.is_positive()).count() as f64 / nf;
    let p_e = pos_a * pos_b + (1.0 - pos_a) * (1.0 - pos_b);
    if (1.0 - p_e).abs() < 1e-15 {
        return Kappa::Undefined;
    }
    if agree == n {
        return Kappa::Value(1.0);
    }
    let p_o = agree as f64 / nf;
    Kappa::Value((p_o - p_e) / (1.0 - p_e))
}

/// Cohen's kappa for every unordered annotator pair, plus their mean.
pub fn pairwise_kappa(records: &[&SentenceRecord]) -> Result<KappaReport, CorpusError> {
    let mut columns: Option<Vec<Vec<Label>>> = None;
    for r in records {
        let labels = r.annotator_labels.as_ref().ok_or_else(|| {
            CorpusError::Annotators(format!(
                "{}#{} has no annotator labels",
                r.meeting_id, r.sentence_id
            ))
        })?;
        let cols = columns.get_or_insert_with(|| vec![Vec::new(); labels.len()]);
        if labels.len() != cols.len() {
            return Err(CorpusError::Annotators(format!(
                "{}#{} has {} annotator labels, expected {}",
                r.meeting_id,
                r.sentence_id,
                labels.len(),
                cols.len()
            )));
        }
        for (col, l) in cols.iter_mut().zip(labels) {
            col.push(*l);
        }
    }
    let columns = columns.unwrap_or_default();
    if columns.len() < 2 {
        return Err(CorpusError::Annotators(format!(
            "need at least 2 annotators, found {}",
            columns.len()
        )));
    }

    let mut pairs = Vec::new();
    for i in 0..columns.len() {
        for j in i + 1..columns.len() {
            pairs.push(PairKappa {
                annotator_a: i,
                annotator_b: j,
                kappa: cohen_kappa(&columns[i], &columns[j]),
            });
        }
    }
    let defined: Vec<f64> = pairs.iter().filter_map(|p| p.kappa.value()).collect();
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(KappaReport { pairs, mean })
}
