//! Positive-class F1, cross-seed aggregation and result tables.

mod report;

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;

pub use report::{render_report, ReportLayout, ResultRow};

/// Probability at or above which a sentence is predicted positive.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no records to evaluate")]
    Empty,
    #[error("prediction line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub meeting_id: String,
    pub sentence_id: usize,
    pub gold: Label,
    pub predicted: Label,
    pub positive_probability: f64,
}

impl PredictionRecord {
    /// Thresholds the probability at [`DECISION_THRESHOLD`].
    pub fn new(meeting_id: &str, sentence_id: usize, gold: Label, positive_probability: f64) -> Self {
        PredictionRecord {
            meeting_id: meeting_id.to_string(),
            sentence_id,
            gold,
            predicted: Label::from(positive_probability >= DECISION_THRESHOLD),
            positive_probability,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub precision: f64,
    pub recall: f64,
    pub positive_f1: f64,
    pub support: Confusion,
    /// Set when precision or recall had a zero denominator and was
    /// reported as 0.
    pub zero_division: bool,
}

/// Precision, recall and F1 of the positive class.
pub fn positive_f1(records: &[PredictionRecord]) -> Result<MetricReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut c = Confusion::default();
    for r in records {
        match (r.gold.is_positive(), r.predicted.is_positive()) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    let mut zero_division = false;
    let mut ratio = |num: usize, den: usize| {
        if den == 0 {
            zero_division = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let positive_f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(MetricReport {
        precision,
        recall,
        positive_f1,
        support: c,
        zero_division,
    })
}

/// Mean and sample standard deviation of per-seed scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub per_seed: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// True when only one value was available and `std` is reported as 0.
    pub single_value: bool,
}

impl AggregateReport {
    /// `mean ±std` in percent with two decimals, e.g. `67.84 ±1.20`. A
    /// single seed has no spread and renders as `67.84 (1 seed)`.
    pub fn render_percent(&self) -> String {
        if self.single_value {
            format!("{:.2} (1 seed)", self.mean * 100.0)
        } else {
            format!("{:.2} ±{:.2}", self.mean * 100.0, self.std * 100.0)
        }
    }
}

pub fn aggregate(per_seed: &[f64]) -> Result<AggregateReport, EvalError> {
    if per_seed.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = per_seed.len() as f64;
    let mean = per_seed.iter().sum::<f64>() / n;
    let (std, single_value) = if per_seed.len() == 1 {
        (0.0, true)
    } else {
        let var = per_seed.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var.sqrt(), false)
    };
    Ok(AggregateReport {
        per_seed: per_seed.to_vec(),
        mean,
        std,
        single_value,
    })
}

pub fn write_predictions<W: Write>(mut w: W, records: &[PredictionRecord]) -> Result<(), EvalError> {
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| EvalError::Format {
            line: 0,
            message: e.to_string(),
        })?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_predictions<R: BufRead>(r: R) -> Result<Vec<PredictionRecord>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| EvalError::Format {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(gold: bool, pred: bool) -> PredictionRecord {
        PredictionRecord::new("m", 0, Label::from(gold), if pred { 0.9 } else { 0.1 })
    }

    #[test]
    fn hand_counts() {
        // tp=2 fp=1 fn=1 tn=1
        let rs = [rec(true, true), rec(true, true), rec(false, true), rec(true, false), rec(false, false)];
        let m = positive_f1(&rs).unwrap();
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.positive_f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.support, Confusion { tp: 2, fp: 1, fn_: 1, tn: 1 });
        assert!(!m.zero_division);
    }

    #[test]
    fn perfect_and_degenerate() {
        let perfect = positive_f1(&[rec(true, true), rec(false, false)]).unwrap();
        assert_eq!(perfect.positive_f1, 1.0);
        let none = positive_f1(&[rec(true, false), rec(false, false)]).unwrap();
        assert_eq!(none.positive_f1, 0.0);
        assert!(none.zero_division);
        assert!(matches!(positive_f1(&[]), Err(EvalError::Empty)));
    }

    #[test]
    fn threshold_is_inclusive() {
        assert_eq!(PredictionRecord::new("m", 0, Label::Negative, 0.5).predicted, Label::Positive);
        assert_eq!(PredictionRecord::new("m", 0, Label::Negative, 0.4999).predicted, Label::Negative);
    }

    #[test]
    fn aggregate_examples() {
        let a = aggregate(&[68.0, 70.0, 72.0]).unwrap();
        assert_eq!(a.mean, 70.0);
        assert_eq!(a.std, 2.0);
        let flat = aggregate(&[0.7; 5]).unwrap();
        assert!(flat.std.abs() < 1e-12);
        let one = aggregate(&[0.5]).unwrap();
        assert_eq!(one.std, 0.0);
        assert!(one.single_value);
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn percent_rendering() {
        let a = AggregateReport {
            per_seed: vec![],
            mean: 0.6784,
            std: 0.0120,
            single_value: false,
        };
        assert_eq!(a.render_percent(), "67.84 ±1.20");
        let one = aggregate(&[0.5]).unwrap();
        assert_eq!(one.render_percent(), "50.00 (1 seed)");
    }

    #[test]
    fn predictions_jsonl_roundtrip() {
        let rs = vec![rec(true, false), rec(false, true)];
        let mut buf = Vec::new();
        write_predictions(&mut buf, &rs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(r#"{"meeting_id":"m","sentence_id":0,"gold":1,"predicted":0,"positive_probability":0.1}"#));
        assert_eq!(read_predictions(&buf[..]).unwrap(), rs);
    }

    proptest! {
        #[test]
        fn order_invariant_and_monotone(labels in prop::collection::vec((any::<bool>(), any::<bool>()), 1..200), seed in any::<u64>()) {
            let rs: Vec<_> = labels.iter().map(|(g, p)| rec(*g, *p)).collect();
            let base = positive_f1(&rs).unwrap();
            let mut shuffled = rs.clone();
            use rand::{seq::SliceRandom, SeedableRng};
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(positive_f1(&shuffled).unwrap().positive_f1, base.positive_f1);

            if let Some(i) = rs.iter().position(|r| r.gold.is_positive() && !r.predicted.is_positive()) {
                let mut fixed = rs.clone();
                fixed[i] = rec(true, true);
                prop_assert!(positive_f1(&fixed).unwrap().positive_f1 >= base.positive_f1);
            }
        }
    }
}
