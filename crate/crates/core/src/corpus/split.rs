use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Meeting};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Dev,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Dev, SplitName::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Dev => "dev",
            SplitName::Test => "test",
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "train" => Ok(SplitName::Train),
            "dev" => Ok(SplitName::Dev),
            "test" => Ok(SplitName::Test),
            other => Err(format!("unknown split '{other}' (expected train|dev|test)")),
        }
    }
}

/// Train/dev/test percentages. Must sum to 100.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatio {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitRatio {
    fn default() -> Self {
        SplitRatio {
            train: 70.0,
            dev: 15.0,
            test: 15.0,
        }
    }
}

impl SplitRatio {
    pub fn new(train: f64, dev: f64, test: f64) -> Result<Self, CorpusError> {
        let r = SplitRatio { train, dev, test };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<(), CorpusError> {
        let parts = [self.train, self.dev, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(CorpusError::Split(format!("ratio components must be non-negative: {parts:?}")));
        }
        if (parts.iter().sum::<f64>() - 100.0).abs() > 1e-9 {
            return Err(CorpusError::Split(format!("ratio components must sum to 100: {parts:?}")));
        }
        Ok(())
    }

    /// Floor for train and dev, remainder to test.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let train = (n as f64 * self.train / 100.0 + 1e-9).floor() as usize;
        let dev = (n as f64 * self.dev / 100.0 + 1e-9).floor() as usize;
        let dev = dev.min(n - train);
        (train, dev, n - train - dev)
    }
}

impl FromStr for SplitRatio {
    type Err = CorpusError;

    /// Parses `train,dev,test`, e.g. `70,15,15`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CorpusError::Split(format!("ratio '{s}': {e}")))?;
        match parts[..] {
            [train, dev, test] => SplitRatio::new(train, dev, test),
            _ => Err(CorpusError::Split(format!("ratio '{s}' must have three parts"))),
        }
    }
}

/// Explicit meeting-to-split assignment, one `meeting_id<TAB>split` per line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplitManifest {
    pub assignments: BTreeMap<String, SplitName>,
}

impl SplitManifest {
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut assignments = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (id, split) = line.split_once('\t').ok_or_else(|| {
                CorpusError::Split(format!("manifest line {}: expected meeting_id<TAB>split", i + 1))
            })?;
            let split: SplitName = split
                .parse()
                .map_err(|e| CorpusError::Split(format!("manifest line {}: {e}", i + 1)))?;
            if assignments.insert(id.to_string(), split).is_some() {
                return Err(CorpusError::Split(format!(
                    "manifest line {}: meeting {id} assigned twice",
                    i + 1
                )));
            }
        }
        Ok(SplitManifest { assignments })
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn from_split(split: &CorpusSplit) -> Self {
        let mut assignments = BTreeMap::new();
        for name in SplitName::ALL {
            for id in split.ids(name) {
                assignments.insert(id.clone(), name);
            }
        }
        SplitManifest { assignments }
    }

    pub fn render(&self) -> String {
        self.assignments
            .iter()
            .map(|(id, s)| format!("{id}\t{s}\n"))
            .collect()
    }
}

/// Disjoint meeting-level partition of a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: BTreeSet<String>,
    pub dev: BTreeSet<String>,
    pub test: BTreeSet<String>,
    pub ratio: SplitRatio,
}

impl CorpusSplit {
    pub fn ids(&self, name: SplitName) -> &BTreeSet<String> {
        match name {
            SplitName::Train => &self.train,
            SplitName::Dev => &self.dev,
            SplitName::Test => &self.test,
        }
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.dev.len(), self.test.len())
    }

    pub fn split_of(&self, meeting_id: &str) -> Option<SplitName> {
        SplitName::ALL
            .into_iter()
            .find(|n| self.ids(*n).contains(meeting_id))
    }

    /// Meetings of one split, in corpus order.
    pub fn select<'a>(&self, meetings: &'a [Meeting], name: SplitName) -> Vec<&'a Meeting> {
        let ids = self.ids(name);
        meetings.iter().filter(|m| ids.contains(&m.meeting_id)).collect()
    }

    /// Owned copy of [`CorpusSplit::select`].
    pub fn select_owned(&self, meetings: &[Meeting], name: SplitName) -> Vec<Meeting> {
        self.select(meetings, name).into_iter().cloned().collect()
    }
}

/// Partitions meetings into train/dev/test.
///
/// With a manifest the assignment is taken verbatim (it must cover exactly
/// the corpus). Otherwise meeting ids are sorted, shuffled with `seed`, and
/// cut with [`SplitRatio::sizes`].
pub fn split_corpus(
    meetings: &[Meeting],
    ratio: SplitRatio,
    seed: u64,
    manifest: Option<&SplitManifest>,
) -> Result<CorpusSplit, CorpusError> {
    ratio.validate()?;
    let ids: BTreeSet<String> = meetings.iter().map(|m| m.meeting_id.clone()).collect();
    if ids.len() != meetings.len() {
        return Err(CorpusError::Split("duplicate meeting ids in corpus".into()));
    }

    let mut split = CorpusSplit {
        train: BTreeSet::new(),
        dev: BTreeSet::new(),
        test: BTreeSet::new(),
        ratio,
    };

    if let Some(manifest) = manifest {
        let missing: Vec<_> = ids.iter().filter(|id| !manifest.assignments.contains_key(*id)).collect();
        if !missing.is_empty() {
            return Err(CorpusError::Split(format!("manifest lacks meetings {missing:?}")));
        }
        let unknown: Vec<_> = manifest.assignments.keys().filter(|id| !ids.contains(*id)).collect();
        if !unknown.is_empty() {
            return Err(CorpusError::Split(format!("manifest names unknown meetings {unknown:?}")));
        }
        for (id, name) in &manifest.assignments {
            match name {
                SplitName::Train => split.train.insert(id.clone()),
                SplitName::Dev => split.dev.insert(id.clone()),
                SplitName::Test => split.test.insert(id.clone()),
            };
        }
        return Ok(split);
    }

    if ids.len() < 3 {
        return Err(CorpusError::Split(format!(
            "need at least 3 meetings to split, got {}",
            ids.len()
        )));
    }
    let mut order: Vec<String> = ids.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (n_train, n_dev, _) = ratio.sizes(order.len());
    for (i, id) in order.into_iter().enumerate() {
        if i < n_train {
            split.train.insert(id);
        } else if i < n_train + n_dev {
            split.dev.insert(id);
        } else {
            split.test.insert(id);
        }
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;

    fn corpus(n: usize) -> Vec<Meeting> {
        (0..n)
            .map(|i| Meeting::from_triples(&format!("m{i:03}"), [("A", "hi.", Label::Negative)]))
            .collect()
    }

    #[test]
    fn ten_meetings_floor_rule() {
        let s = split_corpus(&corpus(10), SplitRatio::default(), 7, None).unwrap();
        assert_eq!(s.sizes(), (7, 1, 2));
    }

    #[test]
    fn seeded_rule_on_424() {
        // 296.8 -> 296, 63.6 -> 63, remainder 65
        let s = split_corpus(&corpus(424), SplitRatio::default(), 0, None).unwrap();
        assert_eq!(s.sizes(), (296, 63, 65));
    }

    #[test]
    fn same_seed_same_split() {
        let c = corpus(40);
        let a = split_corpus(&c, SplitRatio::default(), 11, None).unwrap();
        let b = split_corpus(&c, SplitRatio::default(), 11, None).unwrap();
        assert_eq!(a, b);
        let other = split_corpus(&c, SplitRatio::default(), 12, None).unwrap();
        assert_ne!(a.train, other.train);
    }

    #[test]
    fn too_few_meetings() {
        assert!(split_corpus(&corpus(2), SplitRatio::default(), 0, None).is_err());
    }

    #[test]
    fn ratio_must_sum_to_100() {
        assert!(SplitRatio::new(70.0, 20.0, 20.0).is_err());
        assert!(SplitRatio::new(-10.0, 60.0, 50.0).is_err());
    }

    #[test]
    fn ratio_from_str() {
        assert_eq!("70,15,15".parse::<SplitRatio>().unwrap(), SplitRatio::default());
        assert!("70,30".parse::<SplitRatio>().is_err());
        assert!("50,a,50".parse::<SplitRatio>().is_err());
        assert!("70,20,20".parse::<SplitRatio>().is_err());
    }

    #[test]
    fn manifest_is_honoured_and_checked() {
        let c = corpus(4);
        let m = SplitManifest::parse("m000\ttrain\nm001\ttrain\nm002\tdev\nm003\ttest\n").unwrap();
        let s = split_corpus(&c, SplitRatio::default(), 0, Some(&m)).unwrap();
        assert_eq!(s.sizes(), (2, 1, 1));
        assert_eq!(s.split_of("m002"), Some(SplitName::Dev));

        let partial = SplitManifest::parse("m000\ttrain\n").unwrap();
        assert!(split_corpus(&c, SplitRatio::default(), 0, Some(&partial)).is_err());
        assert!(SplitManifest::parse("m000 train").is_err());
        assert!(SplitManifest::parse("m000\tvalid").is_err());
    }

    #[test]
    fn manifest_render_parses_back() {
        let s = split_corpus(&corpus(20), SplitRatio::default(), 3, None).unwrap();
        let m = SplitManifest::from_split(&s);
        assert_eq!(SplitManifest::parse(&m.render()).unwrap(), m);
    }
}
