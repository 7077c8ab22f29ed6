//! Seeded synthetic transcripts with a planted lexical signal.
//!
//! Positive sentences always combine an action verb with a temporal
//! expression; negatives are drawn from chit-chat templates that contain
//! neither. Used by tests, the acceptance suite and the CLI demo corpus.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Label, Meeting, SentenceRecord};

const SPEAKERS: &[&str] = &["spk1", "spk2", "spk3", "spk4"];
const OWNERS: &[&str] = &["i", "we", "you", "alice", "bob", "the team"];
const VERBS: &[&str] = &["finish", "send", "prepare", "review", "submit", "schedule"];
const OBJECTS: &[&str] = &["the report", "the slides", "the budget", "the design doc", "the test plan", "the contract"];
const TIMES: &[&str] = &["tomorrow", "by friday", "next week", "tonight", "before monday"];
const NEGATIVE_TEMPLATES: &[&str] = &[
    "i think the {obj} looks good overall",
    "did anyone look at the {obj} already",
    "the customer liked the {obj} a lot",
    "that is an interesting point about the {obj}",
    "we talked about the {obj} last time",
    "honestly the {obj} is a bit long",
    "yes i agree with that",
    "okay sounds reasonable",
    "can you hear me now",
    "let me share my screen",
    "the weather is nice",
    "hmm not sure about the numbers",
];

/// Knobs for [`generate`].
#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub meetings: usize,
    pub sentences_per_meeting: usize,
    pub positive_rate: f64,
    pub annotators: usize,
    /// Probability that an annotator disagrees with the gold label.
    pub annotator_noise: f64,
    pub id_prefix: String,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            meetings: 10,
            sentences_per_meeting: 20,
            positive_rate: 0.25,
            annotators: 0,
            annotator_noise: 0.1,
            id_prefix: "syn".to_string(),
        }
    }
}

fn pick<'a, R: Rng>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).copied().unwrap_or("")
}

fn positive_sentence<R: Rng>(rng: &mut R) -> String {
    let owner = pick(rng, OWNERS);
    let verb = pick(rng, VERBS);
    let obj = pick(rng, OBJECTS);
    let time = pick(rng, TIMES);
    match rng.gen_range(0..3) {
        0 => format!("{owner} will {verb} {obj} {time}."),
        1 => format!("{time} {owner} should {verb} {obj}."),
        _ => format!("can {owner} {verb} {obj} {time}?"),
    }
}

fn negative_sentence<R: Rng>(rng: &mut R) -> String {
    let template = pick(rng, NEGATIVE_TEMPLATES);
    let obj = pick(rng, OBJECTS).trim_start_matches("the ");
    let s = template.replace("{obj}", obj);
    if rng.gen_bool(0.2) {
        format!("{s}!")
    } else {
        format!("{s}.")
    }
}

/// Generates a reproducible corpus; every meeting has at least one positive.
pub fn generate(cfg: &SyntheticConfig, seed: u64) -> Vec<Meeting> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cfg.meetings)
        .map(|m| {
            let meeting_id = format!("{}-{m:03}", cfg.id_prefix);
            let n = cfg.sentences_per_meeting.max(1);
            let forced = rng.gen_range(0..n);
            let sentences = (0..n)
                .map(|i| {
                    let positive = i == forced || rng.gen_bool(cfg.positive_rate.clamp(0.0, 1.0));
                    let text = if positive {
                        positive_sentence(&mut rng)
                    } else {
                        negative_sentence(&mut rng)
                    };
                    let label = Label::from(positive);
                    let annotator_labels = (cfg.annotators > 0).then(|| {
                        (0..cfg.annotators)
                            .map(|_| {
                                if rng.gen_bool(cfg.annotator_noise.clamp(0.0, 1.0)) {
                                    label.flipped()
                                } else {
                                    label
                                }
                            })
                            .collect()
                    });
                    SentenceRecord {
                        meeting_id: meeting_id.clone(),
                        sentence_id: i,
                        speaker: pick(&mut rng, SPEAKERS).to_string(),
                        text,
                        label,
                        annotator_labels,
                    }
                })
                .collect();
            Meeting {
                meeting_id,
                sentences,
            }
        })
        .collect()
}

/// Meetings drawn from a tiny vocabulary so that duplicate sentences and
/// similarity ties are common.
pub fn tie_heavy_meeting(id: &str, len: usize, rng: &mut impl Rng) -> Meeting {
    const VOCAB: &[&str] = &["a", "b", "c", "d", "e"];
    let triples: Vec<(String, String)> = (0..len)
        .map(|_| {
            let words = rng.gen_range(1..=3);
            let text: Vec<&str> = (0..words).map(|_| pick(rng, VOCAB)).collect();
            (pick(rng, SPEAKERS).to_string(), text.join(" "))
        })
        .collect();
    Meeting::from_triples(
        id,
        triples.iter().map(|(s, t)| (s.as_str(), t.as_str(), Label::Negative)),
    )
}
