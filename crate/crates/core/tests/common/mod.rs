//! Helpers shared by the integration suites.
#![allow(dead_code)]

use ctxdrop::context::{ContextConfig, ContextMode};
use ctxdrop::corpus::synthetic::{generate, SyntheticConfig};
use ctxdrop::corpus::{split_corpus, Meeting, SplitName, SplitRatio};
use ctxdrop::model::{ClassifierModel, EncoderRegistry, ModelSpec};
use ctxdrop::training::{build_pair, pair_loss, pair_loss_with_grad, LossConfig, Method, TrainError, TrainRunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Synthetic corpus split 70/15/15 into owned train, dev and test meetings.
pub fn corpus(meetings: usize, per_meeting: usize, seed: u64) -> (Vec<Meeting>, Vec<Meeting>, Vec<Meeting>) {
    let cfg = SyntheticConfig {
        meetings,
        sentences_per_meeting: per_meeting,
        ..SyntheticConfig::default()
    };
    let all = generate(&cfg, seed);
    let split = split_corpus(&all, SplitRatio::default(), seed, None).unwrap();
    (
        split.select_owned(&all, SplitName::Train),
        split.select_owned(&all, SplitName::Dev),
        split.select_owned(&all, SplitName::Test),
    )
}

pub fn fresh(seed: u64) -> Result<ClassifierModel, TrainError> {
    Ok(ClassifierModel::new(&EncoderRegistry::default(), ModelSpec::default(), seed)?)
}

pub fn run(lr: f64, epochs: usize, seeds: usize) -> TrainRunConfig {
    TrainRunConfig {
        learning_rates: vec![lr],
        epochs_options: vec![epochs],
        num_seeds: seeds,
        ..TrainRunConfig::default()
    }
}

/// Central-difference check of the analytic gradient on random parameters
/// whose gradient is not negligible.
pub fn gradient_check(method: Method, seed: u64) {
    let m = generate(&SyntheticConfig::default(), seed).remove(0);
    let cfg = LossConfig {
        keep_prob: 0.6,
        ..LossConfig::new(method, ContextMode::LocalAndGlobal)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pair = build_pair(&m, rng.gen_range(0..m.len()), &cfg, &ContextConfig::default(), &mut rng).unwrap();
    let mut model = fresh(seed).unwrap();
    let mut grads = model.zero_gradients();
    pair_loss_with_grad(&model, &pair, &cfg, &mut grads).unwrap();

    let candidates: Vec<(String, usize)> = grads
        .0
        .iter()
        .flat_map(|(name, g)| {
            g.iter()
                .enumerate()
                .filter(|(_, v)| v.abs() > 1e-7)
                .map(move |(i, _)| (name.clone(), i))
        })
        .collect();
    assert!(candidates.len() >= 10, "{method}: only {} usable parameters", candidates.len());

    let h = 1e-6;
    for _ in 0..12 {
        let (name, i) = &candidates[rng.gen_range(0..candidates.len())];
        let analytic = grads.get(name).unwrap()[*i];
        let mut at = |delta: f64| {
            let t = model
                .backbone
                .get_mut(name)
                .or_else(|| model.head.get_mut(name))
                .unwrap();
            let orig = t.as_f64().unwrap()[*i];
            t.as_f64_mut().unwrap()[*i] = orig + delta;
            let v = pair_loss(&model, &pair, &cfg).unwrap().total;
            let t = model.backbone.get_mut(name).or_else(|| model.head.get_mut(name)).unwrap();
            t.as_f64_mut().unwrap()[*i] = orig;
            v
        };
        let numeric = (at(h) - at(-h)) / (2.0 * h);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs());
        assert!(rel < 1e-4, "{method} {name}[{i}]: analytic {analytic} numeric {numeric} rel {rel}");
    }
}

