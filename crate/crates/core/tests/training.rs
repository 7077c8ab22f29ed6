mod common;

use common::{corpus, fresh, gradient_check, run};
use ctxdrop::context::{ContextConfig, ContextMode};
use ctxdrop::corpus::synthetic::{generate, SyntheticConfig};
use ctxdrop::training::{build_pair, Dataset, LossConfig, Method, StrategyRegistry, TrainError, TrainRunConfig, Trainer};
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

#[test]
fn gradients_match_finite_differences_for_every_method() {
    for method in Method::ALL {
        for seed in 0..3 {
            gradient_check(method, seed);
        }
    }
}

#[test]
fn dynamic_degenerates_to_the_other_methods() {
    let m = generate(
        &SyntheticConfig {
            meetings: 1,
            sentences_per_meeting: 50,
            ..SyntheticConfig::default()
        },
        21,
    )
    .remove(0);
    let ctx = ContextConfig::default();
    let mode = ContextMode::LocalAndGlobal;
    let dynamic = |probs: [f64; 2]| LossConfig {
        view_keep_probs: Some(probs),
        ..LossConfig::new(Method::ContextDropDynamic, mode)
    };
    let cases = [
        ([0.0, 0.0], Method::RDropSentence),
        ([1.0, 1.0], Method::RDropContext),
        ([0.0, 1.0], Method::ContextDropFixed),
    ];
    for (probs, reference) in cases {
        for focus in 0..m.len() {
            let a = build_pair(&m, focus, &dynamic(probs), &ctx, &mut ChaCha8Rng::seed_from_u64(focus as u64)).unwrap();
            let b = build_pair(
                &m,
                focus,
                &LossConfig::new(reference, mode),
                &ctx,
                &mut ChaCha8Rng::seed_from_u64(focus as u64),
            )
            .unwrap();
            assert_eq!(a, b, "{reference} focus {focus}");
        }
    }
}

#[test]
fn training_reduces_loss_and_learns_planted_signal() {
    let (train, dev, _) = corpus(20, 10, 3);
    let trainer = Trainer::new(&StrategyRegistry::default(), LossConfig::default(), ContextConfig::default(), run(0.05, 3, 1)).unwrap();
    let out = trainer
        .train(fresh(0).unwrap(), &trainer.prepare(&train).unwrap(), &trainer.prepare(&dev).unwrap(), &trainer.run.cells()[0])
        .unwrap();
    assert_eq!(out.log.len(), 3);
    assert!(out.log.windows(2).all(|w| w[1].mean_total < w[0].mean_total), "{:?}", out.log);
    assert!(out.best_dev_f1 > 0.8, "{:?}", out.log);
}

#[test]
fn same_seed_same_log() {
    let (train, dev, test) = corpus(10, 12, 5);
    let data = Dataset {
        train: &train,
        dev: &dev,
        test: &test,
    };
    let trainer = Trainer::new(&StrategyRegistry::default(), LossConfig::default(), ContextConfig::default(), run(0.02, 2, 1)).unwrap();
    let a = trainer.grid_search(fresh, &data, 1).unwrap();
    let b = trainer.grid_search(fresh, &data, 4).unwrap();
    assert_eq!(a.cells[0].log, b.cells[0].log);
    assert_eq!(a.seeds[0].test_predictions, b.seeds[0].test_predictions);
}

#[test]
fn grid_search_picks_best_dev_cell_per_seed() {
    let (train, dev, test) = corpus(10, 12, 8);
    let data = Dataset {
        train: &train,
        dev: &dev,
        test: &test,
    };
    let cfg = TrainRunConfig {
        learning_rates: vec![1e-4, 0.05],
        epochs_options: vec![1, 2],
        num_seeds: 2,
        ..TrainRunConfig::default()
    };
    let loss = LossConfig::new(Method::RDropContext, ContextMode::Local);
    let trainer = Trainer::new(&StrategyRegistry::default(), loss, ContextConfig::default(), cfg).unwrap();
    let out = trainer.grid_search(fresh, &data, 2).unwrap();
    assert_eq!(out.cells.len(), 8);
    assert_eq!(out.seeds.len(), 2);
    for s in &out.seeds {
        let best = out
            .cells
            .iter()
            .filter(|c| c.cell.seed == s.cell.seed)
            .map(|c| c.best_dev_f1)
            .fold(f64::MIN, f64::max);
        assert_eq!(s.dev_f1, best);
        assert!(s.test.is_some());
    }
    let agg = out.test_aggregate.unwrap();
    assert_eq!(agg.per_seed.len(), 2);
}

#[test]
fn empty_dev_is_rejected() {
    let (train, _, _) = corpus(5, 6, 1);
    let trainer = Trainer::new(&StrategyRegistry::default(), LossConfig::default(), ContextConfig::default(), run(0.01, 1, 1)).unwrap();
    let err = trainer
        .train(fresh(0).unwrap(), &trainer.prepare(&train).unwrap(), &trainer.prepare(&[]).unwrap(), &trainer.run.cells()[0])
        .unwrap_err();
    assert!(matches!(err, TrainError::EmptyDataset("dev")));
}

#[test]
fn huge_learning_rate_diverges_with_diagnostic() {
    let (train, dev, _) = corpus(10, 8, 2);
    let trainer = Trainer::new(&StrategyRegistry::default(), LossConfig::default(), ContextConfig::default(), run(1e300, 3, 1)).unwrap();
    let res = trainer.train(fresh(0).unwrap(), &trainer.prepare(&train).unwrap(), &trainer.prepare(&dev).unwrap(), &trainer.run.cells()[0]);
    match res {
        Err(TrainError::Divergent { epoch, .. }) => assert!(epoch >= 1),
        other => panic!("expected divergence, got {other:?}"),
    }
}
