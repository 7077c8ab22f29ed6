use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{batch_loss, build_pair_from_plan, AdamW, LossConfig, OptimizerConfig, PairStrategy, StrategyRegistry, TrainError};
use crate::context::{plan_meeting, ContextConfig, ContextPlan};
use crate::corpus::Meeting;
use crate::evaluation::{aggregate, positive_f1, AggregateReport, MetricReport, PredictionRecord};
use crate::model::ClassifierModel;
use crate::training::inference_input;

/// Grid-search and optimisation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRunConfig {
    pub learning_rates: Vec<f64>,
    pub epochs_options: Vec<usize>,
    pub batch_size: usize,
    pub dropout: f64,
    pub num_seeds: usize,
    /// Seeds used are `seed, seed + 1, ..`.
    pub seed: u64,
    pub optimizer: OptimizerConfig,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        TrainRunConfig {
            learning_rates: vec![1e-5, 2e-5],
            epochs_options: vec![2, 3],
            batch_size: 32,
            dropout: 0.3,
            num_seeds: 5,
            seed: 0,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl TrainRunConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.learning_rates.is_empty() || self.learning_rates.iter().any(|lr| !(*lr > 0.0 && lr.is_finite())) {
            return bad("learning_rates must be a non-empty list of positive values");
        }
        if self.epochs_options.is_empty() || self.epochs_options.contains(&0) {
            return bad("epochs_options must be a non-empty list of positive integers");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.num_seeds == 0 {
            return bad("num_seeds must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0,1)");
        }
        Ok(())
    }

    /// Every (seed, learning rate, epochs) combination in a fixed order.
    pub fn cells(&self) -> Vec<RunCell> {
        let mut out = Vec::new();
        for s in 0..self.num_seeds as u64 {
            for &learning_rate in &self.learning_rates {
                for &epochs in &self.epochs_options {
                    out.push(RunCell {
                        seed: self.seed + s,
                        learning_rate,
                        epochs,
                    });
                }
            }
        }
        out
    }
}

/// One grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunCell {
    pub seed: u64,
    pub learning_rate: f64,
    pub epochs: usize,
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_ce: f64,
    pub mean_kl: f64,
    pub mean_total: f64,
    pub dev_positive_f1: f64,
}

pub struct Dataset<'a> {
    pub train: &'a [Meeting],
    pub dev: &'a [Meeting],
    pub test: &'a [Meeting],
}

/// Meetings with their context plans computed once.
#[derive(Debug, Clone)]
pub struct PreparedSplit<'a> {
    pub meetings: &'a [Meeting],
    pub plans: Vec<Vec<ContextPlan>>,
}

impl PreparedSplit<'_> {
    pub fn num_sentences(&self) -> usize {
        self.plans.iter().map(Vec::len).sum()
    }

    fn focus_refs(&self) -> Vec<(usize, usize)> {
        self.plans
            .iter()
            .enumerate()
            .flat_map(|(m, ps)| (0..ps.len()).map(move |s| (m, s)))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the epoch with the best dev F1.
    pub model: ClassifierModel,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_dev_f1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: RunCell,
    pub best_epoch: usize,
    pub best_dev_f1: f64,
    pub log: Vec<EpochLog>,
}

/// The grid winner for one seed.
#[derive(Debug, Clone)]
pub struct SeedResult {
    pub cell: RunCell,
    pub best_epoch: usize,
    pub dev_f1: f64,
    pub model: ClassifierModel,
    pub test: Option<MetricReport>,
    pub test_predictions: Vec<PredictionRecord>,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub cells: Vec<CellSummary>,
    pub seeds: Vec<SeedResult>,
    /// Test positive F1 over the per-seed winners; `None` without a test set.
    pub test_aggregate: Option<AggregateReport>,
    pub dev_aggregate: AggregateReport,
}

/// Runs training for one loss/context configuration.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub loss: LossConfig,
    pub context: ContextConfig,
    pub run: TrainRunConfig,
    strategy: Arc<dyn PairStrategy>,
}

impl Trainer {
    /// `context.mode` and `context.keep_prob` are taken from `loss`.
    pub fn new(
        strategies: &StrategyRegistry,
        loss: LossConfig,
        context: ContextConfig,
        run: TrainRunConfig,
    ) -> Result<Self, TrainError> {
        loss.validate()?;
        run.validate()?;
        let context = ContextConfig {
            mode: loss.context_mode,
            keep_prob: loss.keep_prob,
            ..context
        };
        context.validate()?;
        let strategy = strategies.get(loss.method.as_str())?;
        Ok(Trainer {
            loss,
            context,
            run,
            strategy,
        })
    }

    pub fn strategy(&self) -> &dyn PairStrategy {
        self.strategy.as_ref()
    }

    pub fn prepare<'a>(&self, meetings: &'a [Meeting]) -> Result<PreparedSplit<'a>, TrainError> {
        let plans = meetings
            .iter()
            .map(|m| plan_meeting(m, &self.context))
            .collect::<Result<_, _>>()?;
        Ok(PreparedSplit { meetings, plans })
    }

    /// Dropout-free predictions, in meeting then sentence order.
    pub fn predict(&self, model: &ClassifierModel, split: &PreparedSplit) -> Result<Vec<PredictionRecord>, TrainError> {
        split
            .focus_refs()
            .into_par_iter()
            .map(|(mi, si)| {
                let meeting = &split.meetings[mi];
                let input = inference_input(meeting, &split.plans[mi][si], self.strategy(), &self.context.render)?;
                let p = model.forward(&input, 0, false)?;
                Ok(PredictionRecord::new(
                    &meeting.meeting_id,
                    si,
                    meeting.sentences[si].label,
                    p.positive(),
                ))
            })
            .collect()
    }

    /// Trains `model` for one grid cell, evaluating on dev after each epoch.
    pub fn train(
        &self,
        model: ClassifierModel,
        train: &PreparedSplit,
        dev: &PreparedSplit,
        cell: &RunCell,
    ) -> Result<TrainOutcome, TrainError> {
        if train.num_sentences() == 0 {
            return Err(TrainError::EmptyDataset("train"));
        }
        if dev.num_sentences() == 0 {
            return Err(TrainError::EmptyDataset("dev"));
        }
        let mut model = model.with_dropout(self.run.dropout)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cell.seed);
        let mut order = train.focus_refs();
        let batches_per_epoch = order.len().div_ceil(self.run.batch_size);
        let total_steps = batches_per_epoch * cell.epochs;
        let mut opt = AdamW::new(self.run.optimizer.clone());
        let mut step = 0;
        let mut log = Vec::with_capacity(cell.epochs);
        let mut best: Option<(ClassifierModel, usize, f64)> = None;

        for epoch in 1..=cell.epochs {
            order.shuffle(&mut rng);
            let (mut ce, mut kl, mut total) = (0.0, 0.0, 0.0);
            for (b, chunk) in order.chunks(self.run.batch_size).enumerate() {
                let pairs = chunk
                    .iter()
                    .map(|&(mi, si)| {
                        build_pair_from_plan(
                            &train.meetings[mi],
                            &train.plans[mi][si],
                            self.strategy(),
                            &self.loss,
                            &self.context.render,
                            &mut rng,
                        )
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let divergent = |value| TrainError::Divergent {
                    epoch,
                    batch: b + 1,
                    value,
                };
                let (loss, grads) = match batch_loss(&model, &pairs, &self.loss) {
                    Err(TrainError::NotNormalized(d)) if d.iter().any(|x| !x.is_finite()) => {
                        return Err(divergent(f64::NAN))
                    }
                    other => other?,
                };
                if !loss.is_finite() || !grads.is_finite() {
                    return Err(divergent(loss.total));
                }
                let n = chunk.len() as f64;
                ce += loss.ce * n;
                kl += loss.kl * n;
                total += loss.total * n;
                let lr = super::scheduled_lr(cell.learning_rate, step, total_steps, self.run.optimizer.warmup_fraction);
                opt.step(&mut model, &grads, lr);
                step += 1;
            }
            let n = order.len() as f64;
            let dev_f1 = positive_f1(&self.predict(&model, dev)?)?.positive_f1;
            log.push(EpochLog {
                epoch,
                mean_ce: ce / n,
                mean_kl: kl / n,
                mean_total: total / n,
                dev_positive_f1: dev_f1,
            });
            if best.as_ref().is_none_or(|(_, _, f)| dev_f1 > *f) {
                best = Some((model.clone(), epoch, dev_f1));
            }
        }
        let (model, best_epoch, best_dev_f1) = best.expect("at least one epoch");
        Ok(TrainOutcome {
            model,
            log,
            best_epoch,
            best_dev_f1,
        })
    }

    /// Trains every grid cell (on up to `jobs` threads), keeps the cell with
    /// the best dev F1 per seed and scores it on test. `init(seed)` builds
    /// the starting model for a seed.
    pub fn grid_search<F>(&self, init: F, data: &Dataset, jobs: usize) -> Result<GridOutcome, TrainError>
    where
        F: Fn(u64) -> Result<ClassifierModel, TrainError> + Sync,
    {
        let train = self.prepare(data.train)?;
        let dev = self.prepare(data.dev)?;
        let test = self.prepare(data.test)?;
        let cells = self.run.cells();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| TrainError::Config(format!("thread pool: {e}")))?;
        let outcomes: Vec<TrainOutcome> = pool.install(|| {
            cells
                .par_iter()
                .map(|cell| self.train(init(cell.seed)?, &train, &dev, cell))
                .collect::<Result<_, _>>()
        })?;

        let mut seeds: Vec<SeedResult> = Vec::new();
        for (cell, out) in cells.iter().zip(&outcomes) {
            match seeds.last_mut() {
                Some(s) if s.cell.seed == cell.seed => {
                    if out.best_dev_f1 > s.dev_f1 {
                        s.cell = *cell;
                        s.best_epoch = out.best_epoch;
                        s.dev_f1 = out.best_dev_f1;
                        s.model = out.model.clone();
                    }
                }
                _ => seeds.push(SeedResult {
                    cell: *cell,
                    best_epoch: out.best_epoch,
                    dev_f1: out.best_dev_f1,
                    model: out.model.clone(),
                    test: None,
                    test_predictions: Vec::new(),
                }),
            }
        }
        if test.num_sentences() > 0 {
            for s in &mut seeds {
                s.test_predictions = self.predict(&s.model, &test)?;
                s.test = Some(positive_f1(&s.test_predictions)?);
            }
        }
        let test_aggregate = seeds
            .iter()
            .map(|s| s.test.as_ref().map(|t| t.positive_f1))
            .collect::<Option<Vec<_>>>()
            .map(|v| aggregate(&v))
            .transpose()?;
        let dev_aggregate = aggregate(&seeds.iter().map(|s| s.dev_f1).collect::<Vec<_>>())?;
        let cells = cells
            .into_iter()
            .zip(outcomes)
            .map(|(cell, o)| CellSummary {
                cell,
                best_epoch: o.best_epoch,
                best_dev_f1: o.best_dev_f1,
                log: o.log,
            })
            .collect();
        Ok(GridOutcome {
            cells,
            seeds,
            test_aggregate,
            dev_aggregate,
        })
    }
}
