//! Baseline and sketch-sampled training loops.
//!
//! The adaptive loop trains on full batches for `warmup_iters` iterations and
//! inserts every `(representation, loss)` pair into a Nadaraya-Watson sketch.
//! Afterwards each batch is scored by querying the sketch, sampled with
//! [`make_plan`], trained with the resulting weights, and the kept examples'
//! true losses are written back on scheduled update rounds.
//!
//! Both loops draw batches, model initialization and sampling decisions from
//! separate streams of the run seed, so the baseline and adaptive runs see the
//! same batches in the same order.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::estimate::Estimator;
use crate::lsh::LshFamilySpec;
use crate::model::{DeskModel, ModelSpec, OptimizerSpec};
use crate::nws::{NwConfig, NwSketch, DEFAULT_Y_BOUND};
use crate::rng::{rng_from_seed, stream_seed, SketchRng, Stream};
use crate::sampler::{make_plan, should_update_sketch, SamplerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    /// The example's feature vector.
    #[default]
    Raw,
    /// Hidden activations of the current model (experimental: hashes drift as
    /// the network trains).
    Penultimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SketchConfig {
    pub bits: u32,
    pub rows: usize,
    pub y_bound: f64,
    #[serde(default)]
    pub estimator: Estimator,
    /// Cells are multiplied by this factor at each post-warm-up update round.
    pub decay: f64,
}

impl Default for SketchConfig {
    fn default() -> Self {
        SketchConfig { bits: 8, rows: 200, y_bound: DEFAULT_Y_BOUND, estimator: Estimator::Mean, decay: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub iterations: u64,
    pub batch_size: usize,
    /// Test metrics are recomputed every this many iterations (and on the last).
    pub eval_every: u64,
    pub model: ModelSpec,
    pub optimizer: OptimizerSpec,
    pub representation: Representation,
    pub sampler: SamplerConfig,
    pub sketch: SketchConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            iterations: 600,
            batch_size: 64,
            eval_every: 1,
            model: ModelSpec::Logistic,
            optimizer: OptimizerSpec::Sgd { lr: 0.1 },
            representation: Representation::Raw,
            sampler: SamplerConfig::default(),
            sketch: SketchConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be >= 1".into()));
        }
        self.optimizer.validate()?;
        self.sampler.validate()?;
        if !(self.sketch.decay > 0.0 && self.sketch.decay <= 1.0) {
            return Err(Error::Config("sketch.decay must be in (0, 1]".into()));
        }
        NwConfig { rows: self.sketch.rows, y_bound: self.sketch.y_bound, estimator: self.sketch.estimator }
            .validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub iter: u64,
    /// Mean unweighted loss over the full batch, before the step.
    pub train_loss: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub examples_backpropagated: u64,
    /// Cumulative time spent in training steps (evaluation excluded).
    pub wall_clock_ns: u64,
    pub sketch_updated: bool,
}

impl TrainRecord {
    /// Equality on everything except timing.
    pub fn same_metrics(&self, other: &TrainRecord) -> bool {
        self.iter == other.iter
            && self.train_loss.to_bits() == other.train_loss.to_bits()
            && self.test_loss.to_bits() == other.test_loss.to_bits()
            && self.test_accuracy.to_bits() == other.test_accuracy.to_bits()
            && self.examples_backpropagated == other.examples_backpropagated
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Baseline,
    Adaptive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    pub mode: RunMode,
    pub config: TrainConfig,
    pub records: Vec<TrainRecord>,
}

impl TrainRun {
    pub fn final_accuracy(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.test_accuracy)
    }

    pub fn total_backpropagated(&self) -> u64 {
        self.records.iter().map(|r| r.examples_backpropagated).sum()
    }

    /// Fraction of examples seen after warm-up that were backpropagated.
    pub fn post_warmup_fraction(&self) -> f64 {
        let warm = self.config.sampler.warmup_iters;
        let post: Vec<&TrainRecord> = self.records.iter().filter(|r| r.iter >= warm).collect();
        if post.is_empty() {
            return 1.0;
        }
        let seen = (post.len() * self.config.batch_size) as f64;
        post.iter().map(|r| r.examples_backpropagated).sum::<u64>() as f64 / seen
    }
}

/// Monotonic nanosecond clock; closures `FnMut() -> u64` qualify.
pub trait Clock {
    fn now_ns(&mut self) -> u64;
}

impl<F: FnMut() -> u64> Clock for F {
    fn now_ns(&mut self) -> u64 {
        self()
    }
}

/// A clock that never advances, for fully deterministic record streams.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ns(&mut self) -> u64 {
        0
    }
}

/// Endless stream of fixed-size batches; reshuffles on every pass.
struct BatchStream {
    order: Vec<usize>,
    cursor: usize,
    rng: SketchRng,
}

impl BatchStream {
    fn new(n: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        BatchStream { order, cursor: 0, rng }
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut batch = Vec::with_capacity(size);
        while batch.len() < size {
            if self.cursor == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            batch.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        batch
    }
}

struct Loop<'a> {
    cfg: &'a TrainConfig,
    train: &'a TabularDataset,
    test: &'a TabularDataset,
    labels: &'a [usize],
    test_labels: &'a [usize],
    model: DeskModel,
    batches: BatchStream,
    test_metrics: (f64, f64),
}

impl<'a> Loop<'a> {
    fn new(cfg: &'a TrainConfig, train: &'a TabularDataset, test: &'a TabularDataset) -> Result<Self> {
        cfg.validate()?;
        if train.is_empty() {
            return Err(Error::Config("training set is empty".into()));
        }
        if train.n_features() != test.n_features() {
            return Err(Error::DimensionMismatch { expected: train.n_features(), got: test.n_features() });
        }
        let labels = train.labels()?;
        let test_labels = test.labels()?;
        let n_classes = train.n_classes().max(test.n_classes()).max(2);
        let model = DeskModel::new(
            cfg.model,
            cfg.optimizer,
            train.n_features(),
            n_classes,
            stream_seed(cfg.seed, Stream::ModelInit),
        )?;
        Ok(Loop {
            cfg,
            train,
            test,
            labels,
            test_labels,
            model,
            batches: BatchStream::new(train.len(), stream_seed(cfg.seed, Stream::DataOrder)),
            test_metrics: (f64::NAN, f64::NAN),
        })
    }

    fn batch(&mut self) -> (Vec<usize>, Vec<f64>, Vec<usize>) {
        let idx = self.batches.next_batch(self.cfg.batch_size);
        let mut xs = Vec::with_capacity(idx.len() * self.train.n_features());
        for &i in &idx {
            xs.extend_from_slice(self.train.row(i));
        }
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        (idx, xs, labels)
    }

    fn record(&mut self, iter: u64, losses: &[f64], backprop: usize, elapsed: u64, updated: bool) -> Result<TrainRecord> {
        let last = iter + 1 == self.cfg.iterations;
        if iter.is_multiple_of(self.cfg.eval_every) || last {
            self.test_metrics = self.model.evaluate(self.test.features(), self.test_labels)?;
        }
        Ok(TrainRecord {
            iter,
            train_loss: crate::stats::mean(losses),
            test_loss: self.test_metrics.0,
            test_accuracy: self.test_metrics.1,
            examples_backpropagated: backprop as u64,
            wall_clock_ns: elapsed,
            sketch_updated: updated,
        })
    }
}

/// Conventional training on full batches.
pub fn run_baseline(
    cfg: &TrainConfig,
    train: &TabularDataset,
    test: &TabularDataset,
    clock: &mut dyn Clock,
) -> Result<TrainRun> {
    let mut lp = Loop::new(cfg, train, test)?;
    let mut records = Vec::with_capacity(cfg.iterations as usize);
    let mut elapsed = 0u64;
    for iter in 0..cfg.iterations {
        let (_, xs, labels) = lp.batch();
        let start = clock.now_ns();
        let losses = lp.model.train_step(&xs, &labels, None)?;
        elapsed += clock.now_ns().saturating_sub(start);
        records.push(lp.record(iter, &losses, labels.len(), elapsed, false)?);
    }
    Ok(TrainRun { mode: RunMode::Baseline, config: cfg.clone(), records })
}

/// Training with sketch-estimated losses driving importance sampling.
pub fn run_adaptive(
    cfg: &TrainConfig,
    train: &TabularDataset,
    test: &TabularDataset,
    clock: &mut dyn Clock,
) -> Result<TrainRun> {
    let mut lp = Loop::new(cfg, train, test)?;
    let repr_dim = match cfg.representation {
        Representation::Raw => train.n_features(),
        Representation::Penultimate => lp.model.representation_dim(),
    };
    let spec = LshFamilySpec::srp(cfg.sketch.bits, repr_dim, stream_seed(cfg.seed, Stream::Hashing))?;
    let mut sketch = NwSketch::new(
        spec,
        NwConfig { rows: cfg.sketch.rows, y_bound: cfg.sketch.y_bound, estimator: cfg.sketch.estimator },
    )?;
    let mut sampling_rng = rng_from_seed(stream_seed(cfg.seed, Stream::Sampling));
    let d = train.n_features();
    let mut records = Vec::with_capacity(cfg.iterations as usize);
    let mut elapsed = 0u64;

    for iter in 0..cfg.iterations {
        let (_, xs, labels) = lp.batch();
        let start = clock.now_ns();
        let reprs: Vec<Vec<f64>> = xs
            .chunks_exact(d)
            .map(|x| match cfg.representation {
                Representation::Raw => x.to_vec(),
                Representation::Penultimate => lp.model.representation(x),
            })
            .collect();
        let (losses, backprop, updated) = if iter < cfg.sampler.warmup_iters {
            let losses = lp.model.train_step(&xs, &labels, None)?;
            for (r, &l) in reprs.iter().zip(&losses) {
                insert_point(&mut sketch, r, l)?;
            }
            (losses, labels.len(), true)
        } else {
            let estimates = reprs
                .iter()
                .map(|r| query_point(&sketch, r))
                .collect::<Result<Vec<f64>>>()?;
            let plan = make_plan(&estimates, &cfg.sampler, &mut sampling_rng)?;
            let losses = lp.model.train_step(&xs, &labels, Some(plan.weights()))?;
            let updated = should_update_sketch(iter, &cfg.sampler);
            if updated {
                sketch.decay(cfg.sketch.decay)?;
                for i in plan.accepted_indices() {
                    insert_point(&mut sketch, &reprs[i], losses[i])?;
                }
            }
            (losses, plan.n_accepted(), updated)
        };
        elapsed += clock.now_ns().saturating_sub(start);
        records.push(lp.record(iter, &losses, backprop, elapsed, updated)?);
    }
    Ok(TrainRun { mode: RunMode::Adaptive, config: cfg.clone(), records })
}

// A zero representation has no SRP bucket: it is neither inserted nor scored.
fn insert_point(sketch: &mut NwSketch, repr: &[f64], loss: f64) -> Result<()> {
    match sketch.insert(repr, loss) {
        Err(Error::ZeroVector) => Ok(()),
        other => other,
    }
}

fn query_point(sketch: &NwSketch, repr: &[f64]) -> Result<f64> {
    match sketch.query(repr) {
        Err(Error::ZeroVector) => Ok(0.0),
        other => other,
    }
}

/// Where a run first reaches a target accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReachPoint {
    pub iteration: u64,
    pub wall_clock_ns: u64,
    pub examples_backpropagated: u64,
}

/// Serializes `NotReached` as the string `"not reached"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reach<T> {
    Reached(T),
    NotReached,
}

impl<T> Reach<T> {
    pub fn reached(&self) -> Option<&T> {
        match self {
            Reach::Reached(v) => Some(v),
            Reach::NotReached => None,
        }
    }
}

impl<T: Serialize> Serialize for Reach<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        match self {
            Reach::Reached(v) => v.serialize(s),
            Reach::NotReached => s.serialize_str("not reached"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub baseline_final_accuracy: f64,
    pub adaptive_final_accuracy: f64,
    pub target_accuracy: f64,
    pub baseline_reach: ReachPoint,
    pub adaptive_reach: Reach<ReachPoint>,
    /// Baseline examples-to-target over adaptive examples-to-target.
    pub speedup_examples: Reach<f64>,
    pub speedup_wall_clock: Reach<f64>,
    pub baseline_examples_total: u64,
    pub adaptive_examples_total: u64,
    pub adaptive_post_warmup_fraction: f64,
}

fn reach(records: &[TrainRecord], target: f64) -> Option<ReachPoint> {
    let mut examples = 0;
    for r in records {
        examples += r.examples_backpropagated;
        if r.test_accuracy >= target {
            return Some(ReachPoint {
                iteration: r.iter,
                wall_clock_ns: r.wall_clock_ns,
                examples_backpropagated: examples,
            });
        }
    }
    None
}

fn ratio(num: u64, den: u64) -> f64 {
    if num == den { 1.0 } else { num as f64 / den as f64 }
}

/// Compares an adaptive run against the baseline's final test accuracy.
pub fn compare_runs(baseline: &TrainRun, adaptive: &TrainRun) -> Result<ComparisonReport> {
    compare_records(&baseline.records, &adaptive.records, adaptive.config.sampler.warmup_iters, adaptive.config.batch_size)
}

pub fn compare_records(
    baseline: &[TrainRecord],
    adaptive: &[TrainRecord],
    warmup_iters: u64,
    batch_size: usize,
) -> Result<ComparisonReport> {
    let last = baseline.last().ok_or(Error::InvalidParam("baseline run has no records"))?;
    let target = last.test_accuracy;
    let baseline_reach = reach(baseline, target).expect("the final record meets its own accuracy");
    let adaptive_reach = reach(adaptive, target);
    let post: Vec<&TrainRecord> = adaptive.iter().filter(|r| r.iter >= warmup_iters).collect();
    let fraction = if post.is_empty() || batch_size == 0 {
        1.0
    } else {
        post.iter().map(|r| r.examples_backpropagated).sum::<u64>() as f64 / (post.len() * batch_size) as f64
    };
    let (speedup_examples, speedup_wall_clock) = match adaptive_reach {
        Some(a) => (
            Reach::Reached(ratio(baseline_reach.examples_backpropagated, a.examples_backpropagated)),
            Reach::Reached(ratio(baseline_reach.wall_clock_ns, a.wall_clock_ns)),
        ),
        None => (Reach::NotReached, Reach::NotReached),
    };
    Ok(ComparisonReport {
        baseline_final_accuracy: target,
        adaptive_final_accuracy: adaptive.last().map_or(0.0, |r| r.test_accuracy),
        target_accuracy: target,
        baseline_reach,
        adaptive_reach: adaptive_reach.map_or(Reach::NotReached, Reach::Reached),
        speedup_examples,
        speedup_wall_clock,
        baseline_examples_total: baseline.iter().map(|r| r.examples_backpropagated).sum(),
        adaptive_examples_total: adaptive.iter().map(|r| r.examples_backpropagated).sum(),
        adaptive_post_warmup_fraction: fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_classification;

    fn task(seed: u64) -> (TabularDataset, TabularDataset) {
        let ds = synth_classification(1200, 6, 2.5, 0.0, seed).unwrap();
        ds.train_test(0.8, seed).unwrap()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            iterations: 60,
            batch_size: 32,
            sampler: SamplerConfig { warmup_iters: 10, ..SamplerConfig::default() },
            sketch: SketchConfig { rows: 40, bits: 6, ..SketchConfig::default() },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn baseline_is_deterministic() {
        let (train, test) = task(1);
        let cfg = small_cfg();
        let a = run_baseline(&cfg, &train, &test, &mut NoClock).unwrap();
        let b = run_baseline(&cfg, &train, &test, &mut NoClock).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 60);
        assert!(a.records.iter().all(|r| r.examples_backpropagated == 32));
    }

    #[test]
    fn keep_all_adaptive_equals_baseline() {
        let (train, test) = task(2);
        let mut cfg = small_cfg();
        cfg.sampler.target_ratio = 1.0;
        cfg.sampler.p_min = 1.0;
        let base = run_baseline(&cfg, &train, &test, &mut NoClock).unwrap();
        let adapt = run_adaptive(&cfg, &train, &test, &mut NoClock).unwrap();
        for (a, b) in base.records.iter().zip(&adapt.records) {
            assert!(a.same_metrics(b), "{a:?} vs {b:?}");
        }
        let report = compare_runs(&base, &adapt).unwrap();
        assert_eq!(report.speedup_examples, Reach::Reached(1.0));
    }

    #[test]
    fn warmup_prefix_matches_baseline() {
        let (train, test) = task(3);
        let cfg = small_cfg();
        let base = run_baseline(&cfg, &train, &test, &mut NoClock).unwrap();
        let adapt = run_adaptive(&cfg, &train, &test, &mut NoClock).unwrap();
        for i in 0..10 {
            assert!(base.records[i].same_metrics(&adapt.records[i]));
        }
        // accounting: after warm-up fewer examples are backpropagated
        assert!(adapt.records[10..].iter().any(|r| r.examples_backpropagated < 32));
    }

    #[test]
    fn warmup_covering_budget_equals_baseline() {
        let (train, test) = task(4);
        let mut cfg = small_cfg();
        cfg.sampler.warmup_iters = cfg.iterations;
        let base = run_baseline(&cfg, &train, &test, &mut NoClock).unwrap();
        let adapt = run_adaptive(&cfg, &train, &test, &mut NoClock).unwrap();
        assert!(base.records.iter().zip(&adapt.records).all(|(a, b)| a.same_metrics(b)));
    }

    #[test]
    fn comparison_of_identical_runs() {
        let (train, test) = task(5);
        let cfg = small_cfg();
        let base = run_baseline(&cfg, &train, &test, &mut NoClock).unwrap();
        let report = compare_runs(&base, &base).unwrap();
        assert_eq!(report.speedup_examples, Reach::Reached(1.0));
        assert_eq!(report.speedup_wall_clock, Reach::Reached(1.0));
        assert_eq!(report.adaptive_final_accuracy, report.baseline_final_accuracy);
    }

    #[test]
    fn not_reached_is_reported() {
        let rec = |iter, acc| TrainRecord {
            iter,
            train_loss: 0.0,
            test_loss: 0.0,
            test_accuracy: acc,
            examples_backpropagated: 10,
            wall_clock_ns: iter * 5,
            sketch_updated: false,
        };
        let base = [rec(0, 0.5), rec(1, 0.9)];
        let adapt = [rec(0, 0.5), rec(1, 0.8)];
        let report = compare_records(&base, &adapt, 0, 10).unwrap();
        assert_eq!(report.adaptive_reach, Reach::NotReached);
        assert_eq!(report.speedup_examples, Reach::NotReached);
        assert!(compare_records(&[], &adapt, 0, 10).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_cfg();
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg();
        cfg.sketch.decay = 0.0;
        assert!(cfg.validate().is_err());
        let (train, test) = task(6);
        let mut cfg = small_cfg();
        cfg.sampler.p_min = 0.9;
        cfg.sampler.target_ratio = 0.5;
        assert!(run_adaptive(&cfg, &train, &test, &mut NoClock).is_err());
    }

    #[test]
    fn penultimate_representation_runs() {
        let (train, test) = task(7);
        let mut cfg = small_cfg();
        cfg.model = ModelSpec::Mlp { hidden: 8, activation: crate::model::Activation::Tanh };
        cfg.representation = Representation::Penultimate;
        let run = run_adaptive(&cfg, &train, &test, &mut NoClock).unwrap();
        assert_eq!(run.records.len(), 60);
        assert!(run.final_accuracy() > 0.5);
    }
}
