//! Mini-batch training with seeded data, seeded shuffles and periodic
//! metric records.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{sample_set, BagVector, LabeledSet, TaskSpec};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, margin_report, EvalSummary, MarginReport};
use crate::model::{item_cross_entropy, loss_and_grad, Activation, MlpParams};
use crate::numerics::{init_stream_id, shuffle_stream_id, test_stream_id, train_stream_id, RngStream};
use crate::optim::{self, OptimConfig, OptimState, WdPolicy};

pub const DEFAULT_SEEDS: [u64; 3] = [1337, 1338, 1339];
/// Number of log points a run aims for.
pub const LOG_POINTS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub p: usize,
    /// Training lengths; the budget is split across them.
    pub lengths: Vec<usize>,
    pub d: usize,
    pub act: Activation,
    pub bias: bool,
    pub n_train: usize,
    pub epochs: usize,
    pub batch: usize,
    pub optim: OptimConfig,
    pub seeds: Vec<u64>,
    pub init_std: f64,
    /// Held-out lengths evaluated at the end of training.
    pub eval_lengths: Vec<usize>,
    pub test_n: usize,
    /// Epochs between records; defaults to `⌈epochs/200⌉`.
    #[serde(default)]
    pub log_every: Option<usize>,
}

impl TrainConfig {
    /// Single-length AdamW run with the usual defaults.
    pub fn new(spec: TaskSpec, d: usize, act: Activation, n_train: usize, epochs: usize) -> Self {
        Self {
            p: spec.p,
            lengths: vec![spec.m],
            d,
            act,
            bias: false,
            n_train,
            epochs,
            batch: 1024,
            optim: OptimConfig::adamw(1e-3, 0.0, WdPolicy::default_for(act)),
            seeds: DEFAULT_SEEDS.to_vec(),
            init_std: 0.01,
            eval_lengths: Vec::new(),
            test_n: 10_000,
            log_every: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch == 0 {
            return bad("batch size must be at least 1");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.lengths.is_empty() {
            return bad("at least one training length is required");
        }
        if self.d == 0 {
            return bad("width must be at least 1");
        }
        if self.test_n == 0 {
            return bad("test size must be at least 1");
        }
        if !(self.init_std >= 0.0) {
            return bad("init_std must be non-negative");
        }
        for &m in self.lengths.iter().chain(&self.eval_lengths) {
            TaskSpec::new(self.p, m)?;
        }
        if shard_sizes(self.n_train, self.lengths.len()).contains(&0) {
            return bad("every training length needs at least one example");
        }
        self.optim.validate()
    }

    pub fn log_interval(&self) -> usize {
        self.log_every.unwrap_or_else(|| self.epochs.div_ceil(LOG_POINTS)).max(1)
    }

    /// Short SHA-256 of the canonical JSON, seeds excluded.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.seeds.clear();
        let text = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(&digest[..8])
    }
}

/// Budget split: the first `n mod L` lengths get one extra example.
pub fn shard_sizes(n: usize, lengths: usize) -> Vec<usize> {
    (0..lengths).map(|i| n / lengths + usize::from(i < n % lengths)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    pub epoch: usize,
    pub train_acc: f64,
    pub test_acc: f64,
    pub loss: f64,
    pub margin: MarginReport,
    /// Accuracy per held-out length; filled on the final record.
    pub ood: BTreeMap<usize, f64>,
    pub wallclock: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged { epoch: usize },
}

#[derive(Clone, Debug)]
pub struct TrainRun {
    pub seed: u64,
    pub records: Vec<RunRecord>,
    pub params: MlpParams,
    pub status: RunStatus,
}

impl TrainRun {
    pub fn last(&self) -> Option<&RunRecord> {
        self.records.last()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Per-length training shards under `seed`.
pub fn training_shards(cfg: &TrainConfig, seed: u64) -> Result<Vec<LabeledSet>> {
    cfg.lengths
        .iter()
        .zip(shard_sizes(cfg.n_train, cfg.lengths.len()))
        .map(|(&m, n)| sample_set(TaskSpec::new(cfg.p, m)?, n, &mut RngStream::new(seed, train_stream_id(seed, m))))
        .collect()
}

/// Held-out set of length `m` under `seed`; identical every time it is built.
pub fn test_set(p: usize, m: usize, n: usize, seed: u64) -> Result<LabeledSet> {
    sample_set(TaskSpec::new(p, m)?, n, &mut RngStream::new(seed, test_stream_id(seed, m)))
}

/// Accuracy on fixed held-out sets for each length.
pub fn evaluate_ood(theta: &MlpParams, lengths: &[usize], test_n: usize, seed: u64) -> Result<BTreeMap<usize, EvalSummary>> {
    lengths.iter().map(|&m| Ok((m, evaluate(theta, &test_set(theta.p(), m, test_n, seed)?)?))).collect()
}

fn merged(shards: &[LabeledSet]) -> LabeledSet {
    let mut all = shards[0].clone();
    for s in &shards[1..] {
        all.items.extend(s.items.iter().cloned());
    }
    all.sequences = None;
    all
}

fn mean_loss(theta: &MlpParams, set: &LabeledSet) -> Result<f64> {
    let xs: Vec<&BagVector> = set.items.iter().map(|(x, _)| x).collect();
    let s = theta.scores_batch(&xs)?;
    Ok(set.items.iter().enumerate().map(|(i, (_, y))| item_cross_entropy(s.row(i), *y)).sum::<f64>() / set.len() as f64)
}

/// Train every seed in the config.
pub fn train(cfg: &TrainConfig) -> Result<Vec<TrainRun>> {
    cfg.validate()?;
    cfg.seeds.iter().map(|&seed| train_seed(cfg, seed)).collect()
}

/// Multi-length training; the same loop, named for the protocol it follows.
pub fn train_multilength(cfg: &TrainConfig) -> Result<Vec<TrainRun>> {
    train(cfg)
}

/// One seeded run. A non-finite loss stops the run and marks it diverged;
/// the records gathered so far are kept.
pub fn train_seed(cfg: &TrainConfig, seed: u64) -> Result<TrainRun> {
    cfg.validate()?;
    let start = Instant::now();
    let hash = cfg.config_hash();
    let shards = training_shards(cfg, seed)?;
    let train_all = merged(&shards);
    let tests: Vec<LabeledSet> = cfg.lengths.iter().map(|&m| test_set(cfg.p, m, cfg.test_n, seed)).collect::<Result<_>>()?;

    let mut theta =
        MlpParams::random(cfg.d, cfg.p, cfg.act, cfg.bias, cfg.init_std, &mut RngStream::new(seed, init_stream_id(seed)));
    let mut state = OptimState::new(&theta);
    let interval = cfg.log_interval();
    let mut records = Vec::new();
    let mut orders: Vec<Vec<usize>> = shards.iter().map(|s| (0..s.len()).collect()).collect();

    let record = |theta: &MlpParams, epoch: usize, last: bool| -> Result<RunRecord> {
        let train_acc = evaluate(theta, &train_all)?.accuracy;
        let test_acc =
            tests.iter().map(|t| evaluate(theta, t).map(|e| e.accuracy)).sum::<Result<f64>>()? / tests.len() as f64;
        let ood = if last {
            evaluate_ood(theta, &cfg.eval_lengths, cfg.test_n, seed)?.into_iter().map(|(m, e)| (m, e.accuracy)).collect()
        } else {
            BTreeMap::new()
        };
        Ok(RunRecord {
            config_hash: hash.clone(),
            seed,
            epoch,
            train_acc,
            test_acc,
            loss: mean_loss(theta, &train_all)?,
            margin: margin_report(theta, &train_all)?,
            ood,
            wallclock: start.elapsed().as_secs_f64(),
        })
    };

    for epoch in 1..=cfg.epochs {
        let mut shuffler = RngStream::new(seed, shuffle_stream_id(seed, epoch));
        for order in orders.iter_mut() {
            shuffler.shuffle(order);
        }
        let mut cursors = vec![0usize; shards.len()];
        let mut epoch_ok = true;
        'epoch: loop {
            let mut progressed = false;
            for (k, shard) in shards.iter().enumerate() {
                let begin = cursors[k];
                if begin >= shard.len() {
                    continue;
                }
                let end = (begin + cfg.batch).min(shard.len());
                cursors[k] = end;
                progressed = true;
                let batch: Vec<(&BagVector, usize)> =
                    orders[k][begin..end].iter().map(|&i| (&shard.items[i].0, shard.items[i].1)).collect();
                let (loss, grads) = loss_and_grad(&theta, &batch)?;
                if !loss.is_finite() {
                    epoch_ok = false;
                    break 'epoch;
                }
                optim::step(&mut theta, &grads, &cfg.optim, &mut state)?;
            }
            if !progressed {
                break;
            }
        }
        let finite = theta.w.all_finite() && theta.v.all_finite() && theta.bias.iter().flatten().all(|b| b.is_finite());
        if !epoch_ok || !finite {
            return Ok(TrainRun { seed, records, params: theta, status: RunStatus::Diverged { epoch } });
        }
        let last = epoch == cfg.epochs;
        if epoch % interval == 0 || last {
            let r = record(&theta, epoch, last)?;
            if !r.loss.is_finite() {
                return Ok(TrainRun { seed, records, params: theta, status: RunStatus::Diverged { epoch } });
            }
            records.push(r);
        }
    }
    Ok(TrainRun { seed, records, params: theta, status: RunStatus::Completed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(act: Activation) -> TrainConfig {
        let mut cfg = TrainConfig::new(TaskSpec::new(5, 2).unwrap(), 8, act, 40, 3);
        cfg.seeds = vec![1];
        cfg.test_n = 50;
        cfg.batch = 16;
        cfg
    }

    #[test]
    fn shard_split() {
        let s = shard_sizes(4000, 7);
        assert_eq!(s.iter().sum::<usize>(), 4000);
        assert_eq!(s.iter().filter(|&&v| v == 572).count(), 3);
        assert_eq!(s.iter().filter(|&&v| v == 571).count(), 4);
        assert_eq!(&s[..3], &[572, 572, 572]);
    }

    #[test]
    fn zero_epochs_rejected() {
        let mut cfg = tiny(Activation::Sine);
        cfg.epochs = 0;
        assert!(train(&cfg).is_err());
        cfg.epochs = 1;
        cfg.seeds.clear();
        assert!(train(&cfg).is_err());
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = tiny(Activation::Relu);
        let a = train_seed(&cfg, 5).unwrap();
        let b = train_seed(&cfg, 5).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.records.len(), b.records.len());
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.loss.to_bits(), y.loss.to_bits());
            assert_eq!(x.margin, y.margin);
        }
    }

    #[test]
    fn log_cadence_includes_final_epoch() {
        let mut cfg = tiny(Activation::Sine);
        cfg.epochs = 450;
        cfg.optim = OptimConfig::sgd(0.01);
        assert_eq!(cfg.log_interval(), 3);
        let run = train_seed(&cfg, 1).unwrap();
        assert_eq!(run.records.len(), 150);
        assert_eq!(run.records.last().unwrap().epoch, 450);
    }

    #[test]
    fn divergence_is_reported() {
        let mut cfg = tiny(Activation::Relu);
        cfg.optim = OptimConfig::sgd(1e300);
        cfg.init_std = 1.0;
        cfg.epochs = 20;
        let run = train_seed(&cfg, 3).unwrap();
        assert!(matches!(run.status, RunStatus::Diverged { .. }));
    }

    #[test]
    fn shards_are_prefixes_and_test_sets_fixed() {
        let mut small = tiny(Activation::Sine);
        small.lengths = vec![2, 3, 4];
        small.n_train = 30;
        let mut big = small.clone();
        big.n_train = 90;
        let (a, b) = (training_shards(&small, 7).unwrap(), training_shards(&big, 7).unwrap());
        for (s, l) in a.iter().zip(&b) {
            assert_eq!(s.items[..], l.items[..s.len()]);
        }
        assert_eq!(test_set(5, 3, 20, 7).unwrap(), test_set(5, 3, 20, 7).unwrap());
    }

    #[test]
    fn loss_decreases_early() {
        let mut cfg = TrainConfig::new(TaskSpec::new(7, 2).unwrap(), 16, Activation::Sine, 200, 10);
        cfg.seeds = vec![1337];
        cfg.test_n = 100;
        cfg.log_every = Some(1);
        let run = train_seed(&cfg, 1337).unwrap();
        for w in run.records.windows(2) {
            assert!(w[1].loss <= w[0].loss);
        }
    }

    #[test]
    fn config_hash_ignores_seeds() {
        let a = tiny(Activation::Sine);
        let mut b = a.clone();
        b.seeds = vec![9, 10];
        assert_eq!(a.config_hash(), b.config_hash());
        b.d = 9;
        assert_ne!(a.config_hash(), b.config_hash());
    }
}
