//! Grids of training runs over seeds, aggregated into seed-mean tables.

mod heatmap;
mod presets;

pub use heatmap::emit_heatmap;
pub use presets::{preset, PRESETS};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::optim::WdPolicy;
use crate::trainer::{train_seed, RunRecord, RunStatus, TrainConfig};

pub const REPORT_FORMAT: &str = "modadd.report.v1";
/// Grid key for the weight-decay axis.
pub const WD_KEY: &str = "optim.weight_decay";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportMode {
    BestOverWD,
    All,
}

/// A base config plus a grid of overrides. Grid keys are dotted paths into
/// the config JSON, e.g. `d` or `optim.weight_decay`. Setting `act` without
/// also gridding `optim.wd_policy` resets the policy to the activation's
/// default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub name: String,
    pub base: TrainConfig,
    pub grid: BTreeMap<String, Vec<Value>>,
    pub report: ReportMode,
}

pub type Cell = BTreeMap<String, Value>;

impl SweepSpec {
    /// Cartesian product of the grid in key order, last key fastest.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = vec![Cell::new()];
        for (key, values) in &self.grid {
            cells = cells
                .into_iter()
                .flat_map(|c| {
                    values.iter().map(move |v| {
                        let mut next = c.clone();
                        next.insert(key.clone(), v.clone());
                        next
                    })
                })
                .collect();
        }
        cells
    }

    pub fn config_for(&self, cell: &Cell) -> Result<TrainConfig> {
        let mut value = serde_json::to_value(&self.base)?;
        for (key, v) in cell {
            set_path(&mut value, key, v.clone())?;
        }
        let mut cfg: TrainConfig = serde_json::from_value(value)?;
        if cell.contains_key("act") && !cell.contains_key("optim.wd_policy") {
            cfg.optim.wd_policy = WdPolicy::default_for(cfg.act);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.values().any(Vec::is_empty) {
            return Err(Error::InvalidArgument("grid axes must be nonempty".into()));
        }
        for cell in self.cells() {
            self.config_for(&cell)?;
        }
        Ok(())
    }
}

fn set_path(root: &mut Value, path: &str, v: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::InvalidArgument(format!("grid key {path} does not name a config field")))?;
        if !obj.contains_key(*part) {
            return Err(Error::InvalidArgument(format!("grid key {path} does not name a config field")));
        }
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), v);
            return Ok(());
        }
        node = obj.get_mut(*part).expect("checked");
    }
    Ok(())
}

/// Final state of one (cell, seed) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRun {
    pub cell: Cell,
    pub seed: u64,
    pub status: RunStatus,
    pub final_record: Option<RunRecord>,
}

/// Scalar metrics read off a final record; OOD lengths appear as `ood_<m>`.
pub fn record_metrics(r: &RunRecord) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    out.insert("train_acc".into(), r.train_acc);
    out.insert("test_acc".into(), r.test_acc);
    out.insert("loss".into(), r.loss);
    out.insert("min_margin".into(), r.margin.min_margin);
    out.insert("pct05_margin".into(), r.margin.pct05_margin);
    out.insert("v_spectral".into(), r.margin.v_spectral);
    out.insert("w_frobenius".into(), r.margin.w_frobenius);
    out.insert("v_row_l1".into(), r.margin.v_row_l1);
    out.insert("norm_margin_relu".into(), r.margin.norm_margin_relu);
    out.insert("norm_margin_sine".into(), r.margin.norm_margin_sine);
    for (m, acc) in &r.ood {
        out.insert(format!("ood_{m}"), *acc);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportRow {
    pub cell: Cell,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    /// Some seed of the cell diverged; statistics cover the rest.
    pub failed: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportTable {
    pub format: String,
    pub rows: Vec<ReportRow>,
}

fn cell_key(cell: &Cell) -> String {
    serde_json::to_string(cell).expect("cell serializes")
}

impl ReportTable {
    /// Seed mean and population std per (cell, metric), in first-seen cell order.
    pub fn aggregate(runs: &[CellRun]) -> Self {
        let mut order: Vec<(String, Cell)> = Vec::new();
        let mut groups: BTreeMap<String, Vec<&CellRun>> = BTreeMap::new();
        for r in runs {
            let key = cell_key(&r.cell);
            if !groups.contains_key(&key) {
                order.push((key.clone(), r.cell.clone()));
            }
            groups.entry(key).or_default().push(r);
        }
        let mut rows = Vec::new();
        for (key, cell) in order {
            let group = &groups[&key];
            let failed = group.iter().any(|r| r.status != RunStatus::Completed);
            let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for r in group.iter().filter(|r| r.status == RunStatus::Completed) {
                if let Some(rec) = &r.final_record {
                    for (k, v) in record_metrics(rec) {
                        values.entry(k).or_default().push(v);
                    }
                }
            }
            if values.is_empty() {
                rows.push(ReportRow { cell: cell.clone(), metric: "test_acc".into(), mean: f64::NAN, std: f64::NAN, n: 0, failed });
            }
            for (metric, vs) in values {
                let n = vs.len();
                let mean = vs.iter().sum::<f64>() / n as f64;
                let var = vs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                rows.push(ReportRow { cell: cell.clone(), metric, mean, std: var.sqrt(), n, failed });
            }
        }
        Self { format: REPORT_FORMAT.into(), rows }
    }

    pub fn get(&self, cell: &Cell, metric: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| &r.cell == cell && r.metric == metric)
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out: Vec<Cell> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.cell) {
                out.push(r.cell.clone());
            }
        }
        out
    }

    /// For each setting of the other axes, the maximum seed-mean of
    /// `metric` over the values of `axis`, with the value attaining it.
    pub fn best_over(&self, axis: &str, metric: &str) -> Vec<(Cell, f64, Value)> {
        let mut best: Vec<(Cell, f64, Value)> = Vec::new();
        for r in self.rows.iter().filter(|r| r.metric == metric && r.mean.is_finite()) {
            let mut rest = r.cell.clone();
            let at = rest.remove(axis).unwrap_or(Value::Null);
            match best.iter_mut().find(|(c, _, _)| *c == rest) {
                Some(entry) if r.mean > entry.1 => {
                    entry.1 = r.mean;
                    entry.2 = at;
                }
                Some(_) => {}
                None => best.push((rest, r.mean, at)),
            }
        }
        best
    }

    pub fn best_over_wd(&self, metric: &str) -> Vec<(Cell, f64, Value)> {
        self.best_over(WD_KEY, metric)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell,metric,mean,std,n,failed\n");
        for r in &self.rows {
            let cell = cell_key(&r.cell).replace('"', "\"\"");
            let _ = writeln!(out, "\"{cell}\",{},{},{},{},{}", r.metric, r.mean, r.std, r.n, r.failed);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text)?;
        if t.format != REPORT_FORMAT {
            return Err(Error::Format(format!("unsupported report format {}", t.format)));
        }
        Ok(t)
    }
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub table: ReportTable,
    pub runs: Vec<CellRun>,
}

/// Summary CSV: one row per (cell, seed) with the final metrics.
pub fn summary_csv(spec: &SweepSpec, runs: &[CellRun]) -> Result<String> {
    let ood: Vec<usize> = spec.base.eval_lengths.clone();
    let mut out = String::from(
        "config_hash,cell,seed,status,train_acc,test_acc,pct05_margin,min_margin,v_spectral,w_frobenius,v_row_l1,norm_margin_relu,norm_margin_sine",
    );
    for m in &ood {
        let _ = write!(out, ",ood_{m}");
    }
    out.push('\n');
    for r in runs {
        let hash = spec.config_for(&r.cell)?.config_hash();
        let status = match r.status {
            RunStatus::Completed => "completed".to_string(),
            RunStatus::Diverged { epoch } => format!("diverged@{epoch}"),
        };
        let _ = write!(out, "{hash},\"{}\",{},{status}", cell_key(&r.cell).replace('"', "\"\""), r.seed);
        match &r.final_record {
            Some(f) => {
                let m = &f.margin;
                let _ = write!(
                    out,
                    ",{},{},{},{},{},{},{},{},{}",
                    f.train_acc,
                    f.test_acc,
                    m.pct05_margin,
                    m.min_margin,
                    m.v_spectral,
                    m.w_frobenius,
                    m.v_row_l1,
                    m.norm_margin_relu,
                    m.norm_margin_sine
                );
                for len in &ood {
                    let _ = write!(out, ",{}", f.ood.get(len).map_or(String::new(), |v| v.to_string()));
                }
            }
            None => out.push_str(&",".repeat(9 + ood.len())),
        }
        out.push('\n');
    }
    Ok(out)
}

/// Run every (cell, seed) pair on a pool of `parallelism` workers. With an
/// output directory, writes per-run JSONL, `summary.csv`, `report.csv` and
/// `report.json`.
pub fn run_sweep(spec: &SweepSpec, parallelism: usize, out: Option<&Path>) -> Result<SweepResult> {
    spec.validate()?;
    let jobs: Vec<(Cell, TrainConfig, u64)> = spec
        .cells()
        .into_iter()
        .map(|c| {
            let cfg = spec.config_for(&c)?;
            Ok(cfg.seeds.clone().into_iter().map(move |s| (c.clone(), cfg.clone(), s)).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if let Some(dir) = out {
        fs::create_dir_all(dir.join("runs"))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let results: Vec<Result<CellRun>> = pool.install(|| {
        jobs.par_iter()
            .map(|(cell, cfg, seed)| {
                let run = train_seed(cfg, *seed)?;
                if let Some(dir) = out {
                    let path = dir.join("runs").join(format!("{}_{seed}.jsonl", cfg.config_hash()));
                    run.write_jsonl(fs::File::create(path)?)?;
                }
                Ok(CellRun { cell: cell.clone(), seed: *seed, status: run.status, final_record: run.records.last().cloned() })
            })
            .collect()
    });
    let runs: Vec<CellRun> = results.into_iter().collect::<Result<_>>()?;
    let table = ReportTable::aggregate(&runs);
    if let Some(dir) = out {
        fs::write(dir.join("summary.csv"), summary_csv(spec, &runs)?)?;
        fs::write(dir.join("report.csv"), table.to_csv())?;
        fs::write(dir.join("report.json"), table.to_json()?)?;
        let finals: Vec<String> = runs.iter().map(serde_json::to_string).collect::<std::result::Result<_, _>>()?;
        fs::write(dir.join("finals.jsonl"), finals.join("\n") + "\n")?;
    }
    Ok(SweepResult { table, runs })
}
