use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use modadd::data::{TaskSpec, DEFAULT_DOMAIN_CAP};
use modadd::model::Activation;
use modadd::sweep::{emit_heatmap, preset, run_sweep, Cell, ReportMode, ReportRow, ReportTable, SweepSpec, REPORT_FORMAT};
use modadd::trainer::{train_seed, RunStatus, TrainConfig};
use modadd::verify::{certify_construction, verify_claim, Certificate, ConstructionKind};
use modadd::{Error, Result};

const EXIT_VERIFY_FAILED: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "modadd", version, about = "Modular addition with two-layer sine and ReLU networks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file for the subcommand
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated seeds, overriding the config
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Worker threads for sweeps
    #[arg(long, global = true, default_value_t = 1)]
    parallel: usize,
    /// Largest domain enumerated exhaustively
    #[arg(long, global = true)]
    cap: Option<u128>,
}

#[derive(Subcommand)]
enum Command {
    /// Build a construction and write it as a checkpoint
    Construct {
        /// sine_width2, sine_biased, sine_halfp, sine_highmargin, relu_m2, relu_general
        name: Option<String>,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 0.1)]
        tau: f64,
    },
    /// Check a claim and print its certificate
    Verify {
        claim: Option<String>,
        /// Claim parameters as a JSON object
        #[arg(long)]
        params: Option<String>,
    },
    /// Train one configuration over the seeds
    Train {
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        act: Option<Activation>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Run a named preset or a sweep config
    Sweep { preset: Option<String> },
    /// Length-generalization sweep with heatmaps per activation
    Ood {
        /// ood-p97, ood-p53, ood-bias or ood-desk
        #[arg(default_value = "ood-desk")]
        preset: String,
    },
    /// Run the lemma oracle suite
    Lemma {
        /// Run only claims whose name contains this string
        filter: Option<String>,
    },
    /// Re-aggregate a sweep directory and print best-over-WD tables
    Report {
        dir: Option<PathBuf>,
        #[arg(long, default_value = "test_acc")]
        metric: String,
    },
}

fn read_json(path: &Path) -> Result<Value> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn out_dir(common: &Common, default: &str) -> Result<PathBuf> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from(default));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn print_certificate(cert: &Certificate) -> Result<()> {
    println!("{}", serde_json::to_string(cert)?);
    Ok(())
}

fn construct(common: &Common, name: Option<String>, p: Option<usize>, m: usize, tau: f64) -> Result<u8> {
    let cfg = match &common.config {
        Some(path) => read_json(path)?,
        None => json!({}),
    };
    let name = name
        .or_else(|| cfg.get("name").and_then(Value::as_str).map(String::from))
        .ok_or_else(|| Error::InvalidArgument("construct needs a construction name".into()))?;
    let p = p
        .or_else(|| cfg.get("p").and_then(Value::as_u64).map(|v| v as usize))
        .ok_or_else(|| Error::InvalidArgument("construct needs --p".into()))?;
    let m = cfg.get("m").and_then(Value::as_u64).map_or(m, |v| v as usize);
    let tau = cfg.get("tau").and_then(Value::as_f64).unwrap_or(tau);
    let kind = ConstructionKind::parse(&name, tau)?;
    let spec = TaskSpec::new(p, m)?;
    let theta = kind.build(spec)?;
    let dir = out_dir(common, "out")?;
    let path = dir.join(format!("{}_m{m}_p{p}.json", kind.name()));
    fs::write(&path, theta.to_checkpoint_json()?)?;
    let cert = certify_construction(kind, spec, common.cap.unwrap_or(DEFAULT_DOMAIN_CAP))?;
    fs::write(dir.join(format!("{}_m{m}_p{p}.cert.json", kind.name())), serde_json::to_string_pretty(&cert)?)?;
    eprintln!("wrote {} (width {})", path.display(), theta.width());
    print_certificate(&cert)?;
    Ok(if cert.passed { 0 } else { EXIT_VERIFY_FAILED })
}

fn verify(common: &Common, claim: Option<String>, params: Option<String>) -> Result<u8> {
    // A config file may hold one request or a list of them.
    let requests: Vec<(String, Value)> = match (&common.config, claim) {
        (_, Some(claim)) => {
            let params = match params {
                Some(text) => serde_json::from_str(&text)?,
                None => json!({}),
            };
            vec![(claim, params)]
        }
        (Some(path), None) => {
            let cfg = read_json(path)?;
            let list = match cfg {
                Value::Array(items) => items,
                one => vec![one],
            };
            list.into_iter()
                .map(|item| {
                    let claim = item
                        .get("claim")
                        .and_then(Value::as_str)
                        .ok_or_else(|| Error::InvalidArgument("verify config entries need a claim".into()))?
                        .to_string();
                    Ok((claim, item.get("params").cloned().unwrap_or(json!({}))))
                })
                .collect::<Result<_>>()?
        }
        (None, None) => return Err(Error::InvalidArgument("verify needs a claim or --config".into())),
    };
    let mut all_passed = true;
    let mut certs = Vec::new();
    for (claim, params) in requests {
        let cert = verify_claim(&claim, &params, common.cap)?;
        all_passed &= cert.passed;
        print_certificate(&cert)?;
        certs.push(cert);
    }
    if let Some(dir) = &common.out {
        fs::create_dir_all(dir)?;
        let lines: Vec<String> = certs.iter().map(serde_json::to_string).collect::<std::result::Result<_, _>>()?;
        fs::write(dir.join("certificates.jsonl"), lines.join("\n") + "\n")?;
    }
    Ok(if all_passed { 0 } else { EXIT_VERIFY_FAILED })
}

struct TrainOverrides {
    p: Option<usize>,
    m: Option<usize>,
    d: Option<usize>,
    act: Option<Activation>,
    n: Option<usize>,
    epochs: Option<usize>,
}

fn train_cmd(common: &Common, o: TrainOverrides) -> Result<u8> {
    let mut cfg: TrainConfig = match &common.config {
        Some(path) => serde_json::from_value(read_json(path)?)?,
        None => {
            let spec = TaskSpec::new(o.p.unwrap_or(31), o.m.unwrap_or(3))?;
            TrainConfig::new(spec, o.d.unwrap_or(64), o.act.unwrap_or(Activation::Sine), o.n.unwrap_or(3000), o.epochs.unwrap_or(5000))
        }
    };
    if common.config.is_some() {
        if let Some(p) = o.p {
            cfg.p = p;
        }
        if let Some(m) = o.m {
            cfg.lengths = vec![m];
        }
        if let Some(d) = o.d {
            cfg.d = d;
        }
        if let Some(act) = o.act {
            cfg.act = act;
        }
        if let Some(n) = o.n {
            cfg.n_train = n;
        }
        if let Some(e) = o.epochs {
            cfg.epochs = e;
        }
    }
    if let Some(seeds) = &common.seeds {
        cfg.seeds = seeds.clone();
    }
    cfg.validate()?;
    let dir = out_dir(common, "runs")?;
    let hash = cfg.config_hash();
    fs::write(dir.join(format!("{hash}.config.json")), serde_json::to_string_pretty(&cfg)?)?;
    let mut diverged = false;
    for &seed in &cfg.seeds {
        let run = train_seed(&cfg, seed)?;
        run.write_jsonl(fs::File::create(dir.join(format!("{hash}_{seed}.jsonl")))?)?;
        fs::write(dir.join(format!("{hash}_{seed}.checkpoint.json")), run.params.to_checkpoint_json()?)?;
        match (run.status, run.last()) {
            (RunStatus::Diverged { epoch }, _) => {
                diverged = true;
                println!("seed {seed}: diverged at epoch {epoch}");
            }
            (RunStatus::Completed, Some(r)) => println!(
                "seed {seed}: train {:.4} test {:.4} pct05 margin {:.4e} loss {:.4e}",
                r.train_acc, r.test_acc, r.margin.pct05_margin, r.loss
            ),
            (RunStatus::Completed, None) => println!("seed {seed}: no records"),
        }
    }
    Ok(if diverged { EXIT_DIVERGED } else { 0 })
}

fn load_sweep(common: &Common, name: Option<&str>) -> Result<SweepSpec> {
    let mut spec = match (name, &common.config) {
        (Some(name), _) => preset(name)?,
        (None, Some(path)) => serde_json::from_value(read_json(path)?)?,
        (None, None) => return Err(Error::InvalidArgument("sweep needs a preset name or --config".into())),
    };
    if let Some(seeds) = &common.seeds {
        spec.base.seeds = seeds.clone();
    }
    Ok(spec)
}

fn print_best(table: &ReportTable, metric: &str) {
    for (cell, best, at) in table.best_over_wd(metric) {
        println!("{} {metric} best-over-wd {best:.4} at wd {at}", serde_json::to_string(&cell).unwrap_or_default());
    }
}

fn sweep_cmd(common: &Common, name: Option<String>) -> Result<(SweepSpec, ReportTable, PathBuf, u8)> {
    let spec = load_sweep(common, name.as_deref())?;
    let dir = out_dir(common, &format!("sweeps/{}", spec.name))?;
    fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(&spec)?)?;
    let result = run_sweep(&spec, common.parallel, Some(&dir))?;
    for row in result.table.rows.iter().filter(|r| r.metric == "test_acc") {
        println!(
            "{} test_acc {:.4} ± {:.4} (n={}){}",
            serde_json::to_string(&row.cell)?,
            row.mean,
            row.std,
            row.n,
            if row.failed { " FAILED" } else { "" }
        );
    }
    if spec.report == ReportMode::BestOverWD {
        print_best(&result.table, "test_acc");
    }
    let diverged = result.runs.iter().any(|r| r.status != RunStatus::Completed);
    Ok((spec, result.table, dir, if diverged { EXIT_DIVERGED } else { 0 }))
}

/// Best-over-WD OOD accuracy laid out as (length, budget) cells per activation.
fn ood_tables(spec: &SweepSpec, table: &ReportTable) -> BTreeMap<String, ReportTable> {
    let mut out: BTreeMap<String, ReportTable> = BTreeMap::new();
    for &len in &spec.base.eval_lengths {
        let metric = format!("ood_{len}");
        for (cell, best, _) in table.best_over_wd(&metric) {
            let act = cell.get("act").and_then(Value::as_str).unwrap_or(spec.base.act.name()).to_string();
            let budget = cell.get("n_train").cloned().unwrap_or(json!(spec.base.n_train));
            let row = ReportRow {
                cell: Cell::from([("length".to_string(), json!(len)), ("n_train".to_string(), budget)]),
                metric: "accuracy".into(),
                mean: best,
                std: 0.0,
                n: 1,
                failed: false,
            };
            out.entry(act)
                .or_insert_with(|| ReportTable { format: REPORT_FORMAT.into(), rows: Vec::new() })
                .rows
                .push(row);
        }
    }
    out
}

fn ood_cmd(common: &Common, name: String) -> Result<u8> {
    let (spec, table, dir, code) = sweep_cmd(common, Some(name))?;
    for (act, t) in ood_tables(&spec, &table) {
        let path = dir.join(format!("heatmap_{act}.svg"));
        emit_heatmap(&t, "accuracy", ("n_train", "length"), &path)?;
        fs::write(dir.join(format!("ood_{act}.json")), t.to_json()?)?;
        eprintln!("wrote {}", path.display());
        for row in &t.rows {
            println!("{act} length {} n {} best-over-wd acc {:.4}", row.cell["length"], row.cell["n_train"], row.mean);
        }
    }
    Ok(code)
}

fn lemma_suite() -> Vec<(&'static str, Value)> {
    let mut out = Vec::new();
    for p in 2..=64 {
        out.push(("gram_identity", json!({ "p": p })));
    }
    for m in 2..=12 {
        for p in 2..=12 {
            out.push(("uniformity", json!({ "m": m, "p": p })));
        }
    }
    for s in 1..=8 {
        out.push(("polarization", json!({ "s": s, "trials": 100 })));
    }
    for m in 1..=6 {
        out.push(("newton_reconstruction", json!({ "m": m, "trials": 100 })));
    }
    for m in 1..=10 {
        out.push(("newton_counts", json!({ "m": m })));
    }
    for s in 1..=6 {
        for n in [1, 2, 4, 8, 16, 32, 64] {
            out.push(("spline_bound", json!({ "s": s, "n": n })));
        }
    }
    out.push(("trig_polynomialization", json!({ "trials": 100 })));
    out
}

fn lemma_cmd(common: &Common, filter: Option<String>) -> Result<u8> {
    let mut failed = 0usize;
    let mut total = 0usize;
    let mut lines = Vec::new();
    for (claim, params) in lemma_suite() {
        if filter.as_deref().is_some_and(|f| !claim.contains(f)) {
            continue;
        }
        let cert = verify_claim(claim, &params, common.cap)?;
        total += 1;
        if !cert.passed {
            failed += 1;
            print_certificate(&cert)?;
        }
        lines.push(serde_json::to_string(&cert)?);
    }
    if let Some(dir) = &common.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("lemmas.jsonl"), lines.join("\n") + "\n")?;
    }
    println!("{} of {total} lemma checks passed", total - failed);
    Ok(if failed == 0 { 0 } else { EXIT_VERIFY_FAILED })
}

fn report_cmd(common: &Common, dir: Option<PathBuf>, metric: &str) -> Result<u8> {
    let dir = dir
        .or_else(|| common.out.clone())
        .ok_or_else(|| Error::InvalidArgument("report needs a sweep directory".into()))?;
    let finals = fs::read_to_string(dir.join("finals.jsonl"))?;
    let runs = finals
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let table = ReportTable::aggregate(&runs);
    if let Ok(saved) = fs::read_to_string(dir.join("report.json")) {
        if saved != table.to_json()? {
            eprintln!("warning: report.json differs from re-aggregated finals");
        }
    }
    for row in table.rows.iter().filter(|r| r.metric == metric) {
        println!("{} {metric} {:.4} ± {:.4} (n={})", serde_json::to_string(&row.cell)?, row.mean, row.std, row.n);
    }
    print_best(&table, metric);
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    let common = &cli.common;
    match cli.cmd {
        Command::Construct { name, p, m, tau } => construct(common, name, p, m, tau),
        Command::Verify { claim, params } => verify(common, claim, params),
        Command::Train { p, m, d, act, n, epochs } => train_cmd(common, TrainOverrides { p, m, d, act, n, epochs }),
        Command::Sweep { preset } => sweep_cmd(common, preset).map(|(.., code)| code),
        Command::Ood { preset } => ood_cmd(common, preset),
        Command::Lemma { filter } => lemma_cmd(common, filter),
        Command::Report { dir, metric } => report_cmd(common, dir, &metric),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
