//! Named sweeps. The grids follow the published protocol; epoch counts and
//! test-set sizes are cut down so that each preset runs on a workstation.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::{ReportMode, SweepSpec, WD_KEY};
use crate::data::TaskSpec;
use crate::error::{Error, Result};
use crate::model::Activation;
use crate::optim::{OptimConfig, WdPolicy};
use crate::trainer::TrainConfig;

pub const PRESETS: &[&str] = &[
    "underparam",
    "overparam-sine",
    "overparam-relu",
    "ood-p97",
    "ood-p53",
    "ood-bias",
    "ood-desk",
];

pub const OOD_TRAIN_LENGTHS: &[usize] = &[2, 3, 4, 5, 7, 13, 19];
pub const OOD_EVAL_LENGTHS: &[usize] = &[14, 38, 53, 97, 201, 303, 401, 512, 602, 705, 811];
pub const OOD_WD_GRID: &[f64] = &[0.3, 0.1, 0.03, 0.01, 0.003, 0.001, 0.0];
pub const OVERPARAM_WD_GRID: &[f64] = &[0.0, 0.003, 0.03, 0.3];

const MUON_LR: f64 = 1e-3;
/// Full runs go to 300k epochs; presets stop far earlier.
const UNDERPARAM_EPOCHS: usize = 5000;
const OVERPARAM_EPOCHS: usize = 1500;
/// Evaluating 10k test items at width 1024 costs more than an epoch.
const OVERPARAM_LOG_EVERY: usize = 100;
const OOD_EPOCHS: usize = 2000;
const OOD_TEST_N: usize = 2000;

fn values<T: Into<Value> + Copy>(xs: &[T]) -> Vec<Value> {
    xs.iter().map(|&x| x.into()).collect()
}

fn spec(name: &str, base: TrainConfig, grid: Vec<(&str, Vec<Value>)>, report: ReportMode) -> SweepSpec {
    SweepSpec {
        name: name.into(),
        base,
        grid: grid.into_iter().map(|(k, v)| (k.to_string(), v)).collect::<BTreeMap<_, _>>(),
        report,
    }
}

fn overparam(act: Activation) -> TrainConfig {
    let mut cfg = TrainConfig::new(TaskSpec::new(23, 2).expect("valid task"), 1024, act, 2000, OVERPARAM_EPOCHS);
    cfg.optim = OptimConfig::muon(MUON_LR, 0.0, WdPolicy::default_for(act));
    cfg.log_every = Some(OVERPARAM_LOG_EVERY);
    cfg
}

fn ood(p: usize, act: Activation, bias: bool) -> TrainConfig {
    let mut cfg = TrainConfig::new(TaskSpec::new(p, 2).expect("valid task"), 1024, act, 4000, OOD_EPOCHS);
    cfg.lengths = OOD_TRAIN_LENGTHS.to_vec();
    cfg.eval_lengths = OOD_EVAL_LENGTHS.to_vec();
    cfg.optim = OptimConfig::muon(MUON_LR, 0.0, WdPolicy::default_for(act));
    cfg.bias = bias;
    cfg.test_n = OOD_TEST_N;
    cfg
}

pub fn preset(name: &str) -> Result<SweepSpec> {
    let acts = || vec![json!("sine"), json!("relu")];
    let wd = || values(OOD_WD_GRID);
    Ok(match name {
        "underparam" => {
            let base = TrainConfig::new(TaskSpec::new(31, 3).expect("valid task"), 64, Activation::Sine, 3000, UNDERPARAM_EPOCHS);
            spec(name, base, vec![("act", acts())], ReportMode::All)
        }
        "overparam-sine" => spec(name, overparam(Activation::Sine), vec![(WD_KEY, values(OVERPARAM_WD_GRID))], ReportMode::All),
        "overparam-relu" => spec(name, overparam(Activation::Relu), vec![(WD_KEY, values(OVERPARAM_WD_GRID))], ReportMode::All),
        "ood-p97" => spec(
            name,
            ood(97, Activation::Sine, false),
            vec![("act", acts()), ("n_train", values(&[4000usize, 8000, 16000, 32000, 64000])), (WD_KEY, wd())],
            ReportMode::BestOverWD,
        ),
        "ood-p53" => spec(
            name,
            ood(53, Activation::Sine, false),
            vec![("act", acts()), ("n_train", values(&[1000usize, 2000, 4000, 8000, 16000])), (WD_KEY, wd())],
            ReportMode::BestOverWD,
        ),
        "ood-bias" => spec(
            name,
            ood(97, Activation::Sine, true),
            vec![("n_train", values(&[4000usize, 8000, 16000, 32000, 64000])), (WD_KEY, wd())],
            ReportMode::BestOverWD,
        ),
        "ood-desk" => {
            let mut base = ood(11, Activation::Sine, false);
            base.d = 128;
            base.n_train = 3000;
            base.epochs = 5000;
            base.lengths = vec![2, 3, 5];
            base.eval_lengths = vec![50];
            spec(name, base, vec![("act", acts()), (WD_KEY, values(&[0.0, 0.01, 0.1]))], ReportMode::BestOverWD)
        }
        other => return Err(Error::InvalidArgument(format!("unknown preset {other}; expected one of {}", PRESETS.join(", ")))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::OptimKind;

    #[test]
    fn all_presets_validate() {
        for name in PRESETS {
            preset(name).unwrap().validate().unwrap();
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn ood_p97_lengths() {
        let s = preset("ood-p97").unwrap();
        assert_eq!(s.base.lengths, vec![2, 3, 4, 5, 7, 13, 19]);
        assert_eq!(s.base.eval_lengths, vec![14, 38, 53, 97, 201, 303, 401, 512, 602, 705, 811]);
        assert_eq!(s.base.p, 97);
        assert_eq!(s.base.seeds, vec![1337, 1338, 1339]);
    }

    #[test]
    fn overparam_sine_decays_v_only_with_muon() {
        let s = preset("overparam-sine").unwrap();
        assert_eq!(s.base.optim.kind, OptimKind::Muon);
        assert_eq!(s.base.optim.wd_policy, WdPolicy::VOnly);
        let relu = preset("overparam-relu").unwrap();
        assert_eq!(relu.base.optim.wd_policy, WdPolicy::Both);
    }

    #[test]
    fn underparam_adamw_zero_decay() {
        let s = preset("underparam").unwrap();
        assert_eq!(s.base.optim.kind, OptimKind::AdamW);
        assert_eq!(s.base.optim.weight_decay, 0.0);
        assert_eq!(s.base.optim.lr, 1e-3);
    }

    #[test]
    fn relu_cells_in_ood_decay_both_layers() {
        let s = preset("ood-p53").unwrap();
        let relu_cell = s.cells().into_iter().find(|c| c["act"] == json!("relu")).unwrap();
        assert_eq!(s.config_for(&relu_cell).unwrap().optim.wd_policy, WdPolicy::Both);
    }
}
