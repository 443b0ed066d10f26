//! Accuracy, margins, layer norms, normalized margins and the `Q₂` statistic.

use serde::{Deserialize, Serialize};

use crate::data::{enumerate_domain_capped, BagVector, LabeledSet, TaskSpec};
use crate::error::{Error, Result};
use crate::model::{scores, uargmax, MlpParams, Prediction};
use crate::numerics::{frobenius_norm, percentile_nearest_rank, row_max_l1, spectral_norm_default, Matrix};

/// Percentile used for the robust margin.
pub const MARGIN_PERCENTILE: f64 = 0.5;

/// `s_y − max_{k≠y} s_k`.
pub fn margin_from_scores(s: &[f64], y: usize) -> f64 {
    let other = s.iter().enumerate().filter(|&(k, _)| k != y).map(|(_, &v)| v).fold(f64::NEG_INFINITY, f64::max);
    s[y] - other
}

pub fn margin(theta: &MlpParams, x: &BagVector, y: usize) -> Result<f64> {
    if y >= theta.p() {
        return Err(Error::InvalidArgument(format!("label {y} outside [0, {})", theta.p())));
    }
    Ok(margin_from_scores(&scores(theta, x)?, y))
}

fn batch_scores(theta: &MlpParams, set: &LabeledSet) -> Result<Matrix> {
    let xs: Vec<&BagVector> = set.items.iter().map(|(x, _)| x).collect();
    theta.scores_batch(&xs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    #[serde(skip)]
    pub per_sample_margins: Vec<f64>,
    pub min_margin: f64,
    pub pct05_margin: f64,
    pub v_spectral: f64,
    pub w_frobenius: f64,
    pub v_row_l1: f64,
    /// Percentile margin over `‖V‖₂‖W‖_F`.
    pub norm_margin_relu: f64,
    /// Percentile margin over `‖V‖_{1,∞}`.
    pub norm_margin_sine: f64,
    pub norm_margin_relu_min: f64,
    pub norm_margin_sine_min: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

pub fn margin_report(theta: &MlpParams, set: &LabeledSet) -> Result<MarginReport> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("margin report of an empty set".into()));
    }
    let s = batch_scores(theta, set)?;
    let margins: Vec<f64> = set.items.iter().enumerate().map(|(i, (_, y))| margin_from_scores(s.row(i), *y)).collect();
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let pct05_margin = percentile_nearest_rank(&margins, MARGIN_PERCENTILE)?;
    let v_spectral = spectral_norm_default(&theta.v)?;
    let w_frobenius = frobenius_norm(&theta.w);
    let v_row_l1 = row_max_l1(&theta.v);
    let relu_scale = v_spectral * w_frobenius;
    Ok(MarginReport {
        per_sample_margins: margins,
        min_margin,
        pct05_margin,
        v_spectral,
        w_frobenius,
        v_row_l1,
        norm_margin_relu: ratio(pct05_margin, relu_scale),
        norm_margin_sine: ratio(pct05_margin, v_row_l1),
        norm_margin_relu_min: ratio(min_margin, relu_scale),
        norm_margin_sine_min: ratio(min_margin, v_row_l1),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub accuracy: f64,
    pub invalid_rate: f64,
    pub n: usize,
}

/// Per-item predictions for the whole set.
pub fn predictions(theta: &MlpParams, set: &LabeledSet) -> Result<Vec<Prediction>> {
    let s = batch_scores(theta, set)?;
    Ok((0..set.len()).map(|i| uargmax(s.row(i))).collect())
}

/// Fraction predicted exactly right; ties count as errors.
pub fn evaluate(theta: &MlpParams, set: &LabeledSet) -> Result<EvalSummary> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("evaluation of an empty set".into()));
    }
    let preds = predictions(theta, set)?;
    let hits = preds.iter().zip(&set.items).filter(|(p, (_, y))| **p == Prediction::Label(*y)).count();
    let invalid = preds.iter().filter(|p| **p == Prediction::Invalid).count();
    let n = set.len();
    Ok(EvalSummary { accuracy: hits as f64 / n as f64, invalid_rate: invalid as f64 / n as f64, n })
}

/// Accuracy over the whole domain, per distinct bag and weighted by each
/// bag's probability under uniform i.i.d. tokens.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationAccuracy {
    pub unweighted: f64,
    pub weighted: f64,
    pub bags: usize,
}

pub fn population_accuracy(theta: &MlpParams, spec: TaskSpec, cap: u128) -> Result<PopulationAccuracy> {
    let set = enumerate_domain_capped(spec, cap)?;
    population_accuracy_on(theta, &set)
}

/// As [`population_accuracy`], on an already enumerated domain.
pub fn population_accuracy_on(theta: &MlpParams, set: &LabeledSet) -> Result<PopulationAccuracy> {
    let preds = predictions(theta, set)?;
    let mut hits = 0usize;
    let (mut mass_hit, mut mass) = (0.0, 0.0);
    for (pred, (x, y)) in preds.iter().zip(&set.items) {
        let w = x.multinomial_probability();
        mass += w;
        if *pred == Prediction::Label(*y) {
            hits += 1;
            mass_hit += w;
        }
    }
    Ok(PopulationAccuracy { unweighted: hits as f64 / set.len() as f64, weighted: mass_hit / mass, bags: set.len() })
}

/// `(1/n Σ ‖xᵢ‖²)^{1/2}`.
pub fn q2_statistic(set: &LabeledSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("Q2 of an empty set".into()));
    }
    let total: f64 = set.items.iter().map(|(x, _)| x.squared_l2()).sum();
    Ok((total / set.len() as f64).sqrt())
}

/// `Σ_{j,ℓ} 1{s_j = s_ℓ}` for one raw sequence.
pub fn collision_count(seq: &[usize]) -> usize {
    seq.iter().map(|a| seq.iter().filter(|b| *b == a).count()).sum()
}

/// Expected `Q₂²` under uniform sampling: `m(1 + (m−1)/p)`.
pub fn q2_squared_expectation(spec: TaskSpec) -> f64 {
    let m = spec.m as f64;
    m * (1.0 + (m - 1.0) / spec.p as f64)
}

/// Half-width of the two-sided Hoeffding band on `Q₂²` at level `δ′`.
pub fn q2_hoeffding_halfwidth(spec: TaskSpec, n: usize, delta: f64) -> f64 {
    let m = spec.m as f64;
    m * (m - 1.0) * ((1.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{sine_halfp_unbiased, sine_highmargin_2p, sine_width2_biased_uniform, sine_width2_fixed};
    use crate::data::{enumerate_domain, sample_set, Provenance};
    use crate::model::Activation;
    use crate::numerics::RngStream;
    use std::f64::consts::PI;

    fn single(x: BagVector, y: usize) -> LabeledSet {
        LabeledSet {
            spec: TaskSpec::new(x.p(), x.length().max(2)).unwrap(),
            items: vec![(x, y)],
            provenance: Provenance::Derived { note: "test".into() },
            sequences: None,
        }
    }

    #[test]
    fn margin_hand_case() {
        assert_eq!(margin_from_scores(&[2.0, 0.0, 1.0], 0), 1.0);
        assert_eq!(margin_from_scores(&[2.0, 0.0, 1.0], 2), -1.0);
    }

    #[test]
    fn construction_margins() {
        let spec = TaskSpec::new(7, 3).unwrap();
        let set = enumerate_domain(spec).unwrap();
        let r = margin_report(&sine_width2_fixed(spec), &set).unwrap();
        let gap = 1.0 - (2.0 * PI / 7.0).cos();
        assert!(r.per_sample_margins.iter().all(|m| (m - gap).abs() < 1e-12));
        let spec = TaskSpec::new(5, 3).unwrap();
        let set = enumerate_domain(spec).unwrap();
        let r = margin_report(&sine_highmargin_2p(spec), &set).unwrap();
        assert!((r.min_margin - 5.0).abs() < 1e-9);
        assert!(r.norm_margin_sine >= 0.5 - 1e-12);
        assert!(r.min_margin <= r.pct05_margin);
    }

    #[test]
    fn duplication_leaves_report_unchanged() {
        let spec = TaskSpec::new(5, 2).unwrap();
        let mut rng = RngStream::new(3, 3);
        let theta = MlpParams::random(6, 5, Activation::Relu, false, 1.0, &mut rng);
        let set = enumerate_domain(spec).unwrap();
        let mut doubled = set.clone();
        doubled.items.extend(set.items.clone());
        let (a, b) = (margin_report(&theta, &set).unwrap(), margin_report(&theta, &doubled).unwrap());
        assert_eq!(a.min_margin, b.min_margin);
        assert_eq!(a.pct05_margin, b.pct05_margin);
        assert_eq!(a.norm_margin_relu, b.norm_margin_relu);
    }

    #[test]
    fn single_sample_percentile_is_min() {
        let mut rng = RngStream::new(4, 4);
        let theta = MlpParams::random(3, 3, Activation::Sine, false, 1.0, &mut rng);
        let r = margin_report(&theta, &single(BagVector::from_counts(vec![1, 1, 0]), 1)).unwrap();
        assert_eq!(r.pct05_margin, r.min_margin);
        let e = evaluate(&theta, &single(BagVector::from_counts(vec![1, 1, 0]), 1)).unwrap();
        assert!(e.accuracy == 0.0 || e.accuracy == 1.0);
    }

    #[test]
    fn evaluation_of_constructions() {
        let set = enumerate_domain(TaskSpec::new(5, 2).unwrap()).unwrap();
        assert_eq!(evaluate(&sine_halfp_unbiased(5), &set).unwrap().accuracy, 0.8);
        let set = enumerate_domain(TaskSpec::new(7, 4).unwrap()).unwrap();
        assert_eq!(evaluate(&sine_width2_biased_uniform(7), &set).unwrap().accuracy, 1.0);
    }

    #[test]
    fn weighted_population_accuracy() {
        let spec = TaskSpec::new(5, 3).unwrap();
        let pop = population_accuracy(&sine_halfp_unbiased(5), spec, 1_000_000).unwrap();
        assert!((pop.weighted - 0.8).abs() < 1e-12);
        assert_eq!(pop.unweighted, 0.8);
    }

    #[test]
    fn q2_cases() {
        let set = single(BagVector::from_counts(vec![2, 0, 0]), 0);
        assert_eq!(q2_statistic(&set).unwrap(), 2.0);
        let set = single(BagVector::from_counts(vec![1, 1, 1, 0]), 3);
        assert!((q2_statistic(&set).unwrap() - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn q2_matches_collision_counts() {
        let spec = TaskSpec::new(7, 5).unwrap();
        let set = sample_set(spec, 200, &mut RngStream::new(9, 9)).unwrap();
        let seqs = set.sequences.as_ref().unwrap();
        let mean = seqs.iter().map(|s| collision_count(s) as f64).sum::<f64>() / seqs.len() as f64;
        assert!((q2_statistic(&set).unwrap().powi(2) - mean).abs() < 1e-12);
    }

    #[test]
    fn scaling_v_leaves_normalized_margins() {
        let spec = TaskSpec::new(5, 2).unwrap();
        let set = enumerate_domain(spec).unwrap();
        let mut rng = RngStream::new(5, 1);
        let theta = MlpParams::random(8, 5, Activation::Relu, false, 1.0, &mut rng);
        let mut scaled = theta.clone();
        scaled.v.scale(3.0);
        let (a, b) = (margin_report(&theta, &set).unwrap(), margin_report(&scaled, &set).unwrap());
        assert!((a.norm_margin_relu - b.norm_margin_relu).abs() < 1e-10);
        assert!((a.norm_margin_sine - b.norm_margin_sine).abs() < 1e-10);
        assert!((b.min_margin - 3.0 * a.min_margin).abs() < 1e-10);
    }
}
