//! Executable checks: exhaustive certification of constructions, identity
//! oracles, counting bounds, impossibility witnesses and capacity formulas.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::constructions::{
    evaluate_polarized, evaluate_spline, newton_expansion, newton_reconstruct, polarize, relu_construction_m2,
    relu_construction_with_cap, relu_spline_power, relu_width_bound, sine_halfp_unbiased, sine_highmargin_2p,
    sine_width2_biased_uniform, sine_width2_fixed, total_terms, trig_sum_polynomialize, DEFAULT_WEIGHT_CAP,
};
use crate::data::{enumerate_domain_capped, exact_label_distribution, BagVector, TaskSpec, DEFAULT_DOMAIN_CAP};
use crate::error::{Error, Result};
use crate::metrics::{margin_from_scores, population_accuracy_on, predictions};
use crate::model::{scores, uargmax, Activation, MlpParams, Prediction};
use crate::numerics::{frobenius_norm, spectral_norm_default, RngStream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certificate {
    pub claim_id: String,
    pub params: Value,
    pub passed: bool,
    /// Measured extremals, or the first counterexample on failure.
    pub witness: Option<Value>,
    pub tolerance: f64,
}

impl Certificate {
    fn new(claim_id: &str, params: Value, passed: bool, witness: Value, tolerance: f64) -> Self {
        Self { claim_id: claim_id.to_string(), params, passed, witness: Some(witness), tolerance }
    }
}

/// Compensated summation, standing in for extended precision.
fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

/// Closed form of `Σ_{k=1}^{⌊(p−1)/2⌋} sin(2πka/p) sin(2πkb/p)`.
pub fn gram_closed_form(p: usize, a: usize, b: usize) -> f64 {
    let (a, b) = (a % p, b % p);
    let degenerate = |t: usize| t == 0 || 2 * t == p;
    if degenerate(a) || degenerate(b) {
        0.0
    } else if a == b {
        p as f64 / 4.0
    } else if (a + b) % p == 0 {
        -(p as f64) / 4.0
    } else {
        0.0
    }
}

pub fn gram_sum(p: usize, a: usize, b: usize) -> f64 {
    let step = 2.0 * PI / p as f64;
    neumaier_sum((1..=(p - 1) / 2).map(|k| (step * (k * a) as f64).sin() * (step * (k * b) as f64).sin()))
}

pub fn check_gram_identity(p: usize) -> Result<Certificate> {
    if !(2..=64).contains(&p) {
        return Err(Error::InvalidArgument(format!("Gram check needs 2 ≤ p ≤ 64, got {p}")));
    }
    let tol = 1e-9 * p as f64;
    let mut worst = (0.0f64, 0, 0);
    for a in 0..p {
        for b in 0..p {
            let err = (gram_sum(p, a, b) - gram_closed_form(p, a, b)).abs();
            if err > worst.0 {
                worst = (err, a, b);
            }
        }
    }
    let witness = json!({ "max_error": worst.0, "a": worst.1, "b": worst.2 });
    Ok(Certificate::new("gram_identity", json!({ "p": p }), worst.0 <= tol, witness, tol))
}

pub fn check_uniformity(spec: TaskSpec) -> Certificate {
    let dist = exact_label_distribution(spec);
    let target = 1.0 / spec.p as f64;
    let (worst, at) = dist
        .iter()
        .enumerate()
        .map(|(k, v)| ((v - target).abs(), k))
        .fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a });
    Certificate::new(
        "uniformity",
        json!({ "p": spec.p, "m": spec.m }),
        worst <= 1e-15,
        json!({ "max_deviation": worst, "residue": at }),
        1e-15,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstructionKind {
    SineWidth2,
    SineBiased,
    SineHalfp,
    SineHighmargin,
    ReluM2,
    ReluGeneral { tau: f64 },
}

impl ConstructionKind {
    pub fn build(self, spec: TaskSpec) -> Result<MlpParams> {
        Ok(match self {
            ConstructionKind::SineWidth2 => sine_width2_fixed(spec),
            ConstructionKind::SineBiased => sine_width2_biased_uniform(spec.p),
            ConstructionKind::SineHalfp => sine_halfp_unbiased(spec.p),
            ConstructionKind::SineHighmargin => sine_highmargin_2p(spec),
            ConstructionKind::ReluM2 => relu_construction_m2(spec.p)?,
            ConstructionKind::ReluGeneral { tau } => relu_construction_with_cap(spec, tau, DEFAULT_WEIGHT_CAP)?.params,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ConstructionKind::SineWidth2 => "sine_width2",
            ConstructionKind::SineBiased => "sine_biased",
            ConstructionKind::SineHalfp => "sine_halfp",
            ConstructionKind::SineHighmargin => "sine_highmargin",
            ConstructionKind::ReluM2 => "relu_m2",
            ConstructionKind::ReluGeneral { .. } => "relu_general",
        }
    }

    pub fn parse(name: &str, tau: f64) -> Result<Self> {
        Ok(match name {
            "sine_width2" => ConstructionKind::SineWidth2,
            "sine_biased" => ConstructionKind::SineBiased,
            "sine_halfp" => ConstructionKind::SineHalfp,
            "sine_highmargin" => ConstructionKind::SineHighmargin,
            "relu_m2" => ConstructionKind::ReluM2,
            "relu_general" | "relu" => ConstructionKind::ReluGeneral { tau },
            other => return Err(Error::InvalidArgument(format!("unknown construction {other}"))),
        })
    }
}

const MARGIN_TOL: f64 = 1e-9;
const NORM_TOL: f64 = 1e-8;

/// Build the construction, evaluate it on every bag of `𝒳_m`, and check
/// accuracy, margins and norm bounds against their stated values.
pub fn certify_construction(kind: ConstructionKind, spec: TaskSpec, cap: u128) -> Result<Certificate> {
    let set = enumerate_domain_capped(spec, cap)?;
    let (p, m) = (spec.p, spec.m);
    let pf = p as f64;
    let mut general = None;
    let theta = match kind {
        ConstructionKind::ReluGeneral { tau } => {
            let c = relu_construction_with_cap(spec, tau, DEFAULT_WEIGHT_CAP)?;
            let theta = c.params.clone();
            general = Some(c);
            theta
        }
        _ => kind.build(spec)?,
    };
    let xs: Vec<&BagVector> = set.items.iter().map(|(x, _)| x).collect();
    let s = theta.scores_batch(&xs)?;
    let margins: Vec<f64> = set.items.iter().enumerate().map(|(i, (_, y))| margin_from_scores(s.row(i), *y)).collect();
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let max_margin = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let preds: Vec<Prediction> = (0..set.len()).map(|i| uargmax(s.row(i))).collect();
    let pop = population_accuracy_on(&theta, &set)?;
    let first_error = preds
        .iter()
        .zip(&set.items)
        .position(|(pr, (_, y))| *pr != Prediction::Label(*y))
        .map(|i| json!({ "counts": set.items[i].0.counts(), "label": set.items[i].1, "prediction": preds[i] }));
    let w_max = theta.w.max_abs();
    let v_max = theta.v.max_abs();
    let v_spec = spectral_norm_default(&theta.v)?;
    let w_fro = frobenius_norm(&theta.w);

    let mut checks: Vec<(&str, bool)> = Vec::new();
    let mut extra = json!({});
    match kind {
        ConstructionKind::SineWidth2 => {
            checks.push(("accuracy", pop.unweighted == 1.0));
            checks.push(("margin", min_margin >= 1.0 - (2.0 * PI / pf).cos() - MARGIN_TOL));
            checks.push(("width", theta.width() == 2));
        }
        ConstructionKind::SineBiased => {
            checks.push(("accuracy", pop.unweighted == 1.0));
            let worst = set
                .items
                .iter()
                .enumerate()
                .map(|(i, (_, y))| (s.row(i)[*y] - 1.0).abs())
                .fold(0.0, f64::max);
            checks.push(("correct_score_one", worst <= MARGIN_TOL));
            extra = json!({ "max_correct_score_error": worst });
        }
        ConstructionKind::SineHalfp => {
            let target = if p % 2 == 1 { 1.0 - 1.0 / pf } else { 1.0 - 2.0 / pf };
            checks.push(("weighted_accuracy", (pop.weighted - target).abs() <= 1e-12));
            let misses_only_degenerate = preds.iter().zip(&set.items).all(|(pr, (_, y))| {
                let degenerate = *y == 0 || 2 * *y == p;
                (*pr == Prediction::Label(*y)) != degenerate
            });
            checks.push(("error_set", misses_only_degenerate));
            extra = json!({ "target_accuracy": target });
        }
        ConstructionKind::SineHighmargin => {
            checks.push(("accuracy", pop.unweighted == 1.0));
            checks.push(("margin", (min_margin - pf).abs() <= MARGIN_TOL && (max_margin - pf).abs() <= MARGIN_TOL));
            checks.push(("v_spectral", (v_spec - pf.sqrt()).abs() <= NORM_TOL));
            checks.push(("w_frobenius", w_fro <= PI * 2f64.sqrt() * pf + NORM_TOL));
            checks.push(("width", theta.width() == 2 * p));
        }
        ConstructionKind::ReluM2 => {
            checks.push(("accuracy", pop.unweighted == 1.0));
            checks.push(("margin", min_margin >= 25.0 * pf / 49.0 + 20.0 / 49.0 - MARGIN_TOL));
            checks.push(("width", theta.width() == 36 * p));
            checks.push(("w_max", w_max <= 1.0 + 1e-12));
            checks.push(("v_max", v_max <= 34.0 / 7.0 + 1e-12));
            checks.push(("v_spectral", v_spec <= 11.0 * pf.sqrt() + NORM_TOL));
        }
        ConstructionKind::ReluGeneral { tau } => {
            let c = general.as_ref().expect("built above");
            let mf = m as f64;
            let v_bound = (mf + 0.5) * mf.powi(2 * m as i32) / ((1..=m).product::<usize>() as f64 * 2f64.powi(m as i32));
            let mode_error = c.max_mode_error(&set)?;
            let width_bound = relu_width_bound(m, p, tau);
            checks.push(("accuracy", pop.unweighted == 1.0));
            checks.push(("margin", min_margin >= (1.0 - 4.0 * tau) * pf - MARGIN_TOL));
            checks.push(("w_max", w_max <= 2.0 / mf + 1e-12));
            checks.push(("v_max", v_max <= v_bound + NORM_TOL));
            checks.push(("width", theta.width() as f64 <= width_bound));
            checks.push(("mode_error", mode_error <= tau + 1e-12));
            extra = json!({
                "mode_error": mode_error,
                "width_bound": width_bound,
                "lambda": c.lambda,
                "delta": c.delta,
                "knots": c.knots,
            });
        }
    }
    let passed = checks.iter().all(|(_, ok)| *ok);
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    let witness = json!({
        "accuracy": pop.unweighted,
        "weighted_accuracy": pop.weighted,
        "bags": pop.bags,
        "min_margin": min_margin,
        "max_margin": max_margin,
        "width": theta.width(),
        "w_max_abs": w_max,
        "v_max_abs": v_max,
        "v_spectral": v_spec,
        "w_frobenius": w_fro,
        "failed_checks": failed,
        "first_error": first_error,
        "extra": extra,
    });
    let mut params = json!({ "kind": kind.name(), "p": p, "m": m });
    if let ConstructionKind::ReluGeneral { tau } = kind {
        params["tau"] = json!(tau);
    }
    Ok(Certificate::new(kind.name(), params, passed, witness, MARGIN_TOL))
}

fn require_plain_relu(theta: &MlpParams) -> Result<()> {
    if theta.bias.is_some() {
        return Err(Error::InvalidArgument("the scaling argument needs a bias-free network".into()));
    }
    if theta.act != Activation::Relu {
        return Err(Error::InvalidArgument("the scaling argument needs ReLU activations".into()));
    }
    Ok(())
}

/// Scaling witness for bias-free ReLU nets.
///
/// The bags `m₁·e₁` and `m₂·e₁` lie on one ray, so they receive the same
/// prediction although their labels `m₁ mod p` and `m₂ mod p` differ.
/// Additionally checks `h(αx) = h(x)` for `α ∈ {0.5, 2, 10}` on `trials`
/// random bags of length `m₁`.
pub fn relu_scale_invariance_witness(theta: &MlpParams, m1: usize, m2: usize, trials: usize, seed: u64) -> Result<Certificate> {
    require_plain_relu(theta)?;
    let p = theta.p();
    if m1 % p == m2 % p {
        return Err(Error::InvalidArgument(format!("lengths {m1} and {m2} agree mod {p}")));
    }
    let token = 1 % p;
    let x1 = BagVector::ray(p, token, m1 as u32);
    let x2 = BagVector::ray(p, token, m2 as u32);
    let (h1, h2) = (uargmax(&scores(theta, &x1)?), uargmax(&scores(theta, &x2)?));
    let (y1, y2) = ((token * m1) % p, (token * m2) % p);
    let misses = [h1 != Prediction::Label(y1), h2 != Prediction::Label(y2)];

    let mut rng = RngStream::new(seed, 0);
    let mut violations = 0usize;
    let mut first = Value::Null;
    for _ in 0..trials {
        let mut counts = vec![0u32; p];
        for _ in 0..m1 {
            counts[rng.below(p)] += 1;
        }
        let x: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let base = uargmax(&theta.scores_dense(&x)?);
        for alpha in [0.5, 2.0, 10.0] {
            let scaled: Vec<f64> = x.iter().map(|v| v * alpha).collect();
            if uargmax(&theta.scores_dense(&scaled)?) != base {
                violations += 1;
                if first.is_null() {
                    first = json!({ "counts": counts, "alpha": alpha });
                }
            }
        }
    }
    let passed = h1 == h2 && misses.iter().any(|&b| b) && violations == 0;
    Ok(Certificate::new(
        "relu_scale_invariance",
        json!({ "m1": m1, "m2": m2, "p": p, "trials": trials, "seed": seed }),
        passed,
        json!({
            "token": token,
            "prediction_m1": h1,
            "prediction_m2": h2,
            "label_m1": y1,
            "label_m2": y2,
            "misses_m1": misses[0],
            "misses_m2": misses[1],
            "ray_violations": violations,
            "first_violation": first,
        }),
        0.0,
    ))
}

/// Diagnostic for the width lower bound along `x(s) = (m−s)e₀ + s·e₁`.
///
/// Counts the unit steps `s → s+1` where the adjacent-class margin
/// `g_ℓ(s) = f_ℓ − f_{ℓ⊕1}` is positive at `s` and negative at `s+1`, as exact
/// fitting of the path requires. Passes when every step does.
pub fn relu_path_probe(theta: &MlpParams, spec: TaskSpec) -> Result<Certificate> {
    require_plain_relu(theta)?;
    let (p, m) = (spec.p, spec.m);
    if theta.p() != p {
        return Err(Error::Shape(format!("network has {} classes, task has {p}", theta.p())));
    }
    let f: Vec<Vec<f64>> = (0..=m)
        .map(|s| {
            let mut x = vec![0.0; p];
            x[0] += (m - s) as f64;
            x[1 % p] += s as f64;
            theta.scores_dense(&x)
        })
        .collect::<Result<_>>()?;
    let g = |r: usize, s: usize| f[s][r] - f[s][(r + 1) % p];
    let mut achieved = 0usize;
    let mut first_gap = Value::Null;
    for s in 0..m {
        let r = s % p;
        if g(r, s) > 0.0 && g(r, s + 1) < 0.0 {
            achieved += 1;
        } else if first_gap.is_null() {
            first_gap = json!({ "s": s, "g_at_s": g(r, s), "g_at_next": g(r, s + 1) });
        }
    }
    // Hidden-unit breakpoints along the path, and the steps they spoil.
    let mut breakpoints = Vec::new();
    for k in 0..theta.width() {
        let y = theta.w[(k, 0)];
        let z = theta.w[(k, 1 % p)] - y;
        if z != 0.0 {
            let b = -(m as f64) * y / z;
            if (0.0..=m as f64).contains(&b) {
                breakpoints.push(b);
            }
        }
    }
    let spoiled = (0..m).filter(|&s| breakpoints.iter().any(|&b| b >= s as f64 && b <= (s + 1) as f64)).count();
    let d = theta.width() as f64;
    let budget_allows = (m as f64 - 2.0 * d) <= p as f64 * (d + 1.0);
    Ok(Certificate::new(
        "relu_path_probe",
        json!({ "p": p, "m": m, "width": theta.width() }),
        achieved == m,
        json!({
            "alternations": achieved,
            "required": m,
            "breakpoints_in_range": breakpoints.len(),
            "clean_steps": m - spoiled,
            "budget_allows_fit": budget_allows,
            "width_lower_bound": capacity_bound(CapacityFamily::ReluWidthLb { m }, theta.width(), p)?,
            "first_missing_step": first_gap,
        }),
        0.0,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CapacityFamily {
    /// Piecewise-polynomial activations with `pieces` pieces of degree `degree`.
    Ppoly { pieces: usize, degree: usize },
    /// Trigonometric polynomials of degree `k` on length-`m` inputs.
    Trigpoly { k: usize, m: usize },
    /// Rational-exponential activations of degree `r` on length-`m` inputs.
    Ratexp { r: usize, m: usize },
    /// Minimum ReLU width for exact fitting at length `m`.
    ReluWidthLb { m: usize },
}

/// Closed-form capacity bounds (natural logarithms).
pub fn capacity_bound(family: CapacityFamily, d: usize, p: usize) -> Result<f64> {
    if p == 0 {
        return Err(Error::InvalidArgument("modulus must be positive".into()));
    }
    let (df, pf, e) = (d as f64, p as f64, std::f64::consts::E);
    let lead = 2.0 * df * pf;
    let dims = 6.0 * (6.0 * df * pf).ln();
    let positive = |v: usize, what: &str| {
        if v == 0 {
            Err(Error::InvalidArgument(format!("{what} must be positive")))
        } else {
            Ok(v as f64)
        }
    };
    match family {
        CapacityFamily::Ppoly { pieces, degree } => {
            positive(d, "width")?;
            let l = positive(pieces, "piece count")?;
            let r = positive(degree, "degree")?;
            Ok(lead * (dims + (2.0 * e * l).ln() + 2.0 * (e * pf * r).ln()))
        }
        CapacityFamily::Trigpoly { k, m } => {
            positive(d, "width")?;
            Ok(lead * (dims + 2.0 * (e * pf * (k as f64 * m as f64 + 1.0)).ln()))
        }
        CapacityFamily::Ratexp { r, m } => {
            positive(d, "width")?;
            Ok(lead * (dims + 2.0 * (e * pf * (df * m as f64 + r as f64 + 1.0)).ln()))
        }
        CapacityFamily::ReluWidthLb { m } => Ok((m as f64 - pf) / (pf + 2.0)),
    }
}

pub fn check_newton_counts(m: usize) -> Result<Certificate> {
    if !(1..=10).contains(&m) {
        return Err(Error::InvalidArgument(format!("Newton count check needs 1 ≤ m ≤ 10, got {m}")));
    }
    let n = total_terms(m);
    let (lo, hi) = (m as u64 * (1 << m), 13 * m as u64 * (1 << m));
    let enumerated = newton_expansion(m)?.len() as u64;
    Ok(Certificate::new(
        "newton_counts",
        json!({ "m": m }),
        lo <= n && n <= hi && enumerated == n,
        json!({ "n_tot": n, "enumerated": enumerated, "lower": lo, "upper": hi }),
        0.0,
    ))
}

pub fn check_newton_reconstruction(m: usize, trials: usize, seed: u64) -> Result<Certificate> {
    let terms = newton_expansion(m)?;
    let mut rng = RngStream::new(seed, m as u64);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let angles: Vec<f64> = (0..m).map(|_| (2.0 * rng.uniform() - 1.0) * PI).collect();
        let (c, s) = newton_reconstruct(&terms, &angles);
        let total: f64 = angles.iter().sum();
        worst = worst.max((c - total.cos()).abs()).max((s - total.sin()).abs());
    }
    let tol = 1e-8;
    Ok(Certificate::new(
        "newton_reconstruction",
        json!({ "m": m, "trials": trials, "seed": seed }),
        worst <= tol,
        json!({ "max_error": worst, "terms": terms.len() }),
        tol,
    ))
}

pub fn check_polarization(s: usize, trials: usize, rng: &mut RngStream) -> Result<Certificate> {
    if !(1..=10).contains(&s) {
        return Err(Error::InvalidArgument(format!("polarization check needs 1 ≤ s ≤ 10, got {s}")));
    }
    let terms = polarize(s)?;
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let x: Vec<f64> = (0..s).map(|_| 2.0 * rng.uniform() - 1.0).collect();
        let direct: f64 = x.iter().product();
        worst = worst.max((evaluate_polarized(&terms, &x)? - direct).abs());
    }
    let tol = 1e-9;
    Ok(Certificate::new(
        "polarization",
        json!({ "s": s, "trials": trials, "seed": rng.seed(), "stream": rng.stream_id() }),
        worst <= tol,
        json!({ "max_error": worst }),
        tol,
    ))
}

pub const SPLINE_GRID: usize = 10_000;

pub fn check_spline_bound(s: u32, n: u32) -> Result<Certificate> {
    if !(1..=6).contains(&s) || !(1..=64).contains(&n) {
        return Err(Error::InvalidArgument(format!("spline check needs s ≤ 6 and N ≤ 64, got ({s}, {n})")));
    }
    let units = relu_spline_power(s, n)?;
    let bound = (s * (s - 1)) as f64 / (2.0 * (n * n) as f64);
    let (mut worst, mut at) = (0.0f64, -1.0);
    for i in 0..=SPLINE_GRID {
        let z = -1.0 + 2.0 * i as f64 / SPLINE_GRID as f64;
        let err = (evaluate_spline(&units, z) - z.powi(s as i32)).abs();
        if err > worst {
            worst = err;
            at = z;
        }
    }
    Ok(Certificate::new(
        "spline_bound",
        json!({ "s": s, "n": n }),
        worst <= bound + 1e-12,
        json!({ "max_error": worst, "at": at, "bound": bound, "units": units.len() }),
        1e-12,
    ))
}

pub fn check_trigpoly(trials: usize, seed: u64) -> Result<Certificate> {
    let mut rng = RngStream::new(seed, 0);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let p = 2 + rng.below(6);
        let m = 1 + rng.below(8);
        let mut counts = vec![0u32; p];
        for _ in 0..m {
            counts[rng.below(p)] += 1;
        }
        let pair = trig_sum_polynomialize(&BagVector::from_counts(counts.clone()))?;
        let angles: Vec<f64> = (0..p).map(|_| (2.0 * rng.uniform() - 1.0) * PI).collect();
        let total: f64 = counts.iter().zip(&angles).map(|(&c, a)| c as f64 * a).sum();
        worst = worst
            .max((pair.sin.eval_angles(&angles) - total.sin()).abs())
            .max((pair.cos.eval_angles(&angles) - total.cos()).abs());
    }
    let tol = 1e-10;
    Ok(Certificate::new(
        "trig_polynomialization",
        json!({ "trials": trials, "seed": seed }),
        worst <= tol,
        json!({ "max_error": worst }),
        tol,
    ))
}

/// Claim identifiers accepted by [`verify_claim`].
pub const CLAIMS: &[&str] = &[
    "gram_identity",
    "uniformity",
    "sine_width2",
    "sine_biased",
    "sine_halfp",
    "sine_highmargin",
    "relu_m2",
    "relu_general",
    "newton_counts",
    "newton_reconstruction",
    "polarization",
    "spline_bound",
    "trig_polynomialization",
    "relu_scale_invariance",
    "relu_path_probe",
];

fn get_usize(params: &Value, key: &str, default: Option<usize>) -> Result<usize> {
    match params.get(key) {
        Some(v) => v
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| Error::InvalidArgument(format!("parameter {key} must be a non-negative integer"))),
        None => default.ok_or_else(|| Error::InvalidArgument(format!("missing parameter {key}"))),
    }
}

/// Dispatch a claim by name with JSON parameters. Network-based claims
/// take a `checkpoint` path and otherwise fall back to a constructed net.
pub fn verify_claim(claim: &str, params: &Value, cap: Option<u128>) -> Result<Certificate> {
    let cap = cap.unwrap_or(DEFAULT_DOMAIN_CAP);
    let spec = || TaskSpec::new(get_usize(params, "p", None)?, get_usize(params, "m", Some(2))?);
    let tau = params.get("tau").and_then(Value::as_f64).unwrap_or(0.1);
    let seed = get_usize(params, "seed", Some(1337))? as u64;
    let trials = get_usize(params, "trials", Some(100))?;
    match claim {
        "gram_identity" => check_gram_identity(get_usize(params, "p", None)?),
        "uniformity" => Ok(check_uniformity(spec()?)),
        "sine_width2" | "sine_biased" | "sine_halfp" | "sine_highmargin" | "relu_m2" | "relu_general" => {
            certify_construction(ConstructionKind::parse(claim, tau)?, spec()?, cap)
        }
        "newton_counts" => check_newton_counts(get_usize(params, "m", None)?),
        "newton_reconstruction" => check_newton_reconstruction(get_usize(params, "m", None)?, trials, seed),
        "polarization" => check_polarization(get_usize(params, "s", None)?, trials, &mut RngStream::new(seed, 0)),
        "spline_bound" => check_spline_bound(get_usize(params, "s", None)? as u32, get_usize(params, "n", None)? as u32),
        "trig_polynomialization" => check_trigpoly(trials, seed),
        "relu_scale_invariance" | "relu_path_probe" => {
            let theta = match params.get("checkpoint").and_then(Value::as_str) {
                Some(path) => MlpParams::from_checkpoint_json(&std::fs::read_to_string(path)?)?,
                None => relu_construction_m2(get_usize(params, "p", None)?)?,
            };
            if claim == "relu_path_probe" {
                relu_path_probe(&theta, TaskSpec::new(theta.p(), get_usize(params, "m", Some(2))?)?)
            } else {
                relu_scale_invariance_witness(
                    &theta,
                    get_usize(params, "m1", Some(2))?,
                    get_usize(params, "m2", Some(3))?,
                    trials,
                    seed,
                )
            }
        }
        other => Err(Error::InvalidArgument(format!("unknown claim {other}; known: {}", CLAIMS.join(", ")))),
    }
}

/// Fraction of `𝒳_m` a network gets right, for use by probes that need it.
pub fn exhaustive_accuracy(theta: &MlpParams, spec: TaskSpec, cap: u128) -> Result<f64> {
    let set = enumerate_domain_capped(spec, cap)?;
    let preds = predictions(theta, &set)?;
    Ok(preds.iter().zip(&set.items).filter(|(p, (_, y))| **p == Prediction::Label(*y)).count() as f64 / set.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_examples() {
        assert!((gram_sum(5, 1, 1) - 1.25).abs() < 1e-12);
        assert!((gram_sum(5, 1, 4) + 1.25).abs() < 1e-12);
        for b in 0..6 {
            assert!(gram_sum(6, 3, b).abs() < 1e-12);
        }
        for p in [2, 3, 17, 64] {
            assert!(check_gram_identity(p).unwrap().passed);
        }
        assert!(check_gram_identity(65).is_err());
    }

    #[test]
    fn uniformity_examples() {
        for (p, m) in [(3, 2), (8, 5), (2, 2)] {
            assert!(check_uniformity(TaskSpec::new(p, m).unwrap()).passed);
        }
    }

    #[test]
    fn certify_examples() {
        let cert = certify_construction(ConstructionKind::SineWidth2, TaskSpec::new(7, 3).unwrap(), 1 << 20).unwrap();
        assert!(cert.passed, "{cert:?}");
        let cert = certify_construction(ConstructionKind::ReluM2, TaskSpec::new(11, 2).unwrap(), 1 << 20).unwrap();
        assert!(cert.passed, "{cert:?}");
        assert_eq!(cert.witness.as_ref().unwrap()["width"], 396);
        let cert = certify_construction(ConstructionKind::SineHalfp, TaskSpec::new(6, 2).unwrap(), 1 << 20).unwrap();
        assert!(cert.passed, "{cert:?}");
        assert!(certify_construction(ConstructionKind::SineWidth2, TaskSpec::new(97, 4).unwrap(), 10).is_err());
    }

    #[test]
    fn scale_witness_on_random_net() {
        let mut rng = RngStream::new(12, 0);
        let theta = MlpParams::random(8, 5, Activation::Relu, false, 1.0, &mut rng);
        let cert = relu_scale_invariance_witness(&theta, 2, 3, 200, 7).unwrap();
        assert!(cert.passed, "{cert:?}");
        let biased = MlpParams::random(8, 5, Activation::Relu, true, 1.0, &mut rng);
        assert!(relu_scale_invariance_witness(&biased, 2, 3, 10, 7).is_err());
        assert!(relu_scale_invariance_witness(&theta, 2, 7, 10, 7).is_err());
    }

    #[test]
    fn perfect_net_misses_the_other_length() {
        let theta = relu_construction_m2(5).unwrap();
        assert_eq!(exhaustive_accuracy(&theta, TaskSpec::new(5, 2).unwrap(), 1 << 20).unwrap(), 1.0);
        let cert = relu_scale_invariance_witness(&theta, 2, 3, 10, 1).unwrap();
        let w = cert.witness.unwrap();
        assert_eq!(w["misses_m1"], false);
        assert_eq!(w["misses_m2"], true);
    }

    #[test]
    fn path_probe_cases() {
        let theta = relu_construction_with_cap(TaskSpec::new(3, 2).unwrap(), 0.1, DEFAULT_WEIGHT_CAP).unwrap().params;
        assert!(relu_path_probe(&theta, TaskSpec::new(3, 2).unwrap()).unwrap().passed);
        let mut rng = RngStream::new(3, 3);
        let narrow = MlpParams::random(1, 3, Activation::Relu, false, 1.0, &mut rng);
        let cert = relu_path_probe(&narrow, TaskSpec::new(3, 20).unwrap()).unwrap();
        assert!(!cert.passed);
        assert_eq!(cert.witness.unwrap()["budget_allows_fit"], false);
        let flat = MlpParams::zeros(4, 3, Activation::Relu, false);
        let cert = relu_path_probe(&flat, TaskSpec::new(3, 6).unwrap()).unwrap();
        assert_eq!(cert.witness.unwrap()["alternations"], 0);
    }

    #[test]
    fn capacity_examples() {
        let lb = capacity_bound(CapacityFamily::ReluWidthLb { m: 100 }, 0, 5).unwrap();
        assert!((lb - 95.0 / 7.0).abs() < 1e-12);
        assert_eq!(lb.ceil(), 14.0);
        let fam = CapacityFamily::Ppoly { pieces: 2, degree: 1 };
        let mut last = 0.0;
        for d in [1, 2, 4, 8, 16] {
            let v = capacity_bound(fam, d, 7).unwrap();
            assert!(v > last);
            last = v;
        }
        let (d, p, m) = (3.0f64, 5.0f64, 4.0f64);
        let want = 2.0 * d * p * (6.0 * (6.0 * d * p).ln() + 2.0 * (std::f64::consts::E * p * (m + 1.0)).ln());
        let got = capacity_bound(CapacityFamily::Trigpoly { k: 1, m: 4 }, 3, 5).unwrap();
        assert!((got - want).abs() < 1e-9);
    }

    #[test]
    fn counting_and_lemma_checks() {
        assert_eq!(check_newton_counts(1).unwrap().witness.unwrap()["n_tot"], 4);
        assert_eq!(check_newton_counts(2).unwrap().witness.unwrap()["n_tot"], 16);
        assert!(check_newton_counts(5).unwrap().passed);
        assert!(check_polarization(6, 50, &mut RngStream::new(1, 1)).unwrap().passed);
        assert!(check_spline_bound(2, 7).unwrap().passed);
        assert!(check_spline_bound(1, 9).unwrap().witness.unwrap()["max_error"].as_f64().unwrap() < 1e-15);
        assert!(check_spline_bound(4, 32).unwrap().passed);
        assert!(check_trigpoly(20, 3).unwrap().passed);
        assert!(check_newton_reconstruction(4, 30, 1).unwrap().passed);
    }

    #[test]
    fn claim_dispatch() {
        let cert = verify_claim("sine_width2", &json!({ "p": 5, "m": 3 }), None).unwrap();
        assert!(cert.passed);
        assert!(verify_claim("nope", &json!({}), None).is_err());
        assert!(verify_claim("gram_identity", &json!({}), None).is_err());
    }
}
