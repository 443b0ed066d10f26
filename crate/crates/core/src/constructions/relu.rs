use serde::{Deserialize, Serialize};

use super::newton::{lambda, newton_expansion, Parity};
use super::spline::{ratio_to_f64, relu_spline_power, spline_knots_for, SplineUnit};
use super::TrigTable;
use crate::data::{label_of, LabeledSet, TaskSpec};
use crate::error::{Error, Result};
use crate::model::{Activation, MlpParams};
use crate::numerics::Matrix;

/// Default ceiling on `W` plus `V` entries a construction may allocate.
pub const DEFAULT_WEIGHT_CAP: u128 = 200_000_000;

/// Where a hidden unit sits: frequency, expansion term, spline hinge, and
/// its contribution to the cosine and sine mode estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitInfo {
    pub nu: usize,
    pub term: usize,
    pub hinge: usize,
    pub degree: u32,
    pub cos_weight: f64,
    pub sin_weight: f64,
}

#[derive(Clone, Debug)]
pub struct ReluConstruction {
    pub params: MlpParams,
    pub units: Vec<UnitInfo>,
    pub spec: TaskSpec,
    pub tau: f64,
    pub lambda: f64,
    pub delta: f64,
    /// Knot count used for each power `r = 1..=m`.
    pub knots: Vec<u32>,
}

impl ReluConstruction {
    /// Largest `|C_ν − Ĉ_ν|` or `|S_ν − Ŝ_ν|` over the set and all `ν`.
    pub fn max_mode_error(&self, set: &LabeledSet) -> Result<f64> {
        let p = self.spec.p;
        let table = TrigTable::new(p);
        let mut worst = 0.0f64;
        for (x, _) in &set.items {
            let h = self.params.hidden(x)?;
            let mut cos_hat = vec![0.0; p];
            let mut sin_hat = vec![0.0; p];
            for (u, hv) in self.units.iter().zip(&h) {
                cos_hat[u.nu] += u.cos_weight * hv;
                sin_hat[u.nu] += u.sin_weight * hv;
            }
            let total = label_of(x, self.spec) as i64;
            for nu in 0..p {
                let angle = nu as i64 * total;
                worst = worst.max((cos_hat[nu] - table.cos(angle)).abs()).max((sin_hat[nu] - table.sin(angle)).abs());
            }
        }
        Ok(worst)
    }
}

/// Closed-form width bound `13pm2^m(m√(em/τ)(1+2em)^{(m−1)/2} + 2)`.
pub fn relu_width_bound(m: usize, p: usize, tau: f64) -> f64 {
    let (mf, e) = (m as f64, std::f64::consts::E);
    let inner = mf * (e * mf / tau).sqrt() * (1.0 + 2.0 * e * mf).powf((mf - 1.0) / 2.0) + 2.0;
    13.0 * p as f64 * mf * 2f64.powi(m as i32) * inner
}

pub fn relu_construction(spec: TaskSpec, tau: f64) -> Result<MlpParams> {
    Ok(relu_construction_with_cap(spec, tau, DEFAULT_WEIGHT_CAP)?.params)
}

/// Bias-free ReLU net exact on `𝒳_m` with margin at least `(1 − 4τ)p`.
///
/// Each frequency `ν ∈ [p]` approximates `cos(νΣθ)` and `sin(νΣθ)` by
/// splines of the powers in the polarized Newton expansion.
pub fn relu_construction_with_cap(spec: TaskSpec, tau: f64, cap: u128) -> Result<ReluConstruction> {
    let (p, m) = (spec.p, spec.m);
    if !(tau > 0.0 && tau <= 0.25) {
        return Err(Error::InvalidArgument(format!("tau = {tau} must lie in (0, 1/4]")));
    }
    if m > 6 {
        return Err(Error::InvalidArgument(format!("length m = {m} exceeds the supported 6")));
    }
    let lam = ratio_to_f64(lambda(m)?);
    let delta = tau / lam;
    let knots: Vec<u32> = (1..=m as u32).map(|r| spline_knots_for(r, delta)).collect();
    let splines: Vec<Vec<SplineUnit>> =
        (1..=m as u32).map(|r| relu_spline_power(r, knots[r as usize - 1])).collect::<Result<_>>()?;

    let terms = newton_expansion(m)?;
    let per_nu: usize = terms.iter().map(|t| splines[t.degree() as usize - 1].len()).sum();
    let width = per_nu * p;
    let required = 2 * width as u128 * p as u128;
    if required > cap {
        return Err(Error::CapExceeded { required, cap });
    }

    let table = TrigTable::new(p);
    let mut w = Matrix::zeros(width, p);
    let mut v = Matrix::zeros(p, width);
    let mut units = Vec::with_capacity(width);
    let mut direction = vec![0.0; p];
    let mut row = 0;
    for nu in 0..p {
        for (ti, term) in terms.iter().enumerate() {
            let r = term.degree();
            let (cos_w, sin_w) = term.form();
            for (col, d) in direction.iter_mut().enumerate() {
                *d = (1..=m)
                    .map(|t| {
                        let arg = (nu * t * col) as i64;
                        cos_w[t - 1] as f64 * table.cos(arg) + sin_w[t - 1] as f64 * table.sin(arg)
                    })
                    .sum();
            }
            let range = (m as u32 * r) as f64;
            let amplitude = range.powi(r as i32) * term.coeff;
            for (hi, unit) in splines[r as usize - 1].iter().enumerate() {
                for (col, d) in direction.iter().enumerate() {
                    w[(row, col)] = unit.a / range * d - unit.b / m as f64;
                }
                let weight = amplitude * unit.c;
                let (cos_weight, sin_weight) = match term.parity {
                    Parity::Cos => (weight, 0.0),
                    Parity::Sin => (0.0, weight),
                };
                for q in 0..p {
                    let arg = (nu * q) as i64;
                    v[(q, row)] = table.cos(arg) * cos_weight + table.sin(arg) * sin_weight;
                }
                units.push(UnitInfo { nu, term: ti, hinge: hi, degree: r, cos_weight, sin_weight });
                row += 1;
            }
        }
    }
    Ok(ReluConstruction {
        params: MlpParams { w, v, bias: None, act: Activation::Relu },
        units,
        spec,
        tau,
        lambda: lam,
        delta,
        knots,
    })
}

/// Width-`36p` bias-free ReLU net exact on two-token bags.
pub fn relu_construction_m2(p: usize) -> Result<MlpParams> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("modulus p = {p} must be at least 2")));
    }
    let spline = relu_spline_power(2, 7)?;
    let table = TrigTable::new(p);
    let width = 36 * p;
    let mut w = Matrix::zeros(width, p);
    let mut v = Matrix::zeros(p, width);
    let mut row = 0;
    for nu in 0..p {
        let c = |r: usize| table.cos((nu * r) as i64);
        let s = |r: usize| table.sin((nu * r) as i64);
        // Groups feed Φ(C₁/2), Φ(S₁/2), Φ((C₁+S₁)/4), Φ((C₁−S₁)/4).
        let groups: [(&dyn Fn(usize) -> f64, f64, bool); 4] = [
            (&|r| c(r) / 2.0, 2.0, true),
            (&|r| s(r) / 2.0, -2.0, true),
            (&|r| (c(r) + s(r)) / 4.0, 4.0, false),
            (&|r| (c(r) - s(r)) / 4.0, -4.0, false),
        ];
        for (feature, gain, on_cos) in groups {
            for unit in &spline {
                for col in 0..p {
                    w[(row, col)] = unit.a * feature(col) - unit.b / 2.0;
                }
                for q in 0..p {
                    let basis = if on_cos { c(q) } else { s(q) };
                    v[(q, row)] = gain * unit.c * basis;
                }
                row += 1;
            }
        }
        // ±ReLU(±C₂/2) and ±ReLU(±S₂/2) carry the linear −½C₂ and −½S₂ terms.
        for (on_cos, sign) in [(true, 1.0), (true, -1.0), (false, 1.0), (false, -1.0)] {
            for col in 0..p {
                let arg = (2 * nu * col) as i64;
                w[(row, col)] = sign * 0.5 * if on_cos { table.cos(arg) } else { table.sin(arg) };
            }
            for q in 0..p {
                v[(q, row)] = -sign * if on_cos { c(q) } else { s(q) };
            }
            row += 1;
        }
    }
    debug_assert_eq!(row, width);
    Ok(MlpParams { w, v, bias: None, act: Activation::Relu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::enumerate_domain;
    use crate::model::{predict, scores, Prediction};
    use crate::numerics::{row_max_l1, spectral_norm_default};

    fn check_exact(theta: &MlpParams, spec: TaskSpec) -> f64 {
        let set = enumerate_domain(spec).unwrap();
        let mut worst = f64::INFINITY;
        for (x, y) in &set.items {
            assert_eq!(predict(theta, x).unwrap(), Prediction::Label(*y));
            let s = scores(theta, x).unwrap();
            let other = s.iter().enumerate().filter(|(k, _)| k != y).map(|(_, v)| *v).fold(f64::MIN, f64::max);
            worst = worst.min(s[*y] - other);
        }
        worst
    }

    #[test]
    fn general_construction_small() {
        let spec = TaskSpec::new(3, 2).unwrap();
        let c = relu_construction_with_cap(spec, 0.1, DEFAULT_WEIGHT_CAP).unwrap();
        assert!(check_exact(&c.params, spec) >= 0.6 * 3.0);
        assert!(c.params.w.max_abs() <= 1.0 + 1e-12);
        let set = enumerate_domain(spec).unwrap();
        assert!(c.max_mode_error(&set).unwrap() <= 0.1);
    }

    #[test]
    fn general_construction_m3() {
        let spec = TaskSpec::new(3, 3).unwrap();
        let c = relu_construction_with_cap(spec, 0.1, DEFAULT_WEIGHT_CAP).unwrap();
        assert!(check_exact(&c.params, spec) >= 0.6 * 3.0);
        let bound = 3.5 * 3f64.powi(6) / (6.0 * 8.0);
        assert!(c.params.v.max_abs() <= bound + 1e-9);
        assert!(c.params.w.max_abs() <= 2.0 / 3.0 + 1e-12);
    }

    #[test]
    fn unit_count_for_m3_p5() {
        let c = relu_construction_with_cap(TaskSpec::new(5, 3).unwrap(), 0.1, DEFAULT_WEIGHT_CAP).unwrap();
        assert_eq!(c.knots, vec![1, 45, 78]);
        assert_eq!(c.params.width(), 16360);
        assert!((c.params.width() as f64) <= relu_width_bound(3, 5, 0.1));
    }

    #[test]
    fn cap_is_enforced() {
        let err = relu_construction_with_cap(TaskSpec::new(5, 3).unwrap(), 0.1, 1000).unwrap_err();
        assert!(matches!(err, Error::CapExceeded { required, .. } if required == 2 * 16360 * 5));
        assert!(relu_construction(TaskSpec::new(3, 2).unwrap(), 0.3).is_err());
    }

    #[test]
    fn m2_corollary() {
        for p in [3, 5] {
            let spec = TaskSpec::new(p, 2).unwrap();
            let theta = relu_construction_m2(p).unwrap();
            assert_eq!(theta.width(), 36 * p);
            let pf = p as f64;
            assert!(check_exact(&theta, spec) >= 25.0 * pf / 49.0 + 20.0 / 49.0 - 1e-9);
            assert!(theta.w.max_abs() <= 1.0);
            assert!(theta.v.max_abs() <= 34.0 / 7.0 + 1e-12);
            assert!(spectral_norm_default(&theta.v).unwrap() <= 11.0 * pf.sqrt());
            assert!(row_max_l1(&theta.v).is_finite());
        }
    }

    #[test]
    fn m2_agrees_with_general() {
        let spec = TaskSpec::new(3, 2).unwrap();
        let a = relu_construction_m2(3).unwrap();
        let b = relu_construction(spec, 0.1).unwrap();
        for (x, _) in &enumerate_domain(spec).unwrap().items {
            assert_eq!(predict(&a, x).unwrap(), predict(&b, x).unwrap());
        }
    }
}
