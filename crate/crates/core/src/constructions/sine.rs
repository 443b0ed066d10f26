use std::f64::consts::PI;

use super::{reduce_angle, TrigTable};
use crate::data::TaskSpec;
use crate::model::{Activation, MlpParams};
use crate::numerics::Matrix;

/// Width-2 bias-free sine net exact on length-`m` bags.
///
/// Scores are `cos(2π(y − q)/p)`, so the margin is `1 − cos(2π/p)`.
pub fn sine_width2_fixed(spec: TaskSpec) -> MlpParams {
    let (p, m) = (spec.p, spec.m);
    let step = 2.0 * PI / p as f64;
    let shift = PI / (2.0 * m as f64);
    let w = Matrix::from_fn(2, p, |k, r| {
        let base = step * r as f64;
        reduce_angle(if k == 0 { base } else { base + shift })
    });
    MlpParams { w, v: readout2(p), bias: None, act: Activation::Sine }
}

/// Width-2 sine net with bias `(0, π/2)`; exact for every length.
pub fn sine_width2_biased_uniform(p: usize) -> MlpParams {
    let step = 2.0 * PI / p as f64;
    let w = Matrix::from_fn(2, p, |_, r| reduce_angle(step * r as f64));
    MlpParams { w, v: readout2(p), bias: Some(vec![0.0, PI / 2.0]), act: Activation::Sine }
}

fn readout2(p: usize) -> Matrix {
    let t = TrigTable::new(p);
    Matrix::from_fn(p, 2, |q, k| if k == 0 { t.sin(q as i64) } else { t.cos(q as i64) })
}

/// Bias-free sine net of width `⌊(p−1)/2⌋`, the same for every length.
///
/// Scores are the sine Gram sums `S(q, y)`: `p/4` on the label, `−p/4` on
/// its negation and zero elsewhere, except that every score vanishes when
/// `y ≡ 0` (and `y ≡ p/2` for even `p`), where the prediction fails.
pub fn sine_halfp_unbiased(p: usize) -> MlpParams {
    let d = (p - 1) / 2;
    let t = TrigTable::new(p);
    let step = 2.0 * PI / p as f64;
    let w = Matrix::from_fn(d, p, |k, r| reduce_angle(step * (((k + 1) * r) % p) as f64));
    let v = Matrix::from_fn(p, d, |q, k| t.sin(((k + 1) * q) as i64));
    MlpParams { w, v, bias: None, act: Activation::Sine }
}

/// Width-`2p` sine net scoring `p` on the label and `0` elsewhere.
pub fn sine_highmargin_2p(spec: TaskSpec) -> MlpParams {
    let (p, m) = (spec.p, spec.m);
    let t = TrigTable::new(p);
    let shift = PI / (2.0 * m as f64);
    let w = Matrix::from_fn(2 * p, p, |unit, r| {
        let k = unit / 2 + 1;
        let base = 2.0 * PI * ((k * r) % p) as f64 / p as f64;
        reduce_angle(if unit % 2 == 0 { base } else { base + shift })
    });
    let v = Matrix::from_fn(p, 2 * p, |q, unit| {
        let k = (unit / 2 + 1) as i64;
        if unit % 2 == 0 {
            t.sin(k * q as i64)
        } else {
            t.cos(k * q as i64)
        }
    });
    MlpParams { w, v, bias: None, act: Activation::Sine }
}
