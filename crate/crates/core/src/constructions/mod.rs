//! Closed-form networks that solve modular addition exactly, and the
//! building blocks they are assembled from.

mod newton;
mod polarize;
mod relu;
mod sine;
mod spline;
mod trigpoly;

pub use newton::{
    lambda, multi_indices, newton_coefficient, newton_expansion, newton_reconstruct, stirling_first,
    total_terms, NewtonTerm, Parity, MAX_NEWTON_ORDER,
};
pub use polarize::{evaluate_polarized, polarize, PolarTerm, MAX_POLARIZE_ORDER};
pub use relu::{
    relu_construction, relu_construction_m2, relu_construction_with_cap, relu_width_bound, ReluConstruction,
    UnitInfo, DEFAULT_WEIGHT_CAP,
};
pub use sine::{sine_halfp_unbiased, sine_highmargin_2p, sine_width2_biased_uniform, sine_width2_fixed};
pub use spline::{
    evaluate_spline, relu_spline_power, relu_spline_power_exact, spline_knots_for, ExactSplineUnit, SplineUnit,
};
pub use trigpoly::{trig_sum_polynomialize, Monomial, Polynomial, TrigPolyPair, MAX_TRIGPOLY_LENGTH};

use std::f64::consts::PI;

/// `cos(2πt/p)` and `sin(2πt/p)` for residues `t`, with the reflection
/// symmetries `t ↦ p − t` and the zeros at `0` and `p/2` held exactly.
#[derive(Clone, Debug)]
pub(crate) struct TrigTable {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl TrigTable {
    pub(crate) fn new(p: usize) -> Self {
        let mut cos = vec![0.0; p];
        let mut sin = vec![0.0; p];
        for a in 0..=p / 2 {
            let (c, s) = match (4 * a, 2 * a) {
                (_, two) if two == p => (-1.0, 0.0),
                (four, _) if four == p => (0.0, 1.0),
                _ if a == 0 => (1.0, 0.0),
                _ => {
                    let angle = 2.0 * PI * a as f64 / p as f64;
                    (angle.cos(), angle.sin())
                }
            };
            cos[a] = c;
            sin[a] = s;
            if a != 0 {
                cos[p - a] = c;
                sin[p - a] = -s;
            }
        }
        Self { cos, sin }
    }

    #[inline]
    pub(crate) fn cos(&self, t: i64) -> f64 {
        self.cos[t.rem_euclid(self.cos.len() as i64) as usize]
    }

    #[inline]
    pub(crate) fn sin(&self, t: i64) -> f64 {
        self.sin[t.rem_euclid(self.sin.len() as i64) as usize]
    }
}

/// Reduce an angle to `[−π, π)`.
pub fn reduce_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let r = theta - two_pi * ((theta + PI) / two_pi).floor();
    if r >= PI {
        r - two_pi
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trig_table_symmetries() {
        for p in 2..40 {
            let t = TrigTable::new(p);
            for a in 0..p as i64 {
                assert_eq!(t.sin(a), -t.sin(p as i64 - a));
                assert_eq!(t.cos(a), t.cos(p as i64 - a));
                let angle = 2.0 * PI * a as f64 / p as f64;
                assert!((t.sin(a) - angle.sin()).abs() < 1e-14);
                assert!((t.cos(a) - angle.cos()).abs() < 1e-14);
            }
            assert_eq!(t.sin(0), 0.0);
            if p % 2 == 0 {
                assert_eq!(t.sin(p as i64 / 2), 0.0);
            }
        }
    }

    #[test]
    fn angle_reduction_interval() {
        for k in -50..50 {
            let theta = k as f64 * 0.37;
            let r = reduce_angle(theta);
            assert!((-PI..PI).contains(&r));
            assert!((r.sin() - theta.sin()).abs() < 1e-12);
        }
        assert_eq!(reduce_angle(PI), -PI);
    }
}
