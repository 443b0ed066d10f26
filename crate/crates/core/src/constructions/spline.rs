use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `c · ReLU(a z − b)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineUnit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl SplineUnit {
    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        self.c * (self.a * z - self.b).max(0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactSplineUnit {
    pub a: Ratio<i128>,
    pub b: Ratio<i128>,
    pub c: Ratio<i128>,
}

/// ReLU expansion of the linear interpolant of `z^s` on the knots
/// `z_k = −1 + 2k/N`: two boundary hinges then `N − 1` interior hinges.
pub fn relu_spline_power_exact(s: u32, n: u32) -> Result<Vec<ExactSplineUnit>> {
    if s == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!("spline needs s ≥ 1 and N ≥ 1, got s = {s}, N = {n}")));
    }
    let big_n = n as i128;
    // z_k^s = (2k − N)^s / N^s; slopes carry a further factor N/2.
    let num = |k: i128| -> Result<i128> { (2 * k - big_n).checked_pow(s).ok_or(Error::RationalOverflow("spline knot power")) };
    let slope_den = big_n
        .checked_pow(s - 1)
        .and_then(|v| v.checked_mul(2))
        .ok_or(Error::RationalOverflow("spline slope denominator"))?;
    let sign = if s % 2 == 0 { 1 } else { -1 };
    let half = Ratio::new(sign, 2);

    let first_slope = Ratio::new(
        num(1)?.checked_sub(num(0)?).ok_or(Error::RationalOverflow("spline slope"))?,
        slope_den,
    );
    let one = Ratio::from_integer(1);
    let mut units = vec![
        ExactSplineUnit { a: one, b: -one, c: first_slope + half },
        ExactSplineUnit { a: -one, b: -one, c: half },
    ];
    for j in 1..big_n {
        let second = num(j + 1)?
            .checked_sub(num(j)?.checked_mul(2).ok_or(Error::RationalOverflow("spline curvature"))?)
            .and_then(|v| v.checked_add(num(j - 1).ok()?))
            .ok_or(Error::RationalOverflow("spline curvature"))?;
        units.push(ExactSplineUnit { a: one, b: Ratio::new(2 * j - big_n, big_n), c: Ratio::new(second, slope_den) });
    }
    Ok(units)
}

pub fn relu_spline_power(s: u32, n: u32) -> Result<Vec<SplineUnit>> {
    Ok(relu_spline_power_exact(s, n)?
        .into_iter()
        .map(|u| SplineUnit { a: ratio_to_f64(u.a), b: ratio_to_f64(u.b), c: ratio_to_f64(u.c) })
        .collect())
}

pub fn evaluate_spline(units: &[SplineUnit], z: f64) -> f64 {
    units.iter().map(|u| u.eval(z)).sum()
}

/// Smallest knot count guaranteeing sup error `≤ eps` for `z^s`.
pub fn spline_knots_for(s: u32, eps: f64) -> u32 {
    // Guard against the square root landing a hair above an exact integer.
    let need = (((s as f64) * (s as f64 - 1.0) / (2.0 * eps)).sqrt() - 1e-9).ceil();
    (need as u32).max(1)
}

pub(crate) fn ratio_to_f64(r: Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sup_error(s: u32, n: u32) -> f64 {
        let units = relu_spline_power(s, n).unwrap();
        (0..=10_000)
            .map(|i| {
                let z = -1.0 + 2.0 * i as f64 / 10_000.0;
                (evaluate_spline(&units, z) - z.powi(s as i32)).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn square_with_seven_knots_table() {
        let units = relu_spline_power_exact(2, 7).unwrap();
        assert_eq!(units.len(), 8);
        assert_eq!(units[0].c, Ratio::new(-17, 14));
        assert_eq!(units[1].c, Ratio::new(1, 2));
        for (j, u) in units[2..].iter().enumerate() {
            assert_eq!(u.c, Ratio::new(4, 7));
            assert_eq!(u.b, Ratio::new(2 * (j as i128 + 1) - 7, 7));
        }
        assert!(sup_error(2, 7) <= 1.0 / 49.0 + 1e-12);
    }

    #[test]
    fn linear_is_exact() {
        for n in [1, 2, 5, 9] {
            assert!(sup_error(1, n) < 1e-14);
        }
        let units = relu_spline_power_exact(1, 1).unwrap();
        assert_eq!(units[0].c, Ratio::new(1, 2));
        assert_eq!(units[1].c, Ratio::new(-1, 2));
    }

    #[test]
    fn cubic_error_bound() {
        assert!(sup_error(3, 20) <= 0.0075 + 1e-12);
    }

    #[test]
    fn coefficient_bounds() {
        for s in 1..=6u32 {
            for n in [1, 2, 3, 7, 16, 64] {
                let units = relu_spline_power(s, n).unwrap();
                assert!(units.len() <= n as usize + 1);
                let cap = (s as f64 + 0.5).max(2.0 * (s * (s - 1)) as f64 / n as f64);
                for u in &units {
                    assert!(u.a.abs() <= 1.0 && u.b.abs() <= 1.0);
                    assert!(u.c.abs() <= cap + 1e-12);
                }
            }
        }
    }

    #[test]
    fn knot_count_rule() {
        assert_eq!(spline_knots_for(1, 1e-6), 1);
        assert_eq!(spline_knots_for(2, 1.0 / 49.0), 7);
        assert!(relu_spline_power(0, 3).is_err());
    }
}
