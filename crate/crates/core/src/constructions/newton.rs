use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_NEWTON_ORDER: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Cos,
    Sin,
}

/// One signed power `coeff · G^{|k|}` of the expansion of `cos(Σθ)` or
/// `sin(Σθ)` in the power sums `C_j = Σᵢ cos(jθᵢ)`, `S_j = Σᵢ sin(jθᵢ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonTerm {
    pub k: Vec<u32>,
    pub p_select: Vec<u32>,
    pub eps: Vec<i8>,
    pub exact: Ratio<i64>,
    pub coeff: f64,
    pub parity: Parity,
}

impl NewtonTerm {
    /// Power of the linear form.
    pub fn degree(&self) -> u32 {
        self.k.iter().sum()
    }

    /// Integer weights `(a_j, b_j)` with `G = Σ_j a_j C_j + b_j S_j`.
    pub fn form(&self) -> (Vec<i64>, Vec<i64>) {
        let m = self.k.len();
        let mut cos_w = vec![0i64; m];
        let mut sin_w = vec![0i64; m];
        let mut idx = 0;
        for j in 0..m {
            for l in 0..self.k[j] {
                let e = self.eps[idx] as i64;
                if l < self.p_select[j] {
                    cos_w[j] += e;
                } else {
                    sin_w[j] += e;
                }
                idx += 1;
            }
        }
        (cos_w, sin_w)
    }
}

/// All `k ∈ ℤ_{≥0}^m` with `Σ_j j·k_j = m`, in lexicographic order.
pub fn multi_indices(m: usize) -> Vec<Vec<u32>> {
    fn rec(j: usize, m: usize, remaining: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if j > m {
            if remaining == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for kj in 0..=remaining / j {
            cur.push(kj as u32);
            rec(j + 1, m, remaining - kj * j, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(1, m, m, &mut Vec::with_capacity(m), &mut out);
    out
}

fn factorial(n: u32) -> Result<i64> {
    (1..=n as i64).try_fold(1i64, |acc, v| acc.checked_mul(v)).ok_or(Error::RationalOverflow("factorial"))
}

/// Newton-identity coefficient of `Π_j Z_j^{k_j}` in `e_m`.
pub fn newton_coefficient(k: &[u32]) -> Result<Ratio<i64>> {
    let m: u32 = k.iter().enumerate().map(|(j, &kj)| (j as u32 + 1) * kj).sum();
    let parts: u32 = k.iter().sum();
    let mut den = 1i64;
    for (j, &kj) in k.iter().enumerate() {
        let pow = (j as i64 + 1).checked_pow(kj).ok_or(Error::RationalOverflow("newton power"))?;
        den = den
            .checked_mul(factorial(kj)?)
            .and_then(|d| d.checked_mul(pow))
            .ok_or(Error::RationalOverflow("newton denominator"))?;
    }
    let sign = if (m - parts) % 2 == 0 { 1 } else { -1 };
    Ok(Ratio::new(sign, den))
}

/// Every triple `(k, p, ε)` with its exact coefficient, enumerated
/// lexicographically in `k`, then `p`, then `ε` (with `−1 < +1`).
pub fn newton_expansion(m: usize) -> Result<Vec<NewtonTerm>> {
    if !(1..=MAX_NEWTON_ORDER).contains(&m) {
        return Err(Error::InvalidArgument(format!("Newton order {m} outside 1..={MAX_NEWTON_ORDER}")));
    }
    let mut terms = Vec::new();
    for k in multi_indices(m) {
        let ck = newton_coefficient(&k)?;
        let r: u32 = k.iter().sum();
        let scale = factorial(r)?.checked_mul(1i64 << r).ok_or(Error::RationalOverflow("polarization scale"))?;
        for p_sel in bounded_indices(&k) {
            let q: u32 = p_sel.iter().sum();
            let gap = r - q;
            let (parity, sign) = if gap % 2 == 0 {
                (Parity::Cos, if (gap / 2) % 2 == 0 { 1 } else { -1 })
            } else {
                (Parity::Sin, if ((gap - 1) / 2) % 2 == 0 { 1 } else { -1 })
            };
            let mut binom = 1i64;
            for (&kj, &pj) in k.iter().zip(&p_sel) {
                binom = binom.checked_mul(choose(kj, pj)).ok_or(Error::RationalOverflow("binomial product"))?;
            }
            let base = ck
                .checked_mul(&Ratio::new(sign * binom, scale))
                .ok_or(Error::RationalOverflow("newton coefficient"))?;
            for mask in 0..1u64 << r {
                let eps: Vec<i8> = (0..r).map(|i| if mask >> (r - 1 - i) & 1 == 1 { 1 } else { -1 }).collect();
                let neg = eps.iter().filter(|&&e| e < 0).count() % 2 == 1;
                let exact = if neg { -base } else { base };
                terms.push(NewtonTerm {
                    k: k.clone(),
                    p_select: p_sel.clone(),
                    eps,
                    coeff: *exact.numer() as f64 / *exact.denom() as f64,
                    exact,
                    parity,
                });
            }
        }
    }
    Ok(terms)
}

fn bounded_indices(k: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for &kj in k {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..=kj).map(move |pj| {
                    let mut next = prefix.clone();
                    next.push(pj);
                    next
                })
            })
            .collect();
    }
    out
}

fn choose(n: u32, k: u32) -> i64 {
    (0..k as i64).fold(1, |acc, i| acc * (n as i64 - i) / (i + 1))
}

/// `Σ_k 2^{|k|} Π_j (k_j + 1)`, the number of triples in the expansion.
pub fn total_terms(m: usize) -> u64 {
    multi_indices(m)
        .iter()
        .map(|k| (1u64 << k.iter().sum::<u32>()) * k.iter().map(|&kj| kj as u64 + 1).product::<u64>())
        .sum()
}

/// `(cos Σθ, sin Σθ)` rebuilt from the expansion.
pub fn newton_reconstruct(terms: &[NewtonTerm], angles: &[f64]) -> (f64, f64) {
    let m = angles.len();
    let c: Vec<f64> = (1..=m).map(|j| angles.iter().map(|t| (j as f64 * t).cos()).sum()).collect();
    let s: Vec<f64> = (1..=m).map(|j| angles.iter().map(|t| (j as f64 * t).sin()).sum()).collect();
    let mut out = (0.0, 0.0);
    for t in terms {
        let (a, b) = t.form();
        let g: f64 = (0..m).map(|j| a[j] as f64 * c[j] + b[j] as f64 * s[j]).sum();
        let v = t.coeff * g.powi(t.degree() as i32);
        match t.parity {
            Parity::Cos => out.0 += v,
            Parity::Sin => out.1 += v,
        }
    }
    out
}

/// Unsigned Stirling number of the first kind `[n r]`.
pub fn stirling_first(n: usize, r: usize) -> u128 {
    let mut row = vec![1u128];
    for i in 1..=n {
        let mut next = vec![0u128; i + 1];
        for j in 1..=i {
            let carry = if j < i { (i as u128 - 1) * row[j] } else { 0 };
            next[j] = row[j - 1] + carry;
        }
        row = next;
    }
    row.get(r).copied().unwrap_or(0)
}

/// `Λ_m = Σ_r 2^r (mr)^r [m r] / (r! m!)`, exactly.
pub fn lambda(m: usize) -> Result<Ratio<i128>> {
    let m_fact = (1..=m as i128).product::<i128>();
    let mut total = Ratio::from_integer(0i128);
    for r in 1..=m {
        let pow = ((m * r) as i128)
            .checked_pow(r as u32)
            .and_then(|v| v.checked_mul(1i128 << r))
            .and_then(|v| v.checked_mul(stirling_first(m, r) as i128))
            .ok_or(Error::RationalOverflow("lambda numerator"))?;
        let den = (1..=r as i128).product::<i128>() * m_fact;
        total = total.checked_add(&Ratio::new(pow, den)).ok_or(Error::RationalOverflow("lambda sum"))?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use std::f64::consts::PI;

    #[test]
    fn term_counts() {
        assert_eq!(total_terms(1), 4);
        assert_eq!(total_terms(2), 16);
        assert_eq!(newton_expansion(2).unwrap().len(), 16);
        for m in 1..=MAX_NEWTON_ORDER {
            let n = total_terms(m);
            assert!(m as u64 * (1 << m) <= n && n <= 13 * m as u64 * (1 << m));
        }
        assert_eq!(multi_indices(2), vec![vec![0, 1], vec![2, 0]]);
    }

    #[test]
    fn order_two_matches_double_angle_identity() {
        // cos(θ₁+θ₂) = ½(C₁² − S₁² − C₂)
        let terms = newton_expansion(2).unwrap();
        let (a, b) = (0.7, -1.9);
        let c1 = f64::cos(a) + f64::cos(b);
        let s1 = f64::sin(a) + f64::sin(b);
        let c2 = f64::cos(2.0 * a) + f64::cos(2.0 * b);
        let (cos, sin) = newton_reconstruct(&terms, &[a, b]);
        assert!((cos - 0.5 * (c1 * c1 - s1 * s1 - c2)).abs() < 1e-12);
        assert!((cos - (a + b).cos()).abs() < 1e-12);
        assert!((sin - (a + b).sin()).abs() < 1e-12);
    }

    #[test]
    fn order_four_random_angles() {
        let terms = newton_expansion(4).unwrap();
        let mut rng = RngStream::new(11, 4);
        for _ in 0..100 {
            let th: Vec<f64> = (0..4).map(|_| (rng.uniform() * 2.0 - 1.0) * PI).collect();
            let (cos, sin) = newton_reconstruct(&terms, &th);
            let sum: f64 = th.iter().sum();
            assert!((cos - sum.cos()).abs() < 1e-9);
            assert!((sin - sum.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn coefficients_at_most_half() {
        for m in 1..=6 {
            for t in newton_expansion(m).unwrap() {
                assert!(t.exact.numer().abs() * 2 <= *t.exact.denom());
            }
        }
        assert!(newton_expansion(0).is_err());
        assert!(newton_expansion(11).is_err());
    }

    #[test]
    fn stirling_and_lambda() {
        assert_eq!((1..=3).map(|r| stirling_first(3, r)).collect::<Vec<_>>(), vec![2, 3, 1]);
        assert_eq!(stirling_first(4, 2), 11);
        assert_eq!(lambda(3).unwrap(), Ratio::from_integer(200));
        assert_eq!(lambda(1).unwrap(), Ratio::from_integer(2));
    }
}
