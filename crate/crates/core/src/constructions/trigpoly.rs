use std::collections::BTreeMap;

use crate::data::BagVector;
use crate::error::{Error, Result};

/// Exponents over the `2p` variables `(c₀, s₀, c₁, s₁, …)`.
pub type Monomial = Vec<u32>;

/// Sparse integer polynomial.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Polynomial {
    pub terms: BTreeMap<Monomial, i64>,
}

impl Polynomial {
    fn constant(vars: usize, value: i64) -> Self {
        let mut terms = BTreeMap::new();
        if value != 0 {
            terms.insert(vec![0; vars], value);
        }
        Self { terms }
    }

    /// `self · var`, where `var` indexes one of the `2p` variables.
    fn times_var(&self, var: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(mono, c)| {
                let mut next = mono.clone();
                next[var] += 1;
                (next, *c)
            })
            .collect();
        Self { terms }
    }

    fn add_scaled(&mut self, other: &Polynomial, sign: i64) {
        for (mono, c) in &other.terms {
            let entry = self.terms.entry(mono.clone()).or_insert(0);
            *entry += sign * c;
            if *entry == 0 {
                self.terms.remove(mono);
            }
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.iter().sum()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Evaluate at `c_v = cos αᵥ`, `s_v = sin αᵥ`.
    pub fn eval_angles(&self, angles: &[f64]) -> f64 {
        let vals: Vec<f64> = angles.iter().flat_map(|a| [a.cos(), a.sin()]).collect();
        self.terms
            .iter()
            .map(|(mono, c)| *c as f64 * mono.iter().zip(&vals).map(|(&e, v)| v.powi(e as i32)).product::<f64>())
            .sum()
    }
}

/// `S_x` and `C_x`, with `S_x = sin(Σ xᵥαᵥ)` and `C_x = cos(Σ xᵥαᵥ)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrigPolyPair {
    pub sin: Polynomial,
    pub cos: Polynomial,
}

pub const MAX_TRIGPOLY_LENGTH: usize = 8;

/// Expand by peeling one copy of the smallest occupied token at a time.
pub fn trig_sum_polynomialize(x: &BagVector) -> Result<TrigPolyPair> {
    if x.length() > MAX_TRIGPOLY_LENGTH {
        return Err(Error::InvalidArgument(format!(
            "bag length {} exceeds {MAX_TRIGPOLY_LENGTH}",
            x.length()
        )));
    }
    let vars = 2 * x.p();
    let mut counts = x.counts().to_vec();
    // Peeling order: smallest index first, innermost last.
    let mut peeled = Vec::new();
    while let Some(u) = counts.iter().position(|&c| c > 0) {
        counts[u] -= 1;
        peeled.push(u);
    }
    let mut sin = Polynomial::constant(vars, 0);
    let mut cos = Polynomial::constant(vars, 1);
    for &u in peeled.iter().rev() {
        // S_x = s_u C_y + c_u S_y,  C_x = c_u C_y − s_u S_y
        let mut next_sin = cos.times_var(2 * u + 1);
        next_sin.add_scaled(&sin.times_var(2 * u), 1);
        let mut next_cos = cos.times_var(2 * u);
        next_cos.add_scaled(&sin.times_var(2 * u + 1), -1);
        sin = next_sin;
        cos = next_cos;
    }
    Ok(TrigPolyPair { sin, cos })
}
