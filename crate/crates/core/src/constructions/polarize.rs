use crate::error::{Error, Result};

pub const MAX_POLARIZE_ORDER: usize = 12;

/// One signed power `weight · (Σ εᵢ xᵢ)^s` of the expansion.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarTerm {
    pub eps: Vec<i8>,
    pub weight: f64,
}

/// The `2^s` terms whose sum equals the monomial `x₁⋯x_s`.
pub fn polarize(s: usize) -> Result<Vec<PolarTerm>> {
    if !(1..=MAX_POLARIZE_ORDER).contains(&s) {
        return Err(Error::InvalidArgument(format!("polarization order {s} outside 1..={MAX_POLARIZE_ORDER}")));
    }
    let scale = 1.0 / ((1..=s).product::<usize>() as f64 * (1u64 << s) as f64);
    Ok((0..1usize << s)
        .map(|mask| {
            // Bit i set means εᵢ = +1; mask order is lexicographic with −1 first.
            let eps: Vec<i8> = (0..s).map(|i| if mask >> (s - 1 - i) & 1 == 1 { 1 } else { -1 }).collect();
            let sign = eps.iter().map(|&e| e as f64).product::<f64>();
            PolarTerm { eps, weight: sign * scale }
        })
        .collect())
}

pub fn evaluate_polarized(terms: &[PolarTerm], x: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for t in terms {
        if t.eps.len() != x.len() {
            return Err(Error::WrongLength { got: x.len(), expected: t.eps.len() });
        }
        let lin: f64 = t.eps.iter().zip(x).map(|(&e, v)| e as f64 * v).sum();
        total += t.weight * lin.powi(x.len() as i32);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    #[test]
    fn order_one_is_identity() {
        let terms = polarize(1).unwrap();
        assert_eq!(terms.len(), 2);
        assert!((evaluate_polarized(&terms, &[3.5]).unwrap() - 3.5).abs() < 1e-15);
    }

    #[test]
    fn order_two_hand_case() {
        let terms = polarize(2).unwrap();
        assert!((evaluate_polarized(&terms, &[3.0, 4.0]).unwrap() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn order_five_random() {
        let terms = polarize(5).unwrap();
        let mut rng = RngStream::new(3, 0);
        for _ in 0..50 {
            let x: Vec<f64> = (0..5).map(|_| rng.uniform() * 2.0 - 1.0).collect();
            let direct: f64 = x.iter().product();
            assert!((evaluate_polarized(&terms, &x).unwrap() - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn out_of_range() {
        assert!(polarize(0).is_err());
        assert!(polarize(13).is_err());
        assert!(evaluate_polarized(&polarize(2).unwrap(), &[1.0]).is_err());
    }
}
