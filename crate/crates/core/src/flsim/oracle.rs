//! Plain-integer shadow of the secure aggregation: same encoded trust
//! scores, same scale factors, exact rationals.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{Signed, Zero};

use crate::discriminator::EncodedPoly;
use crate::quant::{dequantize_ratio, norm_passes};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleOutput {
    /// Clients (1-based) passing the norm check.
    pub active: Vec<usize>,
    pub sigma1: BigInt,
    pub sigma2: Vec<BigInt>,
    /// Reduced `sigma2_j / sigma1` with positive denominator; `None` when
    /// `sigma1 = 0`.
    pub ratios: Option<Vec<(BigInt, BigUint)>>,
}

impl OracleOutput {
    /// `norm0 * ratio / q` per coordinate, or zeros on a zero denominator.
    pub fn aggregate(&self, norm0: f64, q: u64) -> Vec<f64> {
        match &self.ratios {
            None => vec![0.0; self.sigma2.len()],
            Some(r) => r
                .iter()
                .map(|(a, b)| norm0 * dequantize_ratio(a, b, q).expect("positive denominator"))
                .collect(),
        }
    }
}

fn dot(a: &[i64], b: &[i64]) -> BigInt {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| BigInt::from(x as i128 * y as i128))
        .sum()
}

/// Reduces `num / den` to lowest terms with a positive denominator.
pub fn reduce_fraction(num: &BigInt, den: &BigInt) -> Option<(BigInt, BigUint)> {
    if den.is_zero() {
        return None;
    }
    let g = num.gcd(den);
    let (mut a, mut b) = (num / &g, den / &g);
    if b.is_negative() {
        a = -a;
        b = -b;
    }
    Some((a, b.to_biguint().expect("positive")))
}

/// `updates[i]` is client `i + 1`'s quantized update, `None` if it never
/// submitted one. `excluded` lists clients barred before the round.
pub fn fixedpoint_oracle(
    u0: &[i64],
    updates: &[Option<Vec<i64>>],
    excluded: &[usize],
    h: &EncodedPoly,
    eps: f64,
) -> OracleOutput {
    let q = h.q;
    let d = u0.len();
    let mut active = Vec::new();
    let mut sigma1 = BigInt::zero();
    let mut sigma2 = vec![BigInt::zero(); d];
    for (i, u) in updates.iter().enumerate() {
        let Some(u) = u else { continue };
        if excluded.contains(&(i + 1)) || u.len() != d || !norm_passes(&dot(u, u), q, eps) {
            continue;
        }
        active.push(i + 1);
        let ts = h.ts_plain(&dot(u0, u));
        for (s, &x) in sigma2.iter_mut().zip(u) {
            *s += &ts * BigInt::from(x);
        }
        sigma1 += ts;
    }
    let ratios = if sigma1.is_zero() {
        None
    } else {
        Some(
            sigma2
                .iter()
                .map(|s| reduce_fraction(s, &sigma1).expect("nonzero"))
                .collect(),
        )
    };
    OracleOutput {
        active,
        sigma1,
        sigma2,
        ratios,
    }
}
