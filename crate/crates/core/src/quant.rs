//! Normalization, unbiased stochastic quantization onto the grid
//! `{-q, ..., q} / q`, and the integer <-> field embedding.

use num_bigint::{BigInt, BigUint};
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, RngCore};

use crate::field::{FieldElement, FieldError, Modulus};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuantError {
    #[error("degenerate update: zero or non-finite norm")]
    DegenerateUpdate,
    #[error("out of range: coordinate {0} has magnitude above 1")]
    OutOfRange(f64),
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("quantization parameter must be at least 1")]
    BadQ,
}

/// Integer coordinates in `[-q, q]`; the real value is `coords[i] / q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedUpdate {
    pub coords: Vec<i64>,
    pub q: u64,
}

impl QuantizedUpdate {
    pub fn zeros(d: usize, q: u64) -> Self {
        Self { coords: vec![0; d], q }
    }

    pub fn norm_sq(&self) -> i128 {
        self.coords.iter().map(|&c| (c as i128) * (c as i128)).sum()
    }

    pub fn dequantize(&self) -> Vec<f64> {
        self.coords.iter().map(|&c| c as f64 / self.q as f64).collect()
    }
}

/// Norm check on a squared integer norm: `|norm_sq - q^2| < eps * q^2`.
pub fn norm_passes(norm_sq: &BigInt, q: u64, eps: f64) -> bool {
    let q2 = BigInt::from(q) * BigInt::from(q);
    let gap = (norm_sq - &q2).abs().to_f64().unwrap_or(f64::INFINITY);
    gap < eps * (q as f64) * (q as f64)
}

pub fn l2_norm(u: &[f64]) -> f64 {
    u.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn normalize(u: &[f64]) -> Result<Vec<f64>, QuantError> {
    let norm = l2_norm(u);
    if norm == 0.0 || !norm.is_finite() {
        return Err(QuantError::DegenerateUpdate);
    }
    Ok(u.iter().map(|x| x / norm).collect())
}

// Normalized vectors can overshoot 1 by rounding.
const RANGE_SLACK: f64 = 1e-9;

/// Two-point stochastic rounding of `q*x`: rounds up with probability equal
/// to the fractional part, so the expectation is exactly `q*x`.
pub fn quantize<R: RngCore + ?Sized>(u: &[f64], q: u64, rng: &mut R) -> Result<QuantizedUpdate, QuantError> {
    if q == 0 {
        return Err(QuantError::BadQ);
    }
    let qf = q as f64;
    let mut coords = Vec::with_capacity(u.len());
    for &x in u {
        if !x.is_finite() || x.abs() > 1.0 + RANGE_SLACK {
            return Err(QuantError::OutOfRange(x));
        }
        let scaled = (x.clamp(-1.0, 1.0)) * qf;
        let lo = scaled.floor();
        let frac = scaled - lo;
        let up = frac > 0.0 && rng.gen::<f64>() < frac;
        let v = lo as i64 + up as i64;
        coords.push(v.clamp(-(q as i64), q as i64));
    }
    Ok(QuantizedUpdate { coords, q })
}

pub fn embed(u: &QuantizedUpdate, m: &Modulus) -> Result<Vec<FieldElement>, FieldError> {
    embed_ints(&u.coords, m)
}

pub fn embed_ints(coords: &[i64], m: &Modulus) -> Result<Vec<FieldElement>, FieldError> {
    coords.iter().map(|&c| m.phi(c)).collect()
}

/// Inverse of [`embed`]; `None` when a coordinate does not fit an `i64`.
pub fn deembed(v: &[FieldElement]) -> Option<Vec<i64>> {
    v.iter().map(|e| e.phi_inv_i64()).collect()
}

/// `(num / den) / q`.
pub fn dequantize_ratio(num: &BigInt, den: &BigUint, q: u64) -> Result<f64, QuantError> {
    if den.is_zero() {
        return Err(QuantError::ZeroDenominator);
    }
    if num.is_zero() {
        return Ok(0.0);
    }
    let n = num.to_f64().unwrap_or(f64::NAN);
    let d = den.to_f64().unwrap_or(f64::NAN);
    if n.is_finite() && d.is_finite() {
        return Ok(n / d / q as f64);
    }
    // Scale both down together when they overflow an f64.
    let shift = num.bits().max(den.bits()).saturating_sub(1000);
    let n = (num >> shift).to_f64().unwrap_or(0.0);
    let d = (den >> shift).to_f64().unwrap_or(f64::NAN);
    Ok(n / d / q as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn normalize_examples() {
        let v = normalize(&[3.0, 4.0]).unwrap();
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
        assert_eq!(normalize(&[0.0, 0.0]), Err(QuantError::DegenerateUpdate));
        let unit = [0.6, 0.8];
        let again = normalize(&unit).unwrap();
        assert!((again[0] - 0.6).abs() < 1e-15 && (again[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn quantize_examples() {
        let mut rng = substream(1, &[]);
        for _ in 0..100 {
            assert_eq!(quantize(&[0.5], 2, &mut rng).unwrap().coords, vec![1]);
        }
        assert_eq!(quantize(&[1.0], 1024, &mut rng).unwrap().coords, vec![1024]);
        assert_eq!(quantize(&[-1.0], 1024, &mut rng).unwrap().coords, vec![-1024]);
        assert!(matches!(quantize(&[1.5], 2, &mut rng), Err(QuantError::OutOfRange(_))));

        let ones = (0..20000)
            .map(|_| quantize(&[0.25], 2, &mut rng).unwrap().coords[0])
            .inspect(|&v| assert!(v == 0 || v == 1))
            .filter(|&v| v == 1)
            .count();
        assert!((ones as f64 / 20000.0 - 0.5).abs() < 0.015);
    }

    #[test]
    fn embed_examples() {
        let m = Modulus::new_u64(11).unwrap();
        let u = QuantizedUpdate {
            coords: vec![-1, 0, 1],
            q: 1,
        };
        let e = embed(&u, &m).unwrap();
        let vals: Vec<_> = e.iter().map(|x| x.to_u64().unwrap()).collect();
        assert_eq!(vals, vec![10, 0, 1]);
        assert_eq!(deembed(&e).unwrap(), u.coords);
        let z = embed(&QuantizedUpdate::zeros(4, 3), &m).unwrap();
        assert!(z.iter().all(|x| x.is_zero()));
    }

    #[test]
    fn dequantize_ratio_examples() {
        let one = BigUint::from(1u32);
        assert_eq!(dequantize_ratio(&BigInt::from(7), &one, 7).unwrap(), 1.0);
        assert_eq!(dequantize_ratio(&BigInt::from(0), &one, 7).unwrap(), 0.0);
        assert_eq!(dequantize_ratio(&BigInt::from(512), &one, 1024).unwrap(), 0.5);
        assert_eq!(
            dequantize_ratio(&BigInt::from(1), &BigUint::from(0u32), 2),
            Err(QuantError::ZeroDenominator)
        );
        let huge = BigInt::from(3) << 2000;
        let den = BigUint::from(2u32) << 2000;
        assert!((dequantize_ratio(&huge, &den, 1).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn quantizer_is_unbiased() {
        // Off-grid lattice points x = (4j + 1) / (4q).
        let q = 8u64;
        let mut rng = substream(2, &[]);
        let draws = 100_000;
        for j in [-8i64, -3, 0, 2, 7] {
            let x = (4 * j + 1) as f64 / (4 * q) as f64;
            let sum: i64 = (0..draws).map(|_| quantize(&[x], q, &mut rng).unwrap().coords[0]).sum();
            let mean = sum as f64 / draws as f64;
            let frac = 0.25f64;
            let se = (frac * (1.0 - frac) / draws as f64).sqrt();
            assert!((mean - x * q as f64).abs() < 4.0 * se, "x={x} mean={mean}");
        }
    }

    fn norm_pass_rate(d: usize, q: u64, eps: f64, seed: u64) -> usize {
        let mut rng = substream(seed, &[]);
        let mut pass = 0;
        for _ in 0..1000 {
            let raw: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let u = quantize(&normalize(&raw).unwrap(), q, &mut rng).unwrap();
            let q2 = (q * q) as f64;
            if ((u.norm_sq() as f64) - q2).abs() < eps * q2 {
                pass += 1;
            }
        }
        pass
    }

    #[test]
    fn norm_concentration() {
        // The deviation of the squared norm has standard deviation near
        // 0.8 q, so the eps * q^2 window covers ~3 sigma from q = 128 on.
        for (d, q) in [(20, 128), (50, 128), (20, 256), (500, 256)] {
            let pass = norm_pass_rate(d, q, 0.02, 3);
            assert!(pass >= 990, "d={d} q={q}: {pass}");
        }
    }
}
