//! Shamir `(n, t)` sharing over the evaluation points `1..=n`.

use rand::RngCore;

use crate::field::{FieldElement, Modulus};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SssError {
    #[error("not enough evaluation points: modulus must exceed n = {0}")]
    NotEnoughPoints(usize),
    #[error("threshold t = {t} must be below n = {n}")]
    BadThreshold { n: usize, t: usize },
    #[error("insufficient shares: need {need}, got {got}")]
    InsufficientShares { need: usize, got: usize },
    #[error("duplicate share index {0}")]
    DuplicateIndex(usize),
    #[error("share index mismatch: expected {expected}, got {got}")]
    IndexMismatch { expected: usize, got: usize },
    #[error("{coeffs} coefficients for {shares} shares")]
    LengthMismatch { coeffs: usize, shares: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueShare {
    /// Party id, also the evaluation point.
    pub index: usize,
    pub value: FieldElement,
}

fn check_points(m: &Modulus, n: usize, t: usize) -> Result<(), SssError> {
    if t >= n {
        return Err(SssError::BadThreshold { n, t });
    }
    if m.p() <= &num_bigint::BigUint::from(n) {
        return Err(SssError::NotEnoughPoints(n));
    }
    Ok(())
}

pub fn share<R: RngCore + ?Sized>(
    secret: &FieldElement,
    n: usize,
    t: usize,
    rng: &mut R,
) -> Result<Vec<ValueShare>, SssError> {
    let m = secret.modulus();
    let coeffs: Vec<FieldElement> = (0..t).map(|_| m.random(rng)).collect();
    share_with_coeffs(secret, &coeffs, n)
}

/// Shares with the given higher-order coefficients (`coeffs[j]` multiplies
/// `x^(j+1)`), so the degree is `coeffs.len()`.
pub fn share_with_coeffs(
    secret: &FieldElement,
    coeffs: &[FieldElement],
    n: usize,
) -> Result<Vec<ValueShare>, SssError> {
    let m = secret.modulus();
    check_points(m, n, coeffs.len())?;
    Ok((1..=n)
        .map(|i| ValueShare {
            index: i,
            value: eval_poly(secret, coeffs, &m.from_u64(i as u64)),
        })
        .collect())
}

fn eval_poly(c0: &FieldElement, coeffs: &[FieldElement], x: &FieldElement) -> FieldElement {
    let mut acc = c0.modulus().zero();
    for c in coeffs.iter().rev() {
        acc = &(&acc + c) * x;
    }
    acc + c0
}

/// Lagrange coefficients for evaluating at zero from the given points.
pub fn lagrange_at_zero(points: &[usize], m: &Modulus) -> Result<Vec<FieldElement>, SssError> {
    for (a, &i) in points.iter().enumerate() {
        if points[..a].contains(&i) {
            return Err(SssError::DuplicateIndex(i));
        }
    }
    let xs: Vec<FieldElement> = points.iter().map(|&i| m.from_u64(i as u64)).collect();
    let mut out = Vec::with_capacity(xs.len());
    for (a, xa) in xs.iter().enumerate() {
        let mut num = m.one();
        let mut den = m.one();
        for (b, xb) in xs.iter().enumerate() {
            if a != b {
                num *= xb;
                den *= xb - xa;
            }
        }
        let inv = den.inverse().map_err(|_| SssError::DuplicateIndex(points[a]))?;
        out.push(num * inv);
    }
    Ok(out)
}

/// Interpolates the secret from the first `t + 1` shares.
pub fn reconstruct(shares: &[ValueShare], t: usize) -> Result<FieldElement, SssError> {
    if shares.len() < t + 1 {
        return Err(SssError::InsufficientShares {
            need: t + 1,
            got: shares.len(),
        });
    }
    let used = &shares[..t + 1];
    let m = used[0].value.modulus();
    let points: Vec<usize> = used.iter().map(|s| s.index).collect();
    let lambdas = lagrange_at_zero(&points, m)?;
    Ok(used
        .iter()
        .zip(&lambdas)
        .fold(m.zero(), |acc, (s, l)| acc + &s.value * l))
}

/// `sum_j coeffs[j] * shares[j] + offset`, all at party `index`.
pub fn lincomb(
    index: usize,
    shares: &[ValueShare],
    coeffs: &[FieldElement],
    offset: &FieldElement,
) -> Result<ValueShare, SssError> {
    if shares.len() != coeffs.len() {
        return Err(SssError::LengthMismatch {
            coeffs: coeffs.len(),
            shares: shares.len(),
        });
    }
    let mut value = offset.clone();
    for (s, c) in shares.iter().zip(coeffs) {
        if s.index != index {
            return Err(SssError::IndexMismatch {
                expected: index,
                got: s.index,
            });
        }
        value += &s.value * c;
    }
    Ok(ValueShare { index, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use std::collections::HashMap;

    fn f11() -> Modulus {
        Modulus::new_u64(11).unwrap()
    }

    #[test]
    fn constant_polynomial_when_t_is_zero() {
        let m = f11();
        let s = m.from_u64(4);
        let shares = share(&s, 5, 0, &mut substream(0, &[])).unwrap();
        assert!(shares.iter().all(|sh| sh.value == s));
        assert_eq!(reconstruct(&shares[2..3], 0).unwrap(), s);
    }

    #[test]
    fn fixed_coefficient_example() {
        let m = f11();
        let shares = share_with_coeffs(&m.from_u64(5), &[m.from_u64(2)], 3).unwrap();
        let vals: Vec<_> = shares.iter().map(|s| s.value.to_u64().unwrap()).collect();
        assert_eq!(vals, vec![7, 9, 0]);
        for pair in [[0, 1], [0, 2], [1, 2]] {
            let sub = vec![shares[pair[0]].clone(), shares[pair[1]].clone()];
            assert_eq!(reconstruct(&sub, 1).unwrap().to_u64(), Some(5));
        }
        assert!(matches!(
            reconstruct(&shares[..1], 1),
            Err(SssError::InsufficientShares { need: 2, got: 1 })
        ));
        let dup = vec![shares[0].clone(), shares[0].clone()];
        assert_eq!(reconstruct(&dup, 1), Err(SssError::DuplicateIndex(1)));
    }

    #[test]
    fn rejects_too_small_field() {
        let m = Modulus::new_u64(3).unwrap();
        assert_eq!(
            share(&m.one(), 3, 1, &mut substream(0, &[])),
            Err(SssError::NotEnoughPoints(3))
        );
    }

    #[test]
    fn round_trip_random_secrets() {
        let m = Modulus::new_u64((1 << 61) - 1).unwrap();
        let mut rng = substream(1, &[]);
        for _ in 0..1000 {
            let s = m.random(&mut rng);
            let shares = share(&s, 7, 3, &mut rng).unwrap();
            assert_eq!(reconstruct(&shares, 3).unwrap(), s);
            assert_eq!(reconstruct(&shares[3..], 3).unwrap(), s);
        }
    }

    #[test]
    fn any_subset_reconstructs_identically() {
        let m = Modulus::new_u64(101).unwrap();
        let mut rng = substream(2, &[]);
        let s = m.from_u64(42);
        let shares = share(&s, 6, 2, &mut rng).unwrap();
        for a in 0..6 {
            for b in a + 1..6 {
                for c in b + 1..6 {
                    let sub = vec![shares[a].clone(), shares[b].clone(), shares[c].clone()];
                    assert_eq!(reconstruct(&sub, 2).unwrap(), s);
                }
            }
        }
    }

    #[test]
    fn lincomb_examples() {
        let m = Modulus::new_u64(101).unwrap();
        let mut rng = substream(3, &[]);
        let (x, y) = (m.from_u64(10), m.from_u64(20));
        let xs = share(&x, 4, 1, &mut rng).unwrap();
        let ys = share(&y, 4, 1, &mut rng).unwrap();
        let zero = m.zero();
        let sum: Vec<_> = (0..4)
            .map(|i| lincomb(i + 1, &[xs[i].clone(), ys[i].clone()], &[m.one(), m.one()], &zero).unwrap())
            .collect();
        assert_eq!(reconstruct(&sum, 1).unwrap().to_u64(), Some(30));
        let scaled: Vec<_> = (0..4)
            .map(|i| lincomb(i + 1, &[xs[i].clone()], &[m.from_u64(3)], &zero).unwrap())
            .collect();
        assert_eq!(reconstruct(&scaled, 1).unwrap().to_u64(), Some(30));
        let constant: Vec<_> = (1..=4).map(|i| lincomb(i, &[], &[], &m.from_u64(9)).unwrap()).collect();
        assert_eq!(reconstruct(&constant[2..], 1).unwrap().to_u64(), Some(9));
        assert!(matches!(
            lincomb(2, &[xs[0].clone()], &[m.one()], &zero),
            Err(SssError::IndexMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn single_share_privacy_exhaustive() {
        // p = 11, n = 4, t = 1: over all linear coefficients, each share is
        // uniform for every secret.
        let m = f11();
        for secret in 0..11 {
            let mut counts: Vec<HashMap<u64, usize>> = vec![HashMap::new(); 4];
            for a in 0..11 {
                let shares = share_with_coeffs(&m.from_u64(secret), &[m.from_u64(a)], 4).unwrap();
                for (i, s) in shares.iter().enumerate() {
                    *counts[i].entry(s.value.to_u64().unwrap()).or_default() += 1;
                }
            }
            for c in counts {
                assert_eq!(c.len(), 11);
                assert!(c.values().all(|&v| v == 1));
            }
        }
    }

    #[test]
    fn homomorphism_random() {
        let m = Modulus::new_u64((1 << 61) - 1).unwrap();
        let mut rng = substream(4, &[]);
        for _ in 0..100 {
            let secrets: Vec<_> = (0..3).map(|_| m.random(&mut rng)).collect();
            let coeffs: Vec<_> = (0..3).map(|_| m.random(&mut rng)).collect();
            let off = m.random(&mut rng);
            let sh: Vec<Vec<ValueShare>> = secrets.iter().map(|s| share(s, 5, 2, &mut rng).unwrap()).collect();
            let comb: Vec<_> = (0..5)
                .map(|i| {
                    let at_i: Vec<_> = sh.iter().map(|v| v[i].clone()).collect();
                    lincomb(i + 1, &at_i, &coeffs, &off).unwrap()
                })
                .collect();
            let want = secrets.iter().zip(&coeffs).fold(off.clone(), |a, (s, c)| a + s * c);
            assert_eq!(reconstruct(&comb[1..4], 2).unwrap(), want);
        }
    }
}
