//! Trust-score polynomial: real evaluation, fixed-point encoding and the
//! multiplication schedule evaluated on shares.
//!
//! With integer cosine `C = <u0, ui>` (about `q^2 * cos`), the encoded score
//! is `TS = sum_p hhat_p * C^p * q^(2(k-p))`, which carries the common scale
//! `q_c * q^(2k)`.

use num_bigint::{BigInt, BigUint};
use num_traits::{Signed, ToPrimitive};

use crate::field::RatioBounds;

/// Published degree-3 ReLU surrogate, ascending powers.
pub const DEFAULT_COEFFS: [f64; 4] = [0.01363545, 0.1860353, 0.56578977, 0.46897526];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiscriminatorError {
    #[error("discriminator needs at least one finite coefficient")]
    BadCoefficients,
    #[error("coefficient scale must be at least 1")]
    BadScale,
    #[error("encoded coefficient {0} does not fit an i64")]
    Overflow(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorPoly {
    /// `coeffs[p]` multiplies `x^p`.
    coeffs: Vec<f64>,
}

pub fn default_h() -> DiscriminatorPoly {
    DiscriminatorPoly {
        coeffs: DEFAULT_COEFFS.to_vec(),
    }
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

impl DiscriminatorPoly {
    pub fn new(coeffs: Vec<f64>) -> Result<Self, DiscriminatorError> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(DiscriminatorError::BadCoefficients);
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (p, c)| acc * x + p as f64 * c)
    }

    /// Rounds `h_p * coeff_scale` to integers.
    pub fn encode(&self, coeff_scale: u64, q: u64) -> Result<EncodedPoly, DiscriminatorError> {
        if coeff_scale == 0 || q == 0 {
            return Err(DiscriminatorError::BadScale);
        }
        let hat = self
            .coeffs
            .iter()
            .map(|c| {
                let v = (c * coeff_scale as f64).round();
                if v.abs() < 9.0e18 {
                    Ok(v as i64)
                } else {
                    Err(DiscriminatorError::Overflow(*c))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(EncodedPoly { hat, coeff_scale, q })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPoly {
    pub hat: Vec<i64>,
    pub coeff_scale: u64,
    pub q: u64,
}

impl EncodedPoly {
    pub fn degree(&self) -> usize {
        self.hat.len() - 1
    }

    /// Public multipliers `hhat_p * q^(2(k-p))` for `C^p`.
    pub fn weights(&self) -> Vec<BigInt> {
        let k = self.degree() as u32;
        let q2 = BigInt::from(self.q).pow(2);
        self.hat
            .iter()
            .enumerate()
            .map(|(p, &h)| BigInt::from(h) * q2.pow(k - p as u32))
            .collect()
    }

    /// `q_c * q^(2k)`.
    pub fn ts_scale(&self) -> BigUint {
        BigUint::from(self.coeff_scale) * BigUint::from(self.q).pow(2 * self.degree() as u32)
    }

    /// Integer trust score for an integer cosine.
    pub fn ts_plain(&self, c: &BigInt) -> BigInt {
        let w = self.weights();
        let mut acc = BigInt::from(0);
        for wp in w.iter().rev() {
            acc = acc * c + wp;
        }
        acc
    }

    /// Real value represented by [`EncodedPoly::ts_plain`].
    pub fn ts_real(&self, c: &BigInt) -> f64 {
        ratio_f64(&self.ts_plain(c), &self.ts_scale())
    }

    /// Largest `|C|` admitted by the norm check with tolerance `eps`.
    pub fn cosine_cap(&self, eps: f64) -> BigUint {
        let q2 = (self.q as f64) * (self.q as f64);
        BigUint::from(((1.0 + eps) * q2).ceil() as u128)
    }

    /// Bounds on the reduced aggregate fraction `Sigma2_j / Sigma1` over `n`
    /// clients that all pass the norm check.
    pub fn ratio_bounds(&self, n: usize, eps: f64) -> RatioBounds {
        let cap = self.cosine_cap(eps);
        let k = self.degree() as u32;
        let q2 = BigUint::from(self.q).pow(2);
        let mut per_client = BigUint::from(0u32);
        for (p, &h) in self.hat.iter().enumerate() {
            let p = p as u32;
            per_client += BigUint::from(h.unsigned_abs()) * cap.pow(p) * q2.pow(k - p);
        }
        let den = per_client * BigUint::from(n.max(1));
        // Coordinates are bounded by the norm, itself at most sqrt(cap).
        let coord = cap.sqrt() + 1u32;
        RatioBounds { num: &den * coord, den }
    }
}

pub(crate) fn ratio_f64(num: &BigInt, den: &BigUint) -> f64 {
    let shift = num.bits().max(den.bits()).saturating_sub(900);
    let n = (num.abs() >> shift).to_f64().unwrap_or(f64::NAN);
    let d = (den >> shift).to_f64().unwrap_or(f64::NAN);
    if num.is_negative() {
        -n / d
    } else {
        n / d
    }
}

/// One Beaver multiplication `C^power = C^(power-1) * C` for a client.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PowerStep {
    pub client: usize,
    pub power: usize,
    pub slot: usize,
}

/// Multiplications needed to evaluate trust scores on shares.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TsSchedule {
    pub degree: usize,
    /// Grouped by power so that one opening round serves every client.
    pub powers: Vec<Vec<PowerStep>>,
    /// `(client, scalar-vector slot)` for `TS_i * u_i`.
    pub scaled_updates: Vec<(usize, usize)>,
}

impl TsSchedule {
    pub fn scalar_mults(&self) -> usize {
        self.powers.iter().map(|r| r.len()).sum()
    }
}

/// Slot of the scalar triple for `C^power` of client `client` (0-based).
pub fn power_slot(client: usize, power: usize, degree: usize) -> usize {
    client * degree.saturating_sub(1) + (power - 2)
}

/// Schedule for the given active clients (0-based ids).
pub fn ts_program(degree: usize, active: &[usize]) -> TsSchedule {
    let powers = (2..=degree)
        .map(|power| {
            active
                .iter()
                .map(|&client| PowerStep {
                    client,
                    power,
                    slot: power_slot(client, power, degree),
                })
                .collect()
        })
        .collect();
    TsSchedule {
        degree,
        powers,
        scaled_updates: active.iter().map(|&c| (c, c)).collect(),
    }
}
