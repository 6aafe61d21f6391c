//! One-time information-theoretic MACs on shares: `tag = alpha * x[i] + beta`.
//!
//! Tags are linear in the share and the key, so any public linear map applied
//! to tagged shares yields a tagged share under the same linear map of keys.
//! Public constants are added to the value only; the verifier tracks them as
//! an offset.

use rand::RngCore;

use crate::field::{FieldElement, Modulus};
use crate::sss::{self, SssError, ValueShare};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacKey {
    pub alpha: FieldElement,
    pub beta: FieldElement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedShare {
    pub share: ValueShare,
    pub tag: FieldElement,
}

impl TaggedShare {
    pub fn index(&self) -> usize {
        self.share.index
    }

    pub fn value(&self) -> &FieldElement {
        &self.share.value
    }
}

/// Verifier-side mirror of a tagged share: the combined `beta` it must carry
/// and the public offset that was added to its value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyShare {
    pub beta: FieldElement,
    pub offset: FieldElement,
}

impl KeyShare {
    pub fn fresh(beta: FieldElement) -> Self {
        let offset = beta.modulus().zero();
        Self { beta, offset }
    }
}

/// Nonzero global MAC key; zero is resampled since it makes tags independent
/// of values.
pub fn sample_alpha<R: RngCore + ?Sized>(m: &Modulus, rng: &mut R) -> FieldElement {
    m.random_nonzero(rng)
}

pub fn tag(share: ValueShare, key: &MacKey) -> TaggedShare {
    let t = &key.alpha * &share.value + &key.beta;
    TaggedShare { share, tag: t }
}

/// True iff `tag == alpha * (value - offset) + beta`.
pub fn verify(
    value: &FieldElement,
    claimed_tag: &FieldElement,
    alpha: &FieldElement,
    combined_beta: &FieldElement,
    public_offset: &FieldElement,
) -> bool {
    *claimed_tag == alpha * &(value - public_offset) + combined_beta
}

pub fn verify_share(s: &TaggedShare, alpha: &FieldElement, key: &KeyShare) -> bool {
    verify(&s.share.value, &s.tag, alpha, &key.beta, &key.offset)
}

/// `sum_j coeffs[j] * tagged[j] + offset`; the offset reaches the value only.
pub fn lincomb_tagged(
    index: usize,
    tagged: &[TaggedShare],
    coeffs: &[FieldElement],
    offset: &FieldElement,
) -> Result<TaggedShare, SssError> {
    let values: Vec<ValueShare> = tagged.iter().map(|t| t.share.clone()).collect();
    let share = sss::lincomb(index, &values, coeffs, offset)?;
    let tag = tagged
        .iter()
        .zip(coeffs)
        .fold(offset.modulus().zero(), |acc, (t, c)| acc + &t.tag * c);
    Ok(TaggedShare { share, tag })
}

/// Linear operations shared by plain, tagged and key-mirror shares, so one
/// program can drive all three.
pub trait ShareAlgebra: Clone {
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn scale(&self, c: &FieldElement) -> Self;
    fn add_public(&self, c: &FieldElement) -> Self;
}

impl ShareAlgebra for FieldElement {
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn scale(&self, c: &FieldElement) -> Self {
        self * c
    }
    fn add_public(&self, c: &FieldElement) -> Self {
        self + c
    }
}

impl ShareAlgebra for ValueShare {
    fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.index, other.index);
        ValueShare {
            index: self.index,
            value: &self.value + &other.value,
        }
    }
    fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.index, other.index);
        ValueShare {
            index: self.index,
            value: &self.value - &other.value,
        }
    }
    fn scale(&self, c: &FieldElement) -> Self {
        ValueShare {
            index: self.index,
            value: &self.value * c,
        }
    }
    fn add_public(&self, c: &FieldElement) -> Self {
        ValueShare {
            index: self.index,
            value: &self.value + c,
        }
    }
}

impl ShareAlgebra for TaggedShare {
    fn add(&self, other: &Self) -> Self {
        TaggedShare {
            share: self.share.add(&other.share),
            tag: &self.tag + &other.tag,
        }
    }
    fn sub(&self, other: &Self) -> Self {
        TaggedShare {
            share: self.share.sub(&other.share),
            tag: &self.tag - &other.tag,
        }
    }
    fn scale(&self, c: &FieldElement) -> Self {
        TaggedShare {
            share: self.share.scale(c),
            tag: &self.tag * c,
        }
    }
    fn add_public(&self, c: &FieldElement) -> Self {
        TaggedShare {
            share: self.share.add_public(c),
            tag: self.tag.clone(),
        }
    }
}

impl ShareAlgebra for KeyShare {
    fn add(&self, other: &Self) -> Self {
        KeyShare {
            beta: &self.beta + &other.beta,
            offset: &self.offset + &other.offset,
        }
    }
    fn sub(&self, other: &Self) -> Self {
        KeyShare {
            beta: &self.beta - &other.beta,
            offset: &self.offset - &other.offset,
        }
    }
    fn scale(&self, c: &FieldElement) -> Self {
        KeyShare {
            beta: &self.beta * c,
            offset: &self.offset * c,
        }
    }
    fn add_public(&self, c: &FieldElement) -> Self {
        KeyShare {
            beta: self.beta.clone(),
            offset: &self.offset + c,
        }
    }
}

/// One party's part of a dealt secret.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dealt {
    pub share: TaggedShare,
    pub beta: FieldElement,
}

/// Source of preprocessed material: uniform secrets and tagged sharings.
/// `comp` and `coord` name which part of the current object is drawn.
pub trait Dealer {
    fn modulus(&self) -> &Modulus;
    fn parties(&self) -> usize;
    fn uniform(&mut self, comp: u8, coord: usize) -> FieldElement;
    /// Returns one entry per party, in party order.
    fn deal(&mut self, comp: u8, coord: usize, secret: &FieldElement) -> Vec<Dealt>;
}

/// A [`Dealer`] over a plain RNG stream.
pub struct RngDealer<'a, R: RngCore + ?Sized> {
    pub n: usize,
    pub t: usize,
    pub alpha: FieldElement,
    pub rng: &'a mut R,
}

impl<R: RngCore + ?Sized> Dealer for RngDealer<'_, R> {
    fn modulus(&self) -> &Modulus {
        self.alpha.modulus()
    }

    fn parties(&self) -> usize {
        self.n
    }

    fn uniform(&mut self, _comp: u8, _coord: usize) -> FieldElement {
        self.alpha.modulus().random(self.rng)
    }

    fn deal(&mut self, _comp: u8, _coord: usize, secret: &FieldElement) -> Vec<Dealt> {
        let m = self.alpha.modulus().clone();
        let shares = sss::share(secret, self.n, self.t, self.rng).expect("dealer parameters");
        shares
            .into_iter()
            .map(|s| {
                let beta = m.random(self.rng);
                let key = MacKey {
                    alpha: self.alpha.clone(),
                    beta: beta.clone(),
                };
                Dealt {
                    share: tag(s, &key),
                    beta,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn f(p: u64) -> Modulus {
        Modulus::new_u64(p).unwrap()
    }

    #[test]
    fn tag_examples() {
        let m = f(101);
        let key = MacKey {
            alpha: m.from_u64(3),
            beta: m.from_u64(5),
        };
        let t = tag(
            ValueShare {
                index: 1,
                value: m.from_u64(7),
            },
            &key,
        );
        assert_eq!(t.tag.to_u64(), Some(26));
        let z = tag(
            ValueShare {
                index: 1,
                value: m.zero(),
            },
            &key,
        );
        assert_eq!(z.tag, key.beta);
        let degenerate = MacKey {
            alpha: m.zero(),
            beta: m.from_u64(5),
        };
        for v in 0..5 {
            let t = tag(
                ValueShare {
                    index: 1,
                    value: m.from_u64(v),
                },
                &degenerate,
            );
            assert_eq!(t.tag.to_u64(), Some(5));
        }
        let mut rng = substream(0, &[]);
        for _ in 0..200 {
            assert!(!sample_alpha(&f(3), &mut rng).is_zero());
        }
    }

    #[test]
    fn lincomb_tagged_examples() {
        let m = f(101);
        let alpha = m.from_u64(17);
        let k1 = MacKey {
            alpha: alpha.clone(),
            beta: m.from_u64(4),
        };
        let k2 = MacKey {
            alpha: alpha.clone(),
            beta: m.from_u64(9),
        };
        let a = tag(
            ValueShare {
                index: 2,
                value: m.from_u64(30),
            },
            &k1,
        );
        let b = tag(
            ValueShare {
                index: 2,
                value: m.from_u64(40),
            },
            &k2,
        );
        let zero = m.zero();

        let same = lincomb_tagged(2, std::slice::from_ref(&a), &[m.one()], &zero).unwrap();
        assert_eq!(same, a);

        let sum = lincomb_tagged(2, &[a.clone(), b.clone()], &[m.one(), m.one()], &zero).unwrap();
        assert!(verify(sum.value(), &sum.tag, &alpha, &(&k1.beta + &k2.beta), &zero));

        let c = m.from_u64(6);
        let scaled = lincomb_tagged(2, std::slice::from_ref(&a), std::slice::from_ref(&c), &zero).unwrap();
        assert_eq!(scaled.tag, &alpha * &(a.value() * &c) + &(&c * &k1.beta));

        let off = m.from_u64(55);
        let shifted = lincomb_tagged(2, std::slice::from_ref(&a), &[m.one()], &off).unwrap();
        assert_eq!(shifted.tag, a.tag);
        assert!(verify(shifted.value(), &shifted.tag, &alpha, &k1.beta, &off));
        assert!(!verify(shifted.value(), &shifted.tag, &alpha, &k1.beta, &zero));
    }

    #[test]
    fn tampered_value_needs_exact_tag_shift() {
        // Value shifted by +1: exactly one of the p tag guesses passes.
        let m = f(101);
        let alpha = m.from_u64(23);
        let key = MacKey {
            alpha: alpha.clone(),
            beta: m.from_u64(71),
        };
        let honest = tag(
            ValueShare {
                index: 1,
                value: m.from_u64(12),
            },
            &key,
        );
        let forged_value = honest.value() + &m.one();
        let passing = (0..101)
            .filter(|&g| verify(&forged_value, &m.from_u64(g), &alpha, &key.beta, &m.zero()))
            .count();
        assert_eq!(passing, 1);
    }

    #[test]
    fn soundness_over_alpha_exhaustive() {
        // For a fixed tamper (dv, dt) with dv != 0, the fraction of keys alpha
        // accepting the forgery is exactly 1/p.
        for p in [11u64, 101] {
            let m = f(p);
            for dv in 1..p {
                for dt in [0, 1, p - 1] {
                    let accepted = (1..p)
                        .chain(std::iter::once(0))
                        .filter(|&a| {
                            let alpha = m.from_u64(a);
                            let key = MacKey {
                                alpha: alpha.clone(),
                                beta: m.from_u64(3),
                            };
                            let s = tag(
                                ValueShare {
                                    index: 1,
                                    value: m.from_u64(5),
                                },
                                &key,
                            );
                            let v = s.value() + &m.from_u64(dv);
                            let t = &s.tag + &m.from_u64(dt);
                            verify(&v, &t, &alpha, &key.beta, &m.zero())
                        })
                        .count();
                    assert_eq!(accepted, 1, "p={p} dv={dv} dt={dt}");
                }
            }
        }
    }

    #[test]
    fn key_mirror_tracks_linear_program() {
        let m = Modulus::new_u64((1 << 61) - 1).unwrap();
        let mut rng = substream(5, &[]);
        let alpha = sample_alpha(&m, &mut rng);
        for _ in 0..1000 {
            let mut dealer = RngDealer {
                n: 4,
                t: 1,
                alpha: alpha.clone(),
                rng: &mut rng,
            };
            let x = dealer.deal(0, 0, &m.from_u64(10));
            let y = dealer.deal(0, 0, &m.from_u64(20));
            let c = m.random(&mut rng);
            let off = m.random(&mut rng);
            for i in 0..4 {
                let s = x[i].share.scale(&c).sub(&y[i].share).add_public(&off);
                let k = KeyShare::fresh(x[i].beta.clone())
                    .scale(&c)
                    .sub(&KeyShare::fresh(y[i].beta.clone()))
                    .add_public(&off);
                assert!(verify_share(&s, &alpha, &k));
            }
        }
    }

    #[test]
    fn dealt_shares_reconstruct() {
        let m = f(101);
        let mut rng = substream(6, &[]);
        let alpha = sample_alpha(&m, &mut rng);
        let mut dealer = RngDealer {
            n: 5,
            t: 2,
            alpha: alpha.clone(),
            rng: &mut rng,
        };
        let dealt = dealer.deal(0, 0, &m.from_u64(77));
        let shares: Vec<_> = dealt.iter().map(|d| d.share.share.clone()).collect();
        assert_eq!(sss::reconstruct(&shares, 2).unwrap().to_u64(), Some(77));
        for d in &dealt {
            assert!(verify_share(&d.share, &alpha, &KeyShare::fresh(d.beta.clone())));
        }
    }
}
