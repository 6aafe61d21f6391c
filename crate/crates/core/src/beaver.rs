//! Beaver triples in three shapes and the masked-opening multiplication.
//!
//! Every function is generic over [`ShareAlgebra`], so the same code runs on
//! tagged shares (parties), key mirrors (verifier) and plain field elements
//! (plaintext shadow).

use crate::field::FieldElement;
use crate::mac::{Dealer, ShareAlgebra, TaggedShare};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BeaverError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("triple slot {0} already consumed")]
    Consumed(usize),
    #[error("preprocessing exhausted: no triple slot {0}")]
    Exhausted(usize),
}

/// `c = a * b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScalarTriple<S> {
    pub a: S,
    pub b: S,
    pub c: S,
}

/// `w = <o, v>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DotTriple<S> {
    pub o: Vec<S>,
    pub v: Vec<S>,
    pub w: S,
}

/// `z = x * y` coordinate-wise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScalarVecTriple<S> {
    pub x: S,
    pub y: Vec<S>,
    pub z: Vec<S>,
}

impl<S> ScalarTriple<S> {
    pub fn map<T>(&self, mut f: impl FnMut(&S) -> T) -> ScalarTriple<T> {
        ScalarTriple {
            a: f(&self.a),
            b: f(&self.b),
            c: f(&self.c),
        }
    }
}

impl<S> DotTriple<S> {
    pub fn map<T>(&self, mut f: impl FnMut(&S) -> T) -> DotTriple<T> {
        DotTriple {
            o: self.o.iter().map(&mut f).collect(),
            v: self.v.iter().map(&mut f).collect(),
            w: f(&self.w),
        }
    }

    pub fn dim(&self) -> usize {
        self.o.len()
    }
}

impl<S> ScalarVecTriple<S> {
    pub fn map<T>(&self, mut f: impl FnMut(&S) -> T) -> ScalarVecTriple<T> {
        ScalarVecTriple {
            x: f(&self.x),
            y: self.y.iter().map(&mut f).collect(),
            z: self.z.iter().map(&mut f).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }
}

/// Per-party output of triple generation: the party's tagged shares and the
/// betas the verifier needs for them.
pub type Dealt<T> = Vec<(T, T)>;

fn deal_vec<D: Dealer + ?Sized>(
    dealer: &mut D,
    comp: u8,
    secrets: &[FieldElement],
) -> Vec<Vec<(TaggedShare, FieldElement)>> {
    let n = dealer.parties();
    let mut per_party: Vec<Vec<(TaggedShare, FieldElement)>> = vec![Vec::with_capacity(secrets.len()); n];
    for (coord, s) in secrets.iter().enumerate() {
        for (i, d) in dealer.deal(comp, coord, s).into_iter().enumerate() {
            per_party[i].push((d.share, d.beta));
        }
    }
    per_party
}

fn split<A, B>(v: Vec<(A, B)>) -> (Vec<A>, Vec<B>) {
    v.into_iter().unzip()
}

pub fn gen_scalar<D: Dealer + ?Sized>(dealer: &mut D) -> Vec<(ScalarTriple<TaggedShare>, ScalarTriple<FieldElement>)> {
    let a = dealer.uniform(0, 0);
    let b = dealer.uniform(1, 0);
    let c = &a * &b;
    let sa = deal_vec(dealer, 0, &[a]);
    let sb = deal_vec(dealer, 1, &[b]);
    let sc = deal_vec(dealer, 2, &[c]);
    sa.into_iter()
        .zip(sb)
        .zip(sc)
        .map(|((mut a, mut b), mut c)| {
            let (a, ba) = a.remove(0);
            let (b, bb) = b.remove(0);
            let (c, bc) = c.remove(0);
            (ScalarTriple { a, b, c }, ScalarTriple { a: ba, b: bb, c: bc })
        })
        .collect()
}

pub fn gen_dot<D: Dealer + ?Sized>(dealer: &mut D, d: usize) -> Vec<(DotTriple<TaggedShare>, DotTriple<FieldElement>)> {
    let o: Vec<_> = (0..d).map(|j| dealer.uniform(0, j)).collect();
    let v: Vec<_> = (0..d).map(|j| dealer.uniform(1, j)).collect();
    gen_dot_from(dealer, o, v)
}

/// Dot triple with caller-chosen `o` and `v`.
pub fn gen_dot_from<D: Dealer + ?Sized>(
    dealer: &mut D,
    o: Vec<FieldElement>,
    v: Vec<FieldElement>,
) -> Vec<(DotTriple<TaggedShare>, DotTriple<FieldElement>)> {
    let m = dealer.modulus().clone();
    let w = o.iter().zip(&v).fold(m.zero(), |acc, (a, b)| acc + a * b);
    let so = deal_vec(dealer, 0, &o);
    let sv = deal_vec(dealer, 1, &v);
    let sw = deal_vec(dealer, 2, &[w]);
    so.into_iter()
        .zip(sv)
        .zip(sw)
        .map(|((o, v), mut w)| {
            let (o, bo) = split(o);
            let (v, bv) = split(v);
            let (w, bw) = w.remove(0);
            (DotTriple { o, v, w }, DotTriple { o: bo, v: bv, w: bw })
        })
        .collect()
}

pub fn gen_scalar_vec<D: Dealer + ?Sized>(
    dealer: &mut D,
    d: usize,
) -> Vec<(ScalarVecTriple<TaggedShare>, ScalarVecTriple<FieldElement>)> {
    let x = dealer.uniform(0, 0);
    let y: Vec<_> = (0..d).map(|j| dealer.uniform(1, j)).collect();
    let z: Vec<_> = y.iter().map(|yj| &x * yj).collect();
    let sx = deal_vec(dealer, 0, &[x]);
    let sy = deal_vec(dealer, 1, &y);
    let sz = deal_vec(dealer, 2, &z);
    sx.into_iter()
        .zip(sy)
        .zip(sz)
        .map(|((mut x, y), z)| {
            let (x, bx) = x.remove(0);
            let (y, by) = split(y);
            let (z, bz) = split(z);
            (ScalarVecTriple { x, y, z }, ScalarVecTriple { x: bx, y: by, z: bz })
        })
        .collect()
}

/// Shares of the masked differences `d = x - a`, `e = y - b`, to be opened.
pub fn mul_open<S: ShareAlgebra>(x: &S, y: &S, t: &ScalarTriple<S>) -> (S, S) {
    (x.sub(&t.a), y.sub(&t.b))
}

/// `c + d*b + e*a + d*e`, a share of `x * y`.
pub fn mul_complete<S: ShareAlgebra>(t: &ScalarTriple<S>, d: &FieldElement, e: &FieldElement) -> S {
    t.c.add(&t.b.scale(d)).add(&t.a.scale(e)).add_public(&(d * e))
}

pub fn dot_open<S: ShareAlgebra>(x: &[S], y: &[S], t: &DotTriple<S>) -> Result<(Vec<S>, Vec<S>), BeaverError> {
    check_dim(x.len(), t.dim())?;
    check_dim(y.len(), t.dim())?;
    let d = x.iter().zip(&t.o).map(|(a, b)| a.sub(b)).collect();
    let e = y.iter().zip(&t.v).map(|(a, b)| a.sub(b)).collect();
    Ok((d, e))
}

/// `w + <d, v> + <e, o> + <d, e>`, a share of `<x, y>`.
pub fn dot_complete<S: ShareAlgebra>(
    t: &DotTriple<S>,
    d: &[FieldElement],
    e: &[FieldElement],
) -> Result<S, BeaverError> {
    check_dim(d.len(), t.dim())?;
    check_dim(e.len(), t.dim())?;
    let mut acc = t.w.clone();
    let mut public = t.w_zero(d);
    for j in 0..d.len() {
        acc = acc.add(&t.v[j].scale(&d[j])).add(&t.o[j].scale(&e[j]));
        public += &d[j] * &e[j];
    }
    Ok(acc.add_public(&public))
}

impl<S> DotTriple<S> {
    fn w_zero(&self, d: &[FieldElement]) -> FieldElement {
        d.first().map(|x| x.modulus().zero()).expect("non-empty opening")
    }
}

pub fn scalar_vec_open<S: ShareAlgebra>(s: &S, v: &[S], t: &ScalarVecTriple<S>) -> Result<(S, Vec<S>), BeaverError> {
    check_dim(v.len(), t.dim())?;
    let d = s.sub(&t.x);
    let e = v.iter().zip(&t.y).map(|(a, b)| a.sub(b)).collect();
    Ok((d, e))
}

/// `z_j + d*y_j + e_j*x + d*e_j`, shares of `s * v`.
pub fn scalar_vec_complete<S: ShareAlgebra>(
    t: &ScalarVecTriple<S>,
    d: &FieldElement,
    e: &[FieldElement],
) -> Result<Vec<S>, BeaverError> {
    check_dim(e.len(), t.dim())?;
    Ok((0..e.len())
        .map(|j| {
            t.z[j]
                .add(&t.y[j].scale(d))
                .add(&t.x.scale(&e[j]))
                .add_public(&(d * &e[j]))
        })
        .collect())
}

fn check_dim(a: usize, b: usize) -> Result<(), BeaverError> {
    if a == b {
        Ok(())
    } else {
        Err(BeaverError::DimensionMismatch(a, b))
    }
}

/// Fixed set of one-time slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pool<T> {
    slots: Vec<Option<T>>,
}

impl<T> Pool<T> {
    /// Rebuilds a pool with some slots already consumed (`None`).
    pub fn from_slots(slots: Vec<Option<T>>) -> Self {
        Self { slots }
    }

    pub fn new(items: Vec<T>) -> Self {
        Self {
            slots: items.into_iter().map(Some).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn remaining(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn consumed(&self) -> usize {
        self.len() - self.remaining()
    }

    pub fn take(&mut self, slot: usize) -> Result<T, BeaverError> {
        match self.slots.get_mut(slot) {
            None => Err(BeaverError::Exhausted(slot)),
            Some(s) => s.take().ok_or(BeaverError::Consumed(slot)),
        }
    }

    pub fn get(&self, slot: usize) -> Option<&T> {
        self.slots.get(slot).and_then(|s| s.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = Option<&T>> {
        self.slots.iter().map(|s| s.as_ref())
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Pool<U> {
        Pool {
            slots: self.slots.iter().map(|s| s.as_ref().map(&mut f)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TripleBudget {
    pub dot: usize,
    pub scalar: usize,
    pub scalar_vec: usize,
}

/// Triples consumed by one iteration with `n` clients and a degree-`k`
/// discriminator.
pub fn triple_budget(n: usize, k: usize, _d: usize) -> TripleBudget {
    TripleBudget {
        dot: n,
        scalar: k.saturating_sub(1) * n + 1,
        scalar_vec: n + 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Modulus;
    use crate::mac::{sample_alpha, verify_share, KeyShare, RngDealer};
    use crate::rng::substream;
    use crate::sss::{self, ValueShare};
    use rand_chacha::ChaCha20Rng;

    fn open(shares: &[TaggedShare], t: usize) -> FieldElement {
        let v: Vec<ValueShare> = shares.iter().map(|s| s.share.clone()).collect();
        sss::reconstruct(&v, t).unwrap()
    }

    struct Fixture {
        m: Modulus,
        alpha: FieldElement,
        rng: ChaCha20Rng,
        n: usize,
        t: usize,
    }

    impl Fixture {
        fn new(p: u64, n: usize, t: usize, seed: u64) -> Self {
            let m = Modulus::new_u64(p).unwrap();
            let mut rng = substream(seed, &[]);
            let alpha = sample_alpha(&m, &mut rng);
            Self { m, alpha, rng, n, t }
        }

        fn dealer(&mut self) -> RngDealer<'_, ChaCha20Rng> {
            RngDealer {
                n: self.n,
                t: self.t,
                alpha: self.alpha.clone(),
                rng: &mut self.rng,
            }
        }

        fn share(&mut self, v: &FieldElement) -> Vec<(TaggedShare, FieldElement)> {
            self.dealer()
                .deal(0, 0, v)
                .into_iter()
                .map(|d| (d.share, d.beta))
                .collect()
        }
    }

    #[test]
    fn scalar_triples_hold_and_verify() {
        let mut fx = Fixture::new((1 << 61) - 1, 5, 2, 1);
        for _ in 0..100 {
            let parts = gen_scalar(&mut fx.dealer());
            let a: Vec<_> = parts.iter().map(|p| p.0.a.clone()).collect();
            let b: Vec<_> = parts.iter().map(|p| p.0.b.clone()).collect();
            let c: Vec<_> = parts.iter().map(|p| p.0.c.clone()).collect();
            assert_eq!(open(&c, 2), open(&a, 2) * open(&b, 2));
            for (s, k) in &parts {
                assert!(verify_share(&s.c, &fx.alpha, &KeyShare::fresh(k.c.clone())));
            }
        }
    }

    #[test]
    fn dot_triple_example() {
        let mut fx = Fixture::new(101, 3, 1, 2);
        let m = fx.m.clone();
        let parts = gen_dot_from(
            &mut fx.dealer(),
            vec![m.from_u64(1), m.from_u64(2)],
            vec![m.from_u64(3), m.from_u64(4)],
        );
        let w: Vec<_> = parts.iter().map(|p| p.0.w.clone()).collect();
        assert_eq!(open(&w, 1).to_u64(), Some(11));
    }

    #[test]
    fn plaintext_shadow_example() {
        let m = Modulus::new_u64(101).unwrap();
        let e = |v| m.from_u64(v);
        let t = ScalarTriple {
            a: e(1),
            b: e(2),
            c: e(2),
        };
        let (d, ee) = mul_open(&e(3), &e(4), &t);
        assert_eq!((d.to_u64(), ee.to_u64()), (Some(2), Some(2)));
        assert_eq!(mul_complete(&t, &d, &ee).to_u64(), Some(12));
    }

    fn run_mul(fx: &mut Fixture, x: &FieldElement, y: &FieldElement) -> FieldElement {
        let (n, t) = (fx.n, fx.t);
        let xs = fx.share(x);
        let ys = fx.share(y);
        let parts = gen_scalar(&mut fx.dealer());
        let opened: Vec<(TaggedShare, TaggedShare)> =
            (0..n).map(|i| mul_open(&xs[i].0, &ys[i].0, &parts[i].0)).collect();
        let dsh: Vec<_> = opened.iter().map(|o| o.0.clone()).collect();
        let esh: Vec<_> = opened.iter().map(|o| o.1.clone()).collect();
        let (d, e) = (open(&dsh, t), open(&esh, t));
        let z: Vec<TaggedShare> = (0..n).map(|i| mul_complete(&parts[i].0, &d, &e)).collect();
        // Verifier mirror and degree preservation.
        for i in 0..n {
            let kx = KeyShare::fresh(xs[i].1.clone());
            let ky = KeyShare::fresh(ys[i].1.clone());
            let kt = parts[i].1.map(|b| KeyShare::fresh(b.clone()));
            let (kd, ke) = mul_open(&kx, &ky, &kt);
            assert!(verify_share(&dsh[i], &fx.alpha, &kd));
            assert!(verify_share(&esh[i], &fx.alpha, &ke));
            let kz = mul_complete(&kt, &d, &e);
            assert!(verify_share(&z[i], &fx.alpha, &kz));
        }
        let full = open(&z, t);
        for start in 0..=(n - t - 1) {
            assert_eq!(open(&z[start..start + t + 1], t), full);
        }
        full
    }

    #[test]
    fn scalar_multiplication_matches_plaintext() {
        let mut fx = Fixture::new((1 << 61) - 1, 5, 2, 3);
        let m = fx.m.clone();
        for _ in 0..1000 {
            let x = m.random(&mut fx.rng);
            let y = m.random(&mut fx.rng);
            assert_eq!(run_mul(&mut fx, &x, &y), &x * &y);
        }
        let y = m.from_u64(99);
        assert!(run_mul(&mut fx, &m.zero(), &y).is_zero());
        let mut fx = Fixture::new(101, 3, 1, 4);
        let x = fx.m.from_u64(5);
        let a = run_mul(&mut fx, &x, &x);
        assert_eq!(a.to_u64(), Some(25));
    }

    #[test]
    fn opening_equal_to_mask_is_zero() {
        let m = Modulus::new_u64(101).unwrap();
        let t = ScalarTriple {
            a: m.from_u64(7),
            b: m.from_u64(8),
            c: m.from_u64(56),
        };
        let (d, _) = mul_open(&m.from_u64(7), &m.from_u64(1), &t);
        assert!(d.is_zero());
    }

    #[test]
    fn dot_and_scalar_vec_match_plaintext() {
        let mut fx = Fixture::new((1 << 61) - 1, 4, 1, 5);
        let m = fx.m.clone();
        let (n, t, dim) = (4, 1, 6);
        for _ in 0..1000 {
            let x: Vec<_> = (0..dim).map(|_| m.random(&mut fx.rng)).collect();
            let y: Vec<_> = (0..dim).map(|_| m.random(&mut fx.rng)).collect();
            let s = m.random(&mut fx.rng);
            let xs: Vec<_> = x.iter().map(|v| fx.share(v)).collect();
            let ys: Vec<_> = y.iter().map(|v| fx.share(v)).collect();
            let ss = fx.share(&s);
            let at = |sh: &Vec<Vec<(TaggedShare, FieldElement)>>, i: usize| -> Vec<TaggedShare> {
                sh.iter().map(|c| c[i].0.clone()).collect()
            };

            let dot = gen_dot(&mut fx.dealer(), dim);
            let opens: Vec<_> = (0..n)
                .map(|i| dot_open(&at(&xs, i), &at(&ys, i), &dot[i].0).unwrap())
                .collect();
            let d: Vec<_> = (0..dim)
                .map(|j| open(&opens.iter().map(|o| o.0[j].clone()).collect::<Vec<_>>(), t))
                .collect();
            let e: Vec<_> = (0..dim)
                .map(|j| open(&opens.iter().map(|o| o.1[j].clone()).collect::<Vec<_>>(), t))
                .collect();
            let res: Vec<_> = (0..n).map(|i| dot_complete(&dot[i].0, &d, &e).unwrap()).collect();
            let want = x.iter().zip(&y).fold(m.zero(), |a, (p, q)| a + p * q);
            assert_eq!(open(&res, t), want);

            let sv = gen_scalar_vec(&mut fx.dealer(), dim);
            let opens: Vec<_> = (0..n)
                .map(|i| scalar_vec_open(&ss[i].0, &at(&ys, i), &sv[i].0).unwrap())
                .collect();
            let dd = open(&opens.iter().map(|o| o.0.clone()).collect::<Vec<_>>(), t);
            let ee: Vec<_> = (0..dim)
                .map(|j| open(&opens.iter().map(|o| o.1[j].clone()).collect::<Vec<_>>(), t))
                .collect();
            let res: Vec<Vec<TaggedShare>> = (0..n)
                .map(|i| scalar_vec_complete(&sv[i].0, &dd, &ee).unwrap())
                .collect();
            for j in 0..dim {
                let col: Vec<_> = res.iter().map(|r| r[j].clone()).collect();
                assert_eq!(open(&col, t), &s * &y[j]);
                for i in 0..n {
                    let ks = KeyShare::fresh(ss[i].1.clone());
                    let ky: Vec<_> = ys.iter().map(|c| KeyShare::fresh(c[i].1.clone())).collect();
                    let kt = sv[i].1.map(|b| KeyShare::fresh(b.clone()));
                    let _ = scalar_vec_open(&ks, &ky, &kt).unwrap();
                    let kres = scalar_vec_complete(&kt, &dd, &ee).unwrap();
                    assert!(verify_share(&res[i][j], &fx.alpha, &kres[j]));
                }
            }
        }
    }

    #[test]
    fn shape_degeneracies() {
        let m = Modulus::new_u64(101).unwrap();
        let e = |v| m.from_u64(v);
        // Openings zero when inputs equal the masks.
        let t = DotTriple {
            o: vec![e(2), e(3)],
            v: vec![e(5), e(7)],
            w: e(31),
        };
        let (d, ee) = dot_open(&t.o, &t.v, &t).unwrap();
        assert!(d.iter().chain(&ee).all(|x| x.is_zero()));
        assert_eq!(dot_complete(&t, &d, &ee).unwrap(), e(31));
        // d = 1 reduces to the scalar form.
        let one = DotTriple {
            o: vec![e(4)],
            v: vec![e(6)],
            w: e(24),
        };
        let st = ScalarTriple {
            a: e(4),
            b: e(6),
            c: e(24),
        };
        let (dd, de) = dot_open(&[e(9)], &[e(10)], &one).unwrap();
        let (sd, se) = mul_open(&e(9), &e(10), &st);
        assert_eq!(dot_complete(&one, &dd, &de).unwrap(), mul_complete(&st, &sd, &se));
        // s = 1 and s = 0 through the scalar-vector shape.
        let sv = ScalarVecTriple {
            x: e(3),
            y: vec![e(1), e(2)],
            z: vec![e(3), e(6)],
        };
        for (s, want) in [(1u64, vec![e(8), e(9)]), (0, vec![e(0), e(0)])] {
            let (d, ee) = scalar_vec_open(&e(s), &[e(8), e(9)], &sv).unwrap();
            let ee: Vec<_> = ee;
            assert_eq!(scalar_vec_complete(&sv, &d, &ee).unwrap(), want);
        }
        assert_eq!(
            dot_open(&[e(1)], &[e(1), e(2)], &t),
            Err(BeaverError::DimensionMismatch(1, 2))
        );
    }

    #[test]
    fn opening_privacy_exhaustive() {
        // p = 11: over uniform (a, b), the opened pair (x - a, y - b) is
        // uniform for every (x, y).
        let m = Modulus::new_u64(11).unwrap();
        for x in 0..11 {
            for y in 0..11 {
                let mut seen = std::collections::HashSet::new();
                for a in 0..11 {
                    for b in 0..11 {
                        let t = ScalarTriple {
                            a: m.from_u64(a),
                            b: m.from_u64(b),
                            c: m.from_u64(a * b),
                        };
                        let (d, e) = mul_open(&m.from_u64(x), &m.from_u64(y), &t);
                        seen.insert((d.to_u64().unwrap(), e.to_u64().unwrap()));
                    }
                }
                assert_eq!(seen.len(), 121);
            }
        }
    }

    #[test]
    fn triple_shares_privacy_exhaustive() {
        // p = 11, n = 3, t = 1: one party's shares (a[i], b[i], c[i]) over all
        // triple values and sharing coefficients are uniform on F^3.
        let m = Modulus::new_u64(11).unwrap();
        let mut counts = std::collections::HashMap::new();
        for a in 0..11u64 {
            for b in 0..11u64 {
                for ca in 0..11u64 {
                    for cb in 0..11u64 {
                        for cc in 0..11u64 {
                            let sh = |s: u64, c: u64| {
                                sss::share_with_coeffs(&m.from_u64(s), &[m.from_u64(c)], 3).unwrap()[0]
                                    .value
                                    .to_u64()
                                    .unwrap()
                            };
                            let key = (sh(a, ca), sh(b, cb), sh(a * b % 11, cc));
                            *counts.entry(key).or_insert(0usize) += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(counts.len(), 1331);
        assert!(counts.values().all(|&c| c == 121));
    }

    #[test]
    fn pool_is_one_time() {
        let mut p = Pool::new(vec![1, 2]);
        assert_eq!(p.take(0), Ok(1));
        assert_eq!(p.take(0), Err(BeaverError::Consumed(0)));
        assert_eq!(p.take(2), Err(BeaverError::Exhausted(2)));
        assert_eq!((p.remaining(), p.consumed()), (1, 1));
        assert_eq!(p.map(|x| x * 10).get(1), Some(&20));
    }

    #[test]
    fn budget_examples() {
        assert_eq!(
            triple_budget(10, 3, 50),
            TripleBudget {
                dot: 10,
                scalar: 21,
                scalar_vec: 11
            }
        );
        assert_eq!(
            triple_budget(1, 1, 5),
            TripleBudget {
                dot: 1,
                scalar: 1,
                scalar_vec: 2
            }
        );
    }
}
