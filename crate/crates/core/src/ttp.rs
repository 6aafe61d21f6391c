//! One-shot trusted setup: per-iteration masks, the aggregate mask `lambda`,
//! Beaver triples and every MAC key.
//!
//! All randomness is requested through [`TtpRandomness`] with a label naming
//! exactly which value is drawn. Production runs use a plain sequential
//! stream; tests can pin individual labels.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::beaver::{
    gen_dot, gen_scalar, gen_scalar_vec, triple_budget, DotTriple, Pool, ScalarTriple, ScalarVecTriple, TripleBudget,
};
use crate::codec::{CodecError, Reader, Writer};
use crate::field::{FieldElement, Modulus};
use crate::mac::{self, Dealer, Dealt, KeyShare, MacKey, TaggedShare};
use crate::rng::substream;
use crate::sss::{self, ValueShare};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TtpError {
    #[error("preprocessing exhausted: iteration {iteration} beyond horizon {horizon}")]
    PreprocessingExhausted { iteration: usize, horizon: usize },
    #[error("pad reuse: material for iteration {0} already taken")]
    PadReuse(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("bundle decode: {0}")]
    Codec(#[from] CodecError),
}

/// What a TTP draw is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Object {
    Alpha,
    /// Mask `r_owner`, owner 1-based.
    Mask {
        owner: usize,
    },
    Lambda,
    Dot {
        slot: usize,
    },
    Scalar {
        slot: usize,
    },
    ScalarVec {
        slot: usize,
    },
}

/// Which value of an object is drawn. `comp` picks the triple component
/// (0, 1, 2 for the two factors and the product).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Part {
    Secret { comp: u8, coord: usize },
    Coef { comp: u8, coord: usize, degree: usize },
    Beta { comp: u8, coord: usize, party: usize },
    AlphaRetry(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Draw {
    pub iteration: usize,
    pub object: Object,
    pub part: Part,
}

pub trait TtpRandomness {
    fn draw(&mut self, m: &Modulus, label: &Draw) -> FieldElement;
}

/// Sequential ChaCha stream; labels only fix the draw order.
pub struct SeqRandomness(ChaCha20Rng);

impl SeqRandomness {
    pub fn new(seed: u64) -> Self {
        Self(substream(seed, &[0x7770]))
    }

    pub fn from_rng(rng: ChaCha20Rng) -> Self {
        Self(rng)
    }
}

impl TtpRandomness for SeqRandomness {
    fn draw(&mut self, m: &Modulus, _label: &Draw) -> FieldElement {
        m.random(&mut self.0)
    }
}

/// Each label maps to an independent value derived from `(seed, label)`,
/// unless pinned in `overrides`. Draw order does not matter.
#[derive(Debug, Clone, Default)]
pub struct LabeledRandomness {
    pub seed: u64,
    pub overrides: HashMap<Draw, u64>,
}

impl LabeledRandomness {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            overrides: HashMap::new(),
        }
    }
}

impl TtpRandomness for LabeledRandomness {
    fn draw(&mut self, m: &Modulus, label: &Draw) -> FieldElement {
        if let Some(&v) = self.overrides.get(label) {
            return m.from_u64(v);
        }
        let mut h = DefaultHasher::new();
        label.hash(&mut h);
        let mut rng = substream(self.seed, &[h.finish()]);
        m.random(&mut rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TtpParams {
    pub n: usize,
    pub t: usize,
    pub d: usize,
    pub k: usize,
    pub iterations: usize,
}

impl TtpParams {
    pub fn budget(&self) -> TripleBudget {
        triple_budget(self.n, self.k, self.d)
    }
}

/// One iteration's correlated randomness for one party, in share form `S`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationMaterial<S> {
    /// `masks[j]` holds this party's shares of `r_(j+1)`.
    pub masks: Vec<Vec<S>>,
    pub lambda: S,
    pub dot: Pool<DotTriple<S>>,
    pub scalar: Pool<ScalarTriple<S>>,
    pub scalar_vec: Pool<ScalarVecTriple<S>>,
}

impl<S> IterationMaterial<S> {
    pub fn map<T>(&self, f: impl Fn(&S) -> T) -> IterationMaterial<T> {
        IterationMaterial {
            masks: self.masks.iter().map(|v| v.iter().map(&f).collect()).collect(),
            lambda: f(&self.lambda),
            dot: self.dot.map(|t| t.map(&f)),
            scalar: self.scalar.map(|t| t.map(&f)),
            scalar_vec: self.scalar_vec.map(|t| t.map(&f)),
        }
    }
}

/// Everything client `id` receives from the TTP.
#[derive(Debug, Clone)]
pub struct ClientBundle {
    pub id: usize,
    pub params: TtpParams,
    modulus: Modulus,
    own_masks: Vec<Vec<FieldElement>>,
    iterations: Vec<Option<IterationMaterial<TaggedShare>>>,
}

impl ClientBundle {
    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn horizon(&self) -> usize {
        self.iterations.len()
    }

    pub fn own_mask(&self, g: usize) -> Option<&[FieldElement]> {
        self.own_masks.get(g).map(|v| v.as_slice())
    }

    pub fn material(&self, g: usize) -> Option<&IterationMaterial<TaggedShare>> {
        self.iterations.get(g).and_then(|m| m.as_ref())
    }

    pub fn material_mut(&mut self, g: usize) -> Option<&mut IterationMaterial<TaggedShare>> {
        self.iterations.get_mut(g).and_then(|m| m.as_mut())
    }

    /// Hands out iteration `g` once; the plain mask and shares are then gone
    /// from the bundle.
    pub fn take_iteration(
        &mut self,
        g: usize,
    ) -> Result<(Vec<FieldElement>, IterationMaterial<TaggedShare>), TtpError> {
        let horizon = self.horizon();
        let slot = self
            .iterations
            .get_mut(g)
            .ok_or(TtpError::PreprocessingExhausted { iteration: g, horizon })?;
        let material = slot.take().ok_or(TtpError::PadReuse(g))?;
        Ok((std::mem::take(&mut self.own_masks[g]), material))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.id as u32);
        for v in [
            self.params.n,
            self.params.t,
            self.params.d,
            self.params.k,
            self.params.iterations,
        ] {
            w.u32(v as u32);
        }
        w.bytes(&self.modulus.p().to_bytes_be());
        w.len_prefix(self.own_masks.len());
        for m in &self.own_masks {
            w.fes(m);
        }
        w.len_prefix(self.iterations.len());
        for it in &self.iterations {
            match it {
                None => {
                    w.u8(0);
                }
                Some(mat) => {
                    w.u8(1);
                    write_material(&mut w, mat);
                }
            }
        }
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TtpError> {
        let mut r = Reader::new(bytes);
        let id = r.u32()? as usize;
        let mut p = [0usize; 5];
        for v in p.iter_mut() {
            *v = r.u32()? as usize;
        }
        let params = TtpParams {
            n: p[0],
            t: p[1],
            d: p[2],
            k: p[3],
            iterations: p[4],
        };
        let modulus = Modulus::new(num_bigint::BigUint::from_bytes_be(r.bytes()?))
            .map_err(|e| CodecError::Invalid(e.to_string()))?;
        let n_masks = r.len_prefix()?;
        let own_masks = (0..n_masks).map(|_| r.fes(&modulus)).collect::<Result<_, _>>()?;
        let n_it = r.len_prefix()?;
        let mut iterations = Vec::with_capacity(n_it);
        for _ in 0..n_it {
            iterations.push(match r.u8()? {
                0 => None,
                1 => Some(read_material(&mut r, &modulus, id)?),
                b => return Err(CodecError::Invalid(format!("presence byte {b}")).into()),
            });
        }
        if !r.is_done() {
            return Err(CodecError::Invalid("trailing bytes".into()).into());
        }
        Ok(Self {
            id,
            params,
            modulus,
            own_masks,
            iterations,
        })
    }
}

fn write_tagged(w: &mut Writer, v: &[TaggedShare]) {
    w.len_prefix(v.len());
    for s in v {
        w.fe(&s.share.value).fe(&s.tag);
    }
}

fn read_tagged(r: &mut Reader, m: &Modulus, id: usize) -> Result<Vec<TaggedShare>, CodecError> {
    let n = r.len_prefix()?;
    (0..n)
        .map(|_| {
            let value = r.fe(m)?;
            let tag = r.fe(m)?;
            Ok(TaggedShare {
                share: ValueShare { index: id, value },
                tag,
            })
        })
        .collect()
}

fn one(v: Vec<TaggedShare>) -> Result<TaggedShare, CodecError> {
    let mut v = v;
    if v.len() != 1 {
        return Err(CodecError::Invalid("expected one share".into()));
    }
    Ok(v.remove(0))
}

fn write_pool<T>(w: &mut Writer, pool: &Pool<T>, mut f: impl FnMut(&mut Writer, &T)) {
    w.len_prefix(pool.len());
    for slot in pool.iter() {
        match slot {
            None => {
                w.u8(0);
            }
            Some(t) => {
                w.u8(1);
                f(w, t);
            }
        }
    }
}

fn read_pool<T>(
    r: &mut Reader,
    mut f: impl FnMut(&mut Reader) -> Result<T, CodecError>,
) -> Result<Pool<T>, CodecError> {
    let n = r.len_prefix()?;
    let mut slots = Vec::with_capacity(n);
    for _ in 0..n {
        slots.push(match r.u8()? {
            0 => None,
            _ => Some(f(r)?),
        });
    }
    Ok(Pool::from_slots(slots))
}

fn write_material(w: &mut Writer, mat: &IterationMaterial<TaggedShare>) {
    w.len_prefix(mat.masks.len());
    for m in &mat.masks {
        write_tagged(w, m);
    }
    write_tagged(w, std::slice::from_ref(&mat.lambda));
    write_pool(w, &mat.dot, |w, t| {
        write_tagged(w, &t.o);
        write_tagged(w, &t.v);
        write_tagged(w, std::slice::from_ref(&t.w));
    });
    write_pool(w, &mat.scalar, |w, t| {
        write_tagged(w, &[t.a.clone(), t.b.clone(), t.c.clone()]);
    });
    write_pool(w, &mat.scalar_vec, |w, t| {
        write_tagged(w, std::slice::from_ref(&t.x));
        write_tagged(w, &t.y);
        write_tagged(w, &t.z);
    });
}

fn read_material(r: &mut Reader, m: &Modulus, id: usize) -> Result<IterationMaterial<TaggedShare>, CodecError> {
    let n_masks = r.len_prefix()?;
    let masks = (0..n_masks).map(|_| read_tagged(r, m, id)).collect::<Result<_, _>>()?;
    let lambda = one(read_tagged(r, m, id)?)?;
    let dot = read_pool(r, |r| {
        Ok(DotTriple {
            o: read_tagged(r, m, id)?,
            v: read_tagged(r, m, id)?,
            w: one(read_tagged(r, m, id)?)?,
        })
    })?;
    let scalar = read_pool(r, |r| {
        let mut v = read_tagged(r, m, id)?;
        if v.len() != 3 {
            return Err(CodecError::Invalid("scalar triple".into()));
        }
        let c = v.pop().expect("3");
        let b = v.pop().expect("3");
        let a = v.pop().expect("3");
        Ok(ScalarTriple { a, b, c })
    })?;
    let scalar_vec = read_pool(r, |r| {
        Ok(ScalarVecTriple {
            x: one(read_tagged(r, m, id)?)?,
            y: read_tagged(r, m, id)?,
            z: read_tagged(r, m, id)?,
        })
    })?;
    Ok(IterationMaterial {
        masks,
        lambda,
        dot,
        scalar,
        scalar_vec,
    })
}

/// Plaintext of the masks and `lambda`, kept only for test assertions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digest {
    pub masks: Vec<Vec<FieldElement>>,
    pub lambda: FieldElement,
}

/// The federator's copy of every MAC key.
#[derive(Debug, Clone)]
pub struct FederatorKeys {
    pub alpha: FieldElement,
    pub params: TtpParams,
    /// First iteration covered by `betas`.
    pub first: usize,
    /// `betas[g - first][i]` mirrors party `i + 1`'s material for iteration `g`.
    pub betas: Vec<Vec<IterationMaterial<FieldElement>>>,
    pub digests: Option<Vec<Digest>>,
}

impl FederatorKeys {
    pub fn modulus(&self) -> &Modulus {
        self.alpha.modulus()
    }

    /// One past the last iteration with keys.
    pub fn horizon(&self) -> usize {
        self.first + self.betas.len()
    }

    pub fn betas_at(&self, g: usize) -> Option<&Vec<IterationMaterial<FieldElement>>> {
        g.checked_sub(self.first).and_then(|i| self.betas.get(i))
    }

    /// Key mirror of party `party` (1-based) for iteration `g`.
    pub fn party_keys(&self, g: usize, party: usize) -> Result<IterationMaterial<KeyShare>, TtpError> {
        let it = self.betas_at(g).ok_or(TtpError::PreprocessingExhausted {
            iteration: g,
            horizon: self.horizon(),
        })?;
        let mat = it
            .get(party - 1)
            .ok_or_else(|| TtpError::InvalidParams(format!("no party {party}")))?;
        Ok(mat.map(|b| KeyShare::fresh(b.clone())))
    }
}

struct LabeledDealer<'a, R: TtpRandomness> {
    m: &'a Modulus,
    n: usize,
    t: usize,
    alpha: &'a FieldElement,
    rnd: &'a mut R,
    iteration: usize,
    object: Object,
}

impl<R: TtpRandomness> LabeledDealer<'_, R> {
    fn draw(&mut self, part: Part) -> FieldElement {
        self.rnd.draw(
            self.m,
            &Draw {
                iteration: self.iteration,
                object: self.object,
                part,
            },
        )
    }
}

impl<R: TtpRandomness> Dealer for LabeledDealer<'_, R> {
    fn modulus(&self) -> &Modulus {
        self.m
    }

    fn parties(&self) -> usize {
        self.n
    }

    fn uniform(&mut self, comp: u8, coord: usize) -> FieldElement {
        self.draw(Part::Secret { comp, coord })
    }

    fn deal(&mut self, comp: u8, coord: usize, secret: &FieldElement) -> Vec<Dealt> {
        let coeffs: Vec<FieldElement> = (1..=self.t)
            .map(|degree| self.draw(Part::Coef { comp, coord, degree }))
            .collect();
        let shares = sss::share_with_coeffs(secret, &coeffs, self.n).expect("validated parameters");
        shares
            .into_iter()
            .map(|s| {
                let beta = self.draw(Part::Beta {
                    comp,
                    coord,
                    party: s.index,
                });
                let key = MacKey {
                    alpha: self.alpha.clone(),
                    beta: beta.clone(),
                };
                Dealt {
                    share: mac::tag(s, &key),
                    beta,
                }
            })
            .collect()
    }
}

fn draw_alpha<R: TtpRandomness>(m: &Modulus, rnd: &mut R) -> FieldElement {
    for retry in 0.. {
        let a = rnd.draw(
            m,
            &Draw {
                iteration: 0,
                object: Object::Alpha,
                part: Part::AlphaRetry(retry),
            },
        );
        if !a.is_zero() {
            return a;
        }
    }
    unreachable!()
}

/// Generates all preprocessing for `params.iterations` iterations. The
/// randomness source is consumed, so it cannot be reused afterwards.
pub fn initialize<R: TtpRandomness>(
    params: TtpParams,
    m: &Modulus,
    rnd: R,
    keep_digests: bool,
) -> Result<(Vec<ClientBundle>, FederatorKeys), TtpError> {
    initialize_range(params, m, rnd, keep_digests, 0..params.iterations)
}

/// Preprocessing for the iterations in `window` only; earlier iterations
/// appear consumed. With [`LabeledRandomness`] every window holds exactly
/// what a one-shot [`initialize`] would have produced for it.
pub fn initialize_range<R: TtpRandomness>(
    params: TtpParams,
    m: &Modulus,
    mut rnd: R,
    keep_digests: bool,
    window: Range<usize>,
) -> Result<(Vec<ClientBundle>, FederatorKeys), TtpError> {
    let TtpParams { n, t, d, k, iterations } = params;
    if window.end > iterations || window.start > window.end {
        return Err(TtpError::InvalidParams(format!(
            "window {window:?} outside horizon {iterations}"
        )));
    }
    if n == 0 || t >= n || d == 0 || k == 0 {
        return Err(TtpError::InvalidParams(format!(
            "need n >= 1, t < n, d >= 1, k >= 1; got n={n} t={t} d={d} k={k}"
        )));
    }
    if m.p() <= &num_bigint::BigUint::from(n) {
        return Err(TtpError::InvalidParams(format!("modulus must exceed n = {n}")));
    }
    let budget = params.budget();
    let alpha = draw_alpha(m, &mut rnd);

    let first = window.start;
    let mut client_iters: Vec<Vec<Option<IterationMaterial<TaggedShare>>>> =
        (0..n).map(|_| (0..first).map(|_| None).collect()).collect();
    let mut own_masks: Vec<Vec<Vec<FieldElement>>> = vec![vec![Vec::new(); first]; n];
    let mut betas = Vec::with_capacity(window.len());
    let mut digests = Vec::new();

    for g in window {
        let mut dealer = LabeledDealer {
            m,
            n,
            t,
            alpha: &alpha,
            rnd: &mut rnd,
            iteration: g,
            object: Object::Alpha,
        };

        // masks[i][j]: party i's shares of r_(j+1)
        let mut masks: Vec<Vec<Vec<Dealt>>> = (0..n).map(|_| Vec::with_capacity(n)).collect();
        let mut plain_masks = Vec::with_capacity(n);
        for owner in 1..=n {
            dealer.object = Object::Mask { owner };
            let r: Vec<FieldElement> = (0..d).map(|c| dealer.uniform(0, c)).collect();
            let mut per_party: Vec<Vec<Dealt>> = (0..n).map(|_| Vec::with_capacity(d)).collect();
            for (c, rc) in r.iter().enumerate() {
                for (i, dealt) in dealer.deal(0, c, rc).into_iter().enumerate() {
                    per_party[i].push(dealt);
                }
            }
            for (i, v) in per_party.into_iter().enumerate() {
                masks[i].push(v);
            }
            own_masks[owner - 1].push(r.clone());
            plain_masks.push(r);
        }

        dealer.object = Object::Lambda;
        let lambda = dealer.uniform(0, 0);
        let lambda_shares = dealer.deal(0, 0, &lambda);

        let mut dots: Vec<Vec<_>> = vec![Vec::new(); n];
        for slot in 0..budget.dot {
            dealer.object = Object::Dot { slot };
            for (i, tr) in gen_dot(&mut dealer, d).into_iter().enumerate() {
                dots[i].push(tr);
            }
        }
        let mut scalars: Vec<Vec<_>> = vec![Vec::new(); n];
        for slot in 0..budget.scalar {
            dealer.object = Object::Scalar { slot };
            for (i, tr) in gen_scalar(&mut dealer).into_iter().enumerate() {
                scalars[i].push(tr);
            }
        }
        let mut svs: Vec<Vec<_>> = vec![Vec::new(); n];
        for slot in 0..budget.scalar_vec {
            dealer.object = Object::ScalarVec { slot };
            for (i, tr) in gen_scalar_vec(&mut dealer, d).into_iter().enumerate() {
                svs[i].push(tr);
            }
        }

        let mut iter_betas = Vec::with_capacity(n);
        let parts = masks.into_iter().zip(lambda_shares).zip(dots).zip(scalars).zip(svs);
        for (i, ((((mk, lam), dt), sc), sv)) in parts.enumerate() {
            let (mask_shares, mask_betas): (Vec<Vec<TaggedShare>>, Vec<Vec<FieldElement>>) = mk
                .into_iter()
                .map(|v| v.into_iter().map(|x| (x.share, x.beta)).unzip())
                .unzip();
            let (dot_s, dot_b): (Vec<_>, Vec<_>) = dt.into_iter().unzip();
            let (sc_s, sc_b): (Vec<_>, Vec<_>) = sc.into_iter().unzip();
            let (sv_s, sv_b): (Vec<_>, Vec<_>) = sv.into_iter().unzip();
            client_iters[i].push(Some(IterationMaterial {
                masks: mask_shares,
                lambda: lam.share,
                dot: Pool::new(dot_s),
                scalar: Pool::new(sc_s),
                scalar_vec: Pool::new(sv_s),
            }));
            iter_betas.push(IterationMaterial {
                masks: mask_betas,
                lambda: lam.beta,
                dot: Pool::new(dot_b),
                scalar: Pool::new(sc_b),
                scalar_vec: Pool::new(sv_b),
            });
        }
        betas.push(iter_betas);
        if keep_digests {
            digests.push(Digest {
                masks: plain_masks,
                lambda,
            });
        }
    }

    let bundles = client_iters
        .into_iter()
        .zip(own_masks)
        .enumerate()
        .map(|(i, (iterations, own))| ClientBundle {
            id: i + 1,
            params,
            modulus: m.clone(),
            own_masks: own,
            iterations,
        })
        .collect();
    let keys = FederatorKeys {
        alpha,
        params,
        first,
        betas,
        digests: keep_digests.then_some(digests),
    };
    Ok((bundles, keys))
}

/// Convenience entry point with a sequential stream.
pub fn initialize_seeded(
    params: TtpParams,
    m: &Modulus,
    seed: u64,
) -> Result<(Vec<ClientBundle>, FederatorKeys), TtpError> {
    initialize(
        params,
        m,
        SeqRandomness::from_rng(ChaCha20Rng::seed_from_u64(seed)),
        true,
    )
}

/// Result of [`audit`]: one line per violation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditReport {
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

struct Auditor<'a> {
    t: usize,
    alpha: &'a FieldElement,
    report: AuditReport,
}

impl Auditor<'_> {
    /// Checks tags and degree, returns the secret.
    fn secret(&mut self, what: &str, shares: &[&TaggedShare], betas: &[Option<&FieldElement>]) -> Option<FieldElement> {
        for (s, b) in shares.iter().zip(betas) {
            match b {
                None => self
                    .report
                    .violations
                    .push(format!("{what}: missing beta for party {}", s.index())),
                Some(b) => {
                    if !mac::verify_share(s, self.alpha, &KeyShare::fresh((*b).clone())) {
                        self.report
                            .violations
                            .push(format!("{what}: tag of party {} does not verify", s.index()));
                    }
                }
            }
        }
        let vals: Vec<ValueShare> = shares.iter().map(|s| s.share.clone()).collect();
        let first = sss::reconstruct(&vals, self.t).ok()?;
        for start in 1..=(vals.len() - self.t - 1) {
            if sss::reconstruct(&vals[start..start + self.t + 1], self.t).ok() != Some(first.clone()) {
                self.report
                    .violations
                    .push(format!("{what}: shares are not on one degree-{} polynomial", self.t));
                break;
            }
        }
        Some(first)
    }

    fn vector(
        &mut self,
        what: &str,
        shares: &[&Vec<TaggedShare>],
        betas: &[Option<&Vec<FieldElement>>],
        d: usize,
    ) -> Vec<FieldElement> {
        let zero = self.alpha.modulus().zero();
        for (i, (s, b)) in shares.iter().zip(betas).enumerate() {
            if s.len() != d || b.map(|b| b.len()) != Some(d) {
                self.report.violations.push(format!(
                    "{what}: party {} length mismatch (shares {}, betas {:?}, want {d})",
                    i + 1,
                    s.len(),
                    b.map(|b| b.len())
                ));
            }
        }
        (0..d)
            .map(|c| {
                let sh: Vec<&TaggedShare> = shares.iter().filter_map(|v| v.get(c)).collect();
                let bs: Vec<Option<&FieldElement>> = betas.iter().map(|b| b.and_then(|b| b.get(c))).collect();
                if sh.len() != shares.len() {
                    return None;
                }
                self.secret(&format!("{what}[{c}]"), &sh, &bs)
            })
            .map(|x| x.unwrap_or_else(|| zero.clone()))
            .collect()
    }
}

/// Test-only consistency sweep over unconsumed material: tags, degree,
/// triple relations, mask agreement and pool sizes.
pub fn audit(bundles: &[ClientBundle], keys: &FederatorKeys) -> AuditReport {
    let params = keys.params;
    let mut a = Auditor {
        t: params.t,
        alpha: &keys.alpha,
        report: AuditReport::default(),
    };
    if bundles.len() != params.n {
        a.report
            .violations
            .push(format!("{} bundles for n = {}", bundles.len(), params.n));
        return a.report;
    }
    let budget = params.budget();
    let d = params.d;
    for g in 0..params.iterations {
        let mats: Vec<&IterationMaterial<TaggedShare>> = match bundles.iter().map(|b| b.material(g)).collect() {
            Some(v) => v,
            None => continue,
        };
        let Some(kb) = keys.betas_at(g) else {
            a.report.violations.push(format!("iteration {g}: no key registry"));
            continue;
        };
        let kb: Vec<Option<&IterationMaterial<FieldElement>>> = (0..params.n).map(|i| kb.get(i)).collect();
        for (i, m) in mats.iter().enumerate() {
            if m.dot.len() != budget.dot || m.scalar.len() != budget.scalar || m.scalar_vec.len() != budget.scalar_vec {
                a.report
                    .violations
                    .push(format!("iteration {g}: party {} pool sizes differ from budget", i + 1));
            }
            if m.masks.len() != params.n {
                a.report.violations.push(format!(
                    "iteration {g}: party {} has {} mask sharings",
                    i + 1,
                    m.masks.len()
                ));
            }
        }
        for (j, owner) in bundles.iter().enumerate().take(params.n) {
            let sh: Vec<&Vec<TaggedShare>> = mats.iter().filter_map(|m| m.masks.get(j)).collect();
            if sh.len() != params.n {
                continue;
            }
            let bs: Vec<Option<&Vec<FieldElement>>> = kb.iter().map(|k| k.and_then(|k| k.masks.get(j))).collect();
            let r = a.vector(&format!("iteration {g} mask {}", j + 1), &sh, &bs, d);
            if owner.own_mask(g).map(|v| v == r.as_slice()) != Some(true) {
                a.report
                    .violations
                    .push(format!("iteration {g}: mask {} disagrees with its owner", j + 1));
            }
        }
        let sh: Vec<&TaggedShare> = mats.iter().map(|m| &m.lambda).collect();
        let bs: Vec<Option<&FieldElement>> = kb.iter().map(|k| k.map(|k| &k.lambda)).collect();
        a.secret(&format!("iteration {g} lambda"), &sh, &bs);

        for slot in 0..budget.scalar {
            let tr: Option<Vec<&ScalarTriple<TaggedShare>>> = mats.iter().map(|m| m.scalar.get(slot)).collect();
            let Some(tr) = tr else { continue };
            let kt: Vec<Option<&ScalarTriple<FieldElement>>> =
                kb.iter().map(|k| k.and_then(|k| k.scalar.get(slot))).collect();
            let what = format!("iteration {g} scalar {slot}");
            let x = a.secret(
                &format!("{what}.a"),
                &tr.iter().map(|t| &t.a).collect::<Vec<_>>(),
                &kt.iter().map(|k| k.map(|k| &k.a)).collect::<Vec<_>>(),
            );
            let y = a.secret(
                &format!("{what}.b"),
                &tr.iter().map(|t| &t.b).collect::<Vec<_>>(),
                &kt.iter().map(|k| k.map(|k| &k.b)).collect::<Vec<_>>(),
            );
            let z = a.secret(
                &format!("{what}.c"),
                &tr.iter().map(|t| &t.c).collect::<Vec<_>>(),
                &kt.iter().map(|k| k.map(|k| &k.c)).collect::<Vec<_>>(),
            );
            if let (Some(x), Some(y), Some(z)) = (x, y, z) {
                if x * y != z {
                    a.report.violations.push(format!("{what}: c != a*b"));
                }
            }
        }
        for slot in 0..budget.dot {
            let tr: Option<Vec<&DotTriple<TaggedShare>>> = mats.iter().map(|m| m.dot.get(slot)).collect();
            let Some(tr) = tr else { continue };
            let kt: Vec<Option<&DotTriple<FieldElement>>> =
                kb.iter().map(|k| k.and_then(|k| k.dot.get(slot))).collect();
            let what = format!("iteration {g} dot {slot}");
            let o = a.vector(
                &format!("{what}.o"),
                &tr.iter().map(|t| &t.o).collect::<Vec<_>>(),
                &kt.iter().map(|k| k.map(|k| &k.o)).collect::<Vec<_>>(),
                d,
            );
            let v = a.vector(
                &format!("{what}.v"),
                &tr.iter().map(|t| &t.v).collect::<Vec<_>>(),
                &kt.iter().map(|k| k.map(|k| &k.v)).collect::<Vec<_>>(),
                d,
            );
            let w = a.secret(
                &format!("{what}.w"),
                &tr.iter().map(|t| &t.w).collect::<Vec<_>>(),
                &kt.iter().map(|k| k.map(|k| &k.w)).collect::<Vec<_>>(),
            );
            let dot = o.iter().zip(&v).fold(keys.modulus().zero(), |acc, (p, q)| acc + p * q);
            if w != Some(dot) {
                a.report.violations.push(format!("{what}: w != <o, v>"));
            }
        }
        for slot in 0..budget.scalar_vec {
            let tr: Option<Vec<&ScalarVecTriple<TaggedShare>>> = mats.iter().map(|m| m.scalar_vec.get(slot)).collect();
            let Some(tr) = tr else { continue };
            let kt: Vec<Option<&ScalarVecTriple<FieldElement>>> =
                kb.iter().map(|k| k.and_then(|k| k.scalar_vec.get(slot))).collect();
            let what = format!("iteration {g} scalar-vector {slot}");
            let x = a.secret(
                &format!("{what}.x"),
                &tr.iter().map(|t| &t.x).collect::<Vec<_>>(),
                &kt.iter().map(|k| k.map(|k| &k.x)).collect::<Vec<_>>(),
            );
            let y = a.vector(
                &format!("{what}.y"),
                &tr.iter().map(|t| &t.y).collect::<Vec<_>>(),
                &kt.iter().map(|k| k.map(|k| &k.y)).collect::<Vec<_>>(),
                d,
            );
            let z = a.vector(
                &format!("{what}.z"),
                &tr.iter().map(|t| &t.z).collect::<Vec<_>>(),
                &kt.iter().map(|k| k.map(|k| &k.z)).collect::<Vec<_>>(),
                d,
            );
            if let Some(x) = x {
                if y.iter().zip(&z).any(|(yj, zj)| &(&x * yj) != zj) {
                    a.report.violations.push(format!("{what}: z != x*y"));
                }
            }
        }
    }
    a.report
}
