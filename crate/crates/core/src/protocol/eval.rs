//! The client-side share program, generic over the share type so the
//! federator can replay it on key mirrors and predict every tag.

use crate::beaver::{
    dot_complete, dot_open, mul_complete, mul_open, scalar_vec_complete, scalar_vec_open, DotTriple, ScalarTriple,
    ScalarVecTriple,
};
use crate::discriminator::power_slot;
use crate::field::FieldElement;
use crate::mac::ShareAlgebra;
use crate::ttp::IterationMaterial;

use super::ProtocolError;

#[derive(Clone)]
enum Pending<S> {
    Idle,
    Dot(Vec<DotTriple<S>>),
    Scalar(Vec<ScalarTriple<S>>),
    ScaleVec(Vec<ScalarVecTriple<S>>),
    Lambda(ScalarTriple<S>, ScalarVecTriple<S>),
}

#[derive(Clone)]
pub(crate) struct Evaluator<S> {
    n: usize,
    k: usize,
    d: usize,
    material: IterationMaterial<S>,
    /// Shares of each client's update, indexed by client id - 1.
    ubar: Vec<Option<Vec<S>>>,
    /// `powers[j][p - 1]` is a share of `C_j^p`.
    powers: Vec<Vec<S>>,
    ts: Vec<Option<S>>,
    sigma: Option<(S, Vec<S>)>,
    pending: Pending<S>,
}

fn sum<S: ShareAlgebra>(items: impl IntoIterator<Item = S>, zero: &S) -> S {
    items.into_iter().fold(zero.clone(), |acc, x| acc.add(&x))
}

impl<S: ShareAlgebra> Evaluator<S> {
    pub fn new(n: usize, k: usize, d: usize, material: IterationMaterial<S>) -> Self {
        Self {
            n,
            k,
            d,
            material,
            ubar: vec![None; n],
            powers: vec![Vec::new(); n],
            ts: vec![None; n],
            sigma: None,
            pending: Pending::Idle,
        }
    }

    fn zero(&self) -> S {
        let z = &self.material.lambda;
        z.sub(z)
    }

    fn ubar(&self, j: usize) -> Result<&[S], ProtocolError> {
        self.ubar
            .get(j - 1)
            .and_then(|u| u.as_deref())
            .ok_or_else(|| ProtocolError::Unexpected(format!("no shares of client {j}")))
    }

    /// `ubar_j[i] = (ubar_j - r_j) + r_j[i]`.
    pub fn derive(&mut self, masked: &[(usize, Vec<FieldElement>)]) -> Result<(), ProtocolError> {
        for (j, m) in masked {
            let masks = self
                .material
                .masks
                .get(j - 1)
                .ok_or_else(|| ProtocolError::Unexpected(format!("unknown client {j}")))?;
            if m.len() != self.d {
                return Err(ProtocolError::Unexpected(format!(
                    "masked update of client {j} has length {}",
                    m.len()
                )));
            }
            self.ubar[j - 1] = Some(masks.iter().zip(m).map(|(r, x)| r.add_public(x)).collect());
        }
        Ok(())
    }

    /// Local: `C_j = <u0, ubar_j>` with `u0` public.
    pub fn cosines(&mut self, u0: &[FieldElement], set: &[usize]) -> Result<(), ProtocolError> {
        let zero = self.zero();
        for &j in set {
            let c = sum(self.ubar(j)?.iter().zip(u0).map(|(s, w)| s.scale(w)), &zero);
            self.powers[j - 1] = vec![c];
        }
        Ok(())
    }

    pub fn norm_open(&mut self, set: &[usize]) -> Result<Vec<S>, ProtocolError> {
        let mut out = Vec::with_capacity(2 * self.d * set.len());
        let mut taken = Vec::with_capacity(set.len());
        for &j in set {
            let t = self.material.dot.take(j - 1)?;
            let u = self.ubar(j)?;
            let (d, e) = dot_open(u, u, &t)?;
            out.extend(d);
            out.extend(e);
            taken.push(t);
        }
        self.pending = Pending::Dot(taken);
        Ok(out)
    }

    pub fn norm_close(&mut self, opened: &[FieldElement]) -> Result<Vec<S>, ProtocolError> {
        let Pending::Dot(triples) = std::mem::replace(&mut self.pending, Pending::Idle) else {
            return Err(ProtocolError::Unexpected("no norm opening in flight".into()));
        };
        expect_len(opened.len(), 2 * self.d * triples.len())?;
        triples
            .iter()
            .zip(opened.chunks(2 * self.d))
            .map(|(t, o)| Ok(dot_complete(t, &o[..self.d], &o[self.d..])?))
            .collect()
    }

    pub fn power_open(&mut self, p: usize, set: &[usize]) -> Result<Vec<S>, ProtocolError> {
        let mut out = Vec::with_capacity(2 * set.len());
        let mut taken = Vec::with_capacity(set.len());
        for &j in set {
            let t = self.material.scalar.take(power_slot(j - 1, p, self.k))?;
            let pw = &self.powers[j - 1];
            if pw.len() != p - 1 {
                return Err(ProtocolError::Unexpected(format!(
                    "power {p} of client {j} out of order"
                )));
            }
            let (d, e) = mul_open(&pw[p - 2], &pw[0], &t);
            out.push(d);
            out.push(e);
            taken.push(t);
        }
        self.pending = Pending::Scalar(taken);
        Ok(out)
    }

    pub fn power_close(&mut self, set: &[usize], opened: &[FieldElement]) -> Result<(), ProtocolError> {
        let Pending::Scalar(triples) = std::mem::replace(&mut self.pending, Pending::Idle) else {
            return Err(ProtocolError::Unexpected("no power opening in flight".into()));
        };
        expect_len(opened.len(), 2 * set.len())?;
        for ((&j, t), o) in set.iter().zip(&triples).zip(opened.chunks(2)) {
            let c = mul_complete(t, &o[0], &o[1]);
            self.powers[j - 1].push(c);
        }
        Ok(())
    }

    /// Computes `TS_j` from the powers, then opens for `TS_j * ubar_j`.
    pub fn scale_open(&mut self, set: &[usize], weights: &[FieldElement]) -> Result<Vec<S>, ProtocolError> {
        let zero = self.zero();
        let mut out = Vec::with_capacity((self.d + 1) * set.len());
        let mut taken = Vec::with_capacity(set.len());
        for &j in set {
            let pw = &self.powers[j - 1];
            if pw.len() != self.k {
                return Err(ProtocolError::Unexpected(format!("client {j} has {} powers", pw.len())));
            }
            let ts = sum(pw.iter().zip(&weights[1..]).map(|(c, w)| c.scale(w)), &zero).add_public(&weights[0]);
            let t = self.material.scalar_vec.take(j - 1)?;
            let (d, e) = scalar_vec_open(&ts, self.ubar(j)?, &t)?;
            out.push(d);
            out.extend(e);
            self.ts[j - 1] = Some(ts);
            taken.push(t);
        }
        self.pending = Pending::ScaleVec(taken);
        Ok(out)
    }

    pub fn scale_close(&mut self, opened: &[FieldElement]) -> Result<(), ProtocolError> {
        let Pending::ScaleVec(triples) = std::mem::replace(&mut self.pending, Pending::Idle) else {
            return Err(ProtocolError::Unexpected("no scaling opening in flight".into()));
        };
        expect_len(opened.len(), (self.d + 1) * triples.len())?;
        let zero = self.zero();
        let mut s2 = vec![zero.clone(); self.d];
        for (t, o) in triples.iter().zip(opened.chunks(self.d + 1)) {
            for (acc, v) in s2.iter_mut().zip(scalar_vec_complete(t, &o[0], &o[1..])?) {
                *acc = acc.add(&v);
            }
        }
        let s1 = sum(self.ts.iter().flatten().cloned(), &zero);
        self.sigma = Some((s1, s2));
        Ok(())
    }

    /// Opens for `lambda * Sigma1` and `lambda * Sigma2`; with no active
    /// client both sums are zero.
    pub fn lambda_open(&mut self) -> Result<Vec<S>, ProtocolError> {
        let zero = self.zero();
        let (s1, s2) = self.sigma.clone().unwrap_or_else(|| (zero.clone(), vec![zero; self.d]));
        let ts = self.material.scalar.take(self.n * self.k.saturating_sub(1))?;
        let tv = self.material.scalar_vec.take(self.n)?;
        let lambda = self.material.lambda.clone();
        let (d1, e1) = mul_open(&lambda, &s1, &ts);
        let (d2, e2) = scalar_vec_open(&lambda, &s2, &tv)?;
        let mut out = vec![d1, e1, d2];
        out.extend(e2);
        self.pending = Pending::Lambda(ts, tv);
        Ok(out)
    }

    pub fn lambda_close(&mut self, opened: &[FieldElement]) -> Result<(S, Vec<S>), ProtocolError> {
        let Pending::Lambda(ts, tv) = std::mem::replace(&mut self.pending, Pending::Idle) else {
            return Err(ProtocolError::Unexpected("no lambda opening in flight".into()));
        };
        expect_len(opened.len(), 3 + self.d)?;
        let s1 = mul_complete(&ts, &opened[0], &opened[1]);
        let s2 = scalar_vec_complete(&tv, &opened[2], &opened[3..])?;
        Ok((s1, s2))
    }
}

fn expect_len(got: usize, want: usize) -> Result<(), ProtocolError> {
    if got == want {
        Ok(())
    } else {
        Err(ProtocolError::Unexpected(format!(
            "opened {got} values, expected {want}"
        )))
    }
}
