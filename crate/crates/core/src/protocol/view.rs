//! What each party observes in one iteration, with every observed value
//! labelled by the preprocessed secret that masks it.
//!
//! Used by the privacy checks: values masked by distinct secrets depend on
//! disjoint randomness, so a view's distribution can be compared block by
//! block.

use std::collections::BTreeMap;

use crate::beaver::triple_budget;
use crate::discriminator::power_slot;
use crate::field::FieldElement;
use crate::ttp::{ClientBundle, Object};

use super::message::{Party, Payload, Phase};
use super::transcript::RoundTranscript;
use super::ProtocolParams;

/// `(object, component, coordinate)` of one preprocessed secret.
pub type Label = (Object, u8, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViewKey {
    /// The party's own share of a preprocessed secret.
    Share(Label),
    /// Plain coordinate of the party's own mask.
    OwnMask(usize),
    /// A value not masked by any preprocessed secret.
    Public { phase: Phase, index: usize },
    /// A value equal to something minus (or times) the `mask` secret.
    Masked { phase: Phase, index: usize, mask: Label },
    /// Higher coefficient of a received sharing; `fresh` is the secret whose
    /// sharing coefficient enters it first.
    Slope {
        phase: Phase,
        index: usize,
        degree: usize,
        fresh: Label,
    },
}

impl ViewKey {
    /// Block the key belongs to; `None` for public values.
    pub fn block(&self) -> Option<Label> {
        match self {
            ViewKey::Share(l) | ViewKey::Masked { mask: l, .. } => Some(*l),
            _ => None,
        }
    }
}

pub type View = Vec<(ViewKey, FieldElement)>;

/// Every secret that masks an opened or published value in one iteration.
pub fn mask_labels(n: usize, k: usize, d: usize) -> Vec<Label> {
    let b = triple_budget(n, k, d);
    let mut out = Vec::new();
    for owner in 1..=n {
        out.extend((0..d).map(|c| (Object::Mask { owner }, 0, c)));
    }
    out.push((Object::Lambda, 0, 0));
    for slot in 0..b.dot {
        for comp in 0..2 {
            out.extend((0..d).map(|c| (Object::Dot { slot }, comp, c)));
        }
    }
    for slot in 0..b.scalar {
        out.extend((0..2).map(|comp| (Object::Scalar { slot }, comp, 0)));
    }
    for slot in 0..b.scalar_vec {
        out.push((Object::ScalarVec { slot }, 0, 0));
        out.extend((0..d).map(|c| (Object::ScalarVec { slot }, 1, c)));
    }
    out
}

/// Masking secret of each opened position, in wire order.
pub fn opening_masks(phase: Phase, set: &[usize], n: usize, k: usize, d: usize) -> Vec<Label> {
    let mut out = Vec::new();
    match phase {
        Phase::NormOpen | Phase::NormOpened => {
            for &j in set {
                for comp in 0..2 {
                    out.extend((0..d).map(|c| (Object::Dot { slot: j - 1 }, comp, c)));
                }
            }
        }
        Phase::PowerOpen(p) | Phase::PowerOpened(p) => {
            for &j in set {
                let slot = power_slot(j - 1, p as usize, k);
                out.push((Object::Scalar { slot }, 0, 0));
                out.push((Object::Scalar { slot }, 1, 0));
            }
        }
        Phase::ScaleOpen | Phase::ScaleOpened => {
            for &j in set {
                out.push((Object::ScalarVec { slot: j - 1 }, 0, 0));
                out.extend((0..d).map(|c| (Object::ScalarVec { slot: j - 1 }, 1, c)));
            }
        }
        Phase::LambdaOpen | Phase::LambdaOpened => {
            let slot = n * k.saturating_sub(1);
            out.push((Object::Scalar { slot }, 0, 0));
            out.push((Object::Scalar { slot }, 1, 0));
            out.push((Object::ScalarVec { slot: n }, 0, 0));
            out.extend((0..d).map(|c| (Object::ScalarVec { slot: n }, 1, c)));
        }
        _ => {}
    }
    out
}

/// Client and active sets announced by the federator.
fn round_sets(tr: &RoundTranscript) -> (Vec<usize>, Vec<usize>) {
    let mut checked = Vec::new();
    let mut active = Vec::new();
    for r in &tr.records {
        match &r.msg.payload {
            Payload::MaskedEcho(all) => checked = all.iter().map(|(j, _)| *j).collect(),
            Payload::Exclusion(a) => active = a.clone(),
            _ => {}
        }
    }
    (checked, active)
}

fn set_for(phase: Phase, checked: &[usize], active: &[usize]) -> Vec<usize> {
    match phase {
        Phase::NormOpen | Phase::NormOpened | Phase::Norm => checked.to_vec(),
        _ => active.to_vec(),
    }
}

/// View of client `id`: its bundle for the iteration (shares only; tags
/// carry fresh keys) and everything it received.
pub fn client_view(bundle: &ClientBundle, tr: &RoundTranscript, params: &ProtocolParams) -> View {
    let (n, k, d) = (params.n, params.k(), params.d);
    let g = tr.iteration;
    let mut view = View::new();
    if let Some(mask) = bundle.own_mask(g) {
        view.extend(mask.iter().cloned().enumerate().map(|(c, v)| (ViewKey::OwnMask(c), v)));
    }
    if let Some(mat) = bundle.material(g) {
        for (j, v) in mat.masks.iter().enumerate() {
            for (c, s) in v.iter().enumerate() {
                view.push((ViewKey::Share((Object::Mask { owner: j + 1 }, 0, c)), s.value().clone()));
            }
        }
        view.push((ViewKey::Share((Object::Lambda, 0, 0)), mat.lambda.value().clone()));
        for (slot, t) in mat.dot.iter().enumerate() {
            let t = t.expect("unconsumed bundle");
            for (comp, v) in [(0u8, &t.o), (1, &t.v)] {
                for (c, s) in v.iter().enumerate() {
                    view.push((ViewKey::Share((Object::Dot { slot }, comp, c)), s.value().clone()));
                }
            }
        }
        for (slot, t) in mat.scalar.iter().enumerate() {
            let t = t.expect("unconsumed bundle");
            view.push((ViewKey::Share((Object::Scalar { slot }, 0, 0)), t.a.value().clone()));
            view.push((ViewKey::Share((Object::Scalar { slot }, 1, 0)), t.b.value().clone()));
        }
        for (slot, t) in mat.scalar_vec.iter().enumerate() {
            let t = t.expect("unconsumed bundle");
            view.push((ViewKey::Share((Object::ScalarVec { slot }, 0, 0)), t.x.value().clone()));
            for (c, s) in t.y.iter().enumerate() {
                view.push((ViewKey::Share((Object::ScalarVec { slot }, 1, c)), s.value().clone()));
            }
        }
    }
    let (checked, active) = round_sets(tr);
    let me = Party::Client(bundle.id);
    let mut idx: BTreeMap<Phase, usize> = BTreeMap::new();
    for msg in tr.inbox(me) {
        let phase = msg.tag.phase;
        let base = idx.entry(phase).or_insert(0);
        let masks = opening_masks(phase, &set_for(phase, &checked, &active), n, k, d);
        match &msg.payload {
            Payload::GlobalModel(_) => {}
            Payload::FederatorUpdate(v) => {
                for v in v {
                    view.push((ViewKey::Public { phase, index: *base }, v.clone()));
                    *base += 1;
                }
            }
            Payload::MaskedEcho(all) => {
                for (j, v) in all {
                    for (c, x) in v.iter().enumerate() {
                        let mask = (Object::Mask { owner: *j }, 0, c);
                        view.push((
                            ViewKey::Masked {
                                phase,
                                index: *base,
                                mask,
                            },
                            x.clone(),
                        ));
                        *base += 1;
                    }
                }
            }
            Payload::OpenedValues(v) => {
                for (i, x) in v.iter().enumerate() {
                    let key = match masks.get(i) {
                        Some(&mask) => ViewKey::Masked { phase, index: i, mask },
                        None => ViewKey::Public { phase, index: i },
                    };
                    view.push((key, x.clone()));
                }
            }
            Payload::Exclusion(a) => {
                let m = tr.modulus();
                for (i, j) in a.iter().enumerate() {
                    view.push((ViewKey::Public { phase, index: i }, m.from_u64(*j as u64)));
                }
            }
            _ => {}
        }
    }
    view
}

/// Coefficients (ascending) of the degree-`points.len() - 1` polynomial
/// through `points`.
fn interpolate(points: &[(usize, FieldElement)]) -> Vec<FieldElement> {
    let m = points[0].1.modulus().clone();
    let xs: Vec<usize> = points.iter().map(|(x, _)| *x).collect();
    let k = points.len();
    let mut coeffs = vec![m.zero(); k];
    for (i, (xi, yi)) in points.iter().enumerate() {
        // basis polynomial prod_{j != i} (X - x_j) / (x_i - x_j)
        let mut basis = vec![m.one()];
        let mut denom = m.one();
        for (j, &xj) in xs.iter().enumerate() {
            if j == i {
                continue;
            }
            let xj = m.from_u64(xj as u64);
            let mut next = vec![m.zero(); basis.len() + 1];
            for (p, b) in basis.iter().enumerate() {
                next[p + 1] += b.clone();
                next[p] -= b * &xj;
            }
            basis = next;
            denom *= m.from_u64(*xi as u64) - xj;
        }
        let scale = yi * &denom.inverse().expect("distinct points");
        for (c, b) in coeffs.iter_mut().zip(&basis) {
            *c += b * &scale;
        }
    }
    coeffs
}

/// The federator's view: every masked update, and each received sharing
/// as its polynomial through the first `t + 1` senders (the remaining
/// shares are determined by it).
/// Per sender, the values it sent in one phase.
type Senders = Vec<(usize, Vec<FieldElement>)>;

pub fn federator_view(tr: &RoundTranscript, params: &ProtocolParams) -> View {
    let (n, k, d, t) = (params.n, params.k(), params.d, params.t);
    let (checked, active) = round_sets(tr);
    let mut view = View::new();
    let mut phases: Vec<(Phase, Senders)> = Vec::new();
    for r in &tr.records {
        let Some(i) = r.msg.sender.client_id() else { continue };
        let phase = r.msg.tag.phase;
        let values: Vec<FieldElement> = match &r.msg.payload {
            Payload::MaskedUpdate(v) => {
                for (c, x) in v.iter().enumerate() {
                    let mask = (Object::Mask { owner: i }, 0, c);
                    view.push((
                        ViewKey::Masked {
                            phase,
                            index: (i - 1) * d + c,
                            mask,
                        },
                        x.clone(),
                    ));
                }
                continue;
            }
            Payload::OpeningShare(v) | Payload::NormShare(v) => v.iter().map(|s| s.value().clone()).collect(),
            Payload::AggShare { sigma1, sigma2 } => std::iter::once(sigma1)
                .chain(sigma2)
                .map(|s| s.value().clone())
                .collect(),
            _ => continue,
        };
        match phases.last_mut() {
            Some((p, v)) if *p == phase => v.push((i, values)),
            _ => phases.push((phase, vec![(i, values)])),
        }
    }
    for (phase, senders) in phases {
        if senders.len() < t + 1 {
            continue;
        }
        let set = set_for(phase, &checked, &active);
        let masks = opening_masks(phase, &set, n, k, d);
        let used = &senders[..t + 1];
        let len = used.iter().map(|(_, v)| v.len()).min().unwrap_or(0);
        for index in 0..len {
            let pts: Vec<(usize, FieldElement)> = used.iter().map(|(i, v)| (*i, v[index].clone())).collect();
            let poly = interpolate(&pts);
            let (value_key, fresh) = match phase {
                Phase::Norm => {
                    let j = set.get(index).copied().unwrap_or(1);
                    (ViewKey::Public { phase, index }, (Object::Dot { slot: j - 1 }, 2, 0))
                }
                Phase::Aggregate => {
                    let fresh = if index == 0 {
                        (
                            Object::Scalar {
                                slot: n * k.saturating_sub(1),
                            },
                            2,
                            0,
                        )
                    } else {
                        (Object::ScalarVec { slot: n }, 2, index - 1)
                    };
                    (
                        ViewKey::Masked {
                            phase,
                            index,
                            mask: (Object::Lambda, 0, 0),
                        },
                        fresh,
                    )
                }
                _ => {
                    let mask = masks[index];
                    (ViewKey::Masked { phase, index, mask }, mask)
                }
            };
            view.push((value_key, poly[0].clone()));
            for (degree, c) in poly.iter().enumerate().skip(1) {
                view.push((
                    ViewKey::Slope {
                        phase,
                        index,
                        degree,
                        fresh,
                    },
                    c.clone(),
                ));
            }
        }
    }
    view
}

/// Histogram, per block, of the block's values across many views.
pub type BlockHistograms = BTreeMap<Option<Label>, BTreeMap<Vec<(ViewKey, u64)>, usize>>;

/// Groups each view's non-slope items by block and counts value tuples.
pub fn block_histograms<'a>(views: impl IntoIterator<Item = &'a View>) -> BlockHistograms {
    let mut out = BlockHistograms::new();
    for v in views {
        let mut blocks: BTreeMap<Option<Label>, Vec<(ViewKey, u64)>> = BTreeMap::new();
        for (key, x) in v {
            if matches!(key, ViewKey::Slope { .. }) {
                continue;
            }
            let val = x.to_u64().expect("small field");
            blocks.entry(key.block()).or_default().push((*key, val));
        }
        for (b, items) in blocks {
            *out.entry(b).or_default().entry(items).or_default() += 1;
        }
    }
    out
}
