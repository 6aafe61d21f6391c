//! Byzantine behaviour: poisoned data and updates at the learning layer,
//! corrupted shares and tags at the protocol layer, and dropouts.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discriminator::DiscriminatorPoly;
use crate::flsim::aggregate::krum_index;
use crate::flsim::data::Dataset;
use crate::flsim::model::Model;
use crate::protocol::{Message, Payload, RoundHooks};
use crate::quant::l2_norm;
use crate::rng::substream;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AdversaryError {
    #[error("n = {n} < e + t + s + 1 = {need} (e = {e}, t = {t}, s = {s})")]
    TooManyFaults {
        n: usize,
        e: usize,
        t: usize,
        s: usize,
        need: usize,
    },
    #[error("{what} id {id} outside 1..={n}")]
    BadId { what: &'static str, id: usize, n: usize },
    #[error("{0} colluders exceed the privacy threshold t = {1}")]
    TooManyColluders(usize, usize),
    #[error("dropout schedule drops {got} clients in iteration {iteration}, more than s = {s}")]
    TooManyDropouts { iteration: usize, got: usize, s: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorruptionMode {
    /// Shift a share value.
    Value,
    /// Shift a MAC tag.
    Tag,
    /// Shift value by `delta` and tag by `guess * delta` for a guessed key.
    Both,
    /// Send a malformed masked update.
    Opening,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Attack {
    None,
    LabelFlip,
    /// Backdoor: train on trigger-stamped copies relabelled `target`, then
    /// scale the update.
    Scaling {
        #[serde(default = "default_factor")]
        factor: f64,
        #[serde(default)]
        target: u8,
    },
    /// Adaptive attack on the trust-score discriminator.
    Directed {
        #[serde(default = "default_grid")]
        grid: usize,
        /// Smallest trust score, relative to `h(1)`, a crafted update may get.
        #[serde(default = "default_min_trust")]
        min_trust: f64,
    },
    /// Full-knowledge attack on Krum (plaintext baselines).
    FangKrum,
    /// Full-knowledge attack on trimmed mean (plaintext baselines).
    FangTrim,
    Corruption {
        mode: CorruptionMode,
        /// Tamper only in this phase, by name (`Payload`-bearing phases);
        /// every eligible message when absent.
        #[serde(default)]
        phase: Option<String>,
    },
}

fn default_factor() -> f64 {
    10.0
}
fn default_grid() -> usize {
    64
}
fn default_min_trust() -> f64 {
    0.05
}

impl Attack {
    pub fn name(&self) -> &'static str {
        match self {
            Attack::None => "none",
            Attack::LabelFlip => "label_flip",
            Attack::Scaling { .. } => "scaling",
            Attack::Directed { .. } => "directed",
            Attack::FangKrum => "fang_krum",
            Attack::FangTrim => "fang_trim",
            Attack::Corruption { .. } => "corruption",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dropout {
    pub client: usize,
    /// Every iteration when absent.
    #[serde(default)]
    pub iteration: Option<usize>,
    /// Protocol step (1..=5) from which the client is silent.
    pub step: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarySpec {
    #[serde(default)]
    pub byzantine: Vec<usize>,
    #[serde(default)]
    pub colluders: Vec<usize>,
    #[serde(default)]
    pub dropouts: Vec<Dropout>,
    #[serde(default = "no_attack")]
    pub attack: Attack,
}

fn no_attack() -> Attack {
    Attack::None
}

impl Default for AdversarySpec {
    fn default() -> Self {
        Self {
            byzantine: Vec::new(),
            colluders: Vec::new(),
            dropouts: Vec::new(),
            attack: Attack::None,
        }
    }
}

impl AdversarySpec {
    pub fn is_byzantine(&self, client: usize) -> bool {
        self.byzantine.contains(&client)
    }

    /// Checks ids and `n >= e + t + s + 1`.
    pub fn validate(&self, n: usize, t: usize, s: usize) -> Result<(), AdversaryError> {
        let e = self.byzantine.len();
        let need = e + t + s + 1;
        if n < need {
            return Err(AdversaryError::TooManyFaults { n, e, t, s, need });
        }
        let ids = self
            .byzantine
            .iter()
            .map(|&i| ("byzantine", i))
            .chain(self.colluders.iter().map(|&i| ("colluder", i)))
            .chain(self.dropouts.iter().map(|d| ("dropout", d.client)));
        for (what, id) in ids {
            if id == 0 || id > n {
                return Err(AdversaryError::BadId { what, id, n });
            }
        }
        if self.colluders.len() > t {
            return Err(AdversaryError::TooManyColluders(self.colluders.len(), t));
        }
        let mut iters: Vec<Option<usize>> = self.dropouts.iter().map(|d| d.iteration).collect();
        iters.sort();
        iters.dedup();
        for it in iters {
            let mut who: Vec<usize> = self
                .dropouts
                .iter()
                .filter(|d| d.iteration.is_none() || it.is_none() || d.iteration == it)
                .map(|d| d.client)
                .collect();
            who.sort();
            who.dedup();
            if who.len() > s {
                return Err(AdversaryError::TooManyDropouts {
                    iteration: it.unwrap_or(0),
                    got: who.len(),
                    s,
                });
            }
        }
        Ok(())
    }
}

/// Every label `l` becomes `L - 1 - l`.
pub fn label_flip(data: &Dataset) -> Dataset {
    let mut out = data.clone();
    let top = data.classes as u8 - 1;
    out.labels.iter_mut().for_each(|l| *l = top - *l);
    out
}

pub const TRIGGER_SIZE: usize = 3;

/// Sets a `3 x 3` patch in the bottom-right corner of a square image to 1.
pub fn stamp_trigger(x: &mut [f64]) {
    let side = (x.len() as f64).sqrt() as usize;
    let size = TRIGGER_SIZE.min(side);
    for r in side - size..side {
        for c in side - size..side {
            x[r * side + c] = 1.0;
        }
    }
}

/// `data` plus a trigger-stamped copy of every sample labelled `target`.
pub fn backdoor_dataset(data: &Dataset, target: u8) -> Dataset {
    let mut out = data.clone();
    for i in 0..data.len() {
        let mut x = data.row(i).to_vec();
        stamp_trigger(&mut x);
        out.push(&x, target);
    }
    out
}

/// Stamped test samples whose true label is not `target`.
pub fn triggered_test(test: &Dataset, target: u8) -> Dataset {
    let mut out = Dataset::empty(test.dim, test.classes);
    for i in 0..test.len() {
        if test.labels[i] == target {
            continue;
        }
        let mut x = test.row(i).to_vec();
        stamp_trigger(&mut x);
        out.push(&x, target);
    }
    out
}

/// Fraction of `triggered` classified as the backdoor target.
pub fn attack_success_rate(model: &Model, triggered: &Dataset) -> f64 {
    model.accuracy(triggered)
}

pub fn scale(update: &[f64], factor: f64) -> Vec<f64> {
    update.iter().map(|v| v * factor).collect()
}

fn unit(v: &[f64]) -> Option<Vec<f64>> {
    let n = l2_norm(v);
    (n > 0.0).then(|| v.iter().map(|x| x / n).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Crafts one update for all Byzantine clients from their own benign
/// updates, the root update and the discriminator. Candidates rotate from
/// `u0` towards the direction opposing the benign mean; each is scored by
/// how far it drags the trust-weighted aggregate (benign updates standing
/// in for the honest population, weighted `honest_weight` each) along that
/// direction. Candidates with trust below `min_trust * h(1)` are skipped.
/// The result has the benign mean norm, so it passes the norm check after
/// normalization.
pub fn directed_attack(
    benign: &[Vec<f64>],
    u0: &[f64],
    h: &DiscriminatorPoly,
    honest_weight: f64,
    grid: usize,
    min_trust: f64,
) -> Vec<f64> {
    let d = u0.len();
    let mean = crate::flsim::aggregate::fedavg(benign);
    let (Some(r), Some(s)) = (unit(u0), unit(&mean)) else {
        return mean;
    };
    // deviation direction: against the benign mean, orthogonal part to u0
    let dev: Vec<f64> = s.iter().map(|v| -v).collect();
    let along = dot(&dev, &r);
    let perp: Vec<f64> = dev.iter().zip(&r).map(|(a, b)| a - along * b).collect();
    let w = (l2_norm(&perp) > 1e-9)
        .then(|| unit(&perp))
        .flatten()
        .unwrap_or_else(|| {
            // benign mean parallel to u0: any direction orthogonal to u0
            let mut e = vec![0.0; d];
            let i = (0..d).min_by(|&a, &b| r[a].abs().total_cmp(&r[b].abs())).unwrap_or(0);
            e[i] = 1.0;
            let a = r[i];
            unit(&e.iter().zip(&r).map(|(x, y)| x - a * y).collect::<Vec<_>>()).unwrap_or(e)
        });
    let e = benign.len().max(1) as f64;
    let mut num_b = vec![0.0; d];
    let mut den_b = 0.0;
    for b in benign {
        if let Some(ub) = unit(b) {
            let ts = h.eval_real(dot(&ub, &r)) * honest_weight;
            den_b += ts;
            num_b.iter_mut().zip(&ub).for_each(|(o, v)| *o += ts * v);
        }
    }
    let baseline = if den_b != 0.0 { dot(&num_b, &dev) / den_b } else { 0.0 };
    let floor = min_trust * h.eval_real(1.0);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for i in 0..=grid.max(1) {
        let theta = std::f64::consts::PI * i as f64 / grid.max(1) as f64;
        let v: Vec<f64> = r
            .iter()
            .zip(&w)
            .map(|(a, b)| theta.cos() * a + theta.sin() * b)
            .collect();
        let ts = h.eval_real(theta.cos());
        if ts < floor {
            continue;
        }
        let den = den_b + e * ts;
        if den <= 0.0 {
            continue;
        }
        let score = (dot(&num_b, &dev) + e * ts * dot(&v, &dev)) / den - baseline;
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, v));
        }
    }
    let norm = l2_norm(&mean);
    best.map_or(mean, |(_, v)| v.iter().map(|x| x * norm).collect())
}

fn sign(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            if *x > 0.0 {
                1.0
            } else if *x < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Full-knowledge attack on trimmed mean: per coordinate, values just past
/// the benign extreme opposite to the benign direction.
pub fn fang_trim<R: Rng + ?Sized>(benign: &[Vec<f64>], e: usize, rng: &mut R) -> Vec<Vec<f64>> {
    const B: f64 = 2.0;
    let d = benign.first().map_or(0, Vec::len);
    let s = sign(&crate::flsim::aggregate::fedavg(benign));
    let mut out = vec![vec![0.0; d]; e];
    for j in 0..d {
        let lo = benign.iter().map(|u| u[j]).fold(f64::INFINITY, f64::min);
        let hi = benign.iter().map(|u| u[j]).fold(f64::NEG_INFINITY, f64::max);
        let (a, b) = if s[j] > 0.0 {
            if lo > 0.0 {
                (lo / B, lo)
            } else {
                (B * lo, lo)
            }
        } else if hi > 0.0 {
            (hi, B * hi)
        } else {
            (hi / B, hi)
        };
        for m in out.iter_mut() {
            m[j] = if a < b { rng.gen_range(a..=b) } else { a };
        }
    }
    out
}

/// Full-knowledge attack on Krum: `e` copies of `-lambda * sign(mean)`
/// with the largest `lambda` (halving from an upper bound) that Krum picks.
pub fn fang_krum(benign: &[Vec<f64>], e: usize) -> Vec<Vec<f64>> {
    let d = benign.first().map_or(0, Vec::len);
    if e == 0 || d == 0 {
        return Vec::new();
    }
    let s = sign(&crate::flsim::aggregate::fedavg(benign));
    let m = benign.len() + e;
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let keep = m.saturating_sub(2 * e + 1).max(1);
    let min_sum = benign
        .iter()
        .map(|u| {
            let mut ds: Vec<f64> = benign.iter().map(|v| dist(u, v).sqrt()).collect();
            ds.sort_by(f64::total_cmp);
            ds.iter().skip(1).take(keep).sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    let max_norm = benign.iter().map(|u| l2_norm(u)).fold(0.0, f64::max);
    let sd = (d as f64).sqrt();
    let mut lambda = min_sum / (keep as f64 * sd) + max_norm / sd;
    let craft = |lambda: f64| s.iter().map(|v| -lambda * v).collect::<Vec<f64>>();
    while lambda > 1e-5 {
        let mal = craft(lambda);
        let mut all: Vec<Vec<f64>> = vec![mal.clone(); e];
        all.extend(benign.iter().cloned());
        if krum_index(&all, e) < e {
            break;
        }
        lambda /= 2.0;
    }
    vec![craft(lambda); e]
}

/// Protocol-layer interference for one run: scheduled dropouts and share
/// or tag corruption by Byzantine clients.
#[derive(Debug, Clone)]
pub struct ProtocolAdversary {
    pub dropouts: Vec<Dropout>,
    pub byzantine: Vec<usize>,
    pub corruption: Option<(CorruptionMode, Option<String>)>,
    seed: u64,
    draws: u64,
    /// Messages altered so far.
    pub tampered: usize,
}

impl ProtocolAdversary {
    pub fn new(spec: &AdversarySpec, seed: u64) -> Self {
        let corruption = match &spec.attack {
            Attack::Corruption { mode, phase } => Some((*mode, phase.clone())),
            _ => None,
        };
        Self {
            dropouts: spec.dropouts.clone(),
            byzantine: spec.byzantine.clone(),
            corruption,
            seed,
            draws: 0,
            tampered: 0,
        }
    }
}

impl RoundHooks for ProtocolAdversary {
    fn dropped(&self, client: usize, iteration: usize, step: u8) -> bool {
        self.dropouts
            .iter()
            .any(|d| d.client == client && d.iteration.is_none_or(|g| g == iteration) && step >= d.step)
    }

    fn tamper(&mut self, msg: &mut Message) {
        let Some((mode, phase)) = &self.corruption else { return };
        let Some(who) = msg.sender.client_id() else { return };
        if !self.byzantine.contains(&who) {
            return;
        }
        if phase.as_ref().is_some_and(|p| p != msg.tag.phase.name()) {
            return;
        }
        let mut rng = substream(self.seed, &[0x7461, self.draws]);
        self.draws += 1;
        let share = match (&mut msg.payload, mode) {
            (Payload::MaskedUpdate(v), CorruptionMode::Opening) => {
                let z = v.first().map(|x| x.modulus().zero());
                if let Some(z) = z {
                    v.push(z);
                    self.tampered += 1;
                }
                return;
            }
            (_, CorruptionMode::Opening) => return,
            (Payload::OpeningShare(v) | Payload::NormShare(v), _) if !v.is_empty() => &mut v[0],
            (Payload::AggShare { sigma1, .. }, _) => sigma1,
            _ => return,
        };
        let m = share.tag.modulus().clone();
        let delta = m.random_nonzero(&mut rng);
        match mode {
            CorruptionMode::Value => share.share.value += &delta,
            CorruptionMode::Tag => share.tag += &delta,
            CorruptionMode::Both => {
                let guess = m.random(&mut rng);
                share.share.value += &delta;
                share.tag += &(guess * &delta);
            }
            CorruptionMode::Opening => unreachable!(),
        }
        self.tampered += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discriminator::default_h;

    #[test]
    fn label_flip_maps_and_is_an_involution() {
        let d = Dataset::new(vec![0.0; 10], (0..10).collect(), 1, 10).unwrap();
        let f = label_flip(&d);
        assert_eq!(f.labels[3], 6);
        assert_eq!(label_flip(&f), d);
    }

    #[test]
    fn fault_budget_is_enforced() {
        let spec = AdversarySpec {
            byzantine: vec![1, 2],
            ..Default::default()
        };
        assert_eq!(
            spec.validate(5, 2, 1),
            Err(AdversaryError::TooManyFaults {
                n: 5,
                e: 2,
                t: 2,
                s: 1,
                need: 6
            })
        );
        assert!(spec.validate(6, 2, 1).is_ok());
        let bad = AdversarySpec {
            byzantine: vec![7],
            ..Default::default()
        };
        assert!(matches!(bad.validate(6, 1, 0), Err(AdversaryError::BadId { .. })));
        let drops = AdversarySpec {
            dropouts: vec![
                Dropout {
                    client: 1,
                    iteration: None,
                    step: 3,
                },
                Dropout {
                    client: 2,
                    iteration: Some(0),
                    step: 4,
                },
            ],
            ..Default::default()
        };
        assert!(drops.validate(10, 2, 1).is_err());
        assert!(drops.validate(10, 2, 2).is_ok());
    }

    #[test]
    fn trigger_patch_sits_in_the_corner() {
        let mut x = vec![0.0; 49];
        stamp_trigger(&mut x);
        let set: Vec<usize> = (0..49).filter(|&i| x[i] == 1.0).collect();
        assert_eq!(set, vec![32, 33, 34, 39, 40, 41, 46, 47, 48]);
    }

    #[test]
    fn unit_factor_scaling_is_identity() {
        assert_eq!(scale(&[1.0, -2.0], 1.0), vec![1.0, -2.0]);
    }

    #[test]
    fn directed_update_passes_norm_and_trust_constraints() {
        let h = default_h();
        let u0 = vec![1.0, 0.2, -0.3, 0.5];
        let benign = vec![vec![0.9, 0.3, -0.2, 0.4], vec![1.1, 0.1, -0.4, 0.6]];
        let v = directed_attack(&benign, &u0, &h, 4.0, 64, 0.05);
        let mean = crate::flsim::aggregate::fedavg(&benign);
        assert!((l2_norm(&v) - l2_norm(&mean)).abs() < 1e-9);
        let cos = dot(&v, &u0) / (l2_norm(&v) * l2_norm(&u0));
        assert!(h.eval_real(cos) >= 0.05 * h.eval_real(1.0) - 1e-12);
        // it moves against the benign direction
        assert!(dot(&v, &mean) < dot(&u0, &mean) * l2_norm(&mean) / l2_norm(&u0));
    }

    #[test]
    fn fang_krum_is_selected_by_krum() {
        // wide benign spread around a small mean
        let benign = vec![
            vec![1.0, 0.3],
            vec![-0.8, 0.9],
            vec![0.6, -1.0],
            vec![-0.4, -0.7],
            vec![0.9, 0.8],
            vec![-0.2, 0.1],
        ];
        let mal = fang_krum(&benign, 2);
        let mut all = mal.clone();
        all.extend(benign);
        assert!(krum_index(&all, 2) < 2);
        assert!(mal[0][0] < 0.0);
    }

    #[test]
    fn fang_trim_pushes_against_the_mean() {
        let benign = vec![vec![1.0, -1.0], vec![2.0, -2.0]];
        let mal = fang_trim(&benign, 2, &mut substream(0, &[]));
        for m in &mal {
            assert!(m[0] >= 0.5 && m[0] <= 1.0);
            assert!(m[1] >= -1.0 && m[1] <= -0.5);
        }
    }
}
