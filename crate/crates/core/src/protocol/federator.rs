use std::collections::{BTreeMap, BTreeSet};

use num_bigint::{BigInt, BigUint};
use serde::Serialize;

use crate::field::{rational_reconstruct, FieldElement, Modulus, RatioBounds};
use crate::mac::{verify_share, KeyShare, TaggedShare};
use crate::quant::{self, dequantize_ratio, norm_passes};
use crate::rng::substream;
use crate::sss::lagrange_at_zero;
use crate::ttp::FederatorKeys;

use super::eval::Evaluator;
use super::message::{Message, Party, Payload, Phase, Receiver, RoundTag};
use super::{ProtocolError, ProtocolParams};

const ROOT_RETRIES: u64 = 1000;

/// MAC verdict on one client message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub phase: Phase,
    pub sender: usize,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub lambda_sigma1: FieldElement,
    pub lambda_sigma2: Vec<FieldElement>,
    /// Reduced `Sigma2_j / Sigma1`, positive denominators.
    pub ratios: Vec<(BigInt, BigUint)>,
    /// `||u0|| * ratio / q`.
    pub aggregate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub iteration: usize,
    /// Clients whose masked update was accepted.
    pub checked: Vec<usize>,
    /// Clients aggregated after the norm check.
    pub active: Vec<usize>,
    /// Reconstructed squared norms of the checked clients.
    pub norms: Vec<(usize, BigInt)>,
    /// Newly excluded this round, with the phase where it surfaced.
    pub excluded: Vec<(usize, Phase)>,
    pub verdicts: Vec<Verdict>,
    pub u0: Vec<i64>,
    pub norm0: f64,
    pub result: Result<Decoded, ProtocolError>,
    /// Model after the round; unchanged when the round aborted.
    pub model: Vec<f64>,
}

impl RoundOutcome {
    pub fn aborted(&self) -> bool {
        self.result.is_err()
    }
}

/// Result of feeding one inbox to the federator.
#[derive(Debug, Clone, PartialEq)]
pub enum RoundStep {
    Broadcast(Message),
    Finished(Box<RoundOutcome>),
}

#[derive(Clone)]
struct FedRound {
    iteration: usize,
    stage: Phase,
    u0: Vec<i64>,
    u0_fe: Vec<FieldElement>,
    norm0: f64,
    mirrors: BTreeMap<usize, Evaluator<KeyShare>>,
    /// Clients still sending in this round.
    speakers: Vec<usize>,
    checked: Vec<usize>,
    /// Clients whose norms are opened; fixed when step 3 starts.
    norm_set: Vec<usize>,
    active: Vec<usize>,
    norms: Vec<(usize, BigInt)>,
    excluded: Vec<(usize, Phase)>,
    verdicts: Vec<Verdict>,
    expected: BTreeMap<usize, Vec<KeyShare>>,
}

/// The federator: holds every MAC key, the global model and the exclusion
/// set, and never sees an unmasked client update.
#[derive(Clone)]
pub struct FederatorMachine {
    params: ProtocolParams,
    keys: FederatorKeys,
    modulus: Modulus,
    weights: Vec<FieldElement>,
    bounds: RatioBounds,
    model: Vec<f64>,
    excluded: BTreeSet<usize>,
    next_iteration: usize,
    round: Option<FedRound>,
    decoded: Option<Decoded>,
}

impl std::fmt::Debug for FederatorMachine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FederatorMachine")
            .field("next_iteration", &self.next_iteration)
            .field("excluded", &self.excluded)
            .finish()
    }
}

impl FederatorMachine {
    pub fn new(params: ProtocolParams, keys: FederatorKeys, model: Vec<f64>) -> Self {
        let modulus = keys.modulus().clone();
        let weights = params.weights(&modulus);
        let bounds = params.ratio_bounds();
        Self {
            params,
            keys,
            modulus,
            weights,
            bounds,
            model,
            excluded: BTreeSet::new(),
            next_iteration: 0,
            round: None,
            decoded: None,
        }
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn keys(&self) -> &FederatorKeys {
        &self.keys
    }

    pub fn replace_keys(&mut self, keys: FederatorKeys) {
        self.keys = keys;
    }

    pub fn model(&self) -> &[f64] {
        &self.model
    }

    pub fn set_model(&mut self, w: Vec<f64>) {
        self.model = w;
    }

    pub fn excluded(&self) -> &BTreeSet<usize> {
        &self.excluded
    }

    pub fn next_iteration(&self) -> usize {
        self.next_iteration
    }

    /// Clients addressed by the next broadcast.
    pub fn audience(&self) -> Vec<usize> {
        match &self.round {
            Some(r) if r.stage != Phase::Masked => r.speakers.clone(),
            _ => (1..=self.params.n).filter(|i| !self.excluded.contains(i)).collect(),
        }
    }

    fn broadcast(&self, iteration: usize, phase: Phase, payload: Payload) -> Message {
        Message {
            tag: RoundTag { iteration, phase },
            sender: Party::Federator,
            receiver: Receiver::AllClients,
            payload,
        }
    }

    /// Step 1: encodes the root update and broadcasts it with the model.
    pub fn start(&mut self, root_update: &[f64]) -> Result<Vec<Message>, ProtocolError> {
        let g = self.next_iteration;
        self.next_iteration += 1;
        let (q, eps, d) = (self.params.q(), self.params.eps, self.params.d);
        if root_update.len() != d {
            return Err(ProtocolError::Unexpected(format!(
                "root update length {}",
                root_update.len()
            )));
        }
        let unit = quant::normalize(root_update).map_err(|_| ProtocolError::DegenerateRoot)?;
        let mut u0 = quant::QuantizedUpdate::zeros(d, q);
        for attempt in 0..ROOT_RETRIES {
            let mut rng = substream(self.params.seed, &[0x6665, g as u64, attempt]);
            u0 = quant::quantize(&unit, q, &mut rng).expect("unit vector in range");
            if norm_passes(&BigInt::from(u0.norm_sq()), q, eps) {
                break;
            }
        }
        let u0_fe = quant::embed(&u0, &self.modulus)?;
        self.round = Some(FedRound {
            iteration: g,
            stage: Phase::Masked,
            u0: u0.coords,
            u0_fe: u0_fe.clone(),
            norm0: quant::l2_norm(root_update),
            mirrors: BTreeMap::new(),
            speakers: Vec::new(),
            checked: Vec::new(),
            norm_set: Vec::new(),
            active: Vec::new(),
            norms: Vec::new(),
            excluded: Vec::new(),
            verdicts: Vec::new(),
            expected: BTreeMap::new(),
        });
        Ok(vec![
            self.broadcast(g, Phase::Model, Payload::GlobalModel(self.model.clone())),
            self.broadcast(g, Phase::Model, Payload::FederatorUpdate(u0_fe)),
        ])
    }

    fn round(&mut self) -> Result<&mut FedRound, ProtocolError> {
        self.round
            .as_mut()
            .ok_or_else(|| ProtocolError::Unexpected("no round in progress".into()))
    }

    /// Messages addressed to the current stage from clients still in the
    /// round, in sender order; anything else is dropped.
    fn filter<'a>(&self, inbox: &'a [Message], stage: Phase, iteration: usize) -> Vec<(usize, &'a Message)> {
        let r = self.round.as_ref().expect("round");
        let mut out: Vec<(usize, &Message)> = inbox
            .iter()
            .filter(|m| m.tag.iteration == iteration && m.tag.phase == stage && m.payload.legal_in(stage))
            .filter_map(|m| m.sender.client_id().map(|i| (i, m)))
            .filter(|(i, _)| !self.excluded.contains(i) && (stage == Phase::Masked || r.speakers.contains(i)))
            .collect();
        out.sort_by_key(|(i, _)| *i);
        out.dedup_by_key(|(i, _)| *i);
        out
    }

    fn exclude(&mut self, client: usize, phase: Phase) {
        if self.excluded.insert(client) {
            let r = self.round.as_mut().expect("round");
            r.excluded.push((client, phase));
            r.speakers.retain(|&i| i != client);
            if phase.step() <= 3 {
                r.active.retain(|&i| i != client);
            }
        }
    }

    /// Step 2: accepts masked updates and relays them to every sender.
    pub fn echo(&mut self, inbox: &[Message]) -> Result<Message, ProtocolError> {
        let (g, stage) = {
            let r = self.round()?;
            (r.iteration, r.stage)
        };
        if stage != Phase::Masked {
            return Err(ProtocolError::Unexpected(format!("echo during {stage:?}")));
        }
        let d = self.params.d;
        let mut all = Vec::new();
        let mut online = Vec::new();
        let mut bad = Vec::new();
        for (i, m) in self.filter(inbox, Phase::Masked, g) {
            match &m.payload {
                Payload::MaskedUpdate(v) if v.len() == d => {
                    all.push((i, v.clone()));
                    online.push(i);
                }
                // an empty update abstains but keeps computing
                Payload::MaskedUpdate(v) if v.is_empty() => online.push(i),
                _ => bad.push(i),
            }
        }
        for i in bad {
            self.exclude(i, Phase::Masked);
        }
        let senders: Vec<usize> = all.iter().map(|(i, _)| *i).collect();
        let (n, k) = (self.params.n, self.params.k());
        let mut mirrors = BTreeMap::new();
        for &i in &online {
            let mut ev = Evaluator::new(n, k, d, self.keys.party_keys(g, i)?);
            ev.derive(&all)?;
            mirrors.insert(i, ev);
        }
        let r = self.round()?;
        for ev in mirrors.values_mut() {
            ev.cosines(&r.u0_fe, &senders)?;
        }
        r.mirrors = mirrors;
        r.speakers = online;
        r.checked = senders.clone();
        r.active = senders;
        r.stage = Phase::NormOpen;
        Ok(self.broadcast(g, Phase::Echo, Payload::MaskedEcho(all)))
    }

    /// Verifies each sender's share vector against its mirror and
    /// reconstructs every position from the first `t + 1` verified senders.
    fn verify_and_open(
        &mut self,
        phase: Phase,
        shares: Vec<(usize, Vec<TaggedShare>)>,
    ) -> Result<Vec<FieldElement>, ProtocolError> {
        let t = self.params.t;
        let alpha = self.keys.alpha.clone();
        let mut good: Vec<(usize, Vec<FieldElement>)> = Vec::new();
        let mut failed = Vec::new();
        {
            let r = self.round.as_mut().expect("round");
            for (i, v) in shares {
                let ok = match r.expected.get(&i) {
                    Some(keys) => {
                        keys.len() == v.len() && v.iter().zip(keys).all(|(s, key)| verify_share(s, &alpha, key))
                    }
                    None => false,
                };
                r.verdicts.push(Verdict { phase, sender: i, ok });
                if ok {
                    good.push((i, v.into_iter().map(|s| s.share.value).collect()));
                } else {
                    failed.push(i);
                }
            }
        }
        for i in failed {
            self.exclude(i, phase);
        }
        if good.len() < t + 1 {
            return Err(ProtocolError::InsufficientShares {
                need: t + 1,
                got: good.len(),
                phase,
            });
        }
        let used = &good[..t + 1];
        let points: Vec<usize> = used.iter().map(|(i, _)| *i).collect();
        let lag = lagrange_at_zero(&points, &self.modulus).map_err(|e| ProtocolError::Unexpected(e.to_string()))?;
        let len = used[0].1.len();
        Ok((0..len)
            .map(|c| {
                used.iter()
                    .zip(&lag)
                    .fold(self.modulus.zero(), |acc, ((_, v), l)| acc + &v[c] * l)
            })
            .collect())
    }

    fn run_mirrors<T>(
        &mut self,
        mut f: impl FnMut(&mut Evaluator<KeyShare>) -> Result<T, ProtocolError>,
    ) -> Result<BTreeMap<usize, T>, ProtocolError> {
        let r = self.round()?;
        let mut out = BTreeMap::new();
        for (&i, ev) in r.mirrors.iter_mut() {
            out.insert(i, f(ev)?);
        }
        Ok(out)
    }

    fn opening_round(&mut self, inbox: &[Message], stage: Phase) -> Result<Vec<FieldElement>, ProtocolError> {
        let g = self.round()?.iteration;
        let shares: Vec<(usize, Vec<TaggedShare>)> = self
            .filter(inbox, stage, g)
            .into_iter()
            .map(|(i, m)| match &m.payload {
                Payload::OpeningShare(v) => (i, v.clone()),
                _ => (i, Vec::new()),
            })
            .collect();
        self.verify_and_open(stage, shares)
    }

    /// Steps 3 to 5: consumes one inbox for the current stage.
    pub fn process(&mut self, inbox: &[Message]) -> Result<RoundStep, ProtocolError> {
        let (g, stage) = {
            let r = self.round()?;
            (r.iteration, r.stage)
        };
        let k = self.params.k();
        let result = match stage {
            Phase::Masked => return Ok(RoundStep::Broadcast(self.echo(inbox)?)),
            Phase::NormOpen => {
                let checked = self.round()?.checked.clone();
                let expected = self.run_mirrors(|ev| ev.norm_open(&checked))?;
                let r = self.round()?;
                r.expected = expected;
                r.norm_set = checked;
                self.opening_round(inbox, stage).and_then(|opened| {
                    let exp = self.run_mirrors(|ev| ev.norm_close(&opened))?;
                    let r = self.round()?;
                    r.expected = exp;
                    r.stage = Phase::Norm;
                    Ok(Some(self.broadcast(
                        g,
                        Phase::NormOpened,
                        Payload::OpenedValues(opened),
                    )))
                })
            }
            Phase::Norm => self.norm_round(inbox, g).map(Some),
            Phase::PowerOpen(p) => {
                let active = self.round()?.active.clone();
                let expected = self.run_mirrors(|ev| ev.power_open(p as usize, &active))?;
                self.round()?.expected = expected;
                self.opening_round(inbox, stage).and_then(|opened| {
                    self.run_mirrors(|ev| ev.power_close(&active, &opened))?;
                    self.round()?.stage = if (p as usize) < k {
                        Phase::PowerOpen(p + 1)
                    } else {
                        Phase::ScaleOpen
                    };
                    Ok(Some(self.broadcast(
                        g,
                        Phase::PowerOpened(p),
                        Payload::OpenedValues(opened),
                    )))
                })
            }
            Phase::ScaleOpen => {
                let active = self.round()?.active.clone();
                let weights = self.weights.clone();
                let expected = self.run_mirrors(|ev| ev.scale_open(&active, &weights))?;
                self.round()?.expected = expected;
                self.opening_round(inbox, stage).and_then(|opened| {
                    self.run_mirrors(|ev| ev.scale_close(&opened))?;
                    self.round()?.stage = Phase::LambdaOpen;
                    Ok(Some(self.broadcast(
                        g,
                        Phase::ScaleOpened,
                        Payload::OpenedValues(opened),
                    )))
                })
            }
            Phase::LambdaOpen => {
                let expected = self.run_mirrors(|ev| ev.lambda_open())?;
                self.round()?.expected = expected;
                self.opening_round(inbox, stage).and_then(|opened| {
                    let agg = self.run_mirrors(|ev| ev.lambda_close(&opened))?;
                    let r = self.round()?;
                    r.expected = agg
                        .into_iter()
                        .map(|(i, (s1, s2))| {
                            let mut v = vec![s1];
                            v.extend(s2);
                            (i, v)
                        })
                        .collect();
                    r.stage = Phase::Aggregate;
                    Ok(Some(self.broadcast(
                        g,
                        Phase::LambdaOpened,
                        Payload::OpenedValues(opened),
                    )))
                })
            }
            Phase::Aggregate => self.aggregate(inbox, g).map(|_| None),
            other => return Err(ProtocolError::Unexpected(format!("federator stage {other:?}"))),
        };
        match result {
            Ok(Some(msg)) => Ok(RoundStep::Broadcast(msg)),
            Ok(None) => Ok(RoundStep::Finished(Box::new(self.finish(Ok(()))))),
            Err(e) => Ok(RoundStep::Finished(Box::new(self.finish(Err(e))))),
        }
    }

    fn norm_round(&mut self, inbox: &[Message], g: usize) -> Result<Message, ProtocolError> {
        let (q, eps) = (self.params.q(), self.params.eps);
        let shares: Vec<(usize, Vec<TaggedShare>)> = self
            .filter(inbox, Phase::Norm, g)
            .into_iter()
            .map(|(i, m)| match &m.payload {
                Payload::NormShare(v) => (i, v.clone()),
                _ => (i, Vec::new()),
            })
            .collect();
        let checked = self.round()?.norm_set.clone();
        let norms = self.verify_and_open(Phase::Norm, shares)?;
        let r = self.round()?;
        let mut failing = Vec::new();
        for (j, n) in checked.iter().zip(&norms) {
            let v = n.phi_inv();
            if !norm_passes(&v, q, eps) {
                failing.push(*j);
            }
            r.norms.push((*j, v));
        }
        for j in failing {
            self.exclude(j, Phase::Norm);
        }
        let next = if self.params.k() >= 2 {
            Phase::PowerOpen(2)
        } else {
            Phase::ScaleOpen
        };
        let r = self.round()?;
        let active = r.active.clone();
        r.stage = next;
        Ok(self.broadcast(g, Phase::Exclusion, Payload::Exclusion(active)))
    }

    fn aggregate(&mut self, inbox: &[Message], g: usize) -> Result<(), ProtocolError> {
        let shares: Vec<(usize, Vec<TaggedShare>)> = self
            .filter(inbox, Phase::Aggregate, g)
            .into_iter()
            .map(|(i, m)| match &m.payload {
                Payload::AggShare { sigma1, sigma2 } => {
                    let mut v = vec![sigma1.clone()];
                    v.extend(sigma2.iter().cloned());
                    (i, v)
                }
                _ => (i, Vec::new()),
            })
            .collect();
        let opened = self.verify_and_open(Phase::Aggregate, shares)?;
        let decoded = self.decode(&opened[0], &opened[1..])?;
        let r = self.round()?;
        r.stage = Phase::Model;
        let eta = self.params.eta;
        for (w, u) in self.model.iter_mut().zip(&decoded.aggregate) {
            *w += eta * u;
        }
        self.round.as_mut().expect("round").expected.clear();
        self.decoded = Some(decoded);
        Ok(())
    }

    /// Step 5 decoding: field ratios, then bounded rational reconstruction.
    pub fn decode(&self, ls1: &FieldElement, ls2: &[FieldElement]) -> Result<Decoded, ProtocolError> {
        let inv = ls1.inverse().map_err(|_| ProtocolError::ZeroDenominator)?;
        let q = self.params.q();
        let norm0 = self.round.as_ref().map(|r| r.norm0).unwrap_or(1.0);
        let mut ratios = Vec::with_capacity(ls2.len());
        let mut aggregate = Vec::with_capacity(ls2.len());
        for (j, v) in ls2.iter().enumerate() {
            let rho = v * &inv;
            let (a, b) = rational_reconstruct(&rho, &self.bounds.num, &self.bounds.den)
                .map_err(|_| ProtocolError::ReconstructionFailure(j))?;
            aggregate.push(norm0 * dequantize_ratio(&a, &b, q).map_err(|_| ProtocolError::ZeroDenominator)?);
            ratios.push((a, b));
        }
        Ok(Decoded {
            lambda_sigma1: ls1.clone(),
            lambda_sigma2: ls2.to_vec(),
            ratios,
            aggregate,
        })
    }

    fn finish(&mut self, status: Result<(), ProtocolError>) -> RoundOutcome {
        let r = self.round.take().expect("round");
        let result = status.map(|_| self.decoded.take().expect("decoded"));
        RoundOutcome {
            iteration: r.iteration,
            checked: r.checked,
            active: r.active,
            norms: r.norms,
            excluded: r.excluded,
            verdicts: r.verdicts,
            u0: r.u0,
            norm0: r.norm0,
            result,
            model: self.model.clone(),
        }
    }
}
