use crate::field::FieldElement;
use crate::mac::TaggedShare;
use crate::quant::{self, norm_passes, QuantizedUpdate};
use crate::rng::substream;
use crate::ttp::ClientBundle;

use super::eval::Evaluator;
use super::message::{Message, Party, Payload, Phase, Receiver, RoundTag};
use super::{ProtocolError, ProtocolParams};

// Re-draws of the stochastic rounding before submitting anyway.
const QUANT_RETRIES: u64 = 64;

/// What a client hands to the protocol in step 2.
#[derive(Debug, Clone, PartialEq)]
pub enum Submission {
    /// Normalized and quantized by the client.
    Real(Vec<f64>),
    /// Already-quantized coordinates, submitted as is.
    Quantized(Vec<i64>),
    /// Online and computing, but contributing no update.
    Abstain,
}

struct ClientRound {
    iteration: usize,
    model: Vec<f64>,
    u0: Vec<i64>,
    u0_fe: Vec<FieldElement>,
    own_mask: Vec<FieldElement>,
    eval: Evaluator<TaggedShare>,
    checked: Vec<usize>,
    active: Vec<usize>,
    quantized: Option<Vec<i64>>,
}

pub struct ClientMachine {
    pub id: usize,
    params: ProtocolParams,
    weights: Vec<FieldElement>,
    bundle: ClientBundle,
    round: Option<ClientRound>,
}

impl std::fmt::Debug for ClientMachine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClientMachine").field("id", &self.id).finish()
    }
}

impl ClientMachine {
    pub fn new(params: ProtocolParams, bundle: ClientBundle) -> Self {
        let weights = params.weights(bundle.modulus());
        Self {
            id: bundle.id,
            params,
            weights,
            bundle,
            round: None,
        }
    }

    pub fn bundle(&self) -> &ClientBundle {
        &self.bundle
    }

    pub fn replace_bundle(&mut self, bundle: ClientBundle) {
        self.bundle = bundle;
    }

    /// Current global model and public root update, once received.
    pub fn model(&self) -> Option<(&[f64], &[i64])> {
        self.round.as_ref().map(|r| (r.model.as_slice(), r.u0.as_slice()))
    }

    /// The client's own quantized update in the current round.
    pub fn quantized(&self) -> Option<&[i64]> {
        self.round.as_ref().and_then(|r| r.quantized.as_deref())
    }

    fn out(&self, iteration: usize, phase: Phase, payload: Payload) -> Message {
        Message {
            tag: RoundTag { iteration, phase },
            sender: Party::Client(self.id),
            receiver: Receiver::To(Party::Federator),
            payload,
        }
    }

    /// Step 1 input: the model broadcast and the root update. Claims this
    /// iteration's preprocessing.
    pub fn on_model(&mut self, msgs: &[Message]) -> Result<(), ProtocolError> {
        let mut model = None;
        let mut u0 = None;
        let mut iteration = None;
        for m in msgs {
            iteration = Some(m.tag.iteration);
            match &m.payload {
                Payload::GlobalModel(w) => model = Some(w.clone()),
                Payload::FederatorUpdate(v) => u0 = Some(v.clone()),
                p => return Err(ProtocolError::Unexpected(format!("{} in model phase", p.name()))),
            }
        }
        let (Some(g), Some(model), Some(u0_fe)) = (iteration, model, u0) else {
            return Err(ProtocolError::Unexpected("incomplete model broadcast".into()));
        };
        let u0 = quant::deembed(&u0_fe).ok_or_else(|| ProtocolError::Unexpected("root update out of range".into()))?;
        let (own_mask, material) = self.bundle.take_iteration(g)?;
        let p = &self.params;
        self.round = Some(ClientRound {
            iteration: g,
            model,
            u0,
            u0_fe,
            own_mask,
            eval: Evaluator::new(p.n, p.k(), p.d, material),
            checked: Vec::new(),
            active: Vec::new(),
            quantized: None,
        });
        Ok(())
    }

    /// Step 1 and 2: encode the update and publish it under the one-time pad.
    pub fn submit(&mut self, sub: Submission) -> Result<Message, ProtocolError> {
        let (d, q, eps, seed, id) = (
            self.params.d,
            self.params.q(),
            self.params.eps,
            self.params.seed,
            self.id,
        );
        let round = self
            .round
            .as_mut()
            .ok_or_else(|| ProtocolError::Unexpected("submit before model".into()))?;
        let coords = match sub {
            Submission::Quantized(c) => c,
            Submission::Real(u) => encode_update(&u, d, q, eps, seed, id, round.iteration),
            Submission::Abstain => {
                let g = round.iteration;
                return Ok(self.out(g, Phase::Masked, Payload::MaskedUpdate(Vec::new())));
            }
        };
        let m = self.bundle.modulus();
        let ubar = quant::embed_ints(&coords, m)?;
        let masked: Vec<FieldElement> = ubar.iter().zip(&round.own_mask).map(|(u, r)| u - r).collect();
        round.quantized = Some(coords);
        let g = round.iteration;
        Ok(self.out(g, Phase::Masked, Payload::MaskedUpdate(masked)))
    }

    /// Reacts to one federator message; `None` when nothing is owed.
    pub fn handle(&mut self, msg: &Message) -> Result<Option<Message>, ProtocolError> {
        let k = self.params.k();
        let round = self
            .round
            .as_mut()
            .ok_or_else(|| ProtocolError::Unexpected("message before model".into()))?;
        if msg.tag.iteration != round.iteration {
            return Err(ProtocolError::Unexpected(format!(
                "iteration {} during {}",
                msg.tag.iteration, round.iteration
            )));
        }
        let (phase, payload) = match (&msg.payload, msg.tag.phase) {
            (Payload::MaskedEcho(all), Phase::Echo) => {
                round.eval.derive(all)?;
                round.checked = all.iter().map(|(j, _)| *j).collect();
                round.eval.cosines(&round.u0_fe, &round.checked)?;
                (
                    Phase::NormOpen,
                    Payload::OpeningShare(round.eval.norm_open(&round.checked)?),
                )
            }
            (Payload::OpenedValues(v), Phase::NormOpened) => {
                (Phase::Norm, Payload::NormShare(round.eval.norm_close(v)?))
            }
            (Payload::Exclusion(active), Phase::Exclusion) => {
                round.active = active.clone();
                if k >= 2 {
                    (
                        Phase::PowerOpen(2),
                        Payload::OpeningShare(round.eval.power_open(2, active)?),
                    )
                } else {
                    (
                        Phase::ScaleOpen,
                        Payload::OpeningShare(round.eval.scale_open(active, &self.weights)?),
                    )
                }
            }
            (Payload::OpenedValues(v), Phase::PowerOpened(p)) => {
                let p = p as usize;
                round.eval.power_close(&round.active, v)?;
                if p < k {
                    let next = round.eval.power_open(p + 1, &round.active)?;
                    (Phase::PowerOpen(p as u8 + 1), Payload::OpeningShare(next))
                } else {
                    let next = round.eval.scale_open(&round.active, &self.weights)?;
                    (Phase::ScaleOpen, Payload::OpeningShare(next))
                }
            }
            (Payload::OpenedValues(v), Phase::ScaleOpened) => {
                round.eval.scale_close(v)?;
                (Phase::LambdaOpen, Payload::OpeningShare(round.eval.lambda_open()?))
            }
            (Payload::OpenedValues(v), Phase::LambdaOpened) => {
                let (sigma1, sigma2) = round.eval.lambda_close(v)?;
                (Phase::Aggregate, Payload::AggShare { sigma1, sigma2 })
            }
            (p, phase) => {
                return Err(ProtocolError::Unexpected(format!("{} in {phase:?}", p.name())));
            }
        };
        let g = round.iteration;
        Ok(Some(self.out(g, phase, payload)))
    }
}

/// Normalize, then quantize; the rounding is redrawn until the update passes
/// the norm check it will face. Zero updates become the zero vector.
pub(crate) fn encode_update(u: &[f64], d: usize, q: u64, eps: f64, seed: u64, id: usize, g: usize) -> Vec<i64> {
    if u.len() != d {
        return vec![0; d];
    }
    let Ok(unit) = quant::normalize(u) else {
        return vec![0; d];
    };
    let mut last = QuantizedUpdate::zeros(d, q);
    for attempt in 0..QUANT_RETRIES {
        let mut rng = substream(seed, &[0x636c, id as u64, g as u64, attempt]);
        last = quant::quantize(&unit, q, &mut rng).expect("unit vector in range");
        if norm_passes(&last.norm_sq().into(), q, eps) {
            break;
        }
    }
    last.coords
}
