//! Wire messages and their deterministic binary encoding.

use serde::Serialize;

use crate::codec::{CodecError, Reader, Writer};
use crate::field::{FieldElement, Modulus};
use crate::mac::TaggedShare;
use crate::sss::ValueShare;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Party {
    Federator,
    /// 1-based; also the client's evaluation point.
    Client(usize),
}

impl Party {
    fn code(self) -> u16 {
        match self {
            Party::Federator => 0,
            Party::Client(i) => i as u16,
        }
    }

    fn from_code(c: u16) -> Self {
        if c == 0 {
            Party::Federator
        } else {
            Party::Client(c as usize)
        }
    }

    pub fn client_id(self) -> Option<usize> {
        match self {
            Party::Client(i) => Some(i),
            Party::Federator => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Receiver {
    To(Party),
    /// Every client still in the round.
    AllClients,
}

/// Phases of one iteration, in execution order. `seq` in the round tag is the
/// phase index plus a sub-counter for repeated phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Phase {
    Model,
    Masked,
    Echo,
    NormOpen,
    NormOpened,
    Norm,
    Exclusion,
    PowerOpen(u8),
    PowerOpened(u8),
    ScaleOpen,
    ScaleOpened,
    LambdaOpen,
    LambdaOpened,
    Aggregate,
}

impl Phase {
    /// Protocol step (1..=5) the phase belongs to.
    pub fn step(self) -> u8 {
        match self {
            Phase::Model => 1,
            Phase::Masked | Phase::Echo => 2,
            Phase::NormOpen | Phase::NormOpened | Phase::Norm | Phase::Exclusion => 3,
            Phase::PowerOpen(_)
            | Phase::PowerOpened(_)
            | Phase::ScaleOpen
            | Phase::ScaleOpened
            | Phase::LambdaOpen
            | Phase::LambdaOpened => 4,
            Phase::Aggregate => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Model => "model",
            Phase::Masked => "masked",
            Phase::Echo => "echo",
            Phase::NormOpen => "norm_open",
            Phase::NormOpened => "norm_opened",
            Phase::Norm => "norm",
            Phase::Exclusion => "exclusion",
            Phase::PowerOpen(_) => "power_open",
            Phase::PowerOpened(_) => "power_opened",
            Phase::ScaleOpen => "scale_open",
            Phase::ScaleOpened => "scale_opened",
            Phase::LambdaOpen => "lambda_open",
            Phase::LambdaOpened => "lambda_opened",
            Phase::Aggregate => "aggregate",
        }
    }

    fn code(self) -> (u8, u8) {
        match self {
            Phase::Model => (0, 0),
            Phase::Masked => (1, 0),
            Phase::Echo => (2, 0),
            Phase::NormOpen => (3, 0),
            Phase::NormOpened => (4, 0),
            Phase::Norm => (5, 0),
            Phase::Exclusion => (6, 0),
            Phase::PowerOpen(p) => (7, p),
            Phase::PowerOpened(p) => (8, p),
            Phase::ScaleOpen => (9, 0),
            Phase::ScaleOpened => (10, 0),
            Phase::LambdaOpen => (11, 0),
            Phase::LambdaOpened => (12, 0),
            Phase::Aggregate => (13, 0),
        }
    }

    fn from_code(c: u8, sub: u8) -> Result<Self, CodecError> {
        Ok(match c {
            0 => Phase::Model,
            1 => Phase::Masked,
            2 => Phase::Echo,
            3 => Phase::NormOpen,
            4 => Phase::NormOpened,
            5 => Phase::Norm,
            6 => Phase::Exclusion,
            7 => Phase::PowerOpen(sub),
            8 => Phase::PowerOpened(sub),
            9 => Phase::ScaleOpen,
            10 => Phase::ScaleOpened,
            11 => Phase::LambdaOpen,
            12 => Phase::LambdaOpened,
            13 => Phase::Aggregate,
            _ => return Err(CodecError::Invalid(format!("phase code {c}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RoundTag {
    pub iteration: usize,
    pub phase: Phase,
}

impl RoundTag {
    pub fn step(&self) -> u8 {
        self.phase.step()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    GlobalModel(Vec<f64>),
    FederatorUpdate(Vec<FieldElement>),
    MaskedUpdate(Vec<FieldElement>),
    /// Every masked update of the round, relayed verbatim.
    MaskedEcho(Vec<(usize, Vec<FieldElement>)>),
    OpeningShare(Vec<TaggedShare>),
    OpenedValues(Vec<FieldElement>),
    /// Shares of `||u_j||^2`, one per client under check.
    NormShare(Vec<TaggedShare>),
    /// Clients admitted to the rest of the round, ascending.
    Exclusion(Vec<usize>),
    AggShare {
        sigma1: TaggedShare,
        sigma2: Vec<TaggedShare>,
    },
}

impl Payload {
    fn code(&self) -> u8 {
        match self {
            Payload::GlobalModel(_) => 0,
            Payload::FederatorUpdate(_) => 1,
            Payload::MaskedUpdate(_) => 2,
            Payload::MaskedEcho(_) => 3,
            Payload::OpeningShare(_) => 4,
            Payload::OpenedValues(_) => 5,
            Payload::NormShare(_) => 6,
            Payload::Exclusion(_) => 7,
            Payload::AggShare { .. } => 8,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Payload::GlobalModel(_) => "GlobalModel",
            Payload::FederatorUpdate(_) => "FederatorUpdate",
            Payload::MaskedUpdate(_) => "MaskedUpdate",
            Payload::MaskedEcho(_) => "MaskedEcho",
            Payload::OpeningShare(_) => "OpeningShare",
            Payload::OpenedValues(_) => "OpenedValues",
            Payload::NormShare(_) => "NormShare",
            Payload::Exclusion(_) => "Exclusion",
            Payload::AggShare { .. } => "AggShare",
        }
    }

    /// Which payloads may appear in which phase.
    pub fn legal_in(&self, phase: Phase) -> bool {
        matches!(
            (self, phase),
            (Payload::GlobalModel(_) | Payload::FederatorUpdate(_), Phase::Model)
                | (Payload::MaskedUpdate(_), Phase::Masked)
                | (Payload::MaskedEcho(_), Phase::Echo)
                | (
                    Payload::OpeningShare(_),
                    Phase::NormOpen | Phase::PowerOpen(_) | Phase::ScaleOpen | Phase::LambdaOpen
                )
                | (
                    Payload::OpenedValues(_),
                    Phase::NormOpened | Phase::PowerOpened(_) | Phase::ScaleOpened | Phase::LambdaOpened
                )
                | (Payload::NormShare(_), Phase::Norm)
                | (Payload::Exclusion(_), Phase::Exclusion)
                | (Payload::AggShare { .. }, Phase::Aggregate)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub tag: RoundTag,
    pub sender: Party,
    pub receiver: Receiver,
    pub payload: Payload,
}

// iteration u32, phase u8 + u8, sender u16, receiver u16, payload code u8
const HEADER_LEN: usize = 4 + 2 + 2 + 2 + 1;
const LEN_PREFIX: usize = 4;
const BROADCAST: u16 = u16::MAX;

fn fes_len(n: usize, w: usize) -> usize {
    LEN_PREFIX + n * w
}

fn tagged_len(n: usize, w: usize) -> usize {
    LEN_PREFIX + 2 * n * w
}

impl Message {
    /// Encoded size in bytes for field elements of `fe_width` bytes, without
    /// encoding.
    pub fn encoded_len(&self, fe_width: usize) -> usize {
        let w = fe_width;
        HEADER_LEN
            + match &self.payload {
                Payload::GlobalModel(v) => LEN_PREFIX + 8 * v.len(),
                Payload::FederatorUpdate(v) | Payload::MaskedUpdate(v) | Payload::OpenedValues(v) => {
                    fes_len(v.len(), w)
                }
                Payload::MaskedEcho(v) => LEN_PREFIX + v.iter().map(|(_, x)| 2 + fes_len(x.len(), w)).sum::<usize>(),
                Payload::OpeningShare(v) | Payload::NormShare(v) => tagged_len(v.len(), w),
                Payload::Exclusion(v) => LEN_PREFIX + 2 * v.len(),
                Payload::AggShare { sigma2, .. } => 2 * w + tagged_len(sigma2.len(), w),
            }
    }

    pub fn encode(&self, w: &mut Writer) {
        let (pc, sub) = self.tag.phase.code();
        w.u32(self.tag.iteration as u32).u8(pc).u8(sub).u16(self.sender.code());
        w.u16(match self.receiver {
            Receiver::To(p) => p.code(),
            Receiver::AllClients => BROADCAST,
        });
        w.u8(self.payload.code());
        match &self.payload {
            Payload::GlobalModel(v) => {
                w.len_prefix(v.len());
                for x in v {
                    w.f64(*x);
                }
            }
            Payload::FederatorUpdate(v) | Payload::MaskedUpdate(v) | Payload::OpenedValues(v) => {
                w.fes(v);
            }
            Payload::MaskedEcho(v) => {
                w.len_prefix(v.len());
                for (j, x) in v {
                    w.u16(*j as u16).fes(x);
                }
            }
            Payload::OpeningShare(v) | Payload::NormShare(v) => write_tagged(w, v),
            Payload::Exclusion(v) => {
                w.len_prefix(v.len());
                for j in v {
                    w.u16(*j as u16);
                }
            }
            Payload::AggShare { sigma1, sigma2 } => {
                w.fe(&sigma1.share.value).fe(&sigma1.tag);
                write_tagged(w, sigma2);
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode(&mut w);
        w.into_bytes()
    }

    pub fn decode(r: &mut Reader, m: &Modulus) -> Result<Self, CodecError> {
        let iteration = r.u32()? as usize;
        let pc = r.u8()?;
        let sub = r.u8()?;
        let phase = Phase::from_code(pc, sub)?;
        let sender = Party::from_code(r.u16()?);
        let receiver = match r.u16()? {
            BROADCAST => Receiver::AllClients,
            c => Receiver::To(Party::from_code(c)),
        };
        let index = sender.client_id().unwrap_or(0);
        let payload = match r.u8()? {
            0 => {
                let n = r.len_prefix()?;
                Payload::GlobalModel((0..n).map(|_| r.f64()).collect::<Result<_, _>>()?)
            }
            1 => Payload::FederatorUpdate(r.fes(m)?),
            2 => Payload::MaskedUpdate(r.fes(m)?),
            3 => {
                let n = r.len_prefix()?;
                let mut v = Vec::with_capacity(n);
                for _ in 0..n {
                    let j = r.u16()? as usize;
                    v.push((j, r.fes(m)?));
                }
                Payload::MaskedEcho(v)
            }
            4 => Payload::OpeningShare(read_tagged(r, m, index)?),
            5 => Payload::OpenedValues(r.fes(m)?),
            6 => Payload::NormShare(read_tagged(r, m, index)?),
            7 => {
                let n = r.len_prefix()?;
                Payload::Exclusion((0..n).map(|_| r.u16().map(|x| x as usize)).collect::<Result<_, _>>()?)
            }
            8 => {
                let value = r.fe(m)?;
                let tag = r.fe(m)?;
                let sigma1 = TaggedShare {
                    share: ValueShare { index, value },
                    tag,
                };
                Payload::AggShare {
                    sigma1,
                    sigma2: read_tagged(r, m, index)?,
                }
            }
            c => return Err(CodecError::Invalid(format!("payload code {c}"))),
        };
        Ok(Message {
            tag: RoundTag { iteration, phase },
            sender,
            receiver,
            payload,
        })
    }
}

fn write_tagged(w: &mut Writer, v: &[TaggedShare]) {
    w.len_prefix(v.len());
    for s in v {
        w.fe(&s.share.value).fe(&s.tag);
    }
}

fn read_tagged(r: &mut Reader, m: &Modulus, index: usize) -> Result<Vec<TaggedShare>, CodecError> {
    let n = r.len_prefix()?;
    (0..n)
        .map(|_| {
            let value = r.fe(m)?;
            let tag = r.fe(m)?;
            Ok(TaggedShare {
                share: ValueShare { index, value },
                tag,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(m: &Modulus) -> Vec<Message> {
        let fe = |v: u64| m.from_u64(v);
        let ts = |v: u64| TaggedShare {
            share: ValueShare { index: 3, value: fe(v) },
            tag: fe(v + 1),
        };
        let tag = |phase| RoundTag { iteration: 7, phase };
        let c = Party::Client(3);
        let f = Party::Federator;
        vec![
            Message {
                tag: tag(Phase::Model),
                sender: f,
                receiver: Receiver::AllClients,
                payload: Payload::GlobalModel(vec![0.5, -1.25]),
            },
            Message {
                tag: tag(Phase::Model),
                sender: f,
                receiver: Receiver::AllClients,
                payload: Payload::FederatorUpdate(vec![fe(1), fe(2)]),
            },
            Message {
                tag: tag(Phase::Masked),
                sender: c,
                receiver: Receiver::To(f),
                payload: Payload::MaskedUpdate(vec![fe(9)]),
            },
            Message {
                tag: tag(Phase::Echo),
                sender: f,
                receiver: Receiver::AllClients,
                payload: Payload::MaskedEcho(vec![(1, vec![fe(4)]), (3, vec![fe(5), fe(6)])]),
            },
            Message {
                tag: tag(Phase::PowerOpen(3)),
                sender: c,
                receiver: Receiver::To(f),
                payload: Payload::OpeningShare(vec![ts(1), ts(2)]),
            },
            Message {
                tag: tag(Phase::ScaleOpened),
                sender: f,
                receiver: Receiver::To(c),
                payload: Payload::OpenedValues(vec![fe(8)]),
            },
            Message {
                tag: tag(Phase::Norm),
                sender: c,
                receiver: Receiver::To(f),
                payload: Payload::NormShare(vec![ts(5)]),
            },
            Message {
                tag: tag(Phase::Exclusion),
                sender: f,
                receiver: Receiver::AllClients,
                payload: Payload::Exclusion(vec![1, 2, 4]),
            },
            Message {
                tag: tag(Phase::Aggregate),
                sender: c,
                receiver: Receiver::To(f),
                payload: Payload::AggShare {
                    sigma1: ts(3),
                    sigma2: vec![ts(4), ts(6), ts(8)],
                },
            },
        ]
    }

    #[test]
    fn round_trip_and_analytic_length() {
        for p in [101u64, (1 << 61) - 1] {
            let m = Modulus::new_u64(p).unwrap();
            for msg in samples(&m) {
                assert!(msg.payload.legal_in(msg.tag.phase), "{}", msg.payload.name());
                let bytes = msg.to_bytes();
                assert_eq!(bytes.len(), msg.encoded_len(m.byte_len()), "{}", msg.payload.name());
                let back = Message::decode(&mut Reader::new(&bytes), &m).unwrap();
                assert_eq!(back, msg);
            }
        }
    }

    #[test]
    fn phase_legality() {
        let m = Modulus::new_u64(101).unwrap();
        assert!(!Payload::MaskedUpdate(vec![m.one()]).legal_in(Phase::Echo));
        assert!(!Payload::Exclusion(vec![]).legal_in(Phase::Norm));
        assert_eq!(Phase::Exclusion.step(), 3);
        assert_eq!(Phase::Aggregate.step(), 5);
    }
}
