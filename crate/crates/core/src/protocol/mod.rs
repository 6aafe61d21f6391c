//! Per-iteration secure aggregation as message-driven state machines.
//!
//! Clients and the federator exchange [`Message`]s in a fixed phase order.
//! The federator routes every opening, checks MACs on every share against
//! key mirrors of the clients' computation, and decodes the aggregate.

mod client;
mod eval;
mod federator;
mod message;
mod session;
mod transcript;
pub mod view;

use num_bigint::BigInt;

pub use client::{ClientMachine, Submission};
pub use federator::{Decoded, FederatorMachine, RoundOutcome, RoundStep, Verdict};
pub use message::{Message, Party, Payload, Phase, Receiver, RoundTag};
pub use session::{setup, setup_range, setup_with, NoHooks, RoundHooks, RoundReport, Session, TrainContext};
pub use transcript::{replay, ByteCount, Record, RoundTranscript};

use crate::beaver::BeaverError;
use crate::discriminator::EncodedPoly;
use crate::field::{min_modulus, FieldElement, FieldError, Modulus, RatioBounds};
use crate::ttp::TtpError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("insufficient shares: need {need}, got {got} in {phase:?}")]
    InsufficientShares { need: usize, got: usize, phase: Phase },
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("reconstruction failure at coordinate {0}")]
    ReconstructionFailure(usize),
    #[error("degenerate root update")]
    DegenerateRoot,
    #[error("unexpected message: {0}")]
    Unexpected(String),
    #[error(transparent)]
    Ttp(#[from] TtpError),
    #[error(transparent)]
    Beaver(#[from] BeaverError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Public parameters shared by every party.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolParams {
    pub n: usize,
    pub t: usize,
    pub d: usize,
    pub eps: f64,
    /// Global step size: `w <- w + eta * u`.
    pub eta: f64,
    pub h: EncodedPoly,
    /// Seeds the parties' quantization streams.
    pub seed: u64,
}

impl ProtocolParams {
    pub fn q(&self) -> u64 {
        self.h.q
    }

    pub fn k(&self) -> usize {
        self.h.degree()
    }

    pub fn ratio_bounds(&self) -> RatioBounds {
        self.h.ratio_bounds(self.n, self.eps)
    }

    /// Smallest modulus meeting the wrap-around and reconstruction bounds.
    pub fn modulus(&self) -> Modulus {
        min_modulus(
            self.n as u64,
            self.d as u64,
            self.k() as u32,
            self.q(),
            &self.ratio_bounds(),
        )
    }

    /// Trust-score weights `hhat_p * q^(2(k-p))` in the field, ascending.
    pub fn weights(&self, m: &Modulus) -> Vec<FieldElement> {
        self.h.weights().iter().map(|w: &BigInt| m.reduce(w)).collect()
    }
}

#[cfg(test)]
mod tests;
