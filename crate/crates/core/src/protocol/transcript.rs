use std::collections::BTreeMap;
use std::path::Path;

use num_bigint::BigUint;
use serde::Serialize;
use serde_json::json;

use crate::codec::{CodecError, Reader, Writer};
use crate::field::Modulus;

use super::federator::{FederatorMachine, RoundOutcome, RoundStep};
use super::message::{Message, Party};
use super::ProtocolError;

const MAGIC: &[u8; 4] = b"LBTR";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ByteCount {
    pub sent: u64,
    pub received: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub msg: Message,
    pub recipients: Vec<Party>,
}

/// Every message of one iteration in delivery order, with byte counters. A
/// broadcast is stored once and counted once per recipient.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTranscript {
    pub iteration: usize,
    modulus: Modulus,
    pub records: Vec<Record>,
    pub bytes: BTreeMap<Party, ByteCount>,
}

impl RoundTranscript {
    pub fn new(iteration: usize, modulus: Modulus) -> Self {
        Self {
            iteration,
            modulus,
            records: Vec::new(),
            bytes: BTreeMap::new(),
        }
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn fe_width(&self) -> usize {
        self.modulus.byte_len()
    }

    pub fn record(&mut self, msg: Message, recipients: Vec<Party>) {
        let len = msg.encoded_len(self.fe_width()) as u64;
        self.bytes.entry(msg.sender).or_default().sent += len * recipients.len() as u64;
        for r in &recipients {
            self.bytes.entry(*r).or_default().received += len;
        }
        self.records.push(Record { msg, recipients });
    }

    pub fn party_bytes(&self, p: Party) -> ByteCount {
        self.bytes.get(&p).copied().unwrap_or_default()
    }

    /// Sent plus received.
    pub fn total(&self, p: Party) -> u64 {
        let b = self.party_bytes(p);
        b.sent + b.received
    }

    /// Messages delivered to `p`, in order.
    pub fn inbox(&self, p: Party) -> impl Iterator<Item = &Message> {
        self.records
            .iter()
            .filter(move |r| r.recipients.contains(&p))
            .map(|r| &r.msg)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(MAGIC).u32(self.iteration as u32);
        w.bytes(&self.modulus.p().to_bytes_be());
        w.len_prefix(self.records.len());
        for r in &self.records {
            let mut m = Writer::new();
            r.msg.encode(&mut m);
            w.bytes(&m.into_bytes());
            w.u16(r.recipients.len() as u16);
            for p in &r.recipients {
                w.u16(match p {
                    Party::Federator => 0,
                    Party::Client(i) => *i as u16,
                });
            }
        }
        w.into_bytes()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(buf);
        if r.bytes()? != MAGIC {
            return Err(CodecError::Invalid("transcript magic".into()));
        }
        let iteration = r.u32()? as usize;
        let modulus =
            Modulus::new(BigUint::from_bytes_be(r.bytes()?)).map_err(|e| CodecError::Invalid(e.to_string()))?;
        let mut t = RoundTranscript::new(iteration, modulus);
        let n = r.len_prefix()?;
        for _ in 0..n {
            let body = r.bytes()?;
            let msg = Message::decode(&mut Reader::new(body), &t.modulus)?;
            let k = r.u16()? as usize;
            let recipients = (0..k)
                .map(|_| {
                    r.u16().map(|c| match c {
                        0 => Party::Federator,
                        i => Party::Client(i as usize),
                    })
                })
                .collect::<Result<_, _>>()?;
            t.record(msg, recipients);
        }
        if !r.is_done() {
            return Err(CodecError::Invalid("trailing bytes".into()));
        }
        Ok(t)
    }

    /// JSON index: byte counts, verdicts, exclusions and round status.
    pub fn sidecar(&self, outcome: &RoundOutcome) -> serde_json::Value {
        let bytes: BTreeMap<String, ByteCount> = self.bytes.iter().map(|(p, b)| (party_key(*p), *b)).collect();
        json!({
            "iteration": self.iteration,
            "records": self.records.len(),
            "bytes": bytes,
            "checked": outcome.checked,
            "active": outcome.active,
            "excluded": outcome.excluded.iter().map(|(c, ph)| json!({"client": c, "phase": format!("{ph:?}")})).collect::<Vec<_>>(),
            "verdicts": outcome.verdicts,
            "status": match &outcome.result {
                Ok(_) => "ok".to_string(),
                Err(e) => e.to_string(),
            },
        })
    }

    /// Writes `round_{g}.bin` and `round_{g}.json` into `dir`.
    pub fn write(&self, dir: &Path, outcome: &RoundOutcome) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("round_{}.bin", self.iteration)), self.to_bytes())?;
        let side = serde_json::to_string_pretty(&self.sidecar(outcome)).expect("json");
        std::fs::write(dir.join(format!("round_{}.json", self.iteration)), side)
    }
}

fn party_key(p: Party) -> String {
    match p {
        Party::Federator => "federator".into(),
        Party::Client(i) => format!("client_{i}"),
    }
}

/// Feeds the recorded client messages to `fed`, which must be in the state
/// it had before the round, and checks that it emits the recorded federator
/// messages. Returns the replayed outcome.
pub fn replay(
    fed: &mut FederatorMachine,
    root_update: &[f64],
    transcript: &RoundTranscript,
) -> Result<RoundOutcome, ProtocolError> {
    let diverged = |what: &str| ProtocolError::Unexpected(format!("replay diverged: {what}"));
    let recs = &transcript.records;
    let mut pos = 0;
    for m in fed.start(root_update)? {
        if recs.get(pos).map(|r| &r.msg) != Some(&m) {
            return Err(diverged("model broadcast"));
        }
        pos += 1;
    }
    let mut first = true;
    loop {
        let mut inbox = Vec::new();
        while let Some(r) = recs.get(pos).filter(|r| r.msg.sender != Party::Federator) {
            inbox.push(r.msg.clone());
            pos += 1;
        }
        let step = if first {
            first = false;
            RoundStep::Broadcast(fed.echo(&inbox)?)
        } else {
            fed.process(&inbox)?
        };
        match step {
            RoundStep::Finished(o) => {
                if pos != recs.len() {
                    return Err(diverged("round ended early"));
                }
                return Ok(*o);
            }
            RoundStep::Broadcast(m) => {
                if recs.get(pos).map(|r| &r.msg) != Some(&m) {
                    return Err(diverged(&format!("{:?}", m.tag.phase)));
                }
                pos += 1;
            }
        }
    }
}
