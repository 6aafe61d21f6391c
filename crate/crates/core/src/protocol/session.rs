use std::collections::BTreeSet;

use crate::field::Modulus;
use crate::ttp::{self, SeqRandomness, TtpError, TtpParams, TtpRandomness};

use super::client::{ClientMachine, Submission};
use super::federator::{FederatorMachine, RoundOutcome, RoundStep};
use super::message::{Message, Party};
use super::transcript::RoundTranscript;
use super::{ProtocolError, ProtocolParams};

/// What a client sees when it trains locally.
#[derive(Debug, Clone, Copy)]
pub struct TrainContext<'a> {
    pub iteration: usize,
    pub client: usize,
    pub model: &'a [f64],
    /// Public quantized root update.
    pub root: &'a [i64],
    pub q: u64,
}

/// Protocol-layer interference: dropouts and message tampering.
pub trait RoundHooks {
    /// `true` if `client` sends nothing from `step` on in `iteration`.
    fn dropped(&self, _client: usize, _iteration: usize, _step: u8) -> bool {
        false
    }

    /// Called on every outgoing client message before delivery.
    fn tamper(&mut self, _msg: &mut Message) {}
}

pub struct NoHooks;

impl RoundHooks for NoHooks {}

#[derive(Debug, Clone)]
pub struct RoundReport {
    pub outcome: RoundOutcome,
    pub transcript: RoundTranscript,
    /// Quantized updates as submitted; simulator-side shadow for oracles.
    pub submitted: Vec<(usize, Vec<i64>)>,
}

/// The federator and all clients of one deployment.
pub struct Session {
    pub federator: FederatorMachine,
    pub clients: Vec<ClientMachine>,
}

/// Runs the trusted setup with a seeded stream and builds all parties. The
/// setup randomness is consumed here and unreachable afterwards.
pub fn setup(
    params: ProtocolParams,
    model: Vec<f64>,
    iterations: usize,
    ttp_seed: u64,
) -> Result<Session, ProtocolError> {
    let m = params.modulus();
    setup_with(params, &m, SeqRandomness::new(ttp_seed), iterations, false, model)
}

pub fn setup_with<R: TtpRandomness>(
    params: ProtocolParams,
    m: &Modulus,
    rnd: R,
    iterations: usize,
    keep_digests: bool,
    model: Vec<f64>,
) -> Result<Session, ProtocolError> {
    setup_range(params, m, rnd, iterations, 0..iterations, keep_digests, model)
}

/// Like [`setup_with`] but deals only `window` of the `horizon` iterations;
/// later windows come from [`Session::refill`].
pub fn setup_range<R: TtpRandomness>(
    params: ProtocolParams,
    m: &Modulus,
    rnd: R,
    horizon: usize,
    window: std::ops::Range<usize>,
    keep_digests: bool,
    model: Vec<f64>,
) -> Result<Session, ProtocolError> {
    let tp = TtpParams {
        n: params.n,
        t: params.t,
        d: params.d,
        k: params.k(),
        iterations: horizon,
    };
    let (bundles, keys) = ttp::initialize_range(tp, m, rnd, keep_digests, window)?;
    let clients = bundles
        .into_iter()
        .map(|b| ClientMachine::new(params.clone(), b))
        .collect();
    Ok(Session {
        federator: FederatorMachine::new(params, keys, model),
        clients,
    })
}

impl Session {
    pub fn params(&self) -> &ProtocolParams {
        self.federator.params()
    }

    /// Replaces every party's preprocessing with a fresh dealing of
    /// `window` (see [`ttp::initialize_range`]), keeping all other state.
    pub fn refill<R: TtpRandomness>(
        &mut self,
        rnd: R,
        horizon: usize,
        window: std::ops::Range<usize>,
    ) -> Result<(), ProtocolError> {
        let params = self.params().clone();
        let tp = TtpParams {
            n: params.n,
            t: params.t,
            d: params.d,
            k: params.k(),
            iterations: horizon,
        };
        let m = self.federator.modulus().clone();
        let (bundles, keys) = ttp::initialize_range(tp, &m, rnd, false, window)?;
        for (c, b) in self.clients.iter_mut().zip(bundles) {
            c.replace_bundle(b);
        }
        self.federator.replace_keys(keys);
        Ok(())
    }

    /// One global iteration: model broadcast, local training through
    /// `trainer`, then steps 1 to 5. Round aborts are reported in the
    /// outcome; errors mean the deployment itself is unusable.
    pub fn run_iteration(
        &mut self,
        root_update: &[f64],
        trainer: &mut dyn FnMut(&TrainContext) -> Option<Submission>,
        hooks: &mut dyn RoundHooks,
    ) -> Result<RoundReport, ProtocolError> {
        let g = self.federator.next_iteration();
        let horizon = self.federator.keys().horizon();
        if g >= horizon {
            return Err(TtpError::PreprocessingExhausted { iteration: g, horizon }.into());
        }
        let q = self.params().q();
        let mut tr = RoundTranscript::new(g, self.federator.modulus().clone());
        let mut gone = BTreeSet::new();

        let audience = self.federator.audience();
        let start = self.federator.start(root_update)?;
        for m in &start {
            tr.record(m.clone(), recipients(&audience));
        }
        let mut inbox = Vec::new();
        let mut submitted = Vec::new();
        for &i in &audience {
            if down(&mut gone, &*hooks, i, g, 1) {
                continue;
            }
            let client = &mut self.clients[i - 1];
            client.on_model(&start)?;
            if down(&mut gone, &*hooks, i, g, 2) {
                continue;
            }
            let (model, root) = client.model().expect("model received");
            let ctx = TrainContext {
                iteration: g,
                client: i,
                model,
                root,
                q,
            };
            let Some(sub) = trainer(&ctx) else { continue };
            let mut msg = client.submit(sub)?;
            if let Some(u) = client.quantized() {
                submitted.push((i, u.to_vec()));
            }
            hooks.tamper(&mut msg);
            tr.record(msg.clone(), vec![Party::Federator]);
            inbox.push(msg);
        }

        let mut step = RoundStep::Broadcast(self.federator.echo(&inbox)?);
        let outcome = loop {
            match step {
                RoundStep::Finished(o) => break *o,
                RoundStep::Broadcast(msg) => {
                    let audience = self.federator.audience();
                    tr.record(msg.clone(), recipients(&audience));
                    let mut inbox = Vec::new();
                    for &i in &audience {
                        if gone.contains(&i) {
                            continue;
                        }
                        let Some(mut reply) = self.clients[i - 1].handle(&msg)? else {
                            continue;
                        };
                        if down(&mut gone, &*hooks, i, g, reply.tag.step()) {
                            continue;
                        }
                        hooks.tamper(&mut reply);
                        tr.record(reply.clone(), vec![Party::Federator]);
                        inbox.push(reply);
                    }
                    step = self.federator.process(&inbox)?;
                }
            }
        };
        Ok(RoundReport {
            outcome,
            transcript: tr,
            submitted,
        })
    }
}

fn down(gone: &mut BTreeSet<usize>, hooks: &dyn RoundHooks, i: usize, g: usize, step: u8) -> bool {
    if gone.contains(&i) || hooks.dropped(i, g, step) {
        gone.insert(i);
        true
    } else {
        false
    }
}

fn recipients(ids: &[usize]) -> Vec<Party> {
    ids.iter().map(|&i| Party::Client(i)).collect()
}
