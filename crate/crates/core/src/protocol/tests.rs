use std::collections::BTreeSet;

use rand::Rng;

use super::*;
use crate::discriminator::default_h;
use crate::flsim::fixedpoint_oracle;
use crate::rng::substream;

fn params(n: usize, t: usize, d: usize, q: u64) -> ProtocolParams {
    ProtocolParams {
        n,
        t,
        d,
        eps: 0.02,
        eta: 1.0,
        h: default_h().encode(q, q).unwrap(),
        seed: 11,
    }
}

fn random_updates(n: usize, d: usize, seed: u64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut rng = substream(seed, &[1]);
    let mut v = || (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    let root = v();
    // Bias clients toward the root so trust scores are mostly positive.
    let ups = (0..n)
        .map(|_| v().iter().zip(&root).map(|(a, b)| a + 1.5 * b).collect())
        .collect();
    (root, ups)
}

struct Hooks {
    drops: BTreeSet<(usize, u8)>,
    tamper: Option<(usize, Phase)>,
}

impl RoundHooks for Hooks {
    fn dropped(&self, client: usize, _g: usize, step: u8) -> bool {
        self.drops.iter().any(|&(c, s)| c == client && step >= s)
    }

    fn tamper(&mut self, msg: &mut Message) {
        let Some((who, phase)) = self.tamper else { return };
        if msg.sender != Party::Client(who) || msg.tag.phase != phase {
            return;
        }
        match &mut msg.payload {
            Payload::OpeningShare(v) | Payload::NormShare(v) => {
                let m = v[0].share.value.modulus().clone();
                v[0].share.value += m.one();
            }
            Payload::AggShare { sigma2, .. } => {
                let m = sigma2[0].share.value.modulus().clone();
                sigma2[0].share.value += m.one();
            }
            _ => {}
        }
    }
}

fn run(
    p: &ProtocolParams,
    session: &mut Session,
    root: &[f64],
    subs: &[Submission],
    hooks: &mut dyn RoundHooks,
) -> RoundReport {
    let mut trainer = |ctx: &TrainContext| Some(subs[ctx.client - 1].clone());
    let _ = p;
    session.run_iteration(root, &mut trainer, hooks).unwrap()
}

fn oracle_of(report: &RoundReport, p: &ProtocolParams, excluded: &[usize]) -> crate::flsim::OracleOutput {
    let mut ups = vec![None; p.n];
    for (i, u) in &report.submitted {
        ups[i - 1] = Some(u.clone());
    }
    fixedpoint_oracle(&report.outcome.u0, &ups, excluded, &p.h, p.eps)
}

#[test]
fn honest_round_matches_integer_oracle() {
    let p = params(5, 1, 8, 128);
    for seed in 0..3 {
        let (root, ups) = random_updates(5, 8, seed);
        let mut s = setup(p.clone(), vec![0.0; 8], 1, seed).unwrap();
        let subs: Vec<_> = ups.into_iter().map(Submission::Real).collect();
        let rep = run(&p, &mut s, &root, &subs, &mut NoHooks);
        let out = rep.outcome.result.as_ref().unwrap();
        let oracle = oracle_of(&rep, &p, &[]);
        assert_eq!(rep.outcome.active, vec![1, 2, 3, 4, 5]);
        assert_eq!(oracle.active, rep.outcome.active);
        assert_eq!(Some(&out.ratios), oracle.ratios.as_ref());
        assert_eq!(rep.outcome.model, out.aggregate);
        assert!(rep.outcome.verdicts.iter().all(|v| v.ok));
    }
}

#[test]
fn single_client_recovers_its_update() {
    let p = params(3, 1, 4, 128);
    let mut s = setup(p.clone(), vec![0.0; 4], 1, 5).unwrap();
    let u1 = vec![128, 0, 0, 0];
    let mut trainer = |ctx: &TrainContext| {
        Some(if ctx.client == 1 {
            Submission::Quantized(u1.clone())
        } else {
            Submission::Abstain
        })
    };
    let rep = s
        .run_iteration(&[1.0, 1.0, 0.0, 0.0], &mut trainer, &mut NoHooks)
        .unwrap();
    assert_eq!(rep.outcome.active, vec![1]);
    assert_eq!(rep.transcript.inbox(Party::Client(3)).count(), 9);
    let out = rep.outcome.result.unwrap();
    let want: Vec<(num_bigint::BigInt, num_bigint::BigUint)> = u1.iter().map(|&x| (x.into(), 1u32.into())).collect();
    assert_eq!(out.ratios, want);
    assert!((out.aggregate[0] - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn scaled_update_is_excluded_in_step_three() {
    let p = params(4, 1, 6, 128);
    let (root, ups) = random_updates(4, 6, 9);
    let mut s = setup(p.clone(), vec![0.0; 6], 1, 2).unwrap();
    let mut subs: Vec<_> = ups.into_iter().map(Submission::Real).collect();
    let honest = crate::protocol::client::encode_update(
        match &subs[2] {
            Submission::Real(u) => u,
            _ => unreachable!(),
        },
        6,
        128,
        0.02,
        99,
        3,
        0,
    );
    subs[2] = Submission::Quantized(honest.iter().map(|x| 2 * x).collect());
    let rep = run(&p, &mut s, &root, &subs, &mut NoHooks);
    assert_eq!(rep.outcome.active, vec![1, 2, 4]);
    assert_eq!(rep.outcome.excluded, vec![(3, Phase::Norm)]);
    let oracle = oracle_of(&rep, &p, &[]);
    assert_eq!(oracle.active, vec![1, 2, 4]);
    assert_eq!(rep.outcome.result.unwrap().ratios, oracle.ratios.unwrap());
    assert!(s.federator.excluded().contains(&3));
}

#[test]
fn tampered_messages_are_caught_where_they_surface() {
    let p = params(5, 1, 4, 128);
    let (root, ups) = random_updates(5, 4, 3);
    let subs: Vec<_> = ups.into_iter().map(Submission::Real).collect();
    for (phase, same_round) in [
        (Phase::NormOpen, true),
        (Phase::Norm, true),
        (Phase::PowerOpen(2), false),
        (Phase::PowerOpen(3), false),
        (Phase::ScaleOpen, false),
        (Phase::LambdaOpen, false),
        (Phase::Aggregate, false),
    ] {
        let mut s = setup(p.clone(), vec![0.0; 4], 2, 4).unwrap();
        let mut hooks = Hooks {
            drops: BTreeSet::new(),
            tamper: Some((2, phase)),
        };
        let rep = run(&p, &mut s, &root, &subs, &mut hooks);
        assert_eq!(rep.outcome.excluded, vec![(2, phase)], "{phase:?}");
        assert!(rep
            .outcome
            .verdicts
            .iter()
            .any(|v| !v.ok && v.sender == 2 && v.phase == phase));
        let excl: &[usize] = if same_round { &[2] } else { &[] };
        let oracle = oracle_of(&rep, &p, excl);
        assert_eq!(rep.outcome.active, oracle.active, "{phase:?}");
        assert_eq!(
            rep.outcome.result.as_ref().unwrap().ratios,
            oracle.ratios.unwrap(),
            "{phase:?}"
        );
        // barred from the next iteration
        let rep2 = run(&p, &mut s, &root, &subs, &mut NoHooks);
        assert!(!rep2.outcome.checked.contains(&2));
        assert!(rep2.transcript.inbox(Party::Client(2)).next().is_none());
    }
}

#[test]
fn late_dropouts_leave_the_aggregate_unchanged() {
    let p = params(6, 1, 4, 128);
    let (root, ups) = random_updates(6, 4, 8);
    let subs: Vec<_> = ups.into_iter().map(Submission::Real).collect();
    let mut base = setup(p.clone(), vec![0.0; 4], 1, 1).unwrap();
    let want = run(&p, &mut base, &root, &subs, &mut NoHooks).outcome.result.unwrap();
    for drops in [vec![(1, 3)], vec![(6, 4), (2, 5)], vec![(3, 3), (4, 4), (5, 5)]] {
        let mut s = setup(p.clone(), vec![0.0; 4], 1, 1).unwrap();
        let mut hooks = Hooks {
            drops: drops.iter().copied().collect(),
            tamper: None,
        };
        let rep = run(&p, &mut s, &root, &subs, &mut hooks);
        assert_eq!(rep.outcome.result.unwrap(), want, "{drops:?}");
    }
    // Too many gone: fewer than t + 1 shares.
    let mut s = setup(p.clone(), vec![0.0; 4], 1, 1).unwrap();
    let mut hooks = Hooks {
        drops: (1..=5).map(|c| (c, 3)).collect(),
        tamper: None,
    };
    let rep = run(&p, &mut s, &root, &subs, &mut hooks);
    assert!(matches!(
        rep.outcome.result,
        Err(ProtocolError::InsufficientShares { need: 2, got: 1, .. })
    ));
    assert_eq!(rep.outcome.model, vec![0.0; 4]);
    // Early dropout: the update is simply absent.
    let mut s = setup(p.clone(), vec![0.0; 4], 1, 1).unwrap();
    let mut hooks = Hooks {
        drops: [(4, 2)].into_iter().collect(),
        tamper: None,
    };
    let rep = run(&p, &mut s, &root, &subs, &mut hooks);
    assert_eq!(rep.outcome.active, vec![1, 2, 3, 5, 6]);
    let oracle = oracle_of(&rep, &p, &[]);
    assert_eq!(rep.outcome.result.unwrap().ratios, oracle.ratios.unwrap());
}

#[test]
fn transcript_replays_and_round_trips() {
    let p = params(4, 1, 5, 128);
    let (root, ups) = random_updates(4, 5, 2);
    let subs: Vec<_> = ups.into_iter().map(Submission::Real).collect();
    let mut s = setup(p.clone(), vec![0.5; 5], 2, 6).unwrap();
    let before = s.federator.clone();
    let rep = run(&p, &mut s, &root, &subs, &mut NoHooks);
    let mut fresh = before.clone();
    let replayed = replay(&mut fresh, &root, &rep.transcript).unwrap();
    assert_eq!(replayed, rep.outcome);

    let bytes = rep.transcript.to_bytes();
    let back = RoundTranscript::from_bytes(&bytes).unwrap();
    assert_eq!(back, rep.transcript);
    let mut fresh = before.clone();
    assert_eq!(replay(&mut fresh, &root, &back).unwrap().model, rep.outcome.model);

    // Any altered client message makes replay diverge or change the verdicts.
    let mut bad = rep.transcript.clone();
    let idx = bad
        .records
        .iter()
        .position(|r| r.msg.tag.phase == Phase::ScaleOpen)
        .unwrap();
    if let Payload::OpeningShare(v) = &mut bad.records[idx].msg.payload {
        let m = v[0].tag.modulus().clone();
        v[0].tag += m.one();
    }
    let mut fresh = before;
    assert!(replay(&mut fresh, &root, &bad)
        .map(|o| o != rep.outcome)
        .unwrap_or(true));

    for party in [Party::Federator, Party::Client(1), Party::Client(4)] {
        let b = rep.transcript.party_bytes(party);
        assert!(b.sent > 0 && b.received > 0);
    }
    let side = rep.transcript.sidecar(&rep.outcome);
    assert_eq!(side["status"], "ok");
}

#[test]
fn horizon_is_enforced() {
    let p = params(3, 1, 2, 128);
    let mut s = setup(p.clone(), vec![0.0; 2], 1, 3).unwrap();
    let subs = vec![Submission::Real(vec![1.0, 0.5]); 3];
    run(&p, &mut s, &[1.0, 0.0], &subs, &mut NoHooks);
    let mut trainer = |_: &TrainContext| Some(subs[0].clone());
    let err = s.run_iteration(&[1.0, 0.0], &mut trainer, &mut NoHooks).unwrap_err();
    assert!(err.to_string().contains("preprocessing exhausted"), "{err}");
}

#[test]
fn masked_updates_hide_values_exhaustive() {
    // p = 11, d = 1: the published u - r is uniform for every u.
    let m = crate::field::Modulus::new_u64(11).unwrap();
    for u in 0..11u64 {
        let seen: BTreeSet<u64> = (0..11u64)
            .map(|r| (m.from_u64(u) - m.from_u64(r)).to_u64().unwrap())
            .collect();
        assert_eq!(seen.len(), 11);
    }
}
