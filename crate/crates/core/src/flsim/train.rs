//! The training loop shared by every aggregator.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::aggregate::{fedavg, fltrust_poly_real, fltrust_relu, krum, trimmed_mean};
use super::config::{Aggregator, DataSpec, ExperimentConfig, ModelSpec};
use super::data::{gaussian_split, load_mnist, mnist_dir, partition, sample, Dataset};
use super::model::{local_train, Arch, Model};
use super::oracle::fixedpoint_oracle;
use super::FlError;
use crate::adversary::{
    attack_success_rate, backdoor_dataset, directed_attack, fang_krum, fang_trim, label_flip, scale, triggered_test,
    Attack, ProtocolAdversary,
};
use crate::protocol::{setup_range, Party, ProtocolError, Session, Submission, TrainContext};
use crate::rng::substream;
use crate::ttp::LabeledRandomness;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] super::config::ConfigError),
    #[error(transparent)]
    Data(#[from] FlError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("writing {path}: {msg}")]
    Io { path: String, msg: String },
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> TrainError + '_ {
    move |e| TrainError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterMetrics {
    pub iteration: usize,
    pub test_loss: f64,
    pub test_accuracy: f64,
    /// Backdoor success rate; empty unless the attack is `scaling`.
    pub asr: Option<f64>,
    /// Largest per-client byte count (sent plus received) this round.
    pub client_bytes: u64,
    pub federator_bytes: u64,
    pub active: usize,
    pub excluded_total: usize,
    pub aborted: bool,
    /// Secure aggregator only: decoded ratios equal the integer oracle's.
    pub oracle_match: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub seed: u64,
    pub aggregator: String,
    pub attack: String,
    pub dim: usize,
    pub modulus_bits: Option<u64>,
    pub iterations: usize,
    pub final_accuracy: f64,
    pub final_loss: f64,
    pub final_asr: Option<f64>,
    pub aborted_rounds: usize,
    pub oracle_mismatches: usize,
    /// `(client, phase)` of every exclusion.
    pub excluded: Vec<(usize, String)>,
    pub total_client_bytes: u64,
    pub total_federator_bytes: u64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub metrics: Vec<IterMetrics>,
    pub summary: RunSummary,
    pub model: Model,
    pub dir: Option<PathBuf>,
}

/// Train/test data as configured.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset), FlError> {
    match &cfg.data {
        DataSpec::Synthetic {
            train,
            test,
            dim,
            classes,
            spread,
        } => {
            // the data seed is fixed so that repeats share one task
            Ok(gaussian_split(
                *train,
                *test,
                *dim,
                *classes,
                *spread,
                &mut substream(0x5eed, &[]),
            ))
        }
        DataSpec::Mnist { train, test, pool, dir } => {
            let dir = mnist_dir(dir.as_deref())?;
            let (tr, te) = load_mnist(&dir, Some(*train), Some(*test))?;
            Ok((tr.pool(*pool)?, te.pool(*pool)?))
        }
    }
}

fn arch_for(cfg: &ExperimentConfig, data: &Dataset) -> Arch {
    match cfg.model {
        ModelSpec::Logreg => Arch::Logreg {
            inputs: data.dim,
            classes: data.classes,
        },
        ModelSpec::Mlp { hidden } => Arch::Mlp {
            inputs: data.dim,
            hidden,
            classes: data.classes,
        },
    }
}

/// Runs one experiment; with `out` set, writes `metrics.csv`,
/// `summary.json` and (secure aggregator) `transcripts/` under
/// [`ExperimentConfig::run_dir`].
pub fn run_training(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunResult, TrainError> {
    let (train, test) = load_data(cfg)?;
    run_training_on(cfg, &train, &test, out)
}

pub fn run_training_on(
    cfg: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
    out: Option<&Path>,
) -> Result<RunResult, TrainError> {
    cfg.validate()?;
    let seed = cfg.seed;
    let n = cfg.n;
    let spec = cfg.adversary_spec();
    let h_real = cfg.discriminator()?;

    let root = sample(train, cfg.root_size, &mut substream(seed, &[0x726f6f74]));
    let mut parts = partition(train, n, cfg.gamma, &mut substream(seed, &[0x70617274]));
    let target = match spec.attack {
        Attack::Scaling { target, .. } => Some(target),
        _ => None,
    };
    for &b in &spec.byzantine {
        let p = &mut parts[b - 1];
        match spec.attack {
            Attack::LabelFlip => *p = label_flip(p),
            Attack::Scaling { target, .. } => *p = backdoor_dataset(p, target),
            _ => {}
        }
    }
    let trigger_set = target.map(|t| triggered_test(test, t));

    let arch = arch_for(cfg, train);
    let mut model = Model::init(arch, &mut substream(seed, &[0x696e6974]));
    let d = model.dim();

    let dir = out.map(|o| cfg.run_dir(Some(o)));
    if let Some(dir) = &dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }

    let secure = cfg.aggregator == Aggregator::LobyitflSecure;
    let params = cfg.protocol_params(d)?;
    let ttp_seed = seed ^ 0x7474_7000;
    let mut session: Option<Session> = None;
    let mut modulus_bits = None;
    if secure {
        let m = params.modulus();
        modulus_bits = Some(m.bits());
        let w = cfg.ttp_window.min(cfg.iterations);
        session = Some(setup_range(
            params.clone(),
            &m,
            LabeledRandomness::new(ttp_seed),
            cfg.iterations,
            0..w,
            false,
            model.w.clone(),
        )?);
    }
    let mut hooks = ProtocolAdversary::new(&spec, seed ^ 0xadd);

    let mut metrics = Vec::with_capacity(cfg.iterations);
    let mut excluded: Vec<(usize, String)> = Vec::new();
    for g in 0..cfg.iterations {
        // local training, every client on the same global model
        let mut updates: Vec<Vec<f64>> = (1..=n)
            .map(|i| {
                let mut rng = substream(seed, &[0x6c6f63, i as u64, g as u64]);
                local_train(
                    &model,
                    &parts[i - 1],
                    cfg.eta_local,
                    cfg.local_iters,
                    cfg.batch,
                    &mut rng,
                )
            })
            .collect();
        let u0 = local_train(
            &model,
            &root,
            cfg.eta_local,
            cfg.local_iters,
            cfg.batch,
            &mut substream(seed, &[0x6c6f63, 0, g as u64]),
        );
        poison(cfg, &spec.attack, &spec.byzantine, &mut updates, &u0, &h_real, g);

        let mut row = IterMetrics {
            iteration: g,
            test_loss: 0.0,
            test_accuracy: 0.0,
            asr: None,
            client_bytes: 0,
            federator_bytes: 0,
            active: 0,
            excluded_total: 0,
            aborted: false,
            oracle_match: None,
        };
        if let Some(s) = session.as_mut() {
            let w = cfg.ttp_window;
            if g > 0 && g % w == 0 {
                s.refill(
                    LabeledRandomness::new(ttp_seed),
                    cfg.iterations,
                    g..(g + w).min(cfg.iterations),
                )?;
            }
            let before: Vec<usize> = s.federator.excluded().iter().copied().collect();
            let mut trainer = |ctx: &TrainContext| Some(Submission::Real(updates[ctx.client - 1].clone()));
            let report = s.run_iteration(&u0, &mut trainer, &mut hooks)?;
            let o = &report.outcome;
            model.w = o.model.clone();
            row.aborted = o.aborted();
            row.active = o.active.len();
            excluded.extend(o.excluded.iter().map(|(c, p)| (*c, p.name().to_string())));
            row.federator_bytes = report.transcript.total(Party::Federator);
            row.client_bytes = (1..=n)
                .map(|i| report.transcript.total(Party::Client(i)))
                .max()
                .unwrap_or(0);
            if spec.byzantine.is_empty() && spec.dropouts.is_empty() {
                let mut ups = vec![None; n];
                for (i, u) in &report.submitted {
                    ups[i - 1] = Some(u.clone());
                }
                let oracle = fixedpoint_oracle(&o.u0, &ups, &before, &params.h, params.eps);
                row.oracle_match = Some(o.result.as_ref().ok().map(|r| &r.ratios) == oracle.ratios.as_ref());
            }
            if cfg.transcripts {
                if let Some(dir) = &dir {
                    let tdir = dir.join("transcripts");
                    report.transcript.write(&tdir, o).map_err(io_err(&tdir))?;
                }
            }
        } else {
            let live: Vec<Vec<f64>> = (1..=n)
                .filter(|&i| !hooks_drop_early(&hooks, i, g))
                .map(|i| updates[i - 1].clone())
                .collect();
            row.active = live.len();
            let agg = match cfg.aggregator {
                Aggregator::Fedavg => fedavg(&live),
                Aggregator::FltrustRelu => fltrust_relu(&live, &u0),
                Aggregator::FltrustPolyReal => fltrust_poly_real(&live, &u0, &h_real),
                Aggregator::Krum => krum(&live, cfg.e),
                Aggregator::TrimmedMean => trimmed_mean(&live, cfg.e),
                Aggregator::LobyitflSecure => unreachable!(),
            };
            row.aborted = agg.iter().all(|v| *v == 0.0);
            model.w.iter_mut().zip(&agg).for_each(|(w, u)| *w += cfg.eta * u);
        }
        row.excluded_total = excluded.len();
        row.test_loss = model.loss(test);
        row.test_accuracy = model.accuracy(test);
        row.asr = trigger_set.as_ref().map(|t| attack_success_rate(&model, t));
        metrics.push(row);
    }

    let last = metrics.last().expect("at least one iteration");
    let summary = RunSummary {
        name: cfg.name.clone(),
        seed,
        aggregator: cfg.aggregator.name().to_string(),
        attack: spec.attack.name().to_string(),
        dim: d,
        modulus_bits,
        iterations: cfg.iterations,
        final_accuracy: last.test_accuracy,
        final_loss: last.test_loss,
        final_asr: last.asr,
        aborted_rounds: metrics.iter().filter(|m| m.aborted).count(),
        oracle_mismatches: metrics.iter().filter(|m| m.oracle_match == Some(false)).count(),
        excluded,
        total_client_bytes: metrics.iter().map(|m| m.client_bytes).sum(),
        total_federator_bytes: metrics.iter().map(|m| m.federator_bytes).sum(),
    };
    if let Some(dir) = &dir {
        write_metrics(&dir.join("metrics.csv"), &metrics)?;
        let p = dir.join("summary.json");
        fs::write(&p, serde_json::to_string_pretty(&summary).expect("json")).map_err(io_err(&p))?;
    }
    Ok(RunResult {
        metrics,
        summary,
        model,
        dir,
    })
}

fn hooks_drop_early(h: &ProtocolAdversary, client: usize, g: usize) -> bool {
    use crate::protocol::RoundHooks;
    h.dropped(client, g, 2)
}

/// Replaces the Byzantine clients' updates according to the attack.
fn poison(
    cfg: &ExperimentConfig,
    attack: &Attack,
    byz: &[usize],
    updates: &mut [Vec<f64>],
    u0: &[f64],
    h: &crate::discriminator::DiscriminatorPoly,
    g: usize,
) {
    if byz.is_empty() {
        return;
    }
    let e = byz.len();
    match attack {
        Attack::Scaling { factor, .. } => {
            for &b in byz {
                updates[b - 1] = scale(&updates[b - 1], *factor);
            }
        }
        Attack::Directed { grid, min_trust } => {
            let own: Vec<Vec<f64>> = byz.iter().map(|&b| updates[b - 1].clone()).collect();
            let honest_weight = (cfg.n - e) as f64 / e as f64;
            let v = directed_attack(&own, u0, h, honest_weight, *grid, *min_trust);
            for &b in byz {
                updates[b - 1] = v.clone();
            }
        }
        Attack::FangKrum | Attack::FangTrim => {
            // full knowledge: the attacker sees every benign update
            let benign: Vec<Vec<f64>> = updates.to_vec();
            let crafted = match attack {
                Attack::FangKrum => fang_krum(&benign, e),
                _ => fang_trim(&benign, e, &mut substream(cfg.seed, &[0x66616e67, g as u64])),
            };
            for (&b, c) in byz.iter().zip(crafted) {
                updates[b - 1] = c;
            }
        }
        Attack::None | Attack::LabelFlip | Attack::Corruption { .. } => {}
    }
}

fn write_metrics(path: &Path, metrics: &[IterMetrics]) -> Result<(), TrainError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| TrainError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    for m in metrics {
        w.serialize(m).map_err(|e| TrainError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
    }
    w.flush().map_err(io_err(path))
}
