//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversary::{AdversarySpec, Attack, Dropout};
use crate::discriminator::{default_h, DiscriminatorPoly, EncodedPoly};
use crate::protocol::ProtocolParams;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {msg}")]
    Read { path: String, msg: String },
    #[error("invalid `{field}`: {msg}")]
    Invalid { field: &'static str, msg: String },
}

fn invalid(field: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, msg: msg.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    Fedavg,
    FltrustRelu,
    FltrustPolyReal,
    LobyitflSecure,
    Krum,
    TrimmedMean,
}

impl Aggregator {
    pub fn name(self) -> &'static str {
        match self {
            Aggregator::Fedavg => "fedavg",
            Aggregator::FltrustRelu => "fltrust_relu",
            Aggregator::FltrustPolyReal => "fltrust_poly_real",
            Aggregator::LobyitflSecure => "lobyitfl_secure",
            Aggregator::Krum => "krum",
            Aggregator::TrimmedMean => "trimmed_mean",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSpec {
    Synthetic {
        #[serde(default = "d_syn_train")]
        train: usize,
        #[serde(default = "d_syn_test")]
        test: usize,
        #[serde(default = "d_syn_dim")]
        dim: usize,
        #[serde(default = "d_classes")]
        classes: usize,
        #[serde(default = "d_spread")]
        spread: f64,
    },
    Mnist {
        #[serde(default = "d_mnist_train")]
        train: usize,
        #[serde(default = "d_mnist_test")]
        test: usize,
        /// Side of the square blocks averaged into one feature.
        #[serde(default = "d_pool")]
        pool: usize,
        /// Falls back to `$LOBYITFL_DATA_DIR`.
        #[serde(default)]
        dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Logreg,
    Mlp {
        #[serde(default = "d_hidden")]
        hidden: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySection {
    /// Defaults to clients `n - e + 1 ..= n`.
    #[serde(default)]
    pub byzantine: Option<Vec<usize>>,
    #[serde(default)]
    pub colluders: Vec<usize>,
    #[serde(default)]
    pub dropouts: Vec<Dropout>,
    #[serde(default = "d_attack")]
    pub attack: Attack,
}

impl Default for AdversarySection {
    fn default() -> Self {
        Self {
            byzantine: None,
            colluders: Vec::new(),
            dropouts: Vec::new(),
            attack: Attack::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "d_seed")]
    pub seed: u64,
    /// Seeds `seed .. seed + repeats` when comparing.
    #[serde(default = "d_one")]
    pub repeats: usize,
    pub n: usize,
    #[serde(default = "d_one")]
    pub t: usize,
    #[serde(default)]
    pub e: usize,
    #[serde(default)]
    pub s: usize,
    pub iterations: usize,
    pub aggregator: Aggregator,
    #[serde(default = "d_q")]
    pub q: u64,
    /// Discriminator coefficient scale; defaults to `q`.
    #[serde(default)]
    pub q_c: Option<u64>,
    #[serde(default = "d_eps")]
    pub eps: f64,
    /// Discriminator coefficients, constant term first.
    #[serde(default)]
    pub h: Option<Vec<f64>>,
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    /// Global learning rate.
    #[serde(default = "d_eta")]
    pub eta: f64,
    #[serde(default = "d_eta_local")]
    pub eta_local: f64,
    /// Local iterations per round.
    #[serde(default = "d_one")]
    pub local_iters: usize,
    #[serde(default = "d_batch")]
    pub batch: usize,
    #[serde(default = "d_root")]
    pub root_size: usize,
    /// Iterations dealt per trusted-setup window (memory bound only).
    #[serde(default = "d_window")]
    pub ttp_window: usize,
    #[serde(default = "d_model")]
    pub model: ModelSpec,
    pub data: DataSpec,
    #[serde(default)]
    pub adversary: AdversarySection,
    /// Write per-round transcripts (secure aggregator only).
    #[serde(default = "d_true")]
    pub transcripts: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Aggregators to run this scenario under in `compare`.
    #[serde(default)]
    pub compare: Option<Vec<Aggregator>>,
    /// Row label in `compare`; defaults to the attack name.
    #[serde(default)]
    pub scenario: Option<String>,
}

fn d_syn_train() -> usize {
    2000
}
fn d_syn_test() -> usize {
    500
}
fn d_syn_dim() -> usize {
    20
}
fn d_classes() -> usize {
    10
}
fn d_spread() -> f64 {
    1.0
}
fn d_mnist_train() -> usize {
    5000
}
fn d_mnist_test() -> usize {
    1000
}
fn d_pool() -> usize {
    4
}
fn d_hidden() -> usize {
    128
}
fn d_attack() -> Attack {
    Attack::None
}
fn d_seed() -> u64 {
    1
}
fn d_one() -> usize {
    1
}
fn d_q() -> u64 {
    1024
}
fn d_eps() -> f64 {
    0.02
}
fn d_gamma() -> f64 {
    0.1
}
fn d_eta() -> f64 {
    1.0
}
fn d_eta_local() -> f64 {
    0.1
}
fn d_batch() -> usize {
    64
}
fn d_root() -> usize {
    100
}
fn d_window() -> usize {
    4
}
fn d_model() -> ModelSpec {
    ModelSpec::Logreg
}
fn d_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Read {
            path: "<config>".into(),
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Read { msg, .. } => ConfigError::Read {
                path: path.display().to_string(),
                msg,
            },
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn scenario(&self) -> String {
        self.scenario
            .clone()
            .unwrap_or_else(|| self.adversary.attack.name().to_string())
    }

    pub fn compare_aggregators(&self) -> Vec<Aggregator> {
        self.compare.clone().unwrap_or_else(|| vec![self.aggregator])
    }

    pub fn byzantine(&self) -> Vec<usize> {
        self.adversary
            .byzantine
            .clone()
            .unwrap_or_else(|| (self.n - self.e.min(self.n) + 1..=self.n).collect())
    }

    pub fn adversary_spec(&self) -> AdversarySpec {
        AdversarySpec {
            byzantine: self.byzantine(),
            colluders: self.adversary.colluders.clone(),
            dropouts: self.adversary.dropouts.clone(),
            attack: self.adversary.attack.clone(),
        }
    }

    pub fn discriminator(&self) -> Result<DiscriminatorPoly, ConfigError> {
        match &self.h {
            None => Ok(default_h()),
            Some(c) => DiscriminatorPoly::new(c.clone()).map_err(|e| invalid("h", e.to_string())),
        }
    }

    pub fn encoded_h(&self) -> Result<EncodedPoly, ConfigError> {
        self.discriminator()?
            .encode(self.q_c.unwrap_or(self.q), self.q)
            .map_err(|e| invalid("q_c", e.to_string()))
    }

    pub fn protocol_params(&self, d: usize) -> Result<ProtocolParams, ConfigError> {
        Ok(ProtocolParams {
            n: self.n,
            t: self.t,
            d,
            eps: self.eps,
            eta: self.eta,
            h: self.encoded_h()?,
            seed: self.seed,
        })
    }

    /// Output directory for this run.
    pub fn run_dir(&self, out: Option<&Path>) -> PathBuf {
        let base = out
            .map(Path::to_path_buf)
            .or_else(|| self.out.clone())
            .unwrap_or_else(|| "runs".into());
        base.join(format!("{}-s{}", self.name, self.seed))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(invalid("name", "must be a non-empty file name"));
        }
        if self.n == 0 {
            return Err(invalid("n", "need at least one client"));
        }
        let need = self.e + self.t + self.s + 1;
        if self.n < need {
            return Err(invalid(
                "n",
                format!(
                    "n = {} < e + t + s + 1 = {need} (e = {}, t = {}, s = {})",
                    self.n, self.e, self.t, self.s
                ),
            ));
        }
        if self.q < 2 {
            return Err(invalid("q", "must be at least 2"));
        }
        if self.q_c == Some(0) {
            return Err(invalid("q_c", "must be positive"));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(invalid("eps", "must be positive"));
        }
        if self.iterations == 0 {
            return Err(invalid("iterations", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(invalid("gamma", "must lie in [0, 1]"));
        }
        if self.repeats == 0 {
            return Err(invalid("repeats", "must be at least 1"));
        }
        if self.batch == 0 || self.local_iters == 0 || self.ttp_window == 0 {
            return Err(invalid("batch", "batch, local_iters and ttp_window must be positive"));
        }
        if let Some(b) = &self.adversary.byzantine {
            if b.len() != self.e {
                return Err(invalid(
                    "adversary.byzantine",
                    format!("{} ids listed but e = {}", b.len(), self.e),
                ));
            }
        }
        self.discriminator()?;
        self.adversary_spec()
            .validate(self.n, self.t, self.s)
            .map_err(|e| invalid("adversary", e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMOKE: &str = r#"
name = "smoke"
n = 4
t = 1
iterations = 3
aggregator = "lobyitfl_secure"
q = 64

[data]
kind = "synthetic"
train = 400
test = 100
"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_toml(SMOKE).unwrap();
        assert_eq!(c.eps, 0.02);
        assert_eq!(c.model, ModelSpec::Logreg);
        assert_eq!(c.byzantine(), Vec::<usize>::new());
        let again = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_too_few_clients() {
        let text = SMOKE.replace("n = 4\nt = 1", "n = 5\nt = 2\ne = 2\ns = 1");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { field: "n", .. }), "{err}");
        assert!(err.to_string().contains("5 < e + t + s + 1 = 6"));
    }

    #[test]
    fn rejects_bad_fields() {
        for (from, to, field) in [
            ("q = 64", "q = 1", "q"),
            ("iterations = 3", "iterations = 0", "iterations"),
            ("q = 64", "q = 64\neps = 0.0", "eps"),
        ] {
            let err = ExperimentConfig::from_toml(&SMOKE.replace(from, to)).unwrap_err();
            assert!(
                matches!(err, ConfigError::Invalid { field: f, .. } if f == field),
                "{err}"
            );
        }
        assert!(ExperimentConfig::from_toml(&SMOKE.replace("q = 64", "q = 64\nbogus = 1")).is_err());
    }

    #[test]
    fn attack_tables_parse() {
        let text = format!(
            "{SMOKE}\n[adversary]\nattack = {{ kind = \"directed\", grid = 16 }}\ndropouts = [{{ client = 2, step = 3 }}]\n"
        )
        .replace("n = 4\nt = 1", "n = 6\nt = 1\ne = 1\ns = 1");
        let c = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(c.byzantine(), vec![6]);
        assert!(matches!(c.adversary.attack, Attack::Directed { grid: 16, .. }));
    }
}
