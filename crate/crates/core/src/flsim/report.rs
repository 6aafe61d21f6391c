//! Communication scaling and attack-by-aggregator comparison tables.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::config::{Aggregator, ExperimentConfig};
use super::data::Dataset;
use super::train::{load_data, run_training_on, TrainError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommRow {
    pub n: usize,
    pub dim: usize,
    /// Largest per-client byte count of one round.
    pub client_bytes: u64,
    pub federator_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommReport {
    pub rows: Vec<CommRow>,
    pub client_slope: f64,
    pub federator_slope: f64,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// One secure round per `n` with everything else from `cfg`; faults are
/// cleared so that every `n` is admissible.
pub fn comm_report(cfg: &ExperimentConfig, sweep: &[usize]) -> Result<CommReport, TrainError> {
    let (train, test) = load_data(cfg)?;
    let mut rows = Vec::new();
    for &n in sweep {
        let mut c = cfg.clone();
        c.n = n;
        c.e = 0;
        c.s = 0;
        c.t = c.t.min(n.saturating_sub(1));
        c.iterations = 1;
        c.aggregator = Aggregator::LobyitflSecure;
        c.adversary = Default::default();
        c.transcripts = false;
        let r = run_training_on(&c, &train, &test, None)?;
        let m = &r.metrics[0];
        rows.push(CommRow {
            n,
            dim: r.summary.dim,
            client_bytes: m.client_bytes,
            federator_bytes: m.federator_bytes,
        });
    }
    let pts = |f: fn(&CommRow) -> u64| rows.iter().map(|r| (r.n as f64, f(r) as f64)).collect::<Vec<_>>();
    Ok(CommReport {
        client_slope: loglog_slope(&pts(|r| r.client_bytes)),
        federator_slope: loglog_slope(&pts(|r| r.federator_bytes)),
        rows,
    })
}

impl CommReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,dim,client_bytes,federator_bytes\n");
        for r in &self.rows {
            s += &format!("{},{},{},{}\n", r.n, r.dim, r.client_bytes, r.federator_bytes);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub accuracy: Vec<f64>,
    pub asr: Vec<f64>,
}

impl Cell {
    pub fn mean_std(v: &[f64]) -> (f64, f64) {
        let k = v.len().max(1) as f64;
        let m = v.iter().sum::<f64>() / k;
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / k;
        (m, var.sqrt())
    }
}

/// Rows are attacks (scenario names), columns aggregators.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct CompareTable {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub cells: BTreeMap<String, BTreeMap<String, Cell>>,
}

impl CompareTable {
    pub fn cell(&self, row: &str, col: &str) -> Option<&Cell> {
        self.cells.get(row).and_then(|r| r.get(col))
    }

    /// `mean ± std` of accuracy, with `/ ASR` appended where measured.
    pub fn render(&self) -> String {
        let mut out = format!("| attack | {} |\n", self.columns.join(" | "));
        out += &format!("|---|{}\n", "---|".repeat(self.columns.len()));
        for r in &self.rows {
            let cells: Vec<String> = self
                .columns
                .iter()
                .map(|c| match self.cell(r, c) {
                    None => "-".to_string(),
                    Some(cell) => {
                        let (m, s) = Cell::mean_std(&cell.accuracy);
                        let mut t = format!("{m:.3} ± {s:.3}");
                        if !cell.asr.is_empty() {
                            let (m, s) = Cell::mean_std(&cell.asr);
                            t += &format!(" / {m:.3} ± {s:.3}");
                        }
                        t
                    }
                })
                .collect();
            out += &format!("| {r} | {} |\n", cells.join(" | "));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("attack,aggregator,runs,accuracy_mean,accuracy_std,asr_mean,asr_std\n");
        for r in &self.rows {
            for c in &self.columns {
                if let Some(cell) = self.cell(r, c) {
                    let (am, sd) = Cell::mean_std(&cell.accuracy);
                    let (asr_m, asr_s) = if cell.asr.is_empty() {
                        (String::new(), String::new())
                    } else {
                        let (m, s) = Cell::mean_std(&cell.asr);
                        (format!("{m}"), format!("{s}"))
                    };
                    s += &format!("{r},{c},{},{am},{sd},{asr_m},{asr_s}\n", cell.accuracy.len());
                }
            }
        }
        s
    }
}

/// Runs every scenario in `configs` under each aggregator it lists (its own
/// aggregator when it lists none) for `repeats` seeds. Runs land under
/// `out` when given.
pub fn compare(configs: &[ExperimentConfig], out: Option<&Path>) -> Result<CompareTable, TrainError> {
    let mut table = CompareTable::default();
    let mut cols: Vec<Aggregator> = Vec::new();
    let mut data: BTreeMap<String, (Dataset, Dataset)> = BTreeMap::new();
    for cfg in configs {
        let row = cfg.scenario();
        if !table.rows.contains(&row) {
            table.rows.push(row.clone());
        }
        let key = serde_json::to_string(&cfg.data).expect("json");
        if !data.contains_key(&key) {
            data.insert(key.clone(), load_data(cfg)?);
        }
        let (train, test) = &data[&key];
        for agg in cfg.compare_aggregators() {
            if !cols.contains(&agg) {
                cols.push(agg);
            }
            for r in 0..cfg.repeats {
                let mut c = cfg.clone();
                c.aggregator = agg;
                c.seed = cfg.seed + r as u64;
                c.name = format!("{}-{}", cfg.name, agg.name());
                let res = run_training_on(&c, train, test, out)?;
                let cell = table
                    .cells
                    .entry(row.clone())
                    .or_default()
                    .entry(agg.name().to_string())
                    .or_insert_with(|| Cell {
                        accuracy: Vec::new(),
                        asr: Vec::new(),
                    });
                cell.accuracy.push(res.summary.final_accuracy);
                cell.asr.extend(res.summary.final_asr);
            }
        }
    }
    cols.sort();
    table.columns = cols.iter().map(|a| a.name().to_string()).collect();
    Ok(table)
}
