use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ensure_dir, ExperimentConfig, Method};
use super::eval::{evaluate, RunResult};
use super::train::{build_data, train};
use crate::{Error, Result};

pub const RESULTS_HEADER: [&str; 10] =
    ["method", "k", "seed", "fpr95", "auroc", "aupr", "id_acc", "gamma", "wall_ms", "status"];

/// A method, optionally pinned to one diversity level (`aux:1000`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodSpec {
    pub method: Method,
    pub k: Option<usize>,
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some((m, k)) => Ok(Self {
                method: m.trim().parse()?,
                k: Some(k.trim().parse().map_err(|e| Error::config(format!("method `{s}`: {e}")))?),
            }),
            None => Ok(Self { method: s.trim().parse()?, k: None }),
        }
    }
}

/// Parses a comma-separated list.
pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<T>().map_err(|e| Error::config(format!("`{t}`: {e}"))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepCell {
    pub method: Method,
    /// Diversity level; 0 for methods that use no outliers.
    pub k: usize,
    pub seed: u64,
}

impl SweepCell {
    /// Expands method specs over `k_levels` (unless pinned) and `seeds`.
    /// `no-aux` ignores the diversity level and yields one cell per seed.
    pub fn grid(methods: &[MethodSpec], k_levels: &[usize], seeds: &[u64]) -> Vec<SweepCell> {
        let mut cells = Vec::new();
        for spec in methods {
            let ks: Vec<usize> = match (spec.method.uses_aux(), spec.k) {
                (false, _) => vec![0],
                (true, Some(k)) => vec![k],
                (true, None) => k_levels.to_vec(),
            };
            for &k in &ks {
                for &seed in seeds {
                    cells.push(SweepCell { method: spec.method, k, seed });
                }
            }
        }
        cells
    }

    pub fn config(&self, base: &ExperimentConfig) -> ExperimentConfig {
        let mut cfg = self.method.apply(base, self.k.max(1));
        cfg.seed = self.seed;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cell: SweepCell,
    pub result: std::result::Result<RunResult, String>,
}

/// Trains and evaluates one cell. Errors are captured in the row.
pub fn run_cell(base: &ExperimentConfig, cell: SweepCell) -> SweepRow {
    let start = Instant::now();
    let cfg = cell.config(base);
    let outcome = (|| {
        cfg.validate()?;
        let data = build_data(&cfg)?;
        let (model, history) = train(&cfg, &data)?;
        let mut r = evaluate(&model, &data.id_test, &data.ood_tests, cfg.score, cfg.num_classes())?;
        r.history = history;
        Ok::<_, Error>(r)
    })();
    let wall_ms = start.elapsed().as_millis();
    SweepRow {
        cell,
        result: outcome
            .map(|mut r| {
                r.wall_ms = wall_ms;
                r
            })
            .map_err(|e| e.to_string()),
    }
}

/// Runs every cell (in parallel) and, when `out_dir` is given, writes
/// `results.csv` and `results_by_set.csv` there. Row order follows the cell
/// grid regardless of execution order.
pub fn run_sweep(
    base: &ExperimentConfig,
    methods: &[MethodSpec],
    k_levels: &[usize],
    seeds: &[u64],
    out_dir: Option<&Path>,
) -> Result<Vec<SweepRow>> {
    if methods.is_empty() || seeds.is_empty() {
        return Err(Error::config("sweep needs at least one method and one seed"));
    }
    if k_levels.is_empty() && methods.iter().any(|m| m.method.uses_aux() && m.k.is_none()) {
        return Err(Error::config("sweep needs k levels for unpinned outlier methods"));
    }
    base.validate()?;
    let cells = SweepCell::grid(methods, k_levels, seeds);
    let rows: Vec<SweepRow> = cells.par_iter().map(|&c| run_cell(base, c)).collect();
    if let Some(dir) = out_dir {
        let dir = ensure_dir(dir)?;
        write_results_csv(&rows, std::fs::File::create(dir.join("results.csv"))?)?;
        write_results_by_set_csv(&rows, std::fs::File::create(dir.join("results_by_set.csv"))?)?;
        std::fs::write(dir.join("config.json"), base.to_json())?;
    }
    Ok(rows)
}

#[derive(Serialize)]
struct ResultRecord<'a> {
    method: &'a str,
    k: usize,
    seed: u64,
    fpr95: Option<f64>,
    auroc: Option<f64>,
    aupr: Option<f64>,
    id_acc: Option<f64>,
    gamma: Option<f64>,
    wall_ms: u128,
    status: String,
}

pub fn write_results_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(RESULTS_HEADER)?;
    for row in rows {
        let rec = match &row.result {
            Ok(r) => ResultRecord {
                method: row.cell.method.name(),
                k: row.cell.k,
                seed: row.cell.seed,
                fpr95: Some(r.aggregate.fpr95),
                auroc: Some(r.aggregate.auroc),
                aupr: Some(r.aggregate.aupr),
                id_acc: Some(r.aggregate.id_acc),
                gamma: Some(r.aggregate.gamma),
                wall_ms: r.wall_ms,
                status: "ok".into(),
            },
            Err(e) => ResultRecord {
                method: row.cell.method.name(),
                k: row.cell.k,
                seed: row.cell.seed,
                fpr95: None,
                auroc: None,
                aupr: None,
                id_acc: None,
                gamma: None,
                wall_ms: 0,
                status: format!("error: {e}"),
            },
        };
        wtr.serialize(rec)?;
    }
    wtr.flush()?;
    Ok(())
}

fn write_results_by_set_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["method", "k", "seed", "set", "fpr95", "auroc", "aupr"])?;
    for row in rows {
        if let Ok(r) = &row.result {
            for s in &r.per_set {
                wtr.serialize((
                    row.cell.method.name(),
                    row.cell.k,
                    row.cell.seed,
                    &s.name,
                    s.report.fpr95,
                    s.report.auroc,
                    s.report.aupr,
                ))?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// `results.csv` text with the `wall_ms` column blanked, for run-to-run comparison.
pub fn results_without_timing(text: &str) -> Result<String> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let col = RESULTS_HEADER.iter().position(|h| *h == "wall_ms").expect("wall_ms column");
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let fields: Vec<&str> = rec
            .iter()
            .enumerate()
            .map(|(i, f)| if i == col && n > 0 { "" } else { f })
            .collect();
        wtr.write_record(fields)?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("utf-8 csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_method_five_seed_grid_has_twenty_cells() {
        let methods = parse_list::<MethodSpec>("no-aux,aux:10,aux:1000,diversemix:10").unwrap();
        let cells = SweepCell::grid(&methods, &[], &[0, 1, 2, 3, 4]);
        assert_eq!(cells.len(), 20);
    }

    #[test]
    fn unpinned_methods_cross_k_levels() {
        let methods = parse_list::<MethodSpec>("no-aux,aux,diversemix").unwrap();
        let cells = SweepCell::grid(&methods, &[10, 1000], &[7]);
        assert_eq!(cells.len(), 5);
        assert_eq!(cells[0], SweepCell { method: Method::NoAux, k: 0, seed: 7 });
    }

    #[test]
    fn method_spec_parsing() {
        assert_eq!(
            "aux:1000".parse::<MethodSpec>().unwrap(),
            MethodSpec { method: Method::Aux, k: Some(1000) }
        );
        assert!("aux:x".parse::<MethodSpec>().is_err());
        assert!(parse_list::<u64>("1,2,x").is_err());
        assert_eq!(parse_list::<u64>("1, 2,3").unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn timing_column_is_blanked() {
        let text = "method,k,seed,fpr95,auroc,aupr,id_acc,gamma,wall_ms,status\naux,10,0,0.1,0.9,0.9,1.0,2.0,1234,ok\n";
        let out = results_without_timing(text).unwrap();
        assert_eq!(out, "method,k,seed,fpr95,auroc,aupr,id_acc,gamma,wall_ms,status\naux,10,0,0.1,0.9,0.9,1.0,2.0,,ok\n");
    }
}
