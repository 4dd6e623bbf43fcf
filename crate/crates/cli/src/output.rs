//! CSV tables and the run manifest.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use islet_core::smc::Estimation;
use islet_core::ComparisonRow;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const TRACE_HEADER: [&str; 7] = ["step", "GDP", "logGDP", "n_miners", "n_imitators", "n_explorers", "n_islands"];
pub const ESTIMATION_HEADER: [&str; 6] = ["instance", "mean", "variance", "n", "ci_halfwidth", "converged"];
pub const SAMPLES_HEADER: [&str; 3] = ["run_index", "instance", "value"];
pub const SWEEP_HEADER: [&str; 5] = ["param_value", "instance", "mean", "ci_halfwidth", "n"];
pub const COMPARISON_HEADER: [&str; 8] = ["instance", "mean_a", "mean_b", "t", "df", "p", "reject", "power"];

/// Shortest representation that parses back to the same value.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Buffered CSV table with LF line endings.
pub struct Table {
    rows: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut rows = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        rows.write_record(header).expect("in-memory write");
        Table { rows }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.rows.write_record(fields).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.rows.into_inner().expect("in-memory flush")
    }

    pub fn save(self, path: &Path) -> Result<()> {
        write_file(path, &self.into_bytes())
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn estimation_table(est: &Estimation) -> Table {
    let mut t = Table::new(&ESTIMATION_HEADER);
    for i in &est.instances {
        t.row([
            i.label.clone(),
            num(i.mean),
            num(i.variance),
            i.n.to_string(),
            num(i.ci_halfwidth),
            i.converged.to_string(),
        ]);
    }
    t
}

pub fn samples_table(est: &Estimation) -> Table {
    let mut t = Table::new(&SAMPLES_HEADER);
    for (run, values) in est.samples.iter().enumerate() {
        for (inst, v) in est.instances.iter().zip(values) {
            t.row([run.to_string(), inst.label.clone(), num(*v)]);
        }
    }
    t
}

pub fn comparison_table(rows: &[ComparisonRow]) -> Table {
    let mut t = Table::new(&COMPARISON_HEADER);
    for r in rows {
        t.row([
            r.label.clone(),
            num(r.mean_a),
            num(r.mean_b),
            num(r.t),
            num(r.df),
            num(r.p),
            u8::from(r.reject).to_string(),
            num(r.power),
        ]);
    }
    t
}

/// One data row of a CSV file with its 1-based line number.
pub struct Record {
    pub line: u64,
    fields: csv::StringRecord,
    path: PathBuf,
    header: &'static [&'static str],
}

impl Record {
    pub fn text(&self, column: usize) -> &str {
        &self.fields[column]
    }

    fn fail(&self, column: usize, what: &str) -> CliError {
        CliError::runtime(format!(
            "{}:{}: column `{}`: {what} `{}`",
            self.path.display(),
            self.line,
            self.header[column],
            &self.fields[column]
        ))
    }

    pub fn f64(&self, column: usize) -> Result<f64> {
        self.fields[column].trim().parse().map_err(|_| self.fail(column, "not a number"))
    }

    pub fn u64(&self, column: usize) -> Result<u64> {
        self.fields[column].trim().parse().map_err(|_| self.fail(column, "not a non-negative integer"))
    }

    pub fn bool(&self, column: usize) -> Result<bool> {
        match self.fields[column].trim() {
            "true" | "1" => Ok(true),
            "false" | "0" => Ok(false),
            _ => Err(self.fail(column, "not a boolean")),
        }
    }
}

/// Reads a CSV file whose header must equal `header`.
pub fn read_table(path: &Path, header: &'static [&'static str]) -> Result<Vec<Record>> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(bytes.as_slice());
    let mut out = Vec::new();
    let mut first = true;
    for result in reader.records() {
        let fields = result.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::runtime(format!("{}:{line}: malformed CSV: {e}", path.display()))
        })?;
        let line = fields.position().map_or(0, |p| p.line());
        if first {
            first = false;
            if fields.iter().ne(header.iter().copied()) {
                return Err(CliError::runtime(format!(
                    "{}:{line}: expected header `{}`",
                    path.display(),
                    header.join(",")
                )));
            }
            continue;
        }
        if fields.len() != header.len() {
            return Err(CliError::runtime(format!(
                "{}:{line}: expected {} fields, found {}",
                path.display(),
                header.len(),
                fields.len()
            )));
        }
        out.push(Record { line, fields, path: path.to_path_buf(), header });
    }
    if first {
        return Err(CliError::runtime(format!("{}:1: empty file, expected a header", path.display())));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationRow {
    pub instance: String,
    pub mean: f64,
    pub variance: f64,
    pub n: u64,
    pub ci_halfwidth: f64,
    pub converged: bool,
}

pub fn read_estimation(path: &Path) -> Result<Vec<EstimationRow>> {
    read_table(path, &ESTIMATION_HEADER)?
        .iter()
        .map(|r| {
            Ok(EstimationRow {
                instance: r.text(0).to_owned(),
                mean: r.f64(1)?,
                variance: r.f64(2)?,
                n: r.u64(3)?,
                ci_halfwidth: r.f64(4)?,
                converged: r.bool(5)?,
            })
        })
        .collect()
}

/// `(run_index, instance, value)` triples.
pub fn read_samples(path: &Path) -> Result<Vec<(u64, String, f64)>> {
    read_table(path, &SAMPLES_HEADER)?.iter().map(|r| Ok((r.u64(0)?, r.text(1).to_owned(), r.f64(2)?))).collect()
}

/// `(instance, reject)` pairs of a comparison table.
pub fn read_decisions(path: &Path) -> Result<Vec<(String, bool)>> {
    read_table(path, &COMPARISON_HEADER)?.iter().map(|r| Ok((r.text(0).to_owned(), r.bool(6)?))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceEntry {
    pub seed: u64,
    pub file: String,
    pub steps: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateEntry {
    /// Sweep value as written in file names; `None` outside sweeps.
    pub param_value: Option<String>,
    pub config_hash: String,
    pub estimation_file: Option<String>,
    pub samples_file: Option<String>,
    pub runs: u64,
    pub blocks: u32,
    pub all_converged: bool,
    /// Instances that missed the width target.
    pub not_converged: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRecord {
    pub param_name: String,
    pub long_file: String,
    pub values: Vec<EstimateEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonEntry {
    pub a: String,
    pub b: String,
    pub file: Option<String>,
    pub rejections: usize,
    pub instances: usize,
    pub error: Option<String>,
}

/// Index of everything a pipeline wrote into one output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// Effective configuration (defaults applied), as TOML.
    pub config: String,
    /// Hash of model, SMC settings and query; outputs are merged only
    /// into a manifest with the same hash.
    pub config_hash: String,
    pub master_seed: u64,
    pub defaults_applied: Vec<String>,
    pub simulate: Option<TraceEntry>,
    pub estimate: Option<EstimateEntry>,
    pub sweep: Option<SweepRecord>,
    pub comparisons: Vec<ComparisonEntry>,
    pub plots: Vec<String>,
    /// Number of non-converged instances across all estimations.
    pub warnings: usize,
    /// Every file written, relative to the output directory.
    pub files: BTreeSet<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Manifest {
    pub fn new(config: String, config_hash: String, master_seed: u64, defaults_applied: Vec<String>) -> Self {
        Manifest {
            config,
            config_hash,
            master_seed,
            defaults_applied,
            simulate: None,
            estimate: None,
            sweep: None,
            comparisons: Vec::new(),
            plots: Vec::new(),
            warnings: 0,
            files: BTreeSet::new(),
        }
    }

    pub fn load(dir: &Path) -> Result<Option<Manifest>> {
        let path = dir.join(MANIFEST_FILE);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| CliError::runtime(format!("{}: unreadable manifest: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(CliError::io(&path, e)),
        }
    }

    /// Continues the manifest already in `dir` if it has the same config
    /// hash (taking the newer config snapshot); otherwise starts afresh.
    pub fn open(dir: &Path, fresh: Manifest) -> Result<Manifest> {
        Ok(match Manifest::load(dir)? {
            Some(mut m) if m.config_hash == fresh.config_hash => {
                m.config = fresh.config;
                m.defaults_applied = fresh.defaults_applied;
                m
            }
            _ => fresh,
        })
    }

    fn recount(&mut self) {
        let est = self.estimate.iter().chain(self.sweep.iter().flat_map(|s| &s.values));
        self.warnings = est.map(|e| e.not_converged.len()).sum();
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }

    pub fn save(&mut self, dir: &Path) -> Result<()> {
        self.recount();
        self.files.insert(MANIFEST_FILE.to_owned());
        write_file(&dir.join(MANIFEST_FILE), self.to_json().as_bytes())
    }
}
