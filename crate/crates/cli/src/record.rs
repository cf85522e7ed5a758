use std::io::Write;
use std::path::Path;

use anyhow::Context;
use lwf_core::config::ModelConfig;
use lwf_core::{AssumptionReport, Model};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::commands::Output;
use crate::{Cli, Format};

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Inputs {
    pub replicas: usize,
    pub t: Option<f64>,
    pub x0: Option<f64>,
    pub dt: f64,
    pub v: Option<Vec<f64>>,
    pub n_max: Option<usize>,
    pub population: usize,
    pub force: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config: ModelConfig,
    /// SHA-256 of the compact JSON form of `config`.
    pub config_hash: String,
    pub inputs: Inputs,
    pub assumption: AssumptionReport,
    pub c_infinite: bool,
    pub outputs: serde_json::Value,
    pub verdicts: Vec<Verdict>,
    pub pass: bool,
    #[serde(skip)]
    pub table: Table,
}

impl RunRecord {
    pub fn new(cli: &Cli, config: ModelConfig, model: &Model, output: Output) -> anyhow::Result<Self> {
        let canonical = serde_json::to_vec(&config)?;
        let assumption = model.check_assumption();
        Ok(Self {
            tool: env!("CARGO_BIN_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: cli.command.name(),
            seed: cli.seed,
            config,
            config_hash: hex::encode(Sha256::digest(&canonical)),
            inputs: Inputs {
                replicas: cli.replicas,
                t: cli.t,
                x0: cli.x0,
                dt: cli.dt,
                v: cli.vector()?.map(|v| v.into_entries()),
                n_max: cli.n_max,
                population: cli.population,
                force: cli.force,
            },
            c_infinite: assumption.c_is_infinite(),
            assumption,
            pass: output.verdicts.iter().all(|v| v.pass),
            outputs: output.values,
            verdicts: output.verdicts,
            table: output.table,
        })
    }

    pub fn write(&self, format: Format, out: Option<&Path>) -> anyhow::Result<()> {
        let mut sink: Box<dyn Write> = match out {
            Some(path) => Box::new(
                std::fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
            ),
            None => Box::new(std::io::stdout().lock()),
        };
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut sink, self)?;
                writeln!(sink)?;
            }
            Format::Csv => self.table.write(&mut sink)?,
        }
        sink.flush()?;
        Ok(())
    }
}

/// Rows of the main result table, emitted with `--format csv`.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&'static str]) -> Self {
        Self {
            headers: headers.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    fn write(&self, sink: &mut dyn Write) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Row builder accepting anything printable.
#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => {
        vec![$($x.to_string()),*]
    };
}
