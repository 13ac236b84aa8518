//! Trial records and their on-disk layout.
//!
//! A completed trial owns a per-generation trace, per-generation extremal
//! individuals (enough to answer any later dominance query over a
//! generation range), and the final population. On disk a trial directory
//! holds `manifest.json` (config + seed + code version), `trace.csv`,
//! `history.csv`, and `final_pop/` with one genome file per individual plus
//! a summary. Floats are written in Rust's shortest round-trip form, so
//! re-running a manifest reproduces every file byte for byte.

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evolution::Individual;
use crate::genome::Genome;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write as IoWrite};
use std::path::{Path, PathBuf};
use std::time::Duration;

/// One generation's population-level numbers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_q: Option<f64>,
    pub mean_q: Option<f64>,
}

/// An individual frozen at evaluation time.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub genome: Genome,
    pub fitness: f64,
    pub q: Option<f64>,
}

impl From<&Individual> for Snapshot {
    fn from(ind: &Individual) -> Self {
        Self {
            genome: ind.genome.clone(),
            fitness: ind.fitness,
            q: ind.q,
        }
    }
}

/// The two per-generation extremes every later range query needs: the most
/// modular individual (ties to the fitter) and the fittest (ties to the
/// less modular). An undefined Q ranks below every defined one.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerationExtremes {
    pub generation: usize,
    pub most_modular: Snapshot,
    pub fittest: Snapshot,
}

fn q_rank(q: Option<f64>) -> f64 {
    q.unwrap_or(f64::NEG_INFINITY)
}

impl GenerationExtremes {
    pub fn from_population(generation: usize, pop: &[Individual]) -> Self {
        debug_assert!(!pop.is_empty());
        let mut most_modular = &pop[0];
        let mut fittest = &pop[0];
        for ind in &pop[1..] {
            if (q_rank(ind.q), ind.fitness) > (q_rank(most_modular.q), most_modular.fitness) {
                most_modular = ind;
            }
            if (ind.fitness, -q_rank(ind.q)) > (fittest.fitness, -q_rank(fittest.q)) {
                fittest = ind;
            }
        }
        Self {
            generation,
            most_modular: most_modular.into(),
            fittest: fittest.into(),
        }
    }
}

impl TraceRow {
    pub fn from_population(generation: usize, pop: &[Individual]) -> Self {
        debug_assert!(!pop.is_empty());
        let n = pop.len() as f64;
        let best_fitness = pop.iter().map(|i| i.fitness).fold(f64::NEG_INFINITY, f64::max);
        let mean_fitness = pop.iter().map(|i| i.fitness).sum::<f64>() / n;
        let qs: Vec<f64> = pop.iter().filter_map(|i| i.q).collect();
        let (best_q, mean_q) = if qs.is_empty() {
            (None, None)
        } else {
            (
                Some(qs.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                Some(qs.iter().sum::<f64>() / qs.len() as f64),
            )
        };
        Self {
            generation,
            best_fitness,
            mean_fitness,
            best_q,
            mean_q,
        }
    }
}

/// Everything one trial produced.
#[derive(Clone, Debug)]
pub struct TrialRecord {
    pub config: RunConfig,
    pub seed: u64,
    pub rows: Vec<TraceRow>,
    pub extremes: Vec<GenerationExtremes>,
    pub final_population: Vec<Snapshot>,
    pub wall_time: Duration,
}

impl TrialRecord {
    /// Final-generation trace row.
    pub fn final_row(&self) -> &TraceRow {
        self.rows.last().expect("a trial records at least one row")
    }
}

/// Reproduction header stored beside every trial's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(config: RunConfig, seed: u64) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
        }
    }
}

fn fmt_opt(value: Option<f64>) -> String {
    match value {
        Some(v) => v.to_string(),
        None => "na".to_string(),
    }
}

fn parse_f64(field: &str, ctx: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("{ctx}: bad number {field:?} ({e})")))
}

fn parse_opt(field: &str, ctx: &str) -> Result<Option<f64>> {
    if field == "na" {
        Ok(None)
    } else {
        parse_f64(field, ctx).map(Some)
    }
}

pub const TRACE_HEADER: &str = "generation,best_fitness,mean_fitness,best_q,mean_q";
pub const HISTORY_HEADER: &str = "generation,role,fitness,q,genome";
pub const FINAL_SUMMARY_HEADER: &str = "individual,fitness,q";

impl fmt::Display for TraceRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{}",
            self.generation,
            self.best_fitness,
            self.mean_fitness,
            fmt_opt(self.best_q),
            fmt_opt(self.mean_q)
        )
    }
}

/// Incremental trace writer: header immediately, one flushed line per row,
/// so long runs are inspectable mid-flight.
pub struct TraceWriter {
    out: BufWriter<fs::File>,
}

impl TraceWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = fs::File::create(path)?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{TRACE_HEADER}")?;
        out.flush()?;
        Ok(Self { out })
    }

    pub fn write_row(&mut self, row: &TraceRow) -> Result<()> {
        writeln!(self.out, "{row}")?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn write_trace_csv(rows: &[TraceRow], path: &Path) -> Result<()> {
    let mut writer = TraceWriter::create(path)?;
    for row in rows {
        writer.write_row(row)?;
    }
    Ok(())
}

pub fn load_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let ctx = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(TRACE_HEADER) => {}
        other => {
            return Err(Error::Parse(format!(
                "{ctx}: expected header {TRACE_HEADER:?}, got {other:?}"
            )))
        }
    }
    lines
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::Parse(format!(
                    "{ctx}: expected 5 fields, got {}",
                    fields.len()
                )));
            }
            Ok(TraceRow {
                generation: fields[0]
                    .parse()
                    .map_err(|e| Error::Parse(format!("{ctx}: bad generation ({e})")))?,
                best_fitness: parse_f64(fields[1], &ctx)?,
                mean_fitness: parse_f64(fields[2], &ctx)?,
                best_q: parse_opt(fields[3], &ctx)?,
                mean_q: parse_opt(fields[4], &ctx)?,
            })
        })
        .collect()
}

pub fn write_history_csv(extremes: &[GenerationExtremes], path: &Path) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{HISTORY_HEADER}")?;
    for e in extremes {
        for (role, snap) in [("most_modular", &e.most_modular), ("fittest", &e.fittest)] {
            writeln!(
                out,
                "{},{},{},{},{}",
                e.generation,
                role,
                snap.fitness,
                fmt_opt(snap.q),
                snap.genome.to_compact()
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_history_csv(path: &Path) -> Result<Vec<GenerationExtremes>> {
    let ctx = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(HISTORY_HEADER) => {}
        other => {
            return Err(Error::Parse(format!(
                "{ctx}: expected header {HISTORY_HEADER:?}, got {other:?}"
            )))
        }
    }
    let mut out: Vec<GenerationExtremes> = Vec::new();
    let mut pending: Option<(usize, Snapshot)> = None;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse(format!(
                "{ctx}: expected 5 fields, got {}",
                fields.len()
            )));
        }
        let generation: usize = fields[0]
            .parse()
            .map_err(|e| Error::Parse(format!("{ctx}: bad generation ({e})")))?;
        let snap = Snapshot {
            genome: Genome::from_compact(fields[4])
                .map_err(|e| Error::Parse(format!("{ctx}: bad genome ({e})")))?,
            fitness: parse_f64(fields[2], &ctx)?,
            q: parse_opt(fields[3], &ctx)?,
        };
        match (fields[1], pending.take()) {
            ("most_modular", None) => pending = Some((generation, snap)),
            ("fittest", Some((gen, most_modular))) if gen == generation => {
                out.push(GenerationExtremes {
                    generation,
                    most_modular,
                    fittest: snap,
                });
            }
            (role, state) => {
                return Err(Error::Parse(format!(
                    "{ctx}: unexpected row role {role:?} (pending: {})",
                    state.is_some()
                )))
            }
        }
    }
    if pending.is_some() {
        return Err(Error::Parse(format!("{ctx}: dangling most_modular row")));
    }
    Ok(out)
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Parse(format!("manifest serialization failed: {e}")))?;
    fs::write(path, json + "\n")?;
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path)?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    manifest.config.validate()?;
    Ok(manifest)
}

fn final_pop_dir(trial_dir: &Path) -> PathBuf {
    trial_dir.join("final_pop")
}

pub fn write_final_population(pop: &[Snapshot], trial_dir: &Path) -> Result<()> {
    let dir = final_pop_dir(trial_dir);
    fs::create_dir_all(&dir)?;
    let file = fs::File::create(dir.join("summary.csv"))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{FINAL_SUMMARY_HEADER}")?;
    for (k, snap) in pop.iter().enumerate() {
        writeln!(out, "{},{},{}", k, snap.fitness, fmt_opt(snap.q))?;
        fs::write(dir.join(format!("genome_{k}.txt")), snap.genome.to_text())?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_final_population(trial_dir: &Path) -> Result<Vec<Snapshot>> {
    let dir = final_pop_dir(trial_dir);
    let summary_path = dir.join("summary.csv");
    let ctx = summary_path.display().to_string();
    let text = fs::read_to_string(&summary_path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(FINAL_SUMMARY_HEADER) => {}
        other => {
            return Err(Error::Parse(format!(
                "{ctx}: expected header {FINAL_SUMMARY_HEADER:?}, got {other:?}"
            )))
        }
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!(
                "{ctx}: expected 3 fields, got {}",
                fields.len()
            )));
        }
        let index: usize = fields[0]
            .parse()
            .map_err(|e| Error::Parse(format!("{ctx}: bad index ({e})")))?;
        if index != k {
            return Err(Error::Parse(format!(
                "{ctx}: expected individual {k}, got {index}"
            )));
        }
        let genome_path = dir.join(format!("genome_{k}.txt"));
        let genome_text = fs::read_to_string(&genome_path)?;
        out.push(Snapshot {
            genome: Genome::from_text(&genome_text)
                .map_err(|e| Error::Parse(format!("{}: {e}", genome_path.display())))?,
            fitness: parse_f64(fields[1], &ctx)?,
            q: parse_opt(fields[2], &ctx)?,
        });
    }
    Ok(out)
}

/// Writes a whole trial directory. When the trace was already streamed out
/// by a [`TraceWriter`], pass `trace_written = true` to skip rewriting it.
pub fn persist_trial(record: &TrialRecord, dir: &Path, trace_written: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_manifest(
        &Manifest::new(record.config.clone(), record.seed),
        &dir.join("manifest.json"),
    )?;
    if !trace_written {
        write_trace_csv(&record.rows, &dir.join("trace.csv"))?;
    }
    write_history_csv(&record.extremes, &dir.join("history.csv"))?;
    write_final_population(&record.final_population, dir)?;
    Ok(())
}

/// A trial directory read back for analysis.
#[derive(Clone, Debug)]
pub struct LoadedTrial {
    pub manifest: Manifest,
    pub rows: Vec<TraceRow>,
    pub extremes: Vec<GenerationExtremes>,
    pub final_population: Vec<Snapshot>,
}

pub fn load_trial(dir: &Path) -> Result<LoadedTrial> {
    Ok(LoadedTrial {
        manifest: load_manifest(&dir.join("manifest.json"))?,
        rows: load_trace_csv(&dir.join("trace.csv"))?,
        extremes: load_history_csv(&dir.join("history.csv"))?,
        final_population: load_final_population(dir)?,
    })
}
