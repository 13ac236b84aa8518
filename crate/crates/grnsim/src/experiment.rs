//! Experiment suite: named treatments over a shared base configuration,
//! seed-matched replicate trials distributed over a worker pool, and
//! paired significance tests on the declared comparisons.
//!
//! Trial `k` of every treatment derives its randomness from the same
//! sub-seed, so per-trial differences between treatments are paired
//! observations and the signed-rank test applies directly.

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evolution::{run_trial_observed, run_trial_with_seed};
use crate::record::{persist_trial, TraceWriter, TrialRecord};
use crate::seed;
use crate::stats::{wilcoxon_signed_rank, Alternative, PairedSamples};
use rayon::prelude::*;
use serde::Deserialize;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write as IoWrite};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Trials per treatment when a spec does not say otherwise.
pub const DEFAULT_TRIALS: usize = 20;

/// Minimum seed-matched pairs before a p-value is reported.
pub const MIN_PAIRS_FOR_P: usize = 5;

pub const RESULTS_HEADER: &str =
    "treatment,trial,seed,final_best_fitness,final_mean_fitness,final_best_q,final_mean_q";
pub const COMPARISONS_HEADER: &str = "metric,a,b,alternative,n_pairs,mean_a,mean_b,w,p";

/// Final-generation quantity a comparison tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    FinalBestFitness,
    FinalMeanFitness,
    FinalBestQ,
    FinalMeanQ,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "final_best_fitness" => Ok(Metric::FinalBestFitness),
            "final_mean_fitness" => Ok(Metric::FinalMeanFitness),
            "final_best_q" => Ok(Metric::FinalBestQ),
            "final_mean_q" => Ok(Metric::FinalMeanQ),
            other => Err(Error::Config(format!(
                "unknown metric {other:?}; expected final_best_fitness, \
                 final_mean_fitness, final_best_q, or final_mean_q"
            ))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Metric::FinalBestFitness => "final_best_fitness",
            Metric::FinalMeanFitness => "final_mean_fitness",
            Metric::FinalBestQ => "final_best_q",
            Metric::FinalMeanQ => "final_mean_q",
        };
        f.write_str(s)
    }
}

/// A named set of config overrides applied on top of the base.
#[derive(Clone, Debug)]
pub struct Treatment {
    pub name: String,
    pub overrides: Vec<(String, String)>,
}

/// A directional (or two-sided) paired test between two treatments.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub metric: Metric,
    pub a: String,
    pub b: String,
    pub alternative: Alternative,
}

/// A full experiment: base config, treatments, replicate count, seeding,
/// and the comparisons to test.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub name: String,
    pub trials: usize,
    pub master_seed: u64,
    pub base: Vec<(String, String)>,
    pub treatments: Vec<Treatment>,
    pub comparisons: Vec<Comparison>,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    name: String,
    #[serde(default = "default_trials")]
    trials: usize,
    master_seed: u64,
    #[serde(default)]
    base: toml::Table,
    #[serde(default, rename = "treatment")]
    treatments: Vec<TreatmentFile>,
    #[serde(default, rename = "comparison")]
    comparisons: Vec<ComparisonFile>,
}

#[derive(Deserialize)]
struct TreatmentFile {
    name: String,
    #[serde(flatten)]
    overrides: toml::Table,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ComparisonFile {
    metric: String,
    a: String,
    b: String,
    alternative: String,
}

fn value_to_string(key: &str, value: &toml::Value) -> Result<String> {
    match value {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        toml::Value::Array(items) => {
            let parts: Result<Vec<String>> =
                items.iter().map(|v| value_to_string(key, v)).collect();
            Ok(parts?.join(" "))
        }
        other => Err(Error::Config(format!(
            "spec key {key:?} has unsupported value type {}",
            other.type_str()
        ))),
    }
}

fn table_to_overrides(table: &toml::Table) -> Result<Vec<(String, String)>> {
    table
        .iter()
        .map(|(k, v)| Ok((k.clone(), value_to_string(k, v)?)))
        .collect()
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: SpecFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("experiment spec: {e}")))?;
        let spec = ExperimentSpec {
            name: file.name,
            trials: file.trials,
            master_seed: file.master_seed,
            base: table_to_overrides(&file.base)?,
            treatments: file
                .treatments
                .into_iter()
                .map(|t| {
                    Ok(Treatment {
                        overrides: table_to_overrides(&t.overrides)?,
                        name: t.name,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
            comparisons: file
                .comparisons
                .into_iter()
                .map(|c| {
                    Ok(Comparison {
                        metric: c.metric.parse()?,
                        a: c.a,
                        b: c.b,
                        alternative: c.alternative.parse()?,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !valid_name(&self.name) {
            return Err(Error::Config(format!(
                "experiment name {:?} must be nonempty and use only letters, \
                 digits, '_', '-', '.'",
                self.name
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.treatments.is_empty() {
            return Err(Error::Config("spec declares no treatments".into()));
        }
        for t in &self.treatments {
            if !valid_name(&t.name) {
                return Err(Error::Config(format!(
                    "treatment name {:?} must be nonempty and use only letters, \
                     digits, '_', '-', '.'",
                    t.name
                )));
            }
            if self.treatments.iter().filter(|o| o.name == t.name).count() > 1 {
                return Err(Error::Config(format!(
                    "duplicate treatment name {:?}",
                    t.name
                )));
            }
            // Materializing the config surfaces bad keys or values now.
            self.config_for(t)?;
        }
        for c in &self.comparisons {
            for side in [&c.a, &c.b] {
                if !self.treatments.iter().any(|t| &t.name == side) {
                    return Err(Error::Config(format!(
                        "comparison references unknown treatment {side:?}"
                    )));
                }
            }
            if c.a == c.b {
                return Err(Error::Config(format!(
                    "comparison pits treatment {:?} against itself",
                    c.a
                )));
            }
        }
        Ok(())
    }

    /// The run configuration for one treatment: defaults, then the base
    /// overrides, then the treatment's own.
    pub fn config_for(&self, treatment: &Treatment) -> Result<RunConfig> {
        let base = RunConfig::default()
            .with_overrides(&self.base)
            .map_err(|e| Error::Config(format!("base config: {e}")))?;
        base.with_overrides(&treatment.overrides)
            .map_err(|e| Error::Config(format!("treatment {:?}: {e}", treatment.name)))
    }

    /// Sub-seed for replicate `trial`; identical across treatments so that
    /// per-trial treatment differences are paired observations.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        seed::trial_seed(self.master_seed, &self.name, trial)
    }
}

/// Final-generation aggregates of one completed trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialSummary {
    pub treatment: String,
    pub trial: usize,
    pub seed: u64,
    pub final_best_fitness: f64,
    pub final_mean_fitness: f64,
    pub final_best_q: Option<f64>,
    pub final_mean_q: Option<f64>,
}

impl TrialSummary {
    fn from_record(treatment: &str, trial: usize, record: &TrialRecord) -> Self {
        let row = record.final_row();
        TrialSummary {
            treatment: treatment.to_string(),
            trial,
            seed: record.seed,
            final_best_fitness: row.best_fitness,
            final_mean_fitness: row.mean_fitness,
            final_best_q: row.best_q,
            final_mean_q: row.mean_q,
        }
    }

    fn metric(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::FinalBestFitness => Some(self.final_best_fitness),
            Metric::FinalMeanFitness => Some(self.final_mean_fitness),
            Metric::FinalBestQ => self.final_best_q,
            Metric::FinalMeanQ => self.final_mean_q,
        }
    }
}

/// A trial that did not produce a record.
#[derive(Clone, Debug)]
pub struct TrialFailure {
    pub treatment: String,
    pub trial: usize,
    pub message: String,
}

/// One evaluated comparison. `w` and `p` are absent when fewer than
/// [`MIN_PAIRS_FOR_P`] pairs completed or no difference was nonzero.
#[derive(Clone, Debug)]
pub struct ComparisonRow {
    pub metric: Metric,
    pub a: String,
    pub b: String,
    pub alternative: Alternative,
    pub n_pairs: usize,
    pub mean_a: Option<f64>,
    pub mean_b: Option<f64>,
    pub w: Option<f64>,
    pub p: Option<f64>,
}

/// A completed trial together with its place in the suite.
#[derive(Clone, Debug)]
pub struct CompletedTrial {
    pub treatment: String,
    pub trial: usize,
    pub record: TrialRecord,
}

/// Everything a suite run produced.
#[derive(Debug)]
pub struct ExperimentRun {
    pub summaries: Vec<TrialSummary>,
    pub failures: Vec<TrialFailure>,
    pub comparisons: Vec<ComparisonRow>,
    pub records: Vec<CompletedTrial>,
}

fn trial_dir(out_dir: &Path, treatment: &str, trial: usize) -> PathBuf {
    out_dir.join(treatment).join(format!("trial_{trial}"))
}

fn run_one(
    cfg: &RunConfig,
    seed: u64,
    dir: Option<PathBuf>,
) -> std::result::Result<TrialRecord, String> {
    let attempt = catch_unwind(AssertUnwindSafe(|| -> Result<TrialRecord> {
        match dir {
            Some(dir) => {
                fs::create_dir_all(&dir)?;
                let mut writer = TraceWriter::create(&dir.join("trace.csv"))?;
                let record =
                    run_trial_observed(cfg, seed, &mut |row| writer.write_row(row))?;
                persist_trial(&record, &dir, true)?;
                Ok(record)
            }
            None => run_trial_with_seed(cfg, seed),
        }
    }));
    match attempt {
        Ok(Ok(record)) => Ok(record),
        Ok(Err(e)) => Err(e.to_string()),
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic with non-string payload".to_string());
            Err(format!("trial panicked: {message}"))
        }
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn evaluate_comparison(
    spec: &ExperimentSpec,
    comparison: &Comparison,
    summaries: &[TrialSummary],
) -> ComparisonRow {
    let lookup = |treatment: &str, trial: usize| -> Option<&TrialSummary> {
        summaries
            .iter()
            .find(|s| s.treatment == treatment && s.trial == trial)
    };
    let mut pairs = Vec::new();
    let mut dropped_q = 0usize;
    for trial in 0..spec.trials {
        let (Some(sa), Some(sb)) = (lookup(&comparison.a, trial), lookup(&comparison.b, trial))
        else {
            continue;
        };
        match (sa.metric(comparison.metric), sb.metric(comparison.metric)) {
            (Some(va), Some(vb)) => pairs.push((va, vb)),
            _ => dropped_q += 1,
        }
    }
    if dropped_q > 0 {
        log::warn!(
            "comparison {} {} vs {}: dropped {dropped_q} pair(s) with undefined Q",
            comparison.metric,
            comparison.a,
            comparison.b
        );
    }

    let n_pairs = pairs.len();
    let (mean_a, mean_b) = if n_pairs == 0 {
        (None, None)
    } else {
        let a: Vec<f64> = pairs.iter().map(|&(x, _)| x).collect();
        let b: Vec<f64> = pairs.iter().map(|&(_, y)| y).collect();
        (Some(mean(&a)), Some(mean(&b)))
    };

    let (w, p) = if n_pairs >= MIN_PAIRS_FOR_P {
        let samples = PairedSamples::new(pairs).expect("n_pairs >= 5 pairs exist");
        match wilcoxon_signed_rank(&samples, comparison.alternative) {
            Ok(outcome) => (Some(outcome.w), Some(outcome.p)),
            Err(Error::NoSignal(_)) => {
                log::warn!(
                    "comparison {} {} vs {}: all paired differences are zero",
                    comparison.metric,
                    comparison.a,
                    comparison.b
                );
                (None, None)
            }
            Err(e) => {
                log::warn!(
                    "comparison {} {} vs {} failed: {e}",
                    comparison.metric,
                    comparison.a,
                    comparison.b
                );
                (None, None)
            }
        }
    } else {
        (None, None)
    };

    ComparisonRow {
        metric: comparison.metric,
        a: comparison.a.clone(),
        b: comparison.b.clone(),
        alternative: comparison.alternative,
        n_pairs,
        mean_a,
        mean_b,
        w,
        p,
    }
}

/// Runs the whole suite: `trials` replicates of every treatment spread
/// over `workers` threads, each trial persisted under
/// `out_dir/<treatment>/trial_<k>/` when an output directory is given.
/// Failed trials are reported and skipped by aggregation.
pub fn run_experiment(
    spec: &ExperimentSpec,
    out_dir: Option<&Path>,
    workers: usize,
) -> Result<ExperimentRun> {
    spec.validate()?;
    if workers == 0 {
        return Err(Error::InvalidValue("worker count must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;

    let configs: Vec<RunConfig> = spec
        .treatments
        .iter()
        .map(|t| spec.config_for(t))
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
    }

    let tasks: Vec<(usize, usize)> = (0..spec.treatments.len())
        .flat_map(|t| (0..spec.trials).map(move |k| (t, k)))
        .collect();
    let outcomes: Vec<std::result::Result<TrialRecord, String>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(t, k)| {
                let dir = out_dir.map(|d| trial_dir(d, &spec.treatments[t].name, k));
                run_one(&configs[t], spec.trial_seed(k), dir)
            })
            .collect()
    });

    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    let mut records = Vec::new();
    for (&(t, k), outcome) in tasks.iter().zip(outcomes) {
        let treatment = &spec.treatments[t].name;
        match outcome {
            Ok(record) => {
                summaries.push(TrialSummary::from_record(treatment, k, &record));
                records.push(CompletedTrial {
                    treatment: treatment.clone(),
                    trial: k,
                    record,
                });
            }
            Err(message) => {
                log::warn!("trial {k} of treatment {treatment:?} failed: {message}");
                failures.push(TrialFailure {
                    treatment: treatment.clone(),
                    trial: k,
                    message,
                });
            }
        }
    }
    if !failures.is_empty() {
        log::warn!(
            "{} of {} trials failed; aggregating the rest",
            failures.len(),
            tasks.len()
        );
    }

    let comparisons: Vec<ComparisonRow> = spec
        .comparisons
        .iter()
        .map(|c| evaluate_comparison(spec, c, &summaries))
        .collect();

    if let Some(dir) = out_dir {
        write_results_csv(&summaries, &dir.join("results.csv"))?;
        write_comparisons_csv(&comparisons, &dir.join("comparisons.csv"))?;
    }

    Ok(ExperimentRun {
        summaries,
        failures,
        comparisons,
        records,
    })
}

fn fmt_opt(value: Option<f64>) -> String {
    match value {
        Some(v) => v.to_string(),
        None => "na".to_string(),
    }
}

pub fn results_csv_text(summaries: &[TrialSummary]) -> String {
    let mut text = String::from(RESULTS_HEADER);
    text.push('\n');
    for s in summaries {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.treatment,
            s.trial,
            s.seed,
            s.final_best_fitness,
            s.final_mean_fitness,
            fmt_opt(s.final_best_q),
            fmt_opt(s.final_mean_q),
        ));
    }
    text
}

pub fn comparisons_csv_text(rows: &[ComparisonRow]) -> String {
    let mut text = String::from(COMPARISONS_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.metric,
            r.a,
            r.b,
            r.alternative,
            r.n_pairs,
            fmt_opt(r.mean_a),
            fmt_opt(r.mean_b),
            fmt_opt(r.w),
            fmt_opt(r.p),
        ));
    }
    text
}

pub fn write_results_csv(summaries: &[TrialSummary], path: &Path) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    out.write_all(results_csv_text(summaries).as_bytes())?;
    out.flush()?;
    Ok(())
}

fn parse_opt(field: &str) -> Result<Option<f64>> {
    if field == "na" {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Parse(format!("bad numeric field {field:?}")))
}

/// Reads a `results.csv` written by [`write_results_csv`].
pub fn load_results_csv(path: &Path) -> Result<Vec<TrialSummary>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == RESULTS_HEADER => {}
        other => {
            return Err(Error::Parse(format!(
                "{}: expected header {RESULTS_HEADER:?}, found {other:?}",
                path.display()
            )))
        }
    }
    let mut summaries = Vec::new();
    for (idx, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse(format!(
                "{} row {}: expected 7 fields, found {}",
                path.display(),
                idx + 2,
                fields.len()
            )));
        }
        let bad = |what: &str| Error::Parse(format!("{} row {}: {what}", path.display(), idx + 2));
        summaries.push(TrialSummary {
            treatment: fields[0].to_string(),
            trial: fields[1].parse().map_err(|_| bad("bad trial index"))?,
            seed: fields[2].parse().map_err(|_| bad("bad seed"))?,
            final_best_fitness: fields[3].parse().map_err(|_| bad("bad fitness"))?,
            final_mean_fitness: fields[4].parse().map_err(|_| bad("bad fitness"))?,
            final_best_q: parse_opt(fields[5])?,
            final_mean_q: parse_opt(fields[6])?,
        });
    }
    Ok(summaries)
}

/// The value of `metric` for each trial of one treatment, keyed by trial.
pub fn metric_by_trial(
    summaries: &[TrialSummary],
    treatment: &str,
    metric: Metric,
) -> Vec<(usize, Option<f64>)> {
    summaries
        .iter()
        .filter(|s| s.treatment == treatment)
        .map(|s| (s.trial, s.metric(metric)))
        .collect()
}

pub fn write_comparisons_csv(rows: &[ComparisonRow], path: &Path) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    out.write_all(comparisons_csv_text(rows).as_bytes())?;
    out.flush()?;
    Ok(())
}
