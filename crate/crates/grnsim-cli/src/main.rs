//! Command-line harness around the grnsim library: single trials,
//! treatment suites, post-hoc analyses, paired statistics, and an
//! exact-fitness oracle.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors,
//! 2 for runtime failures (unreadable data, I/O, failed trials).

use clap::{Args, Parser, Subcommand, ValueEnum};
use grnsim::analysis::{
    extract_dominance, neighbor_probe, removal_paths, trim_inter_module, write_dominance_outputs,
    write_lattice_csv, write_neighbors_csv, DominancePair, DEFAULT_LATTICE_CAP,
    DEFAULT_NEIGHBOR_COUNT, DEFAULT_SAMPLE_ORDERS,
};
use grnsim::config::RunConfig;
use grnsim::evolution::{run_trial, run_trial_observed};
use grnsim::experiment::{
    load_results_csv, run_experiment, write_comparisons_csv, ComparisonRow, ExperimentSpec,
    Metric, TrialSummary, MIN_PAIRS_FOR_P,
};
use grnsim::fitness::{
    exact_fitness_oracle, fitness_multi_target, sample_perturbations, FitnessContext,
};
use grnsim::genome::{Genome, Pattern};
use grnsim::modularity::q_score_with;
use grnsim::record::{load_trial, persist_trial, LoadedTrial, Snapshot, TraceWriter};
use grnsim::seed::stream_rng;
use grnsim::stats::{wilcoxon_signed_rank, Alternative, PairedSamples};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "grnsim",
    version,
    about = "Boolean gene-network evolution testbed",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one evolutionary trial from a config file
    Run(RunArgs),
    /// Run a treatment suite described by a TOML spec
    Experiment(ExperimentArgs),
    /// Post-hoc analyses over completed trial records
    Analyze(AnalyzeArgs),
    /// Paired signed-rank comparison of two trial-summary CSVs
    Stats(StatsArgs),
    /// Exact robustness fitness of a genome file
    Oracle(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to a `key = value` config file
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for trace.csv, history.csv, manifest.json, final_pop/
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Path to a TOML experiment spec
    #[arg(long)]
    spec: PathBuf,
    /// Output directory for per-trial records and aggregate CSVs
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// Replicate-count profile overriding the spec's trial count
    #[arg(long, value_enum)]
    profile: Option<Profile>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    /// 20 trials per treatment
    Desk,
    /// 40 trials per treatment
    Paper,
}

impl Profile {
    fn trials(self) -> usize {
        match self {
            Profile::Desk => 20,
            Profile::Paper => 40,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// A single trial directory, or a directory of <treatment>/trial_<k> records
    #[arg(long)]
    records: PathBuf,
    #[arg(long, value_enum)]
    mode: AnalyzeMode,
    /// Output directory for the analysis CSVs
    #[arg(long)]
    out: PathBuf,
    /// Generation range `lo:hi`, inclusive (default: the whole run)
    #[arg(long)]
    range: Option<String>,
    /// Which extracted individual the trim/paths/neighbors modes analyze
    #[arg(long, value_enum, default_value_t = Role::Fittest)]
    role: Role,
    /// Frozen perturbations per target for analysis fitness
    #[arg(long, default_value_t = 1000)]
    probe_samples: usize,
    /// Neighbors per probe
    #[arg(long, default_value_t = DEFAULT_NEIGHBOR_COUNT)]
    neighbors: usize,
    /// Mutation rate for neighbor probes (default: the trial's own rate)
    #[arg(long)]
    mu: Option<f64>,
    /// Subset-enumeration budget for removal lattices
    #[arg(long, default_value_t = DEFAULT_LATTICE_CAP)]
    cap: usize,
    /// Sampled removal orders when the lattice exceeds the budget
    #[arg(long, default_value_t = DEFAULT_SAMPLE_ORDERS)]
    orders: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AnalyzeMode {
    /// Extract the extremal individuals of each trial's generation range
    Dominance,
    /// Compare fitness before and after removing inter-module edges
    Trim,
    /// Map fitness across subsets of inter-module edge removals
    Paths,
    /// Score each genome against a sample of its mutation neighbors
    Neighbors,
}

#[derive(Clone, Copy, ValueEnum)]
enum Role {
    /// Highest fitness in range, ties broken toward lower Q
    Fittest,
    /// Highest Q in range, ties broken toward higher fitness
    MostModular,
}

#[derive(Args)]
struct StatsArgs {
    /// Trial-summary CSV holding treatment A
    #[arg(long)]
    a: PathBuf,
    /// Trial-summary CSV holding treatment B
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value = "final_best_fitness")]
    metric: String,
    #[arg(long, default_value = "two_sided")]
    alternative: String,
    /// Treatment to select from file A when it holds several
    #[arg(long)]
    treatment_a: Option<String>,
    /// Treatment to select from file B when it holds several
    #[arg(long)]
    treatment_b: Option<String>,
    /// Also write the comparison row as CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Genome file (`n=<N>` header plus matrix rows)
    #[arg(long)]
    genome: PathBuf,
    /// Target expression pattern, e.g. "+-+-+-+-+-"
    #[arg(long)]
    target: String,
    /// Per-gene flip probability
    #[arg(long, default_value_t = 0.15)]
    rate: f64,
    /// Settling budget in update applications
    #[arg(long, default_value_t = 20)]
    max_steps: usize,
    /// Also Monte Carlo estimate with this many perturbations
    #[arg(long)]
    samples: Option<usize>,
    /// Seed for the Monte Carlo estimate
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<grnsim::Error> for Failure {
    fn from(e: grnsim::Error) -> Self {
        use grnsim::Error as E;
        match e {
            E::Config(_) | E::ConfigLine { .. } | E::InvalidValue(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure::Usage(message.into())
}

fn runtime(message: impl Into<String>) -> Failure {
    Failure::Runtime(message.into())
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Oracle(args) => cmd_oracle(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn na(value: Option<f64>) -> String {
    value.map_or_else(|| "na".to_string(), |v| v.to_string())
}

fn read_config(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    Ok(RunConfig::parse(&text)?)
}

fn cmd_run(args: RunArgs) -> CliResult {
    let mut cfg = read_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let record = match &args.out {
        Some(out) => {
            fs::create_dir_all(out)?;
            let mut writer = TraceWriter::create(&out.join("trace.csv"))?;
            let record = run_trial_observed(&cfg, cfg.seed, &mut |row| writer.write_row(row))?;
            persist_trial(&record, out, true)?;
            record
        }
        None => run_trial(&cfg)?,
    };
    let last = record.final_row();
    println!("seed: {}", record.seed);
    println!("generations: {}", record.rows.len());
    println!("final best fitness: {}", last.best_fitness);
    println!("final mean fitness: {}", last.mean_fitness);
    println!("final best q: {}", na(last.best_q));
    println!("wall time: {:.2}s", record.wall_time.as_secs_f64());
    if let Some(out) = &args.out {
        println!("record written to {}", out.display());
    }
    Ok(())
}

/// Renders rows as a left-aligned table; the first row is the header.
fn aligned_table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut widths = vec![0usize; cols];
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut text = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, cell)| format!("{cell:<width$}", width = widths[i]))
            .collect();
        text.push_str(line.join("  ").trim_end());
        text.push('\n');
    }
    text
}

fn comparison_table(rows: &[ComparisonRow]) -> String {
    let mut table = vec![["metric", "a", "b", "alternative", "n", "mean_a", "mean_b", "w", "p"]
        .map(String::from)
        .to_vec()];
    for r in rows {
        table.push(vec![
            r.metric.to_string(),
            r.a.clone(),
            r.b.clone(),
            r.alternative.to_string(),
            r.n_pairs.to_string(),
            na(r.mean_a),
            na(r.mean_b),
            na(r.w),
            na(r.p),
        ]);
    }
    aligned_table(&table)
}

fn treatment_table(treatments: &[String], summaries: &[TrialSummary]) -> String {
    let mut table = vec![["treatment", "trials", "mean_best_fitness", "mean_best_q"]
        .map(String::from)
        .to_vec()];
    for name in treatments {
        let rows: Vec<&TrialSummary> = summaries.iter().filter(|s| &s.treatment == name).collect();
        let fitness_mean = if rows.is_empty() {
            None
        } else {
            Some(rows.iter().map(|s| s.final_best_fitness).sum::<f64>() / rows.len() as f64)
        };
        let qs: Vec<f64> = rows.iter().filter_map(|s| s.final_best_q).collect();
        let q_mean = if qs.is_empty() {
            None
        } else {
            Some(qs.iter().sum::<f64>() / qs.len() as f64)
        };
        table.push(vec![
            name.clone(),
            rows.len().to_string(),
            na(fitness_mean),
            na(q_mean),
        ]);
    }
    aligned_table(&table)
}

fn cmd_experiment(args: ExperimentArgs) -> CliResult {
    let text = fs::read_to_string(&args.spec)
        .map_err(|e| usage(format!("cannot read spec {}: {e}", args.spec.display())))?;
    let mut spec = ExperimentSpec::from_toml(&text)?;
    if let Some(profile) = args.profile {
        spec.trials = profile.trials();
    }
    let workers = args.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    println!(
        "experiment {}: {} treatment(s) x {} trial(s) on {} worker(s)",
        spec.name,
        spec.treatments.len(),
        spec.trials,
        workers
    );

    let run = run_experiment(&spec, Some(&args.out), workers)?;
    for f in &run.failures {
        eprintln!(
            "warning: trial {} of treatment {:?} failed: {}",
            f.trial, f.treatment, f.message
        );
    }
    if run.summaries.is_empty() {
        return Err(runtime("every trial failed; nothing to aggregate"));
    }

    let names: Vec<String> = spec.treatments.iter().map(|t| t.name.clone()).collect();
    println!();
    print!("{}", treatment_table(&names, &run.summaries));
    if !run.comparisons.is_empty() {
        println!();
        print!("{}", comparison_table(&run.comparisons));
    }
    println!();
    println!("results written to {}", args.out.join("results.csv").display());
    if !run.comparisons.is_empty() {
        println!(
            "comparisons written to {}",
            args.out.join("comparisons.csv").display()
        );
    }
    Ok(())
}

/// Sorts `trial_10` after `trial_2` by splitting a trailing digit run.
fn natural_key(name: &str) -> (String, u64) {
    let split = name
        .rfind(|c: char| !c.is_ascii_digit())
        .map_or(0, |i| i + 1);
    let (prefix, digits) = name.split_at(split);
    (prefix.to_string(), digits.parse().unwrap_or(0))
}

fn dir_names(path: &Path) -> CliResult<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(path)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort_by_key(|n| natural_key(n));
    Ok(names)
}

/// Finds trial records under `records`: either the directory itself, or
/// one or two levels of subdirectories holding `manifest.json`.
fn discover_trials(records: &Path) -> CliResult<Vec<(String, PathBuf)>> {
    if !records.is_dir() {
        return Err(runtime(format!(
            "record directory {} does not exist",
            records.display()
        )));
    }
    if records.join("manifest.json").is_file() {
        let label = records
            .file_name()
            .map_or_else(|| "trial".to_string(), |s| s.to_string_lossy().into_owned());
        return Ok(vec![(label, records.to_path_buf())]);
    }
    let mut found = Vec::new();
    for name in dir_names(records)? {
        let sub = records.join(&name);
        if sub.join("manifest.json").is_file() {
            found.push((name, sub));
            continue;
        }
        for inner in dir_names(&sub)? {
            let dir = sub.join(&inner);
            if dir.join("manifest.json").is_file() {
                found.push((format!("{name}_{inner}"), dir));
            }
        }
    }
    if found.is_empty() {
        return Err(runtime(format!(
            "no trial records found under {}",
            records.display()
        )));
    }
    Ok(found)
}

fn parse_range(text: &str) -> CliResult<(usize, usize)> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| usage(format!("range {text:?} must be lo:hi")))?;
    let lo = lo
        .trim()
        .parse()
        .map_err(|_| usage(format!("bad range start {lo:?}")))?;
    let hi = hi
        .trim()
        .parse()
        .map_err(|_| usage(format!("bad range end {hi:?}")))?;
    Ok((lo, hi))
}

fn last_generation(trial: &LoadedTrial) -> CliResult<usize> {
    trial
        .extremes
        .iter()
        .map(|e| e.generation)
        .max()
        .ok_or_else(|| runtime("trial record has no generations"))
}

/// Frozen perturbation sets for analysis, derived from the trial's own
/// seed so reruns probe identical noise.
fn frozen_context(cfg: &RunConfig, trial_seed: u64, samples: usize) -> CliResult<FitnessContext> {
    let mut rng = stream_rng(trial_seed, &["analysis", "perturbation"]);
    let mut sets = Vec::new();
    for target in cfg.schedule.targets() {
        sets.push(sample_perturbations(
            target,
            samples,
            cfg.evo.perturbation_rate,
            &mut rng,
        )?);
    }
    Ok(FitnessContext::frozen(sets, cfg.max_steps))
}

fn pick_role(pair: &DominancePair, role: Role) -> (&'static str, &Snapshot) {
    match role {
        Role::Fittest => ("least_modular_of_fittest", &pair.least_modular_of_fittest),
        Role::MostModular => ("fittest_of_most_modular", &pair.fittest_of_most_modular),
    }
}

const TRIM_HEADER: &str = "trial_id,role,fitness_before,fitness_after,improved,q_before,q_after";

fn cmd_analyze(args: AnalyzeArgs) -> CliResult {
    let trials = discover_trials(&args.records)?;
    fs::create_dir_all(&args.out)?;
    let range = args.range.as_deref().map(parse_range).transpose()?;

    match args.mode {
        AnalyzeMode::Dominance => {
            let mut entries = Vec::new();
            for (label, dir) in &trials {
                let trial = load_trial(dir)?;
                let range = match range {
                    Some(r) => r,
                    None => (0, last_generation(&trial)?),
                };
                entries.push((label.clone(), extract_dominance(&trial.extremes, range)?));
            }
            write_dominance_outputs(&entries, &args.out)?;
            println!(
                "extracted {} individual(s) from {} trial(s) into {}",
                entries.len() * 2,
                trials.len(),
                args.out.join("dominance.csv").display()
            );
        }
        AnalyzeMode::Trim => {
            let file = fs::File::create(args.out.join("trim.csv"))?;
            let mut out = std::io::BufWriter::new(file);
            writeln!(out, "{TRIM_HEADER}")?;
            let mut improved = 0usize;
            for (label, dir) in &trials {
                let trial = load_trial(dir)?;
                let cfg = &trial.manifest.config;
                let range = match range {
                    Some(r) => r,
                    None => (0, last_generation(&trial)?),
                };
                let pair = extract_dominance(&trial.extremes, range)?;
                let (role_name, snap) = pick_role(&pair, args.role);
                let partition = cfg.partition();
                let ctx = frozen_context(cfg, trial.manifest.seed, args.probe_samples)?;
                let before = fitness_multi_target(&snap.genome, &ctx)?;
                let trimmed = trim_inter_module(&snap.genome, &partition)?;
                let after = fitness_multi_target(&trimmed, &ctx)?;
                let q_before = q_score_with(&snap.genome, &partition, cfg.edge_collapse)?;
                let q_after = q_score_with(&trimmed, &partition, cfg.edge_collapse)?;
                if after > before {
                    improved += 1;
                }
                writeln!(
                    out,
                    "{label},{role_name},{before},{after},{},{},{}",
                    after > before,
                    na(q_before),
                    na(q_after)
                )?;
            }
            out.flush()?;
            println!(
                "trim improved fitness in {} of {} trial(s) ({:.3})",
                improved,
                trials.len(),
                improved as f64 / trials.len() as f64
            );
            println!("rows written to {}", args.out.join("trim.csv").display());
        }
        AnalyzeMode::Paths => {
            for (label, dir) in &trials {
                let trial = load_trial(dir)?;
                let cfg = &trial.manifest.config;
                let range = match range {
                    Some(r) => r,
                    None => (0, last_generation(&trial)?),
                };
                let pair = extract_dominance(&trial.extremes, range)?;
                let (_, snap) = pick_role(&pair, args.role);
                let partition = cfg.partition();
                let ctx = frozen_context(cfg, trial.manifest.seed, args.probe_samples)?;
                let mut rng = stream_rng(trial.manifest.seed, &["analysis", "paths"]);
                let lattice = removal_paths(
                    &snap.genome,
                    &partition,
                    &ctx,
                    args.cap,
                    args.orders,
                    &mut rng,
                )?;
                let trial_out = args.out.join(label);
                fs::create_dir_all(&trial_out)?;
                write_lattice_csv(&lattice, &trial_out.join("lattice.csv"))?;
                println!(
                    "{label}: {} inter-module edge(s), {} point(s), {}",
                    lattice.inter_edges.len(),
                    lattice.points.len(),
                    if lattice.exhaustive {
                        "exhaustive"
                    } else {
                        "sampled orders"
                    }
                );
            }
            println!("lattices written under {}", args.out.display());
        }
        AnalyzeMode::Neighbors => {
            let mut fitter = 0usize;
            for (label, dir) in &trials {
                let trial = load_trial(dir)?;
                let cfg = &trial.manifest.config;
                let range = match range {
                    Some(r) => r,
                    None => (0, last_generation(&trial)?),
                };
                let pair = extract_dominance(&trial.extremes, range)?;
                let (_, snap) = pick_role(&pair, args.role);
                let partition = cfg.partition();
                let ctx = frozen_context(cfg, trial.manifest.seed, args.probe_samples)?;
                let mu = args.mu.unwrap_or(cfg.evo.mutation_rate);
                let mut rng = stream_rng(trial.manifest.seed, &["analysis", "neighbors"]);
                let probe = neighbor_probe(
                    &snap.genome,
                    args.neighbors,
                    mu,
                    &ctx,
                    &partition,
                    cfg.edge_collapse,
                    &mut rng,
                )?;
                let trial_out = args.out.join(label);
                fs::create_dir_all(&trial_out)?;
                write_neighbors_csv(&probe, &trial_out.join("neighbors.csv"))?;
                if probe.max_fitness > probe.self_fitness {
                    fitter += 1;
                }
                println!(
                    "{label}: self fitness {}, best neighbor {}, self q {}, best q {}",
                    probe.self_fitness,
                    probe.max_fitness,
                    na(probe.self_q),
                    na(probe.max_q)
                );
            }
            println!(
                "a fitter neighbor exists in {} of {} trial(s)",
                fitter,
                trials.len()
            );
            println!("probes written under {}", args.out.display());
        }
    }
    Ok(())
}

/// Loads one treatment's summaries from a results CSV, filtering when
/// the file holds several treatments.
fn load_treatment(path: &Path, filter: Option<&str>) -> CliResult<(String, Vec<TrialSummary>)> {
    let all = load_results_csv(path)?;
    let mut names: Vec<String> = all.iter().map(|s| s.treatment.clone()).collect();
    names.sort();
    names.dedup();
    match filter {
        Some(name) => {
            let rows: Vec<TrialSummary> =
                all.into_iter().filter(|s| s.treatment == name).collect();
            if rows.is_empty() {
                return Err(usage(format!(
                    "{} has no treatment {name:?} (found: {})",
                    path.display(),
                    names.join(", ")
                )));
            }
            Ok((name.to_string(), rows))
        }
        None => match names.as_slice() {
            [] => Err(runtime(format!("{} holds no rows", path.display()))),
            [single] => Ok((single.clone(), all)),
            several => Err(usage(format!(
                "{} holds several treatments ({}); pick one with --treatment-a/--treatment-b",
                path.display(),
                several.join(", ")
            ))),
        },
    }
}

fn cmd_stats(args: StatsArgs) -> CliResult {
    let metric: Metric = args.metric.parse()?;
    let alternative: Alternative = args.alternative.parse()?;
    let (name_a, rows_a) = load_treatment(&args.a, args.treatment_a.as_deref())?;
    let (name_b, rows_b) = load_treatment(&args.b, args.treatment_b.as_deref())?;

    let metric_of = |s: &TrialSummary| match metric {
        Metric::FinalBestFitness => Some(s.final_best_fitness),
        Metric::FinalMeanFitness => Some(s.final_mean_fitness),
        Metric::FinalBestQ => s.final_best_q,
        Metric::FinalMeanQ => s.final_mean_q,
    };
    let by_trial_b: BTreeMap<usize, &TrialSummary> =
        rows_b.iter().map(|s| (s.trial, s)).collect();
    let mut pairs = Vec::new();
    let mut dropped = 0usize;
    for sa in &rows_a {
        let Some(sb) = by_trial_b.get(&sa.trial) else {
            continue;
        };
        match (metric_of(sa), metric_of(sb)) {
            (Some(va), Some(vb)) => pairs.push((va, vb)),
            _ => dropped += 1,
        }
    }
    if dropped > 0 {
        eprintln!("warning: dropped {dropped} pair(s) with undefined {metric}");
    }
    let n_pairs = pairs.len();
    let (mean_a, mean_b) = if n_pairs == 0 {
        (None, None)
    } else {
        (
            Some(pairs.iter().map(|p| p.0).sum::<f64>() / n_pairs as f64),
            Some(pairs.iter().map(|p| p.1).sum::<f64>() / n_pairs as f64),
        )
    };
    let (w, p) = if n_pairs >= MIN_PAIRS_FOR_P {
        match wilcoxon_signed_rank(&PairedSamples::new(pairs)?, alternative) {
            Ok(outcome) => (Some(outcome.w), Some(outcome.p)),
            Err(grnsim::Error::NoSignal(_)) => {
                eprintln!("warning: all paired differences are zero; no test statistic");
                (None, None)
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        if n_pairs > 0 {
            eprintln!(
                "warning: only {n_pairs} pair(s); at least {MIN_PAIRS_FOR_P} needed for a p-value"
            );
        }
        (None, None)
    };

    let row = ComparisonRow {
        metric,
        a: name_a,
        b: name_b,
        alternative,
        n_pairs,
        mean_a,
        mean_b,
        w,
        p,
    };
    print!("{}", comparison_table(std::slice::from_ref(&row)));
    if let Some(out) = &args.out {
        write_comparisons_csv(std::slice::from_ref(&row), out)?;
        println!("comparison written to {}", out.display());
    }
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> CliResult {
    let text = fs::read_to_string(&args.genome)
        .map_err(|e| usage(format!("cannot read genome {}: {e}", args.genome.display())))?;
    let genome = Genome::from_text(&text)?;
    let target = Pattern::from_compact(&args.target)
        .map_err(|e| usage(format!("--target: {e}")))?;
    if target.len() != genome.n() {
        return Err(usage(format!(
            "target covers {} gene(s) but the genome has {}",
            target.len(),
            genome.n()
        )));
    }
    let exact = exact_fitness_oracle(&genome, &target, args.rate, args.max_steps)?;
    println!("exact fitness: {exact}");
    if let Some(samples) = args.samples {
        let mut rng = stream_rng(args.seed, &["oracle"]);
        let set = sample_perturbations(&target, samples, args.rate, &mut rng)?;
        let ctx = FitnessContext::frozen(vec![set], args.max_steps);
        let estimate = fitness_multi_target(&genome, &ctx)?;
        println!("monte carlo fitness (P = {samples}): {estimate}");
        println!("absolute difference: {:e}", (estimate - exact).abs());
    }
    Ok(())
}
