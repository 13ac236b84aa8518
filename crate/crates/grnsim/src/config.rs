//! Run configuration: the flat `key = value` file format, override
//! handling for treatments, and defaults matching the standard ten-gene
//! two-target setup.

use crate::error::{Error, Result};
use crate::evolution::{CrossoverKind, EvoConfig, SelectionScheme, TargetSchedule};
use crate::genome::{Pattern, DEFAULT_MAX_STEPS};
use crate::modularity::{derive_partition, EdgeCollapse, Partition};
use serde::{Deserialize, Serialize};

/// Full description of one reproducible trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub evo: EvoConfig,
    pub schedule: TargetSchedule,
    /// Fixed module assignment; when absent the partition is derived from
    /// the schedule's change profiles.
    pub partition: Option<Partition>,
    pub max_steps: usize,
    /// Sample count per target for Static-mode sets; defaults to the
    /// per-generation perturbation count.
    pub static_perturbation_count: Option<usize>,
    pub edge_collapse: EdgeCollapse,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let schedule = TargetSchedule::new(vec![
            (0, Pattern::from_compact("+-+-+-+-+-").expect("valid pattern")),
            (500, Pattern::from_compact("+-+-++-+-+").expect("valid pattern")),
        ])
        .expect("valid default schedule");
        Self {
            evo: EvoConfig::default(),
            schedule,
            partition: None,
            max_steps: DEFAULT_MAX_STEPS,
            static_perturbation_count: None,
            edge_collapse: EdgeCollapse::Union,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Parses the flat `key = value` format. Lines are independent; `#`
    /// starts a comment. Errors carry 1-based line numbers; unknown keys
    /// are collected and reported together.
    pub fn parse(text: &str) -> Result<Self> {
        let mut builder = Builder::new(RunConfig::default());
        let mut unknown: Vec<String> = Vec::new();
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let content = content.trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::ConfigLine {
                line,
                message: format!("expected `key = value`, got {content:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(Error::ConfigLine {
                    line,
                    message: "empty key".into(),
                });
            }
            if seen.iter().any(|k| k == key) {
                return Err(Error::ConfigLine {
                    line,
                    message: format!("duplicate key {key:?}"),
                });
            }
            seen.push(key.to_string());
            match builder.apply(key, value) {
                Ok(()) => {}
                Err(Error::Config(message)) if message.starts_with("unknown key") => {
                    unknown.push(format!("{key} (line {line})"));
                }
                Err(Error::Config(message)) => {
                    return Err(Error::ConfigLine { line, message });
                }
                Err(other) => return Err(other),
            }
        }
        if !unknown.is_empty() {
            return Err(Error::Config(format!(
                "unknown config keys: {}",
                unknown.join(", ")
            )));
        }
        builder.finish()
    }

    /// Applies named overrides (a treatment delta) on top of this config.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<RunConfig> {
        let mut builder = Builder::new(self.clone());
        for (key, value) in overrides {
            builder
                .apply(key, value)
                .map_err(|e| Error::Config(format!("override {key}: {e}")))?;
        }
        builder.finish()
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        let n = self.n_genes();
        self.evo.validate(n)?;
        if let Some(p) = &self.partition {
            if p.n_genes() != n {
                return Err(Error::Config(format!(
                    "partition covers {} genes but targets have {n}",
                    p.n_genes()
                )));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if self.static_perturbation_count == Some(0) {
            return Err(Error::Config(
                "static_perturbation_count must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn n_genes(&self) -> usize {
        self.schedule.n_genes()
    }

    /// The module assignment in force: the explicit override or the
    /// schedule-derived one.
    pub fn partition(&self) -> Partition {
        match &self.partition {
            Some(p) => p.clone(),
            None => derive_partition(&self.schedule),
        }
    }

    /// Per-target sample count for Static-mode perturbation sets.
    pub fn static_count(&self) -> usize {
        self.static_perturbation_count
            .unwrap_or(self.evo.perturbation_count)
    }
}

/// Staged application of key overrides; interdependent keys (targets and
/// their generations, selection type and tournament size) merge at the end.
struct Builder {
    cfg: RunConfig,
    targets: Option<Vec<Pattern>>,
    target_generations: Option<Vec<usize>>,
    selection_type: Option<String>,
    tournament_size: Option<usize>,
}

fn parse_as<T: std::str::FromStr>(key: &str, value: &str, expect: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::Config(format!("{key}: expected {expect}, got {value:?} ({e})")))
}

fn split_list(value: &str) -> Vec<&str> {
    value
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|part| !part.is_empty())
        .collect()
}

impl Builder {
    fn new(cfg: RunConfig) -> Self {
        Self {
            cfg,
            targets: None,
            target_generations: None,
            selection_type: None,
            tournament_size: None,
        }
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "population_size" => {
                self.cfg.evo.population_size = parse_as(key, value, "a positive integer")?
            }
            "mutation_rate" => self.cfg.evo.mutation_rate = parse_as(key, value, "a probability")?,
            "reproduction_rate" => {
                self.cfg.evo.reproduction_rate = parse_as(key, value, "a fraction in (0, 1]")?
            }
            "elite_size" => self.cfg.evo.elite_size = parse_as(key, value, "an integer")?,
            "selection_type" => match value {
                "proportional" | "tournament" => self.selection_type = Some(value.to_string()),
                other => {
                    return Err(Error::Config(format!(
                        "selection_type: expected proportional or tournament, got {other:?}"
                    )))
                }
            },
            "tournament_size" => {
                self.tournament_size = Some(parse_as(key, value, "a positive integer")?)
            }
            "crossover_type" => {
                self.cfg.evo.crossover = match value {
                    "none" => CrossoverKind::None,
                    "horizontal" => CrossoverKind::Horizontal,
                    "diagonal" => CrossoverKind::Diagonal,
                    other => {
                        return Err(Error::Config(format!(
                            "crossover_type: expected none, horizontal, or diagonal, got {other:?}"
                        )))
                    }
                }
            }
            "edge_size" => {
                self.cfg.evo.initial_edge_count = parse_as(key, value, "an integer")?
            }
            "perturbation_count" => {
                self.cfg.evo.perturbation_count = parse_as(key, value, "a positive integer")?
            }
            "perturbation_rate" => {
                self.cfg.evo.perturbation_rate = parse_as(key, value, "a probability")?
            }
            "fitness_mode" => self.cfg.evo.fitness_mode = parse_as(key, value, "dynamic or static")?,
            "max_generation" => {
                self.cfg.evo.max_generation = parse_as(key, value, "an integer")?
            }
            "founder_clone" => {
                self.cfg.evo.founder_clone = parse_as(key, value, "true or false")?
            }
            "mutate_clones" => {
                self.cfg.evo.mutate_clones = parse_as(key, value, "true or false")?
            }
            "seed" => self.cfg.seed = parse_as(key, value, "an unsigned integer")?,
            "targets" => {
                let targets = split_list(value)
                    .into_iter()
                    .map(Pattern::from_compact)
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| Error::Config(format!("targets: {e}")))?;
                if targets.is_empty() {
                    return Err(Error::Config("targets: list cannot be empty".into()));
                }
                self.targets = Some(targets);
            }
            "target_generations" => {
                let gens = split_list(value)
                    .into_iter()
                    .map(|part| parse_as::<usize>(key, part, "an integer"))
                    .collect::<Result<Vec<_>>>()?;
                if gens.is_empty() {
                    return Err(Error::Config(
                        "target_generations: list cannot be empty".into(),
                    ));
                }
                self.target_generations = Some(gens);
            }
            "partition" => {
                self.cfg.partition = match value {
                    "auto" | "derived" => None,
                    explicit => Some(
                        explicit
                            .parse::<Partition>()
                            .map_err(|e| Error::Config(format!("partition: {e}")))?,
                    ),
                }
            }
            "max_steps" => self.cfg.max_steps = parse_as(key, value, "a positive integer")?,
            "static_perturbation_count" => {
                self.cfg.static_perturbation_count =
                    Some(parse_as(key, value, "a positive integer")?)
            }
            "edge_collapse" => {
                self.cfg.edge_collapse = parse_as(key, value, "union or multi")?
            }
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    fn finish(self) -> Result<RunConfig> {
        let Builder {
            mut cfg,
            targets,
            target_generations,
            selection_type,
            tournament_size,
        } = self;

        if targets.is_some() || target_generations.is_some() {
            let targets = targets
                .unwrap_or_else(|| cfg.schedule.targets().cloned().collect());
            let gens = target_generations
                .unwrap_or_else(|| cfg.schedule.stages().iter().map(|(g, _)| *g).collect());
            if targets.len() != gens.len() {
                return Err(Error::Config(format!(
                    "targets lists {} patterns but target_generations lists {} entries",
                    targets.len(),
                    gens.len()
                )));
            }
            cfg.schedule = TargetSchedule::new(gens.into_iter().zip(targets).collect())?;
        }

        cfg.evo.selection = match (selection_type.as_deref(), tournament_size) {
            (Some("proportional"), Some(_)) => {
                return Err(Error::Config(
                    "tournament_size is set but selection_type is proportional".into(),
                ))
            }
            (Some("proportional"), None) => SelectionScheme::Proportional,
            (Some("tournament"), size) => SelectionScheme::Tournament {
                size: size.unwrap_or(match cfg.evo.selection {
                    SelectionScheme::Tournament { size } => size,
                    SelectionScheme::Proportional => 2,
                }),
            },
            (Some(_), _) => unreachable!("selection_type validated on apply"),
            (None, Some(size)) => match cfg.evo.selection {
                SelectionScheme::Tournament { .. } => SelectionScheme::Tournament { size },
                SelectionScheme::Proportional => {
                    return Err(Error::Config(
                        "tournament_size is set but selection_type is proportional".into(),
                    ))
                }
            },
            (None, None) => cfg.evo.selection,
        };

        cfg.validate()?;
        Ok(cfg)
    }
}
