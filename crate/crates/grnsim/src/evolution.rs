//! The genetic algorithm: biased structural mutation, two crossover
//! operators, proportional and tournament selection, optional elitism, and
//! the staged-target generation loop.

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fitness::{sample_perturbations, FitnessContext, FitnessMode};
use crate::genome::{Genome, Pattern};
use crate::modularity::Partition;
use crate::record::{GenerationExtremes, TraceRow, TrialRecord};
use crate::seed::{StreamRng, TrialStreams};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Targets and the generations at which each becomes active.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSchedule {
    stages: Vec<(usize, Pattern)>,
}

impl TargetSchedule {
    pub fn new(stages: Vec<(usize, Pattern)>) -> Result<Self> {
        let schedule = Self { stages };
        schedule.validate()?;
        Ok(schedule)
    }

    /// One target active from generation 0.
    pub fn single(target: Pattern) -> Self {
        Self {
            stages: vec![(0, target)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::InvalidValue(
                "target schedule needs at least one stage".into(),
            ));
        }
        if self.stages[0].0 != 0 {
            return Err(Error::InvalidValue(format!(
                "first target must be introduced at generation 0, got {}",
                self.stages[0].0
            )));
        }
        for pair in self.stages.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::InvalidValue(format!(
                    "introduction generations must strictly increase: {} then {}",
                    pair[0].0, pair[1].0
                )));
            }
        }
        let n = self.stages[0].1.len();
        if self.stages.iter().any(|(_, t)| t.len() != n) {
            return Err(Error::DimensionMismatch(
                "all targets in a schedule must have the same length".into(),
            ));
        }
        Ok(())
    }

    pub fn n_genes(&self) -> usize {
        self.stages[0].1.len()
    }

    pub fn stages(&self) -> &[(usize, Pattern)] {
        &self.stages
    }

    pub fn targets(&self) -> impl Iterator<Item = &Pattern> {
        self.stages.iter().map(|(_, t)| t)
    }

    /// How many targets are active at generation `gen`.
    pub fn active_count(&self, gen: usize) -> usize {
        self.stages.iter().take_while(|(g, _)| *g <= gen).count()
    }
}

/// Parent-selection scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SelectionScheme {
    Proportional,
    Tournament { size: usize },
}

/// Recombination operator used for non-clone offspring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossoverKind {
    None,
    Horizontal,
    Diagonal,
}

/// Parameters of one evolutionary run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvoConfig {
    pub population_size: usize,
    pub mutation_rate: f64,
    /// Fraction of non-elite slots filled by selection plus cloning; the
    /// remainder are variation offspring (crossover when enabled, mutated
    /// clones otherwise).
    pub reproduction_rate: f64,
    pub elite_size: usize,
    pub selection: SelectionScheme,
    pub crossover: CrossoverKind,
    pub initial_edge_count: usize,
    pub max_generation: usize,
    pub perturbation_count: usize,
    pub perturbation_rate: f64,
    pub fitness_mode: FitnessMode,
    /// Clone one random founder across the whole initial population instead
    /// of sampling each genome independently.
    pub founder_clone: bool,
    /// Pass cloned offspring through mutation too. On by default, so every
    /// non-elite slot in the next generation goes through the mutation
    /// operator. Turning it off makes clones reproduce without change,
    /// which lets discovered genotypes persist against mutation pressure
    /// at the cost of much slower exploration.
    pub mutate_clones: bool,
}

impl Default for EvoConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            mutation_rate: 0.05,
            reproduction_rate: 0.9,
            elite_size: 0,
            selection: SelectionScheme::Proportional,
            crossover: CrossoverKind::None,
            initial_edge_count: 20,
            max_generation: 2000,
            perturbation_count: 75,
            perturbation_rate: 0.15,
            fitness_mode: FitnessMode::Dynamic,
            founder_clone: false,
            mutate_clones: true,
        }
    }
}

impl EvoConfig {
    /// Checks every invariant, with `n` the gene count of the schedule.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.population_size == 0 {
            return Err(Error::Config("population_size must be at least 1".into()));
        }
        if self.elite_size >= self.population_size {
            return Err(Error::Config(format!(
                "elite_size {} must be below population_size {}",
                self.elite_size, self.population_size
            )));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::Config(format!(
                "mutation_rate must lie in [0, 1], got {}",
                self.mutation_rate
            )));
        }
        if !(self.reproduction_rate > 0.0 && self.reproduction_rate <= 1.0) {
            return Err(Error::Config(format!(
                "reproduction_rate must lie in (0, 1], got {}",
                self.reproduction_rate
            )));
        }
        if self.initial_edge_count > n * n {
            return Err(Error::Config(format!(
                "initial_edge_count {} exceeds the {} cells of a {n}-gene genome",
                self.initial_edge_count,
                n * n
            )));
        }
        if let SelectionScheme::Tournament { size } = self.selection {
            if size == 0 {
                return Err(Error::Config("tournament size must be at least 1".into()));
            }
        }
        if self.perturbation_count == 0 {
            return Err(Error::Config("perturbation_count must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.perturbation_rate) {
            return Err(Error::Config(format!(
                "perturbation_rate must lie in [0, 1], got {}",
                self.perturbation_rate
            )));
        }
        Ok(())
    }
}

/// A population member with its current-generation evaluation.
#[derive(Clone, Debug)]
pub struct Individual {
    pub genome: Genome,
    pub fitness: f64,
    pub q: Option<f64>,
}

impl Individual {
    pub fn unevaluated(genome: Genome) -> Self {
        Self {
            genome,
            fitness: f64::NAN,
            q: None,
        }
    }
}

/// Draws an initial population: each genome gets exactly
/// `initial_edge_count` nonzero entries at distinct uniform cells, signs
/// fair. With `founder_clone` one such genome is copied to every slot.
pub fn init_population(cfg: &EvoConfig, n: usize, rng: &mut StreamRng) -> Result<Vec<Individual>> {
    cfg.validate(n)?;
    let draw = |rng: &mut StreamRng| -> Result<Genome> {
        let mut genome = Genome::zeros(n)?;
        let mut cells: Vec<usize> = (0..n * n).collect();
        for k in 0..cfg.initial_edge_count {
            let pick = rng.gen_range(k..cells.len());
            cells.swap(k, pick);
            let cell = cells[k];
            let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
            genome.set_entry(cell / n, cell % n, sign);
        }
        Ok(genome)
    };
    if cfg.founder_clone {
        let founder = draw(rng)?;
        Ok((0..cfg.population_size)
            .map(|_| Individual::unevaluated(founder.clone()))
            .collect())
    } else {
        (0..cfg.population_size)
            .map(|_| Ok(Individual::unevaluated(draw(rng)?)))
            .collect()
    }
}

/// Probability that a mutating gene with `regulators` incoming links loses
/// one rather than gaining one: `4r / (4r + n - r)`.
pub fn loss_probability(regulators: usize, n: usize) -> f64 {
    let r = regulators as f64;
    4.0 * r / (4.0 * r + n as f64 - r)
}

/// Structural mutation: independently for each gene, with probability
/// `rate`, either remove one of its regulators or add a new one, biased
/// toward loss as its regulator count grows.
pub fn mutate(genome: &Genome, rate: f64, rng: &mut StreamRng) -> Genome {
    let n = genome.n();
    let mut out = genome.clone();
    for u in 0..n {
        if !rng.gen_bool(rate) {
            continue;
        }
        let regulators = out.regulator_count(u);
        if rng.gen_bool(loss_probability(regulators, n)) {
            let mut pick = rng.gen_range(0..regulators);
            for j in 0..n {
                if out.entry(j, u) != 0 {
                    if pick == 0 {
                        out.set_entry(j, u, 0);
                        break;
                    }
                    pick -= 1;
                }
            }
        } else {
            let zeros = n - regulators;
            let mut pick = rng.gen_range(0..zeros);
            let sign = if rng.gen_bool(0.5) { 1i8 } else { -1i8 };
            for j in 0..n {
                if out.entry(j, u) == 0 {
                    if pick == 0 {
                        out.set_entry(j, u, sign);
                        break;
                    }
                    pick -= 1;
                }
            }
        }
    }
    out
}

/// Swaps the row blocks above and below `split`: child one takes rows
/// `0..split` from `a` and the rest from `b`, child two the converse.
pub fn crossover_horizontal(a: &Genome, b: &Genome, split: usize) -> Result<(Genome, Genome)> {
    let n = check_parents(a, b)?;
    if split == 0 || split >= n {
        return Err(Error::InvalidValue(format!(
            "split row must lie in 1..={}, got {split}",
            n - 1
        )));
    }
    let mut c1 = Vec::with_capacity(n * n);
    let mut c2 = Vec::with_capacity(n * n);
    for j in 0..n {
        let (top, bottom) = if j < split { (a, b) } else { (b, a) };
        c1.extend_from_slice(top.row(j));
        c2.extend_from_slice(bottom.row(j));
    }
    Ok((Genome::new(n, c1)?, Genome::new(n, c2)?))
}

/// Horizontal crossover at a uniformly random split row.
pub fn crossover_horizontal_random(
    a: &Genome,
    b: &Genome,
    rng: &mut StreamRng,
) -> Result<(Genome, Genome)> {
    let n = check_parents(a, b)?;
    let split = rng.gen_range(1..n);
    crossover_horizontal(a, b, split)
}

/// Swaps the inter-module entries: child one keeps `a`'s intra-module
/// entries and takes `b`'s inter-module entries, child two the converse.
pub fn crossover_diagonal(a: &Genome, b: &Genome, partition: &Partition) -> Result<(Genome, Genome)> {
    let n = check_parents(a, b)?;
    if partition.n_genes() != n {
        return Err(Error::DimensionMismatch(format!(
            "partition covers {} genes but parents have {n}",
            partition.n_genes()
        )));
    }
    let mut c1 = Vec::with_capacity(n * n);
    let mut c2 = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let (intra, inter) = (a.entry(j, i), b.entry(j, i));
            if partition.same_module(j, i) {
                c1.push(intra);
                c2.push(inter);
            } else {
                c1.push(inter);
                c2.push(intra);
            }
        }
    }
    Ok((Genome::new(n, c1)?, Genome::new(n, c2)?))
}

fn check_parents(a: &Genome, b: &Genome) -> Result<usize> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch(format!(
            "parents have {} and {} genes",
            a.n(),
            b.n()
        )));
    }
    Ok(a.n())
}

/// Picks one parent index under the given scheme. Proportional selection
/// requires nonnegative fitness and falls back to a uniform draw (with a
/// log warning) when the population's total fitness is zero.
pub fn select_index(
    pop: &[Individual],
    scheme: SelectionScheme,
    rng: &mut StreamRng,
) -> Result<usize> {
    if pop.is_empty() {
        return Err(Error::InvalidValue("cannot select from an empty population".into()));
    }
    debug_assert!(pop.iter().all(|ind| ind.fitness.is_finite()));
    match scheme {
        SelectionScheme::Proportional => {
            if let Some(bad) = pop.iter().find(|ind| ind.fitness < 0.0) {
                return Err(Error::InvalidValue(format!(
                    "proportional selection requires nonnegative fitness, got {}",
                    bad.fitness
                )));
            }
            let total: f64 = pop.iter().map(|ind| ind.fitness).sum();
            if total <= 0.0 {
                log::warn!("total fitness is zero; proportional selection fell back to uniform");
                return Ok(rng.gen_range(0..pop.len()));
            }
            let mark = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            for (k, ind) in pop.iter().enumerate() {
                acc += ind.fitness;
                if mark < acc {
                    return Ok(k);
                }
            }
            Ok(pop.len() - 1)
        }
        SelectionScheme::Tournament { size } => {
            if size == 0 {
                return Err(Error::InvalidValue("tournament size must be at least 1".into()));
            }
            let mut best = rng.gen_range(0..pop.len());
            let mut ties = 1usize;
            for _ in 1..size {
                let k = rng.gen_range(0..pop.len());
                if pop[k].fitness > pop[best].fitness {
                    best = k;
                    ties = 1;
                } else if pop[k].fitness == pop[best].fitness && k != best {
                    // Reservoir-style uniform choice among tied entrants.
                    ties += 1;
                    if rng.gen_range(0..ties) == 0 {
                        best = k;
                    }
                }
            }
            Ok(best)
        }
    }
}

/// Picks one parent under the given scheme.
pub fn select<'a>(
    pop: &'a [Individual],
    scheme: SelectionScheme,
    rng: &mut StreamRng,
) -> Result<&'a Individual> {
    Ok(&pop[select_index(pop, scheme, rng)?])
}

/// Refreshes the context's active sets for generation `gen`: Dynamic mode
/// resamples every active target's perturbations, Static mode only widens
/// the active prefix of the sets frozen at run start.
pub fn refresh_context(
    ctx: &mut FitnessContext,
    schedule: &TargetSchedule,
    gen: usize,
    count: usize,
    rate: f64,
    rng: &mut StreamRng,
) -> Result<()> {
    let active = schedule.active_count(gen);
    match ctx.mode {
        FitnessMode::Dynamic => {
            let sets = schedule
                .targets()
                .take(active)
                .map(|t| sample_perturbations(t, count, rate, rng))
                .collect::<Result<Vec<_>>>()?;
            ctx.install_sets(sets, active);
        }
        FitnessMode::Static => {
            ctx.set_active(active);
        }
    }
    Ok(())
}

/// Evaluates fitness (and, when asked, modularity) for every individual.
pub fn evaluate_population(
    pop: &mut [Individual],
    ctx: &FitnessContext,
    q_under: Option<(&Partition, crate::modularity::EdgeCollapse)>,
) -> Result<()> {
    pop.par_iter_mut().try_for_each(|ind| -> Result<()> {
        ind.fitness = crate::fitness::fitness_multi_target(&ind.genome, ctx)?;
        if let Some((partition, collapse)) = q_under {
            ind.q = crate::modularity::q_score_with(&ind.genome, partition, collapse)?;
        }
        Ok(())
    })
}

/// Indices of `pop` ordered by descending fitness (stable, so equal
/// fitness keeps population order).
fn rank_by_fitness(pop: &[Individual]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|&x, &y| {
        pop[y]
            .fitness
            .partial_cmp(&pop[x].fitness)
            .expect("fitness must not be NaN when ranking")
    });
    order
}

/// Builds the next (unevaluated) population from an evaluated one: elites
/// verbatim, then selected clones, then variation offspring. Variation
/// offspring (crossover children when crossover is enabled, selected
/// clones otherwise) always pass through mutation; plain clones mutate
/// only when `mutate_clones` is set.
pub fn next_generation(
    pop: &[Individual],
    cfg: &EvoConfig,
    partition: &Partition,
    streams: &mut TrialStreams,
) -> Result<Vec<Individual>> {
    debug_assert_eq!(pop.len(), cfg.population_size);
    let mut next: Vec<Individual> = Vec::with_capacity(cfg.population_size);

    let order = rank_by_fitness(pop);
    for &k in order.iter().take(cfg.elite_size) {
        next.push(pop[k].clone());
    }

    let open = cfg.population_size - cfg.elite_size;
    let clones = if cfg.crossover == CrossoverKind::None && cfg.mutate_clones {
        // Every slot is a mutated clone anyway, so the split is moot.
        open
    } else {
        ((cfg.reproduction_rate * open as f64).round() as usize).min(open)
    };

    for _ in 0..clones {
        let parent = select(pop, cfg.selection, &mut streams.selection)?;
        let child = if cfg.mutate_clones {
            mutate(&parent.genome, cfg.mutation_rate, &mut streams.mutation)
        } else {
            parent.genome.clone()
        };
        next.push(Individual::unevaluated(child));
    }

    let mut offspring: Vec<Genome> = Vec::with_capacity(open - clones);
    while next.len() + offspring.len() < cfg.population_size {
        if cfg.crossover == CrossoverKind::None {
            let a = select(pop, cfg.selection, &mut streams.selection)?;
            offspring.push(a.genome.clone());
            continue;
        }
        let a = select(pop, cfg.selection, &mut streams.selection)?;
        let b = select(pop, cfg.selection, &mut streams.selection)?;
        let (c1, c2) = match cfg.crossover {
            CrossoverKind::None => unreachable!("handled above"),
            CrossoverKind::Horizontal => {
                crossover_horizontal_random(&a.genome, &b.genome, &mut streams.crossover)?
            }
            CrossoverKind::Diagonal => crossover_diagonal(&a.genome, &b.genome, partition)?,
        };
        offspring.push(c1);
        if next.len() + offspring.len() < cfg.population_size {
            offspring.push(c2);
        }
    }

    for genome in offspring {
        let mutated = mutate(&genome, cfg.mutation_rate, &mut streams.mutation);
        next.push(Individual::unevaluated(mutated));
    }
    debug_assert_eq!(next.len(), cfg.population_size);
    Ok(next)
}

/// One full generation turn: refresh the fitness context for `gen`,
/// evaluate everyone, and assemble the next population.
pub fn advance_generation(
    pop: &mut Vec<Individual>,
    cfg: &EvoConfig,
    schedule: &TargetSchedule,
    gen: usize,
    ctx: &mut FitnessContext,
    partition: &Partition,
    streams: &mut TrialStreams,
) -> Result<Vec<Individual>> {
    if pop.len() != cfg.population_size {
        return Err(Error::InvalidValue(format!(
            "population has {} members but config says {}",
            pop.len(),
            cfg.population_size
        )));
    }
    refresh_context(
        ctx,
        schedule,
        gen,
        cfg.perturbation_count,
        cfg.perturbation_rate,
        &mut streams.perturbation,
    )?;
    evaluate_population(pop, ctx, None)?;
    next_generation(pop, cfg, partition, streams)
}

/// Builds the fitness context for a run: Dynamic mode starts empty (sets
/// are resampled each generation), Static mode samples every scheduled
/// target's set once, up front.
pub fn context_for_run(cfg: &RunConfig, streams: &mut TrialStreams) -> Result<FitnessContext> {
    let mut ctx = FitnessContext::new(cfg.evo.fitness_mode, cfg.max_steps);
    if cfg.evo.fitness_mode == FitnessMode::Static {
        let sets = cfg
            .schedule
            .targets()
            .map(|t| {
                sample_perturbations(
                    t,
                    cfg.static_count(),
                    cfg.evo.perturbation_rate,
                    &mut streams.perturbation,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        ctx.install_sets(sets, 0);
    }
    Ok(ctx)
}

/// Runs one full trial with the seed stored in the config.
pub fn run_trial(cfg: &RunConfig) -> Result<TrialRecord> {
    run_trial_with_seed(cfg, cfg.seed)
}

/// Runs one full trial under an explicit seed (experiments derive one per
/// replicate).
pub fn run_trial_with_seed(cfg: &RunConfig, seed: u64) -> Result<TrialRecord> {
    run_trial_observed(cfg, seed, &mut |_| Ok(()))
}

/// Runs one full trial, handing each trace row to `observer` the moment
/// its generation has been evaluated (for incremental persistence).
pub fn run_trial_observed(
    cfg: &RunConfig,
    seed: u64,
    observer: &mut dyn FnMut(&TraceRow) -> Result<()>,
) -> Result<TrialRecord> {
    cfg.validate()?;
    let started = Instant::now();
    let n = cfg.n_genes();
    let partition = cfg.partition();
    if partition.n_genes() != n {
        return Err(Error::Config(format!(
            "partition covers {} genes but targets have {n}",
            partition.n_genes()
        )));
    }
    let mut streams = TrialStreams::new(seed);
    let mut ctx = context_for_run(cfg, &mut streams)?;
    let mut pop = init_population(&cfg.evo, n, &mut streams.init)?;

    let generations = cfg.evo.max_generation + 1;
    let mut rows = Vec::with_capacity(generations);
    let mut extremes = Vec::with_capacity(generations);
    for gen in 0..=cfg.evo.max_generation {
        refresh_context(
            &mut ctx,
            &cfg.schedule,
            gen,
            cfg.evo.perturbation_count,
            cfg.evo.perturbation_rate,
            &mut streams.perturbation,
        )?;
        evaluate_population(&mut pop, &ctx, Some((&partition, cfg.edge_collapse)))?;
        let row = TraceRow::from_population(gen, &pop);
        observer(&row)?;
        rows.push(row);
        extremes.push(GenerationExtremes::from_population(gen, &pop));
        if gen < cfg.evo.max_generation {
            pop = next_generation(&pop, &cfg.evo, &partition, &mut streams)?;
        }
    }

    Ok(TrialRecord {
        config: cfg.clone(),
        seed,
        final_population: pop.iter().map(Into::into).collect(),
        rows,
        extremes,
        wall_time: started.elapsed(),
    })
}
