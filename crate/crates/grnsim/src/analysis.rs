//! Post-hoc investigations of evolved genomes: dominance extraction over a
//! generation range, inter-module edge trimming, exhaustive or sampled
//! edge-removal fitness lattices, and mutation-neighbor probes.
//!
//! Every fitness evaluation here runs on frozen perturbation sets supplied
//! by the caller, so comparisons across genomes or removal subsets are
//! noise-controlled and bit-reproducible.

use crate::error::{Error, Result};
use crate::fitness::{fitness_multi_target, FitnessContext};
use crate::genome::Genome;
use crate::modularity::{q_score_with, EdgeCollapse, Partition};
use crate::record::{GenerationExtremes, Snapshot};
use crate::seed::StreamRng;
use rand::Rng;
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::fs;
use std::io::{BufWriter, Write as IoWrite};
use std::path::Path;

/// Default subset-enumeration budget for removal lattices.
pub const DEFAULT_LATTICE_CAP: usize = 1 << 16;

/// Default number of sampled removal orders beyond the enumeration budget.
pub const DEFAULT_SAMPLE_ORDERS: usize = 1000;

/// Default neighbor count for probes (the probed set is the genome plus
/// its neighbors).
pub const DEFAULT_NEIGHBOR_COUNT: usize = 499;

/// The two extremal individuals of a trial's generation range.
#[derive(Clone, Debug, PartialEq)]
pub struct DominancePair {
    /// Maximal Q in the range; ties broken by higher fitness.
    pub fittest_of_most_modular: Snapshot,
    /// Maximal fitness in the range; ties broken by lower Q. An undefined
    /// Q ranks below every defined one on both criteria.
    pub least_modular_of_fittest: Snapshot,
}

fn q_rank(q: Option<f64>) -> f64 {
    q.unwrap_or(f64::NEG_INFINITY)
}

/// Scans generations `range.0 ..= range.1` of a trial's per-generation
/// extremes and returns the range's extremal individuals. The stored
/// extremes make this fold exact for any range.
pub fn extract_dominance(
    extremes: &[GenerationExtremes],
    range: (usize, usize),
) -> Result<DominancePair> {
    let (lo, hi) = range;
    if lo > hi {
        return Err(Error::InvalidValue(format!(
            "generation range is empty: {lo} > {hi}"
        )));
    }
    let last = extremes
        .iter()
        .map(|e| e.generation)
        .max()
        .ok_or_else(|| Error::InvalidValue("trial record has no generations".into()))?;
    if hi > last {
        return Err(Error::InvalidValue(format!(
            "range end {hi} exceeds the last recorded generation {last}"
        )));
    }
    let mut most_modular: Option<&Snapshot> = None;
    let mut fittest: Option<&Snapshot> = None;
    for e in extremes {
        if e.generation < lo || e.generation > hi {
            continue;
        }
        let candidate = &e.most_modular;
        if most_modular.is_none_or(|best| {
            (q_rank(candidate.q), candidate.fitness) > (q_rank(best.q), best.fitness)
        }) {
            most_modular = Some(candidate);
        }
        let candidate = &e.fittest;
        if fittest.is_none_or(|best| {
            (candidate.fitness, -q_rank(candidate.q)) > (best.fitness, -q_rank(best.q))
        }) {
            fittest = Some(candidate);
        }
    }
    match (most_modular, fittest) {
        (Some(m), Some(f)) => Ok(DominancePair {
            fittest_of_most_modular: m.clone(),
            least_modular_of_fittest: f.clone(),
        }),
        _ => Err(Error::InvalidValue(format!(
            "generations {lo}..={hi} contain no recorded extremes"
        ))),
    }
}

/// Returns a copy of `genome` with every entry whose row and column genes
/// lie in different modules set to zero.
pub fn trim_inter_module(genome: &Genome, partition: &Partition) -> Result<Genome> {
    if partition.n_genes() != genome.n() {
        return Err(Error::DimensionMismatch(format!(
            "genome has {} genes but partition covers {}",
            genome.n(),
            partition.n_genes()
        )));
    }
    let n = genome.n();
    let mut out = genome.clone();
    for j in 0..n {
        for i in 0..n {
            if !partition.same_module(j, i) {
                out.set_entry(j, i, 0);
            }
        }
    }
    Ok(out)
}

/// The nonzero cross-module cells of a genome, in row-major order.
pub fn inter_module_edges(genome: &Genome, partition: &Partition) -> Result<Vec<(usize, usize)>> {
    if partition.n_genes() != genome.n() {
        return Err(Error::DimensionMismatch(format!(
            "genome has {} genes but partition covers {}",
            genome.n(),
            partition.n_genes()
        )));
    }
    let n = genome.n();
    let mut edges = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if genome.entry(j, i) != 0 && !partition.same_module(j, i) {
                edges.push((j, i));
            }
        }
    }
    Ok(edges)
}

/// One evaluated removal subset: bit `b` of `mask` set means
/// `inter_edges[b]` was removed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticePoint {
    pub mask: u128,
    pub removed_count: usize,
    pub fitness: f64,
}

/// Fitness across subsets of inter-module edge removals.
#[derive(Clone, Debug)]
pub struct RemovalLattice {
    pub inter_edges: Vec<(usize, usize)>,
    /// Points sorted by mask; always includes the empty and full subsets.
    pub points: Vec<LatticePoint>,
    /// Whether every subset was enumerated (as opposed to sampled orders).
    pub exhaustive: bool,
}

impl RemovalLattice {
    pub fn point(&self, mask: u128) -> Option<&LatticePoint> {
        self.points
            .binary_search_by_key(&mask, |p| p.mask)
            .ok()
            .map(|idx| &self.points[idx])
    }

    pub fn empty_subset(&self) -> &LatticePoint {
        self.point(0).expect("lattice always holds the empty subset")
    }

    pub fn full_subset(&self) -> &LatticePoint {
        let full = if self.inter_edges.is_empty() {
            0
        } else {
            (1u128 << self.inter_edges.len()) - 1
        };
        self.point(full).expect("lattice always holds the full subset")
    }

    /// Binary mask string for CSV output: character `b` is '1' when
    /// `inter_edges[b]` is removed.
    pub fn mask_string(&self, mask: u128) -> String {
        (0..self.inter_edges.len())
            .map(|b| if mask & (1u128 << b) != 0 { '1' } else { '0' })
            .collect()
    }
}

fn genome_without(genome: &Genome, edges: &[(usize, usize)], mask: u128) -> Genome {
    let mut out = genome.clone();
    for (b, &(j, i)) in edges.iter().enumerate() {
        if mask & (1u128 << b) != 0 {
            out.set_entry(j, i, 0);
        }
    }
    out
}

/// Maps fitness over removal subsets of the genome's inter-module edges.
/// All `2^k` subsets are evaluated when they fit within `cap`; otherwise
/// `sample_orders` uniformly random removal orders contribute the subsets
/// seen along their paths (the empty and full subsets are always present).
pub fn removal_paths(
    genome: &Genome,
    partition: &Partition,
    ctx: &FitnessContext,
    cap: usize,
    sample_orders: usize,
    rng: &mut StreamRng,
) -> Result<RemovalLattice> {
    if cap == 0 {
        return Err(Error::InvalidValue("lattice cap must be at least 1".into()));
    }
    if sample_orders == 0 {
        return Err(Error::InvalidValue(
            "sampled removal orders must be at least 1".into(),
        ));
    }
    let inter_edges = inter_module_edges(genome, partition)?;
    let k = inter_edges.len();
    if k > 127 {
        return Err(Error::InvalidValue(format!(
            "removal lattice supports at most 127 inter-module edges, genome has {k}"
        )));
    }

    let exhaustive = k < usize::BITS as usize && (1usize << k) <= cap;
    let masks: Vec<u128> = if exhaustive {
        (0..(1u128 << k)).collect()
    } else {
        let mut seen: BTreeSet<u128> = BTreeSet::new();
        seen.insert(0);
        let mut order: Vec<usize> = (0..k).collect();
        for _ in 0..sample_orders {
            for step in 0..k {
                let pick = rng.gen_range(step..k);
                order.swap(step, pick);
            }
            let mut mask = 0u128;
            for &edge in &order {
                mask |= 1u128 << edge;
                seen.insert(mask);
            }
        }
        seen.into_iter().collect()
    };

    let points: Vec<LatticePoint> = masks
        .par_iter()
        .map(|&mask| -> Result<LatticePoint> {
            let variant = genome_without(genome, &inter_edges, mask);
            Ok(LatticePoint {
                mask,
                removed_count: mask.count_ones() as usize,
                fitness: fitness_multi_target(&variant, ctx)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RemovalLattice {
        inter_edges,
        points,
        exhaustive,
    })
}

/// Outcome of probing a genome's mutation neighborhood on frozen sets.
#[derive(Clone, Debug)]
pub struct NeighborProbe {
    /// Row 0 is the genome itself; rows 1.. are its neighbors.
    pub rows: Vec<(f64, Option<f64>)>,
    pub self_fitness: f64,
    pub self_q: Option<f64>,
    pub max_fitness: f64,
    /// Largest defined Q in the probed set; `None` when no member has one.
    pub max_q: Option<f64>,
}

/// Evaluates `genome` and `neighbor_count` single-pass mutation variants
/// of it on the frozen sets, reporting per-member rows and the maxima.
pub fn neighbor_probe(
    genome: &Genome,
    neighbor_count: usize,
    mutation_rate: f64,
    ctx: &FitnessContext,
    partition: &Partition,
    collapse: EdgeCollapse,
    rng: &mut StreamRng,
) -> Result<NeighborProbe> {
    if neighbor_count == 0 {
        return Err(Error::InvalidValue("neighbor count must be at least 1".into()));
    }
    let mut members = Vec::with_capacity(neighbor_count + 1);
    members.push(genome.clone());
    for _ in 0..neighbor_count {
        members.push(crate::evolution::mutate(genome, mutation_rate, rng));
    }
    let rows: Vec<(f64, Option<f64>)> = members
        .par_iter()
        .map(|g| -> Result<(f64, Option<f64>)> {
            Ok((
                fitness_multi_target(g, ctx)?,
                q_score_with(g, partition, collapse)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let (self_fitness, self_q) = rows[0];
    let max_fitness = rows.iter().map(|&(f, _)| f).fold(f64::NEG_INFINITY, f64::max);
    let max_q = rows
        .iter()
        .filter_map(|&(_, q)| q)
        .fold(None, |acc: Option<f64>, q| Some(acc.map_or(q, |a| a.max(q))));
    Ok(NeighborProbe {
        rows,
        self_fitness,
        self_q,
        max_fitness,
        max_q,
    })
}

fn fmt_opt(value: Option<f64>) -> String {
    match value {
        Some(v) => v.to_string(),
        None => "na".to_string(),
    }
}

pub const LATTICE_HEADER: &str = "removed_mask,removed_count,fitness";
pub const NEIGHBORS_HEADER: &str = "neighbor_id,fitness,q";
pub const DOMINANCE_HEADER: &str = "trial_id,role,fitness,q,genome_file";

pub fn write_lattice_csv(lattice: &RemovalLattice, path: &Path) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{LATTICE_HEADER}")?;
    for p in &lattice.points {
        writeln!(
            out,
            "{},{},{}",
            lattice.mask_string(p.mask),
            p.removed_count,
            p.fitness
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_neighbors_csv(probe: &NeighborProbe, path: &Path) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{NEIGHBORS_HEADER}")?;
    for (id, (fitness, q)) in probe.rows.iter().enumerate() {
        writeln!(out, "{},{},{}", id, fitness, fmt_opt(*q))?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `dominance.csv` plus one genome file per extracted individual
/// into `out_dir`.
pub fn write_dominance_outputs(
    entries: &[(String, DominancePair)],
    out_dir: &Path,
) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let file = fs::File::create(out_dir.join("dominance.csv"))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{DOMINANCE_HEADER}")?;
    for (trial_id, pair) in entries {
        for (role, snap) in [
            ("fittest_of_most_modular", &pair.fittest_of_most_modular),
            ("least_modular_of_fittest", &pair.least_modular_of_fittest),
        ] {
            let genome_file = format!("{trial_id}_{role}.txt");
            fs::write(out_dir.join(&genome_file), snap.genome.to_text())?;
            writeln!(
                out,
                "{},{},{},{},{}",
                trial_id,
                role,
                snap.fitness,
                fmt_opt(snap.q),
                genome_file
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use crate::evolution::run_trial_with_seed;
    use crate::fitness::{exact_fitness_oracle, sample_perturbations};
    use crate::genome::{Pattern, DEFAULT_MAX_STEPS};
    use crate::modularity::q_score;
    use crate::seed::stream_rng;
    use proptest::prelude::*;

    fn pat(s: &str) -> Pattern {
        Pattern::from_compact(s).unwrap()
    }

    fn snap(fitness: f64, q: Option<f64>) -> Snapshot {
        Snapshot {
            genome: Genome::identity(4).unwrap(),
            fitness,
            q,
        }
    }

    #[test]
    fn dominance_recovers_hand_planted_extremes() {
        let extremes = vec![
            GenerationExtremes {
                generation: 0,
                most_modular: snap(0.3, Some(0.2)),
                fittest: snap(0.8, Some(0.2)),
            },
            GenerationExtremes {
                generation: 1,
                most_modular: snap(0.1, Some(0.45)), // overall most modular
                fittest: snap(0.9, Some(0.4)),
            },
            GenerationExtremes {
                generation: 2,
                most_modular: snap(0.2, Some(0.3)),
                fittest: snap(0.9, Some(0.1)), // same fitness, lower q wins
            },
        ];
        let pair = extract_dominance(&extremes, (0, 2)).unwrap();
        assert_eq!(pair.fittest_of_most_modular.q, Some(0.45));
        assert_eq!(pair.least_modular_of_fittest.fitness, 0.9);
        assert_eq!(pair.least_modular_of_fittest.q, Some(0.1));

        // Restricting the range changes the answer.
        let early = extract_dominance(&extremes, (0, 0)).unwrap();
        assert_eq!(early.fittest_of_most_modular.q, Some(0.2));
        assert_eq!(early.least_modular_of_fittest.fitness, 0.8);
    }

    #[test]
    fn dominance_range_validation() {
        let extremes = vec![GenerationExtremes {
            generation: 0,
            most_modular: snap(0.5, Some(0.1)),
            fittest: snap(0.5, Some(0.1)),
        }];
        assert!(extract_dominance(&extremes, (1, 0)).is_err());
        assert!(extract_dominance(&extremes, (0, 5)).is_err());
        assert!(extract_dominance(&[], (0, 0)).is_err());
        let pair = extract_dominance(&extremes, (0, 0)).unwrap();
        assert_eq!(pair.fittest_of_most_modular, pair.least_modular_of_fittest);
    }

    #[test]
    fn trim_removes_exactly_the_cross_module_entries() {
        let partition = Partition::new(vec![0, 0, 1, 1]).unwrap();
        let mut g = Genome::zeros(4).unwrap();
        g.set_entry(0, 1, 1); // intra
        g.set_entry(1, 2, -1); // inter
        g.set_entry(2, 2, 1); // intra (self)
        g.set_entry(3, 0, 1); // inter
        let trimmed = trim_inter_module(&g, &partition).unwrap();
        assert_eq!(trimmed.entry(0, 1), 1);
        assert_eq!(trimmed.entry(2, 2), 1);
        assert_eq!(trimmed.entry(1, 2), 0);
        assert_eq!(trimmed.entry(3, 0), 0);
        assert_eq!(inter_module_edges(&trimmed, &partition).unwrap().len(), 0);

        // No inter-module entries: identity.
        let intra_only = trim_inter_module(&trimmed, &partition).unwrap();
        assert_eq!(intra_only, trimmed);
    }

    fn frozen_ctx(targets: &[Pattern], p: usize, rate: f64, seed: u64) -> FitnessContext {
        let mut rng = stream_rng(seed, &["frozen"]);
        let sets = targets
            .iter()
            .map(|t| sample_perturbations(t, p, rate, &mut rng).unwrap())
            .collect();
        FitnessContext::frozen(sets, DEFAULT_MAX_STEPS)
    }

    #[test]
    fn lattice_with_no_inter_edges_is_a_single_point() {
        let partition = Partition::new(vec![0, 0, 1, 1]).unwrap();
        let g = Genome::identity(4).unwrap();
        let ctx = frozen_ctx(&[pat("++--")], 20, 0.2, 1);
        let mut rng = stream_rng(1, &["lattice"]);
        let lattice = removal_paths(&g, &partition, &ctx, 1 << 10, 10, &mut rng).unwrap();
        assert!(lattice.exhaustive);
        assert_eq!(lattice.points.len(), 1);
        assert_eq!(lattice.empty_subset().mask, 0);
        assert_eq!(
            lattice.empty_subset().fitness,
            fitness_multi_target(&g, &ctx).unwrap()
        );
    }

    #[test]
    fn small_lattice_enumerates_all_subsets_with_exact_endpoints() {
        let partition = Partition::new(vec![0, 0, 1, 1]).unwrap();
        let mut g = Genome::identity(4).unwrap();
        g.set_entry(0, 2, 1);
        g.set_entry(3, 1, -1);
        let ctx = frozen_ctx(&[pat("++--")], 30, 0.2, 2);
        let mut rng = stream_rng(2, &["lattice"]);
        let lattice = removal_paths(&g, &partition, &ctx, 1 << 10, 10, &mut rng).unwrap();
        assert!(lattice.exhaustive);
        assert_eq!(lattice.points.len(), 4);
        assert_eq!(lattice.inter_edges, vec![(0, 2), (3, 1)]);

        // Endpoints match direct evaluation bit for bit.
        assert_eq!(
            lattice.empty_subset().fitness,
            fitness_multi_target(&g, &ctx).unwrap()
        );
        let trimmed = trim_inter_module(&g, &partition).unwrap();
        assert_eq!(
            lattice.full_subset().fitness,
            fitness_multi_target(&trimmed, &ctx).unwrap()
        );

        // Single-removal points match hand-built variants.
        for (b, &(j, i)) in lattice.inter_edges.iter().enumerate() {
            let mut variant = g.clone();
            variant.set_entry(j, i, 0);
            let expect = fitness_multi_target(&variant, &ctx).unwrap();
            assert_eq!(lattice.point(1 << b).unwrap().fitness, expect);
        }
    }

    #[test]
    fn sampled_lattice_covers_paths_and_keeps_endpoints() {
        let partition = Partition::new(vec![0, 0, 0, 1, 1, 1]).unwrap();
        let mut g = Genome::identity(6).unwrap();
        for (j, i) in [(0, 3), (1, 4), (2, 5), (4, 0), (5, 2)] {
            g.set_entry(j, i, 1);
        }
        let ctx = frozen_ctx(&[pat("+++---")], 25, 0.2, 3);
        // Cap of 4 forces sampling (2^5 = 32 subsets exist).
        let mut rng = stream_rng(3, &["lattice"]);
        let lattice = removal_paths(&g, &partition, &ctx, 4, 6, &mut rng).unwrap();
        assert!(!lattice.exhaustive);
        assert!(lattice.points.len() <= 32);
        // Every path step count appears, endpoints included.
        assert_eq!(lattice.empty_subset().removed_count, 0);
        assert_eq!(lattice.full_subset().removed_count, 5);
        assert_eq!(
            lattice.full_subset().fitness,
            fitness_multi_target(&trim_inter_module(&g, &partition).unwrap(), &ctx).unwrap()
        );
        // Deterministic under the same stream.
        let mut rng2 = stream_rng(3, &["lattice"]);
        let again = removal_paths(&g, &partition, &ctx, 4, 6, &mut rng2).unwrap();
        assert_eq!(lattice.points, again.points);
    }

    #[test]
    fn neighbor_probe_with_zero_rate_is_all_self() {
        let partition = Partition::new(vec![0, 0, 1, 1]).unwrap();
        let g = Genome::identity(4).unwrap();
        let ctx = frozen_ctx(&[pat("++--")], 20, 0.2, 4);
        let mut rng = stream_rng(4, &["probe"]);
        let probe =
            neighbor_probe(&g, 10, 0.0, &ctx, &partition, EdgeCollapse::Union, &mut rng).unwrap();
        assert_eq!(probe.rows.len(), 11);
        assert_eq!(probe.max_fitness, probe.self_fitness);
        assert_eq!(probe.max_q, probe.self_q);
        for &(f, q) in &probe.rows {
            assert_eq!(f, probe.self_fitness);
            assert_eq!(q, probe.self_q);
        }
    }

    #[test]
    fn neighbor_probe_finds_a_fitter_neighbor_when_one_exists() {
        // Identity wiring restores every gene; an extra repression from
        // gene 0 onto gene 1 breaks recovery of gene 1, and the exact
        // oracle confirms that deleting it raises fitness. A large probe
        // must surface a strictly fitter neighbor.
        let target = pat("++++");
        let mut hampered = Genome::identity(4).unwrap();
        hampered.set_entry(0, 1, -1);
        let fixed = {
            let mut g = hampered.clone();
            g.set_entry(0, 1, 0);
            g
        };
        let worse = exact_fitness_oracle(&hampered, &target, 0.15, DEFAULT_MAX_STEPS).unwrap();
        let better = exact_fitness_oracle(&fixed, &target, 0.15, DEFAULT_MAX_STEPS).unwrap();
        assert!(better > worse + 1e-6);

        let partition = Partition::new(vec![0, 0, 1, 1]).unwrap();
        let ctx = frozen_ctx(&[target], 400, 0.15, 5);
        let mut rng = stream_rng(5, &["probe"]);
        let probe = neighbor_probe(
            &hampered,
            400,
            0.05,
            &ctx,
            &partition,
            EdgeCollapse::Union,
            &mut rng,
        )
        .unwrap();
        assert!(
            probe.max_fitness > probe.self_fitness,
            "no fitter neighbor found: max {} self {}",
            probe.max_fitness,
            probe.self_fitness
        );
    }

    #[test]
    fn probe_maxima_never_fall_below_self() {
        let cfg = {
            let mut cfg = RunConfig::default();
            cfg.evo.population_size = 10;
            cfg.evo.perturbation_count = 5;
            cfg.evo.max_generation = 3;
            cfg
        };
        let record = run_trial_with_seed(&cfg, 77).unwrap();
        let g = &record.final_population[0].genome;
        let partition = cfg.partition();
        let ctx = frozen_ctx(
            &cfg.schedule.targets().cloned().collect::<Vec<_>>(),
            50,
            0.15,
            6,
        );
        let mut rng = stream_rng(6, &["probe"]);
        let probe =
            neighbor_probe(g, 30, 0.05, &ctx, &partition, EdgeCollapse::Union, &mut rng).unwrap();
        assert!(probe.max_fitness >= probe.self_fitness);
        if let (Some(max_q), Some(self_q)) = (probe.max_q, probe.self_q) {
            assert!(max_q >= self_q);
        }
    }

    #[test]
    fn csv_writers_produce_the_documented_schemas() {
        let tmp = tempfile::TempDir::new().unwrap();
        let partition = Partition::new(vec![0, 0, 1, 1]).unwrap();
        let mut g = Genome::identity(4).unwrap();
        g.set_entry(0, 2, 1);
        let ctx = frozen_ctx(&[pat("++--")], 10, 0.2, 7);
        let mut rng = stream_rng(7, &["csv"]);
        let lattice = removal_paths(&g, &partition, &ctx, 16, 4, &mut rng).unwrap();
        let lattice_path = tmp.path().join("lattice.csv");
        write_lattice_csv(&lattice, &lattice_path).unwrap();
        let text = fs::read_to_string(&lattice_path).unwrap();
        assert!(text.starts_with("removed_mask,removed_count,fitness\n0,0,"));
        assert!(text.lines().count() == 3); // header + two subsets

        let probe =
            neighbor_probe(&g, 3, 0.1, &ctx, &partition, EdgeCollapse::Union, &mut rng).unwrap();
        let neighbors_path = tmp.path().join("neighbors.csv");
        write_neighbors_csv(&probe, &neighbors_path).unwrap();
        let text = fs::read_to_string(&neighbors_path).unwrap();
        assert!(text.starts_with("neighbor_id,fitness,q\n0,"));
        assert_eq!(text.lines().count(), 5);

        let pair = DominancePair {
            fittest_of_most_modular: snap(0.4, Some(0.5)),
            least_modular_of_fittest: snap(0.9, Some(0.05)),
        };
        write_dominance_outputs(&[("none_3".to_string(), pair)], tmp.path()).unwrap();
        let text = fs::read_to_string(tmp.path().join("dominance.csv")).unwrap();
        assert!(text.starts_with("trial_id,role,fitness,q,genome_file\n"));
        assert!(text.contains("none_3,fittest_of_most_modular,0.4,0.5,"));
        assert!(tmp
            .path()
            .join("none_3_least_modular_of_fittest.txt")
            .exists());
    }

    proptest! {
        #[test]
        fn trim_is_idempotent_and_never_adds_edges(
            entries in prop::collection::vec(-1i8..=1, 36),
            ids in prop::collection::vec(0usize..2, 6),
        ) {
            prop_assume!(ids.first() == Some(&0));
            let partition = Partition::new(ids).unwrap();
            let g = Genome::new(6, entries).unwrap();
            let trimmed = trim_inter_module(&g, &partition).unwrap();
            prop_assert_eq!(
                trim_inter_module(&trimmed, &partition).unwrap(),
                trimmed.clone()
            );
            prop_assert!(trimmed.edge_count() <= g.edge_count());
            // Q never drops when both defined.
            if let (Some(before), Some(after)) = (
                q_score(&g, &partition).unwrap(),
                q_score(&trimmed, &partition).unwrap(),
            ) {
                prop_assert!(after >= before - 1e-12);
            }
        }
    }
}
