//! Acceptance battery: the externally pinned criteria the whole workspace
//! must satisfy. Criteria 4 through 8 share one seed-matched treatment
//! suite (see specs/acceptance.toml) that runs once per test process.

use grnsim::analysis::{extract_dominance, removal_paths, trim_inter_module};
use grnsim::config::RunConfig;
use grnsim::evolution::run_trial_with_seed;
use grnsim::experiment::{
    run_experiment, CompletedTrial, ComparisonRow, ExperimentRun, ExperimentSpec, Metric,
};
use grnsim::fitness::{
    exact_fitness_oracle, fitness_ceiling, fitness_multi_target, gamma, sample_perturbations,
    FitnessContext,
};
use grnsim::genome::{Genome, Pattern, DEFAULT_MAX_STEPS};
use grnsim::modularity::{q_score, q_score_with, EdgeCollapse, Partition};
use grnsim::seed::{stream_rng, StreamRng};
use grnsim::stats::{wilcoxon_signed_rank, Alternative, PairedSamples};
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use std::sync::LazyLock;
use std::time::{Duration, Instant};

const SUITE_TOML: &str = include_str!("../../../specs/acceptance.toml");

static FIXTURE: LazyLock<ExperimentRun> = LazyLock::new(|| {
    let spec = ExperimentSpec::from_toml(SUITE_TOML).expect("suite spec parses");
    assert_eq!(spec.trials, 20);
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let run = run_experiment(&spec, None, workers).expect("suite runs");
    assert!(
        run.failures.is_empty(),
        "suite trials failed: {:?}",
        run.failures
    );
    run
});

fn comparison<'a>(run: &'a ExperimentRun, metric: Metric, a: &str, b: &str) -> &'a ComparisonRow {
    run.comparisons
        .iter()
        .find(|c| c.metric == metric && c.a == a && c.b == b)
        .expect("comparison declared in the suite spec")
}

fn mean_final_q(run: &ExperimentRun, treatment: &str) -> f64 {
    let qs: Vec<f64> = run
        .summaries
        .iter()
        .filter(|s| s.treatment == treatment)
        .map(|s| s.final_best_q.expect("evolved populations define Q"))
        .collect();
    assert_eq!(qs.len(), 20, "expected 20 trials for {treatment}");
    qs.iter().sum::<f64>() / qs.len() as f64
}

fn treatment_records<'a>(run: &'a ExperimentRun, treatment: &str) -> Vec<&'a CompletedTrial> {
    run.records
        .iter()
        .filter(|r| r.treatment == treatment)
        .collect()
}

/// Frozen perturbation sets for one trial's config, seeded from the
/// trial's own seed so the battery is reproducible end to end.
fn frozen_sets(cfg: &RunConfig, seed: u64, samples: usize, label: &str) -> FitnessContext {
    let mut rng = stream_rng(seed, &["acceptance", label]);
    let sets = cfg
        .schedule
        .targets()
        .map(|t| sample_perturbations(t, samples, cfg.evo.perturbation_rate, &mut rng).unwrap())
        .collect();
    FitnessContext::frozen(sets, cfg.max_steps)
}

fn random_genome(n: usize, density: f64, rng: &mut StreamRng) -> Genome {
    let entries: Vec<i8> = (0..n * n)
        .map(|_| {
            if rng.gen_bool(density) {
                if rng.gen_bool(0.5) {
                    1
                } else {
                    -1
                }
            } else {
                0
            }
        })
        .collect();
    Genome::new(n, entries).unwrap()
}

// Criterion 1: Monte Carlo fitness estimates agree with the exhaustive
// oracle to within sampling error on random 8-gene networks.
#[test]
fn criterion_01_monte_carlo_matches_the_exact_oracle() {
    let started = Instant::now();
    let n = 8;
    let rate = 0.15;
    let target = Pattern::from_compact("+-+-+-+-").unwrap();
    let mut rng = stream_rng(1, &["acceptance", "oracle"]);
    const P: usize = 50_000;

    for case in 0..50 {
        let density = [0.1, 0.2, 0.3, 0.4][case % 4];
        let genome = random_genome(n, density, &mut rng);
        let exact = exact_fitness_oracle(&genome, &target, rate, DEFAULT_MAX_STEPS).unwrap();

        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..P {
            let mut perturbed = target.clone();
            for gene in 0..n {
                if rng.gen_bool(rate) {
                    perturbed = perturbed.with_flipped(gene);
                }
            }
            let g = gamma(&genome, &perturbed, &target, DEFAULT_MAX_STEPS).unwrap();
            sum += g;
            sum_sq += g * g;
        }
        let mean = sum / P as f64;
        let var = (sum_sq - sum * sum / P as f64) / (P as f64 - 1.0);
        let se_gamma = (var.max(0.0) / P as f64).sqrt();
        let estimate = 1.0 - (-3.0 * mean).exp();
        // Delta method: d/dgamma of 1 - e^{-3 gamma} is 3 e^{-3 gamma}.
        // The 1e-12 floor absorbs accumulation rounding when every sampled
        // gamma is identical and the standard error collapses to zero.
        let se = 3.0 * (-3.0 * mean).exp() * se_gamma;
        assert!(
            (estimate - exact).abs() <= 4.0 * se + 1e-12,
            "case {case}: estimate {estimate} vs exact {exact} (se {se})"
        );
        assert!(estimate <= fitness_ceiling() + 1e-12);
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed < Duration::from_secs(120),
        "oracle battery took {elapsed:?}"
    );
}

// Criterion 2: no evaluated genome exceeds the analytic fitness ceiling,
// and a genome perfect on every sample sits exactly at it.
#[test]
fn criterion_02_fitness_never_exceeds_the_analytic_ceiling() {
    let ceiling = fitness_ceiling();
    let analytic = 1.0 - (-3.0f64).exp();
    assert!((ceiling - analytic).abs() < 1e-15);

    // Perfect recovery on every sample: rate-zero perturbation sets leave
    // the target untouched and the identity network holds it fixed.
    let target = Pattern::from_compact("+-+-+-+-+-").unwrap();
    let set = {
        let mut rng = stream_rng(2, &["acceptance", "ceiling"]);
        sample_perturbations(&target, 100, 0.0, &mut rng).unwrap()
    };
    let ctx = FitnessContext::frozen(vec![set], DEFAULT_MAX_STEPS);
    let perfect = fitness_multi_target(&Genome::identity(10).unwrap(), &ctx).unwrap();
    assert!((perfect - analytic).abs() <= 1e-9);
    assert_eq!(format!("{perfect:.6}"), "0.950213");

    // Every fitness the shared suite ever recorded respects the ceiling.
    let bound = ceiling + 1e-12;
    for trial in &FIXTURE.records {
        for row in &trial.record.rows {
            assert!(row.best_fitness <= bound);
            assert!(row.mean_fitness <= bound);
        }
        for e in &trial.record.extremes {
            assert!(e.most_modular.fitness <= bound);
            assert!(e.fittest.fitness <= bound);
        }
        for ind in &trial.record.final_population {
            assert!(ind.fitness <= bound);
        }
    }
}

/// Independent restatement of the modularity score: classify collapsed
/// undirected edges per module and sum l/L - (d/2L)^2.
fn q_by_edge_classification(
    genome: &Genome,
    partition: &Partition,
    collapse: EdgeCollapse,
) -> Option<f64> {
    let n = genome.n();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        if genome.entry(i, i) != 0 {
            edges.push((i, i));
        }
        for j in (i + 1)..n {
            let forward = genome.entry(i, j) != 0;
            let backward = genome.entry(j, i) != 0;
            match collapse {
                EdgeCollapse::Union => {
                    if forward || backward {
                        edges.push((i, j));
                    }
                }
                EdgeCollapse::Multi => {
                    if forward {
                        edges.push((i, j));
                    }
                    if backward {
                        edges.push((i, j));
                    }
                }
            }
        }
    }
    if edges.is_empty() {
        return None;
    }
    let total = edges.len() as f64;
    let mut q = 0.0;
    for m in 0..partition.k() {
        let intra = edges
            .iter()
            .filter(|&&(a, b)| partition.module_of(a) == m && partition.module_of(b) == m)
            .count() as f64;
        let degree = edges
            .iter()
            .map(|&(a, b)| {
                (partition.module_of(a) == m) as usize + (partition.module_of(b) == m) as usize
            })
            .sum::<usize>() as f64;
        q += intra / total - (degree / (2.0 * total)).powi(2);
    }
    Some(q)
}

fn random_partition(n: usize, rng: &mut StreamRng) -> Partition {
    let k = rng.gen_range(1..=n.min(4));
    let mut ids: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    // Force contiguous module numbering from zero.
    let mut remap: Vec<Option<usize>> = vec![None; k];
    let mut next = 0;
    for id in ids.iter_mut() {
        let mapped = *remap[*id].get_or_insert_with(|| {
            let m = next;
            next += 1;
            m
        });
        *id = mapped;
    }
    Partition::new(ids).unwrap()
}

// Criterion 3: modularity score correctness against structural facts and
// a brute-force oracle.
#[test]
fn criterion_03_q_matches_structure_and_brute_force() {
    let mut rng = stream_rng(3, &["acceptance", "q"]);

    // Single-module partitions score exactly zero.
    for _ in 0..100 {
        let n = rng.gen_range(2..=12);
        let genome = random_genome(n, 0.3, &mut rng);
        if let Some(q) = q_score(&genome, &Partition::single(n)).unwrap() {
            assert_eq!(q, 0.0);
        }
    }

    // Two modules, no inter-module edges, equal degrees: exactly 1/2.
    let mut triangles = Genome::zeros(6).unwrap();
    for (j, i) in [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)] {
        triangles.set_entry(j, i, 1);
    }
    let halves = Partition::new(vec![0, 0, 0, 1, 1, 1]).unwrap();
    assert_eq!(q_score(&triangles, &halves).unwrap(), Some(0.5));

    // Range bound over 10000 random graphs and partitions.
    for _ in 0..10_000 {
        let n = rng.gen_range(2..=12);
        let genome = random_genome(n, 0.25, &mut rng);
        let partition = random_partition(n, &mut rng);
        if let Some(q) = q_score(&genome, &partition).unwrap() {
            assert!((-0.5..1.0).contains(&q), "q out of range: {q}");
        }
    }

    // Brute-force agreement on 1000 random 10-gene graphs, both collapses.
    for _ in 0..1000 {
        let genome = random_genome(10, 0.25, &mut rng);
        let partition = random_partition(10, &mut rng);
        for collapse in [EdgeCollapse::Union, EdgeCollapse::Multi] {
            let fast = q_score_with(&genome, &partition, collapse).unwrap();
            let brute = q_by_edge_classification(&genome, &partition, collapse);
            match (fast, brute) {
                (None, None) => {}
                (Some(x), Some(y)) => assert!((x - y).abs() < 1e-12, "{x} vs {y}"),
                other => panic!("collapse disagreement: {other:?}"),
            }
        }
    }
}

// Criterion 4: diagonal crossover promotes modularity, with treatment
// means inside the pinned reference bands.
#[test]
fn criterion_04_crossover_direction_and_magnitude() {
    let run = &FIXTURE;
    let q_none = mean_final_q(run, "none");
    let q_horizontal = mean_final_q(run, "horizontal");
    let q_diagonal = mean_final_q(run, "diagonal");
    assert!(
        (q_none - 0.1961).abs() <= 0.12,
        "no-crossover mean Q {q_none} strays from 0.1961"
    );
    assert!(
        (q_horizontal - 0.2919).abs() <= 0.12,
        "horizontal mean Q {q_horizontal} strays from 0.2919"
    );
    assert!(
        (q_diagonal - 0.3386).abs() <= 0.12,
        "diagonal mean Q {q_diagonal} strays from 0.3386"
    );

    let row = comparison(run, Metric::FinalBestQ, "none", "diagonal");
    assert_eq!(row.n_pairs, 20);
    assert!(row.mean_a.unwrap() < row.mean_b.unwrap());
    let p = row.p.expect("20 pairs yield a p-value");
    assert!(p < 0.05, "diagonal > none not significant: p = {p}");
}

// Criterion 5: elitism depresses final modularity.
#[test]
fn criterion_05_elitism_lowers_modularity() {
    let row = comparison(&FIXTURE, Metric::FinalBestQ, "diag_elite10", "diagonal");
    assert_eq!(row.n_pairs, 20);
    assert!(row.mean_a.unwrap() < row.mean_b.unwrap());
    let p = row.p.expect("20 pairs yield a p-value");
    assert!(p < 0.05, "elite-10 Q reduction not significant: p = {p}");
}

// Criterion 6: the dynamic landscape beats the static one on best
// fitness; the Q difference is recorded but not gated.
#[test]
fn criterion_06_dynamic_beats_static_fitness() {
    let row = comparison(
        &FIXTURE,
        Metric::FinalBestFitness,
        "diag_static",
        "diagonal",
    );
    assert_eq!(row.n_pairs, 20);
    assert!(row.mean_a.unwrap() < row.mean_b.unwrap());
    let p = row.p.expect("20 pairs yield a p-value");
    assert!(p < 0.05, "dynamic > static not significant: p = {p}");

    let q_row = comparison(&FIXTURE, Metric::FinalBestQ, "diag_static", "diagonal");
    println!(
        "recorded statistic: mean final Q static {} vs dynamic {} (one-sided p {})",
        q_row.mean_a.unwrap(),
        q_row.mean_b.unwrap(),
        q_row.p.map_or_else(|| "na".into(), |p| p.to_string()),
    );
}

// Criterion 7: trimming inter-module edges of the least modular among the
// fittest individuals frequently raises frozen-set fitness.
#[test]
fn criterion_07_trimming_often_improves_fitness() {
    let records = treatment_records(&FIXTURE, "diagonal");
    assert_eq!(records.len(), 20);
    let mut improved = 0usize;
    for trial in &records {
        let cfg = &trial.record.config;
        let last = cfg.evo.max_generation;
        let pair = extract_dominance(&trial.record.extremes, (0, last)).unwrap();
        let genome = &pair.least_modular_of_fittest.genome;
        let ctx = frozen_sets(cfg, trial.record.seed, 1000, "trim");
        let before = fitness_multi_target(genome, &ctx).unwrap();
        let trimmed = trim_inter_module(genome, &cfg.partition()).unwrap();
        let after = fitness_multi_target(&trimmed, &ctx).unwrap();
        if after > before {
            improved += 1;
        }
    }
    let fraction = improved as f64 / records.len() as f64;
    assert!(
        fraction >= 0.35,
        "trim improved only {improved} of {} genomes ({fraction})",
        records.len()
    );
}

// Criterion 8: removal-lattice endpoints equal direct evaluation of the
// unmodified and fully trimmed genomes, bit for bit.
#[test]
fn criterion_08_lattice_endpoints_are_bit_exact() {
    let records = treatment_records(&FIXTURE, "diagonal");
    for trial in &records {
        let cfg = &trial.record.config;
        let last = cfg.evo.max_generation;
        let pair = extract_dominance(&trial.record.extremes, (0, last)).unwrap();
        let genome = &pair.least_modular_of_fittest.genome;
        let partition = cfg.partition();
        let ctx = frozen_sets(cfg, trial.record.seed, 200, "lattice");
        let mut rng = stream_rng(trial.record.seed, &["acceptance", "lattice-orders"]);
        let lattice = removal_paths(genome, &partition, &ctx, 1 << 10, 20, &mut rng).unwrap();

        let direct = fitness_multi_target(genome, &ctx).unwrap();
        let trimmed =
            fitness_multi_target(&trim_inter_module(genome, &partition).unwrap(), &ctx).unwrap();
        assert_eq!(lattice.empty_subset().fitness, direct);
        assert_eq!(lattice.full_subset().fitness, trimmed);
    }
}

/// Brute-force signed-rank p by enumerating every sign assignment of the
/// observed |difference| multiset.
fn brute_signed_rank(diffs: &[f64], alternative: Alternative) -> (f64, f64) {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    let m = nonzero.len();
    assert!(m > 0 && m <= 16, "brute enumeration bound");
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| nonzero[a].abs().partial_cmp(&nonzero[b].abs()).unwrap());
    let mut ranks = vec![0.0; m];
    let mut i = 0;
    while i < m {
        let mut j = i + 1;
        while j < m && nonzero[order[j]].abs() == nonzero[order[i]].abs() {
            j += 1;
        }
        let rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        i = j;
    }
    let w_obs: f64 = (0..m)
        .filter(|&i| nonzero[i] > 0.0)
        .map(|i| ranks[i])
        .sum();
    let total = 1u64 << m;
    let mut count_le = 0u64;
    let mut count_ge = 0u64;
    for mask in 0..total {
        let w: f64 = (0..m)
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| ranks[i])
            .sum();
        if w <= w_obs + 1e-9 {
            count_le += 1;
        }
        if w >= w_obs - 1e-9 {
            count_ge += 1;
        }
    }
    let p_less = count_le as f64 / total as f64;
    let p_greater = count_ge as f64 / total as f64;
    let p = match alternative {
        Alternative::ALessB => p_less,
        Alternative::AGreaterB => p_greater,
        Alternative::TwoSided => (2.0 * p_less.min(p_greater)).min(1.0),
    };
    (w_obs, p)
}

// Criterion 9: signed-rank test correctness against hand values, full
// enumeration, and the large-sample approximation at the crossover point.
#[test]
fn criterion_09_wilcoxon_matches_enumeration_and_approximation() {
    // Hand value: differences {+1, +2, +3}.
    let samples = PairedSamples::from_diffs(&[1.0, 2.0, 3.0]).unwrap();
    let outcome = wilcoxon_signed_rank(&samples, Alternative::AGreaterB).unwrap();
    assert_eq!(outcome.w, 6.0);
    assert_eq!(outcome.p, 0.125);

    // Enumeration agreement on 100 random tied datasets with m <= 12.
    let mut rng = stream_rng(4, &["acceptance", "wilcoxon"]);
    let mut checked = 0;
    while checked < 100 {
        let m = 1 + checked % 12;
        let diffs: Vec<f64> = (0..m)
            .map(|_| rng.gen_range(-8i32..=8) as f64 / 2.0)
            .collect();
        if diffs.iter().all(|&d| d == 0.0) {
            continue;
        }
        for alternative in [
            Alternative::ALessB,
            Alternative::AGreaterB,
            Alternative::TwoSided,
        ] {
            let (w_brute, p_brute) = brute_signed_rank(&diffs, alternative);
            let outcome =
                wilcoxon_signed_rank(&PairedSamples::from_diffs(&diffs).unwrap(), alternative)
                    .unwrap();
            assert!(outcome.exact);
            assert_eq!(outcome.w, w_brute);
            assert!(
                (outcome.p - p_brute).abs() < 1e-9,
                "m {m} {alternative:?}: {} vs {p_brute}",
                outcome.p
            );
        }
        checked += 1;
    }

    // Exact vs normal approximation at the m = 20 boundary, on tie-free
    // continuous data; the approximation is restated independently here.
    let normal = Normal::new(0.0, 1.0).unwrap();
    for round in 0..20 {
        let diffs: Vec<f64> = (0..20)
            .map(|_| {
                let value = rng.gen_range(-1.0f64..1.0) + rng.gen_range(-1.0f64..1.0);
                if value == 0.0 {
                    0.5
                } else {
                    value
                }
            })
            .collect();
        let samples = PairedSamples::from_diffs(&diffs).unwrap();
        let m = 20.0f64;
        let mu = m * (m + 1.0) / 4.0;
        let sigma = (m * (m + 1.0) * (2.0 * m + 1.0) / 24.0).sqrt();
        for alternative in [
            Alternative::ALessB,
            Alternative::AGreaterB,
            Alternative::TwoSided,
        ] {
            let outcome = wilcoxon_signed_rank(&samples, alternative).unwrap();
            assert!(outcome.exact);
            let w = outcome.w;
            let p_less = normal.cdf((w + 0.5 - mu) / sigma);
            let p_greater = 1.0 - normal.cdf((w - 0.5 - mu) / sigma);
            let approx = match alternative {
                Alternative::ALessB => p_less,
                Alternative::AGreaterB => p_greater,
                Alternative::TwoSided => (2.0 * p_less.min(p_greater)).min(1.0),
            };
            assert!(
                (outcome.p - approx).abs() < 0.01,
                "round {round} {alternative:?}: exact {} vs approx {approx}",
                outcome.p
            );
        }
    }
}

const DETERMINISM_SPEC: &str = r#"
name = "determinism"
trials = 5
master_seed = 77

[base]
population_size = 12
perturbation_count = 5
max_generation = 6
crossover_type = "diagonal"

[[treatment]]
name = "plain"

[[treatment]]
name = "elite"
elite_size = 2

[[comparison]]
metric = "final_best_fitness"
a = "plain"
b = "elite"
alternative = "two_sided"
"#;

// Criterion 10: identical configs and seeds give byte-identical outputs
// regardless of worker count or rerun.
#[test]
fn criterion_10_outputs_are_deterministic_across_workers() {
    use grnsim::experiment::{comparisons_csv_text, results_csv_text};
    let spec = ExperimentSpec::from_toml(DETERMINISM_SPEC).unwrap();
    let serial = run_experiment(&spec, None, 1).unwrap();
    let parallel = run_experiment(&spec, None, 8).unwrap();
    let rerun = run_experiment(&spec, None, 8).unwrap();
    assert_eq!(
        results_csv_text(&serial.summaries),
        results_csv_text(&parallel.summaries)
    );
    assert_eq!(
        results_csv_text(&parallel.summaries),
        results_csv_text(&rerun.summaries)
    );
    assert_eq!(
        comparisons_csv_text(&serial.comparisons),
        comparisons_csv_text(&parallel.comparisons)
    );
    assert_eq!(
        comparisons_csv_text(&parallel.comparisons),
        comparisons_csv_text(&rerun.comparisons)
    );

    let cfg = RunConfig::default().with_overrides(&[
        ("population_size".to_string(), "12".to_string()),
        ("perturbation_count".to_string(), "5".to_string()),
        ("max_generation".to_string(), "6".to_string()),
    ]);
    let cfg = cfg.unwrap();
    let once = run_trial_with_seed(&cfg, 3).unwrap();
    let twice = run_trial_with_seed(&cfg, 3).unwrap();
    assert_eq!(once.rows, twice.rows);
    assert_eq!(once.extremes, twice.extremes);
}

// Criterion 11: one default-scale trial stays within the ten-minute
// single-thread budget.
#[test]
fn criterion_11_default_trial_fits_the_time_budget() {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let cfg = RunConfig::default();
    let record = pool.install(|| run_trial_with_seed(&cfg, 31)).unwrap();
    assert_eq!(record.rows.len(), cfg.evo.max_generation + 1);
    assert!(
        record.wall_time <= Duration::from_secs(600),
        "default trial took {:?}",
        record.wall_time
    );
    let bound = fitness_ceiling() + 1e-12;
    for row in &record.rows {
        assert!(row.best_fitness <= bound);
    }
}
