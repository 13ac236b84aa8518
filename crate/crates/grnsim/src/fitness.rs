//! Robustness fitness: how reliably a genome develops a target expression
//! pattern from noise-perturbed versions of that pattern.
//!
//! One perturbation trajectory scores `gamma = (1 - D/N)^5`, where `D` is
//! the Hamming distance from the settled attractor to the target and `D = N`
//! when the dynamics do not settle. A target's fitness maps the mean gamma
//! over the perturbation set through `1 - exp(-3 * mean)`; several active
//! targets contribute the arithmetic mean of their per-target fitnesses.

use crate::error::{Error, Result};
use crate::genome::{hamming, Attractor, Genome, PackedGenome, Pattern, MAX_GENES};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Exponent applied to the retained-proximity term of a trajectory score.
pub const TRAJECTORY_EXPONENT: f64 = 5.0;

/// Rate constant of the saturating map from mean gamma to fitness.
pub const FITNESS_SCALE: f64 = 3.0;

/// Largest attainable fitness, `1 - e^{-3}`: every perturbation settles
/// exactly on target.
pub fn fitness_ceiling() -> f64 {
    1.0 - (-FITNESS_SCALE).exp()
}

/// Whether perturbation sets are resampled every generation or frozen for
/// the whole run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitnessMode {
    Dynamic,
    Static,
}

impl FromStr for FitnessMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dynamic" => Ok(FitnessMode::Dynamic),
            "static" => Ok(FitnessMode::Static),
            other => Err(Error::InvalidValue(format!(
                "fitness mode must be dynamic or static, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for FitnessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitnessMode::Dynamic => write!(f, "dynamic"),
            FitnessMode::Static => write!(f, "static"),
        }
    }
}

/// A target pattern together with the noisy initial states it is scored
/// against.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationSet {
    target: Pattern,
    samples: Vec<Pattern>,
    rate: f64,
}

impl PerturbationSet {
    pub fn new(target: Pattern, samples: Vec<Pattern>, rate: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidValue(
                "perturbation set needs at least one sample".into(),
            ));
        }
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::InvalidValue(format!(
                "perturbation rate must lie in [0, 1], got {rate}"
            )));
        }
        for s in &samples {
            if s.len() != target.len() {
                return Err(Error::DimensionMismatch(format!(
                    "sample has {} genes but target has {}",
                    s.len(),
                    target.len()
                )));
            }
        }
        Ok(Self { target, samples, rate })
    }

    pub fn target(&self) -> &Pattern {
        &self.target
    }

    pub fn samples(&self) -> &[Pattern] {
        &self.samples
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Audit text: a header line, then one compact sample per line.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "target={} rate={} samples={}\n",
            self.target.to_compact(),
            self.rate,
            self.samples.len()
        );
        for s in &self.samples {
            out.push_str(&s.to_compact());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty perturbation set text".into()))?;
        let mut target = None;
        let mut rate = None;
        for field in header.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("malformed header field {field:?}")))?;
            match key {
                "target" => target = Some(Pattern::from_compact(value)?),
                "rate" => {
                    rate = Some(value.parse::<f64>().map_err(|e| {
                        Error::Parse(format!("bad rate {value:?}: {e}"))
                    })?)
                }
                "samples" => {}
                other => return Err(Error::Parse(format!("unknown header field {other:?}"))),
            }
        }
        let target = target.ok_or_else(|| Error::Parse("header lacks target".into()))?;
        let rate = rate.ok_or_else(|| Error::Parse("header lacks rate".into()))?;
        let samples = lines
            .filter(|l| !l.trim().is_empty())
            .map(Pattern::from_compact)
            .collect::<Result<Vec<_>>>()?;
        Self::new(target, samples, rate)
    }
}

/// Draws `count` perturbed copies of `target`, flipping each gene
/// independently with probability `rate`.
pub fn sample_perturbations(
    target: &Pattern,
    count: usize,
    rate: f64,
    rng: &mut impl Rng,
) -> Result<PerturbationSet> {
    if count == 0 {
        return Err(Error::InvalidValue(
            "perturbation count must be at least 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidValue(format!(
            "perturbation rate must lie in [0, 1], got {rate}"
        )));
    }
    let samples = (0..count)
        .map(|_| {
            let states: Vec<i8> = target
                .states()
                .iter()
                .map(|&s| if rng.gen_bool(rate) { -s } else { s })
                .collect();
            Pattern::new(states).expect("flipping preserves validity")
        })
        .collect();
    PerturbationSet::new(target.clone(), samples, rate)
}

/// Evaluation context shared by a whole population: the active perturbation
/// sets plus the dynamics budget and score-shape constants.
#[derive(Clone, Debug)]
pub struct FitnessContext {
    pub mode: FitnessMode,
    pub max_steps: usize,
    pub exponent: f64,
    pub scale: f64,
    sets: Vec<PerturbationSet>,
    active: usize,
}

impl FitnessContext {
    /// An empty context; populate it with [`FitnessContext::install_sets`]
    /// and [`FitnessContext::set_active`].
    pub fn new(mode: FitnessMode, max_steps: usize) -> Self {
        Self {
            mode,
            max_steps,
            exponent: TRAJECTORY_EXPONENT,
            scale: FITNESS_SCALE,
            sets: Vec::new(),
            active: 0,
        }
    }

    /// A frozen context in which every given set stays active; used for
    /// post-run probes that must score many genomes on identical noise.
    pub fn frozen(sets: Vec<PerturbationSet>, max_steps: usize) -> Self {
        let active = sets.len();
        Self {
            mode: FitnessMode::Static,
            max_steps,
            exponent: TRAJECTORY_EXPONENT,
            scale: FITNESS_SCALE,
            sets,
            active,
        }
    }

    /// Replaces the stored sets. The first `active` of them score genomes.
    pub fn install_sets(&mut self, sets: Vec<PerturbationSet>, active: usize) {
        debug_assert!(active <= sets.len());
        self.sets = sets;
        self.active = active;
    }

    /// Marks how many of the stored sets are active, without resampling.
    pub fn set_active(&mut self, active: usize) {
        debug_assert!(active <= self.sets.len());
        self.active = active;
    }

    pub fn active_sets(&self) -> &[PerturbationSet] {
        &self.sets[..self.active]
    }

    pub fn all_sets(&self) -> &[PerturbationSet] {
        &self.sets
    }
}

/// Score of `(1 - d/n)^exponent` for a settled distance `d`, with the
/// convention that unresolved dynamics count as `d = n`.
fn trajectory_score(d: usize, n: usize, exponent: f64) -> f64 {
    let retained = 1.0 - d as f64 / n as f64;
    if exponent == 5.0 {
        retained.powi(5)
    } else {
        retained.powf(exponent)
    }
}

/// Developmental score of one perturbed start against one target.
pub fn gamma(genome: &Genome, perturbed: &Pattern, target: &Pattern, max_steps: usize) -> Result<f64> {
    if perturbed.len() != genome.n() || target.len() != genome.n() {
        return Err(Error::DimensionMismatch(format!(
            "genome has {} genes, perturbed {}, target {}",
            genome.n(),
            perturbed.len(),
            target.len()
        )));
    }
    let n = genome.n();
    let d = match genome.find_attractor(perturbed, max_steps)? {
        Attractor::FixedPoint { pattern, .. } => hamming(&pattern, target)?,
        Attractor::Unresolved => n,
    };
    Ok(trajectory_score(d, n, TRAJECTORY_EXPONENT))
}

fn mean_gamma_packed(
    packed: &PackedGenome,
    set: &PerturbationSet,
    max_steps: usize,
    exponent: f64,
) -> f64 {
    let n = packed.n();
    let target_bits = set.target().to_bits();
    let mut by_distance = [0.0f64; MAX_GENES + 1];
    for (d, slot) in by_distance.iter_mut().enumerate().take(n + 1) {
        *slot = trajectory_score(d, n, exponent);
    }
    let mut total = 0.0;
    for sample in set.samples() {
        let d = match packed.settle(sample.to_bits(), max_steps) {
            Some((bits, _)) => (bits ^ target_bits).count_ones() as usize,
            None => n,
        };
        total += by_distance[d];
    }
    total / set.samples().len() as f64
}

fn check_set_dims(genome: &Genome, set: &PerturbationSet) -> Result<()> {
    if set.target().len() != genome.n() {
        return Err(Error::DimensionMismatch(format!(
            "genome has {} genes but perturbation target has {}",
            genome.n(),
            set.target().len()
        )));
    }
    Ok(())
}

/// Fitness of `genome` against a single target's perturbation set.
pub fn fitness_single_target(
    genome: &Genome,
    set: &PerturbationSet,
    max_steps: usize,
) -> Result<f64> {
    check_set_dims(genome, set)?;
    let packed = PackedGenome::from_genome(genome);
    let mean = mean_gamma_packed(&packed, set, max_steps, TRAJECTORY_EXPONENT);
    Ok(1.0 - (-FITNESS_SCALE * mean).exp())
}

/// Mean per-target fitness over the context's active sets.
pub fn fitness_multi_target(genome: &Genome, ctx: &FitnessContext) -> Result<f64> {
    let sets = ctx.active_sets();
    if sets.is_empty() {
        return Err(Error::InvalidValue(
            "fitness requires at least one active target".into(),
        ));
    }
    for set in sets {
        check_set_dims(genome, set)?;
    }
    let packed = PackedGenome::from_genome(genome);
    let mut total = 0.0;
    for set in sets {
        let mean = mean_gamma_packed(&packed, set, ctx.max_steps, ctx.exponent);
        total += 1.0 - (-ctx.scale * mean).exp();
    }
    Ok(total / sets.len() as f64)
}

/// Exact single-target fitness by enumerating all `2^n` flip subsets,
/// weighting each by its probability under independent per-gene flips.
/// Exponential in `n`; refuses genomes above 20 genes.
pub fn exact_fitness_oracle(
    genome: &Genome,
    target: &Pattern,
    rate: f64,
    max_steps: usize,
) -> Result<f64> {
    let n = genome.n();
    if n > 20 {
        return Err(Error::InvalidValue(format!(
            "exact oracle enumerates 2^n states and is limited to n <= 20, got {n}"
        )));
    }
    if target.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "genome has {n} genes but target has {}",
            target.len()
        )));
    }
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidValue(format!(
            "perturbation rate must lie in [0, 1], got {rate}"
        )));
    }
    let packed = PackedGenome::from_genome(genome);
    let target_bits = target.to_bits();
    let mut by_distance = [0.0f64; MAX_GENES + 1];
    for (d, slot) in by_distance.iter_mut().enumerate().take(n + 1) {
        *slot = trajectory_score(d, n, TRAJECTORY_EXPONENT);
    }
    let mut mean = 0.0;
    for flips in 0u32..(1u32 << n) {
        let k = flips.count_ones() as i32;
        let prob = rate.powi(k) * (1.0 - rate).powi(n as i32 - k);
        if prob == 0.0 {
            continue;
        }
        let start = target_bits ^ flips;
        let d = match packed.settle(start, max_steps) {
            Some((bits, _)) => (bits ^ target_bits).count_ones() as usize,
            None => n,
        };
        mean += prob * by_distance[d];
    }
    Ok(1.0 - (-FITNESS_SCALE * mean).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::DEFAULT_MAX_STEPS;
    use crate::seed::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn pat(s: &str) -> Pattern {
        Pattern::from_compact(s).unwrap()
    }

    #[test]
    fn gamma_at_half_distance_matches_hand_value() {
        // Identity wiring holds any start fixed, so the settled distance is
        // just the start's distance. Five of ten genes off target:
        // (1 - 5/10)^5 = 0.03125.
        let g = Genome::identity(10).unwrap();
        let target = pat("+-+-+-+-+-");
        let perturbed = pat("-+-+--+-+-");
        assert_eq!(perturbed.hamming(&target).unwrap(), 5);
        let got = gamma(&g, &perturbed, &target, DEFAULT_MAX_STEPS).unwrap();
        assert!((got - 0.03125).abs() < 1e-12);
    }

    #[test]
    fn gamma_on_target_is_one_and_unresolved_is_zero() {
        let g = Genome::identity(4).unwrap();
        let t = pat("++--");
        assert_eq!(gamma(&g, &t, &t, DEFAULT_MAX_STEPS).unwrap(), 1.0);

        // Mutual activation from anti-aligned states oscillates with
        // period two, so the trajectory never resolves and scores zero.
        let osc = Genome::new(2, vec![0, 1, 1, 0]).unwrap();
        let got = gamma(&osc, &pat("+-"), &pat("+-"), DEFAULT_MAX_STEPS).unwrap();
        assert_eq!(got, 0.0);
    }

    #[test]
    fn perfect_genome_hits_the_ceiling() {
        // Zero flip rate leaves every sample on target; identity wiring
        // keeps it there, so every gamma is 1 and fitness is 1 - e^{-3}.
        let g = Genome::identity(10).unwrap();
        let target = pat("+-+-+-+-+-");
        let mut rng = stream_rng(1, &["test"]);
        let set = sample_perturbations(&target, 75, 0.0, &mut rng).unwrap();
        let f = fitness_single_target(&g, &set, DEFAULT_MAX_STEPS).unwrap();
        assert!((f - fitness_ceiling()).abs() < 1e-12);
        assert!((fitness_ceiling() - 0.950_212_931_632_136).abs() < 1e-12);
    }

    #[test]
    fn exact_oracle_matches_binomial_closed_form_for_identity() {
        // For identity wiring each flip survives to the attractor, so the
        // exact mean gamma is a binomial sum over flip counts.
        let n = 10usize;
        let rate = 0.15f64;
        let g = Genome::identity(n).unwrap();
        let target = pat("+-+-+-+-+-");
        let mut mean = 0.0;
        let mut binom = 1.0f64; // C(n, k), updated incrementally
        for k in 0..=n {
            if k > 0 {
                binom *= (n - k + 1) as f64 / k as f64;
            }
            let prob = binom * rate.powi(k as i32) * (1.0 - rate).powi((n - k) as i32);
            mean += prob * (1.0 - k as f64 / n as f64).powi(5);
        }
        let expect = 1.0 - (-3.0 * mean).exp();
        let got = exact_fitness_oracle(&g, &target, rate, DEFAULT_MAX_STEPS).unwrap();
        assert!((got - expect).abs() < 1e-12, "got {got}, expect {expect}");
    }

    #[test]
    fn sampled_fitness_approaches_the_exact_oracle() {
        // Monte Carlo agreement within a generous standard-error band.
        let g = Genome::identity(8).unwrap();
        let target = pat("++--++--");
        let rate = 0.15;
        let exact = exact_fitness_oracle(&g, &target, rate, DEFAULT_MAX_STEPS).unwrap();
        let mut rng = stream_rng(99, &["mc"]);
        let set = sample_perturbations(&target, 20_000, rate, &mut rng).unwrap();
        let sampled = fitness_single_target(&g, &set, DEFAULT_MAX_STEPS).unwrap();
        // Gamma lies in [0, 1], so the mean's standard error is below
        // 0.5 / sqrt(20000) = 0.0035; the fitness map contracts by at most 3.
        assert!(
            (sampled - exact).abs() < 5.0 * 3.0 * 0.5 / (20_000f64).sqrt(),
            "sampled {sampled} vs exact {exact}"
        );
    }

    #[test]
    fn multi_target_is_the_mean_of_single_targets() {
        let g = Genome::identity(6).unwrap();
        let t1 = pat("++++++");
        let t2 = pat("--++--");
        let mut rng = stream_rng(5, &["sets"]);
        let s1 = sample_perturbations(&t1, 40, 0.15, &mut rng).unwrap();
        let s2 = sample_perturbations(&t2, 40, 0.15, &mut rng).unwrap();
        let f1 = fitness_single_target(&g, &s1, DEFAULT_MAX_STEPS).unwrap();
        let f2 = fitness_single_target(&g, &s2, DEFAULT_MAX_STEPS).unwrap();
        let ctx = FitnessContext::frozen(vec![s1, s2], DEFAULT_MAX_STEPS);
        let both = fitness_multi_target(&g, &ctx).unwrap();
        assert!((both - (f1 + f2) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn flip_rate_one_inverts_every_sample() {
        let target = pat("+-+-");
        let mut rng = stream_rng(3, &["flip"]);
        let set = sample_perturbations(&target, 10, 1.0, &mut rng).unwrap();
        for s in set.samples() {
            assert_eq!(s.hamming(&target).unwrap(), 4);
        }
    }

    #[test]
    fn perturbation_set_text_round_trips() {
        let target = pat("+-+-+");
        let mut rng = stream_rng(11, &["text"]);
        let set = sample_perturbations(&target, 7, 0.15, &mut rng).unwrap();
        let text = set.to_text();
        let back = PerturbationSet::from_text(&text).unwrap();
        assert_eq!(set, back);
    }

    #[test]
    fn context_activation_controls_which_sets_score() {
        let g = Genome::identity(4).unwrap();
        let t1 = pat("++++");
        let t2 = pat("----");
        let mut rng = stream_rng(8, &["act"]);
        let s1 = sample_perturbations(&t1, 30, 0.1, &mut rng).unwrap();
        let s2 = sample_perturbations(&t2, 30, 0.1, &mut rng).unwrap();
        let f1 = fitness_single_target(&g, &s1, DEFAULT_MAX_STEPS).unwrap();

        let mut ctx = FitnessContext::new(FitnessMode::Static, DEFAULT_MAX_STEPS);
        ctx.install_sets(vec![s1, s2], 1);
        let one = fitness_multi_target(&g, &ctx).unwrap();
        assert_eq!(one, f1);

        ctx.set_active(2);
        let two = fitness_multi_target(&g, &ctx).unwrap();
        assert_ne!(one, two);
    }

    #[test]
    fn rejects_bad_inputs() {
        let target = pat("+-");
        let mut rng = stream_rng(0, &["bad"]);
        assert!(sample_perturbations(&target, 0, 0.1, &mut rng).is_err());
        assert!(sample_perturbations(&target, 5, 1.5, &mut rng).is_err());
        let g = Genome::identity(3).unwrap();
        let set = sample_perturbations(&target, 5, 0.1, &mut rng).unwrap();
        assert!(fitness_single_target(&g, &set, DEFAULT_MAX_STEPS).is_err());
        let big = Genome::identity(21).unwrap();
        let t21 = Pattern::new(vec![1; 21]).unwrap();
        assert!(exact_fitness_oracle(&big, &t21, 0.1, DEFAULT_MAX_STEPS).is_err());
    }

    fn arb_genome(n: usize) -> impl Strategy<Value = Genome> {
        prop::collection::vec(-1i8..=1, n * n)
            .prop_map(move |entries| Genome::new(n, entries).unwrap())
    }

    proptest! {
        #[test]
        fn fitness_never_exceeds_the_ceiling(
            genome in (2usize..=8).prop_flat_map(arb_genome),
            seed in 0u64..1000,
        ) {
            let n = genome.n();
            let mut rng = stream_rng(seed, &["prop"]);
            let target_states: Vec<i8> =
                (0..n).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
            let target = Pattern::new(target_states).unwrap();
            let set = sample_perturbations(&target, 25, 0.15, &mut rng).unwrap();
            let f = fitness_single_target(&genome, &set, DEFAULT_MAX_STEPS).unwrap();
            prop_assert!(f >= 0.0);
            prop_assert!(f <= fitness_ceiling() + 1e-15);
        }

        #[test]
        fn gamma_decreases_with_distance(
            d1 in 0usize..=10,
            d2 in 0usize..=10,
        ) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(
                trajectory_score(lo, 10, TRAJECTORY_EXPONENT)
                    >= trajectory_score(hi, 10, TRAJECTORY_EXPONENT)
            );
        }

        #[test]
        fn gamma_agrees_with_packed_scoring(
            genome in (2usize..=6).prop_flat_map(arb_genome),
            seed in 0u64..500,
        ) {
            let n = genome.n();
            let mut rng = stream_rng(seed, &["agree"]);
            let states: Vec<i8> =
                (0..n).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
            let target = Pattern::new(states).unwrap();
            let set = sample_perturbations(&target, 15, 0.3, &mut rng).unwrap();
            let mut mean = 0.0;
            for s in set.samples() {
                mean += gamma(&genome, s, &target, DEFAULT_MAX_STEPS).unwrap();
            }
            mean /= set.samples().len() as f64;
            let expect = 1.0 - (-3.0 * mean).exp();
            let got = fitness_single_target(&genome, &set, DEFAULT_MAX_STEPS).unwrap();
            prop_assert!((got - expect).abs() < 1e-12);
        }
    }
}
