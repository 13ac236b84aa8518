//! Gene regulatory networks as signed adjacency matrices, and their Boolean
//! dynamics iterated to fixed-point attractors.
//!
//! A network over `n` genes is an `n x n` matrix with entries in `{-1, 0, +1}`;
//! entry `(j, i)` is the effect of gene `j` on gene `i` (activation, none,
//! repression). A gene activity pattern assigns `+1` (active) or `-1`
//! (inactive) to every gene. One synchronous update maps a pattern `s` to
//! `s'` with `s'_i = sign(sum_j a_ji * s_j)`, where `sign(x)` is `+1` for
//! `x > 0` and `-1` otherwise (an input of zero deactivates the gene).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Hard cap on gene count; keeps matrices dense and lets the packed
/// evaluator fit a whole activity pattern in one `u32`.
pub const MAX_GENES: usize = 32;

/// Default step budget when searching for a fixed point.
pub const DEFAULT_MAX_STEPS: usize = 20;

/// Signed adjacency matrix of a gene regulatory network.
///
/// Stored dense and row-major: `entry(j, i)` is the effect of gene `j` on
/// gene `i`. Immutable in spirit; the mutating setters exist for operators
/// that build new genomes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Genome {
    n: usize,
    entries: Vec<i8>,
}

impl Genome {
    /// Builds a genome from row-major entries. Rejects entries outside
    /// `{-1, 0, +1}` and gene counts outside `2..=MAX_GENES`.
    pub fn new(n: usize, entries: Vec<i8>) -> Result<Self> {
        if n < 2 || n > MAX_GENES {
            return Err(Error::InvalidValue(format!(
                "gene count must be in 2..={MAX_GENES}, got {n}"
            )));
        }
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for n={n}, got {}",
                n * n,
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|&&v| !(-1..=1).contains(&v)) {
            return Err(Error::InvalidValue(format!(
                "adjacency entries must be -1, 0 or +1, got {bad}"
            )));
        }
        Ok(Self { n, entries })
    }

    /// The all-zeros network (no interactions).
    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(n, vec![0; n * n])
    }

    /// The self-activation network (`a_ii = +1`, all else 0).
    pub fn identity(n: usize) -> Result<Self> {
        let mut entries = vec![0i8; n * n];
        for i in 0..n {
            entries[i * n + i] = 1;
        }
        Self::new(n, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Effect of gene `j` on gene `i`.
    #[inline]
    pub fn entry(&self, j: usize, i: usize) -> i8 {
        self.entries[j * self.n + i]
    }

    /// Sets the effect of gene `j` on gene `i`. Panics on values outside
    /// `{-1, 0, +1}` or out-of-range indices.
    pub fn set_entry(&mut self, j: usize, i: usize, value: i8) {
        assert!((-1..=1).contains(&value), "entry must be -1, 0 or +1");
        assert!(j < self.n && i < self.n, "index out of range");
        self.entries[j * self.n + i] = value;
    }

    pub fn entries(&self) -> &[i8] {
        &self.entries
    }

    /// Row `j`: the effects gene `j` exerts on every gene.
    #[inline]
    pub fn row(&self, j: usize) -> &[i8] {
        &self.entries[j * self.n..(j + 1) * self.n]
    }

    /// Number of nonzero interactions (edges in the directed sense).
    pub fn edge_count(&self) -> usize {
        self.entries.iter().filter(|&&v| v != 0).count()
    }

    /// Number of regulators of gene `u`: nonzero entries in column `u`.
    pub fn regulator_count(&self, u: usize) -> usize {
        (0..self.n).filter(|&j| self.entry(j, u) != 0).count()
    }

    /// One synchronous update of the activity pattern.
    pub fn step(&self, s: &Pattern) -> Result<Pattern> {
        self.check_len(s)?;
        let mut out = vec![0i8; self.n];
        self.step_into(s.states(), &mut out);
        Ok(Pattern { states: out })
    }

    /// Core update on raw state slices; `src` and `dst` must have length `n`.
    fn step_into(&self, src: &[i8], dst: &mut [i8]) {
        let n = self.n;
        let mut acc = [0i32; MAX_GENES];
        for (j, &sj) in src.iter().enumerate() {
            let row = self.row(j);
            if sj > 0 {
                for i in 0..n {
                    acc[i] += row[i] as i32;
                }
            } else {
                for i in 0..n {
                    acc[i] -= row[i] as i32;
                }
            }
        }
        for i in 0..n {
            dst[i] = if acc[i] > 0 { 1 } else { -1 };
        }
    }

    /// Iterates the update map from `s0`, checking for a fixed point after
    /// each application. Budget is the number of applications allowed;
    /// anything that has not settled by then (including cyclic attractors)
    /// is [`Attractor::Unresolved`].
    pub fn find_attractor(&self, s0: &Pattern, max_steps: usize) -> Result<Attractor> {
        self.check_len(s0)?;
        if max_steps == 0 {
            return Err(Error::InvalidValue("max_steps must be >= 1".into()));
        }
        let n = self.n;
        let mut cur = [0i8; MAX_GENES];
        let mut next = [0i8; MAX_GENES];
        cur[..n].copy_from_slice(s0.states());
        for applied in 1..=max_steps {
            self.step_into(&cur[..n], &mut next[..n]);
            if cur[..n] == next[..n] {
                return Ok(Attractor::FixedPoint {
                    pattern: Pattern {
                        states: cur[..n].to_vec(),
                    },
                    steps: applied - 1,
                });
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(Attractor::Unresolved)
    }

    fn check_len(&self, s: &Pattern) -> Result<()> {
        if s.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "pattern length {} does not match gene count {}",
                s.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// Serializes to the text interchange format: a `n=<N>` header line,
    /// then N rows of N space-separated entries (row `j` lists the effects
    /// of gene `j`).
    pub fn to_text(&self) -> String {
        let mut out = format!("n={}\n", self.n);
        for j in 0..self.n {
            let row: Vec<String> = self.row(j).iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    /// Parses the text interchange format produced by [`Genome::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty genome file".into()))?;
        let n: usize = header
            .trim()
            .strip_prefix("n=")
            .ok_or_else(|| Error::Parse(format!("expected 'n=<N>' header, got '{header}'")))?
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad gene count in header '{header}'")))?;
        let mut entries = Vec::with_capacity(n * n);
        for (j, line) in lines.enumerate() {
            if j >= n {
                return Err(Error::Parse(format!("more than {n} matrix rows")));
            }
            for tok in line.split_whitespace() {
                let v: i8 = tok
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad matrix entry '{tok}'")))?;
                entries.push(v);
            }
            if entries.len() != (j + 1) * n {
                return Err(Error::Parse(format!(
                    "row {} has {} entries, expected {n}",
                    j + 1,
                    entries.len() as i64 - (j as i64) * n as i64
                )));
            }
        }
        Self::new(n, entries)
    }

    /// One-line encoding used inside CSV cells: row-major `+`/`0`/`-`.
    pub fn to_compact(&self) -> String {
        self.entries
            .iter()
            .map(|&v| match v {
                1 => '+',
                0 => '0',
                _ => '-',
            })
            .collect()
    }

    /// Parses the encoding produced by [`Genome::to_compact`].
    pub fn from_compact(s: &str) -> Result<Self> {
        let entries: Result<Vec<i8>> = s
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '0' => Ok(0),
                '-' => Ok(-1),
                other => Err(Error::Parse(format!("bad compact genome char '{other}'"))),
            })
            .collect();
        let entries = entries?;
        let n = (entries.len() as f64).sqrt().round() as usize;
        if n * n != entries.len() {
            return Err(Error::Parse(format!(
                "compact genome length {} is not a perfect square",
                entries.len()
            )));
        }
        Self::new(n, entries)
    }
}

/// Gene activity pattern: one `+1` / `-1` state per gene.
///
/// Serializes as its compact string form (`"+-+-"`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pattern {
    states: Vec<i8>,
}

impl Serialize for Pattern {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_compact())
    }
}

impl<'de> Deserialize<'de> for Pattern {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Pattern::from_compact(&s).map_err(serde::de::Error::custom)
    }
}

impl Pattern {
    pub fn new(states: Vec<i8>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidValue("pattern must be nonempty".into()));
        }
        if states.len() > MAX_GENES {
            return Err(Error::InvalidValue(format!(
                "pattern length {} exceeds {MAX_GENES}",
                states.len()
            )));
        }
        if let Some(bad) = states.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::InvalidValue(format!(
                "pattern states must be +1 or -1, got {bad}"
            )));
        }
        Ok(Self { states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[i8] {
        &self.states
    }

    /// Number of positions where `self` and `other` differ.
    pub fn hamming(&self, other: &Pattern) -> Result<usize> {
        hamming(self, other)
    }

    #[inline]
    pub fn get(&self, i: usize) -> i8 {
        self.states[i]
    }

    /// Elementwise negation (every gene flipped).
    pub fn negated(&self) -> Pattern {
        Pattern {
            states: self.states.iter().map(|&v| -v).collect(),
        }
    }

    /// Copy with the given gene flipped.
    pub fn with_flipped(&self, i: usize) -> Pattern {
        let mut states = self.states.clone();
        states[i] = -states[i];
        Pattern { states }
    }

    /// Encodes as a `+`/`-` string, e.g. `+-+-+-+-+-`.
    pub fn to_compact(&self) -> String {
        self.states
            .iter()
            .map(|&v| if v > 0 { '+' } else { '-' })
            .collect()
    }

    /// Parses a `+`/`-` string (also accepts `1`/`0` digits for +1/-1).
    pub fn from_compact(s: &str) -> Result<Self> {
        let states: Result<Vec<i8>> = s
            .chars()
            .map(|c| match c {
                '+' | '1' => Ok(1),
                '-' | '0' => Ok(-1),
                other => Err(Error::Parse(format!("bad pattern char '{other}'"))),
            })
            .collect();
        Self::new(states?)
    }

    /// Packs into bits: bit `i` set iff gene `i` is active.
    pub fn to_bits(&self) -> u32 {
        let mut bits = 0u32;
        for (i, &v) in self.states.iter().enumerate() {
            if v > 0 {
                bits |= 1 << i;
            }
        }
        bits
    }

    /// Unpacks from bits produced by [`Pattern::to_bits`].
    pub fn from_bits(bits: u32, n: usize) -> Pattern {
        Pattern {
            states: (0..n)
                .map(|i| if bits & (1 << i) != 0 { 1 } else { -1 })
                .collect(),
        }
    }
}

/// Outcome of iterating the update map within a step budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Attractor {
    /// A single-state attractor, with the number of steps taken to reach it.
    FixedPoint { pattern: Pattern, steps: usize },
    /// No fixed point within the budget; cycles land here too.
    Unresolved,
}

impl Attractor {
    pub fn is_fixed_point(&self) -> bool {
        matches!(self, Attractor::FixedPoint { .. })
    }
}

/// Positions where two equal-length patterns differ.
pub fn hamming(a: &Pattern, b: &Pattern) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "pattern lengths {} and {} differ",
            a.len(),
            b.len()
        )));
    }
    Ok(a.states()
        .iter()
        .zip(b.states())
        .filter(|(x, y)| x != y)
        .count())
}

/// Bit-packed view of a genome's dynamics.
///
/// Per gene `i` the packed form keeps masks of its positive and negative
/// regulators, so one update step is a handful of popcounts per gene:
/// `sum_j a_ji s_j = 2*(pc(pos & b) - pc(neg & b)) - (pc(pos) - pc(neg))`
/// for the active-gene bitset `b`. Exactly equivalent to [`Genome::step`]
/// (property-tested); used on the fitness hot path where one genome is
/// evaluated against many perturbations.
#[derive(Debug, Clone)]
pub struct PackedGenome {
    n: usize,
    pos: [u32; MAX_GENES],
    neg: [u32; MAX_GENES],
    bias: [i32; MAX_GENES],
}

impl PackedGenome {
    pub fn from_genome(g: &Genome) -> Self {
        let n = g.n();
        let mut pos = [0u32; MAX_GENES];
        let mut neg = [0u32; MAX_GENES];
        let mut bias = [0i32; MAX_GENES];
        for i in 0..n {
            for j in 0..n {
                match g.entry(j, i) {
                    1 => pos[i] |= 1 << j,
                    -1 => neg[i] |= 1 << j,
                    _ => {}
                }
            }
            bias[i] = pos[i].count_ones() as i32 - neg[i].count_ones() as i32;
        }
        Self { n, pos, neg, bias }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// One synchronous update on a packed activity pattern.
    #[inline]
    pub fn step_bits(&self, b: u32) -> u32 {
        let mut out = 0u32;
        for i in 0..self.n {
            let input =
                2 * ((self.pos[i] & b).count_ones() as i32 - (self.neg[i] & b).count_ones() as i32)
                    - self.bias[i];
            if input > 0 {
                out |= 1 << i;
            }
        }
        out
    }

    /// Packed analogue of [`Genome::find_attractor`]: `Some((fixed, steps))`
    /// on settling, `None` when the budget is exhausted.
    #[inline]
    pub fn settle(&self, start: u32, max_steps: usize) -> Option<(u32, usize)> {
        let mut cur = start;
        for applied in 1..=max_steps {
            let next = self.step_bits(cur);
            if next == cur {
                return Some((cur, applied - 1));
            }
            cur = next;
        }
        None
    }
}
