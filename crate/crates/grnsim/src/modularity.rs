//! Network modularity on a fixed gene partition.
//!
//! The regulatory matrix collapses to an undirected graph and the partition's
//! quality is the standard assortativity score: observed within-module edge
//! fraction minus the fraction expected if edges were rewired preserving
//! degrees. Self-regulation counts as a self-loop (one edge, two degree
//! endpoints on its gene).

use crate::error::{Error, Result};
use crate::genome::Genome;
use crate::evolution::TargetSchedule;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Assignment of each gene to a module. Module ids are contiguous from 0.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    module_of: Vec<usize>,
}

impl Partition {
    pub fn new(module_of: Vec<usize>) -> Result<Self> {
        if module_of.is_empty() {
            return Err(Error::InvalidValue("partition cannot be empty".into()));
        }
        let k = module_of.iter().max().copied().unwrap_or(0) + 1;
        let mut seen = vec![false; k];
        for &m in &module_of {
            seen[m] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidValue(format!(
                "module ids must be contiguous from 0; id {missing} is unused"
            )));
        }
        Ok(Self { module_of })
    }

    /// One module holding all `n` genes.
    pub fn single(n: usize) -> Self {
        Self { module_of: vec![0; n] }
    }

    pub fn n_genes(&self) -> usize {
        self.module_of.len()
    }

    /// Number of modules.
    pub fn k(&self) -> usize {
        self.module_of.iter().max().copied().unwrap_or(0) + 1
    }

    pub fn module_of(&self, gene: usize) -> usize {
        self.module_of[gene]
    }

    pub fn assignments(&self) -> &[usize] {
        &self.module_of
    }

    pub fn same_module(&self, u: usize, v: usize) -> bool {
        self.module_of[u] == self.module_of[v]
    }

    /// Genes belonging to module `m`, in index order.
    pub fn members(&self, m: usize) -> Vec<usize> {
        self.module_of
            .iter()
            .enumerate()
            .filter(|(_, &id)| id == m)
            .map(|(g, _)| g)
            .collect()
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let ids = s
            .split(',')
            .map(|part| {
                part.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("bad module id {:?}: {e}", part.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        Partition::new(ids)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for id in &self.module_of {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{id}")?;
            first = false;
        }
        Ok(())
    }
}

/// Groups genes by their profile of changes across consecutive targets:
/// two genes share a module exactly when they flip between the same pairs
/// of successive targets. Modules are numbered by first appearance.
pub fn derive_partition(schedule: &TargetSchedule) -> Partition {
    let n = schedule.n_genes();
    let targets: Vec<_> = schedule.targets().collect();
    let mut profiles: Vec<Vec<bool>> = vec![Vec::new(); n];
    for pair in targets.windows(2) {
        for gene in 0..n {
            let changed = pair[0].states()[gene] != pair[1].states()[gene];
            profiles[gene].push(changed);
        }
    }
    let mut seen: Vec<&Vec<bool>> = Vec::new();
    let mut module_of = Vec::with_capacity(n);
    for profile in &profiles {
        let id = match seen.iter().position(|p| *p == profile) {
            Some(i) => i,
            None => {
                seen.push(profile);
                seen.len() - 1
            }
        };
        module_of.push(id);
    }
    Partition { module_of }
}

/// How to collapse the signed directed matrix into an undirected graph:
/// `Union` merges reciprocal links into one edge, `Multi` keeps both.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeCollapse {
    Union,
    Multi,
}

impl FromStr for EdgeCollapse {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "union" => Ok(EdgeCollapse::Union),
            "multi" => Ok(EdgeCollapse::Multi),
            other => Err(Error::InvalidValue(format!(
                "edge collapse must be union or multi, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for EdgeCollapse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeCollapse::Union => write!(f, "union"),
            EdgeCollapse::Multi => write!(f, "multi"),
        }
    }
}

/// Modularity of `genome` under `partition`, collapsing reciprocal links
/// into single undirected edges. `None` when the genome has no edges.
pub fn q_score(genome: &Genome, partition: &Partition) -> Result<Option<f64>> {
    q_score_with(genome, partition, EdgeCollapse::Union)
}

/// Modularity with an explicit collapse rule.
pub fn q_score_with(
    genome: &Genome,
    partition: &Partition,
    collapse: EdgeCollapse,
) -> Result<Option<f64>> {
    let n = genome.n();
    if partition.n_genes() != n {
        return Err(Error::DimensionMismatch(format!(
            "genome has {n} genes but partition covers {}",
            partition.n_genes()
        )));
    }
    let k = partition.k();
    let mut within = vec![0.0f64; k];
    let mut degree = vec![0.0f64; k];
    let mut edges = 0.0f64;

    let add_edge = |u: usize, v: usize, within: &mut [f64], degree: &mut [f64]| {
        let (mu, mv) = (partition.module_of(u), partition.module_of(v));
        degree[mu] += 1.0;
        degree[mv] += 1.0;
        if mu == mv {
            within[mu] += 1.0;
        }
    };

    for u in 0..n {
        if genome.entry(u, u) != 0 {
            edges += 1.0;
            add_edge(u, u, &mut within, &mut degree);
        }
        for v in (u + 1)..n {
            let forward = genome.entry(u, v) != 0;
            let backward = genome.entry(v, u) != 0;
            match collapse {
                EdgeCollapse::Union => {
                    if forward || backward {
                        edges += 1.0;
                        add_edge(u, v, &mut within, &mut degree);
                    }
                }
                EdgeCollapse::Multi => {
                    for present in [forward, backward] {
                        if present {
                            edges += 1.0;
                            add_edge(u, v, &mut within, &mut degree);
                        }
                    }
                }
            }
        }
    }

    if edges == 0.0 {
        return Ok(None);
    }
    let mut q = 0.0;
    for m in 0..k {
        let degree_share = degree[m] / (2.0 * edges);
        q += within[m] / edges - degree_share * degree_share;
    }
    Ok(Some(q))
}
