//! Robust probabilistic bisimilarity `≃`.
//!
//! Starting from `R = ∼`, the loop applies
//! `Refine(R) = Bisim(Prune(Filter(R)))` until nothing changes:
//!
//! * `Filter(R)` keeps the pairs of `R` from which the product graph with
//!   edges `Post((s, t)) ∩ R` reaches the diagonal,
//! * `Prune(Q)` keeps `(s, t)` iff `s` and `t` have the same neighbourhood
//!   in `Q`, which restores an equivalence relation,
//! * `Bisim` is the largest bisimulation inside the pruned partition.
//!
//! ```
//! use robust_bisim::harness::{build_example, ExampleFamily, FamilyKind};
//! use robust_bisim::robust::robust_bisimilarity;
//!
//! let fam = ExampleFamily::from_ratio(FamilyKind::RiggedCoin, 0, 1).unwrap();
//! let chain = build_example(&fam);
//! let robust = robust_bisimilarity(&chain);
//! let (h2, h3) = (0, 2);
//! assert!(!robust.same_block(h2, h3));
//! ```

use std::collections::HashMap;

use thiserror::Error;

use crate::bisim::{bisim, bisimilarity};
use crate::chain::{LabelledMarkovChain, State};
use crate::relation::{PairRelation, Partition, RelationError, StorageKind, DENSE_LIMIT};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RobustError {
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error("pair ({0}, {1}) is not probabilistically bisimilar")]
    NotBisimilar(State, State),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterStats {
    /// Rounds of the level-by-level search, counting the final round that
    /// adds nothing.
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RobustStats {
    /// Applications of `Refine`, counting the one that confirms the fixed
    /// point.
    pub refinements: usize,
    pub filter_iterations: usize,
}

fn storage_for(n: usize) -> StorageKind {
    if n <= DENSE_LIMIT {
        StorageKind::Dense
    } else {
        StorageKind::Sparse
    }
}

/// Pairs of `R` with an `R`-supported path to the diagonal.
///
/// `r` must be symmetric, reflexive and contained in `∼`.
pub fn filter(chain: &LabelledMarkovChain, r: &PairRelation) -> Result<PairRelation, RobustError> {
    check_input(chain, r)?;
    Ok(filter_by(chain, |s, t| r.contains(s, t)).0)
}

pub fn filter_with_stats(chain: &LabelledMarkovChain, r: &PairRelation) -> Result<(PairRelation, FilterStats), RobustError> {
    check_input(chain, r)?;
    Ok(filter_by(chain, |s, t| r.contains(s, t)))
}

fn check_input(chain: &LabelledMarkovChain, r: &PairRelation) -> Result<(), RobustError> {
    let n = chain.num_states();
    if r.num_states() != n {
        return Err(RelationError::SizeMismatch { expected: n, found: r.num_states() }.into());
    }
    r.check_reflexive()?;
    r.check_symmetric()?;
    let sim = bisimilarity(chain);
    match r.iter().find(|&(s, t)| !sim.same_block(s, t)) {
        Some((s, t)) => Err(RobustError::NotBisimilar(s, t)),
        None => Ok(()),
    }
}

/// Backward search from the diagonal. `member` must be symmetric.
///
/// A pair `(s, t)` of `R` joins as soon as some pair of `Post((s, t))` is
/// already in the result; predecessors of a new pair `(u, v)` are exactly
/// `pre(u) × pre(v)`.
fn filter_by(chain: &LabelledMarkovChain, member: impl Fn(State, State) -> bool) -> (PairRelation, FilterStats) {
    let n = chain.num_states();
    let mut q = PairRelation::with_storage(n, storage_for(n));
    let mut frontier: Vec<(State, State)> = Vec::with_capacity(n);
    for s in 0..n {
        q.insert(s, s);
        frontier.push((s, s));
    }
    let mut iterations = 0;
    while !frontier.is_empty() {
        iterations += 1;
        let mut next = Vec::new();
        for (u, v) in frontier {
            for &s in chain.predecessors(u) {
                for &t in chain.predecessors(v) {
                    if !q.contains(s, t) && member(s, t) {
                        q.insert(s, t);
                        q.insert(t, s);
                        next.push((s.min(t), s.max(t)));
                    }
                }
            }
        }
        frontier = next;
    }
    (q, FilterStats { iterations })
}

/// The states grouped by their neighbourhood `Q[s]`; as a relation this is
/// `Prune(Q)`.
///
/// `q` must be symmetric and reflexive.
pub fn prune(q: &PairRelation) -> Result<Partition, RelationError> {
    q.check_reflexive()?;
    q.check_symmetric()?;
    Ok(prune_unchecked(q))
}

fn prune_unchecked(q: &PairRelation) -> Partition {
    let mut ids: HashMap<Vec<State>, usize> = HashMap::new();
    let keys: Vec<usize> = (0..q.num_states())
        .map(|s| {
            let next = ids.len();
            *ids.entry(q.related(s)).or_insert(next)
        })
        .collect();
    Partition::from_keys(keys)
}

/// Relation form of [`prune`].
pub fn prune_relation(q: &PairRelation) -> Result<PairRelation, RelationError> {
    prune(q).map(|p| p.to_relation())
}

/// `Bisim(Prune(Filter(R)))`.
pub fn refine(chain: &LabelledMarkovChain, r: &PairRelation) -> Result<PairRelation, RobustError> {
    check_input(chain, r)?;
    let filtered = filter_by(chain, |s, t| r.contains(s, t)).0;
    Ok(bisim(chain, &prune_unchecked(&filtered)).to_relation())
}

/// Robust bisimilarity as a partition.
pub fn robust_bisimilarity(chain: &LabelledMarkovChain) -> Partition {
    robust_bisimilarity_with_stats(chain).0
}

pub fn robust_bisimilarity_with_stats(chain: &LabelledMarkovChain) -> (Partition, RobustStats) {
    let mut current = bisimilarity(chain);
    let mut stats = RobustStats::default();
    loop {
        let (filtered, fs) = filter_by(chain, |s, t| current.same_block(s, t));
        stats.refinements += 1;
        stats.filter_iterations += fs.iterations;
        let next = bisim(chain, &prune_unchecked(&filtered));
        // Refine only removes pairs, so an equal block count means no change
        if next.num_blocks() == current.num_blocks() {
            return (next, stats);
        }
        current = next;
    }
}

/// Pairs `(s, t)` with `s < t` that are bisimilar but not robustly so.
pub fn non_robust_pairs(bisimilarity: &Partition, robust: &Partition) -> Vec<(State, State)> {
    let mut pairs = Vec::new();
    for block in bisimilarity.blocks() {
        for (i, &s) in block.iter().enumerate() {
            for &t in &block[i + 1..] {
                if !robust.same_block(s, t) {
                    pairs.push((s, t));
                }
            }
        }
    }
    pairs
}
