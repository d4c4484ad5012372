//! Probabilistic bisimilarity by signature-based partition refinement.

use num_rational::BigRational;
use num_traits::Zero;

use crate::chain::{ChainOptions, Distribution, LabelledMarkovChain, ModelError, State};
use crate::relation::{PairRelation, Partition};

/// States share a block iff they share a label.
pub fn label_partition(chain: &LabelledMarkovChain) -> Partition {
    Partition::from_keys(chain.states().map(|s| chain.label(s)))
}

/// `τ(s)(B)` for every block `B` hit by `τ(s)`, sorted by block id.
pub fn block_masses(chain: &LabelledMarkovChain, partition: &Partition, s: State) -> Vec<(usize, BigRational)> {
    let mut masses: Vec<(usize, BigRational)> = chain
        .transition(s)
        .iter()
        .map(|(t, p)| (partition.block_of(t), p.value().clone()))
        .collect();
    masses.sort_by_key(|(b, _)| *b);
    let mut merged: Vec<(usize, BigRational)> = Vec::with_capacity(masses.len());
    for (b, p) in masses {
        match merged.last_mut() {
            Some((last, sum)) if *last == b => *sum += p,
            _ => merged.push((b, p)),
        }
    }
    merged
}

/// The largest bisimulation contained in `initial` (and in the label
/// partition), as a partition.
///
/// Each round splits every block by the signature `B ↦ τ(s)(B)` computed
/// against the previous round's partition; refinement stops once a round
/// creates no new block. Signatures are compared as exact rationals.
pub fn bisim(chain: &LabelledMarkovChain, initial: &Partition) -> Partition {
    assert_eq!(chain.num_states(), initial.num_states(), "partition size does not match chain");
    let mut current = Partition::from_keys(
        chain.states().map(|s| (initial.block_of(s), chain.label(s))),
    );
    loop {
        let next = Partition::from_keys(
            chain
                .states()
                .map(|s| (current.block_of(s), block_masses(chain, &current, s))),
        );
        if next.num_blocks() == current.num_blocks() {
            return next;
        }
        current = next;
    }
}

/// Probabilistic bisimilarity `∼` of the chain.
pub fn bisimilarity(chain: &LabelledMarkovChain) -> Partition {
    bisim(chain, &label_partition(chain))
}

/// True iff the blocks are label-uniform and all members of a block agree
/// on `τ(·)(B)` for every block `B`.
pub fn is_bisimulation(chain: &LabelledMarkovChain, partition: &Partition) -> bool {
    partition.blocks().iter().all(|block| {
        let first = block[0];
        let reference = block_masses(chain, partition, first);
        block
            .iter()
            .all(|&s| chain.same_label(s, first) && block_masses(chain, partition, s) == reference)
    })
}

/// Relation form of [`bisim`].
pub fn bisim_relation(chain: &LabelledMarkovChain, initial: &PairRelation) -> Result<PairRelation, crate::relation::RelationError> {
    let partition = Partition::from_relation(initial)?;
    Ok(bisim(chain, &partition).to_relation())
}

/// The quotient chain: one state per block, labelled like its members, with
/// `τ'(B)(C) = τ(rep(B))(C)` where `rep(B)` is the smallest member.
pub fn quotient(chain: &LabelledMarkovChain, partition: &Partition) -> Result<LabelledMarkovChain, ModelError> {
    let mut labels = Vec::with_capacity(partition.num_blocks());
    let mut rows = Vec::with_capacity(partition.num_blocks());
    for block in partition.blocks() {
        let rep = block[0];
        labels.push(chain.label_name(rep).to_string());
        let row = block_masses(chain, partition, rep).into_iter().filter(|(_, p)| !p.is_zero());
        rows.push(Distribution::new(row)?);
    }
    LabelledMarkovChain::new(labels, rows, ChainOptions { allow_single_label: true })
}
