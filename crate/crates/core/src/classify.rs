//! Classification of state pairs into diagonal, differently labelled,
//! bisimilar and undetermined pairs.

use crate::chain::{LabelledMarkovChain, State};
use crate::relation::{PairRelation, Partition, RelationError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairClass {
    /// `s = t`
    Diagonal,
    /// `ℓ(s) ≠ ℓ(t)`; distance 1 whatever the transition function.
    DifferentLabel,
    /// `s ≠ t`, `s ∼ t`
    Bisimilar,
    /// Same label but not bisimilar.
    Unknown,
}

#[derive(Debug, Clone)]
pub struct PairClassification {
    labels: Vec<usize>,
    bisimilarity: Partition,
    bisimilar_offdiag: Vec<(State, State)>,
    unknown: Vec<(State, State)>,
}

impl PairClassification {
    pub fn class(&self, s: State, t: State) -> PairClass {
        if s == t {
            PairClass::Diagonal
        } else if self.labels[s] != self.labels[t] {
            PairClass::DifferentLabel
        } else if self.bisimilarity.same_block(s, t) {
            PairClass::Bisimilar
        } else {
            PairClass::Unknown
        }
    }

    pub fn is_diagonal(&self, s: State, t: State) -> bool {
        s == t
    }

    pub fn is_different_label(&self, s: State, t: State) -> bool {
        self.labels[s] != self.labels[t]
    }

    /// Ordered off-diagonal bisimilar pairs.
    pub fn bisimilar_offdiag(&self) -> &[(State, State)] {
        &self.bisimilar_offdiag
    }

    /// Ordered pairs with equal labels that are not bisimilar.
    pub fn unknown(&self) -> &[(State, State)] {
        &self.unknown
    }

    pub fn bisimilarity(&self) -> &Partition {
        &self.bisimilarity
    }

    pub fn num_states(&self) -> usize {
        self.labels.len()
    }
}

/// Classifies all pairs given the chain's bisimilarity relation.
pub fn classify_pairs(chain: &LabelledMarkovChain, bisim: &PairRelation) -> Result<PairClassification, RelationError> {
    if bisim.num_states() != chain.num_states() {
        return Err(RelationError::SizeMismatch { expected: chain.num_states(), found: bisim.num_states() });
    }
    let partition = Partition::from_relation(bisim)?;
    Ok(classify_with_partition(chain, partition))
}

pub fn classify_with_partition(chain: &LabelledMarkovChain, bisimilarity: Partition) -> PairClassification {
    let labels: Vec<usize> = chain.states().map(|s| chain.label(s)).collect();
    let mut bisimilar_offdiag = Vec::new();
    let mut unknown = Vec::new();
    for s in chain.states() {
        for t in chain.states() {
            if s == t || labels[s] != labels[t] {
                continue;
            }
            if bisimilarity.same_block(s, t) {
                bisimilar_offdiag.push((s, t));
            } else {
                unknown.push((s, t));
            }
        }
    }
    PairClassification { labels, bisimilarity, bisimilar_offdiag, unknown }
}
