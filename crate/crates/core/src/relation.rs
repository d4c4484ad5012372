//! Binary relations on states and partitions of the state space.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;

use thiserror::Error;

use crate::chain::State;

/// Largest state count for which relations are stored as a dense bit matrix.
pub const DENSE_LIMIT: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelationError {
    #[error("relation is not reflexive: ({0}, {0}) is missing")]
    NotReflexive(State),
    #[error("relation is not symmetric: ({0}, {1}) present but ({1}, {0}) missing")]
    NotSymmetric(State, State),
    #[error("relation is not transitive: ({0}, {1}) and ({1}, {2}) present but ({0}, {2}) missing")]
    NotTransitive(State, State, State),
    #[error("relation over {found} states used with a model of {expected} states")]
    SizeMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageKind {
    Dense,
    Sparse,
}

#[derive(Debug, Clone)]
enum Storage {
    /// Row-major `n × n` bits.
    Dense { words_per_row: usize, bits: Vec<u64> },
    /// Sorted successor list per state.
    Sparse(Vec<Vec<u32>>),
}

/// A set of ordered state pairs over `S × S`.
#[derive(Debug, Clone)]
pub struct PairRelation {
    n: usize,
    storage: Storage,
}

impl PairRelation {
    pub fn empty(n: usize) -> Self {
        let kind = if n <= DENSE_LIMIT { StorageKind::Dense } else { StorageKind::Sparse };
        Self::with_storage(n, kind)
    }

    pub fn with_storage(n: usize, kind: StorageKind) -> Self {
        let storage = match kind {
            StorageKind::Dense => {
                let words_per_row = n.div_ceil(64);
                Storage::Dense { words_per_row, bits: vec![0; words_per_row * n] }
            }
            StorageKind::Sparse => Storage::Sparse(vec![Vec::new(); n]),
        };
        PairRelation { n, storage }
    }

    /// The diagonal `S²_Δ`.
    pub fn identity(n: usize) -> Self {
        let mut r = Self::empty(n);
        for s in 0..n {
            r.insert(s, s);
        }
        r
    }

    pub fn full(n: usize) -> Self {
        let mut r = Self::empty(n);
        for s in 0..n {
            for t in 0..n {
                r.insert(s, t);
            }
        }
        r
    }

    pub fn from_pairs<I: IntoIterator<Item = (State, State)>>(n: usize, pairs: I) -> Self {
        let mut r = Self::empty(n);
        for (s, t) in pairs {
            r.insert(s, t);
        }
        r
    }

    /// Same contents, different backing store.
    pub fn to_storage(&self, kind: StorageKind) -> Self {
        let mut r = Self::with_storage(self.n, kind);
        for (s, t) in self.iter() {
            r.insert(s, t);
        }
        r
    }

    pub fn storage_kind(&self) -> StorageKind {
        match self.storage {
            Storage::Dense { .. } => StorageKind::Dense,
            Storage::Sparse(_) => StorageKind::Sparse,
        }
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn contains(&self, s: State, t: State) -> bool {
        match &self.storage {
            Storage::Dense { words_per_row, bits } => {
                bits[s * words_per_row + t / 64] >> (t % 64) & 1 == 1
            }
            Storage::Sparse(rows) => rows[s].binary_search(&(t as u32)).is_ok(),
        }
    }

    /// Returns true if the pair was not present before.
    pub fn insert(&mut self, s: State, t: State) -> bool {
        assert!(s < self.n && t < self.n, "pair ({s}, {t}) out of range");
        match &mut self.storage {
            Storage::Dense { words_per_row, bits } => {
                let word = &mut bits[s * *words_per_row + t / 64];
                let mask = 1u64 << (t % 64);
                let fresh = *word & mask == 0;
                *word |= mask;
                fresh
            }
            Storage::Sparse(rows) => match rows[s].binary_search(&(t as u32)) {
                Ok(_) => false,
                Err(i) => {
                    rows[s].insert(i, t as u32);
                    true
                }
            },
        }
    }

    /// Returns true if the pair was present.
    pub fn remove(&mut self, s: State, t: State) -> bool {
        match &mut self.storage {
            Storage::Dense { words_per_row, bits } => {
                let word = &mut bits[s * *words_per_row + t / 64];
                let mask = 1u64 << (t % 64);
                let present = *word & mask != 0;
                *word &= !mask;
                present
            }
            Storage::Sparse(rows) => match rows[s].binary_search(&(t as u32)) {
                Ok(i) => {
                    rows[s].remove(i);
                    true
                }
                Err(_) => false,
            },
        }
    }

    /// `{ t | (s, t) ∈ R }` in ascending order.
    pub fn related(&self, s: State) -> Vec<State> {
        match &self.storage {
            Storage::Dense { words_per_row, bits } => {
                let row = &bits[s * words_per_row..(s + 1) * words_per_row];
                let mut out = Vec::new();
                for (w, &word) in row.iter().enumerate() {
                    let mut word = word;
                    while word != 0 {
                        let bit = word.trailing_zeros() as usize;
                        out.push(w * 64 + bit);
                        word &= word - 1;
                    }
                }
                out
            }
            Storage::Sparse(rows) => rows[s].iter().map(|&t| t as usize).collect(),
        }
    }

    /// All pairs in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (State, State)> + '_ {
        (0..self.n).flat_map(move |s| self.related(s).into_iter().map(move |t| (s, t)))
    }

    pub fn len(&self) -> usize {
        match &self.storage {
            Storage::Dense { bits, .. } => bits.iter().map(|w| w.count_ones() as usize).sum(),
            Storage::Sparse(rows) => rows.iter().map(Vec::len).sum(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_subset(&self, other: &PairRelation) -> bool {
        self.n == other.n && self.iter().all(|(s, t)| other.contains(s, t))
    }

    /// Pairs of `self` that are not in `other`.
    pub fn difference(&self, other: &PairRelation) -> Vec<(State, State)> {
        self.iter().filter(|&(s, t)| !other.contains(s, t)).collect()
    }

    pub fn check_reflexive(&self) -> Result<(), RelationError> {
        match (0..self.n).find(|&s| !self.contains(s, s)) {
            Some(s) => Err(RelationError::NotReflexive(s)),
            None => Ok(()),
        }
    }

    pub fn check_symmetric(&self) -> Result<(), RelationError> {
        match self.iter().find(|&(s, t)| !self.contains(t, s)) {
            Some((s, t)) => Err(RelationError::NotSymmetric(s, t)),
            None => Ok(()),
        }
    }

    pub fn check_transitive(&self) -> Result<(), RelationError> {
        for s in 0..self.n {
            for t in self.related(s) {
                for u in self.related(t) {
                    if !self.contains(s, u) {
                        return Err(RelationError::NotTransitive(s, t, u));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn check_equivalence(&self) -> Result<(), RelationError> {
        self.check_reflexive()?;
        self.check_symmetric()?;
        self.check_transitive()
    }

    pub fn is_equivalence(&self) -> bool {
        self.check_equivalence().is_ok()
    }
}

impl PartialEq for PairRelation {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && (0..self.n).all(|s| self.related(s) == other.related(s))
    }
}

impl Eq for PairRelation {}

/// A partition of `0..n` into nonempty blocks. Block ids are canonical:
/// ordered by the smallest state they contain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    block_of: Vec<usize>,
    blocks: Vec<Vec<State>>,
}

impl Partition {
    /// Groups states by key; states with equal keys share a block.
    pub fn from_keys<K: Hash + Eq>(keys: impl IntoIterator<Item = K>) -> Self {
        let mut ids: HashMap<K, usize> = HashMap::new();
        let mut block_of = Vec::new();
        let mut blocks: Vec<Vec<State>> = Vec::new();
        for (s, key) in keys.into_iter().enumerate() {
            let next = blocks.len();
            let id = *ids.entry(key).or_insert(next);
            if id == next {
                blocks.push(Vec::new());
            }
            blocks[id].push(s);
            block_of.push(id);
        }
        Partition { block_of, blocks }
    }

    pub fn singletons(n: usize) -> Self {
        Self::from_keys(0..n)
    }

    pub fn trivial(n: usize) -> Self {
        Self::from_keys(std::iter::repeat_n((), n))
    }

    pub fn num_states(&self) -> usize {
        self.block_of.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_of(&self, s: State) -> usize {
        self.block_of[s]
    }

    pub fn block_ids(&self) -> &[usize] {
        &self.block_of
    }

    pub fn block(&self, id: usize) -> &[State] {
        &self.blocks[id]
    }

    pub fn blocks(&self) -> &[Vec<State>] {
        &self.blocks
    }

    pub fn same_block(&self, s: State, t: State) -> bool {
        self.block_of[s] == self.block_of[t]
    }

    /// Every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.blocks
            .iter()
            .all(|b| b.iter().all(|&s| coarser.same_block(s, b[0])))
    }

    /// The equivalence relation whose classes are the blocks.
    pub fn to_relation(&self) -> PairRelation {
        let mut r = PairRelation::empty(self.num_states());
        for block in &self.blocks {
            for &s in block {
                for &t in block {
                    r.insert(s, t);
                }
            }
        }
        r
    }

    /// The classes of an equivalence relation.
    pub fn from_relation(r: &PairRelation) -> Result<Self, RelationError> {
        let n = r.num_states();
        let mut assigned: Vec<Option<usize>> = vec![None; n];
        let mut blocks: Vec<Vec<State>> = Vec::new();
        for s in 0..n {
            if assigned[s].is_some() {
                continue;
            }
            let class = r.related(s);
            if class.binary_search(&s).is_err() {
                return Err(RelationError::NotReflexive(s));
            }
            for &t in &class {
                if let Some(other) = assigned[t] {
                    // t already sits in an earlier class that does not contain s
                    let u = blocks[other][0];
                    return Err(if r.contains(t, s) {
                        RelationError::NotTransitive(u, t, s)
                    } else {
                        RelationError::NotSymmetric(s, t)
                    });
                }
                let row = r.related(t);
                if row != class {
                    return Err(diagnose(r, s, t, &class, &row));
                }
            }
            for &t in &class {
                assigned[t] = Some(blocks.len());
            }
            blocks.push(class);
        }
        let block_of = assigned.into_iter().map(|b| b.expect("every state assigned")).collect();
        Ok(Partition { block_of, blocks })
    }
}

fn diagnose(r: &PairRelation, s: State, t: State, class: &[State], row: &[State]) -> RelationError {
    if !r.contains(t, s) {
        return RelationError::NotSymmetric(s, t);
    }
    if let Some(&u) = row.iter().find(|u| class.binary_search(u).is_err()) {
        return RelationError::NotTransitive(s, t, u);
    }
    let u = *class.iter().find(|u| row.binary_search(u).is_err()).expect("rows differ");
    RelationError::NotTransitive(t, s, u)
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (id, block) in self.blocks.iter().enumerate() {
            write!(f, "block {id}:")?;
            for s in block {
                write!(f, " {s}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
