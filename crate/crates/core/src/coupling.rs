//! Couplings of (sub)probability distributions and the constructions used
//! by the robust bisimilarity algorithms: the North-West corner rule,
//! class-respecting couplings, maximal `R`-support couplings and diagonal
//! couplings.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::chain::{Distribution, State};
use crate::probability::{format_ratio, Probability};
use crate::relation::{PairRelation, Partition, RelationError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CouplingError {
    #[error("marginals carry different mass: {left} vs {right}")]
    MassMismatch { left: String, right: String },
    #[error("class containing state {representative} has mass {left} on the left and {right} on the right")]
    ClassMassMismatch { representative: State, left: String, right: String },
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error("not a subprobability distribution: {0}")]
    InvalidMasses(String),
}

/// A subprobability distribution: positive entries summing to at most one.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SubDistribution {
    entries: Vec<(State, BigRational)>,
}

impl SubDistribution {
    pub fn new<I: IntoIterator<Item = (State, BigRational)>>(entries: I) -> Result<Self, CouplingError> {
        let mut merged: BTreeMap<State, BigRational> = BTreeMap::new();
        for (s, p) in entries {
            if p.is_negative() {
                return Err(CouplingError::InvalidMasses(format!("negative mass at state {s}")));
            }
            *merged.entry(s).or_insert_with(BigRational::zero) += p;
        }
        let entries: Vec<_> = merged.into_iter().filter(|(_, p)| !p.is_zero()).collect();
        let total: BigRational = entries.iter().map(|(_, p)| p).sum();
        if total > BigRational::one() {
            return Err(CouplingError::InvalidMasses(format!("total mass {}", format_ratio(&total))));
        }
        Ok(SubDistribution { entries })
    }

    pub fn iter(&self) -> impl Iterator<Item = (State, &BigRational)> + '_ {
        self.entries.iter().map(|(s, p)| (*s, p))
    }

    pub fn support(&self) -> impl Iterator<Item = State> + '_ {
        self.entries.iter().map(|(s, _)| *s)
    }

    pub fn get(&self, s: State) -> BigRational {
        self.entries
            .binary_search_by_key(&s, |(t, _)| *t)
            .map(|i| self.entries[i].1.clone())
            .unwrap_or_else(|_| BigRational::zero())
    }

    pub fn mass(&self) -> BigRational {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The restriction to states accepted by `keep`.
    pub fn restrict(&self, keep: impl Fn(State) -> bool) -> SubDistribution {
        SubDistribution { entries: self.entries.iter().filter(|(s, _)| keep(*s)).cloned().collect() }
    }
}

impl From<&Distribution> for SubDistribution {
    fn from(d: &Distribution) -> Self {
        SubDistribution { entries: d.iter().map(|(s, p)| (s, p.value().clone())).collect() }
    }
}

/// A joint (sub)distribution over state pairs. Entries are strictly
/// positive; the marginals are cached at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coupling {
    entries: BTreeMap<(State, State), Probability>,
    left: SubDistribution,
    right: SubDistribution,
}

impl Coupling {
    /// Builds a coupling from raw entries, dropping zeros and computing the
    /// marginals from the entries.
    pub fn from_entries<I>(entries: I) -> Result<Self, CouplingError>
    where
        I: IntoIterator<Item = ((State, State), BigRational)>,
    {
        let mut map: BTreeMap<(State, State), BigRational> = BTreeMap::new();
        for (pair, p) in entries {
            *map.entry(pair).or_insert_with(BigRational::zero) += p;
        }
        let left = SubDistribution::new(map.iter().map(|(&(u, _), p)| (u, p.clone())))?;
        let right = SubDistribution::new(map.iter().map(|(&(_, v), p)| (v, p.clone())))?;
        let entries = map
            .into_iter()
            .filter(|(_, p)| !p.is_zero())
            .map(|(pair, p)| Probability::new(p).map(|p| (pair, p)))
            .collect::<Result<_, _>>()
            .map_err(|e| CouplingError::InvalidMasses(e.to_string()))?;
        Ok(Coupling { entries, left, right })
    }

    pub fn get(&self, u: State, v: State) -> Option<&Probability> {
        self.entries.get(&(u, v))
    }

    pub fn iter(&self) -> impl Iterator<Item = ((State, State), &Probability)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn support(&self) -> impl Iterator<Item = (State, State)> + '_ {
        self.entries.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn left_marginal(&self) -> &SubDistribution {
        &self.left
    }

    pub fn right_marginal(&self) -> &SubDistribution {
        &self.right
    }

    /// `ω^T(v, u) = ω(u, v)`, a coupling of the swapped marginals.
    pub fn transpose(&self) -> Coupling {
        Coupling {
            entries: self.entries.iter().map(|(&(u, v), p)| ((v, u), p.clone())).collect(),
            left: self.right.clone(),
            right: self.left.clone(),
        }
    }

    /// `Σ ω(u, v) · cost(u, v)`.
    pub fn expected(&self, cost: impl Fn(State, State) -> f64) -> f64 {
        self.entries.iter().map(|(&(u, v), p)| p.to_f64() * cost(u, v)).sum()
    }

    fn sum(parts: impl IntoIterator<Item = Coupling>) -> Result<Coupling, CouplingError> {
        Coupling::from_entries(
            parts
                .into_iter()
                .flat_map(|c| c.entries.into_iter().map(|(k, p)| (k, p.into_inner()))),
        )
    }
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for ((u, v), p) in &self.entries {
            writeln!(f, "({u},{v}): {p}")?;
        }
        Ok(())
    }
}

/// Greedy North-West corner rule over states in ascending order. Produces
/// at most `|support(μ)| + |support(ν)| − 1` entries.
pub fn north_west_corner(mu: &SubDistribution, nu: &SubDistribution) -> Result<Coupling, CouplingError> {
    let (left_mass, right_mass) = (mu.mass(), nu.mass());
    if left_mass != right_mass {
        return Err(CouplingError::MassMismatch {
            left: format_ratio(&left_mass),
            right: format_ratio(&right_mass),
        });
    }
    let rows: Vec<(State, BigRational)> = mu.iter().map(|(s, p)| (s, p.clone())).collect();
    let cols: Vec<(State, BigRational)> = nu.iter().map(|(s, p)| (s, p.clone())).collect();
    let mut entries = Vec::with_capacity(rows.len() + cols.len());
    let (mut i, mut j) = (0, 0);
    let mut row_left = rows.first().map(|r| r.1.clone()).unwrap_or_else(BigRational::zero);
    let mut col_left = cols.first().map(|c| c.1.clone()).unwrap_or_else(BigRational::zero);
    while i < rows.len() && j < cols.len() {
        let m = if row_left < col_left { row_left.clone() } else { col_left.clone() };
        entries.push(((rows[i].0, cols[j].0), m.clone()));
        row_left -= &m;
        col_left -= &m;
        if row_left.is_zero() {
            i += 1;
            if let Some(r) = rows.get(i) {
                row_left = r.1.clone();
            }
        }
        if col_left.is_zero() {
            j += 1;
            if let Some(c) = cols.get(j) {
                col_left = c.1.clone();
            }
        }
    }
    Coupling::from_entries(entries)
}

fn check_class_masses(
    mu: &SubDistribution,
    nu: &SubDistribution,
    classes: &Partition,
) -> Result<(), CouplingError> {
    let mut left: HashMap<usize, BigRational> = HashMap::new();
    let mut right: HashMap<usize, BigRational> = HashMap::new();
    for (s, p) in mu.iter() {
        *left.entry(classes.block_of(s)).or_insert_with(BigRational::zero) += p;
    }
    for (s, p) in nu.iter() {
        *right.entry(classes.block_of(s)).or_insert_with(BigRational::zero) += p;
    }
    let zero = BigRational::zero();
    for block in 0..classes.num_blocks() {
        let l = left.get(&block).unwrap_or(&zero);
        let r = right.get(&block).unwrap_or(&zero);
        if l != r {
            return Err(CouplingError::ClassMassMismatch {
                representative: classes.block(block)[0],
                left: format_ratio(l),
                right: format_ratio(r),
            });
        }
    }
    Ok(())
}

/// A coupling supported inside the equivalence classes given as a
/// partition: the North-West corner rule applied class by class.
pub fn class_coupling_in(
    mu: &SubDistribution,
    nu: &SubDistribution,
    classes: &Partition,
) -> Result<Coupling, CouplingError> {
    check_class_masses(mu, nu, classes)?;
    let mut touched: Vec<usize> = mu.support().chain(nu.support()).map(|s| classes.block_of(s)).collect();
    touched.sort_unstable();
    touched.dedup();
    let parts = touched
        .into_iter()
        .map(|b| {
            let in_block = |s: State| classes.block_of(s) == b;
            north_west_corner(&mu.restrict(in_block), &nu.restrict(in_block))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Coupling::sum(parts)
}

/// A coupling of `μ` and `ν` whose support lies inside the equivalence
/// relation `r`. Requires `μ(A) = ν(A)` for every class `A` of `r`.
pub fn class_coupling(mu: &Distribution, nu: &Distribution, r: &PairRelation) -> Result<Coupling, CouplingError> {
    let classes = Partition::from_relation(r)?;
    class_coupling_in(&mu.into(), &nu.into(), &classes)
}

/// A coupling whose support is exactly `(support(μ) × support(ν)) ∩ r`.
///
/// Every candidate pair `(u, v)` first receives
/// `min(μ(u) / |L¹_u|, ν(v) / |L²_v|)`, where `L¹_u` (resp. `L²_v`) are the
/// candidate pairs in row `u` (column `v`). The remaining residual masses
/// still agree class by class and are completed with [`class_coupling_in`].
pub fn maximal_support_coupling(
    mu: &Distribution,
    nu: &Distribution,
    r: &PairRelation,
) -> Result<Coupling, CouplingError> {
    let classes = Partition::from_relation(r)?;
    maximal_support_coupling_in(mu, nu, &classes)
}

pub fn maximal_support_coupling_in(
    mu: &Distribution,
    nu: &Distribution,
    classes: &Partition,
) -> Result<Coupling, CouplingError> {
    let (mu_sub, nu_sub): (SubDistribution, SubDistribution) = (mu.into(), nu.into());
    check_class_masses(&mu_sub, &nu_sub, classes)?;

    let pairs: Vec<(State, State)> = mu
        .support()
        .flat_map(|u| nu.support().map(move |v| (u, v)))
        .filter(|&(u, v)| classes.same_block(u, v))
        .collect();
    let mut row_count: HashMap<State, usize> = HashMap::new();
    let mut col_count: HashMap<State, usize> = HashMap::new();
    for &(u, v) in &pairs {
        *row_count.entry(u).or_default() += 1;
        *col_count.entry(v).or_default() += 1;
    }

    let mut mu_rest: BTreeMap<State, BigRational> = mu.iter().map(|(s, p)| (s, p.value().clone())).collect();
    let mut nu_rest: BTreeMap<State, BigRational> = nu.iter().map(|(s, p)| (s, p.value().clone())).collect();
    let mut first = Vec::with_capacity(pairs.len());
    for &(u, v) in &pairs {
        let from_row = mu.prob(u) / BigRational::from_integer(row_count[&u].into());
        let from_col = nu.prob(v) / BigRational::from_integer(col_count[&v].into());
        let p = if from_row < from_col { from_row } else { from_col };
        *mu_rest.get_mut(&u).expect("u in support") -= &p;
        *nu_rest.get_mut(&v).expect("v in support") -= &p;
        first.push(((u, v), p));
    }
    debug_assert!(mu_rest.values().chain(nu_rest.values()).all(|p| !p.is_negative()));

    let mu_rest = SubDistribution::new(mu_rest)?;
    let nu_rest = SubDistribution::new(nu_rest)?;
    let second = class_coupling_in(&mu_rest, &nu_rest, classes)?;
    Coupling::from_entries(
        first
            .into_iter()
            .chain(second.entries.into_iter().map(|(k, p)| (k, p.into_inner()))),
    )
}

/// `ω(s, s) = μ(s)`.
pub fn diagonal_coupling(mu: &Distribution) -> Coupling {
    Coupling::from_entries(mu.iter().map(|(s, p)| ((s, s), p.value().clone())))
        .expect("a distribution couples with itself")
}

/// `max_x |μ(x) − ν(x)|`. Note that this is the largest pointwise
/// difference, not half the L1 norm.
pub fn tv_distance(mu: &Distribution, nu: &Distribution) -> Probability {
    let max = mu
        .support()
        .chain(nu.support())
        .map(|x| (mu.prob(x) - nu.prob(x)).abs())
        .max()
        .unwrap_or_else(BigRational::zero);
    Probability::new(max).expect("difference of probabilities lies in [0, 1]")
}

/// True iff the row sums of `w` equal `μ` and its column sums equal `ν`
/// exactly.
pub fn verify_coupling(w: &Coupling, mu: &Distribution, nu: &Distribution) -> bool {
    verify_marginals(w, &mu.into(), &nu.into())
}

pub fn verify_marginals(w: &Coupling, mu: &SubDistribution, nu: &SubDistribution) -> bool {
    let mut rows: BTreeMap<State, BigRational> = BTreeMap::new();
    let mut cols: BTreeMap<State, BigRational> = BTreeMap::new();
    for ((u, v), p) in w.iter() {
        *rows.entry(u).or_insert_with(BigRational::zero) += p.value();
        *cols.entry(v).or_insert_with(BigRational::zero) += p.value();
    }
    let same = |sums: BTreeMap<State, BigRational>, target: &SubDistribution| {
        sums.len() == target.entries.len()
            && sums.into_iter().zip(target.iter()).all(|((s, p), (t, q))| s == t && &p == q)
    };
    same(rows, mu) && same(cols, nu)
}
