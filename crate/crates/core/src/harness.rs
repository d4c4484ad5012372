//! The three coin families parametrised by a perturbation `ε ∈ [0, 1/2]`,
//! and ε-sweeps over them.
//!
//! | family | states | perturbed row |
//! |---|---|---|
//! | geometric-coin | h0, t, h1 | `τ(h1) = {h1: 1/2 − ε, t: 1/2 + ε}` |
//! | rigged-coin | h2, t3, h3 | `τ(h3) = {h3: 1 − ε, t3: ε}` |
//! | random-walk | h4, t4, h5, t5 | `τ(h5) = τ(t5) = {h5: 1/2 − ε, t5: 1/2 + ε}` |
//!
//! At `ε = 0` each family has a bisimilar distinguished pair; only the
//! geometric coin's pair stays close under perturbation.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::bisim::bisimilarity;
use crate::chain::{ChainOptions, Distribution, LabelledMarkovChain, State};
use crate::distance::{delta_with_options, DistanceError, DistanceOptions};
use crate::probability::{format_ratio, parse_rational, ProbabilityError};
use crate::robust::robust_bisimilarity;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("ε = {0} is outside [0, 1/2]")]
    EpsilonOutOfRange(String),
    #[error("invalid ε {text:?}: {source}")]
    Epsilon { text: String, source: ProbabilityError },
    #[error("unknown family {0:?} (expected geometric-coin, rigged-coin or random-walk)")]
    UnknownFamily(String),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FamilyKind {
    GeometricCoin,
    RiggedCoin,
    RandomWalk,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 3] = [FamilyKind::GeometricCoin, FamilyKind::RiggedCoin, FamilyKind::RandomWalk];

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::GeometricCoin => "geometric-coin",
            FamilyKind::RiggedCoin => "rigged-coin",
            FamilyKind::RandomWalk => "random-walk",
        }
    }

    /// The pair whose distance the family is about: (h0, h1), (h2, h3) or
    /// (h4, h5). All three sit at ids 0 and 2.
    pub fn distinguished_pair(self) -> (State, State) {
        (0, 2)
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FamilyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::UnknownFamily(s.to_string()))
    }
}

/// A family member; `epsilon` is always within `[0, 1/2]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExampleFamily {
    kind: FamilyKind,
    epsilon: BigRational,
}

impl ExampleFamily {
    pub fn new(kind: FamilyKind, epsilon: BigRational) -> Result<Self, HarnessError> {
        let half = BigRational::new(1.into(), 2.into());
        if epsilon.is_negative() || epsilon > half {
            return Err(HarnessError::EpsilonOutOfRange(format_ratio(&epsilon)));
        }
        Ok(ExampleFamily { kind, epsilon })
    }

    pub fn from_ratio(kind: FamilyKind, numer: i64, denom: i64) -> Result<Self, HarnessError> {
        if denom == 0 {
            let text = format!("{numer}/{denom}");
            return Err(HarnessError::Epsilon { source: ProbabilityError::ZeroDenominator(text.clone()), text });
        }
        Self::new(kind, BigRational::new(numer.into(), denom.into()))
    }

    /// `ε` given as `a/b` or a decimal, parsed exactly.
    pub fn parse(kind: FamilyKind, epsilon: &str) -> Result<Self, HarnessError> {
        Self::new(kind, parse_epsilon(epsilon)?)
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn epsilon(&self) -> &BigRational {
        &self.epsilon
    }
}

pub fn parse_epsilon(text: &str) -> Result<BigRational, HarnessError> {
    parse_rational(text.trim()).map_err(|source| HarnessError::Epsilon { text: text.to_string(), source })
}

/// Comma-separated list of rationals.
pub fn parse_epsilon_list(text: &str) -> Result<Vec<BigRational>, HarnessError> {
    text.split(',').filter(|p| !p.trim().is_empty()).map(parse_epsilon).collect()
}

/// `0, 1/1024, 1/256, 1/64, 1/16, 1/8, 1/4, 1/2`.
pub fn default_grid() -> Vec<BigRational> {
    let mut grid = vec![BigRational::zero()];
    grid.extend([1024, 256, 64, 16, 8, 4, 2].map(|d: i64| BigRational::new(1.into(), d.into())));
    grid
}

fn row(entries: &[(State, &BigRational)]) -> Distribution {
    Distribution::new(entries.iter().map(|&(s, p)| (s, p.clone()))).expect("family rows are distributions")
}

/// The chain of a family member. State ids follow the table in the module
/// documentation; states carry their names and the labels `heads`/`tails`.
pub fn build_example(fam: &ExampleFamily) -> LabelledMarkovChain {
    let one = BigRational::one();
    let half = BigRational::new(1.into(), 2.into());
    let eps = &fam.epsilon;
    let low = &half - eps;
    let high = &half + eps;
    let (names, labels, rows): (&[&str], &[&str], Vec<Distribution>) = match fam.kind {
        FamilyKind::GeometricCoin => (
            &["h0", "t", "h1"],
            &["heads", "tails", "heads"],
            vec![
                row(&[(0, &half), (1, &half)]),
                row(&[(1, &one)]),
                row(&[(2, &low), (1, &high)]),
            ],
        ),
        FamilyKind::RiggedCoin => (
            &["h2", "t3", "h3"],
            &["heads", "tails", "heads"],
            vec![
                row(&[(0, &one)]),
                row(&[(1, &one)]),
                row(&[(2, &(&one - eps)), (1, eps)]),
            ],
        ),
        FamilyKind::RandomWalk => (
            &["h4", "t4", "h5", "t5"],
            &["heads", "tails", "heads", "tails"],
            vec![
                row(&[(0, &half), (1, &half)]),
                row(&[(0, &half), (1, &half)]),
                row(&[(2, &low), (3, &high)]),
                row(&[(2, &low), (3, &high)]),
            ],
        ),
    };
    LabelledMarkovChain::with_names(
        labels.iter().map(|l| l.to_string()).collect(),
        rows,
        names.iter().map(|n| n.to_string()).collect(),
        ChainOptions::default(),
    )
    .expect("family chains are valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub family: FamilyKind,
    pub epsilon: BigRational,
    pub s: String,
    pub t: String,
    pub distance: f64,
    pub robust: bool,
    pub bisimilar: bool,
}

pub const SWEEP_HEADER: &str = "family,epsilon,s,t,distance,robust,bisimilar";

impl SweepRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{:.9},{},{}",
            self.family,
            format_ratio(&self.epsilon),
            self.s,
            self.t,
            self.distance,
            self.robust,
            self.bisimilar
        )
    }
}

/// One row for the distinguished pair of `fam`.
pub fn evaluate(fam: &ExampleFamily, options: &DistanceOptions) -> Result<SweepRow, HarnessError> {
    let chain = build_example(fam);
    let sim = bisimilarity(&chain);
    let robust = robust_bisimilarity(&chain);
    let report = delta_with_options(&chain, &sim.to_relation(), options)?;
    let (s, t) = fam.kind.distinguished_pair();
    Ok(SweepRow {
        family: fam.kind,
        epsilon: fam.epsilon.clone(),
        s: chain.name(s).to_string(),
        t: chain.name(t).to_string(),
        distance: report.distances.get(s, t),
        robust: robust.same_block(s, t),
        bisimilar: sim.same_block(s, t),
    })
}

/// Evaluates the family at every `ε` (sorted ascending, duplicates
/// dropped) and writes the header and one CSV row per `ε` to `out`.
pub fn sweep(kind: FamilyKind, epsilons: &[BigRational], out: &mut dyn Write) -> Result<Vec<SweepRow>, HarnessError> {
    sweep_with_options(kind, epsilons, &DistanceOptions::default(), out)
}

pub fn sweep_with_options(
    kind: FamilyKind,
    epsilons: &[BigRational],
    options: &DistanceOptions,
    out: &mut dyn Write,
) -> Result<Vec<SweepRow>, HarnessError> {
    let families = sorted_family_grid(kind, epsilons)?;
    let rows = families.iter().map(|f| evaluate(f, options)).collect::<Result<Vec<_>, _>>()?;
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in &rows {
        writeln!(out, "{}", r.to_csv())?;
    }
    Ok(rows)
}

fn sorted_family_grid(kind: FamilyKind, epsilons: &[BigRational]) -> Result<Vec<ExampleFamily>, HarnessError> {
    let mut eps = epsilons.to_vec();
    eps.sort();
    eps.dedup();
    eps.into_iter().map(|e| ExampleFamily::new(kind, e)).collect()
}
