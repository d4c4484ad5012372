//! Probabilistic bisimilarity distances.
//!
//! The distance `δ` is the least fixed point of
//!
//! ```text
//! Δ(d)(s, t) = 1                                   if ℓ(s) ≠ ℓ(t)
//!            = min_{ω ∈ Ω(τ(s), τ(t))} Σ ω(u, v) d(u, v)   otherwise
//! ```
//!
//! [`delta`] pins `δ = 0` on bisimilar pairs and `δ = 1` on differently
//! labelled pairs, then runs value iteration from zero on the remaining
//! pairs until the sup-norm change drops below the tolerance. The result
//! is then tightened by policy evaluation: the greedy policy's reachability
//! probabilities are an upper bound on `δ`, and improving the policy until
//! it is stable lands on `δ` up to floating point rounding.
//!
//! A policy assigns a coupling of `τ(s), τ(t)` to every pair that is not
//! differently labelled; [`policy_value`] computes, with exact rationals,
//! the probability `γ_P(s, t)` that the induced product chain started in
//! `(s, t)` reaches a differently labelled pair.

use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::chain::{LabelledMarkovChain, State};
use crate::classify::{classify_pairs, PairClass, PairClassification};
use crate::coupling::{diagonal_coupling, verify_coupling, Coupling};
use crate::linsolve;
use crate::relation::{PairRelation, RelationError};
use crate::transport::{min_transport, min_transport_value};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Policy evaluation is skipped when more undetermined pairs than this
/// remain; the result is then plain value iteration.
pub const POLICY_EVALUATION_LIMIT: usize = 1500;

const MAX_POLICY_ROUNDS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistanceError {
    #[error("value iteration did not converge after {iterations} sweeps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error("policy is invalid at ({0}, {1}): {2}")]
    InvalidPolicy(State, State, String),
}

#[derive(Debug, Clone, Copy)]
pub struct DistanceOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Worker threads for the per-pair transport problems of one sweep.
    pub threads: usize,
    /// Tighten the value-iteration result by policy evaluation.
    pub policy_evaluation: bool,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        DistanceOptions {
            tol: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
            threads: 1,
            policy_evaluation: true,
        }
    }
}

/// A symmetric `n × n` matrix of distances in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn zeros(n: usize) -> Self {
        DistanceMatrix { n, values: vec![0.0; n * n] }
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn get(&self, s: State, t: State) -> f64 {
        self.values[s * self.n + t]
    }

    /// Sets both `(s, t)` and `(t, s)`.
    pub fn set(&mut self, s: State, t: State, value: f64) {
        self.values[s * self.n + t] = value;
        self.values[t * self.n + s] = value;
    }

    pub fn max_abs_diff(&self, other: &DistanceMatrix) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `s,t,value` rows. Without a filter, all pairs `s < t` are listed.
    pub fn to_csv(&self, chain: &LabelledMarkovChain, pairs: Option<&[(State, State)]>) -> String {
        let mut out = String::from("s,t,value\n");
        let all: Vec<(State, State)>;
        let pairs = match pairs {
            Some(p) => p,
            None => {
                all = (0..self.n).flat_map(|s| (s + 1..self.n).map(move |t| (s, t))).collect();
                &all
            }
        };
        for &(s, t) in pairs {
            let _ = writeln!(out, "{},{},{:.9}", chain.name(s), chain.name(t), self.get(s, t));
        }
        out
    }

    /// The full matrix, one row per line.
    pub fn to_dense_text(&self) -> String {
        let mut out = String::new();
        for s in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|t| format!("{:.9}", self.get(s, t))).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct DistanceReport {
    pub distances: DistanceMatrix,
    /// Value-iteration sweeps performed.
    pub sweeps: usize,
    /// Sup-norm change of the last sweep.
    pub residual: f64,
    /// Policy-evaluation rounds performed after value iteration.
    pub policy_rounds: usize,
}

/// The matrix that `delta` starts from: 1 on differently labelled pairs,
/// 0 elsewhere.
pub fn initial_distances(classes: &PairClassification) -> DistanceMatrix {
    let n = classes.num_states();
    let mut d = DistanceMatrix::zeros(n);
    for s in 0..n {
        for t in s + 1..n {
            if classes.is_different_label(s, t) {
                d.set(s, t, 1.0);
            }
        }
    }
    d
}

fn unknown_pairs(classes: &PairClassification) -> Vec<(State, State)> {
    classes.unknown().iter().copied().filter(|&(s, t)| s < t).collect()
}

/// One application of `Δ` to the undetermined pairs; all other entries are
/// copied from `d`.
pub fn bellman_sweep(chain: &LabelledMarkovChain, classes: &PairClassification, d: &DistanceMatrix) -> DistanceMatrix {
    sweep_pairs(chain, &unknown_pairs(classes), d, 1)
}

fn sweep_pairs(chain: &LabelledMarkovChain, pairs: &[(State, State)], d: &DistanceMatrix, threads: usize) -> DistanceMatrix {
    let step = |&(s, t): &(State, State)| {
        min_transport_value(|u, v| d.get(u, v), chain.transition(s), chain.transition(t)).clamp(0.0, 1.0)
    };
    let values: Vec<f64> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        pool.install(|| pairs.par_iter().map(step).collect())
    } else {
        pairs.iter().map(step).collect()
    };
    let mut next = d.clone();
    for (&(s, t), v) in pairs.iter().zip(values) {
        next.set(s, t, v);
    }
    next
}

/// Bisimilarity distances with default options.
pub fn delta(chain: &LabelledMarkovChain, bisim: &PairRelation, tol: f64, max_iter: usize) -> Result<DistanceMatrix, DistanceError> {
    let options = DistanceOptions { tol, max_iter, ..DistanceOptions::default() };
    delta_with_options(chain, bisim, &options).map(|r| r.distances)
}

pub fn delta_with_options(
    chain: &LabelledMarkovChain,
    bisim: &PairRelation,
    options: &DistanceOptions,
) -> Result<DistanceReport, DistanceError> {
    if options.tol.is_nan() || options.tol <= 0.0 {
        return Err(DistanceError::InvalidTolerance(options.tol));
    }
    let classes = classify_pairs(chain, bisim)?;
    let pairs = unknown_pairs(&classes);
    let mut d = initial_distances(&classes);
    let mut sweeps = 0;
    let mut residual = 0.0;
    if !pairs.is_empty() {
        loop {
            if sweeps >= options.max_iter {
                return Err(DistanceError::NotConverged { iterations: sweeps, residual });
            }
            let next = sweep_pairs(chain, &pairs, &d, options.threads);
            residual = next.max_abs_diff(&d);
            d = next;
            sweeps += 1;
            if residual < options.tol {
                break;
            }
        }
    }
    let mut policy_rounds = 0;
    if options.policy_evaluation && !pairs.is_empty() && pairs.len() <= POLICY_EVALUATION_LIMIT {
        let mut previous: Option<Vec<Coupling>> = None;
        while policy_rounds < MAX_POLICY_ROUNDS {
            let policy: Vec<Coupling> = pairs
                .iter()
                .map(|&(s, t)| min_transport(|u, v| d.get(u, v), chain.transition(s), chain.transition(t)).coupling)
                .collect();
            if previous.as_ref() == Some(&policy) {
                break;
            }
            let Some(values) = evaluate_unknown(&classes, &pairs, &policy) else { break };
            policy_rounds += 1;
            let mut next = d.clone();
            for (&(s, t), v) in pairs.iter().zip(values) {
                next.set(s, t, v.clamp(0.0, 1.0));
            }
            let change = next.max_abs_diff(&d);
            d = next;
            previous = Some(policy);
            if change == 0.0 {
                break;
            }
        }
    }
    Ok(DistanceReport { distances: d, sweeps, residual, policy_rounds })
}

/// Reachability of differently labelled pairs under a policy given on the
/// undetermined pairs `s < t` only; bisimilar and diagonal pairs count as 0.
fn evaluate_unknown(classes: &PairClassification, pairs: &[(State, State)], policy: &[Coupling]) -> Option<Vec<f64>> {
    let n = classes.num_states();
    let mut index = vec![usize::MAX; n * n];
    for (k, &(s, t)) in pairs.iter().enumerate() {
        index[s * n + t] = k;
        index[t * n + s] = k;
    }
    let k = pairs.len();
    // successors among unknowns and direct mass into S²_1
    let mut edges: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
    let mut to_one = vec![0.0; k];
    for (row, coupling) in policy.iter().enumerate() {
        for ((u, v), p) in coupling.iter() {
            match classes.class(u, v) {
                PairClass::DifferentLabel => to_one[row] += p.to_f64(),
                PairClass::Unknown => edges[row].push((index[u * n + v], p.to_f64())),
                PairClass::Diagonal | PairClass::Bisimilar => {}
            }
        }
    }
    let live = can_reach(k, &edges, |i| to_one[i] > 0.0);
    let live_index: Vec<usize> = {
        let mut next = 0;
        live.iter()
            .map(|&l| {
                if l {
                    next += 1;
                    next - 1
                } else {
                    usize::MAX
                }
            })
            .collect()
    };
    let m = live.iter().filter(|&&l| l).count();
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    for i in (0..k).filter(|&i| live[i]) {
        let r = live_index[i];
        a[r][r] += 1.0;
        b[r] = to_one[i];
        for &(j, p) in &edges[i] {
            if live[j] {
                a[r][live_index[j]] -= p;
            }
        }
    }
    let x = linsolve::solve(a, b)?;
    Some((0..k).map(|i| if live[i] { x[live_index[i]] } else { 0.0 }).collect())
}

/// Nodes that can reach a node satisfying `target` along `edges`.
fn can_reach<W>(k: usize, edges: &[Vec<(usize, W)>], target: impl Fn(usize) -> bool) -> Vec<bool> {
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, out) in edges.iter().enumerate() {
        for (j, _) in out {
            reverse[*j].push(i);
        }
    }
    let mut live: Vec<bool> = (0..k).map(&target).collect();
    let mut stack: Vec<usize> = (0..k).filter(|&i| live[i]).collect();
    while let Some(j) = stack.pop() {
        for &i in &reverse[j] {
            if !live[i] {
                live[i] = true;
                stack.push(i);
            }
        }
    }
    live
}

/// A choice of coupling for every pair that is not differently labelled;
/// differently labelled pairs loop on themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n: usize,
    couplings: Vec<Option<Coupling>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyChoice<'a> {
    SelfLoop,
    Coupling(&'a Coupling),
}

impl Policy {
    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn choice(&self, s: State, t: State) -> PolicyChoice<'_> {
        match &self.couplings[s * self.n + t] {
            Some(c) => PolicyChoice::Coupling(c),
            None => PolicyChoice::SelfLoop,
        }
    }

    pub fn coupling(&self, s: State, t: State) -> Option<&Coupling> {
        self.couplings[s * self.n + t].as_ref()
    }

    /// Replaces the coupling of a same-label pair; it must be a coupling of
    /// `τ(s)` and `τ(t)`.
    pub fn set(&mut self, chain: &LabelledMarkovChain, s: State, t: State, coupling: Coupling) -> Result<(), DistanceError> {
        if !chain.same_label(s, t) {
            return Err(DistanceError::InvalidPolicy(s, t, "differently labelled pairs loop on themselves".into()));
        }
        if !verify_coupling(&coupling, chain.transition(s), chain.transition(t)) {
            return Err(DistanceError::InvalidPolicy(s, t, "marginals do not match".into()));
        }
        self.couplings[s * self.n + t] = Some(coupling);
        Ok(())
    }

    /// Per-pair coupling listing.
    pub fn to_text(&self, chain: &LabelledMarkovChain) -> String {
        let mut out = String::new();
        for s in 0..self.n {
            for t in 0..self.n {
                match self.choice(s, t) {
                    PolicyChoice::SelfLoop => {
                        let _ = writeln!(out, "pair ({},{}): self-loop", chain.name(s), chain.name(t));
                    }
                    PolicyChoice::Coupling(c) => {
                        let _ = writeln!(out, "pair ({},{}):", chain.name(s), chain.name(t));
                        for ((u, v), p) in c.iter() {
                            let _ = writeln!(out, "  ({},{}): {p}", chain.name(u), chain.name(v));
                        }
                    }
                }
            }
        }
        out
    }
}

/// The optimal couplings for the cost `d`: diagonal couplings on the
/// diagonal, a minimum-cost vertex coupling elsewhere (transposed for
/// `s > t` so the policy is symmetric).
pub fn extract_policy(chain: &LabelledMarkovChain, d: &DistanceMatrix) -> Policy {
    let n = chain.num_states();
    let mut couplings: Vec<Option<Coupling>> = vec![None; n * n];
    for s in 0..n {
        couplings[s * n + s] = Some(diagonal_coupling(chain.transition(s)));
        for t in s + 1..n {
            if !chain.same_label(s, t) {
                continue;
            }
            let w = min_transport(|u, v| d.get(u, v), chain.transition(s), chain.transition(t)).coupling;
            couplings[t * n + s] = Some(w.transpose());
            couplings[s * n + t] = Some(w);
        }
    }
    Policy { n, couplings }
}

/// `γ_P` for every pair, as exact rationals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyValue {
    n: usize,
    gamma: Vec<BigRational>,
}

impl PolicyValue {
    pub fn get(&self, s: State, t: State) -> &BigRational {
        &self.gamma[s * self.n + t]
    }

    pub fn to_f64(&self, s: State, t: State) -> f64 {
        crate::probability::ratio_to_f64(self.get(s, t))
    }
}

/// Exact probability of reaching a differently labelled pair from each pair
/// in the product chain induced by the policy.
///
/// Pairs that cannot reach such a pair get 0, differently labelled pairs
/// get 1, and the remaining linear system is solved exactly.
pub fn policy_value(chain: &LabelledMarkovChain, policy: &Policy) -> PolicyValue {
    let n = chain.num_states();
    let nn = n * n;
    let mut edges: Vec<Vec<(usize, BigRational)>> = vec![Vec::new(); nn];
    for s in 0..n {
        for t in 0..n {
            if let PolicyChoice::Coupling(c) = policy.choice(s, t) {
                edges[s * n + t] = c.iter().map(|((u, v), p)| (u * n + v, p.value().clone())).collect();
            }
        }
    }
    let target = |i: usize| !chain.same_label(i / n, i % n);
    let live = can_reach(nn, &edges, target);
    let unknowns: Vec<usize> = (0..nn).filter(|&i| live[i] && !target(i)).collect();
    let mut position = vec![usize::MAX; nn];
    for (k, &i) in unknowns.iter().enumerate() {
        position[i] = k;
    }
    let m = unknowns.len();
    let mut a = vec![vec![BigRational::zero(); m]; m];
    let mut b = vec![BigRational::zero(); m];
    for (r, &i) in unknowns.iter().enumerate() {
        a[r][r] += BigRational::one();
        for (j, p) in &edges[i] {
            if target(*j) {
                b[r] += p;
            } else if live[*j] {
                a[r][position[*j]] -= p;
            }
        }
    }
    let x = linsolve::solve(a, b).expect("every remaining pair reaches S²_1, so the system is regular");
    let mut gamma = vec![BigRational::zero(); nn];
    for i in 0..nn {
        if target(i) {
            gamma[i] = BigRational::one();
        } else if live[i] {
            gamma[i] = x[position[i]].clone();
        }
    }
    PolicyValue { n, gamma }
}

/// True iff one step of the policy's operator reproduces `d` within `tol`.
pub fn check_optimal(chain: &LabelledMarkovChain, policy: &Policy, d: &DistanceMatrix, tol: f64) -> bool {
    let n = chain.num_states();
    (0..n).all(|s| {
        (0..n).all(|t| {
            let expected = match policy.choice(s, t) {
                PolicyChoice::SelfLoop => d.get(s, t),
                PolicyChoice::Coupling(c) => c.expected(|u, v| d.get(u, v)),
            };
            let consistent = match policy.choice(s, t) {
                PolicyChoice::SelfLoop => (d.get(s, t) - 1.0).abs() <= tol,
                PolicyChoice::Coupling(_) => true,
            };
            consistent && (expected - d.get(s, t)).abs() <= tol
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bisim::bisimilarity;
    use crate::chain::{ChainOptions, Distribution};
    use crate::harness::{build_example, ExampleFamily, FamilyKind};

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn example(kind: FamilyKind, num: i64, den: i64) -> LabelledMarkovChain {
        build_example(&ExampleFamily::from_ratio(kind, num, den).unwrap())
    }

    fn distances(chain: &LabelledMarkovChain) -> DistanceMatrix {
        delta(chain, &bisimilarity(chain).to_relation(), DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap()
    }

    #[test]
    fn geometric_coin_closed_form() {
        for (num, den) in [(1, 8), (1, 4), (1, 2)] {
            let chain = example(FamilyKind::GeometricCoin, num, den);
            let eps = num as f64 / den as f64;
            let d = distances(&chain);
            assert!((d.get(0, 2) - eps / (0.5 + eps)).abs() < 1e-9, "ε = {num}/{den}: {}", d.get(0, 2));
        }
    }

    #[test]
    fn rigged_coin_jumps_to_one() {
        let chain = example(FamilyKind::RiggedCoin, 1, 10);
        let d = distances(&chain);
        assert!((d.get(0, 2) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn random_walk_at_zero_is_zero() {
        let chain = example(FamilyKind::RandomWalk, 0, 1);
        let d = distances(&chain);
        assert_eq!(d.get(0, 2), 0.0);
        assert_eq!(d.get(1, 3), 0.0);
        assert_eq!(d.get(0, 1), 1.0);
    }

    #[test]
    fn example_policy_has_value_one_fifth() {
        let chain = example(FamilyKind::GeometricCoin, 1, 8);
        let d = distances(&chain);
        let policy = extract_policy(&chain, &d);
        let listed: Vec<_> = policy.coupling(0, 2).unwrap().iter().map(|(k, p)| (k, p.to_string())).collect();
        assert_eq!(listed, vec![((0, 1), "1/8".into()), ((0, 2), "3/8".into()), ((1, 1), "1/2".into())]);
        let gamma = policy_value(&chain, &policy);
        assert_eq!(gamma.get(0, 2), &q(1, 5));
        assert_eq!(gamma.get(2, 0), &q(1, 5));
        assert_eq!(gamma.get(0, 1), &q(1, 1));
        assert_eq!(gamma.get(1, 1), &q(0, 1));
        assert!(check_optimal(&chain, &policy, &d, 1e-9));
    }

    #[test]
    fn robust_policy_never_reaches_different_labels() {
        let chain = example(FamilyKind::GeometricCoin, 0, 1);
        let d = distances(&chain);
        let policy = extract_policy(&chain, &d);
        let listed: Vec<_> = policy.coupling(0, 2).unwrap().iter().map(|(k, p)| (k, p.to_string())).collect();
        assert_eq!(listed, vec![((0, 2), "1/2".into()), ((1, 1), "1/2".into())]);
        assert!(policy_value(&chain, &policy).get(0, 2).is_zero());
    }

    #[test]
    fn distinct_labels_need_no_iteration() {
        let chain = LabelledMarkovChain::new(
            vec!["a".into(), "b".into()],
            vec![Distribution::point(1), Distribution::point(0)],
            ChainOptions::default(),
        )
        .unwrap();
        let report =
            delta_with_options(&chain, &PairRelation::identity(2), &DistanceOptions::default()).unwrap();
        assert_eq!(report.sweeps, 0);
        let policy = extract_policy(&chain, &report.distances);
        assert_eq!(policy.choice(0, 1), PolicyChoice::SelfLoop);
        assert!(policy.coupling(0, 0).is_some());
        assert!(check_optimal(&chain, &policy, &report.distances, 1e-12));
    }

    #[test]
    fn suboptimal_coupling_fails_the_check() {
        let chain = example(FamilyKind::GeometricCoin, 1, 8);
        let d = distances(&chain);
        let mut policy = extract_policy(&chain, &d);
        // product coupling of τ(h0) = {h0: 1/2, t: 1/2} and τ(h1) = {t: 5/8, h1: 3/8}
        let product = Coupling::from_entries([
            ((0, 1), q(5, 16)),
            ((0, 2), q(3, 16)),
            ((1, 1), q(5, 16)),
            ((1, 2), q(3, 16)),
        ])
        .unwrap();
        policy.set(&chain, 0, 2, product).unwrap();
        assert!(!check_optimal(&chain, &policy, &d, 1e-9));
        // any policy bounds δ from above
        assert!(policy_value(&chain, &policy).to_f64(0, 2) >= d.get(0, 2) - 1e-9);
    }

    #[test]
    fn bad_inputs() {
        let chain = example(FamilyKind::GeometricCoin, 1, 8);
        let sim = bisimilarity(&chain).to_relation();
        assert!(matches!(delta(&chain, &sim, 0.0, 10), Err(DistanceError::InvalidTolerance(_))));
        assert!(matches!(delta(&chain, &sim, 1e-12, 2), Err(DistanceError::NotConverged { iterations: 2, .. })));
        let mut policy = extract_policy(&chain, &DistanceMatrix::zeros(3));
        assert!(policy.set(&chain, 0, 1, diagonal_coupling(chain.transition(0))).is_err());
        assert!(policy.set(&chain, 0, 2, diagonal_coupling(chain.transition(0))).is_err());
    }

    #[test]
    fn parallel_sweeps_match_serial() {
        let chain = example(FamilyKind::GeometricCoin, 1, 4);
        let sim = bisimilarity(&chain).to_relation();
        let serial = delta_with_options(&chain, &sim, &DistanceOptions::default()).unwrap();
        let parallel =
            delta_with_options(&chain, &sim, &DistanceOptions { threads: 3, ..DistanceOptions::default() }).unwrap();
        assert_eq!(serial.distances, parallel.distances);
    }

    #[test]
    fn csv_and_dense_exports() {
        let chain = example(FamilyKind::GeometricCoin, 1, 8);
        let d = distances(&chain);
        assert_eq!(
            d.to_csv(&chain, None),
            "s,t,value\nh0,t,1.000000000\nh0,h1,0.200000000\nt,h1,1.000000000\n"
        );
        assert_eq!(d.to_csv(&chain, Some(&[(2, 2)])), "s,t,value\nh1,h1,0.000000000\n");
        assert_eq!(d.to_dense_text().lines().count(), 3);
    }
}
