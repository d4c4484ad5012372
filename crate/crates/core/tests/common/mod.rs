//! Random chains and brute-force re-implementations of the definitions.
#![allow(dead_code)]

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use robust_bisim::{ChainOptions, Distribution, LabelledMarkovChain, PairRelation, Partition};

pub type Matrix = Vec<Vec<bool>>;

pub fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

fn random_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, BigRational)> {
    let k = rng.gen_range(1..=n.min(3));
    let mut targets: Vec<usize> = (0..n).collect();
    targets.shuffle(rng);
    targets.truncate(k);
    let weights: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=4)).collect();
    let total: i64 = weights.iter().sum();
    targets.into_iter().zip(weights).map(|(t, w)| (t, q(w, total))).collect()
}

/// A random chain on `n` states with at most `labels` labels.
///
/// About half the states copy the label and row of an earlier state, with
/// transitions into that state sometimes redirected to the copy itself, so
/// bisimilar pairs (robust or not) are common.
pub fn random_chain(rng: &mut ChaCha8Rng, n: usize, labels: usize) -> LabelledMarkovChain {
    let mut label_of: Vec<usize> = Vec::with_capacity(n);
    let mut rows: Vec<Vec<(usize, BigRational)>> = Vec::with_capacity(n);
    for s in 0..n {
        if s > 0 && rng.gen_bool(0.5) {
            let r = rng.gen_range(0..s);
            label_of.push(label_of[r]);
            let row = rows[r]
                .iter()
                .map(|(t, p)| (if *t == r && rng.gen_bool(0.5) { s } else { *t }, p.clone()))
                .collect();
            rows.push(row);
        } else {
            label_of.push(rng.gen_range(0..labels));
            rows.push(random_row(rng, n));
        }
    }
    // rows may point past the states created so far; all targets are < n
    let distributions = rows
        .into_iter()
        .map(|row| Distribution::new(merge(row)).expect("rows sum to one"))
        .collect();
    LabelledMarkovChain::new(
        label_of.iter().map(|l| format!("l{l}")).collect(),
        distributions,
        ChainOptions { allow_single_label: true },
    )
    .expect("valid chain")
}

fn merge(row: Vec<(usize, BigRational)>) -> Vec<(usize, BigRational)> {
    let mut merged: Vec<(usize, BigRational)> = Vec::new();
    for (t, p) in row {
        match merged.iter_mut().find(|(u, _)| *u == t) {
            Some((_, sum)) => *sum += p,
            None => merged.push((t, p)),
        }
    }
    merged
}

pub fn matrix_of(r: &PairRelation) -> Matrix {
    let n = r.num_states();
    (0..n).map(|s| (0..n).map(|t| r.contains(s, t)).collect()).collect()
}

pub fn matrix_of_partition(p: &Partition) -> Matrix {
    let n = p.num_states();
    (0..n).map(|s| (0..n).map(|t| p.same_block(s, t)).collect()).collect()
}

pub fn relation_of(m: &Matrix) -> PairRelation {
    let n = m.len();
    PairRelation::from_pairs(n, (0..n).flat_map(|s| (0..n).map(move |t| (s, t))).filter(|&(s, t)| m[s][t]))
}

fn mass_into(chain: &LabelledMarkovChain, s: usize, class: &[bool]) -> BigRational {
    chain
        .transition(s)
        .iter()
        .filter(|(t, _)| class[*t])
        .map(|(_, p)| p.value().clone())
        .fold(BigRational::zero(), |a, b| a + b)
}

/// Largest bisimulation inside the equivalence `initial` and the label
/// relation: drop `(s, t)` while some class `R[u]` receives different mass
/// from `s` and `t`.
pub fn naive_bisim_from(chain: &LabelledMarkovChain, initial: &Matrix) -> Matrix {
    let n = chain.num_states();
    let mut r: Matrix =
        (0..n).map(|s| (0..n).map(|t| initial[s][t] && chain.label(s) == chain.label(t)).collect()).collect();
    loop {
        let mut next = r.clone();
        for s in 0..n {
            for t in 0..n {
                if r[s][t] && (0..n).any(|u| mass_into(chain, s, &r[u]) != mass_into(chain, t, &r[u])) {
                    next[s][t] = false;
                }
            }
        }
        if next == r {
            return r;
        }
        r = next;
    }
}

pub fn naive_bisimilarity(chain: &LabelledMarkovChain) -> Matrix {
    let n = chain.num_states();
    naive_bisim_from(chain, &vec![vec![true; n]; n])
}

/// `Q ← Q ∪ ((R ∩ Pre(Q)) \ Q)` from the diagonal until nothing changes.
pub fn literal_filter(chain: &LabelledMarkovChain, r: &Matrix) -> Matrix {
    let n = chain.num_states();
    let mut q: Matrix = (0..n).map(|s| (0..n).map(|t| s == t).collect()).collect();
    loop {
        let old = q.clone();
        for s in 0..n {
            for t in 0..n {
                if r[s][t] && !old[s][t] {
                    let hits = chain
                        .transition(s)
                        .support()
                        .any(|u| chain.transition(t).support().any(|v| old[u][v]));
                    if hits {
                        q[s][t] = true;
                    }
                }
            }
        }
        if q == old {
            return q;
        }
    }
}

/// `{(s, t) ∈ Q | ∀(t, u) ∈ Q: (s, u) ∈ Q ∧ ∀(u, s) ∈ Q: (u, t) ∈ Q}`.
pub fn prune_definition(q: &Matrix) -> Matrix {
    let n = q.len();
    (0..n)
        .map(|s| {
            (0..n)
                .map(|t| q[s][t] && (0..n).all(|u| (!q[t][u] || q[s][u]) && (!q[u][s] || q[u][t])))
                .collect()
        })
        .collect()
}

/// The loop form: for every `(s, t)` and `(t, u)` in `Q` with
/// `(s, u) ∉ Q`, remove both `(s, t)` and `(t, u)`.
pub fn prune_loops(q: &Matrix) -> Matrix {
    let n = q.len();
    let mut e = q.clone();
    for s in 0..n {
        for t in 0..n {
            if !q[s][t] {
                continue;
            }
            for u in 0..n {
                if q[t][u] && !q[s][u] {
                    e[s][t] = false;
                    e[t][u] = false;
                }
            }
        }
    }
    e
}

/// Refinement loop built from the three brute-force components.
pub fn naive_robust_bisimilarity(chain: &LabelledMarkovChain) -> Matrix {
    let mut r = naive_bisimilarity(chain);
    loop {
        let next = naive_bisim_from(chain, &prune_definition(&literal_filter(chain, &r)));
        if next == r {
            return r;
        }
        r = next;
    }
}

pub type Vertex = Vec<((usize, usize), BigRational)>;

/// Cost of every basic feasible solution of the transportation problem
/// with supplies `a`, demands `b` and costs `c`, found by trying every set
/// of `m + n − 1` cells that forms a spanning tree.
pub fn vertex_values(a: &[BigRational], b: &[BigRational], c: &[Vec<f64>]) -> Vec<(f64, Vertex)> {
    let (m, n) = (a.len(), b.len());
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let k = m + n - 1;
    let mut out = Vec::new();
    for mask in 0u32..(1 << cells.len()) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let chosen: Vec<(usize, usize)> =
            cells.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &c)| c).collect();
        let Some(x) = solve_tree(m, n, &chosen, a, b) else { continue };
        if x.iter().any(|v| v.is_negative()) {
            continue;
        }
        let value = chosen
            .iter()
            .zip(&x)
            .map(|(&(i, j), v)| robust_bisim::probability::ratio_to_f64(v) * c[i][j])
            .sum();
        out.push((value, chosen.into_iter().zip(x).collect()));
    }
    out
}

/// Solves the flows on a tree by repeatedly peeling leaves; `None` if the
/// cells do not form a spanning tree.
fn solve_tree(m: usize, n: usize, cells: &[(usize, usize)], a: &[BigRational], b: &[BigRational]) -> Option<Vec<BigRational>> {
    let mut rest: Vec<BigRational> = a.iter().chain(b).cloned().collect();
    let mut alive = vec![true; cells.len()];
    let mut x = vec![BigRational::zero(); cells.len()];
    for _ in 0..cells.len() {
        let degree = |node: usize, alive: &[bool]| {
            cells
                .iter()
                .enumerate()
                .filter(|(k, &(i, j))| alive[*k] && (i == node || m + j == node))
                .map(|(k, _)| k)
                .collect::<Vec<_>>()
        };
        let leaf = (0..m + n).find_map(|node| {
            let incident = degree(node, &alive);
            (incident.len() == 1).then(|| (node, incident[0]))
        })?;
        let (node, k) = leaf;
        let (i, j) = cells[k];
        let other = if node == i { m + j } else { i };
        x[k] = rest[node].clone();
        rest[other] = &rest[other] - &x[k];
        rest[node] = BigRational::zero();
        alive[k] = false;
    }
    rest.iter().all(|r| r.is_zero()).then_some(x)
}

/// A random distribution on `0..size` with full support.
pub fn random_full_distribution(rng: &mut ChaCha8Rng, size: usize, offset: usize) -> Distribution {
    let weights: Vec<i64> = (0..size).map(|_| rng.gen_range(1..=6)).collect();
    let total: i64 = weights.iter().sum();
    Distribution::new(weights.iter().enumerate().map(|(i, &w)| (offset + i, q(w, total)))).unwrap()
}

pub fn is_one(x: &BigRational) -> bool {
    x.is_one()
}
