//! Minimum-cost couplings: the transportation problem over
//! `Ω(μ, ν)` restricted to the supports of `μ` and `ν`.
//!
//! Solved with the primal transportation simplex (MODI potentials and
//! stepping-stone cycles). The initial basis comes from the North-West
//! corner rule and pivots follow Bland's rule (smallest improving cell
//! enters, smallest blocking cell leaves), so the result is deterministic.
//! Costs and potentials are `f64`; masses are either `f64` (values only)
//! or exact rationals (when the optimal vertex itself is needed).

use std::collections::VecDeque;
use std::ops::{AddAssign, SubAssign};

use num_rational::BigRational;
use num_traits::Zero;

use crate::chain::{Distribution, State};
use crate::coupling::Coupling;

/// Reduced costs below `-REDUCED_COST_EPS` are considered improving.
pub const REDUCED_COST_EPS: f64 = 1e-13;

const MAX_PIVOTS: usize = 10_000;

trait Mass: Clone + PartialOrd + Zero + for<'a> AddAssign<&'a Self> + for<'a> SubAssign<&'a Self> {}

impl Mass for f64 {}
impl Mass for BigRational {}

#[derive(Debug, Clone)]
pub struct TransportSolution {
    /// `Σ ω(u, v) · cost(u, v)` at the optimal vertex.
    pub value: f64,
    pub coupling: Coupling,
    pub pivots: usize,
}

#[derive(Debug)]
struct Basis<M> {
    /// Basic cells `(row, col)`; always `rows + cols − 1` of them.
    cells: Vec<(usize, usize)>,
    values: Vec<M>,
    pivots: usize,
}

fn north_west_basis<M: Mass>(supply: &[M], demand: &[M]) -> Basis<M> {
    let (m, n) = (supply.len(), demand.len());
    let mut a = supply.to_vec();
    let mut b = demand.to_vec();
    let mut cells = Vec::with_capacity(m + n - 1);
    let mut values = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let x = if a[i] <= b[j] { a[i].clone() } else { b[j].clone() };
        a[i] -= &x;
        b[j] -= &x;
        cells.push((i, j));
        values.push(x);
        if i == m - 1 && j == n - 1 {
            break;
        }
        // advance exactly one index so the basis stays a spanning tree
        if j == n - 1 || (i < m - 1 && a[i].is_zero()) {
            i += 1;
        } else {
            j += 1;
        }
    }
    Basis { cells, values, pivots: 0 }
}

/// Potentials `u` (rows) and `v` (columns) with `u_i + v_j = c_ij` on basic cells.
fn potentials(m: usize, n: usize, cells: &[(usize, usize)], cost: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m + n];
    for (k, &(i, j)) in cells.iter().enumerate() {
        adj[i].push(k);
        adj[m + j].push(k);
    }
    let mut pot = vec![f64::NAN; m + n];
    pot[0] = 0.0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(node) = queue.pop_front() {
        for &k in &adj[node] {
            let (i, j) = cells[k];
            let c = cost[i * n + j];
            if node < m && pot[m + j].is_nan() {
                pot[m + j] = c - pot[i];
                queue.push_back(m + j);
            } else if node >= m && pot[i].is_nan() {
                pot[i] = c - pot[m + j];
                queue.push_back(i);
            }
        }
    }
    let v = pot.split_off(m);
    (pot, v)
}

/// Basic cells on the tree path from column `col` to row `row`, in order.
fn tree_path(m: usize, n: usize, cells: &[(usize, usize)], row: usize, col: usize) -> Vec<usize> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m + n];
    for (k, &(i, j)) in cells.iter().enumerate() {
        adj[i].push(k);
        adj[m + j].push(k);
    }
    let start = m + col;
    let mut via: Vec<Option<usize>> = vec![None; adj.len()];
    let mut seen = vec![false; adj.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == row {
            break;
        }
        for &k in &adj[node] {
            let (i, j) = cells[k];
            let other = if node < m { m + j } else { i };
            if !seen[other] {
                seen[other] = true;
                via[other] = Some(k);
                queue.push_back(other);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = row;
    while node != start {
        let k = via[node].expect("basis is a spanning tree");
        path.push(k);
        let (i, j) = cells[k];
        node = if node < m { m + j } else { i };
    }
    path.reverse();
    path
}

fn solve<M: Mass>(cost: &[f64], supply: &[M], demand: &[M]) -> Basis<M> {
    let (m, n) = (supply.len(), demand.len());
    let mut basis = north_west_basis(supply, demand);
    while basis.pivots < MAX_PIVOTS {
        let (u, v) = potentials(m, n, &basis.cells, cost);
        let mut is_basic = vec![false; m * n];
        for &(i, j) in &basis.cells {
            is_basic[i * n + j] = true;
        }
        let entering = (0..m * n).find(|&idx| {
            !is_basic[idx] && cost[idx] - u[idx / n] - v[idx % n] < -REDUCED_COST_EPS
        });
        let Some(idx) = entering else { break };
        let (ei, ej) = (idx / n, idx % n);
        let path = tree_path(m, n, &basis.cells, ei, ej);
        // cells at even positions of the path lose mass
        let leaving_pos = path
            .iter()
            .step_by(2)
            .copied()
            .min_by(|&a, &b| {
                let (va, vb) = (&basis.values[a], &basis.values[b]);
                va.partial_cmp(vb)
                    .expect("masses are comparable")
                    .then_with(|| cell_index(basis.cells[a], n).cmp(&cell_index(basis.cells[b], n)))
            })
            .expect("cycle has a losing cell");
        let theta = basis.values[leaving_pos].clone();
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis.values[k] -= &theta;
            } else {
                basis.values[k] += &theta;
            }
        }
        basis.cells[leaving_pos] = (ei, ej);
        basis.values[leaving_pos] = theta;
        basis.pivots += 1;
    }
    basis
}

fn cell_index((i, j): (usize, usize), n: usize) -> usize {
    i * n + j
}

fn cost_matrix(cost: &impl Fn(State, State) -> f64, rows: &[State], cols: &[State]) -> Vec<f64> {
    rows.iter().flat_map(|&u| cols.iter().map(move |&v| cost(u, v))).collect()
}

/// The optimal value of the transportation problem, with `f64` masses.
pub fn min_transport_value(cost: impl Fn(State, State) -> f64, mu: &Distribution, nu: &Distribution) -> f64 {
    let rows: Vec<State> = mu.support().collect();
    let cols: Vec<State> = nu.support().collect();
    let c = cost_matrix(&cost, &rows, &cols);
    let supply: Vec<f64> = mu.iter().map(|(_, p)| p.to_f64()).collect();
    let demand: Vec<f64> = nu.iter().map(|(_, p)| p.to_f64()).collect();
    let basis = solve(&c, &supply, &demand);
    basis
        .cells
        .iter()
        .zip(&basis.values)
        .map(|(&(i, j), x)| x * c[i * cols.len() + j])
        .sum()
}

/// An optimal vertex of the coupling polytope for the given cost, computed
/// with exact masses.
pub fn min_transport(cost: impl Fn(State, State) -> f64, mu: &Distribution, nu: &Distribution) -> TransportSolution {
    let rows: Vec<State> = mu.support().collect();
    let cols: Vec<State> = nu.support().collect();
    let c = cost_matrix(&cost, &rows, &cols);
    let supply: Vec<BigRational> = mu.iter().map(|(_, p)| p.value().clone()).collect();
    let demand: Vec<BigRational> = nu.iter().map(|(_, p)| p.value().clone()).collect();
    let basis = solve(&c, &supply, &demand);
    let coupling = Coupling::from_entries(
        basis
            .cells
            .iter()
            .zip(basis.values)
            .map(|(&(i, j), x)| ((rows[i], cols[j]), x)),
    )
    .expect("basic feasible solutions are couplings");
    let value = coupling.expected(&cost);
    TransportSolution { value, coupling, pivots: basis.pivots }
}
