//! Dense Gaussian elimination over `f64` and over exact rationals.

use num_rational::BigRational;
use num_traits::Zero;

pub trait Scalar: Clone + Zero + PartialEq {
    /// Larger is a better pivot; `None` means the entry is unusable (zero).
    fn pivot_score(&self) -> Option<f64>;
    fn sub_mul(&mut self, factor: &Self, x: &Self);
    fn div(&self, by: &Self) -> Self;
}

impl Scalar for f64 {
    fn pivot_score(&self) -> Option<f64> {
        (self.abs() > 1e-300).then(|| self.abs())
    }

    fn sub_mul(&mut self, factor: &Self, x: &Self) {
        *self -= factor * x;
    }

    fn div(&self, by: &Self) -> Self {
        self / by
    }
}

impl Scalar for BigRational {
    fn pivot_score(&self) -> Option<f64> {
        // any nonzero pivot is exact; prefer the first one found
        (!self.is_zero()).then_some(0.0)
    }

    fn sub_mul(&mut self, factor: &Self, x: &Self) {
        if !factor.is_zero() && !x.is_zero() {
            *self -= factor * x;
        }
    }

    fn div(&self, by: &Self) -> Self {
        self / by
    }
}

/// Solves `A x = b` for square `A`. Returns `None` if `A` is singular.
pub fn solve<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    assert!(a.len() == n && a.iter().all(|row| row.len() == n), "system must be square");
    for col in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for (row, r) in a.iter().enumerate().skip(col) {
            if let Some(score) = r[col].pivot_score() {
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((row, score));
                }
            }
        }
        let (pivot, _) = best?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for (offset, row) in lower.iter_mut().enumerate() {
            if row[col].is_zero() {
                continue;
            }
            let factor = row[col].div(&pivot_row[col]);
            for k in col..n {
                row[k].sub_mul(&factor, &pivot_row[k]);
            }
            let (bu, bl) = b.split_at_mut(col + 1);
            bl[offset].sub_mul(&factor, &bu[col]);
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row].clone();
        for k in row + 1..n {
            acc.sub_mul(&a[row][k], &x[k]);
        }
        x[row] = acc.div(&a[row][row]);
    }
    Some(x)
}
