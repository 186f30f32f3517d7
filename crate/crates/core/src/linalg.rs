//! Dense Gaussian elimination over any [`Scalar`].

use crate::scalar::Scalar;

/// Solves `a * x = b` for square `a`. Returns `None` when the system is singular.
///
/// Partial pivoting by absolute value; with exact scalars the choice only
/// affects intermediate sizes, never the answer.
pub fn solve<S: Scalar>(mut a: Vec<Vec<S>>, mut b: Vec<S>) -> Option<Vec<S>> {
    let n = b.len();
    assert_eq!(a.len(), n, "matrix must be square");
    for col in 0..n {
        let mut pivot = None;
        let mut best = S::zero();
        for row in col..n {
            let mag = a[row][col].abs();
            if mag > best && mag.exceeds(&S::zero()) {
                best = mag;
                pivot = Some(row);
            }
        }
        let pivot = pivot?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = S::one() / a[col][col].clone();
        for row in (col + 1)..n {
            if a[row][col].is_zero() {
                continue;
            }
            let factor = a[row][col].clone() * inv.clone();
            for k in col..n {
                let delta = factor.clone() * a[col][k].clone();
                a[row][k] = a[row][k].clone() - delta;
            }
            let delta = factor * b[col].clone();
            b[row] = b[row].clone() - delta;
        }
    }
    let mut x = vec![S::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row].clone();
        for k in (row + 1)..n {
            acc = acc - a[row][k].clone() * x[k].clone();
        }
        x[row] = acc / a[row][row].clone();
    }
    Some(x)
}
