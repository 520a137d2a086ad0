//! Dense Gaussian elimination with partial pivoting.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Solves `a x = b` for square `a`. Rows of `a` are consumed.
pub fn solve<S: Scalar>(mut a: Vec<Vec<S>>, mut b: Vec<S>) -> Result<Vec<S>> {
    let n = b.len();
    if a.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(Error::Argument("linear system is not square".into()));
    }
    for col in 0..n {
        let pivot = (col..n)
            .filter(|&r| a[r][col] != S::zero())
            .max_by(|&i, &j| {
                a[i][col]
                    .abs_val()
                    .partial_cmp(&a[j][col].abs_val())
                    .unwrap_or(std::cmp::Ordering::Equal)
                    // earliest row wins ties
                    .then(j.cmp(&i))
            })
            .ok_or(Error::Singular)?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for (offset, row) in lower.iter_mut().enumerate() {
            if row[col] == S::zero() {
                continue;
            }
            let factor = row[col].clone() / pivot_row[col].clone();
            row[col] = S::zero();
            for k in col + 1..n {
                let delta = factor.clone() * pivot_row[k].clone();
                row[k] = row[k].clone() - delta;
            }
            let r = col + 1 + offset;
            b[r] = b[r].clone() - factor * b[col].clone();
        }
    }
    let mut x = vec![S::zero(); n];
    for i in (0..n).rev() {
        let mut acc = b[i].clone();
        for k in i + 1..n {
            acc = acc - a[i][k].clone() * x[k].clone();
        }
        x[i] = acc / a[i][i].clone();
    }
    Ok(x)
}
