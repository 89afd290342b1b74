//! Dense linear algebra for the implicit time stepper.
//!
//! The Newton systems are dense (the operator couples every pair of nodes),
//! diagonally dominant, and solved once per Newton iteration, so a plain LU
//! factorization with partial pivoting is both sufficient and predictable.

use crate::error::{Error, Result};

/// Row-major dense matrix factored in place.
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    pivots: Vec<usize>,
}

/// Factors an n×n row-major matrix A = P·L·U, consuming the storage.
pub fn lu_factor(mut a: Vec<f64>, n: usize) -> Result<LuFactors> {
    if a.len() != n * n {
        return Err(Error::DimensionMismatch(format!(
            "matrix storage {} does not hold an {n}x{n} matrix",
            a.len()
        )));
    }
    let mut pivots = vec![0usize; n];
    for col in 0..n {
        // partial pivot: largest magnitude on or below the diagonal
        let mut p = col;
        let mut best = a[col * n + col].abs();
        for row in col + 1..n {
            let v = a[row * n + col].abs();
            if v > best {
                best = v;
                p = row;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return Err(Error::SingularSystem(col));
        }
        pivots[col] = p;
        if p != col {
            for k in 0..n {
                a.swap(col * n + k, p * n + k);
            }
        }
        let inv = 1.0 / a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] * inv;
            a[row * n + col] = factor;
            if factor != 0.0 {
                let (upper, lower) = a.split_at_mut(row * n);
                let src = &upper[col * n + col + 1..col * n + n];
                let dst = &mut lower[col + 1..n];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d -= factor * s;
                }
            }
        }
    }
    Ok(LuFactors { n, lu: a, pivots })
}

impl LuFactors {
    /// Solves A x = b in place.
    pub fn solve(&self, b: &mut [f64]) -> Result<()> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side length {} for an {n}x{n} system",
                b.len()
            )));
        }
        for col in 0..n {
            b.swap(col, self.pivots[col]);
        }
        // forward substitution with unit lower triangle
        for row in 1..n {
            let mut acc = b[row];
            for (k, bk) in b[..row].iter().enumerate() {
                acc -= self.lu[row * n + k] * bk;
            }
            b[row] = acc;
        }
        // back substitution
        for row in (0..n).rev() {
            let mut acc = b[row];
            for k in row + 1..n {
                acc -= self.lu[row * n + k] * b[k];
            }
            b[row] = acc / self.lu[row * n + row];
        }
        Ok(())
    }
}

/// One-shot solve of A x = b.
pub fn solve_dense(a: Vec<f64>, n: usize, b: &mut [f64]) -> Result<()> {
    lu_factor(a, n)?.solve(b)
}
