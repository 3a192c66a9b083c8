//! Dense tableau simplex for `max c.x  s.t.  A x <= b, x >= 0` with `b >= 0`.
//!
//! The slack basis is feasible from the start, so no phase one is needed.
//! Pivoting follows Bland's rule (lowest-index entering column, lowest-index
//! leaving basic variable on ratio ties), which rules out cycling.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One nonnegative multiplier per constraint row.
    pub duals: Vec<f64>,
    pub pivots: usize,
}

/// Solve `max c.x` subject to `rows[r].x <= rhs[r]` and `x >= 0`.
pub fn simplex_solve(rows: &[Vec<f64>], rhs: &[f64], objective: &[f64]) -> Result<SimplexSolution> {
    let m = rows.len();
    let n = objective.len();
    if rhs.len() != m {
        return Err(Error::Domain(format!("{m} constraint rows but {} right-hand sides", rhs.len())));
    }
    if let Some(r) = rows.iter().position(|row| row.len() != n) {
        return Err(Error::Domain(format!("row {r} has {} coefficients, expected {n}", rows[r].len())));
    }
    if let Some(b) = rhs.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        return Err(Error::Domain(format!("right-hand side {b} must be finite and nonnegative")));
    }

    let width = n + m + 1;
    let mut tab = vec![0.0; m * width];
    for r in 0..m {
        let line = &mut tab[r * width..(r + 1) * width];
        line[..n].copy_from_slice(&rows[r]);
        line[n + r] = 1.0;
        line[width - 1] = rhs[r];
    }
    // reduced costs c_j - z_j; last entry holds -z
    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(objective);
    let mut basis: Vec<usize> = (n..n + m).collect();

    let mut pivots = 0;
    while let Some(enter) = (0..n + m).find(|&j| cost[j] > PIVOT_EPS) {

        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            let a = tab[r * width + enter];
            if a > PIVOT_EPS {
                let ratio = tab[r * width + width - 1] / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((best, br)) => {
                        if ratio < br - 1e-13 || (ratio <= br + 1e-13 && basis[r] < basis[best]) {
                            Some((r, ratio))
                        } else {
                            Some((best, br))
                        }
                    }
                };
            }
        }
        let Some((row, _)) = leave else {
            return Err(Error::Unbounded);
        };

        pivot(&mut tab, &mut cost, width, m, row, enter);
        basis[row] = enter;
        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(Error::NoConvergence { what: "simplex", iterations: pivots });
        }
    }

    let mut x = vec![0.0; n];
    for (r, &b) in basis.iter().enumerate() {
        if b < n {
            x[b] = tab[r * width + width - 1].max(0.0);
        }
    }
    let duals = (0..m).map(|r| (-cost[n + r]).max(0.0)).collect();
    Ok(SimplexSolution { x, objective: -cost[width - 1], duals, pivots })
}

fn pivot(tab: &mut [f64], cost: &mut [f64], width: usize, m: usize, row: usize, col: usize) {
    let p = tab[row * width + col];
    for v in &mut tab[row * width..(row + 1) * width] {
        *v /= p;
    }
    let pivot_row: Vec<f64> = tab[row * width..(row + 1) * width].to_vec();
    for r in (0..m).filter(|&r| r != row) {
        let f = tab[r * width + col];
        if f != 0.0 {
            for (v, pv) in tab[r * width..(r + 1) * width].iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            tab[r * width + col] = 0.0;
        }
    }
    let f = cost[col];
    for (v, pv) in cost.iter_mut().zip(&pivot_row) {
        *v -= f * pv;
    }
    cost[col] = 0.0;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bound() {
        let s = simplex_solve(&[vec![1.0]], &[1.0], &[1.0]).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!((s.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_rows() {
        let s = simplex_solve(&[vec![1.0, 1.0], vec![1.0, 0.0]], &[1.0, 0.3], &[1.0, 1.0]).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!((s.x[0] + s.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_is_reported() {
        assert_eq!(simplex_solve(&[vec![1.0, -1.0]], &[1.0], &[0.0, 1.0]), Err(Error::Unbounded));
    }

    #[test]
    fn rejects_negative_rhs_and_ragged_rows() {
        assert!(simplex_solve(&[vec![1.0]], &[-1.0], &[1.0]).is_err());
        assert!(simplex_solve(&[vec![1.0, 2.0]], &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn degenerate_problem_terminates() {
        // classic cycling example under the largest-coefficient rule
        let rows = vec![
            vec![0.5, -5.5, -2.5, 9.0],
            vec![0.5, -1.5, -0.5, 1.0],
            vec![1.0, 0.0, 0.0, 0.0],
        ];
        let s = simplex_solve(&rows, &[0.0, 0.0, 1.0], &[10.0, -57.0, -9.0, -24.0]).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-9);
    }
}
