//! Small dense linear programs in dictionary form.
//!
//! Only origin-feasible problems are handled:
//!
//! ```text
//! maximize c . x   subject to   A x <= b,  x >= 0,   with b >= 0
//! ```
//!
//! which is all the cell-membership margins of the extension need. Pivoting
//! follows Bland's rule, so the method terminates on degenerate problems.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Unbounded,
}

/// Solves `max c.x  s.t.  A x <= b, x >= 0` for `b >= 0`.
pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpOutcome> {
    let nv = c.len();
    let m = a.len();
    if b.len() != m || a.iter().any(|row| row.len() != nv) {
        return Err(Error::InvalidInput("constraint matrix shape does not match".into()));
    }
    if b.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Precondition("right-hand side must be nonnegative".into()));
    }
    // basic x_B[r] = rhs[r] - sum_j coef[r][j] x_N[j];  z = z0 + sum_j obj[j] x_N[j]
    let mut nonbasic: Vec<usize> = (0..nv).collect();
    let mut basis: Vec<usize> = (nv..nv + m).collect();
    let mut coef: Vec<Vec<f64>> = a.to_vec();
    let mut rhs: Vec<f64> = b.to_vec();
    let mut obj: Vec<f64> = c.to_vec();
    let mut z0 = 0.0;

    let limit = 50 * (nv + m + 1);
    for _ in 0..limit {
        let entering = (0..nv)
            .filter(|&j| obj[j] > PIVOT_TOL)
            .min_by_key(|&j| nonbasic[j]);
        let Some(j) = entering else {
            let mut x = vec![0.0; nv];
            for (r, &var) in basis.iter().enumerate() {
                if var < nv {
                    x[var] = rhs[r];
                }
            }
            return Ok(LpOutcome::Optimal { x, value: z0 });
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            if coef[r][j] > PIVOT_TOL {
                let ratio = rhs[r] / coef[r][j];
                let better = match leave {
                    None => true,
                    Some((lr, best)) => ratio < best || (ratio == best && basis[r] < basis[lr]),
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let Some((r, _)) = leave else {
            return Ok(LpOutcome::Unbounded);
        };

        let p = coef[r][j];
        rhs[r] /= p;
        for (l, c) in coef[r].iter_mut().enumerate() {
            *c = if l == j { 1.0 / p } else { *c / p };
        }
        let pivot_row = coef[r].clone();
        let pivot_rhs = rhs[r];
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = coef[i][j];
            if f == 0.0 {
                continue;
            }
            rhs[i] -= f * pivot_rhs;
            for l in 0..nv {
                coef[i][l] = if l == j { -f * pivot_row[l] } else { coef[i][l] - f * pivot_row[l] };
            }
            // clean tiny negatives from roundoff
            if rhs[i] < 0.0 && rhs[i] > -1e-12 {
                rhs[i] = 0.0;
            }
        }
        let f = obj[j];
        z0 += f * pivot_rhs;
        for l in 0..nv {
            obj[l] = if l == j { -f * pivot_row[l] } else { obj[l] - f * pivot_row[l] };
        }
        std::mem::swap(&mut nonbasic[j], &mut basis[r]);
    }
    Err(Error::Numerical(format!("simplex did not terminate within {limit} pivots")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(out: LpOutcome) -> (Vec<f64>, f64) {
        match out {
            LpOutcome::Optimal { x, value } => (x, value),
            LpOutcome::Unbounded => panic!("unexpected unbounded"),
        }
    }

    #[test]
    fn textbook_problem() {
        // max 3x + 2y  s.t. x + y <= 4, x + 3y <= 6, x <= 3
        let (x, v) = optimal(
            maximize(&[3.0, 2.0], &[vec![1.0, 1.0], vec![1.0, 3.0], vec![1.0, 0.0]], &[4.0, 6.0, 3.0]).unwrap(),
        );
        assert!((v - 11.0).abs() < 1e-12);
        assert!((x[0] - 3.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_direction() {
        let out = maximize(&[1.0, 0.0], &[vec![-1.0, 1.0]], &[1.0]).unwrap();
        assert_eq!(out, LpOutcome::Unbounded);
    }

    #[test]
    fn degenerate_vertex_terminates() {
        // several constraints tight at the origin
        let a = vec![vec![1.0, -1.0], vec![-1.0, 1.0], vec![1.0, 1.0], vec![2.0, -2.0]];
        let (x, v) = optimal(maximize(&[1.0, 1.0], &a, &[0.0, 0.0, 2.0, 0.0]).unwrap());
        assert!((v - 2.0).abs() < 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_infeasible_origin() {
        assert!(maximize(&[1.0], &[vec![1.0]], &[-1.0]).is_err());
    }
}
