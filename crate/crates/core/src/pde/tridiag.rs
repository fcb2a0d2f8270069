//! Thomas algorithm for tridiagonal systems.

use crate::error::{Error, Result};

/// Solve `A x = rhs` where `A` has sub-diagonal `lower`, diagonal `diag` and
/// super-diagonal `upper`. `lower[0]` and `upper[n-1]` are ignored.
///
/// `scratch` must have the same length as `diag`; `out` receives the solution.
pub fn solve_into(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
    scratch: &mut [f64],
    out: &mut [f64],
) -> Result<()> {
    let n = diag.len();
    if n == 0 || lower.len() != n || upper.len() != n || rhs.len() != n || scratch.len() != n || out.len() != n {
        return Err(Error::InvalidInput("tridiagonal system has inconsistent lengths".into()));
    }
    // Forward sweep: scratch holds the modified super-diagonal, out the modified rhs.
    let mut pivot = diag[0];
    if pivot == 0.0 {
        return Err(Error::InvalidInput("zero pivot in tridiagonal solve".into()));
    }
    scratch[0] = upper[0] / pivot;
    out[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * scratch[i - 1];
        if pivot == 0.0 {
            return Err(Error::InvalidInput(format!("zero pivot in tridiagonal solve at row {i}")));
        }
        scratch[i] = upper[i] / pivot;
        out[i] = (rhs[i] - lower[i] * out[i - 1]) / pivot;
    }
    // Back substitution.
    for i in (0..n - 1).rev() {
        out[i] -= scratch[i] * out[i + 1];
    }
    Ok(())
}

/// Allocating convenience wrapper around [`solve_into`].
pub fn solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut scratch = vec![0.0; n];
    let mut out = vec![0.0; n];
    solve_into(lower, diag, upper, rhs, &mut scratch, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn multiply(lower: &[f64], diag: &[f64], upper: &[f64], x: &[f64]) -> Vec<f64> {
        let n = diag.len();
        (0..n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    #[test]
    fn solves_small_system() {
        // [2 1 0; 1 3 1; 0 1 2] x = [3 5 3] -> x = [1 1 1]
        let x = solve(&[0.0, 1.0, 1.0], &[2.0, 3.0, 2.0], &[1.0, 1.0, 0.0], &[3.0, 5.0, 3.0]).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_row() {
        assert_eq!(solve(&[0.0], &[4.0], &[0.0], &[2.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn rejects_zero_pivot_and_bad_lengths() {
        assert!(solve(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(solve(&[0.0], &[1.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn residual_is_small_for_dominant_systems(
            rows in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -5.0f64..5.0), 2..60)
        ) {
            let n = rows.len();
            let lower: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let upper: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let diag: Vec<f64> = rows.iter().map(|r| 2.5 + r.2.abs()).collect();
            let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
            let x = solve(&lower, &diag, &upper, &rhs).unwrap();
            let back = multiply(&lower, &diag, &upper, &x);
            for (a, b) in back.iter().zip(&rhs) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
