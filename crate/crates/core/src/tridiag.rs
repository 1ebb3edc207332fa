//! Thomas algorithm for tridiagonal systems.

/// Solve `A x = d` for tridiagonal `A` with sub-diagonal `lower` (entry 0
/// unused), diagonal `diag` and super-diagonal `upper` (last entry unused).
///
/// Panics on a zero pivot; every system assembled by the solvers in this
/// crate is strictly diagonally dominant, so that indicates a bug.
pub fn solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    assert!(n > 0, "empty tridiagonal system");
    assert!(lower.len() == n && upper.len() == n && rhs.len() == n);

    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    assert!(beta != 0.0, "zero pivot at row 0");
    rhs[0] /= beta;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i - 1];
        assert!(beta != 0.0 && beta.is_finite(), "zero pivot at row {i}");
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let lower = [0.0, -1.0, -1.0];
        let diag = [2.0, 2.0, 2.0];
        let upper = [-1.0, -1.0, 0.0];
        let mut d = [1.0, 0.0, 1.0];
        solve(&lower, &diag, &upper, &mut d);
        for v in d {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_dense_product() {
        let n = 50;
        let lower: Vec<f64> = (0..n).map(|i| -0.3 - 0.01 * i as f64).collect();
        let upper: Vec<f64> = (0..n).map(|i| -0.7 + 0.005 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 2.5 + (i as f64).sin()).collect();
        let x: Vec<f64> = (0..n).map(|i| (0.3 * i as f64).cos()).collect();
        let mut d: Vec<f64> = (0..n)
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
            .collect();
        solve(&lower, &diag, &upper, &mut d);
        for (a, b) in d.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
