//! Dense symmetric positive-definite solves for the model fitter.
//! Matrices are row-major `Vec<f64>` of length `n * n`.

/// Lower-triangular Cholesky factor, or `None` when the matrix is not
/// positive definite (within floating point).
pub(crate) fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solve `A x = b` for SPD `A` via its Cholesky factor.
pub(crate) fn solve_spd(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let l = cholesky(a, n)?;
    Some(solve_with_factor(&l, b, n))
}

fn solve_with_factor(l: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    // L y = b
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    // L^T x = y
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    x
}

/// Inverse of an SPD matrix, column by column.
pub(crate) fn invert_spd(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let l = cholesky(a, n)?;
    let mut inv = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = solve_with_factor(&l, &e, n);
        e[j] = 0.0;
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_known_system() {
        // [[4,2],[2,3]] x = [8, 7] => x = [1, 2]... check: 4+4=8, 2+6=8? No:
        // solve explicitly: x = A^{-1} b with det 8, A^{-1} = [[3,-2],[-2,4]]/8.
        let a = [4.0, 2.0, 2.0, 3.0];
        let b = [8.0, 7.0];
        let x = solve_spd(&a, &b, 2).unwrap();
        assert!((x[0] - (3.0 * 8.0 - 2.0 * 7.0) / 8.0).abs() < 1e-12);
        assert!((x[1] - (-2.0 * 8.0 + 4.0 * 7.0) / 8.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = [4.0, 2.0, 1.0, 2.0, 5.0, 3.0, 1.0, 3.0, 6.0];
        let inv = invert_spd(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += a[i * 3 + k] * inv[k * 3 + j];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-10, "({i},{j}) = {s}");
            }
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = [1.0, 2.0, 2.0, 1.0]; // eigenvalues 3 and -1
        assert!(cholesky(&a, 2).is_none());
        // Singular (rank 1) as well.
        let s = [1.0, 1.0, 1.0, 1.0];
        assert!(cholesky(&s, 2).is_none());
    }
}
