//! Small dense factorizations used by the oracles and probes: Cholesky
//! (log-determinants, SPD solves) and a pivoted-elimination rank check.

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
fn cholesky_factor(s: &Matrix) -> Result<Matrix> {
    if s.rows != s.cols {
        return Err(Error::shape(
            "cholesky",
            "square matrix".to_string(),
            format!("{}x{}", s.rows, s.cols),
        ));
    }
    let n = s.rows;
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = s.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(Error::Numeric(format!(
                        "cholesky failed at pivot {i}: {sum} (matrix not positive definite)"
                    )));
                }
                l.set(i, j, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// log(det S) for symmetric positive-definite S.
pub fn cholesky_logdet(s: &Matrix) -> Result<f64> {
    let l = cholesky_factor(s)?;
    let mut acc = 0.0;
    for i in 0..l.rows {
        acc += l.get(i, i).ln();
    }
    Ok(2.0 * acc)
}

/// Solve S X = B for symmetric positive-definite S (n x n) and B (n x k).
pub fn solve_spd(s: &Matrix, b: &Matrix) -> Result<Matrix> {
    if s.rows != b.rows {
        return Err(Error::shape(
            "solve_spd",
            format!("{} rhs rows", s.rows),
            format!("{}", b.rows),
        ));
    }
    let l = cholesky_factor(s)?;
    let n = s.rows;
    let k = b.cols;
    // Forward: L y = b, then backward: L^T x = y.
    let mut x = b.clone();
    for col in 0..k {
        for i in 0..n {
            let mut sum = x.get(i, col);
            for j in 0..i {
                sum -= l.get(i, j) * x.get(j, col);
            }
            x.set(i, col, sum / l.get(i, i));
        }
        for i in (0..n).rev() {
            let mut sum = x.get(i, col);
            for j in (i + 1)..n {
                sum -= l.get(j, i) * x.get(j, col);
            }
            x.set(i, col, sum / l.get(i, i));
        }
    }
    Ok(x)
}

/// Least-squares recovery: given T (m x p, m >= p, full column rank) and
/// observations X (n x m) whose rows are T @ latent, return the n x p matrix
/// of recovered latents (T's pseudo-inverse applied row-wise).
pub fn solve_least_squares(t: &Matrix, x: &Matrix) -> Result<Matrix> {
    if x.cols != t.rows {
        return Err(Error::shape(
            "solve_least_squares",
            format!("{} observation cols", t.rows),
            format!("{}", x.cols),
        ));
    }
    let gram = t.matmul_tn(t)?; // p x p
    let c = x.matmul(t)?; // n x p  (rows: x_s^T T)
    let z = solve_spd(&gram, &c.transpose())?; // p x n
    Ok(z.transpose())
}

/// Numerical rank by Gaussian elimination with partial pivoting.
pub fn matrix_rank(m: &Matrix, rel_tol: f64) -> usize {
    let mut a = m.clone();
    let rows = a.rows;
    let cols = a.cols;
    let max_abs = a.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if max_abs == 0.0 {
        return 0;
    }
    let tol = rel_tol * max_abs;
    let mut rank = 0;
    let mut pivot_row = 0;
    for col in 0..cols {
        if pivot_row >= rows {
            break;
        }
        let (best_row, best_val) = (pivot_row..rows)
            .map(|r| (r, a.get(r, col).abs()))
            .fold((pivot_row, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_val <= tol {
            continue;
        }
        if best_row != pivot_row {
            for c in 0..cols {
                let tmp = a.get(pivot_row, c);
                a.set(pivot_row, c, a.get(best_row, c));
                a.set(best_row, c, tmp);
            }
        }
        let pv = a.get(pivot_row, col);
        for r in (pivot_row + 1)..rows {
            let factor = a.get(r, col) / pv;
            if factor != 0.0 {
                for c in col..cols {
                    let v = a.get(r, c) - factor * a.get(pivot_row, c);
                    a.set(r, c, v);
                }
            }
        }
        rank += 1;
        pivot_row += 1;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logdet_of_diagonal() {
        let s = Matrix::from_fn(3, 3, |r, c| if r == c { (r + 1) as f64 } else { 0.0 });
        let ld = cholesky_logdet(&s).unwrap();
        assert!((ld - (1.0f64 * 2.0 * 3.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn spd_solve_roundtrip() {
        // S = A^T A + I is SPD.
        let a = Matrix::from_fn(4, 4, |r, c| ((r * 5 + c * 3) % 7) as f64 * 0.3 - 0.8);
        let mut s = a.matmul_tn(&a).unwrap();
        for i in 0..4 {
            let v = s.get(i, i) + 1.0;
            s.set(i, i, v);
        }
        let x_true = Matrix::from_fn(4, 2, |r, c| (r + c) as f64 * 0.5 - 1.0);
        let b = s.matmul(&x_true).unwrap();
        let x = solve_spd(&s, &b).unwrap();
        for (u, v) in x.data.iter().zip(&x_true.data) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn rank_detects_deficiency() {
        // Third row = row0 + row1.
        let mut m = Matrix::from_fn(3, 4, |r, c| ((r * 3 + c * 2) % 5) as f64 + 1.0);
        for c in 0..4 {
            let v = m.get(0, c) + m.get(1, c);
            m.set(2, c, v);
        }
        assert_eq!(matrix_rank(&m, 1e-10), 2);
        let full = Matrix::from_fn(4, 4, |r, c| if r == c { 2.0 } else { 0.1 });
        assert_eq!(matrix_rank(&full, 1e-10), 4);
    }

    #[test]
    fn not_pd_is_reported() {
        let s = Matrix::from_fn(2, 2, |r, c| if r == c { -1.0 } else { 0.0 });
        assert!(matches!(cholesky_logdet(&s), Err(Error::Numeric(_))));
    }
}
