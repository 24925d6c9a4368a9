//! Dense complex linear algebra for the small (<= 8x8) matrices the engine
//! manipulates: partial-pivot inversion, column-pivoted rank, a Hermitian
//! Cholesky factorization for positive-definiteness checks.

use num_complex::Complex64;

pub type CMat = Vec<Vec<Complex64>>;

pub fn zeros(rows: usize, cols: usize) -> CMat {
    vec![vec![Complex64::new(0.0, 0.0); cols]; rows]
}

pub fn identity(n: usize) -> CMat {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Complex64::new(1.0, 0.0);
    }
    m
}

pub fn mat_mul(a: &CMat, b: &CMat) -> CMat {
    let rows = a.len();
    let inner = b.len();
    let cols = if inner > 0 { b[0].len() } else { 0 };
    let mut out = zeros(rows, cols);
    for i in 0..rows {
        for k in 0..inner {
            let aik = a[i][k];
            if aik.norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..cols {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn mat_vec(a: &CMat, x: &[Complex64]) -> Vec<Complex64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter()
        .flat_map(|row| row.iter())
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

/// Gauss-Jordan inverse with partial pivoting. `None` when a pivot falls
/// below `tol`.
pub fn invert(a: &CMat, tol: f64) -> Option<CMat> {
    let n = a.len();
    let mut work: Vec<Vec<Complex64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            assert_eq!(row.len(), n, "invert expects a square matrix");
            let mut ext = row.clone();
            ext.extend((0..n).map(|j| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)));
            ext
        })
        .collect();
    for col in 0..n {
        let (pivot_row, pivot_norm) = (col..n)
            .map(|r| (r, work[r][col].norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1))?;
        if pivot_norm < tol {
            return None;
        }
        work.swap(col, pivot_row);
        let pivot = work[col][col];
        for j in 0..2 * n {
            work[col][j] /= pivot;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = work[r][col];
            if factor.norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..2 * n {
                let sub = factor * work[col][j];
                work[r][j] -= sub;
            }
        }
    }
    Some(work.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Determinant by LU with partial pivoting.
pub fn determinant(a: &CMat) -> Complex64 {
    let n = a.len();
    let mut work = a.clone();
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let (pivot_row, pivot_norm) = (col..n)
            .map(|r| (r, work[r][col].norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if pivot_norm == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot_row != col {
            work.swap(col, pivot_row);
            det = -det;
        }
        let pivot = work[col][col];
        det *= pivot;
        for r in col + 1..n {
            let factor = work[r][col] / pivot;
            if factor.norm_sqr() == 0.0 {
                continue;
            }
            for j in col..n {
                let sub = factor * work[col][j];
                work[r][j] -= sub;
            }
        }
    }
    det
}

/// Numerical rank by column-pivoted elimination.
pub fn rank(a: &CMat, pivot_tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let rows = a.len();
    let cols = a[0].len();
    let mut work = a.clone();
    let mut rank = 0usize;
    let mut row = 0usize;
    let mut live_cols: Vec<usize> = (0..cols).collect();
    while row < rows && !live_cols.is_empty() {
        // pick the column (among the remaining) with the largest entry below `row`
        let (ci, pivot_row, pivot_norm) = live_cols
            .iter()
            .enumerate()
            .flat_map(|(ci, &c)| (row..rows).map(move |r| (ci, r, c)))
            .map(|(ci, r, c)| (ci, r, work[r][c].norm()))
            .max_by(|a, b| a.2.total_cmp(&b.2))
            .unwrap();
        if pivot_norm < pivot_tol {
            break;
        }
        let col = live_cols[ci];
        work.swap(row, pivot_row);
        let pivot = work[row][col];
        for r in row + 1..rows {
            let factor = work[r][col] / pivot;
            if factor.norm_sqr() == 0.0 {
                continue;
            }
            for c in 0..cols {
                let sub = factor * work[row][c];
                work[r][c] -= sub;
            }
        }
        live_cols.remove(ci);
        rank += 1;
        row += 1;
    }
    rank
}

/// Cholesky factorization of a Hermitian positive-definite matrix.
/// `None` when a diagonal pivot is not strictly positive (within slack for
/// round-off on the imaginary part).
pub fn hermitian_cholesky(a: &CMat) -> Option<CMat> {
    let n = a.len();
    let mut l = zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k].conj();
            }
            if i == j {
                if sum.re <= 0.0 || sum.im.abs() > 1e-9 * (1.0 + sum.re.abs()) {
                    return None;
                }
                l[i][j] = Complex64::new(sum.re.sqrt(), 0.0);
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Some(l)
}

fn norm_1(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    (0..a[0].len())
        .map(|j| a.iter().map(|row| row[j].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// One-norm condition estimate; `f64::INFINITY` when the inverse fails.
pub fn condition_estimate(a: &CMat, tol: f64) -> f64 {
    match invert(a, tol) {
        Some(inv) => norm_1(a) * norm_1(&inv),
        None => f64::INFINITY,
    }
}

pub fn conj_transpose(a: &CMat) -> CMat {
    if a.is_empty() {
        return Vec::new();
    }
    let rows = a.len();
    let cols = a[0].len();
    let mut out = zeros(cols, rows);
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[j][i] = v.conj();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn invert_known_two_by_two() {
        // [[1,1],[1,2]]^-1 = [[2,-1],[-1,1]]
        let a = vec![
            vec![c(1.0, 0.0), c(1.0, 0.0)],
            vec![c(1.0, 0.0), c(2.0, 0.0)],
        ];
        let inv = invert(&a, 1e-12).unwrap();
        let expect = [[c(2.0, 0.0), c(-1.0, 0.0)], [c(-1.0, 0.0), c(1.0, 0.0)]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((inv[i][j] - expect[i][j]).norm() < 1e-12);
            }
        }
        let prod = mat_mul(&a, &inv);
        let eye = identity(2);
        for i in 0..2 {
            for j in 0..2 {
                assert!((prod[i][j] - eye[i][j]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = vec![
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(2.0, 0.0), c(4.0, 0.0)],
        ];
        assert!(invert(&a, 1e-10).is_none());
        assert_eq!(rank(&a, 1e-10), 1);
        assert!(determinant(&a).norm() < 1e-12);
    }

    #[test]
    fn rank_of_rectangular_anchor() {
        // 2x1 column (1, z) has rank 1 for any z.
        let a = vec![vec![c(1.0, 0.0)], vec![c(0.3, 0.7)]];
        assert_eq!(rank(&a, 1e-10), 1);
        let zero = vec![vec![c(0.0, 0.0)], vec![c(0.0, 0.0)]];
        assert_eq!(rank(&zero, 1e-10), 0);
    }

    #[test]
    fn cholesky_accepts_positive_definite_only() {
        let pd = vec![
            vec![c(2.0, 0.0), c(0.0, 1.0)],
            vec![c(0.0, -1.0), c(2.0, 0.0)],
        ];
        let l = hermitian_cholesky(&pd).unwrap();
        let llh = mat_mul(&l, &conj_transpose(&l));
        for i in 0..2 {
            for j in 0..2 {
                assert!((llh[i][j] - pd[i][j]).norm() < 1e-12);
            }
        }
        let indef = vec![
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(-1.0, 0.0)],
        ];
        assert!(hermitian_cholesky(&indef).is_none());
    }

    #[test]
    fn determinant_complex_entries() {
        let a = vec![
            vec![c(0.0, 1.0), c(1.0, 0.0)],
            vec![c(1.0, 0.0), c(0.0, 1.0)],
        ];
        // det = i*i - 1 = -2
        assert!((determinant(&a) - c(-2.0, 0.0)).norm() < 1e-12);
    }
}
