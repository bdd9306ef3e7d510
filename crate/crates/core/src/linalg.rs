//! Small dense matrix helpers used by the period-matrix machinery.
//!
//! Everything here operates on matrices of at most a few rows/columns
//! (period matrices of low-genus curves), so plain Gaussian elimination
//! with partial pivoting is both adequate and fully deterministic.

use num_complex::Complex64;

pub type CMat = Vec<Vec<Complex64>>;
pub type RMat = Vec<Vec<f64>>;

pub fn cmat_zeros(rows: usize, cols: usize) -> CMat {
    vec![vec![Complex64::new(0.0, 0.0); cols]; rows]
}

pub fn cmat_identity(n: usize) -> CMat {
    let mut m = cmat_zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Complex64::new(1.0, 0.0);
    }
    m
}

pub fn cmat_mul(a: &CMat, b: &CMat) -> CMat {
    let (n, k) = (a.len(), b.len());
    let m = if k == 0 { 0 } else { b[0].len() };
    let mut out = cmat_zeros(n, m);
    for i in 0..n {
        for (l, brow) in b.iter().enumerate() {
            let ail = a[i][l];
            if ail == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..m {
                out[i][j] += ail * brow[j];
            }
        }
    }
    out
}

/// Multiply a complex matrix by an integer matrix on the right.
pub fn cmat_mul_int(a: &CMat, b: &[Vec<i64>]) -> CMat {
    let bc: CMat = b
        .iter()
        .map(|row| row.iter().map(|&x| Complex64::new(x as f64, 0.0)).collect())
        .collect();
    cmat_mul(a, &bc)
}

/// Gauss-Jordan inverse with partial pivoting. Returns `None` when the
/// pivot falls below `tol` times the largest entry.
pub fn cmat_inverse(a: &CMat, tol: f64) -> Option<CMat> {
    let n = a.len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter().map(|z| z.norm()))
        .fold(0.0_f64, f64::max)
        .max(1.0);
    let mut work = a.clone();
    let mut inv = cmat_identity(n);
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if work[r][col].norm() > work[piv][col].norm() {
                piv = r;
            }
        }
        if work[piv][col].norm() <= tol * scale {
            return None;
        }
        work.swap(col, piv);
        inv.swap(col, piv);
        let d = work[col][col];
        for j in 0..n {
            work[col][j] /= d;
            inv[col][j] /= d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = work[r][col];
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                let (w, v) = (work[col][j], inv[col][j]);
                work[r][j] -= f * w;
                inv[r][j] -= f * v;
            }
        }
    }
    Some(inv)
}

pub fn cmat_max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    let mut worst = 0.0_f64;
    for (ra, rb) in a.iter().zip(b.iter()) {
        for (x, y) in ra.iter().zip(rb.iter()) {
            worst = worst.max((x - y).norm());
        }
    }
    worst
}

/// Exact determinant of an integer matrix (fraction-free Bareiss in i128).
pub fn int_det(m: &[Vec<i64>]) -> i128 {
    let n = m.len();
    if n == 0 {
        return 1;
    }
    let mut a: Vec<Vec<i128>> = m
        .iter()
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            let swap = (k + 1..n).find(|&r| a[r][k] != 0);
            match swap {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
            a[i][k] = 0;
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

/// Row-echelon rank of a real matrix; entries below `tol * max_entry`
/// are treated as zero.
pub fn real_rank(m: &RMat, tol: f64) -> usize {
    real_echelon(m, tol).len()
}

/// Reduced rows of a real matrix (the nonzero rows of its echelon form).
pub fn real_echelon(m: &RMat, tol: f64) -> RMat {
    let rows = m.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = m[0].len();
    let scale = m
        .iter()
        .flat_map(|r| r.iter().map(|x| x.abs()))
        .fold(0.0_f64, f64::max)
        .max(1.0);
    let thresh = tol * scale;
    let mut a = m.clone();
    let mut out = Vec::new();
    let mut r0 = 0;
    for col in 0..cols {
        let mut piv = r0;
        for r in r0..rows {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if r0 >= rows || a[piv][col].abs() <= thresh {
            continue;
        }
        a.swap(r0, piv);
        let d = a[r0][col];
        for j in 0..cols {
            a[r0][j] /= d;
        }
        for r in 0..rows {
            if r != r0 {
                let f = a[r][col];
                if f != 0.0 {
                    for j in 0..cols {
                        let v = a[r0][j];
                        a[r][j] -= f * v;
                    }
                }
            }
        }
        out.push(a[r0].clone());
        r0 += 1;
        if r0 == rows {
            break;
        }
    }
    out
}

/// Basis of the real nullspace of `m` (solutions of m x = 0), with the
/// same thresholding convention as [`real_rank`].
pub fn real_nullspace(m: &RMat, tol: f64) -> RMat {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    if cols == 0 {
        return Vec::new();
    }
    if rows == 0 {
        let mut basis = Vec::new();
        for j in 0..cols {
            let mut v = vec![0.0; cols];
            v[j] = 1.0;
            basis.push(v);
        }
        return basis;
    }
    let ech = real_echelon(m, tol);
    let mut pivots = Vec::new();
    for row in &ech {
        let lead = row.iter().position(|x| x.abs() > 1e-13);
        if let Some(j) = lead {
            pivots.push(j);
        }
    }
    let mut basis = Vec::new();
    for free in 0..cols {
        if pivots.contains(&free) {
            continue;
        }
        let mut v = vec![0.0; cols];
        v[free] = 1.0;
        for (row, &pj) in ech.iter().zip(pivots.iter()).rev() {
            let mut s = 0.0;
            for j in pj + 1..cols {
                s += row[j] * v[j];
            }
            v[pj] = -s / row[pj];
        }
        basis.push(v);
    }
    basis
}


pub fn cmat_transpose(a: &CMat) -> CMat {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    (0..cols)
        .map(|j| (0..rows).map(|i| a[i][j]).collect())
        .collect()
}

pub fn cmat_conj_transpose(a: &CMat) -> CMat {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    (0..cols)
        .map(|j| (0..rows).map(|i| a[i][j].conj()).collect())
        .collect()
}

/// Complex column rank with the same thresholding convention as
/// [`real_rank`].
pub fn cmat_rank(m: &CMat, tol: f64) -> usize {
    cmat_echelon(m, tol).len()
}

fn cmat_echelon(m: &CMat, tol: f64) -> CMat {
    let rows = m.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = m[0].len();
    let scale = m
        .iter()
        .flat_map(|r| r.iter().map(|x| x.norm()))
        .fold(0.0_f64, f64::max)
        .max(1.0);
    let thresh = tol * scale;
    let mut a = m.to_vec();
    let mut out = Vec::new();
    let mut r0 = 0;
    for col in 0..cols {
        if r0 >= rows {
            break;
        }
        let mut piv = r0;
        for r in r0..rows {
            if a[r][col].norm() > a[piv][col].norm() {
                piv = r;
            }
        }
        if a[piv][col].norm() <= thresh {
            continue;
        }
        a.swap(r0, piv);
        let d = a[r0][col];
        for j in 0..cols {
            a[r0][j] /= d;
        }
        for r in 0..rows {
            if r != r0 {
                let f = a[r][col];
                if f.norm() != 0.0 {
                    for j in 0..cols {
                        let v = a[r0][j];
                        a[r][j] -= f * v;
                    }
                }
            }
        }
        out.push(a[r0].clone());
        r0 += 1;
    }
    out
}

/// Basis of the complex nullspace of `m` (solutions of m x = 0).
pub fn cmat_nullspace(m: &CMat, tol: f64) -> CMat {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    if cols == 0 {
        return Vec::new();
    }
    if rows == 0 {
        let mut basis = Vec::new();
        for j in 0..cols {
            let mut v = vec![Complex64::new(0.0, 0.0); cols];
            v[j] = Complex64::new(1.0, 0.0);
            basis.push(v);
        }
        return basis;
    }
    let ech = cmat_echelon(m, tol);
    let mut pivots = Vec::new();
    for row in &ech {
        if let Some(j) = row.iter().position(|x| x.norm() > 1e-13) {
            pivots.push(j);
        }
    }
    let mut basis = Vec::new();
    for free in 0..cols {
        if pivots.contains(&free) {
            continue;
        }
        let mut v = vec![Complex64::new(0.0, 0.0); cols];
        v[free] = Complex64::new(1.0, 0.0);
        for (row, &pj) in ech.iter().zip(pivots.iter()).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for j in pj + 1..cols {
                s += row[j] * v[j];
            }
            v[pj] = -s / row[pj];
        }
        basis.push(v);
    }
    basis
}

/// Determinant of a small real matrix by Gaussian elimination.
pub fn real_det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a = m.to_vec();
    let mut det = 1.0;
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        if a[piv][k] == 0.0 {
            return 0.0;
        }
        if piv != k {
            a.swap(piv, k);
            det = -det;
        }
        det *= a[k][k];
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                let v = a[k][j];
                a[i][j] -= f * v;
            }
        }
    }
    det
}
