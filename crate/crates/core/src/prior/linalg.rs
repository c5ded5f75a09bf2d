//! Dense Hermitian positive-definite algebra for small systems.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Matrix = Vec<Vec<Complex64>>;

pub(crate) fn zeros(rows: usize, cols: usize) -> Matrix {
    vec![vec![Complex64::new(0.0, 0.0); cols]; rows]
}

/// Lower-triangular L with L·Lᴴ = a.
pub(crate) fn cholesky(a: &Matrix) -> Result<Matrix> {
    let n = a.len();
    let mut l = zeros(n, n);
    for j in 0..n {
        let mut d = a[j][j].re;
        for k in 0..j {
            d -= l[j][k].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Singular(format!("matrix not positive definite at pivot {j} ({d:e})")));
        }
        let djj = d.sqrt();
        l[j][j] = Complex64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k].conj();
            }
            l[i][j] = s / djj;
        }
    }
    Ok(l)
}

/// Solves (L·Lᴴ) x = b.
pub(crate) fn cholesky_solve(l: &Matrix, b: &[Complex64]) -> Vec<Complex64> {
    let n = l.len();
    let mut z = b.to_vec();
    for i in 0..n {
        let mut s = z[i];
        for k in 0..i {
            s -= l[i][k] * z[k];
        }
        z[i] = s / l[i][i];
    }
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[k][i].conj() * z[k];
        }
        z[i] = s / l[i][i];
    }
    z
}

pub(crate) fn cholesky_log_det(l: &Matrix) -> f64 {
    l.iter().enumerate().map(|(i, row)| 2.0 * row[i].re.ln()).sum()
}

pub(crate) fn cholesky_inverse(l: &Matrix) -> Matrix {
    let n = l.len();
    let mut inv = zeros(n, n);
    let mut e = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        e[j] = Complex64::new(1.0, 0.0);
        let col = cholesky_solve(l, &e);
        for i in 0..n {
            inv[i][j] = col[i];
        }
        e[j] = Complex64::new(0.0, 0.0);
    }
    inv
}

pub(crate) fn mat_vec(a: &Matrix, x: &[Complex64]) -> Vec<Complex64> {
    a.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

/// Aᴴ·x.
pub(crate) fn adjoint_vec(a: &Matrix, x: &[Complex64], cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); cols];
    for (row, xi) in a.iter().zip(x) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v.conj() * xi;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_hermitian_system() {
        let c = Complex64::new;
        let a = vec![
            vec![c(4.0, 0.0), c(1.0, 1.0), c(0.0, -0.5)],
            vec![c(1.0, -1.0), c(3.0, 0.0), c(0.2, 0.0)],
            vec![c(0.0, 0.5), c(0.2, 0.0), c(2.0, 0.0)],
        ];
        let l = cholesky(&a).unwrap();
        let b = vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 2.0)];
        let x = cholesky_solve(&l, &b);
        let ax = mat_vec(&a, &x);
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).norm() < 1e-12);
        }
        let inv = cholesky_inverse(&l);
        let x2 = mat_vec(&inv, &b);
        for (u, v) in x.iter().zip(&x2) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let c = Complex64::new;
        let a = vec![vec![c(1.0, 0.0), c(2.0, 0.0)], vec![c(2.0, 0.0), c(1.0, 0.0)]];
        assert!(matches!(cholesky(&a), Err(Error::Singular(_))));
    }
}
