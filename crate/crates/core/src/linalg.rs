//! Small sparse toolkit for the symmetric positive definite systems that
//! appear in Newton steps: CSR storage, IC(0)-preconditioned CG, and a
//! tridiagonal direct solve for 1D problems.

use crate::error::{Error, Result, Trace};

/// Symmetric matrix in CSR form with sorted column indices per row.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
    diag: Vec<usize>,
}

impl CsrMatrix {
    /// Builds an all-zero matrix with the given (row-wise) sparsity pattern.
    /// Each row must contain its diagonal.
    pub fn from_pattern(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut diag = Vec::with_capacity(n);
        row_ptr.push(0);
        for (i, mut r) in rows.into_iter().enumerate() {
            r.sort_unstable();
            r.dedup();
            let start = cols.len();
            let d = r.iter().position(|&c| c == i).expect("pattern row lacks its diagonal");
            diag.push(start + d);
            cols.extend(r);
            row_ptr.push(cols.len());
        }
        let vals = vec![0.0; cols.len()];
        Self { n, row_ptr, cols, vals, diag }
    }

    pub fn clear(&mut self) {
        self.vals.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Position of entry `(i, j)`; panics if it is not in the pattern.
    pub fn slot(&self, i: usize, j: usize) -> usize {
        let r = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        self.row_ptr[i] + r.binary_search(&j).expect("entry outside sparsity pattern")
    }

    pub fn diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        self.diag.iter().map(|&k| self.vals[k])
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[i] = acc;
        }
    }

    /// True when the matrix is tridiagonal in natural order.
    pub fn is_tridiagonal(&self) -> bool {
        (0..self.n).all(|i| self.cols[self.row_ptr[i]..self.row_ptr[i + 1]].iter().all(|&c| c + 1 >= i && c <= i + 1))
    }
}

/// Incomplete Cholesky factor with the sparsity of the lower triangle.
struct Ic0 {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Ic0 {
    /// Factors `A + shift * diag(A)`; fails on a nonpositive pivot.
    fn factor(a: &CsrMatrix, shift: f64) -> Option<Self> {
        let n = a.n;
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.cols[k];
                if j <= i {
                    cols.push(j);
                    let mut v = a.vals[k];
                    if j == i {
                        v *= 1.0 + shift;
                    }
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        // row-oriented IC(0): L[i][j] = (A[i][j] - sum_k L[i][k] L[j][k]) / L[j][j]
        for i in 0..n {
            let (ri0, ri1) = (row_ptr[i], row_ptr[i + 1]);
            for p in ri0..ri1 {
                let j = cols[p];
                let (rj0, rj1) = (row_ptr[j], row_ptr[j + 1]);
                // sparse dot of row i (cols < j) and row j (cols < j)
                let mut s = 0.0;
                let (mut a1, mut b1) = (ri0, rj0);
                while a1 < p && b1 < rj1 - 1 {
                    let (ca, cb) = (cols[a1], cols[b1]);
                    if ca == cb {
                        s += vals[a1] * vals[b1];
                        a1 += 1;
                        b1 += 1;
                    } else if ca < cb {
                        a1 += 1;
                    } else {
                        b1 += 1;
                    }
                }
                if j == i {
                    let d = vals[p] - s;
                    if !(d > 0.0) || !d.is_finite() {
                        return None;
                    }
                    vals[p] = d.sqrt();
                } else {
                    vals[p] = (vals[p] - s) / vals[rj1 - 1];
                }
            }
        }
        Some(Self { n, row_ptr, cols, vals })
    }

    fn solve(&self, r: &[f64], z: &mut [f64]) {
        // L y = r
        for i in 0..self.n {
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut s = r[i];
            for k in a..b - 1 {
                s -= self.vals[k] * z[self.cols[k]];
            }
            z[i] = s / self.vals[b - 1];
        }
        // L^T x = y
        for i in (0..self.n).rev() {
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            z[i] /= self.vals[b - 1];
            let zi = z[i];
            for k in a..b - 1 {
                z[self.cols[k]] -= self.vals[k] * zi;
            }
        }
    }
}

/// Preconditioned conjugate gradients; returns the iteration count.
pub fn pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], rel_tol: f64, max_iter: usize) -> Result<usize> {
    let n = a.n;
    let mut shift = 0.0;
    let pre = loop {
        match Ic0::factor(a, shift) {
            Some(f) => break f,
            None if shift < 1.0 => shift = if shift == 0.0 { 1e-3 } else { shift * 10.0 },
            None => return Err(Error::Domain("incomplete Cholesky breakdown: matrix is not positive definite".into())),
        }
    };
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z = vec![0.0; n];
    pre.solve(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        if norm(&r) <= rel_tol * bnorm {
            return Ok(it);
        }
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Domain("CG met a non-positive curvature direction".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        pre.solve(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if norm(&r) <= rel_tol * bnorm {
        return Ok(max_iter);
    }
    Err(Error::IterationLimit {
        what: "conjugate gradients",
        iterations: max_iter,
        residual: norm(&r) / bnorm,
        last: None,
        history: Trace::default(),
    })
}

/// Thomas algorithm for a symmetric positive definite tridiagonal matrix.
pub fn solve_tridiagonal(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n;
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            let j = a.cols[k];
            if j + 1 == i {
                lower[i] = a.vals[k];
            } else if j == i {
                diag[i] = a.vals[k];
            } else {
                upper[i] = a.vals[k];
            }
        }
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        let m = diag[i] - if i > 0 { lower[i] * c[i - 1] } else { 0.0 };
        if !(m.abs() > 0.0) || !m.is_finite() {
            return Err(Error::Domain("singular tridiagonal system".into()));
        }
        c[i] = upper[i] / m;
        d[i] = (b[i] - if i > 0 { lower[i] * d[i - 1] } else { 0.0 }) / m;
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = d[i] - if i + 1 < n { c[i] * x[i + 1] } else { 0.0 };
    }
    Ok(x)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 5-point Laplacian on an m x m interior grid.
    fn laplacian(m: usize) -> CsrMatrix {
        let n = m * m;
        let mut rows = vec![Vec::new(); n];
        for j in 0..m {
            for i in 0..m {
                let k = i + m * j;
                rows[k].push(k);
                if i > 0 {
                    rows[k].push(k - 1);
                }
                if i + 1 < m {
                    rows[k].push(k + 1);
                }
                if j > 0 {
                    rows[k].push(k - m);
                }
                if j + 1 < m {
                    rows[k].push(k + m);
                }
            }
        }
        let mut a = CsrMatrix::from_pattern(rows);
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                a.vals[k] = if a.cols[k] == i { 4.0 } else { -1.0 };
            }
        }
        a
    }

    #[test]
    fn pcg_solves_laplacian() {
        let a = laplacian(30);
        let xs: Vec<f64> = (0..a.n).map(|i| ((i * 7919) % 101) as f64 / 101.0).collect();
        let mut b = vec![0.0; a.n];
        a.mul_vec(&xs, &mut b);
        let mut x = vec![0.0; a.n];
        pcg(&a, &b, &mut x, 1e-13, 1000).unwrap();
        for (u, v) in x.iter().zip(&xs) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn tridiagonal_matches_direct() {
        let n = 50;
        let mut rows = vec![Vec::new(); n];
        for i in 0..n {
            rows[i].push(i);
            if i > 0 {
                rows[i].push(i - 1);
            }
            if i + 1 < n {
                rows[i].push(i + 1);
            }
        }
        let mut a = CsrMatrix::from_pattern(rows);
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                a.vals[k] = if a.cols[k] == i { 2.5 + (i % 3) as f64 } else { -1.0 };
            }
        }
        assert!(a.is_tridiagonal());
        let xs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b = vec![0.0; n];
        a.mul_vec(&xs, &mut b);
        let x = solve_tridiagonal(&a, &b).unwrap();
        for (u, v) in x.iter().zip(&xs) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}
