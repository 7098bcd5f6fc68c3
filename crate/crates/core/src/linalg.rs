//! Dense symmetric positive definite kernels on row-major buffers.
//!
//! The cutting-plane loop factors and inverts `k x k` matrices several times
//! per iteration, so the kernels are blocked around a GEMM update.

use crate::error::{Error, Result};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|x| *x = 0.0);
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Adds `scale * v v^T` for a sparse `v`, touching only the lower triangle.
    pub fn add_sparse_outer_lower(&mut self, idx: &[usize], val: &[f64], scale: f64) {
        for (p, &i) in idx.iter().enumerate() {
            let vi = scale * val[p];
            let row = &mut self.data[i * self.n..(i + 1) * self.n];
            for (q, &j) in idx.iter().enumerate() {
                if j <= i {
                    row[j] += vi * val[q];
                }
            }
        }
    }

    /// Copies the lower triangle onto the upper one.
    pub fn symmetrize_from_lower(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in 0..i {
                self.data[j * n + i] = self.data[i * n + j];
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    /// `v^T A v` for a sparse `v` (A symmetric).
    pub fn sparse_quadratic_form(&self, idx: &[usize], val: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (p, &i) in idx.iter().enumerate() {
            let row = self.row(i);
            let mut inner = 0.0;
            for (q, &j) in idx.iter().enumerate() {
                inner += row[j] * val[q];
            }
            acc += val[p] * inner;
        }
        acc
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators so the loop vectorizes
    let mut s = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        s[0] += a[i] * b[i];
        s[1] += a[i + 1] * b[i + 1];
        s[2] += a[i + 2] * b[i + 2];
        s[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

/// Block size of the factorization and inversion kernels.
const BLOCK: usize = 64;

/// `C = alpha A B + beta C` on strided views into row-major buffers.
///
/// # Safety
/// Every view must lie inside its allocation, and the region written
/// through `c` must not overlap the regions read through `a` and `b`.
#[allow(clippy::too_many_arguments)]
unsafe fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: *const f64,
    (rsa, csa): (usize, usize),
    b: *const f64,
    (rsb, csb): (usize, usize),
    beta: f64,
    c: *mut f64,
    rsc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    matrixmultiply::dgemm(
        m,
        k,
        n,
        alpha,
        a,
        rsa as isize,
        csa as isize,
        b,
        rsb as isize,
        csb as isize,
        beta,
        c,
        rsc as isize,
        1,
    );
}

/// Lower Cholesky factor `A = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors the lower triangle of `a`; the upper triangle is ignored.
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        let n = a.n;
        let mut l = a.data.clone();
        for j0 in (0..n).step_by(BLOCK) {
            let b = BLOCK.min(n - j0);
            // diagonal block, already updated by earlier panels
            for i in j0..j0 + b {
                for j in j0..=i {
                    let s = dot(&l[i * n + j0..i * n + j], &l[j * n + j0..j * n + j]);
                    let v = l[i * n + j] - s;
                    if i == j {
                        if !(v > 0.0) || !v.is_finite() {
                            return Err(Error::Numerical(format!(
                                "matrix not positive definite at pivot {i} ({v:e})"
                            )));
                        }
                        l[i * n + i] = v.sqrt();
                    } else {
                        l[i * n + j] = v / l[j * n + j];
                    }
                }
            }
            // panel below the diagonal block
            for i in j0 + b..n {
                for j in j0..j0 + b {
                    let s = dot(&l[i * n + j0..i * n + j], &l[j * n + j0..j * n + j]);
                    l[i * n + j] = (l[i * n + j] - s) / l[j * n + j];
                }
            }
            // trailing update, lower block rows only
            let t0 = j0 + b;
            for r0 in (t0..n).step_by(BLOCK) {
                let rb = BLOCK.min(n - r0);
                let ptr = l.as_mut_ptr();
                // SAFETY: reads columns j0..t0, writes columns t0.. of rows r0..r0+rb.
                unsafe {
                    gemm(
                        rb,
                        b,
                        r0 + rb - t0,
                        -1.0,
                        ptr.add(r0 * n + j0),
                        (n, 1),
                        ptr.add(t0 * n + j0),
                        (1, n),
                        1.0,
                        ptr.add(r0 * n + t0),
                        n,
                    );
                }
            }
        }
        for i in 0..n {
            l[i * n + i + 1..(i + 1) * n].iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| self.l[i * self.n + i].ln()).sum::<f64>() * 2.0
    }

    /// Solves `L y = b` in place.
    pub fn forward(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let s = dot(&self.l[i * n..i * n + i], &b[..i]);
            b[i] = (b[i] - s) / self.l[i * n + i];
        }
    }

    /// Solves `L^T x = y` in place.
    pub fn backward(&self, b: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            b[i] /= self.l[i * n + i];
            let bi = b[i];
            let row = &self.l[i * n..i * n + i];
            for (bj, lij) in b[..i].iter_mut().zip(row) {
                *bj -= lij * bi;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward(&mut x);
        self.backward(&mut x);
        x
    }

    /// `Z = L^{-1}`, lower triangular, row-major.
    fn lower_inverse(&self) -> Vec<f64> {
        let n = self.n;
        let l = &self.l;
        let mut z = vec![0.0; n * n];
        for i0 in (0..n).step_by(BLOCK) {
            let b = BLOCK.min(n - i0);
            // rows i0..i0+b: right-hand side [-L[I, ..i0] Z[..i0, ..i0] | I]
            if i0 > 0 {
                // SAFETY: reads rows ..i0 of z, writes rows i0..i0+b.
                unsafe {
                    let zp = z.as_mut_ptr();
                    gemm(b, i0, i0, -1.0, l.as_ptr().add(i0 * n), (n, 1), zp, (n, 1), 0.0, zp.add(i0 * n), n);
                }
            }
            for i in i0..i0 + b {
                z[i * n + i] = 1.0;
            }
            // forward substitution with the diagonal block, row by row
            for i in i0..i0 + b {
                let width = i + 1;
                for p in i0..i {
                    let lip = l[i * n + p];
                    if lip != 0.0 {
                        let (head, tail) = z.split_at_mut(i * n);
                        let src = &head[p * n..p * n + width];
                        for (dst, s) in tail[..width].iter_mut().zip(src) {
                            *dst -= lip * s;
                        }
                    }
                }
                let inv = 1.0 / l[i * n + i];
                z[i * n..i * n + width].iter_mut().for_each(|v| *v *= inv);
            }
        }
        z
    }

    /// Explicit inverse `A^{-1} = L^{-T} L^{-1}`.
    pub fn inverse(&self) -> DenseMatrix {
        let n = self.n;
        let z = self.lower_inverse();
        let mut inv = DenseMatrix::zeros(n);
        // (Z^T Z)[I, J] = sum over rows p >= start(I) of Z[p, I]^T Z[p, J], for J <= I
        for i0 in (0..n).step_by(BLOCK) {
            let bi = BLOCK.min(n - i0);
            for j0 in (0..=i0).step_by(BLOCK) {
                let bj = BLOCK.min(n - j0);
                // SAFETY: z and inv are distinct buffers; views are in bounds.
                unsafe {
                    gemm(
                        bi,
                        n - i0,
                        bj,
                        1.0,
                        z.as_ptr().add(i0 * n + i0),
                        (1, n),
                        z.as_ptr().add(i0 * n + j0),
                        (n, 1),
                        0.0,
                        inv.data.as_mut_ptr().add(i0 * n + j0),
                        n,
                    );
                }
            }
        }
        inv.symmetrize_from_lower();
        inv
    }
}
