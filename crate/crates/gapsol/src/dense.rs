//! Dense complex matrices in split real/imaginary storage.
//!
//! Products go through `matrixmultiply::dgemm` on the real and imaginary
//! planes; factorisations use nalgebra's partial-pivoting LU. Nothing here is
//! rigorous — see [`crate::operators::ball`] for enclosed products.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Row-major complex matrix stored as two real planes.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    pub(crate) re: Vec<f64>,
    pub(crate) im: Vec<f64>,
}

/// Borrowed rectangular window of a [`DenseMatrix`].
#[derive(Clone, Copy, Debug)]
pub struct MatView<'a> {
    pub(crate) m: &'a DenseMatrix,
    pub(crate) r0: usize,
    pub(crate) c0: usize,
    pub(crate) rows: usize,
    pub(crate) cols: usize,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, re: vec![0.0; rows * cols], im: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.re[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut m = DenseMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let k = i * self.cols + j;
        Complex64::new(self.re[k], self.im[k])
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, z: Complex64) {
        let k = i * self.cols + j;
        self.re[k] = z.re;
        self.im[k] = z.im;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, z: Complex64) {
        let k = i * self.cols + j;
        self.re[k] += z.re;
        self.im[k] += z.im;
    }

    pub fn is_finite(&self) -> bool {
        self.re.iter().chain(self.im.iter()).all(|x| x.is_finite())
    }

    pub fn view(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> MatView<'_> {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols, "view out of bounds");
        MatView { m: self, r0, c0, rows, cols }
    }

    pub fn full(&self) -> MatView<'_> {
        self.view(0, 0, self.rows, self.cols)
    }

    /// Copies `src` into the window starting at `(r0, c0)`.
    pub fn paste(&mut self, r0: usize, c0: usize, src: &DenseMatrix) {
        for i in 0..src.rows {
            let d = (r0 + i) * self.cols + c0;
            let s = i * src.cols;
            self.re[d..d + src.cols].copy_from_slice(&src.re[s..s + src.cols]);
            self.im[d..d + src.cols].copy_from_slice(&src.im[s..s + src.cols]);
        }
    }

    pub fn to_owned_view(v: MatView<'_>) -> DenseMatrix {
        DenseMatrix::from_fn(v.rows, v.cols, |i, j| v.get(i, j))
    }

    /// Floating product `self · b`.
    pub fn matmul(&self, b: &DenseMatrix) -> DenseMatrix {
        matmul_views(self.full(), b.full())
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| (0..self.cols).fold(Complex64::new(0.0, 0.0), |acc, j| acc + self.get(i, j) * x[j])).collect()
    }

    pub fn scale(&mut self, s: f64) {
        self.re.iter_mut().chain(self.im.iter_mut()).for_each(|x| *x *= s);
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.re.iter().zip(&self.im).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max)
    }

    pub fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }

    pub fn from_nalgebra(m: &DMatrix<Complex64>) -> Self {
        DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl MatView<'_> {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.m.get(self.r0 + i, self.c0 + j)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub(crate) fn offset(&self) -> usize {
        self.r0 * self.m.cols + self.c0
    }

    pub(crate) fn stride(&self) -> usize {
        self.m.cols
    }
}

/// `C ← alpha·A·B + beta·C` on real planes with explicit row strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn dgemm_raw(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    a_off: usize,
    a_rs: usize,
    b: &[f64],
    b_off: usize,
    b_rs: usize,
    beta: f64,
    c: &mut [f64],
    c_rs: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    if k > 0 {
        assert!(a_off + (m - 1) * a_rs + k <= a.len());
        assert!(b_off + (k - 1) * b_rs + n <= b.len());
    }
    assert!((m - 1) * c_rs + n <= c.len());
    // SAFETY: bounds asserted above; matrixmultiply reads/writes only inside
    // the described strided windows.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr().add(a_off),
            a_rs as isize,
            1,
            b.as_ptr().add(b_off),
            b_rs as isize,
            1,
            beta,
            c.as_mut_ptr(),
            c_rs as isize,
            1,
        );
    }
}

/// Floating complex product of two views.
pub fn matmul_views(a: MatView<'_>, b: MatView<'_>) -> DenseMatrix {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut c = DenseMatrix::zeros(m, n);
    let (ao, ars, bo, brs) = (a.offset(), a.stride(), b.offset(), b.stride());
    dgemm_raw(m, k, n, 1.0, &a.m.re, ao, ars, &b.m.re, bo, brs, 0.0, &mut c.re, n);
    dgemm_raw(m, k, n, -1.0, &a.m.im, ao, ars, &b.m.im, bo, brs, 1.0, &mut c.re, n);
    dgemm_raw(m, k, n, 1.0, &a.m.re, ao, ars, &b.m.im, bo, brs, 0.0, &mut c.im, n);
    dgemm_raw(m, k, n, 1.0, &a.m.im, ao, ars, &b.m.re, bo, brs, 1.0, &mut c.im, n);
    c
}

/// Floating inverse via partial-pivoting LU.
///
/// Fails when the matrix is not square, has non-finite entries, or when the
/// reciprocal condition estimate `1/(‖M‖_∞‖M⁻¹‖_∞)` is below `1e-12`.
pub fn approx_inverse(m: &DenseMatrix) -> Result<DenseMatrix> {
    if m.rows != m.cols {
        return Err(Error::Incompatible(format!("cannot invert a {}x{} matrix", m.rows, m.cols)));
    }
    if !m.is_finite() {
        return Err(Error::Singular("non-finite entries".into()));
    }
    let inv = m.to_nalgebra().try_inverse().ok_or_else(|| Error::Singular(format!("LU breakdown in a {}x{} matrix", m.rows, m.cols)))?;
    let inv = DenseMatrix::from_nalgebra(&inv);
    let cond = inf_norm(m) * inf_norm(&inv);
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::Singular(format!("condition estimate {cond:e}")));
    }
    Ok(inv)
}

/// Solves `M x = b` with partial-pivoting LU.
pub fn solve(m: &DenseMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let lu = m.to_nalgebra().lu();
    let rhs = nalgebra::DVector::from_column_slice(b);
    let x = lu.solve(&rhs).ok_or_else(|| Error::Singular(format!("LU solve of size {}", m.rows)))?;
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Singular("non-finite solution".into()));
    }
    Ok(x.iter().copied().collect())
}

fn inf_norm(m: &DenseMatrix) -> f64 {
    (0..m.rows).map(|i| (0..m.cols).map(|j| m.get(i, j).norm()).sum::<f64>()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_inverse() {
        let i = DenseMatrix::identity(5);
        assert_eq!(approx_inverse(&i).unwrap(), i);
    }

    #[test]
    fn diagonal_inverse() {
        let d = DenseMatrix::from_fn(2, 2, |i, j| if i == j { Complex64::new([2.0, 4.0][i], 0.0) } else { 0.0.into() });
        let inv = approx_inverse(&d).unwrap();
        assert_eq!(inv.get(0, 0).re, 0.5);
        assert_eq!(inv.get(1, 1).re, 0.25);
    }

    #[test]
    fn singular_rejected() {
        let z = DenseMatrix::zeros(3, 3);
        assert!(approx_inverse(&z).is_err());
    }

    #[test]
    fn complex_product_matches_naive() {
        let a = DenseMatrix::from_fn(3, 4, |i, j| Complex64::new(i as f64 - j as f64, 0.5 * (i * j) as f64));
        let b = DenseMatrix::from_fn(4, 2, |i, j| Complex64::new(1.0 + j as f64, i as f64 - 1.0));
        let c = a.matmul(&b);
        for i in 0..3 {
            for j in 0..2 {
                let z: Complex64 = (0..4).map(|k| a.get(i, k) * b.get(k, j)).sum();
                assert!((c.get(i, j) - z).norm() < 1e-12);
            }
        }
    }
}
