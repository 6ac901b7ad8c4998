//! Midpoint–radius ("ball") complex matrices with enclosed products.
//!
//! A [`BallMat`] represents every matrix whose entries lie in the discs
//! `|x_ij − mid_ij| ≤ rad_ij`. Products use floating gemm for the midpoint and
//! the a priori bound `|fl(Σ_{i≤n} a_i b_i) − Σ a_i b_i| ≤ γ_n Σ|a_i b_i|`,
//! `γ_n = nu/(1−nu)`, valid for any summation order with or without FMA,
//! plus a per-entry allowance for gradual underflow. The radius matrix itself
//! is computed in floating point and then inflated by the same argument.

use num_complex::Complex64;

use crate::dense::{dgemm_raw, matmul_views, DenseMatrix, MatView};
use crate::interval::{add_up, div_up, hypot_up, mul_up, sub_down, CIval};

const UNIT_ROUNDOFF: f64 = 1.1102230246251565e-16; // 2^-53
const TINY: f64 = f64::from_bits(1); // 2^-1074

/// Upper bound on `γ_n = n·u / (1 − n·u)`.
pub fn gamma(n: usize) -> f64 {
    let nu = mul_up(n as f64, UNIT_ROUNDOFF);
    assert!(nu < 0.5, "gemm inner dimension too large for the a priori bound");
    div_up(nu, sub_down(1.0, nu))
}

/// Complex matrix of discs.
#[derive(Clone, Debug)]
pub struct BallMat {
    pub mid: DenseMatrix,
    /// Row-major radii; `None` for an exact (point) matrix.
    pub rad: Option<Vec<f64>>,
}

/// Borrowed window of a [`BallMat`].
#[derive(Clone, Copy, Debug)]
pub struct BallView<'a> {
    b: &'a BallMat,
    r0: usize,
    c0: usize,
    rows: usize,
    cols: usize,
}

impl BallMat {
    pub fn point(mid: DenseMatrix) -> Self {
        BallMat { mid, rad: None }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        BallMat { mid: DenseMatrix::zeros(rows, cols), rad: None }
    }

    /// Builds from interval entries (rectangles are enclosed in discs).
    pub fn from_cival_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> CIval) -> Self {
        let mut mid = DenseMatrix::zeros(rows, cols);
        let mut rad = vec![0.0; rows * cols];
        let mut any = false;
        for i in 0..rows {
            for j in 0..cols {
                let z = f(i, j);
                mid.set(i, j, z.mid());
                let r = z.rad();
                if r > 0.0 {
                    any = true;
                }
                rad[i * cols + j] = r;
            }
        }
        BallMat { mid, rad: any.then_some(rad) }
    }

    pub fn rows(&self) -> usize {
        self.mid.rows()
    }

    pub fn cols(&self) -> usize {
        self.mid.cols()
    }

    #[inline]
    pub fn rad_at(&self, i: usize, j: usize) -> f64 {
        self.rad.as_ref().map_or(0.0, |r| r[i * self.cols() + j])
    }

    /// Upper bound on the modulus of every matrix in the ball at `(i, j)`.
    #[inline]
    pub fn abs_upper(&self, i: usize, j: usize) -> f64 {
        let z = self.mid.get(i, j);
        add_up(hypot_up(z.re, z.im), self.rad_at(i, j))
    }

    pub fn view(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> BallView<'_> {
        assert!(r0 + rows <= self.rows() && c0 + cols <= self.cols(), "view out of bounds");
        BallView { b: self, r0, c0, rows, cols }
    }

    pub fn full(&self) -> BallView<'_> {
        self.view(0, 0, self.rows(), self.cols())
    }

    /// Replaces the ball by `E − self`, where `E` has ones at the listed
    /// `(row, col)` positions and zeros elsewhere.
    pub fn identity_minus(mut self, ones: impl IntoIterator<Item = (usize, usize)>) -> BallMat {
        let cols = self.cols();
        self.mid.re.iter_mut().chain(self.mid.im.iter_mut()).for_each(|x| *x = -*x);
        let mut rad = self.rad.take().unwrap_or_else(|| vec![0.0; self.mid.re.len()]);
        for (i, j) in ones {
            let k = i * cols + j;
            let v = 1.0 + self.mid.re[k];
            // rounding error of one addition: ≤ ulp(v)/2 ≤ |v|·2^-53 (+ underflow)
            rad[k] = add_up(rad[k], add_up(mul_up(v.abs(), UNIT_ROUNDOFF), TINY));
            self.mid.re[k] = v;
        }
        self.rad = Some(rad);
        self
    }

    pub fn get_mid(&self, i: usize, j: usize) -> Complex64 {
        self.mid.get(i, j)
    }
}

impl<'a> BallView<'a> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn mid(&self) -> MatView<'a> {
        self.b.mid.view(self.r0, self.c0, self.rows, self.cols)
    }

    /// `|re| + |im|` rounded up, contiguous.
    fn abs1(&self) -> Vec<f64> {
        let cols = self.b.cols();
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for i in 0..self.rows {
            let base = (self.r0 + i) * cols + self.c0;
            for j in 0..self.cols {
                out.push(add_up(self.b.mid.re[base + j].abs(), self.b.mid.im[base + j].abs()));
            }
        }
        out
    }

    fn rad_contig(&self) -> Option<Vec<f64>> {
        let r = self.b.rad.as_ref()?;
        let cols = self.b.cols();
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for i in 0..self.rows {
            let base = (self.r0 + i) * cols + self.c0;
            out.extend_from_slice(&r[base..base + self.cols]);
        }
        Some(out)
    }
}

/// Enclosure of the product of two ball matrices.
pub fn ball_mul(a: BallView<'_>, b: BallView<'_>) -> BallMat {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mid = matmul_views(a.mid(), b.mid());
    if k == 0 {
        return BallMat::zeros(m, n);
    }
    let g2k = gamma(2 * k);
    let abs_a = a.abs1();
    let abs_b = b.abs1();
    let rad_a = a.rad_contig();
    let rad_b = b.rad_contig();
    // G = γ_{2k}|B|₁ + rad(B),   H = |B|₁ + rad(B)
    let g: Vec<f64> = match &rad_b {
        Some(rb) => abs_b.iter().zip(rb).map(|(&x, &r)| add_up(mul_up(g2k, x), r)).collect(),
        None => abs_b.iter().map(|&x| mul_up(g2k, x)).collect(),
    };
    let mut p = vec![0.0; m * n];
    dgemm_raw(m, k, n, 1.0, &abs_a, 0, k, &g, 0, n, 0.0, &mut p, n);
    let mut terms = k;
    if let Some(ra) = &rad_a {
        let h: Vec<f64> = match &rad_b {
            Some(rb) => abs_b.iter().zip(rb).map(|(&x, &r)| add_up(x, r)).collect(),
            None => abs_b,
        };
        dgemm_raw(m, k, n, 1.0, ra, 0, k, &h, 0, n, 1.0, &mut p, n);
        terms = 2 * k;
    }
    // P was itself summed in floating point: P_true ≤ P_fl (1 + 2γ) + underflow.
    let infl = add_up(1.0, mul_up(2.0, gamma(terms)));
    let ufl = mul_up((8 * k) as f64, TINY);
    let rad = p.into_iter().map(|x| mul_up(add_up(x, ufl), infl)).collect();
    BallMat { mid, rad: Some(rad) }
}

/// Enclosure of `A x` for a ball vector `x` given as interval entries.
pub fn ball_matvec(a: BallView<'_>, x: &[CIval]) -> Vec<CIval> {
    assert_eq!(a.cols, x.len());
    let xb = BallMat::from_cival_fn(x.len(), 1, |i, _| x[i]);
    let y = ball_mul(a, xb.full());
    (0..a.rows)
        .map(|i| {
            let z = y.mid.get(i, 0);
            let r = y.rad_at(i, 0);
            let re = crate::interval::RIval::point(z.re).inflate(r);
            let im = crate::interval::RIval::point(z.im).inflate(r);
            CIval::new(re, im)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::RIval;

    #[test]
    fn product_encloses_exact_integers() {
        let a = DenseMatrix::from_fn(3, 3, |i, j| Complex64::new((i + 2 * j) as f64, 1.0));
        let b = DenseMatrix::from_fn(3, 2, |i, j| Complex64::new(1.0, (i * j) as f64));
        let c = ball_mul(BallMat::point(a.clone()).full(), BallMat::point(b.clone()).full());
        for i in 0..3 {
            for j in 0..2 {
                let z: Complex64 = (0..3).map(|k| a.get(i, k) * b.get(k, j)).sum();
                assert!((c.mid.get(i, j) - z).norm() <= c.rad_at(i, j) + 0.0);
            }
        }
    }

    #[test]
    fn radii_propagate() {
        let a = BallMat::from_cival_fn(1, 1, |_, _| CIval::new(RIval::new(0.9, 1.1).unwrap(), RIval::ZERO));
        let b = BallMat::from_cival_fn(1, 1, |_, _| CIval::point(2.0, 0.0));
        let c = ball_mul(a.full(), b.full());
        assert!(c.rad_at(0, 0) >= 0.2);
    }

    #[test]
    fn identity_minus_exact_inverse() {
        let d = DenseMatrix::from_fn(2, 2, |i, j| if i == j { Complex64::new(4.0, 0.0) } else { 0.0.into() });
        let inv = DenseMatrix::from_fn(2, 2, |i, j| if i == j { Complex64::new(0.25, 0.0) } else { 0.0.into() });
        let r = ball_mul(BallMat::point(inv).full(), BallMat::point(d).full()).identity_minus([(0, 0), (1, 1)]);
        for i in 0..2 {
            for j in 0..2 {
                // a priori gemm bound leaves a few-ulp floor: γ_4 + inflation
                assert!(r.abs_upper(i, j) <= 4.0 * f64::EPSILON, "{}", r.abs_upper(i, j));
            }
        }
    }
}
