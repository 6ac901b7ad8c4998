//! Stage 3: the connecting-orbit boundary-value problem on `x ∈ [0, L]`.
//!
//! With `x = κ(t + 1)`, `κ = L/2`, the solution is `s(t) = s₀ + 2Σ s_m T_m(t)`
//! and the validation map is
//! `F(σ, s) = (s²(−1), L s + κ T f(s)) + B(σ, s)` where `(L s)_m = 2m s_m`,
//! `(T φ)_m = φ_{m+1} − φ_{m−1}` (both vanish at `m = 0`), and the zeroth
//! coefficient rows carry the boundary data
//! `(s¹(1) − W¹(θ, σ), s²(1) − W²(θ, σ), s³(−1) − 1, s⁴(−1))`.
//!
//! Truncated coordinates: index 0 is `σ`, then `1 + i(M+1) + m` for
//! component `i = 0..4` and `m = 0..=M`.
//!
//! The candidate lives in `[0, M]`, while the approximate inverse `A_f` is
//! built on a possibly larger operator truncation `[0, K]`, `K ≥ M`
//! (`A = A_f + L⁻¹Π_{(K,∞)}`). The boundary rows evaluate every Chebyshev
//! mode, so the coupling of modes just above the operator truncation decays
//! only like `ω^{−K}`; choosing `K > M` keeps that coupling small.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::certify::{radii_from_bounds, KBounds, Verdict};
use crate::dense::{approx_inverse, solve, DenseMatrix};
use crate::error::{Error, Result};
use crate::interval::{add_up, mul_up, CIval, RIval};
use crate::manifold::{eval_w_rigorous, ManifoldCandidate, ManifoldCertificate};
use crate::numerics::{GpField, NewtonReport, TruncatedMap};
use crate::operators::{
    ball_matvec, ball_mul, opnorm_weighted_l1, vector_norm, BallMat, BlockNormTable, Coord, FiniteBlockOp, SpaceLayout,
};
use crate::seqspace::{check_weight, conv_cheb, eval_cheb, eval_cheb_pm1, weight_powers, ChebSeq};

/// Parameters of the boundary-value problem plus the validated manifold.
#[derive(Clone, Debug)]
pub struct BvpProblem {
    pub a: RIval,
    pub b: RIval,
    pub c: RIval,
    pub omega: f64,
    /// Chebyshev truncation `M` of the candidate.
    pub m: usize,
    /// Operator truncation `K ≥ M` of the approximate inverse.
    pub k: usize,
    pub theta: RIval,
    /// Domain length `L`.
    pub l: RIval,
    pub kappa: RIval,
    pub manifold: ManifoldCandidate,
    /// Manifold radius `r_TF`.
    pub r_tf: f64,
    /// Stable exponent enclosure `λ̄ ± r_F`.
    pub lambda: RIval,
    pub lambda_bar: f64,
}

impl BvpProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(omega: f64, m: usize, theta: RIval, l: RIval, mcert: &ManifoldCertificate, mcand: &ManifoldCandidate) -> Result<Self> {
        check_weight(omega)?;
        if !mcert.verdict.is_proved() {
            return Err(Error::Precondition(format!("manifold stage is not proved ({})", mcert.verdict)));
        }
        if mcand.n != mcert.n || mcand.m != mcert.m {
            return Err(Error::Incompatible("manifold candidate does not match its certificate".into()));
        }
        if !(l.lo() > 0.0) {
            return Err(Error::Precondition(format!("L = {l} must be positive")));
        }
        if m < 2 {
            return Err(Error::Precondition(format!("Chebyshev truncation M = {m} must be at least 2")));
        }
        Ok(BvpProblem {
            a: mcert.a,
            b: mcert.b,
            c: mcert.c,
            omega,
            m,
            k: 2 * m,
            theta,
            l,
            kappa: l * RIval::point(0.5),
            manifold: mcand.clone(),
            r_tf: mcert.r,
            lambda: RIval::point(mcert.lambda_bar).inflate(mcert.r_f),
            lambda_bar: mcert.lambda_bar,
        })
    }

    /// Sets the operator truncation `K` (default `2M`).
    pub fn with_operator_truncation(mut self, k: usize) -> Result<Self> {
        if k < self.m {
            return Err(Error::Precondition(format!("operator truncation K = {k} must be at least M = {}", self.m)));
        }
        self.k = k;
        Ok(self)
    }

    /// Dimension `1 + 4(M + 1)` of the candidate space.
    pub fn dim(&self) -> usize {
        1 + 4 * (self.m + 1)
    }

    /// Dimension `1 + 4(K + 1)` of the operator truncation.
    pub fn op_dim(&self) -> usize {
        1 + 4 * (self.k + 1)
    }

    pub fn field(&self) -> GpField {
        GpField { a: self.a.mid(), b: self.b.mid(), c: self.c.mid() }
    }
}

/// Floating approximation `(σ̄, s̄)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BvpCandidate {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "sigma_hex", with = "crate::serial::hex_f64")]
    pub sigma: f64,
    #[serde(with = "crate::serial::hex_quad_f64")]
    pub s: [Vec<f64>; 4],
}

impl BvpCandidate {
    pub fn check(&self, prob: &BvpProblem) -> Result<()> {
        if self.m != prob.m || self.s.iter().any(|c| c.len() != self.m + 1) {
            return Err(Error::Incompatible(format!("candidate truncation {} does not match M = {}", self.m, prob.m)));
        }
        if !(self.sigma.abs() < 1.0) {
            return Err(Error::Domain(format!("|σ̄| = {} must be below 1", self.sigma.abs())));
        }
        if self.s.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Precondition("non-finite Chebyshev coefficient".into()));
        }
        Ok(())
    }

    pub fn to_vec(&self) -> Vec<Complex64> {
        std::iter::once(self.sigma).chain(self.s.iter().flatten().copied()).map(|x| Complex64::new(x, 0.0)).collect()
    }

    pub fn from_vec(m: usize, x: &[Complex64]) -> Self {
        let s = std::array::from_fn(|i| x[1 + i * (m + 1)..1 + (i + 1) * (m + 1)].iter().map(|z| z.re).collect());
        BvpCandidate { m, sigma: x[0].re, s }
    }

    fn cheb(&self, i: usize, omega: f64) -> Result<ChebSeq> {
        ChebSeq::from_points(&self.s[i], omega)
    }
}

/// Truncated layout: `Param{0}` then `Cheb{comp = i+1, m}`.
pub fn layout(m_rows: usize, omega: f64) -> Result<SpaceLayout> {
    let mut coords = vec![Coord::Param { comp: 0 }];
    for i in 0..4 {
        coords.extend((0..=m_rows).map(|m| Coord::Cheb { comp: i + 1, m }));
    }
    SpaceLayout::new(coords, 1.0, omega)
}

// ---------------------------------------------------------------------------
// Floating map
// ---------------------------------------------------------------------------

fn conv_f(p: &[f64], q: &[f64]) -> Vec<f64> {
    let (pm, qm) = (p.len() as i64 - 1, q.len() as i64 - 1);
    let n = pm + qm;
    (0..=n)
        .map(|m| ((-pm).max(m - qm)..=pm.min(m + qm)).map(|m1| p[m1.unsigned_abs() as usize] * q[(m - m1).unsigned_abs() as usize]).sum())
        .collect()
}

fn eval_pm1(s: &[f64], sign: f64) -> f64 {
    s.iter().enumerate().skip(1).fold(s[0], |acc, (m, c)| acc + 2.0 * c * if sign < 0.0 && m % 2 == 1 { -1.0 } else { 1.0 })
}

fn at(v: &[f64], m: usize) -> f64 {
    v.get(m).copied().unwrap_or(0.0)
}

/// Floating `φ = f(s̄)` with full product supports.
fn phi_float(x: &BvpCandidate, f: &GpField) -> [Vec<f64>; 4] {
    let s1s3 = conv_f(&x.s[0], &x.s[2]);
    let sq = conv_f(&x.s[0], &x.s[0]);
    let cube = conv_f(&sq, &x.s[0]);
    let phi2 = (0..cube.len()).map(|m| -f.a * at(&x.s[0], m) + f.b * at(&s1s3, m) + f.c * cube[m]).collect();
    [x.s[1].clone(), phi2, x.s[3].clone(), x.s[2].iter().map(|v| -4.0 * v).collect()]
}

/// Floating truncated residual.
pub fn residual_float(x: &BvpCandidate, prob: &BvpProblem) -> Vec<f64> {
    let (m, f, kappa) = (prob.m, prob.field(), prob.kappa.mid());
    let phi = phi_float(x, &f);
    let th = prob.theta.mid();
    let (w1, w2) = prob.manifold.eval_parts(th, x.sigma, 0);
    let mut r = vec![0.0; prob.dim()];
    r[0] = eval_pm1(&x.s[1], -1.0);
    let bc = [eval_pm1(&x.s[0], 1.0) - w1, eval_pm1(&x.s[1], 1.0) - w2, eval_pm1(&x.s[2], -1.0) - 1.0, eval_pm1(&x.s[3], -1.0)];
    for i in 0..4 {
        let base = 1 + i * (m + 1);
        r[base] = bc[i];
        for k in 1..=m {
            r[base + k] = 2.0 * k as f64 * x.s[i][k] + kappa * (at(&phi[i], k + 1) - at(&phi[i], k - 1));
        }
    }
    r
}

/// Chebyshev multiplication matrix entry: coefficient of `s_k` in `(p*s)_j`.
fn cmul(p: &[RIval], j: usize, k: usize) -> RIval {
    let g = |i: usize| p.get(i).copied().unwrap_or(RIval::ZERO);
    if k == 0 {
        g(j)
    } else {
        g(j.abs_diff(k)) + g(j + k)
    }
}

/// Derivative rows `0..=m` against columns `σ` and `s_k`, `k ≤ k_max`, with
/// interval entries. The σ column holds `−∂σW̄` (the candidate polynomial
/// only; the `r_TF` part is bounded separately).
fn df_entries(x: &BvpCandidate, prob: &BvpProblem, m: usize, k_max: usize) -> Result<Vec<Vec<RIval>>> {
    let w = prob.omega;
    let s1 = x.cheb(0, w)?;
    let s3 = x.cheb(2, w)?;
    let sq = conv_cheb(&s1, &s1)?;
    // ∂φ²/∂s¹ = −a + b s̄³* + 3c s̄¹*s̄¹*,  ∂φ²/∂s³ = b s̄¹*
    let p21: Vec<RIval> = s3.coeffs().iter().map(|v| *v * prob.b).collect();
    let p21c: Vec<RIval> = sq.coeffs().iter().map(|v| *v * prob.c * RIval::point(3.0)).collect();
    let p23: Vec<RIval> = s1.coeffs().iter().map(|v| *v * prob.b).collect();
    let dphi = |i: usize, j: usize, p: usize, k: usize| -> RIval {
        let delta = if p == k { RIval::ONE } else { RIval::ZERO };
        match (i, j) {
            (0, 1) | (2, 3) => delta,
            (3, 2) => delta * RIval::point(-4.0),
            (1, 0) => -(delta * prob.a) + cmul(&p21, p, k) + cmul(&p21c, p, k),
            (1, 2) => cmul(&p23, p, k),
            _ => RIval::ZERO,
        }
    };
    let dw = eval_w_rigorous(&prob.manifold, 0.0, prob.theta, RIval::point(x.sigma), 1)?;
    let ncols = 1 + 4 * (k_max + 1);
    let mut out = vec![vec![RIval::ZERO; ncols]; 1 + 4 * (m + 1)];
    let two = RIval::point(2.0);
    let ev = |k: usize, sign: i8| -> RIval {
        if k == 0 {
            RIval::ONE
        } else if sign < 0 && k % 2 == 1 {
            -two
        } else {
            two
        }
    };
    for k in 0..=k_max {
        out[0][1 + (k_max + 1) + k] = ev(k, -1);
    }
    for i in 0..4 {
        let row0 = 1 + i * (m + 1);
        let (comp, sign) = [(0, 1), (1, 1), (2, -1), (3, -1)][i];
        for k in 0..=k_max {
            out[row0][1 + comp * (k_max + 1) + k] = ev(k, sign);
        }
        if i < 2 {
            out[row0][0] = -dw[i].re;
        }
        for r in 1..=m {
            let row = &mut out[row0 + r];
            if r <= k_max {
                row[1 + i * (k_max + 1) + r] = RIval::point(2.0 * r as f64);
            }
            for j in 0..4 {
                for k in 0..=k_max {
                    let v = dphi(i, j, r + 1, k) - dphi(i, j, r - 1, k);
                    if v != RIval::ZERO {
                        let e = &mut row[1 + j * (k_max + 1) + k];
                        *e = *e + prob.kappa * v;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Floating derivative truncated to `[0, m]` rows and columns.
fn df_float_at(x: &BvpCandidate, prob: &BvpProblem, m: usize) -> Result<DenseMatrix> {
    let e = df_entries(x, prob, m, m)?;
    let n = 1 + 4 * (m + 1);
    Ok(DenseMatrix::from_fn(n, n, |i, j| Complex64::new(e[i][j].mid(), 0.0)))
}

/// Floating derivative on the candidate truncation (Newton steps).
pub fn df_float(x: &BvpCandidate, prob: &BvpProblem) -> Result<DenseMatrix> {
    df_float_at(x, prob, prob.m)
}

/// Approximate inverse `A_f` of the derivative truncated to `[0, K]`.
pub fn approx_inverse_bvp(x: &BvpCandidate, prob: &BvpProblem) -> Result<BallMat> {
    Ok(BallMat::point(approx_inverse(&df_float_at(x, prob, prob.k)?)?))
}

/// Truncated boundary-value map for [`crate::numerics::newton_refine`].
pub struct BvpMap<'a> {
    pub prob: &'a BvpProblem,
}

/// Floating norm `max{|σ|, ‖s⁽ⁱ⁾‖_C}`.
pub fn float_norm(x: &[f64], m: usize, omega: f64) -> f64 {
    let mut n = x[0].abs();
    for i in 0..4 {
        let c = &x[1 + i * (m + 1)..1 + (i + 1) * (m + 1)];
        let s = c[0].abs() + c.iter().enumerate().skip(1).map(|(k, v)| 2.0 * v.abs() * omega.powi(k as i32)).sum::<f64>();
        n = n.max(s);
    }
    n
}

impl TruncatedMap for BvpMap<'_> {
    fn residual(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let c = BvpCandidate::from_vec(self.prob.m, x);
        if !(c.sigma.abs() < 1.0) {
            return Err(Error::Domain(format!("|σ| = {} reached 1 during Newton", c.sigma.abs())));
        }
        Ok(residual_float(&c, self.prob).into_iter().map(|v| Complex64::new(v, 0.0)).collect())
    }

    fn solve_linear(&self, x: &[Complex64], r: &[Complex64]) -> Result<Vec<Complex64>> {
        solve(&df_float(&BvpCandidate::from_vec(self.prob.m, x), self.prob)?, r)
    }

    fn norm(&self, r: &[Complex64]) -> f64 {
        float_norm(&r.iter().map(|z| z.re).collect::<Vec<_>>(), self.prob.m, self.prob.omega)
    }

    fn project(&self, x: &mut [Complex64]) {
        x.iter_mut().for_each(|z| z.im = 0.0);
    }
}

/// Newton polish of a boundary-value candidate.
pub fn refine(cand: &BvpCandidate, prob: &BvpProblem) -> Result<(BvpCandidate, NewtonReport)> {
    cand.check(prob)?;
    let (x, rep) = crate::numerics::newton_refine(&BvpMap { prob }, &cand.to_vec())?;
    Ok((BvpCandidate::from_vec(prob.m, &x), rep))
}

/// Shooting seed: smallest `σ ∈ (0, 1)` whose backward orbit from `W̄(θ, σ)`
/// reaches `u'(0) = 0`, sampled at Chebyshev nodes.
pub fn seed(prob: &BvpProblem) -> Result<BvpCandidate> {
    let th = prob.theta.mid();
    let w_at = |s: f64| prob.manifold.eval(th, s);
    let l = prob.l.mid();
    let sigma = crate::numerics::find_sigma(prob.field(), w_at, l, 0.99, 198)?;
    let sd = crate::numerics::bvp_seed(prob.field(), w_at, sigma, l, prob.m)?;
    Ok(BvpCandidate { m: prob.m, sigma: sd.sigma, s: sd.coeffs })
}

/// Seed followed by Newton polish.
pub fn seed_and_refine(prob: &BvpProblem) -> Result<(BvpCandidate, NewtonReport)> {
    refine(&seed(prob)?, prob)
}

// ---------------------------------------------------------------------------
// Rigorous map and bounds
// ---------------------------------------------------------------------------

/// Rigorous `F(x̄)` split as: parameter row, sequence rows `0..=3M+1` of
/// `L s̄ + κ T f(s̄)` (zeroth rows zero) and the four boundary residuals
/// `s̄(±1) − …` computed with `W̄` (no `r_TF`).
pub struct BvpResidual {
    pub param: RIval,
    pub rows: [Vec<RIval>; 4],
    pub boundary: [RIval; 4],
    pub s1_norm: RIval,
    pub s3_norm: RIval,
    pub s1sq_norm: RIval,
}

pub fn f_bvp(x: &BvpCandidate, prob: &BvpProblem) -> Result<BvpResidual> {
    x.check(prob)?;
    let w = prob.omega;
    let s: Vec<ChebSeq> = (0..4).map(|i| x.cheb(i, w)).collect::<Result<_>>()?;
    let sq = conv_cheb(&s[0], &s[0])?;
    let cube = conv_cheb(&sq, &s[0])?;
    let s13 = conv_cheb(&s[0], &s[2])?;
    let n = 3 * prob.m;
    let phi2: Vec<RIval> = (0..=n).map(|k| -(s[0].get(k) * prob.a) + s13.get(k) * prob.b + cube.get(k) * prob.c).collect();
    let phi: [Vec<RIval>; 4] =
        [s[1].coeffs().to_vec(), phi2, s[3].coeffs().to_vec(), s[2].coeffs().iter().map(|v| *v * RIval::point(-4.0)).collect()];
    let g = |v: &[RIval], k: usize| v.get(k).copied().unwrap_or(RIval::ZERO);
    let rows = std::array::from_fn(|i| {
        let mut r = vec![RIval::ZERO; n + 2];
        for (k, e) in r.iter_mut().enumerate().skip(1) {
            *e = RIval::point(2.0 * k as f64) * s[i].get(k) + prob.kappa * (g(&phi[i], k + 1) - g(&phi[i], k - 1));
        }
        r
    });
    let wv = eval_w_rigorous(&prob.manifold, 0.0, prob.theta, RIval::point(x.sigma), 0)?;
    let boundary = [
        eval_cheb_pm1(&s[0], 1) - wv[0].re,
        eval_cheb_pm1(&s[1], 1) - wv[1].re,
        eval_cheb_pm1(&s[2], -1) - RIval::ONE,
        eval_cheb_pm1(&s[3], -1),
    ];
    Ok(BvpResidual { param: eval_cheb_pm1(&s[1], -1), rows, boundary, s1_norm: s[0].norm(), s3_norm: s[2].norm(), s1sq_norm: sq.norm() })
}

/// Summands of the stage-3 bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BvpDiagnostics {
    pub y_finite: RIval,
    pub y_tail: RIval,
    pub z1_finite: RIval,
    pub z1_manifold: RIval,
    pub z1_tail: RIval,
    pub z1_eval_tail: RIval,
    pub z2_cheb: RIval,
    pub z2_boundary: RIval,
    pub a_f_norm: RIval,
    #[serde(with = "crate::serial::hex_f64")]
    pub truncated_residual: f64,
}

/// `Y = ‖A_f Π_{[0,K]} F(x̄)‖ + ‖L⁻¹Π_{(K,3M+1]}F(x̄)‖`, where the boundary
/// entries of `F(x̄)` enter as enclosures `s̄(1) − W̄ ± r_TF` of the true
/// residual. Returns `[finite, tail]`.
pub fn bound_y_bvp(res: &BvpResidual, a_f: &BallMat, prob: &BvpProblem) -> Result<[RIval; 2]> {
    let k = prob.k;
    let top = 3 * prob.m + 1;
    let rtf = RIval::new(-prob.r_tf, prob.r_tf)?;
    let mut v = vec![CIval::real(res.param)];
    for (i, r) in res.rows.iter().enumerate() {
        let b = if i < 2 { res.boundary[i] + rtf } else { res.boundary[i] };
        v.push(CIval::real(b));
        v.extend((1..=k).map(|j| CIval::real(r.get(j).copied().unwrap_or(RIval::ZERO))));
    }
    let finite = vector_norm(&ball_matvec(a_f.full(), &v), &layout(k, prob.omega)?);
    let wp = weight_powers(prob.omega, top);
    let mut tail = RIval::ZERO;
    for r in &res.rows {
        let t: RIval = (k + 1..=top).map(|j| r[j].abs() * wp[j] * RIval::point(2.0) * RIval::point(2.0 * j as f64).recip().unwrap()).sum();
        tail = tail.max(&t);
    }
    Ok([finite, tail])
}

/// Last column index `K + 2M + 1` reached by the rows `[0, K]` of `DF̄`.
pub fn z1_column_limit(prob: &BvpProblem) -> usize {
    prob.k + 2 * prob.m + 1
}

/// Finite part of Z1: `‖Π_ℝ + Π_{[0,K]} − A_f DF̄ (Π_ℝ + Π_{[0,K+2M+1]})‖`.
pub fn bound_z1_finite(x: &BvpCandidate, a_f: &BallMat, prob: &BvpProblem) -> Result<RIval> {
    let m = prob.k;
    let kc = z1_column_limit(prob);
    let e = df_entries(x, prob, m, kc)?;
    let df = BallMat::from_cival_fn(prob.op_dim(), 1 + 4 * (kc + 1), |i, j| CIval::real(e[i][j]));
    let prod = ball_mul(a_f.full(), df.full());
    let mut ones = vec![(0, 0)];
    for i in 0..4 {
        ones.extend((0..=m).map(|k| (1 + i * (m + 1) + k, 1 + i * (kc + 1) + k)));
    }
    let c = prod.identity_minus(ones);
    let rows = layout(m, prob.omega)?;
    let cols = layout(kc, prob.omega)?;
    let mut t = BlockNormTable::new(&rows, &cols);
    t.absorb(&c, &rows, &cols);
    RIval::new(0.0, t.norm())
}

/// Stage-3 certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolitonCertificate {
    pub stage: String,
    pub a: RIval,
    pub b: RIval,
    pub c: RIval,
    #[serde(rename = "M")]
    pub m: usize,
    /// Operator truncation of the approximate inverse.
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(with = "crate::serial::hex_f64")]
    pub omega: f64,
    pub theta: RIval,
    #[serde(rename = "L")]
    pub l: RIval,
    #[serde(rename = "sigma_bar_hex", with = "crate::serial::hex_f64")]
    pub sigma_bar: f64,
    #[serde(rename = "r_TF_hex", with = "crate::serial::hex_f64")]
    pub r_tf: f64,
    #[serde(rename = "r_star_hex", with = "crate::serial::hex_f64")]
    pub r_star: f64,
    #[serde(rename = "Y_hex", with = "crate::serial::hex_f64")]
    pub y: f64,
    #[serde(rename = "Z1_hex", with = "crate::serial::hex_f64")]
    pub z1: f64,
    #[serde(rename = "Z2_hex", with = "crate::serial::hex_f64")]
    pub z2: f64,
    #[serde(rename = "r_hex", with = "crate::serial::hex_f64")]
    pub r: f64,
    #[serde(rename = "r_max_hex", with = "crate::serial::hex_f64")]
    pub r_max: f64,
    /// Sup-norm error bound of the assembled profile on all of ℝ.
    #[serde(rename = "profile_error_hex", with = "crate::serial::hex_f64")]
    pub profile_error: f64,
    pub diagnostics: BvpDiagnostics,
    pub verdict: Verdict,
}

impl SolitonCertificate {
    pub fn bounds(&self) -> KBounds {
        KBounds { y: RIval::point(self.y), z1: RIval::point(self.z1), z2: RIval::point(self.z2), r_star: self.r_star }
    }
}

/// Runs the full stage-3 validation at radius `r*`.
pub fn validate_soliton(x: &BvpCandidate, prob: &BvpProblem, r_star: f64) -> Result<SolitonCertificate> {
    x.check(prob)?;
    if !(r_star > 0.0) {
        return Err(Error::Precondition(format!("r* = {r_star} must be positive")));
    }
    let sig = RIval::point(x.sigma).abs();
    if !((sig + RIval::point(r_star)).hi() < 1.0) {
        return Err(Error::Domain(format!("|σ̄| + r* = {} must be below 1", x.sigma.abs() + r_star)));
    }
    let m = prob.m;
    let k = prob.k;
    let res = f_bvp(x, prob)?;
    let a_f = approx_inverse_bvp(x, prob)?;
    let lay = layout(k, prob.omega)?;
    let a_f_norm = opnorm_weighted_l1(&FiniteBlockOp::new(a_f.clone(), lay.clone(), lay.clone())?);
    let [y_finite, y_tail] = bound_y_bvp(&res, &a_f, prob)?;
    let z1_finite = bound_z1_finite(x, &a_f, prob)?;
    let rtf = RIval::point(prob.r_tf);
    let one_minus = RIval::ONE - sig;
    let z1_manifold = (rtf * a_f_norm).checked_div(&one_minus.sqr())?;
    let (a, b, c) = (prob.a.abs(), prob.b.abs(), prob.c.abs());
    let omk = RIval::point(prob.omega) * prob.kappa.abs();
    let df_norm = RIval::point(4.0).max(&(a + b * res.s1_norm + b * res.s3_norm + RIval::point(3.0) * c * res.s1sq_norm));
    let z1_tail = (omk * df_norm).checked_div(&RIval::point(k as f64))?;
    let z1_eval_tail = a_f_norm.checked_div(&RIval::point(prob.omega).powi(z1_column_limit(prob) as u32 + 1))?;
    // Z2
    let rs = RIval::point(r_star);
    let inv2k = RIval::point(2.0 * k as f64).recip()?;
    let z2_cheb = RIval::point(2.0)
        * omk
        * (a_f_norm + inv2k)
        * (RIval::point(2.0) * b + RIval::point(6.0) * c * res.s1_norm + RIval::point(3.0) * c * rs);
    // ‖A_f(Π_ℝ + Π_{0})‖: columns σ and the four zeroth coefficients.
    let bcols: Vec<usize> = std::iter::once(0).chain((0..4).map(|i| 1 + i * (k + 1))).collect();
    let sub = BallMat::point(DenseMatrix::from_fn(prob.op_dim(), bcols.len(), |i, j| a_f.mid.get(i, bcols[j])));
    let a_b_norm = opnorm_weighted_l1(&FiniteBlockOp::new(sub, lay.clone(), lay.select(&bcols))?);
    let ball = RIval::point(x.sigma).inflate(r_star);
    let d2 = eval_w_rigorous(&prob.manifold, prob.r_tf, prob.theta, ball, 2)?;
    let z2_boundary = a_b_norm * d2[0].re.abs().max(&d2[1].re.abs());
    let y = y_finite + y_tail;
    let z1 = z1_finite + z1_manifold + z1_tail + z1_eval_tail;
    let z2 = z2_cheb + z2_boundary;
    let bounds = KBounds { y, z1, z2, r_star };
    let radii = radii_from_bounds(&bounds);
    let verdict = Verdict::from_bounds(&bounds, &radii, None);
    let truncated_residual = float_norm(&residual_float(x, prob), m, prob.omega);
    let profile_error = if radii.feasible {
        let dmax = tail_derivative_bound(prob, x, radii.r_min)?;
        tail_error(prob, x, radii.r_min, dmax, 0.0).max(radii.r_min)
    } else {
        f64::INFINITY
    };
    Ok(SolitonCertificate {
        stage: "soliton".into(),
        a: prob.a,
        b: prob.b,
        c: prob.c,
        m,
        k,
        omega: prob.omega,
        theta: prob.theta,
        l: prob.l,
        sigma_bar: x.sigma,
        r_tf: prob.r_tf,
        r_star,
        y: y.hi(),
        z1: z1.hi(),
        z2: z2.hi(),
        r: radii.r_min,
        r_max: radii.r_max,
        profile_error,
        diagnostics: BvpDiagnostics {
            y_finite,
            y_tail,
            z1_finite,
            z1_manifold,
            z1_tail,
            z1_eval_tail,
            z2_cheb,
            z2_boundary,
            a_f_norm,
            truncated_residual,
        },
        verdict,
    })
}

// ---------------------------------------------------------------------------
// Profile assembly
// ---------------------------------------------------------------------------

/// Region of a profile sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Bvp,
    Manifold,
}

/// One sample of the certified soliton.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub x: f64,
    pub u_approx: f64,
    pub err_bound: f64,
    pub region: Region,
}

/// `D ≥ |∂σW¹(θ', σ)|` for all `θ'` and `|σ| ≤ |σ̄| + r_C`.
fn tail_derivative_bound(prob: &BvpProblem, x: &BvpCandidate, r_c: f64) -> Result<f64> {
    let smax = add_up(x.sigma.abs(), r_c);
    let theta = RIval::new(0.0, 7.0)?;
    let d = eval_w_rigorous(&prob.manifold, prob.r_tf, theta, RIval::new(-smax, smax)?, 1)?;
    Ok(d[0].re.mag())
}

/// Analytic part of the manifold-region error at `τ = |x| − L ≥ 0`:
/// `r_TF + D e^{λ⁺τ}(r_C + |σ̄|(e^{r_F τ} − 1))`.
fn tail_error(prob: &BvpProblem, x: &BvpCandidate, r_c: f64, dmax: f64, tau: f64) -> f64 {
    let t = RIval::point(tau);
    let decay = (RIval::point(prob.lambda.hi()) * t).exp();
    let drift = (RIval::point(prob.lambda.rad()) * t).exp() - RIval::ONE;
    let v = RIval::point(prob.r_tf) + RIval::point(dmax) * decay * (RIval::point(r_c) + RIval::point(x.sigma.abs()) * drift);
    v.hi()
}

/// Worker threads for profile sampling: `GAPSOL_THREADS` if set, else the
/// available parallelism.
pub fn sampling_threads() -> usize {
    std::env::var("GAPSOL_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// `(u, local error, region)`; for the manifold region the local error is
/// the evaluation rounding and `τ` is returned in place of the region data.
fn sample_one(xv: f64, x: &BvpCandidate, s1: &ChebSeq, prob: &BvpProblem, r_c: f64) -> Result<(f64, f64, f64, Region)> {
    let l = prob.l;
    let ax = xv.abs();
    if ax <= l.lo() {
        let unit = RIval::new(-1.0, 1.0)?;
        let t = (RIval::point(ax) * RIval::point(2.0)).checked_div(&l)? - RIval::ONE;
        let t = t.intersect(&unit).unwrap_or(unit);
        let u = crate::numerics::cheb_eval(&x.s[0], 2.0 * ax / l.mid() - 1.0);
        let enc = eval_cheb(s1, t)?;
        let dist = (u - enc.lo()).abs().max((enc.hi() - u).abs());
        Ok((u, add_up(r_c, mul_up(dist, 1.0 + 1e-15)), 0.0, Region::Bvp))
    } else {
        let tau = RIval::point(ax) - l;
        let tau = RIval::new(tau.lo().max(0.0), tau.hi().max(0.0))?;
        let sig = (tau * prob.lambda_bar).exp() * RIval::point(x.sigma);
        let tm = ax - l.mid();
        let u = prob.manifold.eval_parts(prob.theta.mid() + tm, (prob.lambda_bar * tm).exp() * x.sigma, 0).0;
        let enc = eval_w_rigorous(&prob.manifold, 0.0, prob.theta + tau, sig, 0)?[0].re;
        let dist = (u - enc.lo()).abs().max((enc.hi() - u).abs());
        Ok((u, mul_up(dist, 1.0 + 1e-15), tau.hi(), Region::Manifold))
    }
}

/// Samples the certified even soliton on `xs`.
///
/// For `|x| ≤ L` the profile is `s̄¹(2|x|/L − 1)` with error `r_C`; beyond,
/// it is `W̄¹(θ + τ, e^{λ̄τ}σ̄)`, `τ = |x| − L`, with the analytic error of
/// [`tail_error`] plus one uniform bound on the evaluation rounding, so the
/// error column is non-increasing in `|x|` there. Samples depend on `|x|`
/// only, so `u(x) = u(−x)` holds exactly.
pub fn assemble_soliton(cert: &SolitonCertificate, x: &BvpCandidate, prob: &BvpProblem, xs: &[f64]) -> Result<Vec<ProfileSample>> {
    if !cert.verdict.is_proved() {
        return Err(Error::Precondition(format!("soliton stage is not proved ({})", cert.verdict)));
    }
    if cert.sigma_bar != x.sigma || cert.m != x.m {
        return Err(Error::Incompatible("candidate does not match the soliton certificate".into()));
    }
    let r_c = cert.r;
    let s1 = x.cheb(0, prob.omega)?;
    let dmax = tail_derivative_bound(prob, x, r_c)?;
    let threads = sampling_threads().min(xs.len().max(1));
    let chunk = xs.len().div_ceil(threads).max(1);
    let raw: Vec<(f64, f64, f64, Region)> = std::thread::scope(|sc| {
        let handles: Vec<_> = xs
            .chunks(chunk)
            .map(|part| {
                let s1 = &s1;
                sc.spawn(move || part.iter().map(|&xv| sample_one(xv, x, s1, prob, r_c)).collect::<Result<Vec<_>>>())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sampling thread panicked")).collect::<Result<Vec<_>>>()
    })?
    .into_iter()
    .flatten()
    .collect();
    let tail_round = raw.iter().filter(|r| r.3 == Region::Manifold).map(|r| r.1).fold(0.0, f64::max);
    Ok(xs
        .iter()
        .zip(raw)
        .map(|(&xv, (u, e, tau, region))| {
            let err_bound = match region {
                Region::Bvp => e,
                Region::Manifold => add_up(tail_error(prob, x, r_c, dmax, tau), tail_round),
            };
            ProfileSample { x: xv, u_approx: u, err_bound, region }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheb_mul_matrix_matches_convolution() {
        let p: Vec<RIval> = [0.3, -0.2, 0.1].iter().map(|&v| RIval::point(v)).collect();
        let pc = ChebSeq::from_coeffs(p.clone(), 1.0).unwrap();
        for k in 0..4 {
            let mut e = vec![0.0; 4];
            e[k] = 1.0;
            let prod = conv_cheb(&pc, &ChebSeq::from_points(&e, 1.0).unwrap()).unwrap();
            for j in 0..6 {
                assert_eq!(prod.get(j).mid(), cmul(&p, j, k).mid());
            }
        }
    }

    #[test]
    fn eval_pm1_pattern() {
        assert_eq!(eval_pm1(&[1.0, 1.0, 1.0, 1.0], -1.0), 1.0 - 2.0 + 2.0 - 2.0);
        assert_eq!(eval_pm1(&[1.0, 1.0, 1.0], 1.0), 5.0);
    }
}
