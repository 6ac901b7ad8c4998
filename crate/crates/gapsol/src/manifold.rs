//! Stage 2: Taylor–Fourier parameterization `W(θ, σ) = Σ_n w_n(θ) σⁿ` of the
//! local stable manifold of the periodic orbit.
//!
//! Unknowns are the first two components `(w¹, w²)`; the last two are
//! `γ(θ)` at order 0 and vanish at higher orders. Orders 0 and 1 are pinned
//! to `(0, v)`; orders `n ≥ 2` solve the homological equations
//! `(im + nλ) w¹_n − w²_n = 0`,
//! `(im + nλ) w²_n + a w¹_n − b (γ³ * w¹_n) − c (w¹*w¹*w¹)_n = 0`.
//!
//! Truncated coordinates are stored order-major: index
//! `n·2K + comp·K + (m + M)` with `K = 2M + 1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bundle::{BundleCandidate, BundleCertificate};
use crate::certify::{radii_from_bounds, KBounds, Verdict};
use crate::dense::{approx_inverse, dgemm_raw, DenseMatrix};
use crate::error::{Error, Result};
use crate::interval::{add_up, mul_up, CIval, RIval};
use crate::operators::ball::gamma;
use crate::operators::{ball_matvec, ball_mul, tail_norm_bounds, BallMat, BlockNormTable, Coord, SpaceLayout, TailKind};
use crate::seqspace::{check_weight, cis_table, weight_powers};

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Parameters of the manifold problem together with the validated bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifoldProblem {
    pub a: RIval,
    pub b: RIval,
    pub c: RIval,
    pub nu: f64,
    /// Taylor truncation `N`.
    pub n: usize,
    /// Fourier truncation `M`.
    pub m: usize,
    pub lambda_bar: f64,
    /// Bundle radius `r_F`.
    pub r_f: f64,
    /// `v̄` padded to `|m| ≤ M`.
    pub v1: Vec<Complex64>,
    pub v2: Vec<Complex64>,
}

impl ManifoldProblem {
    /// Builds the problem from a proved bundle certificate and its candidate.
    pub fn from_bundle(cert: &BundleCertificate, cand: &BundleCandidate, n: usize, m: usize) -> Result<Self> {
        if !cert.verdict.is_proved() {
            return Err(Error::Precondition(format!("bundle stage is not proved ({})", cert.verdict)));
        }
        if cand.lambda != cert.lambda_bar || cand.m != cert.m {
            return Err(Error::Incompatible("bundle candidate does not match its certificate".into()));
        }
        if n < 2 {
            return Err(Error::Precondition(format!("Taylor truncation N = {n} must be at least 2")));
        }
        if m < cand.m {
            return Err(Error::Precondition(format!("manifold M = {m} is below the bundle M = {}", cand.m)));
        }
        check_weight(cert.nu)?;
        let pad = |v: &[Complex64]| {
            let mut out = vec![C0; 2 * m + 1];
            out[m - cand.m..=m + cand.m].copy_from_slice(v);
            out
        };
        Ok(ManifoldProblem {
            a: cert.a,
            b: cert.b,
            c: cert.c,
            nu: cert.nu,
            n,
            m,
            lambda_bar: cand.lambda,
            r_f: cert.r,
            v1: pad(&cand.v1),
            v2: pad(&cand.v2),
        })
    }

    fn k(&self) -> usize {
        2 * self.m + 1
    }

    /// Dimension of the truncated space.
    pub fn dim(&self) -> usize {
        (self.n + 1) * 2 * self.k()
    }

    /// `λ = λ̄ ± r_F`.
    pub fn lambda(&self) -> RIval {
        RIval::point(self.lambda_bar).inflate(self.r_f)
    }
}

/// Floating Taylor–Fourier coefficients `w̄_{n,m}`, `n = 0..=N`, `m = −M..=M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldCandidate {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(with = "crate::serial::hex_vec_vec_c64")]
    pub w1: Vec<Vec<Complex64>>,
    #[serde(with = "crate::serial::hex_vec_vec_c64")]
    pub w2: Vec<Vec<Complex64>>,
}

impl ManifoldCandidate {
    /// Checks shapes, finiteness, the pinned orders 0 and 1 and conjugate
    /// symmetry.
    pub fn check(&self, prob: &ManifoldProblem) -> Result<()> {
        let k = 2 * self.m + 1;
        if self.n != prob.n || self.m != prob.m {
            return Err(Error::Incompatible(format!("candidate (N, M) = ({}, {}) vs problem ({}, {})", self.n, self.m, prob.n, prob.m)));
        }
        for w in [&self.w1, &self.w2] {
            if w.len() != self.n + 1 || w.iter().any(|o| o.len() != k) {
                return Err(Error::Incompatible("manifold candidate arrays have the wrong shape".into()));
            }
            if w.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Precondition("non-finite manifold coefficient".into()));
            }
            for o in w.iter() {
                if (0..k).any(|i| o[k - 1 - i] != o[i].conj()) {
                    return Err(Error::Precondition("manifold coefficients are not conjugate-symmetric".into()));
                }
            }
        }
        if self.w1[0].iter().chain(&self.w2[0]).any(|z| *z != C0) {
            return Err(Error::Precondition("order 0 must equal the first two components of γ (zero)".into()));
        }
        if self.w1[1] != prob.v1 || self.w2[1] != prob.v2 {
            return Err(Error::Precondition("order 1 must equal the bundle v̄".into()));
        }
        Ok(())
    }

    pub fn to_vec(&self) -> Vec<Complex64> {
        let mut x = Vec::with_capacity((self.n + 1) * 2 * (2 * self.m + 1));
        for n in 0..=self.n {
            x.extend_from_slice(&self.w1[n]);
            x.extend_from_slice(&self.w2[n]);
        }
        x
    }

    pub fn from_vec(n: usize, m: usize, x: &[Complex64]) -> Self {
        let k = 2 * m + 1;
        let (mut w1, mut w2) = (Vec::with_capacity(n + 1), Vec::with_capacity(n + 1));
        for o in 0..=n {
            w1.push(x[o * 2 * k..o * 2 * k + k].to_vec());
            w2.push(x[o * 2 * k + k..(o + 1) * 2 * k].to_vec());
        }
        ManifoldCandidate { n, m, w1, w2 }
    }

    /// Imposes `w_{n,−m} = conj(w_{n,m})`.
    pub fn symmetrize(&mut self) {
        let k = 2 * self.m + 1;
        for o in self.w1.iter_mut().chain(self.w2.iter_mut()) {
            for i in 0..self.m {
                let z = (o[k - 1 - i] + o[i].conj()) * 0.5;
                o[k - 1 - i] = z;
                o[i] = z.conj();
            }
            o[self.m].im = 0.0;
        }
    }

    /// Floating `W̄(θ, σ)` (all four components).
    pub fn eval(&self, theta: f64, sigma: f64) -> [f64; 4] {
        let (w1, w2) = self.eval_parts(theta, sigma, 0);
        [w1, w2, (2.0 * theta).cos(), -2.0 * (2.0 * theta).sin()]
    }

    /// Floating `∂_σ^k` of the first two components of `W̄`.
    pub fn eval_parts(&self, theta: f64, sigma: f64, k: u32) -> (f64, f64) {
        let e: Vec<Complex64> = (-(self.m as i64)..=self.m as i64).map(|m| Complex64::from_polar(1.0, m as f64 * theta)).collect();
        let coef = |o: &[Complex64]| o.iter().zip(&e).map(|(a, b)| (a * b).re).sum::<f64>();
        let (mut s1, mut s2) = (0.0, 0.0);
        for n in (k as usize..=self.n).rev() {
            let f: f64 = (0..k as usize).map(|j| (n - j) as f64).product();
            s1 = s1 * sigma + f * coef(&self.w1[n]);
            s2 = s2 * sigma + f * coef(&self.w2[n]);
        }
        (s1, s2)
    }

    /// `max_comp ‖w̄_n‖_F` at order `n`.
    pub fn order_norm(&self, n: usize, nu: f64) -> f64 {
        let s = |o: &[Complex64]| {
            o.iter().enumerate().map(|(i, z)| z.norm() * nu.powi((i as i64 - self.m as i64).unsigned_abs() as i32)).sum::<f64>()
        };
        s(&self.w1[n]).max(s(&self.w2[n]))
    }
}

// ---------------------------------------------------------------------------
// Floating convolutions
// ---------------------------------------------------------------------------

/// Floating Taylor–Fourier array with `|m| ≤ mm`, orders `0..=nn`.
#[derive(Clone, Debug)]
struct FTf {
    nn: usize,
    mm: usize,
    c: Vec<Complex64>,
}

impl FTf {
    fn zeros(nn: usize, mm: usize) -> Self {
        FTf { nn, mm, c: vec![C0; (nn + 1) * (2 * mm + 1)] }
    }

    fn from_orders(w: &[Vec<Complex64>], mm: usize) -> Self {
        let mut out = FTf::zeros(w.len() - 1, mm);
        for (n, o) in w.iter().enumerate() {
            out.order_mut(n).copy_from_slice(o);
        }
        out
    }

    fn order(&self, n: usize) -> &[Complex64] {
        let k = 2 * self.mm + 1;
        &self.c[n * k..(n + 1) * k]
    }

    fn order_mut(&mut self, n: usize) -> &mut [Complex64] {
        let k = 2 * self.mm + 1;
        &mut self.c[n * k..(n + 1) * k]
    }

    fn get(&self, n: usize, m: i64) -> Complex64 {
        if n > self.nn || m.unsigned_abs() as usize > self.mm {
            C0
        } else {
            self.c[n * (2 * self.mm + 1) + (m + self.mm as i64) as usize]
        }
    }
}

/// `out += p * q` for Fourier blocks (`out` truncated to its own range).
fn conv_acc(p: &[Complex64], pm: usize, q: &[Complex64], qm: usize, out: &mut [Complex64], om: usize) {
    for (i, &a) in p.iter().enumerate() {
        if a == C0 {
            continue;
        }
        let mi = i as i64 - pm as i64;
        for (j, &b) in q.iter().enumerate() {
            let m = mi + j as i64 - qm as i64;
            if m.unsigned_abs() as usize <= om {
                out[(m + om as i64) as usize] += a * b;
            }
        }
    }
}

/// Cauchy–Fourier product truncated to orders `≤ nn`, modes `≤ mm`.
fn conv_ftf(p: &FTf, q: &FTf, nn: usize, mm: usize) -> FTf {
    let mut out = FTf::zeros(nn, mm);
    for n1 in 0..=p.nn.min(nn) {
        let po = p.order(n1);
        if po.iter().all(|z| *z == C0) {
            continue;
        }
        for n2 in 0..=q.nn.min(nn - n1) {
            let qo = q.order(n2);
            conv_acc(po, p.mm, qo, q.mm, out.order_mut(n1 + n2), mm);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Ball convolutions (rigorous)
// ---------------------------------------------------------------------------

/// Taylor–Fourier array of discs `|x − mid| ≤ rad`.
#[derive(Clone, Debug)]
struct BallTf {
    nn: usize,
    mm: usize,
    mid: Vec<Complex64>,
    rad: Vec<f64>,
}

impl BallTf {
    fn point(w: &FTf) -> Self {
        BallTf { nn: w.nn, mm: w.mm, mid: w.c.clone(), rad: vec![0.0; w.c.len()] }
    }

    fn idx(&self, n: usize, m: i64) -> Option<usize> {
        (n <= self.nn && m.unsigned_abs() as usize <= self.mm).then(|| n * (2 * self.mm + 1) + (m + self.mm as i64) as usize)
    }

    fn get(&self, n: usize, m: i64) -> CIval {
        match self.idx(n, m) {
            None => CIval::ZERO,
            Some(i) => disc(self.mid[i], self.rad[i]),
        }
    }

    /// Rigorous upper bound of `Σ_n Σ_m |x_{n,m}| ν^{|m|}`.
    fn norm_upper(&self, nu: f64) -> f64 {
        let nu_p = weight_powers(nu, self.mm);
        let k = 2 * self.mm + 1;
        let mut s = 0.0;
        for (i, (z, r)) in self.mid.iter().zip(&self.rad).enumerate() {
            let m = (i % k) as i64 - self.mm as i64;
            let a = add_up(crate::interval::hypot_up(z.re, z.im), *r);
            s = add_up(s, mul_up(a, nu_p[m.unsigned_abs() as usize].hi()));
        }
        s
    }
}

fn disc(z: Complex64, r: f64) -> CIval {
    CIval::new(RIval::point(z.re).inflate(r), RIval::point(z.im).inflate(r))
}

fn abs_up(z: Complex64) -> f64 {
    add_up(z.re.abs(), z.im.abs())
}

/// Enclosure of the Cauchy–Fourier product of two ball arrays, truncated to
/// orders `≤ nn`, modes `≤ mm`.
fn ball_conv(p: &BallTf, q: &BallTf, nn: usize, mm: usize) -> BallTf {
    let ko = 2 * mm + 1;
    let len = (nn + 1) * ko;
    let mut mid = vec![C0; len];
    let mut absacc = vec![0.0f64; len];
    let mut radacc = vec![0.0f64; len];
    let (kp, kq) = (2 * p.mm + 1, 2 * q.mm + 1);
    for n1 in 0..=p.nn.min(nn) {
        for n2 in 0..=q.nn.min(nn - n1) {
            let base = (n1 + n2) * ko;
            for i in 0..kp {
                let ip = n1 * kp + i;
                let (a, ra) = (p.mid[ip], p.rad[ip]);
                if a == C0 && ra == 0.0 {
                    continue;
                }
                let aa = abs_up(a);
                let mi = i as i64 - p.mm as i64;
                for j in 0..kq {
                    let m = mi + j as i64 - q.mm as i64;
                    if m.unsigned_abs() as usize > mm {
                        continue;
                    }
                    let iq = n2 * kq + j;
                    let (b, rb) = (q.mid[iq], q.rad[iq]);
                    let o = base + (m + mm as i64) as usize;
                    mid[o] += a * b;
                    let ab = abs_up(b);
                    absacc[o] += aa * ab;
                    if ra != 0.0 || rb != 0.0 {
                        radacc[o] += (aa + ra) * rb + ra * ab;
                    }
                }
            }
        }
    }
    // Each output entry sums at most T products; the floating dot product
    // error is ≤ √2 γ_{T+2} Σ|a||b|, and the accumulated magnitudes are
    // themselves within a factor (1 + 2γ_{T+2}) of their exact values.
    let t = (p.nn + 1) * kp;
    let g = gamma(t + 4);
    let infl = add_up(1.0, mul_up(4.0, g));
    let rad = absacc.iter().zip(&radacc).map(|(&s, &r)| mul_up(infl, add_up(add_up(mul_up(2.0, mul_up(g, s)), r), 1e-300))).collect();
    BallTf { nn, mm, mid, rad }
}

// ---------------------------------------------------------------------------
// Validation map
// ---------------------------------------------------------------------------

/// Rigorous enclosure of `F(w̄)` on orders `0..=3N`, modes `|m| ≤ 3M`, with
/// `λ` the interval `λ̄ ± r_F` and `v = v̄` in the pinning rows.
pub struct ManifoldResidual {
    pub nn: usize,
    pub mm: usize,
    /// `f[comp][n][m + mm]`.
    pub f: [Vec<Vec<CIval>>; 2],
    /// `‖w̄¹‖_TF` and `‖w̄¹*w̄¹‖_TF` upper bounds.
    pub w1_norm: f64,
    pub w1sq_norm: f64,
    sq: BallTf,
}

fn gamma3(m: i64) -> f64 {
    if m.abs() == 2 {
        0.5
    } else {
        0.0
    }
}

/// Evaluates the validation map on the candidate.
pub fn f_manifold(cand: &ManifoldCandidate, prob: &ManifoldProblem) -> Result<ManifoldResidual> {
    cand.check(prob)?;
    let (n, m) = (prob.n, prob.m);
    let (nn, mm) = (3 * n, 3 * m);
    let w1 = FTf::from_orders(&cand.w1, m);
    let w2 = FTf::from_orders(&cand.w2, m);
    let bw = BallTf::point(&w1);
    let sq = ball_conv(&bw, &bw, 2 * n, 2 * m);
    let cube = ball_conv(&sq, &bw, nn, mm);
    let lam = CIval::real(prob.lambda());
    let mut f = [vec![vec![CIval::ZERO; 2 * mm + 1]; nn + 1], vec![vec![CIval::ZERO; 2 * mm + 1]; nn + 1]];
    for o in 0..=nn {
        for mi in -(mm as i64)..=mm as i64 {
            let idx = (mi + mm as i64) as usize;
            let a1 = CIval::from(w1.get(o, mi));
            let a2 = CIval::from(w2.get(o, mi));
            let (r1, r2) = if o == 0 {
                (a1, a2)
            } else if o == 1 {
                let pick = |v: &[Complex64]| if mi.unsigned_abs() as usize <= m { v[(mi + m as i64) as usize] } else { C0 };
                (a1 - CIval::from(pick(&prob.v1)), a2 - CIval::from(pick(&prob.v2)))
            } else {
                let d = lam.scale(RIval::point(o as f64)) + CIval::point(0.0, mi as f64);
                let conv: CIval = [-2i64, 2].iter().map(|s| CIval::from(w1.get(o, mi - s)).scale(RIval::point(gamma3(*s)))).sum();
                let r1 = d * a1 - a2;
                let r2 = d * a2 + a1.scale(prob.a) - conv.scale(prob.b) - cube.get(o, mi).scale(prob.c);
                (r1, r2)
            };
            f[0][o][idx] = r1;
            f[1][o][idx] = r2;
        }
    }
    let w1_norm = bw.norm_upper(prob.nu);
    let w1sq_norm = sq.norm_upper(prob.nu);
    Ok(ManifoldResidual { nn, mm, f, w1_norm, w1sq_norm, sq })
}

impl ManifoldResidual {
    /// Coefficient `F^{(comp)}_{n,m}` (zero outside the stored range).
    pub fn get(&self, comp: usize, n: usize, m: i64) -> CIval {
        if n > self.nn || m.unsigned_abs() as usize > self.mm {
            CIval::ZERO
        } else {
            self.f[comp][n][(m + self.mm as i64) as usize]
        }
    }

    /// Truncated part as a coordinate vector (order-major, `n ≤ N`, `|m| ≤ M`).
    pub fn truncated(&self, n: usize, m: usize) -> Vec<CIval> {
        let mut out = Vec::with_capacity((n + 1) * 2 * (2 * m + 1));
        for o in 0..=n {
            for comp in 0..2 {
                out.extend((-(m as i64)..=m as i64).map(|mi| self.get(comp, o, mi)));
            }
        }
        out
    }
}

/// Row/column layout of the truncated space.
pub fn layout(n: usize, m: usize, nu: f64) -> Result<SpaceLayout> {
    let mut coords = Vec::with_capacity((n + 1) * 2 * (2 * m + 1));
    for o in 0..=n {
        for comp in 0..2 {
            coords.extend((-(m as i64)..=m as i64).map(|mi| Coord::TaylorFourier { comp, n: o, m: mi }));
        }
    }
    SpaceLayout::new(coords, nu, 1.0)
}

// ---------------------------------------------------------------------------
// Floating truncated map, derivative and inverse
// ---------------------------------------------------------------------------

/// `D_n = [[im + nλ, −1], [a − b Conv(γ³), im + nλ]]` on `|m| ≤ M`.
fn d_block(prob: &ManifoldProblem, n: usize) -> DenseMatrix {
    let k = prob.k();
    let mm = prob.m as i64;
    let (a, b) = (prob.a.mid(), prob.b.mid());
    DenseMatrix::from_fn(2 * k, 2 * k, |i, j| {
        let (ci, mi) = (i / k, (i % k) as i64 - mm);
        let (cj, mj) = (j / k, (j % k) as i64 - mm);
        let diag = Complex64::new(n as f64 * prob.lambda_bar, mi as f64);
        match (ci, cj) {
            (0, 0) | (1, 1) if mi == mj => diag,
            (0, 1) if mi == mj => Complex64::new(-1.0, 0.0),
            (1, 0) => Complex64::new(if mi == mj { a } else { 0.0 } - b * gamma3(mi - mj), 0.0),
            _ => C0,
        }
    })
}

/// Floating `Conv(p)` matrix `(m, m') ↦ p_{m−m'}` on `|m|, |m'| ≤ M`.
fn conv_matrix(p: &[Complex64], pm: usize, m: usize, scale: Complex64) -> DenseMatrix {
    let k = 2 * m + 1;
    DenseMatrix::from_fn(k, k, |i, j| {
        let d = i as i64 - j as i64;
        if d.unsigned_abs() as usize <= pm {
            p[(d + pm as i64) as usize] * scale
        } else {
            C0
        }
    })
}

fn resonance_guard(prob: &ManifoldProblem) -> Result<()> {
    for n in 2..=prob.n {
        for mi in -(prob.m as i64)..=prob.m as i64 {
            if Complex64::new(n as f64 * prob.lambda_bar, mi as f64).norm() < 1e-10 {
                return Err(Error::Singular(format!("resonant homological block at (n, m) = ({n}, {mi})")));
            }
        }
    }
    Ok(())
}

/// Floating inverses `D_n⁻¹`, `n = 2..=N` (entries 0 and 1 are identities).
fn d_inverses(prob: &ManifoldProblem) -> Result<Vec<DenseMatrix>> {
    resonance_guard(prob)?;
    let k2 = 2 * prob.k();
    let mut out = vec![DenseMatrix::identity(k2), DenseMatrix::identity(k2)];
    for n in 2..=prob.n {
        out.push(approx_inverse(&d_block(prob, n))?);
    }
    Ok(out)
}

fn sq_float(w1: &FTf, n: usize, m: usize) -> FTf {
    conv_ftf(w1, w1, n, 2 * m)
}

/// Order-by-order solution of the truncated homological equations.
pub fn homological_recursion(prob: &ManifoldProblem) -> Result<ManifoldCandidate> {
    let (n, m) = (prob.n, prob.m);
    let k = prob.k();
    let dinv = d_inverses(prob)?;
    let mut w1 = FTf::zeros(n, m);
    let mut w2 = FTf::zeros(n, m);
    w1.order_mut(1).copy_from_slice(&prob.v1);
    w2.order_mut(1).copy_from_slice(&prob.v2);
    let mut sq = FTf::zeros(n, 2 * m);
    let c = prob.c.mid();
    for o in 2..=n {
        // sq_{o−1} only involves orders ≤ o − 2 of w¹.
        for j in 1..o - 1 {
            let (p, q) = (w1.order(j).to_vec(), w1.order(o - 1 - j).to_vec());
            conv_acc(&p, m, &q, m, sq.order_mut(o - 1), 2 * m);
        }
        let mut cube = vec![C0; k];
        for j in 2..o {
            conv_acc(sq.order(j), 2 * m, w1.order(o - j), m, &mut cube, m);
        }
        let mut rhs = vec![C0; 2 * k];
        for i in 0..k {
            rhs[k + i] = cube[i] * c;
        }
        let sol = dinv[o].matvec(&rhs);
        w1.order_mut(o).copy_from_slice(&sol[..k]);
        w2.order_mut(o).copy_from_slice(&sol[k..]);
    }
    let mut cand = ManifoldCandidate {
        n,
        m,
        w1: (0..=n).map(|o| w1.order(o).to_vec()).collect(),
        w2: (0..=n).map(|o| w2.order(o).to_vec()).collect(),
    };
    cand.symmetrize();
    cand.w1[1] = prob.v1.clone();
    cand.w2[1] = prob.v2.clone();
    Ok(cand)
}

/// Truncated manifold map for [`crate::numerics::newton_refine`].
pub struct ManifoldMap<'a> {
    pub prob: &'a ManifoldProblem,
    dinv: Vec<DenseMatrix>,
}

impl<'a> ManifoldMap<'a> {
    pub fn new(prob: &'a ManifoldProblem) -> Result<Self> {
        Ok(ManifoldMap { prob, dinv: d_inverses(prob)? })
    }
}

/// Floating truncated residual (orders `≤ N`, modes `≤ M`), order-major.
fn residual_float(prob: &ManifoldProblem, x: &[Complex64]) -> Vec<Complex64> {
    let (n, m) = (prob.n, prob.m);
    let k = prob.k();
    let cand = ManifoldCandidate::from_vec(n, m, x);
    let w1 = FTf::from_orders(&cand.w1, m);
    let sq = sq_float(&w1, n, m);
    let cube = conv_ftf(&sq, &w1, n, m);
    let (a, b, c) = (prob.a.mid(), prob.b.mid(), prob.c.mid());
    let mut r = vec![C0; prob.dim()];
    for o in 0..=n {
        for i in 0..k {
            let mi = i as i64 - m as i64;
            let (x1, x2) = (cand.w1[o][i], cand.w2[o][i]);
            let (r1, r2) = match o {
                0 => (x1, x2),
                1 => (x1 - prob.v1[i], x2 - prob.v2[i]),
                _ => {
                    let d = Complex64::new(o as f64 * prob.lambda_bar, mi as f64);
                    let conv = 0.5 * (w1.get(o, mi - 2) + w1.get(o, mi + 2));
                    (d * x1 - x2, d * x2 + a * x1 - b * conv - c * cube.get(o, mi))
                }
            };
            r[o * 2 * k + i] = r1;
            r[o * 2 * k + k + i] = r2;
        }
    }
    r
}

/// Floating norm `max_comp Σ_n Σ_m |x| ν^{|m|}` on the truncated layout.
pub fn float_norm(x: &[Complex64], n: usize, m: usize, nu: f64) -> f64 {
    let k = 2 * m + 1;
    let w: Vec<f64> = (0..k).map(|i| nu.powi((i as i64 - m as i64).unsigned_abs() as i32)).collect();
    let mut s = [0.0; 2];
    for o in 0..=n {
        for (comp, acc) in s.iter_mut().enumerate() {
            *acc += (0..k).map(|i| x[o * 2 * k + comp * k + i].norm() * w[i]).sum::<f64>();
        }
    }
    s[0].max(s[1])
}

impl crate::numerics::TruncatedMap for ManifoldMap<'_> {
    fn residual(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        Ok(residual_float(self.prob, x))
    }

    /// Block forward substitution with the lower-triangular derivative.
    fn solve_linear(&self, x: &[Complex64], r: &[Complex64]) -> Result<Vec<Complex64>> {
        let (n, m) = (self.prob.n, self.prob.m);
        let k = self.prob.k();
        let cand = ManifoldCandidate::from_vec(n, m, x);
        let sq = sq_float(&FTf::from_orders(&cand.w1, m), n, m);
        let c3 = 3.0 * self.prob.c.mid();
        let mut d = vec![C0; r.len()];
        for o in 0..=n {
            let mut rhs = r[o * 2 * k..(o + 1) * 2 * k].to_vec();
            let mut acc = vec![C0; k];
            for j in 0..o.saturating_sub(1) {
                conv_acc(sq.order(o - j), 2 * m, &d[j * 2 * k..j * 2 * k + k], m, &mut acc, m);
            }
            for i in 0..k {
                rhs[k + i] += acc[i] * c3;
            }
            let sol = self.dinv[o].matvec(&rhs);
            d[o * 2 * k..(o + 1) * 2 * k].copy_from_slice(&sol);
        }
        Ok(d)
    }

    fn norm(&self, r: &[Complex64]) -> f64 {
        float_norm(r, self.prob.n, self.prob.m, self.prob.nu)
    }

    fn project(&self, x: &mut [Complex64]) {
        let mut c = ManifoldCandidate::from_vec(self.prob.n, self.prob.m, x);
        c.symmetrize();
        c.w1[0].fill(C0);
        c.w2[0].fill(C0);
        c.w1[1] = self.prob.v1.clone();
        c.w2[1] = self.prob.v2.clone();
        x.copy_from_slice(&c.to_vec());
    }
}

/// Recursion followed by a Newton polish.
pub fn seed_and_refine(prob: &ManifoldProblem) -> Result<(ManifoldCandidate, crate::numerics::NewtonReport)> {
    let seed = homological_recursion(prob)?;
    refine(&seed, prob)
}

/// Newton polish of a manifold candidate.
pub fn refine(cand: &ManifoldCandidate, prob: &ManifoldProblem) -> Result<(ManifoldCandidate, crate::numerics::NewtonReport)> {
    let map = ManifoldMap::new(prob)?;
    let (x, rep) = crate::numerics::newton_refine(&map, &cand.to_vec())?;
    Ok((ManifoldCandidate::from_vec(prob.n, prob.m, &x), rep))
}

// ---------------------------------------------------------------------------
// Approximate inverse
// ---------------------------------------------------------------------------

/// Complex `C[c_off..] (+)= ±A·B` on raw planes (row-major, given strides).
#[allow(clippy::too_many_arguments)]
fn zgemm(
    (m, k, n): (usize, usize, usize),
    sign: f64,
    a: &DenseMatrix,
    a_off: usize,
    b: &DenseMatrix,
    b_off: usize,
    beta: f64,
    c: &mut DenseMatrix,
    c_off: usize,
) {
    let (ars, brs, crs) = (a.cols(), b.cols(), c.cols());
    let (cre, cim) = (&mut c.re, &mut c.im);
    let (are, aim, bre, bim) = (&a.re, &a.im, &b.re, &b.im);
    dgemm_raw(m, k, n, sign, are, a_off, ars, bre, b_off, brs, beta, &mut cre[c_off..], crs);
    dgemm_raw(m, k, n, -sign, aim, a_off, ars, bim, b_off, brs, 1.0, &mut cre[c_off..], crs);
    dgemm_raw(m, k, n, sign, are, a_off, ars, bim, b_off, brs, beta, &mut cim[c_off..], crs);
    dgemm_raw(m, k, n, sign, aim, a_off, ars, bre, b_off, brs, 1.0, &mut cim[c_off..], crs);
}

/// Floating approximate inverse of the truncated derivative, built by block
/// forward substitution (it is block lower-triangular in the order index).
pub fn approx_inverse_manifold(cand: &ManifoldCandidate, prob: &ManifoldProblem) -> Result<DenseMatrix> {
    let (n, m) = (prob.n, prob.m);
    let k = prob.k();
    let bs = 2 * k;
    let dim = prob.dim();
    let dinv = d_inverses(prob)?;
    let sq = sq_float(&FTf::from_orders(&cand.w1, m), n, m);
    let c3 = Complex64::new(3.0 * prob.c.mid(), 0.0);
    let conv: Vec<DenseMatrix> = (0..=n).map(|d| conv_matrix(sq.order(d), 2 * m, m, c3)).collect();
    let mut a = DenseMatrix::zeros(dim, dim);
    for o in 0..=n {
        // T = Σ_{j ≤ o−2} 3c Conv(sq_{o−j}) · A¹_{j,·}  (65 × o·bs)
        let width = o * bs;
        if o >= 2 && width > 0 {
            let mut t = DenseMatrix::zeros(k, width);
            for j in 0..=o - 2 {
                let cols = (j + 1) * bs;
                zgemm((k, k, cols), 1.0, &conv[o - j], 0, &a, j * bs * dim, 1.0, &mut t, 0);
            }
            // A_{o,·} = D_o⁻¹[:, comp2] · T  (sign: E = −3c Conv, so −(−)·=+)
            let dcol = DenseMatrix::from_fn(bs, k, |i, jj| dinv[o].get(i, k + jj));
            zgemm((bs, k, width), 1.0, &dcol, 0, &t, 0, 0.0, &mut a, o * bs * dim);
        }
        for i in 0..bs {
            for j in 0..bs {
                a.set(o * bs + i, o * bs + j, dinv[o].get(i, j));
            }
        }
    }
    if !a.is_finite() {
        return Err(Error::Singular("non-finite manifold inverse".into()));
    }
    Ok(a)
}

// ---------------------------------------------------------------------------
// Bounds
// ---------------------------------------------------------------------------

/// Summands of the manifold bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldDiagnostics {
    pub y_finite: RIval,
    pub y_taylor_tail: RIval,
    pub y_fourier_tail: RIval,
    pub y_bundle: RIval,
    pub z1_finite: RIval,
    pub z1_tail: RIval,
    pub a_f_norm: RIval,
    /// Floating norm of the truncated residual after refinement.
    #[serde(with = "crate::serial::hex_f64")]
    pub truncated_residual: f64,
    /// Floating `‖w̄_N‖`, the decay of the last computed order.
    #[serde(with = "crate::serial::hex_f64")]
    pub last_order_norm: f64,
}

/// `(1/√(4λ²+(M+1)²) + 1/|λ(N+1)|)`.
fn tails(prob: &ManifoldProblem) -> Result<RIval> {
    let l = prob.lambda();
    Ok(tail_norm_bounds(TailKind::ManifoldFourier, Some(l), prob.m, None, None)?
        + tail_norm_bounds(TailKind::ManifoldTaylor, Some(l), prob.m, Some(prob.n), None)?)
}

/// Y bound; returns `(finite, Taylor tail, Fourier tail, bundle part)`.
pub fn bound_y_manifold(res: &ManifoldResidual, a_f: &BallMat, a_f_norm: RIval, prob: &ManifoldProblem) -> Result<[RIval; 4]> {
    let (n, m) = (prob.n, prob.m);
    let lay = layout(n, m, prob.nu)?;
    let mut fv = res.truncated(n, m);
    // Orders 0 and 1 are the pinning rows; their v-dependence is the r_F part.
    for z in fv.iter_mut().take(2 * 2 * prob.k()) {
        *z = CIval::ZERO;
    }
    let finite = crate::operators::vector_norm(&ball_matvec(a_f.full(), &fv), &lay);
    let lam = CIval::real(prob.lambda());
    let nu_p = weight_powers(prob.nu, res.mm);
    let mut taylor = [RIval::ZERO; 2];
    let mut fourier = [RIval::ZERO; 2];
    for comp in 0..2 {
        for o in 2..=res.nn {
            for mi in -(res.mm as i64)..=res.mm as i64 {
                let inside_n = o <= n;
                let inside_m = mi.unsigned_abs() as usize <= m;
                if inside_n && inside_m {
                    continue;
                }
                let f = res.get(comp, o, mi);
                if f.is_zero() {
                    continue;
                }
                let d = (lam.scale(RIval::point(o as f64)) + CIval::point(0.0, mi as f64)).abs();
                let t = (f.abs() * nu_p[mi.unsigned_abs() as usize]).checked_div(&d)?;
                if inside_n {
                    fourier[comp] = fourier[comp] + t;
                } else {
                    taylor[comp] = taylor[comp] + t;
                }
            }
        }
    }
    let rf = RIval::point(prob.r_f);
    let bundle = rf * a_f_norm + rf;
    Ok([finite, taylor[0].max(&taylor[1]), fourier[0].max(&fourier[1]), bundle])
}

/// Columns of order `k`: comp 1 with `|m'| ≤ 3M`, comp 2 with `|m'| ≤ M`.
fn z1_col_layout(k: usize, m: usize, nu: f64) -> Result<SpaceLayout> {
    let mut coords: Vec<Coord> = (-(3 * m as i64)..=3 * m as i64).map(|mi| Coord::TaylorFourier { comp: 0, n: k, m: mi }).collect();
    coords.extend((-(m as i64)..=m as i64).map(|mi| Coord::TaylorFourier { comp: 1, n: k, m: mi }));
    SpaceLayout::new(coords, nu, 1.0)
}

fn ball_add(mut x: BallMat, y: &BallMat, cols: usize) -> BallMat {
    let u2 = 2.0 * f64::EPSILON;
    let xc = x.cols();
    let mut rad = x.rad.take().unwrap_or_else(|| vec![0.0; x.rows() * xc]);
    for i in 0..x.rows() {
        for j in 0..cols {
            let s = x.mid.get(i, j) + y.mid.get(i, j);
            x.mid.set(i, j, s);
            let r = &mut rad[i * xc + j];
            *r = add_up(add_up(*r, y.rad_at(i, j)), mul_up(u2, abs_up(s)));
        }
    }
    x.rad = Some(rad);
    x
}

/// Finite part of Z1: `‖Π − A_f DF(w̄) Π_{[0,N]×[0,3M]}‖`, assembled one
/// column order at a time.
pub fn bound_z1_finite(res: &ManifoldResidual, a_f: &DenseMatrix, prob: &ManifoldProblem) -> Result<RIval> {
    let (n, m) = (prob.n, prob.m);
    let k = prob.k();
    let bs = 2 * k;
    let dim = prob.dim();
    let rows_all = layout(n, m, prob.nu)?;
    let mut table = BlockNormTable::new(&rows_all, &z1_col_layout(0, m, prob.nu)?);
    // A_f restricted to comp-2 columns, order-major (contiguous per order).
    let a2 = BallMat::point(DenseMatrix::from_fn(dim, (n + 1) * k, |i, j| a_f.get(i, (j / k) * bs + k + j % k)));
    let a_full = BallMat::point(a_f.clone());
    let lam = prob.lambda();
    let c3 = prob.c * RIval::point(-3.0);
    let k3 = 6 * m + 1;
    let ncols = k3 + k;
    for col in 0..=n {
        let cols = z1_col_layout(col, m, prob.nu)?;
        let row0 = col * bs;
        let nrows = dim - row0;
        // D strip: order-`col` rows against the order-`col` columns.
        let dstrip = BallMat::from_cival_fn(bs, ncols, |i, j| {
            let (ci, mi) = (i / k, (i % k) as i64 - m as i64);
            let (cj, mj) = if j < k3 { (0, j as i64 - 3 * m as i64) } else { (1, (j - k3) as i64 - m as i64) };
            if col < 2 {
                return if ci == cj && mi == mj { CIval::ONE } else { CIval::ZERO };
            }
            let diag = CIval::real(lam * RIval::point(col as f64)) + CIval::point(0.0, mi as f64);
            match (ci, cj) {
                (0, 0) | (1, 1) if mi == mj => diag,
                (0, 1) if mi == mj => CIval::point(-1.0, 0.0),
                (1, 0) => {
                    let g = CIval::real(RIval::point(-gamma3(mi - mj)) * prob.b);
                    if mi == mj {
                        g + CIval::real(prob.a)
                    } else {
                        g
                    }
                }
                _ => CIval::ZERO,
            }
        });
        let mut c = ball_mul(a_full.view(row0, row0, nrows, bs), dstrip.full());
        // E strip: comp-2 rows of orders j ≥ col+2 against comp-1 columns.
        let j0 = (col + 2).max(2);
        if j0 <= n {
            let nj = n + 1 - j0;
            let estrip = BallMat::from_cival_fn(nj * k, k3, |i, jc| {
                let (jo, mi) = (j0 + i / k, (i % k) as i64 - m as i64);
                let mj = jc as i64 - 3 * m as i64;
                res.sq.get(jo - col, mi - mj) * CIval::real(c3)
            });
            let e = ball_mul(a2.view(row0, j0 * k, nrows, nj * k), estrip.full());
            c = ball_add(c, &e, k3);
        }
        let ones: Vec<(usize, usize)> = (0..bs)
            .map(|i| {
                let (ci, mi) = (i / k, i % k);
                (i, if ci == 0 { mi + 2 * m } else { k3 + mi })
            })
            .collect();
        let c = c.identity_minus(ones);
        let rows = rows_all.select(&(row0..dim).collect::<Vec<_>>());
        table.absorb(&c, &rows, &cols);
    }
    RIval::new(0.0, table.norm())
}

/// `Z2 = 3|c| (‖A_f‖ + tails)(2‖w̄¹‖ + r*)`.
pub fn bound_z2_manifold(a_f_norm: RIval, prob: &ManifoldProblem, w1_norm: f64, r_star: f64) -> Result<RIval> {
    let t = tails(prob)?;
    Ok(RIval::point(3.0) * prob.c.abs() * (a_f_norm + t) * (RIval::point(2.0) * RIval::point(w1_norm) + RIval::point(r_star)))
}

/// Stage-2 certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldCertificate {
    pub stage: String,
    pub a: RIval,
    pub b: RIval,
    pub c: RIval,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(with = "crate::serial::hex_f64")]
    pub nu: f64,
    #[serde(rename = "lambda_bar_hex", with = "crate::serial::hex_f64")]
    pub lambda_bar: f64,
    #[serde(rename = "r_F_hex", with = "crate::serial::hex_f64")]
    pub r_f: f64,
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
    /// `‖w̄¹‖_TF` upper bound.
    #[serde(rename = "w1_norm_hex", with = "crate::serial::hex_f64")]
    pub w1_norm: f64,
    /// `‖w̄¹*w̄¹‖_TF` upper bound.
    #[serde(rename = "w1sq_norm_hex", with = "crate::serial::hex_f64")]
    pub w1sq_norm: f64,
    pub diagnostics: ManifoldDiagnostics,
    pub verdict: Verdict,
}

impl ManifoldCertificate {
    pub fn bounds(&self) -> KBounds {
        KBounds { y: RIval::point(self.y), z1: RIval::point(self.z1), z2: RIval::point(self.z2), r_star: self.r_star }
    }
}

/// Runs the full stage-2 validation at radius `r*`.
pub fn validate_manifold(cand: &ManifoldCandidate, prob: &ManifoldProblem, r_star: f64) -> Result<ManifoldCertificate> {
    if !(r_star > 0.0) {
        return Err(Error::Precondition(format!("r* = {r_star} must be positive")));
    }
    if !(prob.lambda().hi() < 0.0) {
        return Err(Error::Precondition("λ̄ + r_F must be negative".into()));
    }
    cand.check(prob)?;
    let res = f_manifold(cand, prob)?;
    let a_f = approx_inverse_manifold(cand, prob)?;
    let lay = layout(prob.n, prob.m, prob.nu)?;
    let a_ball = BallMat::point(a_f);
    let a_f_norm = crate::operators::opnorm_weighted_l1(&crate::operators::FiniteBlockOp::new(a_ball.clone(), lay.clone(), lay)?);
    let [y_finite, y_taylor_tail, y_fourier_tail, y_bundle] = bound_y_manifold(&res, &a_ball, a_f_norm, prob)?;
    let a_f = a_ball.mid;
    let z1_finite = bound_z1_finite(&res, &a_f, prob)?;
    let factor = RIval::ONE
        .max(&(prob.a.abs() + prob.b.abs() * RIval::point(prob.nu).sqr() + RIval::point(3.0) * prob.c.abs() * RIval::point(res.w1sq_norm)));
    let z1_tail = tails(prob)? * factor;
    let z2 = bound_z2_manifold(a_f_norm, prob, res.w1_norm, r_star)?;
    let y = y_finite + y_taylor_tail + y_fourier_tail + y_bundle;
    let bounds = KBounds { y, z1: z1_finite + z1_tail, z2, r_star };
    let radii = radii_from_bounds(&bounds);
    let verdict = Verdict::from_bounds(&bounds, &radii, None);
    let truncated_residual = float_norm(
        &crate::numerics::TruncatedMap::residual(&ManifoldMap { prob, dinv: Vec::new() }, &cand.to_vec())?,
        prob.n,
        prob.m,
        prob.nu,
    );
    Ok(ManifoldCertificate {
        stage: "manifold".into(),
        a: prob.a,
        b: prob.b,
        c: prob.c,
        n: prob.n,
        m: prob.m,
        nu: prob.nu,
        lambda_bar: prob.lambda_bar,
        r_f: prob.r_f,
        r_star,
        y: bounds.y.hi(),
        z1: bounds.z1.hi(),
        z2: bounds.z2.hi(),
        r: radii.r_min,
        r_max: radii.r_max,
        w1_norm: res.w1_norm,
        w1sq_norm: res.w1sq_norm,
        diagnostics: ManifoldDiagnostics {
            y_finite,
            y_taylor_tail,
            y_fourier_tail,
            y_bundle,
            z1_finite,
            z1_tail,
            a_f_norm,
            truncated_residual,
            last_order_norm: cand.order_norm(prob.n, prob.nu),
        },
        verdict,
    })
}

// ---------------------------------------------------------------------------
// Rigorous evaluation of W
// ---------------------------------------------------------------------------

/// Enclosure of `∂_σ^k W(θ, σ)` (`k ≤ 2`) for the true parameterization in
/// the validated ball of radius `r_TF` around the candidate.
///
/// Components 3 and 4 are `γ(θ) = (cos 2θ, −2 sin 2θ)` for `k = 0` and zero
/// for `k ≥ 1`.
pub fn eval_w_rigorous(cand: &ManifoldCandidate, r_tf: f64, theta: RIval, sigma: RIval, deriv: u32) -> Result<[CIval; 4]> {
    let s = sigma.mag();
    let tail = match deriv {
        0 => {
            if s > 1.0 {
                return Err(Error::Domain(format!("|σ| = {s} exceeds 1")));
            }
            RIval::point(r_tf)
        }
        1 | 2 => {
            if s >= 1.0 {
                return Err(Error::Domain(format!("|σ| = {s} is too close to 1 for derivative {deriv}")));
            }
            let one_minus = RIval::ONE - RIval::point(s);
            let p = one_minus.powi(deriv + 1);
            (RIval::point(r_tf) * RIval::point(if deriv == 1 { 1.0 } else { 2.0 })).checked_div(&p)?
        }
        _ => return Err(Error::Precondition(format!("derivative order {deriv} is not supported"))),
    };
    let e = cis_table(theta, cand.m);
    let eval = |w: &[Vec<Complex64>]| {
        let mut acc = CIval::ZERO;
        for n in (deriv as usize..=cand.n).rev() {
            let f: f64 = (0..deriv as usize).map(|j| (n - j) as f64).product();
            let c: CIval = w[n].iter().zip(&e).map(|(z, ei)| CIval::from(*z) * *ei).sum();
            acc = acc.scale(sigma) + c.scale(RIval::point(f));
        }
        let t = tail.hi();
        CIval::new(acc.re.inflate(t), acc.im.inflate(t))
    };
    let (g3, g4) = if deriv == 0 {
        let two = theta * RIval::point(2.0);
        (CIval::real(two.cos()), CIval::real(two.sin() * RIval::point(-2.0)))
    } else {
        (CIval::ZERO, CIval::ZERO)
    };
    Ok([eval(&cand.w1), eval(&cand.w2), g3, g4])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{seed_and_refine as bundle_seed, validate_bundle, BundleProblem};
    use crate::interval::parse_decimal;

    fn small_problem(n: usize, m: usize) -> (ManifoldProblem, BundleCertificate) {
        let bp = BundleProblem::new(
            parse_decimal("1.1025").unwrap(),
            parse_decimal("0.55125").unwrap(),
            parse_decimal("-0.826875").unwrap(),
            1.05,
            RIval::point(0.5),
            m,
        )
        .unwrap();
        let (bc, _) = bundle_seed(&bp).unwrap();
        let cert = validate_bundle(&bc, &bp).unwrap();
        (ManifoldProblem::from_bundle(&cert, &bc, n, m).unwrap(), cert)
    }

    #[test]
    fn recursion_solves_truncated_map() {
        let (p, _) = small_problem(8, 8);
        let cand = homological_recursion(&p).unwrap();
        cand.check(&p).unwrap();
        let r = residual_float(&p, &cand.to_vec());
        assert!(float_norm(&r, p.n, p.m, p.nu) < 1e-14);
    }

    #[test]
    fn inverse_matches_forward_substitution() {
        let (p, _) = small_problem(5, 6);
        let cand = homological_recursion(&p).unwrap();
        let a = approx_inverse_manifold(&cand, &p).unwrap();
        let map = ManifoldMap::new(&p).unwrap();
        let r: Vec<Complex64> = (0..p.dim()).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let d1 = crate::numerics::TruncatedMap::solve_linear(&map, &cand.to_vec(), &r).unwrap();
        let d2 = a.matvec(&r);
        for (x, y) in d1.iter().zip(&d2) {
            assert!((x - y).norm() < 1e-10 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn eval_tail_radii() {
        let (p, _) = small_problem(4, 10);
        let cand = homological_recursion(&p).unwrap();
        let w0 = eval_w_rigorous(&cand, 1e-6, RIval::point(0.3), RIval::ZERO, 0).unwrap();
        assert!(w0[2].re.contains(0.6f64.cos()));
        assert!((w0[0].re.width() - 2e-6).abs() < 1e-12);
        let w1 = eval_w_rigorous(&cand, 1e-6, RIval::point(0.3), RIval::point(0.5), 1).unwrap();
        assert!(w1[0].re.width() >= 8e-6 && w1[0].re.width() < 8e-6 * (1.0 + 1e-9));
        assert!(eval_w_rigorous(&cand, 1e-6, RIval::point(0.3), RIval::point(1.0), 1).is_err());
    }

    #[test]
    fn small_truncation_reports_z1_failure() {
        // N = M = 12 is too coarse: the bounds are computed but Z1 ≥ 1.
        let (p, _) = small_problem(12, 12);
        let (cand, rep) = seed_and_refine(&p).unwrap();
        assert!(rep.converged, "{rep:?}");
        let cert = validate_manifold(&cand, &p, 1e-3).unwrap();
        assert!(!cert.verdict.is_proved());
        assert!(cert.verdict.to_string().contains("Z1"), "{}", cert.verdict);
        // Y is finite but large (about 1e−3): the truncation tail beyond order 12 dominates.
        assert!(cert.y.is_finite() && cert.y < 1e-2, "Y = {}", cert.y);
        assert!(cert.z1 >= 1.0, "Z1 = {}", cert.z1);
    }
}
