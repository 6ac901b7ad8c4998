//! Stage 1: the Floquet exponent `λ < 0` and stable bundle `v` of the
//! periodic orbit `γ(θ) = (0, 0, cos 2θ, −2 sin 2θ)`.
//!
//! Unknowns `x = (λ, v¹, v²) ∈ ℂ × S_F²`; the validation map is
//! `F(x) = (η(v) − l, L_λ v − f(v))` with `η(v) = Σ_{|m|≤M} v¹_m`,
//! `(L_λ v)_m = (im + λ) v_m` and `f(v) = (v², −a v¹ + b γ³ * v¹)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::certify::{radii_from_bounds, KBounds, RadiiResult, Verdict};
use crate::dense::{approx_inverse, DenseMatrix};
use crate::error::{Error, Result};
use crate::interval::{CIval, RIval};
use crate::operators::{ball_matvec, ball_mul, opnorm_weighted_l1, tail_norm_bounds, BallMat, Coord, FiniteBlockOp, SpaceLayout, TailKind};
use crate::seqspace::{check_weight, conv_fourier, FourierSeq};

/// Parameters of the bundle problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleProblem {
    pub a: RIval,
    pub b: RIval,
    pub c: RIval,
    #[serde(with = "crate::serial::hex_f64")]
    pub nu: f64,
    /// Phase target `l` for `η(v) = l`.
    pub l: RIval,
    /// Fourier truncation `M`.
    pub m: usize,
}

impl BundleProblem {
    pub fn new(a: RIval, b: RIval, c: RIval, nu: f64, l: RIval, m: usize) -> Result<Self> {
        check_weight(nu)?;
        if m < 2 {
            return Err(Error::Precondition(format!("Fourier truncation M = {m} must be at least 2")));
        }
        Ok(BundleProblem { a, b, c, nu, l, m })
    }
}

/// Floating approximation `(λ̄, v̄¹, v̄²)` with `v̄` stored for `m = −M..=M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleCandidate {
    pub m: usize,
    #[serde(with = "crate::serial::hex_f64")]
    pub lambda: f64,
    #[serde(with = "crate::serial::hex_vec_c64")]
    pub v1: Vec<Complex64>,
    #[serde(with = "crate::serial::hex_vec_c64")]
    pub v2: Vec<Complex64>,
}

impl BundleCandidate {
    pub fn dim(m: usize) -> usize {
        1 + 2 * (2 * m + 1)
    }

    pub fn check_shape(&self) -> Result<()> {
        let k = 2 * self.m + 1;
        if self.v1.len() != k || self.v2.len() != k {
            return Err(Error::Incompatible(format!("bundle candidate arrays must have length {k}")));
        }
        if !self.lambda.is_finite() || self.v1.iter().chain(&self.v2).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Precondition("non-finite bundle candidate".into()));
        }
        Ok(())
    }

    /// Coordinate vector `[λ, v¹_{−M..M}, v²_{−M..M}]`.
    pub fn to_vec(&self) -> Vec<Complex64> {
        let mut x = Vec::with_capacity(Self::dim(self.m));
        x.push(Complex64::new(self.lambda, 0.0));
        x.extend_from_slice(&self.v1);
        x.extend_from_slice(&self.v2);
        x
    }

    /// Inverse of [`Self::to_vec`]; the imaginary part of `λ` is dropped.
    pub fn from_vec(m: usize, x: &[Complex64]) -> Self {
        let k = 2 * m + 1;
        BundleCandidate { m, lambda: x[0].re, v1: x[1..1 + k].to_vec(), v2: x[1 + k..1 + 2 * k].to_vec() }
    }

    /// Exact check of `v_{−m} = conj(v_m)` for both components.
    pub fn is_conj_symmetric(&self) -> bool {
        let k = 2 * self.m;
        [&self.v1, &self.v2].iter().all(|v| (0..=k).all(|i| v[k - i] == v[i].conj()))
    }

    /// Imposes conjugate symmetry by averaging `v_m` with `conj(v_{−m})`.
    pub fn symmetrize(&mut self) {
        let k = 2 * self.m;
        for v in [&mut self.v1, &mut self.v2] {
            for i in 0..self.m {
                let z = (v[k - i] + v[i].conj()) * 0.5;
                v[k - i] = z;
                v[i] = z.conj();
            }
            v[self.m].im = 0.0;
        }
    }

    /// Interval point enclosure of the candidate.
    pub fn to_x(&self, nu: f64) -> Result<BundleX> {
        self.check_shape()?;
        let seq = |v: &[Complex64]| FourierSeq::from_coeffs(v.iter().map(|&z| CIval::from(z)).collect(), nu);
        Ok(BundleX { lambda: CIval::point(self.lambda, 0.0), v1: seq(&self.v1)?, v2: seq(&self.v2)? })
    }
}

/// A point of `ℂ × S_F²` with interval coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct BundleX {
    pub lambda: CIval,
    pub v1: FourierSeq,
    pub v2: FourierSeq,
}

impl BundleX {
    /// The conjugation `C(λ, v) = (λ*, (v*_{−m})_m)`.
    pub fn conj_flip(&self) -> BundleX {
        let flip = |s: &FourierSeq| {
            let mut o = s.clone();
            let k = s.m_max() as i64;
            for m in -k..=k {
                o.set(m, s.get(-m).conj());
            }
            o
        };
        BundleX { lambda: self.lambda.conj(), v1: flip(&self.v1), v2: flip(&self.v2) }
    }

    /// `max{|λ|, ‖v¹‖, ‖v²‖}`.
    pub fn norm(&self) -> RIval {
        self.lambda.abs().max(&self.v1.norm()).max(&self.v2.norm())
    }
}

/// Validation map `F(x) = (η(v) − l, L_λ v − f(v))`.
pub fn f_bundle(x: &BundleX, prob: &BundleProblem) -> Result<BundleX> {
    let gamma3 = FourierSeq::cos2(prob.nu)?;
    let k = x.v1.m_max().max(x.v2.m_max()) + 2;
    let (v1, v2) = (x.v1.resized(k), x.v2.resized(k));
    let gv = conv_fourier(&gamma3, &x.v1)?.resized(k);
    let mut o1 = FourierSeq::zeros(k, prob.nu)?;
    let mut o2 = FourierSeq::zeros(k, prob.nu)?;
    for m in -(k as i64)..=k as i64 {
        let d = x.lambda + CIval::point(0.0, m as f64);
        o1.set(m, d * v1.get(m) - v2.get(m));
        o2.set(m, d * v2.get(m) + v1.get(m).scale(prob.a) - gv.get(m).scale(prob.b));
    }
    let mm = prob.m as i64;
    let eta: CIval = (-mm..=mm).map(|m| x.v1.get(m)).sum();
    Ok(BundleX { lambda: eta - CIval::real(prob.l), v1: o1, v2: o2 })
}

/// Directional derivative `DF(x̄) h`.
pub fn df_bundle_apply(xbar: &BundleX, h: &BundleX, prob: &BundleProblem) -> Result<BundleX> {
    let gamma3 = FourierSeq::cos2(prob.nu)?;
    let k = xbar.v1.m_max().max(h.v1.m_max()).max(h.v2.m_max()) + 2;
    let gh = conv_fourier(&gamma3, &h.v1)?.resized(k);
    let mut o1 = FourierSeq::zeros(k, prob.nu)?;
    let mut o2 = FourierSeq::zeros(k, prob.nu)?;
    for m in -(k as i64)..=k as i64 {
        let d = xbar.lambda + CIval::point(0.0, m as f64);
        o1.set(m, d * h.v1.get(m) + h.lambda * xbar.v1.get(m) - h.v2.get(m));
        o2.set(m, d * h.v2.get(m) + h.lambda * xbar.v2.get(m) + h.v1.get(m).scale(prob.a) - gh.get(m).scale(prob.b));
    }
    let mm = prob.m as i64;
    let eta: CIval = (-mm..=mm).map(|m| h.v1.get(m)).sum();
    Ok(BundleX { lambda: eta, v1: o1, v2: o2 })
}

/// Coordinates `[λ, v¹_{−w..w}, v²_{−w..w}]`.
pub fn layout(w: usize, nu: f64) -> Result<SpaceLayout> {
    let mut coords = vec![Coord::Param { comp: 0 }];
    for comp in 1..=2 {
        coords.extend((-(w as i64)..=w as i64).map(|m| Coord::Fourier { comp, m }));
    }
    SpaceLayout::new(coords, nu, 1.0)
}

fn coord_index(c: &Coord, w: usize) -> Option<usize> {
    match *c {
        Coord::Param { .. } => Some(0),
        Coord::Fourier { comp, m } if m.unsigned_abs() as usize <= w => Some(1 + (comp - 1) * (2 * w + 1) + (m + w as i64) as usize),
        _ => None,
    }
}

/// Interval entries of `DF(x̄)` restricted to rows with `|m| ≤ rows_w` and
/// columns with `|m| ≤ cols_w` (plus the λ row/column).
pub fn df_bundle_matrix(xbar: &BundleX, prob: &BundleProblem, rows_w: usize, cols_w: usize) -> Result<BallMat> {
    let rl = layout(rows_w, prob.nu)?;
    let cl = layout(cols_w, prob.nu)?;
    let gamma3 = FourierSeq::cos2(prob.nu)?;
    let mm = prob.m as i64;
    Ok(BallMat::from_cival_fn(rl.len(), cl.len(), |i, j| match (rl.coord(i), cl.coord(j)) {
        (Coord::Param { .. }, Coord::Fourier { comp: 1, m }) if m.abs() <= mm => CIval::ONE,
        (Coord::Fourier { comp, m }, Coord::Param { .. }) => {
            if comp == 1 {
                xbar.v1.get(m)
            } else {
                xbar.v2.get(m)
            }
        }
        (Coord::Fourier { comp: r, m }, Coord::Fourier { comp: c, m: mc }) => match (r, c) {
            (1, 1) | (2, 2) if m == mc => xbar.lambda + CIval::point(0.0, m as f64),
            (1, 2) if m == mc => CIval::point(-1.0, 0.0),
            (2, 1) => {
                let conv = CIval::real(-prob.b) * gamma3.get(m - mc);
                if m == mc {
                    conv + CIval::real(prob.a)
                } else {
                    conv
                }
            }
            _ => CIval::ZERO,
        },
        _ => CIval::ZERO,
    }))
}

/// Floating truncated derivative (the matrix inverted for `A_f`).
pub fn df_bundle_float(cand: &BundleCandidate, prob: &BundleProblem) -> Result<DenseMatrix> {
    let x = cand.to_x(prob.nu)?;
    Ok(df_bundle_matrix(&x, prob, prob.m, prob.m)?.mid)
}

/// Flattens the truncated part (`|m| ≤ w`) of a map value to a coordinate vector.
pub fn flatten(x: &BundleX, w: usize) -> Vec<CIval> {
    let mut out = vec![x.lambda];
    for s in [&x.v1, &x.v2] {
        out.extend((-(w as i64)..=w as i64).map(|m| s.get(m)));
    }
    out
}

/// `Y = ‖A_f F(x̄)‖ + ‖Π_{(M,2M]} L_{λ̄}⁻¹ F(x̄)‖`.
pub fn bound_y_bundle(xbar: &BundleX, a_f: &BallMat, prob: &BundleProblem) -> Result<(RIval, RIval)> {
    if xbar.lambda.re.hi() >= 0.0 {
        return Err(Error::Precondition("λ̄ must be negative".into()));
    }
    let f = f_bundle(xbar, prob)?;
    let lay = layout(prob.m, prob.nu)?;
    let finite = crate::operators::vector_norm(&ball_matvec(a_f.full(), &flatten(&f, prob.m)), &lay);
    let nu_p = crate::seqspace::weight_powers(prob.nu, 2 * prob.m);
    let mut tail = RIval::ZERO;
    for s in [&f.v1, &f.v2] {
        let mut acc = RIval::ZERO;
        for k in prob.m + 1..=(2 * prob.m).min(s.m_max()) {
            for m in [k as i64, -(k as i64)] {
                let d = (xbar.lambda + CIval::point(0.0, m as f64)).abs();
                acc = acc + (s.get(m).abs() * nu_p[k]).checked_div(&d)?;
            }
        }
        tail = tail.max(&acc);
    }
    Ok((finite, tail))
}

/// `Z1 = ‖Π − A_f DF(x̄)(Π_ℂ + Π_{[0,2M]})‖ + max{1, |a|+|b|ν²}/√((M+1)²+λ̄²)`.
pub fn bound_z1_bundle(xbar: &BundleX, a_f: &BallMat, prob: &BundleProblem) -> Result<(RIval, RIval)> {
    let rows = layout(prob.m, prob.nu)?;
    let cols = layout(2 * prob.m, prob.nu)?;
    let df = df_bundle_matrix(xbar, prob, prob.m, 2 * prob.m)?;
    let ones: Vec<(usize, usize)> =
        (0..rows.len()).map(|i| (i, coord_index(&rows.coord(i), 2 * prob.m).expect("row coord is a column"))).collect();
    let defect = ball_mul(a_f.full(), df.full()).identity_minus(ones);
    let finite = opnorm_weighted_l1(&FiniteBlockOp::new(defect, rows, cols)?);
    let nu2 = RIval::point(prob.nu).sqr();
    let factor = RIval::ONE.max(&(prob.a.abs() + prob.b.abs() * nu2));
    let tail = tail_norm_bounds(TailKind::Bundle, Some(xbar.lambda.re), prob.m, None, None)? * factor;
    Ok((finite, tail))
}

/// `Z2 = 2 max{‖A_f‖, 1/√((M+1)²+λ̄²)}`.
pub fn bound_z2_bundle(a_f_norm: RIval, lambda: RIval, m: usize) -> Result<RIval> {
    let t = tail_norm_bounds(TailKind::Bundle, Some(lambda), m, None, None)?;
    Ok(RIval::point(2.0) * a_f_norm.max(&t))
}

/// Stage-1 certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleCertificate {
    pub stage: String,
    pub a: RIval,
    pub b: RIval,
    pub c: RIval,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(with = "crate::serial::hex_f64")]
    pub nu: f64,
    pub l: RIval,
    #[serde(rename = "lambda_bar_hex", with = "crate::serial::hex_f64")]
    pub lambda_bar: f64,
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
    pub diagnostics: BundleDiagnostics,
    pub verdict: Verdict,
    /// Approximate inverse, kept in memory for reuse; not serialised.
    #[serde(skip)]
    pub a_f: Option<DenseMatrix>,
}

/// Individual summands of the bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleDiagnostics {
    pub y_finite: RIval,
    pub y_tail: RIval,
    pub z1_finite: RIval,
    pub z1_tail: RIval,
    pub a_f_norm: RIval,
}

impl BundleCertificate {
    pub fn bounds(&self) -> KBounds {
        KBounds { y: RIval::point(self.y), z1: RIval::point(self.z1), z2: RIval::point(self.z2), r_star: f64::INFINITY }
    }

    /// Enclosure `λ̄ ± r_F` of the true exponent.
    pub fn lambda_enclosure(&self) -> RIval {
        RIval::point(self.lambda_bar).inflate(self.r)
    }
}

/// Checks the candidate invariants of Theorem-level hypotheses.
pub fn check_candidate(cand: &BundleCandidate, prob: &BundleProblem) -> Result<()> {
    cand.check_shape()?;
    if cand.m != prob.m {
        return Err(Error::Incompatible(format!("candidate has M = {}, problem has M = {}", cand.m, prob.m)));
    }
    if !(cand.lambda < 0.0) {
        return Err(Error::Precondition(format!("λ̄ = {} is not negative", cand.lambda)));
    }
    if !cand.is_conj_symmetric() {
        return Err(Error::Precondition("v̄ is not conjugate-symmetric".into()));
    }
    Ok(())
}

/// Runs the full stage-1 validation.
pub fn validate_bundle(cand: &BundleCandidate, prob: &BundleProblem) -> Result<BundleCertificate> {
    check_candidate(cand, prob)?;
    let xbar = cand.to_x(prob.nu)?;
    let a_f_mat = approx_inverse(&df_bundle_float(cand, prob)?)?;
    let a_f = BallMat::point(a_f_mat.clone());
    let lay = layout(prob.m, prob.nu)?;
    let a_f_norm = opnorm_weighted_l1(&FiniteBlockOp::new(a_f.clone(), lay.clone(), lay)?);
    let (y_finite, y_tail) = bound_y_bundle(&xbar, &a_f, prob)?;
    let (z1_finite, z1_tail) = bound_z1_bundle(&xbar, &a_f, prob)?;
    let z2 = bound_z2_bundle(a_f_norm, xbar.lambda.re, prob.m)?;
    let bounds = KBounds { y: y_finite + y_tail, z1: z1_finite + z1_tail, z2, r_star: f64::INFINITY };
    let radii: RadiiResult = radii_from_bounds(&bounds);
    let lam_hi = RIval::point(cand.lambda).inflate(radii.r_min.min(f64::MAX)).hi();
    let extra = (radii.feasible && lam_hi >= 0.0).then(|| format!("λ̄ + r_F = {lam_hi:e} is not negative"));
    let verdict = Verdict::from_bounds(&bounds, &radii, extra);
    Ok(BundleCertificate {
        stage: "bundle".into(),
        a: prob.a,
        b: prob.b,
        c: prob.c,
        m: prob.m,
        nu: prob.nu,
        l: prob.l,
        lambda_bar: cand.lambda,
        y: bounds.y.hi(),
        z1: bounds.z1.hi(),
        z2: bounds.z2.hi(),
        r: radii.r_min,
        r_max: radii.r_max,
        diagnostics: BundleDiagnostics { y_finite, y_tail, z1_finite, z1_tail, a_f_norm },
        verdict,
        a_f: Some(a_f_mat),
    })
}

/// Truncated bundle map for [`crate::numerics::newton_refine`], on the
/// coordinates of [`BundleCandidate::to_vec`].
pub struct BundleMap<'a> {
    pub prob: &'a BundleProblem,
}

impl BundleMap<'_> {
    fn candidate(&self, x: &[Complex64]) -> BundleCandidate {
        BundleCandidate::from_vec(self.prob.m, x)
    }
}

impl crate::numerics::TruncatedMap for BundleMap<'_> {
    fn residual(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let f = f_bundle(&self.candidate(x).to_x(self.prob.nu)?, self.prob)?;
        Ok(flatten(&f, self.prob.m).iter().map(CIval::mid).collect())
    }

    fn solve_linear(&self, x: &[Complex64], r: &[Complex64]) -> Result<Vec<Complex64>> {
        crate::dense::solve(&df_bundle_float(&self.candidate(x), self.prob)?, r)
    }

    fn norm(&self, r: &[Complex64]) -> f64 {
        float_norm(r, self.prob.m, self.prob.nu)
    }

    fn project(&self, x: &mut [Complex64]) {
        let mut c = self.candidate(x);
        c.symmetrize();
        x.copy_from_slice(&c.to_vec());
    }
}

/// Floating norm `max{|x₀|, ‖x¹‖_ν, ‖x²‖_ν}` on the layout of [`layout`].
pub fn float_norm(x: &[Complex64], m: usize, nu: f64) -> f64 {
    let k = 2 * m + 1;
    let seq =
        |v: &[Complex64]| v.iter().enumerate().map(|(i, z)| z.norm() * nu.powi((i as i64 - m as i64).unsigned_abs() as i32)).sum::<f64>();
    x[0].norm().max(seq(&x[1..1 + k])).max(seq(&x[1 + k..1 + 2 * k]))
}

/// Seeds the bundle from the truncated eigenproblem and polishes it with
/// Newton's method.
pub fn seed_and_refine(prob: &BundleProblem) -> Result<(BundleCandidate, crate::numerics::NewtonReport)> {
    let (lam, v1, v2) = crate::numerics::floquet_eig(prob.a.mid(), prob.b.mid(), prob.m.max(4), prob.l.mid())?;
    let mut cand = BundleCandidate { m: prob.m.max(4), lambda: lam, v1, v2 };
    if cand.m != prob.m {
        return Err(Error::Precondition(format!("bundle truncation M = {} is below 4", prob.m)));
    }
    cand.symmetrize();
    refine(&cand, prob)
}

/// Newton polish of a bundle candidate.
pub fn refine(cand: &BundleCandidate, prob: &BundleProblem) -> Result<(BundleCandidate, crate::numerics::NewtonReport)> {
    let map = BundleMap { prob };
    let (x, rep) = crate::numerics::newton_refine(&map, &cand.to_vec())?;
    let mut out = BundleCandidate::from_vec(prob.m, &x);
    out.symmetrize();
    Ok((out, rep))
}
