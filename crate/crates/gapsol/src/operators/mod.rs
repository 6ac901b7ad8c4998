//! Structured linear operators on the sequence spaces and rigorous induced
//! norms on product spaces `X = ℂ^p × S^k` carrying the max norm.
//!
//! The norm of a block operator `T = (T_ij)` on such a product is bounded by
//! `max_i Σ_j ‖T_ij‖`, where `‖T_ij‖` is the induced norm between the
//! component spaces: for weighted ℓ¹ targets this is a weighted column sum,
//! for a scalar (parameter) target the dual weighted-ℓ∞ norm of the row.

pub mod ball;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{add_up, div_up, mul_up, CIval, RIval};
use crate::seqspace::{conv_fourier, weight_powers, ChebSeq, FourierSeq, TaylorFourierSeq};

pub use ball::{ball_matvec, ball_mul, BallMat, BallView};

// ---------------------------------------------------------------------------
// Structured operators
// ---------------------------------------------------------------------------

/// Which diagonal operator [`DiagOpFourier`] represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagMode {
    /// `(L_λ v)_m = (im + λ) v_m`.
    Bundle,
    /// `(L_λ w)_{n,m} = (im + nλ) w_{n,m}` for `n ≥ 2`, identity for `n ∈ {0, 1}`.
    Manifold,
}

/// Diagonal Fourier operator `L_λ` or its inverse.
#[derive(Clone, Copy, Debug)]
pub struct DiagOpFourier {
    pub lambda: CIval,
    pub mode: DiagMode,
    pub inverse: bool,
}

impl DiagOpFourier {
    fn factor(&self, n: usize, m: i64) -> Option<CIval> {
        let base = match self.mode {
            DiagMode::Bundle => self.lambda,
            DiagMode::Manifold if n < 2 => return None,
            DiagMode::Manifold => self.lambda.scale(RIval::point(n as f64)),
        };
        Some(base + CIval::point(0.0, m as f64))
    }

    fn apply_coeff(&self, n: usize, m: i64, c: CIval) -> Result<CIval> {
        match self.factor(n, m) {
            None => Ok(c),
            Some(d) if self.inverse => c.checked_div(&d),
            Some(d) => Ok(c * d),
        }
    }

    /// Bundle form acting on a Fourier sequence.
    pub fn apply(&self, s: &FourierSeq) -> Result<FourierSeq> {
        if self.mode != DiagMode::Bundle {
            return Err(Error::Incompatible("manifold-form L_λ acts on Taylor-Fourier sequences".into()));
        }
        let mut out = s.clone();
        let k = s.m_max() as i64;
        for m in -k..=k {
            out.set(m, self.apply_coeff(1, m, s.get(m))?);
        }
        Ok(out)
    }

    /// Manifold form acting on a Taylor–Fourier sequence.
    pub fn apply_tf(&self, w: &TaylorFourierSeq) -> Result<TaylorFourierSeq> {
        if self.mode != DiagMode::Manifold {
            return Err(Error::Incompatible("bundle-form L_λ acts on Fourier sequences".into()));
        }
        let mut out = w.clone();
        let k = w.m_max() as i64;
        for n in 0..=w.n_max() {
            for m in -k..=k {
                out.set(n, m, self.apply_coeff(n, m, w.get(n, m))?);
            }
        }
        Ok(out)
    }
}

/// The Chebyshev operator `[T s]_0 = 0`, `[T s]_m = −s_{m−1} + s_{m+1}`.
#[derive(Clone, Copy, Debug, Default)]
pub struct TridiagOpCheb;

impl TridiagOpCheb {
    pub fn apply(&self, s: &ChebSeq) -> ChebSeq {
        let n = s.m_max() + 1;
        let mut out = ChebSeq::zeros(n, s.weight()).expect("weight already validated");
        for m in 1..=n {
            out.set(m, s.get(m + 1) - s.get(m - 1));
        }
        out
    }
}

/// Multiplication operator `v ↦ −a v + b (p * v)` for a finite multiplier `p`
/// (with `p = cos 2θ` this is the linear part of the bundle vector field).
#[derive(Clone, Debug)]
pub struct MulOpFourier {
    pub multiplier: FourierSeq,
    pub a: RIval,
    pub b: RIval,
}

impl MulOpFourier {
    pub fn bandwidth(&self) -> usize {
        self.multiplier.m_max()
    }

    pub fn apply(&self, v: &FourierSeq) -> Result<FourierSeq> {
        let pv = conv_fourier(&self.multiplier, v)?.scale(CIval::real(self.b));
        let av = v.scale(CIval::real(-self.a)).resized(pv.m_max());
        av.add(&pv)
    }
}

// ---------------------------------------------------------------------------
// Product-space layouts
// ---------------------------------------------------------------------------

/// One coordinate of a truncated product space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coord {
    Param { comp: usize },
    Fourier { comp: usize, m: i64 },
    Cheb { comp: usize, m: usize },
    TaylorFourier { comp: usize, n: usize, m: i64 },
}

impl Coord {
    pub fn comp(&self) -> usize {
        match *self {
            Coord::Param { comp } | Coord::Fourier { comp, .. } | Coord::Cheb { comp, .. } | Coord::TaylorFourier { comp, .. } => comp,
        }
    }
}

/// Ordered list of coordinates with their norm weights.
#[derive(Clone, Debug)]
pub struct SpaceLayout {
    coords: Vec<Coord>,
    weights: Vec<RIval>,
    comp_is_param: Vec<bool>,
}

impl SpaceLayout {
    /// Builds a layout; `nu` weighs Fourier/Taylor–Fourier coordinates
    /// (`ν^{|m|}`), `omega` Chebyshev ones (`1` at m=0, `2ω^m` for m≥1).
    pub fn new(coords: Vec<Coord>, nu: f64, omega: f64) -> Result<Self> {
        crate::seqspace::check_weight(nu)?;
        crate::seqspace::check_weight(omega)?;
        let max_m = coords
            .iter()
            .map(|c| match *c {
                Coord::Param { .. } => 0,
                Coord::Fourier { m, .. } | Coord::TaylorFourier { m, .. } => m.unsigned_abs() as usize,
                Coord::Cheb { m, .. } => m,
            })
            .max()
            .unwrap_or(0);
        let nu_p = weight_powers(nu, max_m);
        let om_p = weight_powers(omega, max_m);
        let ncomp = coords.iter().map(|c| c.comp() + 1).max().unwrap_or(0);
        let mut comp_is_param = vec![false; ncomp];
        let weights = coords
            .iter()
            .map(|c| match *c {
                Coord::Param { comp } => {
                    comp_is_param[comp] = true;
                    RIval::ONE
                }
                Coord::Fourier { m, .. } | Coord::TaylorFourier { m, .. } => nu_p[m.unsigned_abs() as usize],
                Coord::Cheb { m: 0, .. } => RIval::ONE,
                Coord::Cheb { m, .. } => om_p[m] * RIval::point(2.0),
            })
            .collect();
        Ok(SpaceLayout { coords, weights, comp_is_param })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> Coord {
        self.coords[i]
    }

    pub fn weight(&self, i: usize) -> RIval {
        self.weights[i]
    }

    pub fn n_comps(&self) -> usize {
        self.comp_is_param.len()
    }

    pub fn comp_is_param(&self, c: usize) -> bool {
        self.comp_is_param[c]
    }

    pub fn index_of(&self, c: &Coord) -> Option<usize> {
        self.coords.iter().position(|x| x == c)
    }

    /// Sub-layout of the listed coordinate positions (weights re-used).
    pub fn select(&self, idx: &[usize]) -> SpaceLayout {
        SpaceLayout {
            coords: idx.iter().map(|&i| self.coords[i]).collect(),
            weights: idx.iter().map(|&i| self.weights[i]).collect(),
            comp_is_param: self.comp_is_param.clone(),
        }
    }
}

/// A dense ball matrix between two truncated product spaces; acts as zero
/// outside the listed coordinates.
#[derive(Clone, Debug)]
pub struct FiniteBlockOp {
    pub mat: BallMat,
    pub rows: SpaceLayout,
    pub cols: SpaceLayout,
}

impl FiniteBlockOp {
    pub fn new(mat: BallMat, rows: SpaceLayout, cols: SpaceLayout) -> Result<Self> {
        if mat.rows() != rows.len() || mat.cols() != cols.len() {
            return Err(Error::Incompatible(format!("matrix {}x{} vs layouts {}x{}", mat.rows(), mat.cols(), rows.len(), cols.len())));
        }
        Ok(FiniteBlockOp { mat, rows, cols })
    }

    /// Applies the operator to a vector of interval coordinates.
    pub fn apply(&self, x: &[CIval]) -> Result<Vec<CIval>> {
        if x.len() != self.cols.len() {
            return Err(Error::Incompatible(format!("vector of length {} vs {} columns", x.len(), self.cols.len())));
        }
        Ok(ball_matvec(self.mat.full(), x))
    }
}

/// Running maxima of block norms `‖T_ij‖`, filled column slab by column slab.
#[derive(Clone, Debug)]
pub struct BlockNormTable {
    out_param: Vec<bool>,
    n_in: usize,
    table: Vec<f64>,
}

impl BlockNormTable {
    pub fn new(rows: &SpaceLayout, cols: &SpaceLayout) -> Self {
        let n_out = rows.n_comps();
        let n_in = cols.n_comps();
        BlockNormTable { out_param: (0..n_out).map(|c| rows.comp_is_param(c)).collect(), n_in, table: vec![0.0; n_out * n_in] }
    }

    /// Absorbs the columns of `mat` (rows laid out by `rows`, columns by `cols`).
    pub fn absorb(&mut self, mat: &BallMat, rows: &SpaceLayout, cols: &SpaceLayout) {
        let n_out = self.out_param.len();
        let nc = mat.cols();
        let mut acc = vec![0.0f64; n_out * nc];
        for i in 0..mat.rows() {
            let c = rows.coord(i).comp();
            let w = rows.weight(i).hi();
            let row = &mut acc[c * nc..(c + 1) * nc];
            for (j, slot) in row.iter_mut().enumerate() {
                let a = mat.abs_upper(i, j);
                if a != 0.0 {
                    let v = mul_up(a, w);
                    *slot = if self.out_param[c] { slot.max(v) } else { add_up(*slot, v) };
                }
            }
        }
        for j in 0..nc {
            let d = cols.coord(j).comp();
            let wl = cols.weight(j).lo();
            for c in 0..n_out {
                let v = div_up(acc[c * nc + j], wl);
                let t = &mut self.table[c * self.n_in + d];
                *t = t.max(v);
            }
        }
    }

    /// Block norm `‖T_{out,in}‖` upper bound.
    pub fn block(&self, out: usize, inp: usize) -> f64 {
        self.table[out * self.n_in + inp]
    }

    /// `max_out Σ_in ‖T_{out,in}‖` upper bound.
    pub fn norm(&self) -> f64 {
        (0..self.out_param.len()).map(|c| (0..self.n_in).fold(0.0, |s, d| add_up(s, self.block(c, d)))).fold(0.0, f64::max)
    }
}

/// Upper bound on the induced operator norm of a finite block operator on
/// max-of-weighted-ℓ¹ product spaces (returned as `[0, bound]`).
pub fn opnorm_weighted_l1(op: &FiniteBlockOp) -> RIval {
    let mut t = BlockNormTable::new(&op.rows, &op.cols);
    t.absorb(&op.mat, &op.rows, &op.cols);
    RIval::new(0.0, t.norm()).expect("norms are non-negative")
}

/// Weighted norm of a coordinate vector in a product layout
/// (`max` over components of the weighted ℓ¹ norms).
pub fn vector_norm(x: &[CIval], layout: &SpaceLayout) -> RIval {
    let mut per = vec![RIval::ZERO; layout.n_comps()];
    for (i, z) in x.iter().enumerate() {
        let c = layout.coord(i).comp();
        per[c] = per[c] + z.abs() * layout.weight(i);
    }
    per.into_iter().fold(RIval::ZERO, |a, b| a.max(&b))
}

// ---------------------------------------------------------------------------
// Closed-form tail bounds
// ---------------------------------------------------------------------------

/// The analytic tail bounds used by the three stages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailKind {
    /// `‖L_λ⁻¹ Π_{(M,∞)}‖ ≤ 1/√((M+1)² + λ²)` on S_F.
    Bundle,
    /// `‖Π_{[2,N]} Π_{(M,∞)} L_λ⁻¹‖ ≤ 1/√(4λ² + (M+1)²)` on S_TF.
    ManifoldFourier,
    /// `‖Π_{(N,∞)} L_λ⁻¹‖ ≤ 1/|λ(N+1)|` on S_TF.
    ManifoldTaylor,
    /// `‖L⁻¹ Π_{(M,∞)}‖ ≤ 1/(2M)` on S_C.
    ChebInverse,
    /// `‖T‖ ≤ 2ω` on S_C.
    ChebT,
}

/// Evaluates a closed-form tail bound with outward rounding.
pub fn tail_norm_bounds(kind: TailKind, lambda: Option<RIval>, m: usize, n: Option<usize>, omega: Option<f64>) -> Result<RIval> {
    let need_lambda = || -> Result<RIval> {
        let l = lambda.ok_or_else(|| Error::Precondition("tail bound needs λ".into()))?;
        if l.hi() >= 0.0 {
            return Err(Error::Precondition(format!("λ = {l} must be strictly negative")));
        }
        Ok(l)
    };
    let m1 = RIval::point((m + 1) as f64);
    let v = match kind {
        TailKind::Bundle => {
            let l = need_lambda()?;
            (m1.sqr() + l.sqr()).sqrt()?.recip()?
        }
        TailKind::ManifoldFourier => {
            let l = need_lambda()?;
            (l.sqr() * RIval::point(4.0) + m1.sqr()).sqrt()?.recip()?
        }
        TailKind::ManifoldTaylor => {
            let l = need_lambda()?;
            let n = n.ok_or_else(|| Error::Precondition("Taylor tail needs N".into()))?;
            if n < 2 {
                return Err(Error::Precondition("Taylor truncation must be at least 2".into()));
            }
            (l.abs() * RIval::point((n + 1) as f64)).recip()?
        }
        TailKind::ChebInverse => {
            if m < 1 {
                return Err(Error::Precondition("Chebyshev truncation must be at least 1".into()));
            }
            RIval::point(2.0 * m as f64).recip()?
        }
        TailKind::ChebT => {
            let w = omega.ok_or_else(|| Error::Precondition("‖T‖ bound needs ω".into()))?;
            RIval::point(2.0) * RIval::point(crate::seqspace::check_weight(w)?)
        }
    };
    Ok(v)
}
