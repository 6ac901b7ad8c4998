//! Weighted ℓ¹ coefficient spaces: two-sided Fourier sequences (weight ν),
//! Taylor–Fourier sequences (one-sided in the Taylor order, Fourier in the
//! angle) and one-sided Chebyshev sequences (weight ω, with the factor-2
//! convention `s(t) = s_0 + 2 Σ_{m≥1} s_m T_m(t)`).
//!
//! Every coefficient is an interval; norms, convolutions and evaluations are
//! enclosures. Sums run in a fixed order (ascending |m|, then ascending n) so
//! results are bit-reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{mag_upper, CIval, RIval};

/// Checks that a weight is admissible (finite and ≥ 1).
pub fn check_weight(w: f64) -> Result<f64> {
    if w.is_finite() && w >= 1.0 {
        Ok(w)
    } else {
        Err(Error::InvalidWeight(w))
    }
}

fn same_weight(a: f64, b: f64) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::WeightMismatch(a, b))
    }
}

/// Enclosures of `w^0, …, w^n`.
pub fn weight_powers(w: f64, n: usize) -> Vec<RIval> {
    let mut out = Vec::with_capacity(n + 1);
    let wi = RIval::point(w);
    let mut acc = RIval::ONE;
    for _ in 0..=n {
        out.push(acc);
        acc = acc * wi;
    }
    out
}

// ---------------------------------------------------------------------------
// Index ranges
// ---------------------------------------------------------------------------

/// Which index an [`IndexRange`] refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RangeKind {
    /// |m| of a two-sided Fourier index.
    FourierTwoSided,
    /// Taylor order n.
    TaylorOneSided,
    /// Chebyshev index m ≥ 0.
    ChebOneSided,
}

/// A closed set of indices `lo ≤ k ≤ hi` (`hi = None` meaning ∞), applied to
/// |m| for Fourier indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexRange {
    pub kind: RangeKind,
    pub lo: usize,
    pub hi: Option<usize>,
}

impl IndexRange {
    /// `[p, q]`.
    pub fn closed(kind: RangeKind, p: usize, q: usize) -> Self {
        IndexRange { kind, lo: p, hi: Some(q) }
    }

    /// `(p, q]`.
    pub fn half_open(kind: RangeKind, p: usize, q: usize) -> Self {
        IndexRange { kind, lo: p + 1, hi: Some(q) }
    }

    /// `(q, ∞)`.
    pub fn tail(kind: RangeKind, q: usize) -> Self {
        IndexRange { kind, lo: q + 1, hi: None }
    }

    /// `[p, ∞)`.
    pub fn from(kind: RangeKind, p: usize) -> Self {
        IndexRange { kind, lo: p, hi: None }
    }

    pub fn contains(&self, k: usize) -> bool {
        k >= self.lo && self.hi.is_none_or(|h| k <= h)
    }
}

// ---------------------------------------------------------------------------
// Fourier sequences
// ---------------------------------------------------------------------------

/// Two-sided sequence `(s_m)_{|m| ≤ m_max}` in S_F with weight ν.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierSeq {
    m_max: usize,
    weight: f64,
    coeffs: Vec<CIval>,
}

impl FourierSeq {
    pub fn zeros(m_max: usize, weight: f64) -> Result<Self> {
        Ok(FourierSeq { m_max, weight: check_weight(weight)?, coeffs: vec![CIval::ZERO; 2 * m_max + 1] })
    }

    /// Builds from coefficients ordered `m = -m_max, …, m_max`.
    pub fn from_coeffs(coeffs: Vec<CIval>, weight: f64) -> Result<Self> {
        if coeffs.len().is_multiple_of(2) {
            return Err(Error::Incompatible("Fourier coefficient array must have odd length".into()));
        }
        Ok(FourierSeq { m_max: coeffs.len() / 2, weight: check_weight(weight)?, coeffs })
    }

    /// The sequence `(1/2)·δ_{±2}`, i.e. `cos 2θ`.
    pub fn cos2(weight: f64) -> Result<Self> {
        let mut s = FourierSeq::zeros(2, weight)?;
        s.set(2, CIval::point(0.5, 0.0));
        s.set(-2, CIval::point(0.5, 0.0));
        Ok(s)
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn coeffs(&self) -> &[CIval] {
        &self.coeffs
    }

    /// Coefficient `s_m` (zero outside the stored window).
    pub fn get(&self, m: i64) -> CIval {
        if m.unsigned_abs() as usize > self.m_max {
            CIval::ZERO
        } else {
            self.coeffs[(m + self.m_max as i64) as usize]
        }
    }

    /// Sets `s_m`; panics if `|m| > m_max`.
    pub fn set(&mut self, m: i64, v: CIval) {
        assert!(m.unsigned_abs() as usize <= self.m_max, "index {m} outside window");
        let i = (m + self.m_max as i64) as usize;
        self.coeffs[i] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(CIval::is_zero)
    }

    /// Re-windows to `m_max` (truncating or zero-padding).
    pub fn resized(&self, m_max: usize) -> FourierSeq {
        let mut out = FourierSeq { m_max, weight: self.weight, coeffs: vec![CIval::ZERO; 2 * m_max + 1] };
        let k = m_max.min(self.m_max) as i64;
        for m in -k..=k {
            out.set(m, self.get(m));
        }
        out
    }

    /// Whether `s_{-m}` and `conj(s_m)` are the same interval for all m.
    pub fn is_conj_symmetric(&self) -> bool {
        (0..=self.m_max as i64).all(|m| self.get(-m) == self.get(m).conj())
    }

    pub fn scale(&self, s: CIval) -> FourierSeq {
        FourierSeq { m_max: self.m_max, weight: self.weight, coeffs: self.coeffs.iter().map(|&c| c * s).collect() }
    }

    pub fn add(&self, o: &FourierSeq) -> Result<FourierSeq> {
        self.zip(o, |a, b| a + b)
    }

    pub fn sub(&self, o: &FourierSeq) -> Result<FourierSeq> {
        self.zip(o, |a, b| a - b)
    }

    fn zip(&self, o: &FourierSeq, f: impl Fn(CIval, CIval) -> CIval) -> Result<FourierSeq> {
        same_weight(self.weight, o.weight)?;
        let m_max = self.m_max.max(o.m_max);
        let mut out = FourierSeq::zeros(m_max, self.weight)?;
        for m in -(m_max as i64)..=m_max as i64 {
            out.set(m, f(self.get(m), o.get(m)));
        }
        Ok(out)
    }

    /// Weighted ℓ¹ norm enclosure `Σ |s_m| ν^{|m|}`.
    pub fn norm(&self) -> RIval {
        let w = weight_powers(self.weight, self.m_max);
        let mut acc = self.get(0).abs();
        for k in 1..=self.m_max {
            let t = self.get(k as i64).abs() + self.get(-(k as i64)).abs();
            acc = acc + t * w[k];
        }
        acc
    }

    pub fn project(&self, r: &IndexRange) -> Result<FourierSeq> {
        if r.kind != RangeKind::FourierTwoSided {
            return Err(Error::Incompatible(format!("{:?} range applied to a Fourier sequence", r.kind)));
        }
        let mut out = self.clone();
        for m in -(self.m_max as i64)..=self.m_max as i64 {
            if !r.contains(m.unsigned_abs() as usize) {
                out.set(m, CIval::ZERO);
            }
        }
        Ok(out)
    }

    /// Enclosure of `Σ s_m e^{imθ}`.
    pub fn eval(&self, theta: RIval) -> CIval {
        let e = cis_table(theta, self.m_max);
        self.eval_with(&e)
    }

    fn eval_with(&self, e: &[CIval]) -> CIval {
        let mut acc = self.get(0);
        for k in 1..=self.m_max {
            acc = acc + self.get(k as i64) * e[self.m_max + k] + self.get(-(k as i64)) * e[self.m_max - k];
        }
        acc
    }
}

/// Enclosures of `e^{imθ}` for `m = -m_max..=m_max`.
pub fn cis_table(theta: RIval, m_max: usize) -> Vec<CIval> {
    let mut out = vec![CIval::ZERO; 2 * m_max + 1];
    out[m_max] = CIval::ONE;
    for k in 1..=m_max {
        let z = CIval::cis(theta * RIval::point(k as f64));
        out[m_max + k] = z;
        out[m_max - k] = z.conj();
    }
    out
}

/// Fourier convolution `(p*q)_m = Σ_{m1+m2=m} p_{m1} q_{m2}`.
pub fn conv_fourier(p: &FourierSeq, q: &FourierSeq) -> Result<FourierSeq> {
    same_weight(p.weight, q.weight)?;
    let (pm, qm) = (p.m_max as i64, q.m_max as i64);
    let m_max = (pm + qm) as usize;
    let mut out = FourierSeq::zeros(m_max, p.weight)?;
    if p.is_zero() || q.is_zero() {
        return Ok(out);
    }
    for m in -(m_max as i64)..=m_max as i64 {
        let lo = (-pm).max(m - qm);
        let hi = pm.min(m + qm);
        let mut acc = CIval::ZERO;
        for m1 in lo..=hi {
            let a = p.get(m1);
            let b = q.get(m - m1);
            if !a.is_zero() && !b.is_zero() {
                acc = acc + a * b;
            }
        }
        out.set(m, acc);
    }
    Ok(out)
}

/// Checks the support statement "p supported in [0,M], q supported outside
/// [0,2M] ⇒ p*q vanishes on [0,M]": returns whether all coefficients of
/// `p*q` with `|m| ≤ M` are exactly zero.
pub fn support_lemma_check(p: &FourierSeq, q: &FourierSeq, m: usize) -> bool {
    match conv_fourier(p, q) {
        Ok(c) => (-(m as i64)..=m as i64).all(|k| c.get(k).is_zero()),
        Err(_) => false,
    }
}

// ---------------------------------------------------------------------------
// Taylor–Fourier sequences
// ---------------------------------------------------------------------------

/// One-sided array of Fourier sequences `(w_n)_{0≤n≤N}` in S_TF.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorFourierSeq {
    weight: f64,
    m_max: usize,
    orders: Vec<FourierSeq>,
}

impl TaylorFourierSeq {
    pub fn zeros(n_max: usize, m_max: usize, weight: f64) -> Result<Self> {
        let z = FourierSeq::zeros(m_max, weight)?;
        Ok(TaylorFourierSeq { weight, m_max, orders: vec![z; n_max + 1] })
    }

    /// Builds from orders sharing one weight; windows are unified to the widest.
    pub fn from_orders(orders: Vec<FourierSeq>) -> Result<Self> {
        let first = orders.first().ok_or_else(|| Error::Incompatible("empty Taylor-Fourier sequence".into()))?;
        let weight = first.weight;
        let m_max = orders.iter().map(|o| o.m_max).max().unwrap_or(0);
        for o in &orders {
            same_weight(weight, o.weight)?;
        }
        let orders = orders.into_iter().map(|o| if o.m_max == m_max { o } else { o.resized(m_max) }).collect();
        Ok(TaylorFourierSeq { weight, m_max, orders })
    }

    pub fn n_max(&self) -> usize {
        self.orders.len() - 1
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn orders(&self) -> &[FourierSeq] {
        &self.orders
    }

    /// Order-n coefficient sequence (zero beyond the stored orders).
    pub fn order(&self, n: usize) -> FourierSeq {
        self.orders.get(n).cloned().unwrap_or_else(|| FourierSeq {
            m_max: self.m_max,
            weight: self.weight,
            coeffs: vec![CIval::ZERO; 2 * self.m_max + 1],
        })
    }

    pub fn get(&self, n: usize, m: i64) -> CIval {
        self.orders.get(n).map_or(CIval::ZERO, |o| o.get(m))
    }

    pub fn set(&mut self, n: usize, m: i64, v: CIval) {
        self.orders[n].set(m, v);
    }

    pub fn set_order(&mut self, n: usize, s: FourierSeq) -> Result<()> {
        same_weight(self.weight, s.weight)?;
        self.orders[n] = s.resized(self.m_max);
        Ok(())
    }

    pub fn norm(&self) -> RIval {
        self.orders.iter().map(FourierSeq::norm).sum()
    }

    pub fn is_conj_symmetric(&self) -> bool {
        self.orders.iter().all(FourierSeq::is_conj_symmetric)
    }

    pub fn sub(&self, o: &TaylorFourierSeq) -> Result<TaylorFourierSeq> {
        let n = self.orders.len().max(o.orders.len());
        let orders = (0..n).map(|k| self.order(k).sub(&o.order(k))).collect::<Result<Vec<_>>>()?;
        TaylorFourierSeq::from_orders(orders)
    }

    /// Projection: Taylor ranges act on n, Fourier ranges on |m| of every order.
    pub fn project(&self, r: &IndexRange) -> Result<TaylorFourierSeq> {
        let mut out = self.clone();
        match r.kind {
            RangeKind::TaylorOneSided => {
                for (n, o) in out.orders.iter_mut().enumerate() {
                    if !r.contains(n) {
                        *o = FourierSeq::zeros(self.m_max, self.weight)?;
                    }
                }
            }
            RangeKind::FourierTwoSided => {
                for o in out.orders.iter_mut() {
                    *o = o.project(r)?;
                }
            }
            RangeKind::ChebOneSided => return Err(Error::Incompatible("Chebyshev range applied to a Taylor-Fourier sequence".into())),
        }
        Ok(out)
    }

    /// Enclosure of `∂_σ^k Σ_n Σ_m w_{n,m} e^{imθ} σ^n` over the finite support.
    pub fn eval_deriv(&self, theta: RIval, sigma: RIval, k: u32) -> CIval {
        let e = cis_table(theta, self.m_max);
        let mut acc = CIval::ZERO;
        // Horner in σ over n = N..k
        for n in (k as usize..self.orders.len()).rev() {
            let mut f = RIval::ONE;
            for j in 0..k as usize {
                f = f * RIval::point((n - j) as f64);
            }
            let c = self.orders[n].eval_with(&e).scale(f);
            acc = acc.scale(sigma) + c;
        }
        acc
    }

    pub fn eval(&self, theta: RIval, sigma: RIval) -> CIval {
        self.eval_deriv(theta, sigma, 0)
    }
}

/// Taylor–Fourier Cauchy product `(p*q)_n = Σ_{l=0}^{n} p_l * q_{n-l}`.
pub fn conv_tf(p: &TaylorFourierSeq, q: &TaylorFourierSeq) -> Result<TaylorFourierSeq> {
    same_weight(p.weight, q.weight)?;
    let n_max = p.n_max() + q.n_max();
    let m_max = p.m_max + q.m_max;
    let mut out = TaylorFourierSeq::zeros(n_max, m_max, p.weight)?;
    let pz: Vec<bool> = p.orders.iter().map(FourierSeq::is_zero).collect();
    let qz: Vec<bool> = q.orders.iter().map(FourierSeq::is_zero).collect();
    for n in 0..=n_max {
        let mut acc: Option<FourierSeq> = None;
        for l in n.saturating_sub(q.n_max())..=n.min(p.n_max()) {
            if pz[l] || qz[n - l] {
                continue;
            }
            let c = conv_fourier(&p.orders[l], &q.orders[n - l])?;
            acc = Some(match acc {
                None => c,
                Some(a) => a.add(&c)?,
            });
        }
        if let Some(a) = acc {
            out.orders[n] = a.resized(m_max);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Chebyshev sequences
// ---------------------------------------------------------------------------

/// One-sided real sequence `(s_m)_{0≤m≤M}` in S_C with weight ω.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChebSeq {
    weight: f64,
    coeffs: Vec<RIval>,
}

impl ChebSeq {
    pub fn zeros(m_max: usize, weight: f64) -> Result<Self> {
        Ok(ChebSeq { weight: check_weight(weight)?, coeffs: vec![RIval::ZERO; m_max + 1] })
    }

    pub fn from_coeffs(coeffs: Vec<RIval>, weight: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Incompatible("empty Chebyshev sequence".into()));
        }
        Ok(ChebSeq { weight: check_weight(weight)?, coeffs })
    }

    pub fn from_points(coeffs: &[f64], weight: f64) -> Result<Self> {
        ChebSeq::from_coeffs(coeffs.iter().map(|&c| RIval::point(c)).collect(), weight)
    }

    pub fn m_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn coeffs(&self) -> &[RIval] {
        &self.coeffs
    }

    pub fn get(&self, m: usize) -> RIval {
        self.coeffs.get(m).copied().unwrap_or(RIval::ZERO)
    }

    pub fn set(&mut self, m: usize, v: RIval) {
        self.coeffs[m] = v;
    }

    pub fn resized(&self, m_max: usize) -> ChebSeq {
        ChebSeq { weight: self.weight, coeffs: (0..=m_max).map(|m| self.get(m)).collect() }
    }

    pub fn add(&self, o: &ChebSeq) -> Result<ChebSeq> {
        same_weight(self.weight, o.weight)?;
        let n = self.m_max().max(o.m_max());
        Ok(ChebSeq { weight: self.weight, coeffs: (0..=n).map(|m| self.get(m) + o.get(m)).collect() })
    }

    pub fn scale(&self, s: RIval) -> ChebSeq {
        ChebSeq { weight: self.weight, coeffs: self.coeffs.iter().map(|&c| c * s).collect() }
    }

    /// `|s_0| + 2 Σ_{m≥1} |s_m| ω^m`.
    pub fn norm(&self) -> RIval {
        let w = weight_powers(self.weight, self.m_max());
        let mut acc = self.coeffs[0].abs();
        for m in 1..self.coeffs.len() {
            acc = acc + self.coeffs[m].abs() * w[m] * RIval::point(2.0);
        }
        acc
    }

    pub fn project(&self, r: &IndexRange) -> Result<ChebSeq> {
        if r.kind != RangeKind::ChebOneSided {
            return Err(Error::Incompatible(format!("{:?} range applied to a Chebyshev sequence", r.kind)));
        }
        let mut out = self.clone();
        for (m, c) in out.coeffs.iter_mut().enumerate() {
            if !r.contains(m) {
                *c = RIval::ZERO;
            }
        }
        Ok(out)
    }
}

/// Reflected-index convolution `(p*q)_m = Σ_{m1+m2=m, m1,m2∈ℤ} p_{|m1|} q_{|m2|}`.
pub fn conv_cheb(p: &ChebSeq, q: &ChebSeq) -> Result<ChebSeq> {
    same_weight(p.weight, q.weight)?;
    let (pm, qm) = (p.m_max() as i64, q.m_max() as i64);
    let n = (pm + qm) as usize;
    let mut out = ChebSeq::zeros(n, p.weight)?;
    for m in 0..=n as i64 {
        let mut acc = RIval::ZERO;
        for m1 in (-pm).max(m - qm)..=pm.min(m + qm) {
            let a = p.coeffs[m1.unsigned_abs() as usize];
            let b = q.coeffs[(m - m1).unsigned_abs() as usize];
            acc = acc + a * b;
        }
        out.coeffs[m as usize] = acc;
    }
    Ok(out)
}

/// Enclosure of `s_0 + 2 Σ s_m T_m(t)` for `t ⊆ [-1, 1]`.
pub fn eval_cheb(s: &ChebSeq, t: RIval) -> Result<RIval> {
    if t.lo() < -1.0 || t.hi() > 1.0 {
        return Err(Error::Domain(format!("Chebyshev evaluation at {t} outside [-1,1]")));
    }
    if t.is_point() && t.lo().abs() == 1.0 {
        return Ok(eval_cheb_pm1(s, t.lo() as i8));
    }
    // The interval three-term recurrence inflates radii geometrically, so each
    // T_m(t) is also enclosed by cos(m·acos t) and the two are intersected.
    let unit = RIval::new(-1.0, 1.0)?;
    let two = RIval::point(2.0);
    let theta = acos_enclosure(t);
    let (mut tm1, mut tm) = (RIval::ONE, t);
    let mut acc = s.get(0);
    for m in 1..=s.m_max() {
        acc = acc + two * s.get(m) * tm;
        let next = (two * t * tm - tm1).intersect(&unit).unwrap_or(unit);
        let by_angle = (theta * RIval::point((m + 1) as f64)).cos();
        tm1 = tm;
        tm = next.intersect(&by_angle).unwrap_or(by_angle);
    }
    Ok(acc)
}

/// Enclosure of `acos(t)` for `t ⊆ [−1, 1]`, verified through the
/// monotonicity of `cos` on `[0, π]`.
pub fn acos_enclosure(t: RIval) -> RIval {
    let pi = RIval::pi();
    let mut a = t.hi().min(1.0).acos();
    let mut d = 4.0 * f64::EPSILON;
    loop {
        if a <= 0.0 {
            a = 0.0;
            break;
        }
        // cos(a) ≥ t.hi  ⇒  a ≤ acos(t.hi)
        if RIval::point(a).cos().lo() >= t.hi() {
            break;
        }
        a -= d;
        d *= 4.0;
    }
    let mut b = t.lo().max(-1.0).acos();
    let mut d = 4.0 * f64::EPSILON;
    loop {
        if b >= pi.lo() {
            b = pi.hi();
            break;
        }
        // cos(b) ≤ t.lo  ⇒  b ≥ acos(t.lo)
        if RIval::point(b).cos().hi() <= t.lo() {
            break;
        }
        b += d;
        d *= 4.0;
    }
    RIval::new(a, b).expect("ordered acos bounds")
}

/// `s(±1) = s_0 + 2 Σ (±1)^m s_m`.
pub fn eval_cheb_pm1(s: &ChebSeq, sign: i8) -> RIval {
    let two = RIval::point(2.0);
    let mut acc = s.get(0);
    for m in 1..=s.m_max() {
        let c = two * s.get(m);
        acc = if sign < 0 && m % 2 == 1 { acc - c } else { acc + c };
    }
    acc
}

/// Upper bound on the weighted ℓ¹ norm of any supported sequence.
pub trait WeightedNorm {
    fn norm_enclosure(&self) -> RIval;
}

impl WeightedNorm for FourierSeq {
    fn norm_enclosure(&self) -> RIval {
        self.norm()
    }
}

impl WeightedNorm for TaylorFourierSeq {
    fn norm_enclosure(&self) -> RIval {
        self.norm()
    }
}

impl WeightedNorm for ChebSeq {
    fn norm_enclosure(&self) -> RIval {
        self.norm()
    }
}

/// Norm enclosure of any sequence type; the upper end is the rigorous bound.
pub fn norm<S: WeightedNorm>(s: &S) -> RIval {
    s.norm_enclosure()
}

/// Upper bound on `|z|` helper re-exported for sequence code.
pub fn coeff_mag(z: &CIval) -> f64 {
    mag_upper(z)
}
