//! Real and rectangular complex interval arithmetic over binary64 endpoints.
//!
//! Rounding is directed without touching the FPU control word: every
//! primitive is computed in round-to-nearest and the exact rounding error
//! is recovered with an error-free transformation (TwoSum, Dekker's
//! TwoProduct, exact division/square-root residuals). The sign of that
//! error decides whether an endpoint has to move by one ulp. Outside the
//! range where the transformations are exact (overflow, deep underflow)
//! the endpoint is widened by one ulp unconditionally.
//!
//! Elementary functions (`exp`, `cos`, `sin`) come from the platform libm
//! and are widened by [`LIBM_ULPS`] ulps on each side.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Outward widening, in ulps, applied to results of libm elementary functions.
pub const LIBM_ULPS: u32 = 2;

// ---------------------------------------------------------------------------
// Directed rounding via error-free transformations
// ---------------------------------------------------------------------------

mod round {
    const SPLITTER: f64 = 134_217_729.0; // 2^27 + 1
    const SPLIT_MAX: f64 = f64::from_bits(0x7E30_0000_0000_0000); // 2^996
    const PROD_MIN: f64 = f64::from_bits(0x0360_0000_0000_0000); // 2^-969

    #[inline]
    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        let e = (a - (s - bb)) + (b - bb);
        (s, e)
    }

    #[inline]
    fn split(a: f64) -> (f64, f64) {
        let c = SPLITTER * a;
        let hi = c - (c - a);
        (hi, a - hi)
    }

    /// Exact error of `a*b` when the Dekker product is valid.
    #[inline]
    fn two_prod_err(a: f64, b: f64, p: f64) -> Option<f64> {
        if !(a.abs() < SPLIT_MAX && b.abs() < SPLIT_MAX && p.abs() >= PROD_MIN && p.is_finite()) {
            return None;
        }
        let (ah, al) = split(a);
        let (bh, bl) = split(b);
        Some(((ah * bh - p) + ah * bl + al * bh) + al * bl)
    }

    /// Returns (rounded value, sign of exact − rounded) or `None` when the
    /// sign cannot be certified.
    #[inline]
    fn resolve(v: f64, err: Option<f64>) -> (f64, Option<i8>) {
        match err {
            Some(e) if v.is_finite() => (
                v,
                Some(if e > 0.0 {
                    1
                } else if e < 0.0 {
                    -1
                } else {
                    0
                }),
            ),
            _ => (v, None),
        }
    }

    #[inline]
    fn down(v: f64, dir: Option<i8>) -> f64 {
        match dir {
            Some(d) if d >= 0 => v,
            _ => v.next_down(),
        }
    }

    #[inline]
    fn up(v: f64, dir: Option<i8>) -> f64 {
        match dir {
            Some(d) if d <= 0 => v,
            _ => v.next_up(),
        }
    }

    #[inline]
    fn add_dir(a: f64, b: f64) -> (f64, Option<i8>) {
        let (s, e) = two_sum(a, b);
        resolve(s, if s.is_finite() { Some(e) } else { None })
    }

    #[inline]
    fn mul_dir(a: f64, b: f64) -> (f64, Option<i8>) {
        if a == 0.0 || b == 0.0 {
            return (0.0, Some(0));
        }
        let p = a * b;
        resolve(p, two_prod_err(a, b, p))
    }

    #[inline]
    fn div_dir(a: f64, b: f64) -> (f64, Option<i8>) {
        if a == 0.0 {
            return (0.0, Some(0));
        }
        let q = a / b;
        match two_prod_err(q, b, q * b) {
            Some(e) if q.is_finite() && q != 0.0 => {
                let p = q * b;
                // a − q·b = (a − p) − e exactly (remainder is representable)
                let r = (a - p) - e;
                let s = if r == 0.0 {
                    0
                } else if (r > 0.0) == (b > 0.0) {
                    1
                } else {
                    -1
                };
                (q, Some(s))
            }
            _ => (q, None),
        }
    }

    #[inline]
    fn sqrt_dir(a: f64) -> (f64, Option<i8>) {
        let s = a.sqrt();
        if s == 0.0 {
            return (s, Some(0));
        }
        match two_prod_err(s, s, s * s) {
            Some(e) if s.is_finite() => {
                let r = (a - s * s) - e;
                (
                    s,
                    Some(if r > 0.0 {
                        1
                    } else if r < 0.0 {
                        -1
                    } else {
                        0
                    }),
                )
            }
            _ => (s, None),
        }
    }

    macro_rules! directed {
        ($down:ident, $up:ident, $f:ident) => {
            #[inline]
            pub fn $down(a: f64, b: f64) -> f64 {
                let (v, d) = $f(a, b);
                down(v, d)
            }
            #[inline]
            pub fn $up(a: f64, b: f64) -> f64 {
                let (v, d) = $f(a, b);
                up(v, d)
            }
        };
    }

    directed!(add_down, add_up, add_dir);
    directed!(mul_down, mul_up, mul_dir);
    directed!(div_down, div_up, div_dir);

    #[inline]
    pub fn sub_down(a: f64, b: f64) -> f64 {
        add_down(a, -b)
    }
    #[inline]
    pub fn sub_up(a: f64, b: f64) -> f64 {
        add_up(a, -b)
    }
    #[inline]
    pub fn sqrt_down(a: f64) -> f64 {
        let (v, d) = sqrt_dir(a);
        down(v, d).max(0.0)
    }
    #[inline]
    pub fn sqrt_up(a: f64) -> f64 {
        let (v, d) = sqrt_dir(a);
        up(v, d)
    }
}

pub use round::{add_down, add_up, div_down, div_up, mul_down, mul_up, sqrt_down, sqrt_up, sub_down, sub_up};

fn widen_down(x: f64, ulps: u32) -> f64 {
    (0..ulps).fold(x, |v, _| v.next_down())
}

fn widen_up(x: f64, ulps: u32) -> f64 {
    (0..ulps).fold(x, |v, _| v.next_up())
}

/// Upper bound on `sqrt(x*x + y*y)`.
pub fn hypot_up(x: f64, y: f64) -> f64 {
    let s = add_up(mul_up(x.abs(), x.abs()), mul_up(y.abs(), y.abs()));
    sqrt_up(s)
}

/// Lower bound on `sqrt(x*x + y*y)`.
pub fn hypot_down(x: f64, y: f64) -> f64 {
    let s = add_down(mul_down(x.abs(), x.abs()), mul_down(y.abs(), y.abs()));
    sqrt_down(s)
}

// ---------------------------------------------------------------------------
// Real intervals
// ---------------------------------------------------------------------------

/// Closed real interval `[lo, hi]` with binary64 endpoints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RIval {
    lo: f64,
    hi: f64,
}

impl RIval {
    pub const ZERO: RIval = RIval { lo: 0.0, hi: 0.0 };
    pub const ONE: RIval = RIval { lo: 1.0, hi: 1.0 };

    /// Builds `[lo, hi]`; rejects NaN endpoints and `lo > hi`.
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::Domain(format!("invalid interval [{lo:e}, {hi:e}]")));
        }
        Ok(RIval { lo, hi })
    }

    /// Degenerate interval `[x, x]`.
    ///
    /// # Panics
    /// Panics if `x` is NaN.
    pub fn point(x: f64) -> Self {
        assert!(!x.is_nan(), "NaN is not a valid interval endpoint");
        RIval { lo: x, hi: x }
    }

    /// The interval `[-r, r]` for `r >= 0`.
    pub fn symmetric(r: f64) -> Self {
        assert!(r >= 0.0, "radius must be non-negative");
        RIval { lo: -r, hi: r }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Floating midpoint (not rigorous; for seeding and diagnostics).
    pub fn mid(&self) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            0.5 * self.lo + 0.5 * self.hi
        }
    }

    /// Upper bound on `max(hi - m, m - lo)` where `m = self.mid()`.
    pub fn rad(&self) -> f64 {
        let m = self.mid();
        sub_up(self.hi, m).max(sub_up(m, self.lo))
    }

    pub fn width(&self) -> f64 {
        sub_up(self.hi, self.lo)
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &RIval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    /// Smallest interval containing both.
    pub fn hull(&self, other: &RIval) -> RIval {
        RIval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn intersect(&self, other: &RIval) -> Option<RIval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(RIval { lo, hi })
    }

    /// Magnitude: `max |x|` over the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Mignitude: `min |x|` over the interval.
    pub fn mig(&self) -> f64 {
        if self.contains_zero() {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn abs(&self) -> RIval {
        RIval { lo: self.mig(), hi: self.mag() }
    }

    /// Enclosure of `x + [-r, r]`.
    pub fn inflate(&self, r: f64) -> RIval {
        RIval { lo: sub_down(self.lo, r), hi: add_up(self.hi, r) }
    }

    pub fn sqr(&self) -> RIval {
        let a = self.abs();
        RIval { lo: mul_down(a.lo, a.lo), hi: mul_up(a.hi, a.hi) }
    }

    pub fn powi(&self, n: u32) -> RIval {
        match n {
            0 => RIval::ONE,
            1 => *self,
            _ if n.is_multiple_of(2) => self.powi(n / 2).sqr(),
            _ => *self * self.powi(n - 1),
        }
    }

    /// Division; errors when the divisor contains zero.
    pub fn checked_div(&self, b: &RIval) -> Result<RIval> {
        if b.contains_zero() {
            return Err(Error::DivisionByZero(format!("[{:e}, {:e}]", b.lo, b.hi)));
        }
        let c = [(self.lo, b.lo), (self.lo, b.hi), (self.hi, b.lo), (self.hi, b.hi)];
        let lo = c.iter().map(|&(x, y)| div_down(x, y)).fold(f64::INFINITY, f64::min);
        let hi = c.iter().map(|&(x, y)| div_up(x, y)).fold(f64::NEG_INFINITY, f64::max);
        Ok(RIval { lo, hi })
    }

    pub fn recip(&self) -> Result<RIval> {
        RIval::ONE.checked_div(self)
    }

    pub fn sqrt(&self) -> Result<RIval> {
        if self.lo < 0.0 {
            return Err(Error::Domain(format!("sqrt of [{:e}, {:e}]", self.lo, self.hi)));
        }
        Ok(RIval { lo: sqrt_down(self.lo), hi: sqrt_up(self.hi) })
    }

    pub fn exp(&self) -> RIval {
        RIval { lo: widen_down(self.lo.exp(), LIBM_ULPS).max(0.0), hi: widen_up(self.hi.exp(), LIBM_ULPS) }
    }

    pub fn cos(&self) -> RIval {
        if !self.lo.is_finite() || !self.hi.is_finite() || self.width() >= 6.0 {
            return RIval { lo: -1.0, hi: 1.0 };
        }
        let pi = RIval::pi();
        let c1 = self.lo.cos();
        let c2 = self.hi.cos();
        let mut lo = widen_down(c1.min(c2), LIBM_ULPS);
        let mut hi = widen_up(c1.max(c2), LIBM_ULPS);
        // Extrema sit at multiples of π; include any that may lie inside.
        let k0 = (self.lo / std::f64::consts::PI).floor() as i64 - 1;
        let k1 = (self.hi / std::f64::consts::PI).ceil() as i64 + 1;
        for k in k0..=k1 {
            let kp = RIval::point(k as f64) * pi;
            if kp.hi >= self.lo && kp.lo <= self.hi {
                if k.rem_euclid(2) == 0 {
                    hi = 1.0;
                } else {
                    lo = -1.0;
                }
            }
        }
        RIval { lo: lo.max(-1.0), hi: hi.min(1.0) }
    }

    pub fn sin(&self) -> RIval {
        let half_pi = RIval::pi() * RIval::point(0.5);
        (*self - half_pi).cos()
    }

    /// Enclosure of π.
    pub fn pi() -> RIval {
        // PI is the binary64 nearest π, which lies below π.
        RIval { lo: std::f64::consts::PI, hi: std::f64::consts::PI.next_up() }
    }

    pub fn max(&self, other: &RIval) -> RIval {
        RIval { lo: self.lo.max(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn min(&self, other: &RIval) -> RIval {
        RIval { lo: self.lo.min(other.lo), hi: self.hi.min(other.hi) }
    }

    /// `[0, hi]`-style helper: interval with the same upper end and lower end clamped at 0.
    pub fn nonneg(&self) -> RIval {
        RIval { lo: self.lo.max(0.0), hi: self.hi.max(0.0) }
    }
}

impl Add for RIval {
    type Output = RIval;
    fn add(self, b: RIval) -> RIval {
        RIval { lo: add_down(self.lo, b.lo), hi: add_up(self.hi, b.hi) }
    }
}

impl Sub for RIval {
    type Output = RIval;
    fn sub(self, b: RIval) -> RIval {
        RIval { lo: sub_down(self.lo, b.hi), hi: sub_up(self.hi, b.lo) }
    }
}

impl Neg for RIval {
    type Output = RIval;
    fn neg(self) -> RIval {
        RIval { lo: -self.hi, hi: -self.lo }
    }
}

impl Mul for RIval {
    type Output = RIval;
    fn mul(self, b: RIval) -> RIval {
        if self.is_point() && b.is_point() {
            return RIval { lo: mul_down(self.lo, b.lo), hi: mul_up(self.lo, b.lo) };
        }
        let c = [(self.lo, b.lo), (self.lo, b.hi), (self.hi, b.lo), (self.hi, b.hi)];
        let fix = |v: f64| if v.is_nan() { 0.0 } else { v };
        let lo = c.iter().map(|&(x, y)| fix(mul_down(x, y))).fold(f64::INFINITY, f64::min);
        let hi = c.iter().map(|&(x, y)| fix(mul_up(x, y))).fold(f64::NEG_INFINITY, f64::max);
        RIval { lo, hi }
    }
}

impl Add<f64> for RIval {
    type Output = RIval;
    fn add(self, b: f64) -> RIval {
        self + RIval::point(b)
    }
}

impl Sub<f64> for RIval {
    type Output = RIval;
    fn sub(self, b: f64) -> RIval {
        self - RIval::point(b)
    }
}

impl Mul<f64> for RIval {
    type Output = RIval;
    fn mul(self, b: f64) -> RIval {
        self * RIval::point(b)
    }
}

impl std::iter::Sum for RIval {
    fn sum<I: Iterator<Item = RIval>>(iter: I) -> RIval {
        iter.fold(RIval::ZERO, |a, b| a + b)
    }
}

impl From<f64> for RIval {
    fn from(x: f64) -> Self {
        RIval::point(x)
    }
}

impl fmt::Display for RIval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

impl Serialize for RIval {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [to_hex(self.lo), to_hex(self.hi)].serialize(s)
    }
}

impl<'de> Deserialize<'de> for RIval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [lo, hi] = <[String; 2]>::deserialize(d)?;
        let lo = from_hex(&lo).map_err(D::Error::custom)?;
        let hi = from_hex(&hi).map_err(D::Error::custom)?;
        RIval::new(lo, hi).map_err(D::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Complex intervals
// ---------------------------------------------------------------------------

/// Rectangular complex interval `re × i·im`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CIval {
    pub re: RIval,
    pub im: RIval,
}

impl CIval {
    pub const ZERO: CIval = CIval { re: RIval::ZERO, im: RIval::ZERO };
    pub const ONE: CIval = CIval { re: RIval::ONE, im: RIval::ZERO };

    pub fn new(re: RIval, im: RIval) -> Self {
        CIval { re, im }
    }

    pub fn point(re: f64, im: f64) -> Self {
        CIval { re: RIval::point(re), im: RIval::point(im) }
    }

    pub fn real(re: RIval) -> Self {
        CIval { re, im: RIval::ZERO }
    }

    pub fn is_zero(&self) -> bool {
        *self == CIval::ZERO
    }

    pub fn conj(&self) -> CIval {
        CIval { re: self.re, im: -self.im }
    }

    /// Multiplication by `i`.
    pub fn mul_i(&self) -> CIval {
        CIval { re: -self.im, im: self.re }
    }

    pub fn scale(&self, s: RIval) -> CIval {
        CIval { re: self.re * s, im: self.im * s }
    }

    pub fn contains(&self, re: f64, im: f64) -> bool {
        self.re.contains(re) && self.im.contains(im)
    }

    pub fn hull(&self, o: &CIval) -> CIval {
        CIval { re: self.re.hull(&o.re), im: self.im.hull(&o.im) }
    }

    /// Enclosure of `|z|²`.
    pub fn norm_sqr(&self) -> RIval {
        self.re.sqr() + self.im.sqr()
    }

    /// Enclosure of `|z|`.
    pub fn abs(&self) -> RIval {
        RIval { lo: self.mag_lower(), hi: mag_upper(self) }
    }

    /// Lower bound on `inf |z|` over the rectangle.
    pub fn mag_lower(&self) -> f64 {
        hypot_down(self.re.mig(), self.im.mig())
    }

    pub fn checked_div(&self, b: &CIval) -> Result<CIval> {
        let d = b.norm_sqr();
        let n = *self * b.conj();
        Ok(CIval { re: n.re.checked_div(&d)?, im: n.im.checked_div(&d)? })
    }

    /// Enclosure of `e^{iθ}`.
    pub fn cis(theta: RIval) -> CIval {
        CIval { re: theta.cos(), im: theta.sin() }
    }

    /// Floating midpoint.
    pub fn mid(&self) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.re.mid(), self.im.mid())
    }

    /// Upper bound on the distance from [`CIval::mid`] to any point of the rectangle.
    pub fn rad(&self) -> f64 {
        hypot_up(self.re.rad(), self.im.rad())
    }
}

impl From<num_complex::Complex64> for CIval {
    fn from(z: num_complex::Complex64) -> Self {
        CIval::point(z.re, z.im)
    }
}

impl Add for CIval {
    type Output = CIval;
    fn add(self, b: CIval) -> CIval {
        CIval { re: self.re + b.re, im: self.im + b.im }
    }
}

impl Sub for CIval {
    type Output = CIval;
    fn sub(self, b: CIval) -> CIval {
        CIval { re: self.re - b.re, im: self.im - b.im }
    }
}

impl Neg for CIval {
    type Output = CIval;
    fn neg(self) -> CIval {
        CIval { re: -self.re, im: -self.im }
    }
}

impl Mul for CIval {
    type Output = CIval;
    fn mul(self, b: CIval) -> CIval {
        CIval { re: self.re * b.re - self.im * b.im, im: self.re * b.im + self.im * b.re }
    }
}

impl Mul<RIval> for CIval {
    type Output = CIval;
    fn mul(self, b: RIval) -> CIval {
        self.scale(b)
    }
}

impl std::iter::Sum for CIval {
    fn sum<I: Iterator<Item = CIval>>(iter: I) -> CIval {
        iter.fold(CIval::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for CIval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + i{}", self.re, self.im)
    }
}

/// Upper bound on `sup |x + iy|` over the rectangle.
pub fn mag_upper(z: &CIval) -> f64 {
    hypot_up(z.re.mag(), z.im.mag())
}

/// Lower bound on `inf √x` over `a`; errors on negative input.
pub fn sqrt_lower(a: &RIval) -> Result<f64> {
    Ok(a.sqrt()?.lo)
}

// ---------------------------------------------------------------------------
// Decimal input
// ---------------------------------------------------------------------------

/// Parses a finite decimal literal into an interval containing its exact value.
///
/// Exactly representable literals yield a point interval; otherwise the
/// result spans the two binary64 neighbours of the exact value (width 1 ulp).
pub fn parse_decimal(s: &str) -> Result<RIval> {
    let t = s.trim();
    let bad = || Error::MalformedDecimal(s.to_string());
    let (neg, body) = match t.as_bytes().first() {
        Some(b'-') => (true, &t[1..]),
        Some(b'+') => (false, &t[1..]),
        _ => (false, t),
    };
    let (mant, exp) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], body[i + 1..].parse::<i64>().map_err(|_| bad())?),
        None => (body, 0),
    };
    let (int_part, frac_part) = match mant.find('.') {
        Some(i) => (&mant[..i], &mant[i + 1..]),
        None => (mant, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    if exp.abs() > 400 {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let digits = digits.trim_start_matches('0');
    let x: f64 = t.parse().map_err(|_| bad())?;
    if !x.is_finite() {
        return Err(bad());
    }
    if digits.is_empty() {
        return Ok(RIval::point(0.0));
    }
    // Exact value = D · 10^e10
    let d: BigInt = digits.parse().map_err(|_| bad())?;
    let e10 = exp - frac_part.len() as i64;
    let cmp = compare_decimal_to_f64(&d, e10, x.abs());
    let ax = x.abs();
    let (lo, hi) = match cmp {
        std::cmp::Ordering::Equal => (ax, ax),
        std::cmp::Ordering::Greater => (ax, ax.next_up()),
        std::cmp::Ordering::Less => (ax.next_down(), ax),
    };
    Ok(if neg { RIval { lo: -hi, hi: -lo } } else { RIval { lo, hi } })
}

/// Compares the exact rational `d·10^e10` with the finite non-negative binary64 `x`.
fn compare_decimal_to_f64(d: &BigInt, e10: i64, x: f64) -> std::cmp::Ordering {
    let (m, e2) = decompose(x);
    // d·10^e10 vs m·2^e2  ⇔  d·10^{e10}·2^{-e2} vs m, cleared of negative powers
    let mut lhs = d.clone();
    let mut rhs = BigInt::from(m);
    if e10 >= 0 {
        lhs *= BigInt::from(10u32).pow(e10 as u32);
    } else {
        rhs *= BigInt::from(10u32).pow((-e10) as u32);
    }
    if e2 >= 0 {
        rhs <<= e2 as usize;
    } else {
        lhs <<= (-e2) as usize;
    }
    lhs.cmp(&rhs)
}

/// `x = m · 2^e` with integer mantissa.
fn decompose(x: f64) -> (u64, i64) {
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    }
}

// ---------------------------------------------------------------------------
// Hex-float persistence
// ---------------------------------------------------------------------------

/// Formats a binary64 as a C99-style hex-float (`0x1.8p+1`), bit-exact.
pub fn to_hex(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sign = if x.is_sign_negative() { "-" } else { "" };
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if exp == 0 && frac == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, e) = if exp == 0 { (0, -1022) } else { (1, exp - 1023) };
    let mut digits = format!("{frac:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    let es = if e >= 0 { format!("+{e}") } else { format!("{e}") };
    if digits.is_empty() {
        format!("{sign}0x{lead}p{es}")
    } else {
        format!("{sign}0x{lead}.{digits}p{es}")
    }
}

/// Parses the output of [`to_hex`] (and general hex-floats with at most 13 fraction digits).
pub fn from_hex(s: &str) -> Result<f64> {
    let bad = || Error::MalformedHex(s.to_string());
    let t = s.trim();
    match t {
        "inf" | "+inf" => return Ok(f64::INFINITY),
        "-inf" => return Ok(f64::NEG_INFINITY),
        _ => {}
    }
    let (neg, body) = match t.as_bytes().first() {
        Some(b'-') => (true, &t[1..]),
        Some(b'+') => (false, &t[1..]),
        _ => (false, t),
    };
    let body = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")).ok_or_else(bad)?;
    let p = body.find(['p', 'P']).ok_or_else(bad)?;
    let e: i64 = body[p + 1..].parse().map_err(|_| bad())?;
    let mant = &body[..p];
    let (lead, frac) = match mant.find('.') {
        Some(i) => (&mant[..i], &mant[i + 1..]),
        None => (mant, ""),
    };
    if lead.len() != 1 || frac.len() > 13 {
        return Err(bad());
    }
    let lead = u64::from_str_radix(lead, 16).map_err(|_| bad())?;
    let frac_v = if frac.is_empty() { 0 } else { u64::from_str_radix(frac, 16).map_err(|_| bad())? << (4 * (13 - frac.len())) };
    // value = (lead + frac_v / 2^52) · 2^e, exact in binary64 for our own output
    let m = (lead << 52) | frac_v;
    if lead > 1 {
        return Err(bad());
    }
    let v = (m as f64 * pow2(-52)) * pow2(e);
    if !v.is_finite() {
        return Err(bad());
    }
    Ok(if neg { -v } else { v })
}

/// Exact power of two (saturating to 0 / ∞ outside the binary64 range).
fn pow2(e: i64) -> f64 {
    if (-1022..=1023).contains(&e) {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else if (-1074..-1022).contains(&e) {
        f64::from_bits(1u64 << (e + 1074))
    } else if e > 1023 {
        f64::INFINITY
    } else {
        0.0
    }
}
