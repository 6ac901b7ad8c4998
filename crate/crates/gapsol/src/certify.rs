//! Stage-agnostic Newton–Kantorovich engine.
//!
//! Given upper bounds `Y ≥ ‖A F(x̄)‖`, `Z1 ≥ ‖I − A DF(x̄)‖` and
//! `Z2 ≥ sup_{x∈B(x̄,r*)} ‖A(DF(x) − DF(x̄))‖/‖x − x̄‖`, the map `F` has a
//! unique zero in every closed ball `B(x̄, r)` with `r_min ≤ r < r_max`, where
//! `r_min` is the smaller root of `Z2 r²/2 − (1 − Z1) r + Y` and
//! `r_max = min((1 − Z1)/Z2, r*)`.

use serde::{Deserialize, Serialize};

use crate::interval::{add_down, div_down, div_up, mul_down, mul_up, sqrt_down, sub_down, RIval};

/// Upper bounds consumed by the engine; only the `hi` endpoints are used.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KBounds {
    pub y: RIval,
    pub z1: RIval,
    pub z2: RIval,
    /// Radius on which `Z2` is valid (`f64::INFINITY` for radius-free bounds).
    #[serde(with = "crate::serial::hex_f64")]
    pub r_star: f64,
}

/// Outcome of the radii-polynomial test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiiResult {
    #[serde(with = "crate::serial::hex_f64")]
    pub r_min: f64,
    #[serde(with = "crate::serial::hex_f64")]
    pub r_max: f64,
    pub feasible: bool,
}

/// Names the first hypothesis that failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    /// `Z1 ≥ 1`.
    Contraction,
    /// `Z2 ≥ (1 − Z1)² / (2Y)`.
    Discriminant,
    /// `r_min ≥ r_max` (typically the ball does not fit inside `r*`).
    RadiusWindow,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Violation::Contraction => "Z1 < 1 violated",
            Violation::Discriminant => "Z2 < (1 - Z1)^2 / (2 Y) violated",
            Violation::RadiusWindow => "r_min < min((1 - Z1)/Z2, r*) violated",
        })
    }
}

/// Evaluates the hypotheses and returns the first violated one, if any.
pub fn diagnose(b: &KBounds) -> Option<Violation> {
    let r = radii_from_bounds(b);
    if r.feasible {
        None
    } else if b.z1.hi() >= 1.0 {
        Some(Violation::Contraction)
    } else if discriminant_lower(b) <= 0.0 && b.y.hi() > 0.0 {
        Some(Violation::Discriminant)
    } else {
        Some(Violation::RadiusWindow)
    }
}

fn discriminant_lower(b: &KBounds) -> f64 {
    let omz = sub_down(1.0, b.z1.hi());
    sub_down(mul_down(omz, omz), mul_up(mul_up(2.0, b.y.hi()), b.z2.hi()))
}

/// Computes the validation radii with outward rounding: `r_min` is rounded
/// up, `r_max` down.
pub fn radii_from_bounds(b: &KBounds) -> RadiiResult {
    let (y, z1, z2) = (b.y.hi().max(0.0), b.z1.hi().max(0.0), b.z2.hi().max(0.0));
    let infeasible = RadiiResult { r_min: f64::INFINITY, r_max: 0.0, feasible: false };
    if !(z1 < 1.0) || !y.is_finite() || !z2.is_finite() {
        return infeasible;
    }
    let omz = sub_down(1.0, z1);
    let r_max = if z2 > 0.0 { div_down(omz, z2).min(b.r_star) } else { b.r_star };
    let r_min = if y == 0.0 {
        0.0
    } else {
        let disc = discriminant_lower(b);
        if !(disc > 0.0) {
            return RadiiResult { r_min: f64::INFINITY, r_max, feasible: false };
        }
        // (1−Z1−√D)/Z2 = 2Y/(1−Z1+√D): no cancellation, monotone rounding.
        div_up(mul_up(2.0, y), add_down(omz, sqrt_down(disc)))
    };
    RadiiResult { r_min, r_max, feasible: r_min < r_max }
}

/// Verdict of a validation stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Verdict {
    Proved,
    /// Proved, but with `Z1 ∈ [1 − 1e−12, 1)`.
    ProvedMarginal,
    Failed(String),
}

impl Verdict {
    pub fn is_proved(&self) -> bool {
        matches!(self, Verdict::Proved | Verdict::ProvedMarginal)
    }

    /// Verdict from the bounds plus a stage-specific extra condition.
    pub fn from_bounds(b: &KBounds, radii: &RadiiResult, extra: Option<String>) -> Verdict {
        if let Some(v) = diagnose(b) {
            return Verdict::Failed(v.to_string());
        }
        if let Some(reason) = extra {
            return Verdict::Failed(reason);
        }
        debug_assert!(radii.feasible);
        if b.z1.hi() >= 1.0 - 1e-12 {
            Verdict::ProvedMarginal
        } else {
            Verdict::Proved
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Proved => f.write_str("proved"),
            Verdict::ProvedMarginal => f.write_str("proved (marginal)"),
            Verdict::Failed(r) => write!(f, "failed: {r}"),
        }
    }
}

/// Report of the scalar engine self-test on `x² − 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SelfTestReport {
    pub x_bar: f64,
    pub a: f64,
    pub bounds: KBounds,
    pub radii: RadiiResult,
    /// Rigorous enclosure of the validated ball `[x̄ − r_min, x̄ + r_min]`.
    pub ball: Option<RIval>,
    pub contains_sqrt2: bool,
}

/// Runs the engine on `f(x) = x² − 2` at the centre `x̄` with approximate
/// inverse `A`.
pub fn nk_selftest_at(x_bar: f64, a: f64) -> SelfTestReport {
    let x = RIval::point(x_bar);
    let ai = RIval::point(a);
    let y = (ai * (x.sqr() - RIval::point(2.0))).abs();
    let z1 = (RIval::ONE - ai * x * RIval::point(2.0)).abs();
    let z2 = (ai * RIval::point(2.0)).abs();
    let bounds = KBounds { y, z1, z2, r_star: f64::INFINITY };
    let radii = radii_from_bounds(&bounds);
    let ball = radii.feasible.then(|| x.inflate(radii.r_min));
    let sqrt2 = RIval::point(2.0).sqrt().expect("2 > 0");
    let contains_sqrt2 = ball.is_some_and(|b| b.contains_interval(&sqrt2));
    SelfTestReport { x_bar, a, bounds, radii, ball, contains_sqrt2 }
}

/// The canonical self-test: `x̄ = 1.4142135`, `A = 1/(2x̄)`.
pub fn nk_selftest() -> SelfTestReport {
    #[allow(clippy::approx_constant)] // deliberately a 7-digit approximation
    let x_bar = 1.4142135;
    nk_selftest_at(x_bar, 1.0 / (2.0 * x_bar))
}
