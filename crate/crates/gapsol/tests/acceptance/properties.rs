//! Randomized property suites. Every suite runs at least 100 cases with a
//! deterministic generator, so a failure is reproducible from the output.

use gapsol::bundle::{self, BundleCandidate, BundleMap, BundleProblem, BundleX};
use gapsol::bvp::{self, BvpCandidate, BvpMap, BvpProblem};
use gapsol::dense::DenseMatrix;
use gapsol::interval::{parse_decimal, CIval, RIval};
use gapsol::manifold::{ManifoldCandidate, ManifoldMap, ManifoldProblem};
use gapsol::numerics::{self, GpField, TruncatedMap};
use gapsol::operators::{opnorm_weighted_l1, vector_norm, BallMat, Coord, FiniteBlockOp, SpaceLayout};
use gapsol::seqspace::{conv_cheb, conv_fourier, conv_tf, support_lemma_check, ChebSeq, FourierSeq, TaylorFourierSeq};
use num_bigint::BigInt;
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one suite.
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: u32,
    pub outcome: Result<(), String>,
}

/// The stage problems of the main run, used by the derivative and
/// equivariance suites.
pub struct StageProblems {
    pub bprob: BundleProblem,
    pub bcand: BundleCandidate,
    pub mprob: ManifoldProblem,
    pub mcand: ManifoldCandidate,
    pub sprob: BvpProblem,
    pub scand: BvpCandidate,
}

type CaseResult = Result<(), TestCaseError>;

fn run<S: Strategy>(name: &'static str, cases: u32, strategy: S, test: impl Fn(S::Value) -> CaseResult) -> SuiteResult {
    let config = ProptestConfig { cases, failure_persistence: None, max_global_rejects: cases * 4, ..ProptestConfig::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let outcome = runner.run(&strategy, test).map_err(|e| e.to_string());
    SuiteResult { name, cases, outcome }
}

/// Merges several runs into one suite line.
fn merge(name: &'static str, parts: Vec<SuiteResult>) -> SuiteResult {
    let cases = parts.iter().map(|p| p.cases).min().unwrap_or(0);
    let failures: Vec<String> = parts.into_iter().filter_map(|p| p.outcome.err().map(|e| format!("[{}] {e}", p.name))).collect();
    SuiteResult { name, cases, outcome: if failures.is_empty() { Ok(()) } else { Err(failures.join("; ")) } }
}

pub fn run_all(st: &StageProblems) -> Vec<SuiteResult> {
    vec![
        interval_containment(),
        banach_algebra(),
        convolution_brute_force(),
        opnorm_oracle(),
        support_lemma(),
        conjugation_equivariance(st),
        derivative_vs_finite_differences(st),
        energy_conservation(),
    ]
}

// ---------------------------------------------------------------------------
// Interval containment against an exact oracle
// ---------------------------------------------------------------------------

/// Fixed-point scale (bits) of the oracle.
const S: u32 = 400;

/// `x · 2^s` exactly (requires the binary exponent of `x` to be ≥ −s).
fn fixed(x: f64, s: u32) -> BigInt {
    if x == 0.0 {
        return BigInt::from(0);
    }
    let bits = x.abs().to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1 << 52) - 1);
    let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1 << 52), exp - 1075) };
    let shift = e + s as i64;
    assert!(shift >= 0, "value too small for the oracle scale");
    let v = BigInt::from(mant) << shift as usize;
    if x < 0.0 {
        -v
    } else {
        v
    }
}

fn encloses(iv: RIval, exact: &BigInt, s: u32, slack: &BigInt) -> bool {
    fixed(iv.lo(), s) <= exact + slack && fixed(iv.hi(), s) >= exact - slack
}

fn fmul(a: &BigInt, b: &BigInt) -> BigInt {
    (a * b) >> S as usize
}

/// `exp` (kind 0), `cos` (1) or `sin` (2) at scale `2^S` by Taylor series.
fn series(x: f64, kind: u8) -> BigInt {
    let xf = fixed(x, S);
    let one = BigInt::from(1) << S as usize;
    let mut term = if kind == 2 { xf.clone() } else { one };
    let mut n: u32 = if kind == 2 { 1 } else { 0 };
    let mut sum = term.clone();
    loop {
        if kind == 0 {
            n += 1;
            term = fmul(&term, &xf) / BigInt::from(n);
        } else {
            term = -(fmul(&fmul(&term, &xf), &xf) / BigInt::from((n + 1) * (n + 2)));
            n += 2;
        }
        if term == BigInt::from(0) {
            break;
        }
        sum += &term;
    }
    sum
}

/// Truncation error of [`series`] is far below `2^{S−250}` for `|x| ≤ 20`.
fn series_slack() -> BigInt {
    BigInt::from(1) << (S - 250) as usize
}

fn moderate() -> impl Strategy<Value = f64> {
    (-(1i64 << 52)..(1i64 << 52), -60i32..8).prop_map(|(m, e)| m as f64 * 2f64.powi(e - 52))
}

/// An interval together with a point inside it.
fn interval_with_point() -> impl Strategy<Value = (RIval, f64)> {
    (moderate(), 0.0f64..1.0, 0.0f64..1.0, 0usize..3).prop_map(|(x, wl, wh, kind)| {
        let scale = x.abs().max(1e-3) * [0.0, 1e-12, 1e-3][kind];
        (RIval::new(x - wl * scale, x + wh * scale).unwrap(), x)
    })
}

fn check_primitives(a: RIval, x: f64, b: RIval, y: f64) -> CaseResult {
    let (xs, ys) = (fixed(x, S), fixed(y, S));
    let zero = BigInt::from(0);
    prop_assert!(encloses(a + b, &(&xs + &ys), S, &zero), "{a} + {b}");
    prop_assert!(encloses(a - b, &(&xs - &ys), S, &zero), "{a} - {b}");
    prop_assert!(encloses(a * b, &(&xs * &ys), 2 * S, &zero), "{a} * {b}");
    prop_assert!(encloses(a.sqr(), &(&xs * &xs), 2 * S, &zero), "{a}²");
    if !b.contains_zero() {
        // lo ≤ x/y ≤ hi  ⇔  lo·y·sgn(y) ≤ x·sgn(y) ≤ hi·y·sgn(y)
        let q = a.checked_div(&b).unwrap();
        let sgn = if y > 0.0 { 1 } else { -1 };
        let x2 = (&xs << S as usize) * sgn;
        prop_assert!(fixed(q.lo(), S) * &ys * sgn <= x2 && fixed(q.hi(), S) * &ys * sgn >= x2, "{a} / {b}");
    }
    if x >= 0.0 {
        let r = a.nonneg().sqrt().unwrap();
        let (lo, hi) = (fixed(r.lo(), S), fixed(r.hi(), S));
        let x2 = &xs << S as usize;
        prop_assert!(&lo * &lo <= x2 && &hi * &hi >= x2, "sqrt {a}");
    }
    if x.abs() <= 20.0 && x.abs() >= 1e-12 {
        let slack = series_slack();
        prop_assert!(encloses(a.exp(), &series(x, 0), S, &slack), "exp {a}");
        prop_assert!(encloses(a.cos(), &series(x, 1), S, &slack), "cos {a}");
        prop_assert!(encloses(a.sin(), &series(x, 2), S, &slack), "sin {a}");
    }
    Ok(())
}

fn interval_containment() -> SuiteResult {
    let primitives =
        run("primitives", 1000, (interval_with_point(), interval_with_point()), |((a, x), (b, y))| check_primitives(a, x, b, y));
    // Inclusion monotonicity: a ⊆ a′, b ⊆ b′ ⇒ op(a, b) ⊆ op(a′, b′).
    let nesting =
        run("nesting", 500, (interval_with_point(), interval_with_point(), 0.0f64..1e-3, 0.0f64..1e-3), |((a, _), (b, _), ga, gb)| {
            let (a2, b2) = (a.inflate(ga * (1.0 + a.mag())), b.inflate(gb * (1.0 + b.mag())));
            prop_assert!(a2.contains_interval(&a) && b2.contains_interval(&b));
            prop_assert!((a2 + b2).contains_interval(&(a + b)));
            prop_assert!((a2 - b2).contains_interval(&(a - b)));
            prop_assert!((a2 * b2).contains_interval(&(a * b)));
            if !b2.contains_zero() {
                prop_assert!(a2.checked_div(&b2).unwrap().contains_interval(&a.checked_div(&b).unwrap()));
            }
            if a.mag() <= 20.0 {
                prop_assert!(a2.exp().contains_interval(&a.exp()));
                prop_assert!(a2.cos().contains_interval(&a.cos()));
                prop_assert!(a2.sin().contains_interval(&a.sin()));
            }
            Ok(())
        });
    let decimal = run("decimal parsing", 500, (0u64..1_000_000, 0u64..1_000_000, any::<bool>()), |(int, frac, neg)| {
        let text = format!("{}{int}.{frac:06}", if neg { "-" } else { "" });
        let iv = parse_decimal(&text).unwrap();
        let num = BigInt::from(int * 1_000_000 + frac) * if neg { -1 } else { 1 };
        let den = BigInt::from(1_000_000u64);
        prop_assert!(fixed(iv.lo(), S) * &den <= &num << S as usize, "{text} → {iv}");
        prop_assert!(fixed(iv.hi(), S) * &den >= &num << S as usize, "{text} → {iv}");
        // Formatting the endpoints and re-parsing never shrinks the interval.
        let back = parse_decimal(&format!("{:e}", iv.lo())).unwrap().hull(&parse_decimal(&format!("{:e}", iv.hi())).unwrap());
        prop_assert!(back.contains_interval(&iv));
        Ok(())
    });
    merge("interval containment fuzzing", vec![primitives, nesting, decimal])
}

// ---------------------------------------------------------------------------
// Convolutions
// ---------------------------------------------------------------------------

fn weight() -> impl Strategy<Value = f64> + Clone {
    prop_oneof![Just(1.0), Just(1.05), Just(1.5), Just(2.0)]
}

fn random_fourier(rng: &mut ChaCha8Rng, m: usize, w: f64, int: bool) -> (FourierSeq, Vec<(f64, f64)>) {
    let raw: Vec<(f64, f64)> = (0..2 * m + 1)
        .map(|_| {
            if int {
                (rng.random_range(-9..10) as f64, rng.random_range(-9..10) as f64)
            } else {
                (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            }
        })
        .collect();
    let seq = FourierSeq::from_coeffs(raw.iter().map(|&(a, b)| CIval::point(a, b)).collect(), w).unwrap();
    (seq, raw)
}

fn random_tf(rng: &mut ChaCha8Rng, n: usize, m: usize, w: f64, int: bool) -> (TaylorFourierSeq, Vec<Vec<(f64, f64)>>) {
    let (orders, raw): (Vec<_>, Vec<_>) = (0..=n).map(|_| random_fourier(rng, m, w, int)).unzip();
    (TaylorFourierSeq::from_orders(orders).unwrap(), raw)
}

fn random_cheb(rng: &mut ChaCha8Rng, m: usize, w: f64, int: bool) -> (ChebSeq, Vec<f64>) {
    let raw: Vec<f64> = (0..=m).map(|_| if int { rng.random_range(-9..10) as f64 } else { rng.random_range(-1.0..1.0) }).collect();
    (ChebSeq::from_points(&raw, w).unwrap(), raw)
}

/// `‖p*q‖.hi ≤ (‖p‖·‖q‖).hi` up to one ulp per rounded operation.
///
/// When `‖p*q‖ = ‖p‖‖q‖` exactly (e.g. `p` a single mode), both sides are
/// outward-rounded enclosures of the same number and differ by the rounding
/// accumulated in the two evaluations, which is at most one ulp per
/// operation: `ops` counts the operations of both evaluations.
fn submultiplicative(conv: RIval, p: RIval, q: RIval, ops: usize) -> CaseResult {
    let bound = (p * q).hi();
    let slack = bound * ops as f64 * f64::EPSILON;
    prop_assert!(conv.hi() <= bound + slack, "‖p*q‖ ≤ {} exceeds ‖p‖‖q‖ ≤ {bound} (+{slack:e})", conv.hi());
    Ok(())
}

/// Rounded operations of a norm evaluation plus its convolution (four per
/// product of complex coefficients, three per weighted term of each of the
/// norms of p, q and p*q).
fn op_count(terms_p: usize, terms_q: usize) -> usize {
    4 * terms_p * terms_q + 6 * (terms_p + terms_q) + 1
}

fn banach_algebra() -> SuiteResult {
    let params = (0usize..7, 0usize..7, 0usize..4, any::<u64>(), weight(), any::<bool>());
    let fourier = run("fourier", 200, params.clone(), |(m1, m2, _, seed, w, int)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, _) = random_fourier(&mut rng, m1, w, int);
        let (q, _) = random_fourier(&mut rng, m2, w, int);
        submultiplicative(conv_fourier(&p, &q).unwrap().norm(), p.norm(), q.norm(), op_count(2 * m1 + 1, 2 * m2 + 1))
    });
    let tf = run("taylor-fourier", 200, params.clone(), |(m1, m2, n, seed, w, int)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, _) = random_tf(&mut rng, n, m1, w, int);
        let n2 = (n + 1) % 4;
        let (q, _) = random_tf(&mut rng, n2, m2, w, int);
        submultiplicative(conv_tf(&p, &q).unwrap().norm(), p.norm(), q.norm(), op_count((n + 1) * (2 * m1 + 1), (n2 + 1) * (2 * m2 + 1)))
    });
    let cheb = run("chebyshev", 200, params, |(m1, m2, _, seed, w, int)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, _) = random_cheb(&mut rng, m1, w, int);
        let (q, _) = random_cheb(&mut rng, m2, w, int);
        submultiplicative(conv_cheb(&p, &q).unwrap().norm(), p.norm(), q.norm(), op_count(2 * m1 + 1, 2 * m2 + 1))
    });
    merge("Banach algebra (Fourier, Taylor-Fourier, Chebyshev)", vec![fourier, tf, cheb])
}

/// Brute-force complex convolution of small-integer coefficient arrays
/// indexed `−m..=m` (exact in `f64`).
fn brute_fourier(p: &[(f64, f64)], q: &[(f64, f64)], k: i64) -> (f64, f64) {
    let (m1, m2) = ((p.len() / 2) as i64, (q.len() / 2) as i64);
    let (mut re, mut im) = (0.0, 0.0);
    for j in -m1..=m1 {
        let l = k - j;
        if l.abs() <= m2 {
            let (a, b) = p[(j + m1) as usize];
            let (c, d) = q[(l + m2) as usize];
            re += a * c - b * d;
            im += a * d + b * c;
        }
    }
    (re, im)
}

fn convolution_brute_force() -> SuiteResult {
    let params = (0usize..6, 0usize..6, 0usize..4, any::<u64>(), weight());
    let fourier = run("fourier", 200, params.clone(), |(m1, m2, _, seed, w)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, pr) = random_fourier(&mut rng, m1, w, true);
        let (q, qr) = random_fourier(&mut rng, m2, w, true);
        let c = conv_fourier(&p, &q).unwrap();
        prop_assert_eq!(c.m_max(), m1 + m2);
        for k in -((m1 + m2) as i64)..=(m1 + m2) as i64 {
            let (re, im) = brute_fourier(&pr, &qr, k);
            prop_assert!(c.get(k).contains(re, im) && c.get(k).rad() == 0.0, "k={k}: {} vs ({re},{im})", c.get(k));
        }
        Ok(())
    });
    let tf = run("taylor-fourier", 200, params.clone(), |(m1, m2, n, seed, w)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = m1.max(m2);
        let (p, pr) = random_tf(&mut rng, n, m, w, true);
        let (q, qr) = random_tf(&mut rng, m2 % 4, m, w, true);
        let c = conv_tf(&p, &q).unwrap();
        let mm = 2 * m as i64;
        for order in 0..=(n + m2 % 4) {
            for k in -mm..=mm {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, po) in pr.iter().enumerate().take(order.min(n) + 1) {
                    if let Some(qo) = qr.get(order - i) {
                        let (r, s) = brute_fourier(po, qo, k);
                        re += r;
                        im += s;
                    }
                }
                prop_assert!(c.get(order, k).contains(re, im), "n={order} k={k}");
            }
        }
        Ok(())
    });
    let cheb = run("chebyshev", 200, params, |(m1, m2, _, seed, w)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, pr) = random_cheb(&mut rng, m1, w, true);
        let (q, qr) = random_cheb(&mut rng, m2, w, true);
        let c = conv_cheb(&p, &q).unwrap();
        // Two-sided convolution of the even extensions a_{−m} = a_m.
        let (n1, n2) = (m1 as i64, m2 as i64);
        for k in 0..=(n1 + n2) {
            let mut s = 0.0;
            for j in -n1..=n1 {
                let l = (k - j).abs();
                if l <= n2 {
                    s += pr[j.unsigned_abs() as usize] * qr[l as usize];
                }
            }
            prop_assert!(c.get(k as usize).contains(s), "k={k}: {} vs {s}", c.get(k as usize));
        }
        Ok(())
    });
    merge("convolution vs brute force (Fourier, Taylor-Fourier, Chebyshev)", vec![fourier, tf, cheb])
}

fn support_lemma() -> SuiteResult {
    run("support lemma instances", 200, (1usize..6, 1usize..5, any::<u64>()), |(m, extra, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, _) = random_fourier(&mut rng, m, 1.05, false);
        // q supported on 2m < |k| ≤ 2m + extra.
        let big = 2 * m + extra;
        let mut q = FourierSeq::zeros(big, 1.05).unwrap();
        for k in (2 * m + 1) as i64..=big as i64 {
            q.set(k, CIval::point(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)));
            q.set(-k, CIval::point(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)));
        }
        prop_assert!(support_lemma_check(&p, &q, m));
        // Brute force: no pair j + l = k with |j| ≤ m, |l| > 2m reaches |k| ≤ m,
        // while the coefficients just outside do get contributions.
        let c = conv_fourier(&p, &q).unwrap();
        prop_assert!((-(m as i64)..=m as i64).all(|k| c.get(k).is_zero()));
        prop_assert!(!c.get(m as i64 + 1).is_zero() && !c.get(-(m as i64) - 1).is_zero());
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Operator norms
// ---------------------------------------------------------------------------

fn random_layout(rng: &mut ChaCha8Rng, blocks: usize, len: usize) -> SpaceLayout {
    let mut coords = Vec::new();
    for b in 0..blocks {
        match (b + rng.random_range(0..3)) % 3 {
            0 => coords.extend((0..len).map(|m| Coord::Cheb { comp: b, m })),
            1 => coords.extend((0..len as i64).map(|m| Coord::Fourier { comp: b, m: m - (len as i64) / 2 })),
            _ => coords.push(Coord::Param { comp: b }),
        }
    }
    SpaceLayout::new(coords, 1.0 + rng.random_range(0.0..0.5), 1.0 + rng.random_range(0.0..0.5)).unwrap()
}

fn opnorm_oracle() -> SuiteResult {
    run("opnorm vs basis-vector oracle", 200, (any::<u64>(), 1usize..4, 1usize..4), |(seed, blocks, len)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = random_layout(&mut rng, blocks, len);
        let cols = random_layout(&mut rng, blocks, len);
        let nc = cols.len();
        let vals: Vec<f64> = (0..rows.len() * nc).map(|_| rng.random_range(0.0..2.0)).collect();
        let m = DenseMatrix::from_fn(rows.len(), nc, |i, j| Complex64::new(vals[i * nc + j], 0.0));
        let op = FiniteBlockOp::new(BallMat::point(m), rows.clone(), cols.clone()).unwrap();
        let bound = opnorm_weighted_l1(&op).hi();
        // With non-negative entries there is no cancellation, so the norm is
        // attained on a vector with one weighted basis vector per input block.
        let blocks_in: Vec<Vec<usize>> = (0..cols.n_comps()).map(|c| (0..nc).filter(|&j| cols.coord(j).comp() == c).collect()).collect();
        let mut choice = vec![0usize; blocks_in.len()];
        let mut best = 0.0f64;
        'enumerate: loop {
            let mut x = vec![CIval::ZERO; nc];
            for (c, idx) in blocks_in.iter().enumerate() {
                x[idx[choice[c]]] = CIval::real(cols.weight(idx[choice[c]]).recip().unwrap());
            }
            let y = op.apply(&x).unwrap();
            best = best.max(vector_norm(&y, &rows).lo() / vector_norm(&x, &cols).hi());
            for c in 0..choice.len() {
                choice[c] += 1;
                if choice[c] < blocks_in[c].len() {
                    continue 'enumerate;
                }
                choice[c] = 0;
            }
            break;
        }
        prop_assert!(bound >= best, "bound {bound} < oracle {best}");
        prop_assert!(bound <= best * (1.0 + 1e-12), "bound {bound} not attained (oracle {best})");
        // Soundness on random signed complex vectors.
        for _ in 0..5 {
            let x: Vec<CIval> = (0..nc).map(|_| CIval::point(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let ratio = vector_norm(&op.apply(&x).unwrap(), &rows).lo() / vector_norm(&x, &cols).hi();
            prop_assert!(ratio <= bound, "ratio {ratio} > bound {bound}");
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Stage maps
// ---------------------------------------------------------------------------

fn perturb(x: &[Complex64], rng: &mut ChaCha8Rng, eps: f64, real: bool) -> Vec<Complex64> {
    x.iter().map(|z| z + Complex64::new(rng.random_range(-eps..eps), if real { 0.0 } else { rng.random_range(-eps..eps) })).collect()
}

fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// For `d = DF(x)⁻¹ r`, the relative sup-distance between the central
/// difference `(F(x + hd) − F(x − hd))/2h` and `r`.
fn fd_mismatch<M: TruncatedMap>(map: &M, x: &[Complex64], r: &[Complex64]) -> f64 {
    let d = map.solve_linear(x, r).unwrap();
    let h = 1e-5 / max_abs(&d).max(1e-300);
    let plus: Vec<Complex64> = x.iter().zip(&d).map(|(a, b)| a + b * h).collect();
    let minus: Vec<Complex64> = x.iter().zip(&d).map(|(a, b)| a - b * h).collect();
    let (fp, fm) = (map.residual(&plus).unwrap(), map.residual(&minus).unwrap());
    let err = fp.iter().zip(&fm).zip(r).map(|((p, m), ri)| ((p - m) / (2.0 * h) - ri).norm()).fold(0.0, f64::max);
    err / max_abs(r)
}

fn random_bundle_x(rng: &mut ChaCha8Rng, m: usize, nu: f64) -> BundleX {
    let mut seq = || random_fourier(rng, m, nu, false).0;
    let (v1, v2) = (seq(), seq());
    BundleX { lambda: CIval::point(rng.random_range(-1.0..0.0), rng.random_range(-0.5..0.5)), v1, v2 }
}

/// Enclosures of the same exact value: they intersect and are both tight.
fn agree(a: &CIval, b: &CIval) -> bool {
    let tight = |z: &CIval| z.rad() <= 1e-14 * (1.0 + z.mid().norm());
    a.re.intersect(&b.re).is_some() && a.im.intersect(&b.im).is_some() && tight(a) && tight(b)
}

fn seq_agree(a: &FourierSeq, b: &FourierSeq) -> bool {
    let k = a.m_max() as i64;
    a.m_max() == b.m_max() && (-k..=k).all(|m| agree(&a.get(m), &b.get(m)))
}

fn conjugation_equivariance(st: &StageProblems) -> SuiteResult {
    run("conjugation equivariance of F_bundle", 200, (any::<u64>(), 1usize..st.bprob.m + 3), |(seed, m)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_bundle_x(&mut rng, m, st.bprob.nu);
        let lhs = bundle::f_bundle(&x.conj_flip(), &st.bprob).unwrap();
        let rhs = bundle::f_bundle(&x, &st.bprob).unwrap().conj_flip();
        // Both sides enclose F(Cx) = C F(x); the summation order differs, so
        // the enclosures agree up to rounding rather than bit for bit.
        prop_assert!(agree(&lhs.lambda, &rhs.lambda), "{} vs {}", lhs.lambda, rhs.lambda);
        prop_assert!(seq_agree(&lhs.v1, &rhs.v1));
        prop_assert!(seq_agree(&lhs.v2, &rhs.v2));
        Ok(())
    })
}

const FD_TOL: f64 = 1e-6;

fn derivative_vs_finite_differences(st: &StageProblems) -> SuiteResult {
    let bundle_map = BundleMap { prob: &st.bprob };
    let bundle = run("bundle", 100, any::<u64>(), |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // The bundle map acts on conjugate-symmetric sequences with real λ.
        let mut x = perturb(&st.bcand.to_vec(), &mut rng, 1e-2, false);
        bundle_map.project(&mut x);
        let mut r = perturb(&vec![Complex64::new(0.0, 0.0); x.len()], &mut rng, 1.0, true);
        bundle_map.project(&mut r);
        let mis = fd_mismatch(&bundle_map, &x, &r);
        prop_assert!(mis <= FD_TOL, "truncated DF mismatch {mis:e}");
        // The interval directional derivative used by the bounds.
        let nu = st.bprob.nu;
        let xb = BundleCandidate::from_vec(st.bprob.m, &x).to_x(nu).unwrap();
        let h = random_bundle_x(&mut rng, st.bprob.m, nu);
        let dfh = bundle::df_bundle_apply(&xb, &h, &st.bprob).unwrap();
        let eps = 1e-6;
        let shifted = |sg: f64| BundleX {
            lambda: xb.lambda + h.lambda.scale(RIval::point(sg * eps)),
            v1: xb.v1.add(&h.v1.scale(CIval::point(sg * eps, 0.0))).unwrap(),
            v2: xb.v2.add(&h.v2.scale(CIval::point(sg * eps, 0.0))).unwrap(),
        };
        let (fp, fm) = (bundle::f_bundle(&shifted(1.0), &st.bprob).unwrap(), bundle::f_bundle(&shifted(-1.0), &st.bprob).unwrap());
        let fd = |a: CIval, b: CIval| (a.mid() - b.mid()) / (2.0 * eps);
        prop_assert!((fd(fp.lambda, fm.lambda) - dfh.lambda.mid()).norm() <= FD_TOL);
        let k = dfh.v1.m_max() as i64;
        for mm in -k..=k {
            prop_assert!((fd(fp.v1.get(mm), fm.v1.get(mm)) - dfh.v1.get(mm).mid()).norm() <= FD_TOL, "v1 mode {mm}");
            prop_assert!((fd(fp.v2.get(mm), fm.v2.get(mm)) - dfh.v2.get(mm).mid()).norm() <= FD_TOL, "v2 mode {mm}");
        }
        Ok(())
    });
    let manifold_map = ManifoldMap::new(&st.mprob).unwrap();
    let manifold = run("manifold", 100, any::<u64>(), |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = perturb(&st.mcand.to_vec(), &mut rng, 1e-3, false);
        manifold_map.project(&mut x);
        let mut r = perturb(&vec![Complex64::new(0.0, 0.0); x.len()], &mut rng, 1.0, false);
        // Orders 0 and 1 are pinned; their residual rows are identically zero
        // on the projected subspace, so the right-hand side must vanish there.
        manifold_map.project(&mut r);
        let pinned = manifold_map.residual(&x).unwrap();
        for (ri, p) in r.iter_mut().zip(&pinned) {
            if *p == Complex64::new(0.0, 0.0) {
                *ri = Complex64::new(0.0, 0.0);
            }
        }
        let mis = fd_mismatch(&manifold_map, &x, &r);
        prop_assert!(mis <= FD_TOL, "mismatch {mis:e}");
        Ok(())
    });
    let bvp_map = BvpMap { prob: &st.sprob };
    let soliton = run("boundary-value", 100, any::<u64>(), |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0 = perturb(&st.scand.to_vec(), &mut rng, 1e-3, true);
        let r: Vec<Complex64> = (0..x0.len()).map(|_| Complex64::new(rng.random_range(-1.0..1.0), 0.0)).collect();
        let mis = fd_mismatch(&bvp_map, &x0, &r);
        prop_assert!(mis <= FD_TOL, "mismatch {mis:e}");
        // Forward check of the full derivative matrix along a random direction.
        let x = BvpCandidate::from_vec(st.sprob.m, &x0);
        let df = bvp::df_float(&x, &st.sprob).unwrap();
        let d: Vec<f64> = (0..x0.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let eps = 1e-6;
        let at = |sg: f64| BvpCandidate::from_vec(st.sprob.m, &x0.iter().zip(&d).map(|(a, b)| a + sg * eps * b).collect::<Vec<_>>());
        let (fp, fm) = (bvp::residual_float(&at(1.0), &st.sprob), bvp::residual_float(&at(-1.0), &st.sprob));
        let mut worst = 0.0f64;
        let mut scale = 1.0f64;
        for i in 0..x0.len() {
            let lin: f64 = (0..x0.len()).map(|j| df.get(i, j).re * d[j]).sum();
            worst = worst.max(((fp[i] - fm[i]) / (2.0 * eps) - lin).abs());
            scale = scale.max(lin.abs());
        }
        prop_assert!(worst <= FD_TOL * scale, "forward mismatch {worst:e} at scale {scale:e}");
        Ok(())
    });
    merge("DF vs finite differences (bundle, manifold, boundary-value)", vec![bundle, manifold, soliton])
}

// ---------------------------------------------------------------------------
// Integrator
// ---------------------------------------------------------------------------

fn energy_conservation() -> SuiteResult {
    let fields = [GpField { a: 1.1025, b: 0.55125, c: -0.826875 }, GpField { a: 1.0, b: -1.0, c: 1.0 }, GpField { a: 1.0, b: 1.0, c: 1.0 }];
    let strategy = (-0.5f64..0.5, -0.5f64..0.5, 0.0f64..std::f64::consts::TAU, 0.2f64..1.5, 0usize..3, any::<bool>());
    run("H conservation over one period", 100, strategy, move |(u1, u2, phase, amp, which, backwards)| {
        let u0 = [u1, u2, amp * phase.cos(), -2.0 * amp * phase.sin()];
        let end = if backwards { -std::f64::consts::PI } else { std::f64::consts::PI };
        let tr = numerics::integrate_gp(fields[which], u0, 0.0, &[end], numerics::ODE_TOL);
        // Finite-time blow-up of the cubic flow is rejected, not passed.
        prop_assume!(tr.is_ok());
        let h0 = numerics::hamiltonian(&u0);
        for st in &tr.unwrap().states {
            let h = numerics::hamiltonian(st);
            prop_assert!((h - h0).abs() <= 1e-9, "H drifted from {h0} to {h}");
        }
        Ok(())
    })
}
