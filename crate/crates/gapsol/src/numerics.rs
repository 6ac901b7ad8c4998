//! Non-rigorous floating-point front-end: ODE integration of the
//! four-dimensional system, the monodromy oracle for the Floquet exponent,
//! the truncated eigenproblem for the stable bundle, a generic Newton driver
//! and Chebyshev seeding of the boundary-value problem.
//!
//! Nothing here claims rigor; every output is re-validated by a stage
//! validator.

use nalgebra::{DMatrix, DVector, Vector4};
use num_complex::Complex64;
use ode_solvers::{Dop853, OutputType, System};

use crate::error::{Error, Result};

/// Order of the embedded Runge–Kutta pair used for all integrations.
pub const INTEGRATOR_ORDER: u32 = 8;

/// Default integrator tolerance (relative and absolute).
pub const ODE_TOL: f64 = 1e-12;

/// States with `|u₁|` above this are treated as blow-up.
pub const BLOWUP: f64 = 1e4;

/// Floating parameters of the vector field
/// `g(U) = (u₂, −a u₁ + b u₃ u₁ + c u₁³, u₄, −4 u₃)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GpField {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl GpField {
    pub fn rhs(&self, u: &[f64; 4]) -> [f64; 4] {
        [u[1], -self.a * u[0] + self.b * u[2] * u[0] + self.c * u[0] * u[0] * u[0], u[3], -4.0 * u[2]]
    }
}

/// Conserved quantity `H = (u₄² + 4u₃²)/2` of the forcing subsystem.
pub fn hamiltonian(u: &[f64; 4]) -> f64 {
    0.5 * (u[3] * u[3] + 4.0 * u[2] * u[2])
}

/// The field run forwards (`dir = 1`) or in reversed time (`dir = −1`).
///
/// Backward integration is done by integrating `y(s) = U(t₀ − s)` forwards
/// in `s`, which keeps the step-size logic of the solver on its tested path.
struct Directed {
    field: GpField,
    dir: f64,
    blowup: f64,
    blown_up: bool,
}

impl System<f64, Vector4<f64>> for Directed {
    fn system(&self, _x: f64, y: &Vector4<f64>, dy: &mut Vector4<f64>) {
        let g = self.field.rhs(&[y[0], y[1], y[2], y[3]]);
        for i in 0..4 {
            dy[i] = self.dir * g[i];
        }
    }

    fn solout(&mut self, _x: f64, y: &Vector4<f64>, _dy: &Vector4<f64>) -> bool {
        if !y.iter().all(|v| v.is_finite()) || y[0].abs() > self.blowup {
            self.blown_up = true;
        }
        self.blown_up
    }
}

/// Sampled trajectory of the four-dimensional system.
#[derive(Clone, Debug, PartialEq)]
pub struct OdeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<[f64; 4]>,
    pub order: u32,
    pub tol: f64,
    pub accepted_steps: u32,
    pub rejected_steps: u32,
}

impl OdeTrajectory {
    pub fn last(&self) -> [f64; 4] {
        *self.states.last().expect("trajectory holds the initial state")
    }
}

fn step(field: GpField, u: [f64; 4], t0: f64, t1: f64, tol: f64, blowup: f64) -> Result<([f64; 4], u32, u32)> {
    if t0 == t1 {
        return Ok((u, 0, 0));
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let sys = Directed { field, dir, blowup, blown_up: false };
    let mut solver = Dop853::new(sys, 0.0, span, span, Vector4::from(u), tol, tol);
    solver.set_output(OutputType::Sparse);
    let stats = solver.integrate().map_err(|e| Error::Integration(e.to_string()))?;
    let (xs, ys) = (solver.x_out(), solver.y_out());
    let (x_last, y) = (*xs.last().expect("output"), ys.last().expect("output"));
    let out = [y[0], y[1], y[2], y[3]];
    if !out.iter().all(|v| v.is_finite()) || out[0].abs() > blowup || x_last < span * (1.0 - 1e-14) {
        return Err(Error::Integration(format!("blow-up near t = {}", t0 + dir * x_last)));
    }
    Ok((out, stats.accepted_steps, stats.rejected_steps))
}

/// Integrates from `(t₀, u₀)` and records the state at each of `times`
/// (visited in the given order, forwards or backwards).
pub fn integrate_gp(field: GpField, u0: [f64; 4], t0: f64, times: &[f64], tol: f64) -> Result<OdeTrajectory> {
    let mut traj = OdeTrajectory { times: vec![t0], states: vec![u0], order: INTEGRATOR_ORDER, tol, accepted_steps: 0, rejected_steps: 0 };
    let (mut t, mut u) = (t0, u0);
    for &t_next in times {
        let (u_next, acc, rej) = step(field, u, t, t_next, tol, BLOWUP)?;
        traj.accepted_steps += acc;
        traj.rejected_steps += rej;
        traj.times.push(t_next);
        traj.states.push(u_next);
        (t, u) = (t_next, u_next);
    }
    Ok(traj)
}

/// Floquet exponent of `u'' + (a − b cos 2x)u = 0` from the period map at a
/// given tolerance.
///
/// The forcing is generated autonomously as `u₃ = cos 2x` by the linear
/// (`c = 0`) four-dimensional system; the non-autonomous two-dimensional form
/// trips the step-size controller of the solver.
pub fn monodromy_oracle_tol(a: f64, b: f64, tol: f64) -> Result<f64> {
    let pi = std::f64::consts::PI;
    let field = GpField { a, b, c: 0.0 };
    let (e1, _, _) = step(field, [1.0, 0.0, 1.0, 0.0], 0.0, pi, tol, f64::INFINITY)?;
    let (e2, _, _) = step(field, [0.0, 1.0, 1.0, 0.0], 0.0, pi, tol, f64::INFINITY)?;
    let d = 0.5 * (e1[0] + e2[1]);
    if d.abs() <= 1.0 {
        return Err(Error::NoStableExponent(format!("half-trace {d} lies in [-1, 1]: parameters are not in a gap")));
    }
    // Stable multiplier without cancellation: μ = 1/(d + sign(d)√(d²−1)).
    let mu = 1.0 / (d + d.signum() * (d * d - 1.0).sqrt());
    Ok(mu.abs().ln() / pi)
}

/// [`monodromy_oracle_tol`] at the default tolerance `1e−12`.
pub fn monodromy_oracle(a: f64, b: f64) -> Result<f64> {
    monodromy_oracle_tol(a, b, ODE_TOL)
}

/// Truncated eigenproblem matrix on `[v¹_{−M..M}, v²_{−M..M}]`:
/// `λ v¹ = −im v¹ + v²`, `λ v² = −a v¹ + b γ³*v¹ − im v²`.
fn bundle_eigen_matrix(a: f64, b: f64, m: usize) -> DMatrix<Complex64> {
    let k = 2 * m + 1;
    let mut e = DMatrix::from_element(2 * k, 2 * k, Complex64::new(0.0, 0.0));
    for i in 0..k {
        let mi = i as f64 - m as f64;
        e[(i, i)] = Complex64::new(0.0, -mi);
        e[(i, k + i)] = Complex64::new(1.0, 0.0);
        e[(k + i, k + i)] = Complex64::new(0.0, -mi);
        e[(k + i, i)] = Complex64::new(-a, 0.0);
        for j in [i.wrapping_sub(2), i + 2] {
            if j < k {
                e[(k + i, j)] += Complex64::new(0.5 * b, 0.0);
            }
        }
    }
    e
}

/// Largest accepted distance between the truncated eigenvalue and the
/// monodromy oracle.
pub const EIG_ORACLE_TOL: f64 = 1e-6;

/// Real stable exponent `λ̂` and eigenvector `(v̂¹, v̂²)` (ordered
/// `m = −M..M`) of the truncated bundle problem, normalised to `η(v̂) = l`
/// and conjugate-symmetrised.
pub fn floquet_eig(a: f64, b: f64, m: usize, l: f64) -> Result<(f64, Vec<Complex64>, Vec<Complex64>)> {
    if m < 4 {
        return Err(Error::Precondition(format!("floquet_eig needs M >= 4, got {m}")));
    }
    let oracle = monodromy_oracle(a, b)?;
    let e = bundle_eigen_matrix(a, b, m);
    let n = e.nrows();
    // Inverse iteration shifted slightly off the oracle value.
    let shift = Complex64::new(oracle + 1e-9, 0.0);
    let lu = (&e - DMatrix::<Complex64>::identity(n, n) * shift).lu();
    let mut x = DVector::from_fn(n, |i, _| Complex64::new(1.0 / (1.0 + i as f64), 0.0));
    let mut lambda = Complex64::new(oracle, 0.0);
    for _ in 0..50 {
        let y = lu.solve(&x).ok_or_else(|| Error::Singular("shifted bundle eigenproblem".into()))?;
        let nrm = y.norm();
        if !nrm.is_finite() || nrm == 0.0 {
            return Err(Error::Singular("inverse iteration produced a degenerate vector".into()));
        }
        x = y / Complex64::new(nrm, 0.0);
        let ex = &e * &x;
        let new_lambda = x.dotc(&ex);
        let done = (new_lambda - lambda).norm() < 1e-15 * (1.0 + lambda.norm());
        lambda = new_lambda;
        if done {
            break;
        }
    }
    if (lambda.re - oracle).abs() > EIG_ORACLE_TOL || lambda.im.abs() > EIG_ORACLE_TOL || lambda.re >= 0.0 {
        return Err(Error::NoStableExponent(format!(
            "truncated eigenvalue {:.12} {:+.1e}i is not a real negative value within {EIG_ORACLE_TOL:e} of the monodromy value {oracle:.12}",
            lambda.re, lambda.im
        )));
    }
    let k = 2 * m + 1;
    let eta: Complex64 = x.iter().take(k).sum();
    if eta.norm() < 1e-12 {
        return Err(Error::Singular("eigenvector has vanishing phase functional".into()));
    }
    let scale = Complex64::new(l, 0.0) / eta;
    let mut v1: Vec<Complex64> = x.iter().take(k).map(|z| z * scale).collect();
    let mut v2: Vec<Complex64> = x.iter().skip(k).map(|z| z * scale).collect();
    for v in [&mut v1, &mut v2] {
        for i in 0..m {
            let z = (v[2 * m - i] + v[i].conj()) * 0.5;
            v[2 * m - i] = z;
            v[i] = z.conj();
        }
        v[m].im = 0.0;
    }
    Ok((lambda.re, v1, v2))
}

/// A truncated validation map as seen by [`newton_refine`].
pub trait TruncatedMap {
    /// Floating residual of the truncated map at `x`.
    fn residual(&self, x: &[Complex64]) -> Result<Vec<Complex64>>;
    /// Solves `DF(x) δ = r` with the same truncated derivative the validator
    /// inverts for `A_f`.
    fn solve_linear(&self, x: &[Complex64], r: &[Complex64]) -> Result<Vec<Complex64>>;
    /// Space norm used for the stopping test.
    fn norm(&self, r: &[Complex64]) -> f64;
    /// Re-imposes structural invariants (symmetry, fixed coordinates).
    fn project(&self, _x: &mut [Complex64]) {}
}

/// Convergence history of [`newton_refine`].
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub converged: bool,
}

impl NewtonReport {
    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().expect("at least one residual")
    }
}

/// Residual threshold of [`newton_refine`].
pub const NEWTON_TOL: f64 = 1e-13;
/// Iteration cap of [`newton_refine`].
pub const NEWTON_MAX_ITER: usize = 25;

/// Newton iteration `x ← x − DF(x)⁻¹F(x)` until `‖F‖ ≤ 1e−13` or 25 steps.
///
/// Three consecutive residual increases are reported as divergence unless
/// the residual is already within a factor 1e3 of the target (round-off
/// plateau).
pub fn newton_refine<M: TruncatedMap>(map: &M, x0: &[Complex64]) -> Result<(Vec<Complex64>, NewtonReport)> {
    let mut x = x0.to_vec();
    let mut residuals = Vec::new();
    let mut growth = 0;
    let mut best = (f64::INFINITY, x.clone());
    for it in 1..=NEWTON_MAX_ITER {
        let r = map.residual(&x)?;
        let nr = map.norm(&r);
        if !nr.is_finite() {
            return Err(Error::Divergence(format!("non-finite residual at iteration {it}")));
        }
        if let Some(&prev) = residuals.last() {
            growth = if nr > prev { growth + 1 } else { 0 };
        }
        residuals.push(nr);
        if nr < best.0 {
            best = (nr, x.clone());
        }
        if nr <= NEWTON_TOL {
            return Ok((x, NewtonReport { iterations: it, residuals, converged: true }));
        }
        if growth >= 3 && nr > 1e3 * NEWTON_TOL {
            return Err(Error::Divergence(format!("residual grew three times in a row, now {nr:e}")));
        }
        let d = map.solve_linear(&x, &r)?;
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi -= di;
        }
        map.project(&mut x);
    }
    let r = map.norm(&map.residual(&x)?);
    residuals.push(r);
    if r < best.0 {
        best = (r, x);
    }
    Ok((best.1, NewtonReport { iterations: NEWTON_MAX_ITER, converged: best.0 <= NEWTON_TOL, residuals }))
}

/// Chebyshev nodes `t_j = cos(π(j+½)/K)`, `j = 0..K`.
pub fn cheb_nodes(k: usize) -> Vec<f64> {
    (0..k).map(|j| (std::f64::consts::PI * (j as f64 + 0.5) / k as f64).cos()).collect()
}

/// Coefficients `s_m = (1/K) Σ_j f(t_j) cos(mπ(j+½)/K)` of the interpolant
/// `s₀ + 2Σ s_m T_m` through samples at [`cheb_nodes`].
pub fn cheb_interpolate(samples: &[f64]) -> Vec<f64> {
    let k = samples.len();
    (0..k)
        .map(|m| {
            samples.iter().enumerate().map(|(j, f)| f * (std::f64::consts::PI * m as f64 * (j as f64 + 0.5) / k as f64).cos()).sum::<f64>()
                / k as f64
        })
        .collect()
}

/// Evaluates `s₀ + 2Σ_{m≥1} s_m T_m(t)` (Clenshaw).
pub fn cheb_eval(s: &[f64], t: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in s.iter().skip(1).rev() {
        let b0 = 2.0 * c + 2.0 * t * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    s.first().copied().unwrap_or(0.0) + t * b1 - b2
}

/// Result of the shooting seed for the boundary-value problem.
#[derive(Clone, Debug, PartialEq)]
pub struct BvpSeed {
    pub sigma: f64,
    /// Chebyshev coefficients `s⁽ⁱ⁾_{0..=M}` of the four components.
    pub coeffs: [Vec<f64>; 4],
}

/// Integrates backwards from `W̄(θ, σ)` at `x = L` and returns the states at
/// the requested `x` (descending order) plus the state at `x = 0`.
fn shoot(field: GpField, w: [f64; 4], l: f64, xs: &[f64]) -> Result<(Vec<[f64; 4]>, [f64; 4])> {
    let mut times = xs.to_vec();
    times.push(0.0);
    let traj = integrate_gp(field, w, l, &times, ODE_TOL)?;
    let last = traj.last();
    let states = traj.states[1..=xs.len()].to_vec();
    Ok((states, last))
}

/// Samples the backward trajectory from `W̄(θ, σ₀)` at the Chebyshev nodes
/// of `x = κ(t+1) ∈ [0, L]` and converts them to coefficients.
pub fn bvp_seed(field: GpField, w_at: impl Fn(f64) -> [f64; 4], sigma0: f64, l: f64, m: usize) -> Result<BvpSeed> {
    if !(l > 0.0) || !(sigma0.abs() < 1.0) {
        return Err(Error::Precondition(format!("bvp_seed needs L > 0 and |σ₀| < 1 (L = {l}, σ₀ = {sigma0})")));
    }
    let k = m + 1;
    let kappa = 0.5 * l;
    // Nodes t_j decrease with j, so x_j is visited in descending order.
    let xs: Vec<f64> = cheb_nodes(k).iter().map(|t| kappa * (t + 1.0)).collect();
    let (states, _) = shoot(field, w_at(sigma0), l, &xs)?;
    let coeffs = std::array::from_fn(|i| cheb_interpolate(&states.iter().map(|s| s[i]).collect::<Vec<_>>()));
    Ok(BvpSeed { sigma: sigma0, coeffs })
}

/// `u₂(0)` of the backward trajectory from `W̄(θ, σ)`, or `None` on blow-up.
pub fn shooting_defect(field: GpField, w_at: &impl Fn(f64) -> [f64; 4], sigma: f64, l: f64) -> Option<f64> {
    shoot(field, w_at(sigma), l, &[]).ok().map(|(_, u)| u[1])
}

/// Smallest `σ ∈ (0, σ_max)` with `u₂(0; σ) = 0`, located on a uniform scan
/// of `n_scan` points and refined by bisection.
pub fn find_sigma(field: GpField, w_at: impl Fn(f64) -> [f64; 4], l: f64, sigma_max: f64, n_scan: usize) -> Result<f64> {
    let mut prev: Option<(f64, f64)> = None;
    for i in 1..=n_scan {
        let s = sigma_max * i as f64 / (n_scan + 1) as f64;
        let Some(d) = shooting_defect(field, &w_at, s, l) else {
            prev = None;
            continue;
        };
        if let Some((s0, d0)) = prev {
            if d0 == 0.0 {
                return Ok(s0);
            }
            if d0.signum() != d.signum() {
                let (mut lo, mut hi, mut dlo) = (s0, s, d0);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let dm = shooting_defect(field, &w_at, mid, l)
                        .ok_or_else(|| Error::Integration(format!("blow-up at σ = {mid} inside a bracket")))?;
                    if dm.signum() == dlo.signum() {
                        (lo, dlo) = (mid, dm);
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 4.0 * f64::EPSILON * hi {
                        break;
                    }
                }
                return Ok(0.5 * (lo + hi));
            }
        }
        prev = Some((s, d));
    }
    Err(Error::Precondition(format!("no sign change of u'(0) for σ in (0, {sigma_max})")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_closed_form() {
        let l = monodromy_oracle(-1.0, 0.0).unwrap();
        assert!((l + 1.0).abs() < 1e-10, "{l}");
        assert!(matches!(monodromy_oracle(1.0, 0.0), Err(Error::NoStableExponent(_))));
    }

    #[test]
    fn eig_matches_oracle() {
        let (lam, v1, v2) = floquet_eig(1.1025, 0.55125, 32, 0.5).unwrap();
        let o = monodromy_oracle(1.1025, 0.55125).unwrap();
        assert!((lam - o).abs() < 1e-8, "{lam} vs {o}");
        assert!(lam < 0.0);
        for v in [&v1, &v2] {
            for i in 0..=64 {
                assert_eq!(v[64 - i], v[i].conj());
            }
        }
        let eta: Complex64 = v1.iter().sum();
        assert!((eta.re - 0.5).abs() < 1e-14 && eta.im.abs() < 1e-14);
    }

    #[test]
    fn eig_constant_coefficient_limit() {
        let (lam, _, _) = floquet_eig(-2.0, 0.0, 6, 0.5).unwrap();
        assert!((lam + 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn cheb_interpolation_conventions() {
        let nodes = cheb_nodes(8);
        let s = cheb_interpolate(&nodes);
        assert!(s[0].abs() < 1e-15 && (s[1] - 0.5).abs() < 1e-15);
        assert!(s[2..].iter().all(|c| c.abs() < 1e-15));
        let c = cheb_interpolate(&[3.0; 5]);
        assert!((c[0] - 3.0).abs() < 1e-15 && c[1..].iter().all(|x| x.abs() < 1e-15));
        assert!((cheb_eval(&s, 0.3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn hamiltonian_on_periodic_orbit() {
        let f = GpField { a: 1.0, b: 1.0, c: 1.0 };
        let u0 = [0.0, 0.0, 1.0, 0.0];
        assert_eq!(hamiltonian(&u0), 2.0);
        let tr = integrate_gp(f, u0, 0.0, &[std::f64::consts::PI], ODE_TOL).unwrap();
        assert!((hamiltonian(&tr.last()) - 2.0).abs() < 1e-9);
        assert!((tr.last()[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn backward_integration_inverts_forward() {
        let f = GpField { a: 1.1025, b: 0.55125, c: -0.826875 };
        let u0 = [0.1, -0.2, 0.3, 0.4];
        let fw = integrate_gp(f, u0, 0.0, &[2.0], ODE_TOL).unwrap().last();
        let bw = integrate_gp(f, fw, 2.0, &[0.0], ODE_TOL).unwrap().last();
        for i in 0..4 {
            assert!((bw[i] - u0[i]).abs() < 1e-9);
        }
    }

    struct Scalar;
    impl TruncatedMap for Scalar {
        fn residual(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
            Ok(vec![x[0] * x[0] - 2.0])
        }
        fn solve_linear(&self, x: &[Complex64], r: &[Complex64]) -> Result<Vec<Complex64>> {
            Ok(vec![r[0] / (x[0] * 2.0)])
        }
        fn norm(&self, r: &[Complex64]) -> f64 {
            r[0].norm()
        }
    }

    #[test]
    fn newton_scalar() {
        let (x, rep) = newton_refine(&Scalar, &[Complex64::new(1.0, 0.0)]).unwrap();
        assert!(rep.converged);
        assert!((x[0].re - 2f64.sqrt()).abs() < 1e-15);
        let exact = x.clone();
        let (y, rep) = newton_refine(&Scalar, &exact).unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(y, exact);
    }
}
