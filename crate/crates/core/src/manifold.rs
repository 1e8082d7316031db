//! Riemannian conjugate-gradient refinement on the power sphere
//! `{F : ||F||_F = sqrt(P)}`.
//!
//! The cost trades radar covariance matching against distance from the
//! communications precoder:
//!
//! ```text
//! gamma(F) = rho ||F F^H - R||_F^2 + (1 - rho) ||F - F_hat||_F^2
//! ```
//!
//! Tangent vectors at `F` satisfy `Re tr(F^H X) = 0`. Retraction is radial
//! renormalization, vector transport is re-projection, and directions are
//! combined with the Polak-Ribiere+ rule under Armijo backtracking.

use std::io::Write;

use serde::Serialize;

use crate::config::SystemConfig;
use crate::error::{JcasError, Result};
use crate::linalg::{frobenius_sq, inner, CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereManifold {
    pub rows: usize,
    pub cols: usize,
    pub radius: f64,
}

impl SphereManifold {
    pub fn new(rows: usize, cols: usize, power: f64) -> Self {
        SphereManifold {
            rows,
            cols,
            radius: power.sqrt(),
        }
    }

    pub fn contains(&self, f: &CMat) -> bool {
        f.shape() == (self.rows, self.cols) && (f.norm() - self.radius).abs() <= 1e-9
    }

    /// `Re tr(F^H X)` scaled by the radius: zero for tangent `X`.
    pub fn tangency_residual(&self, f: &CMat, x: &CMat) -> f64 {
        inner(f, x) / self.radius.max(1.0)
    }
}

/// `rho ||F F^H - R||^2 + (1 - rho) ||F - F_hat||^2`.
pub fn objective_gamma(f: &CMat, r: &CMat, f_hat: &CMat, rho: f64) -> f64 {
    let cov = f * f.adjoint() - r;
    rho * frobenius_sq(&cov) + (1.0 - rho) * frobenius_sq(&(f - f_hat))
}

/// `4 rho (F F^H - R) F + 2 (1 - rho) (F - F_hat)`, the gradient with respect
/// to the real inner product `Re tr(X^H Y)`.
pub fn euclidean_gradient(f: &CMat, r: &CMat, f_hat: &CMat, rho: f64) -> CMat {
    let cov = f * f.adjoint() - r;
    (cov * f) * C64::new(4.0 * rho, 0.0) + (f - f_hat) * C64::new(2.0 * (1.0 - rho), 0.0)
}

/// Orthogonal projection of `g` onto the tangent space at `f`:
/// `g - (Re tr(F^H G) / ||F||^2) F`.
pub fn project_to_tangent(f: &CMat, g: &CMat) -> CMat {
    let scale = inner(f, g) / frobenius_sq(f);
    g - f * C64::new(scale, 0.0)
}

/// `sqrt(P) (F + step D) / ||F + step D||`.
pub fn retract(f: &CMat, direction: &CMat, step: f64, radius: f64) -> Result<CMat> {
    let moved = f + direction * C64::new(step, 0.0);
    let norm = moved.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(JcasError::Numeric(format!(
            "retraction of a point with norm {norm}"
        )));
    }
    Ok(moved * C64::new(radius / norm, 0.0))
}

/// Moves a tangent vector to the tangent space at `to` by projection.
pub fn transport(to: &CMat, v: &CMat) -> CMat {
    project_to_tangent(to, v)
}

/// Polak-Ribiere+ coefficient
/// `max(0, <g, g - T(g_prev)> / <g_prev, g_prev>)` with `T` the transport to
/// the tangent space at `at`. Returns 0 when `g_prev` vanishes.
pub fn polak_ribiere_mu(grad_curr: &CMat, grad_prev: &CMat, at: &CMat) -> f64 {
    let denom = frobenius_sq(grad_prev);
    if !(denom > f64::MIN_POSITIVE) {
        return 0.0;
    }
    let moved = transport(at, grad_prev);
    let num = inner(grad_curr, &(grad_curr - moved));
    (num / denom).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoSettings {
    pub initial_step: f64,
    pub contraction: f64,
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
}

impl Default for ArmijoSettings {
    fn default() -> Self {
        ArmijoSettings {
            initial_step: 1.0,
            contraction: 0.5,
            sufficient_decrease: 1e-4,
            max_backtracks: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoOutcome {
    pub step: f64,
    pub value: f64,
    pub backtracks: usize,
    /// False when the backtrack limit was hit; `step` is then the smallest
    /// step tried.
    pub satisfied: bool,
}

/// Backtracking until `value(step) <= f0 + c * step * slope`.
pub fn armijo_backtrack(
    f0: f64,
    slope: f64,
    settings: &ArmijoSettings,
    mut value: impl FnMut(f64) -> f64,
) -> ArmijoOutcome {
    let mut step = settings.initial_step;
    let mut v = value(step);
    for backtracks in 0..=settings.max_backtracks {
        if v <= f0 + settings.sufficient_decrease * step * slope {
            return ArmijoOutcome {
                step,
                value: v,
                backtracks,
                satisfied: true,
            };
        }
        if backtracks == settings.max_backtracks {
            break;
        }
        step *= settings.contraction;
        v = value(step);
    }
    tracing::debug!(step, "Armijo backtracking limit reached");
    ArmijoOutcome {
        step,
        value: v,
        backtracks: settings.max_backtracks,
        satisfied: false,
    }
}

/// Armijo step along a tangent `direction` at `f` with slope `<grad, direction>`.
pub fn armijo_step(
    f: &CMat,
    direction: &CMat,
    grad: &CMat,
    f0: f64,
    radius: f64,
    settings: &ArmijoSettings,
    objective: impl Fn(&CMat) -> f64,
) -> ArmijoOutcome {
    let slope = inner(grad, direction);
    armijo_backtrack(f0, slope, settings, |step| {
        retract(f, direction, step, radius)
            .map(|x| objective(&x))
            .unwrap_or(f64::INFINITY)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcgSettings {
    pub max_iterations: usize,
    /// Stop when `||grad||_F <= grad_tolerance * sqrt(P)`.
    pub grad_tolerance: f64,
    /// Stop when `|delta gamma|` stays at or below this for `stall_window`
    /// consecutive iterations.
    pub stall_tolerance: f64,
    pub stall_window: usize,
    pub armijo: ArmijoSettings,
}

impl Default for RcgSettings {
    fn default() -> Self {
        RcgSettings {
            max_iterations: 500,
            grad_tolerance: 1e-6,
            stall_tolerance: 1e-10,
            stall_window: 3,
            armijo: ArmijoSettings::default(),
        }
    }
}

impl RcgSettings {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        RcgSettings {
            max_iterations: cfg.solver.rcg_max_iterations,
            grad_tolerance: cfg.solver.rcg_grad_tolerance,
            ..RcgSettings::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RcgExit {
    GradientTolerance,
    SmallProgress,
    /// No step satisfied the Armijo condition, even along `-grad`.
    LineSearchFailed,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RcgIterate {
    pub iteration: usize,
    pub gamma: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RcgTrace {
    pub iterates: Vec<RcgIterate>,
    pub exit: RcgExit,
}

impl RcgTrace {
    pub fn final_gamma(&self) -> f64 {
        self.iterates.last().map(|i| i.gamma).unwrap_or(f64::NAN)
    }

    pub fn iterations(&self) -> usize {
        self.iterates.last().map(|i| i.iteration).unwrap_or(0)
    }

    /// Delimited dump: `iteration,gamma,grad_norm,step,mu`.
    pub fn write_delimited<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,gamma,grad_norm,step,mu")?;
        for it in &self.iterates {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e}",
                it.iteration, it.gamma, it.grad_norm, it.step, it.mu
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RcgOutcome {
    pub precoder: CMat,
    pub trace: RcgTrace,
}

/// Minimizes `gamma` over the sphere of squared radius `power`, starting
/// from `f_init` (which must lie on it).
pub fn solve_rcg(
    f_init: &CMat,
    r: &CMat,
    f_hat: &CMat,
    rho: f64,
    power: f64,
    settings: &RcgSettings,
) -> Result<RcgOutcome> {
    let radius = power.sqrt();
    if ((f_init.norm() - radius) / radius.max(1.0)).abs() > 1e-9 {
        return Err(JcasError::Input(format!(
            "initial precoder norm {} is off the sphere of radius {radius}",
            f_init.norm()
        )));
    }
    if r.shape() != (f_init.nrows(), f_init.nrows()) || f_hat.shape() != f_init.shape() {
        return Err(JcasError::Input("RCG operand shapes disagree".into()));
    }
    let cost = |x: &CMat| objective_gamma(x, r, f_hat, rho);
    let rgrad = |x: &CMat| project_to_tangent(x, &euclidean_gradient(x, r, f_hat, rho));

    let grad_stop = settings.grad_tolerance * radius;
    let mut f = f_init.clone();
    let mut gamma = cost(&f);
    let mut grad = rgrad(&f);
    let mut dir = -grad.clone();
    let mut iterates = vec![RcgIterate {
        iteration: 0,
        gamma,
        grad_norm: grad.norm(),
        step: 0.0,
        mu: 0.0,
    }];
    let mut stalled_for = 0;

    for iteration in 1..=settings.max_iterations {
        if grad.norm() <= grad_stop {
            return Ok(finish(f, iterates, RcgExit::GradientTolerance));
        }
        if inner(&grad, &dir) >= 0.0 {
            dir = -grad.clone();
        }
        let mut ls = armijo_step(&f, &dir, &grad, gamma, radius, &settings.armijo, cost);
        if !ls.satisfied {
            let steepest = -grad.clone();
            if dir != steepest {
                dir = steepest;
                ls = armijo_step(&f, &dir, &grad, gamma, radius, &settings.armijo, cost);
            }
            if !ls.satisfied {
                return Ok(finish(f, iterates, RcgExit::LineSearchFailed));
            }
        }

        let f_next = retract(&f, &dir, ls.step, radius)?;
        let gamma_next = ls.value;
        let grad_next = rgrad(&f_next);
        let mu = polak_ribiere_mu(&grad_next, &grad, &f_next);
        let dir_next = -&grad_next + transport(&f_next, &dir) * C64::new(mu, 0.0);

        iterates.push(RcgIterate {
            iteration,
            gamma: gamma_next,
            grad_norm: grad_next.norm(),
            step: ls.step,
            mu,
        });

        if (gamma - gamma_next).abs() <= settings.stall_tolerance {
            stalled_for += 1;
        } else {
            stalled_for = 0;
        }
        f = f_next;
        gamma = gamma_next;
        grad = grad_next;
        dir = dir_next;
        if stalled_for >= settings.stall_window {
            return Ok(finish(f, iterates, RcgExit::SmallProgress));
        }
    }
    let exit = if grad.norm() <= grad_stop {
        RcgExit::GradientTolerance
    } else {
        RcgExit::MaxIterations
    };
    Ok(finish(f, iterates, exit))
}

fn finish(precoder: CMat, iterates: Vec<RcgIterate>, exit: RcgExit) -> RcgOutcome {
    RcgOutcome {
        precoder,
        trace: RcgTrace { iterates, exit },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn gamma_scalar_cases() {
        let one = CMat::from_element(1, 1, c(1.0));
        let zero = CMat::zeros(1, 1);
        assert_abs_diff_eq!(objective_gamma(&one, &zero, &zero, 0.5), 1.0, epsilon = 1e-15);
        assert_eq!(objective_gamma(&one, &zero, &one, 0.0), 0.0);
        let ffh = &one * one.adjoint();
        assert_eq!(objective_gamma(&one, &ffh, &zero, 1.0), 0.0);
    }

    #[test]
    fn gradient_scalar_case() {
        let one = CMat::from_element(1, 1, c(1.0));
        let zero = CMat::zeros(1, 1);
        let g = euclidean_gradient(&one, &zero, &zero, 0.5);
        assert_abs_diff_eq!(g[(0, 0)].re, 3.0, epsilon = 1e-15);
        let r = &one * one.adjoint();
        assert_eq!(euclidean_gradient(&one, &r, &one, 0.3).norm(), 0.0);
    }

    #[test]
    fn projection_cases() {
        let f = CMat::from_column_slice(2, 1, &[c(1.0), c(0.0)]);
        assert_abs_diff_eq!(project_to_tangent(&f, &f).norm(), 0.0, epsilon = 1e-15);
        let t = CMat::from_column_slice(2, 1, &[C64::new(0.0, 3.0), c(2.0)]);
        assert_eq!(project_to_tangent(&f, &t), t);
    }

    #[test]
    fn retraction_cases() {
        let f = CMat::from_column_slice(2, 1, &[c(1.0), c(0.0)]);
        let d = CMat::from_column_slice(2, 1, &[c(0.0), c(1.0)]);
        let x = retract(&f, &d, 1.0, 1.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(x[(0, 0)].re, s, epsilon = 1e-15);
        assert_abs_diff_eq!(x[(1, 0)].re, s, epsilon = 1e-15);
        assert_eq!(retract(&f, &d, 0.0, 1.0).unwrap(), f);
        assert!(retract(&f, &(-&f), 1.0, 1.0).is_err());
    }

    #[test]
    fn transport_cases() {
        let f = CMat::from_column_slice(2, 1, &[c(1.0), c(0.0)]);
        let v = CMat::from_column_slice(2, 1, &[C64::new(0.0, 1.0), c(1.0)]);
        assert_eq!(transport(&f, &v), v);
        assert_abs_diff_eq!(transport(&f, &(&f * c(2.0))).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn pr_plus_cases() {
        let f = CMat::from_column_slice(3, 1, &[c(1.0), c(0.0), c(0.0)]);
        let g = CMat::from_column_slice(3, 1, &[c(0.0), c(2.0), c(0.0)]);
        assert_eq!(polak_ribiere_mu(&g, &g, &f), 0.0);
        let gp = CMat::from_column_slice(3, 1, &[c(0.0), c(0.0), c(1.0)]);
        assert_abs_diff_eq!(polak_ribiere_mu(&g, &gp, &f), 4.0, epsilon = 1e-15);
        // negative PR value is clamped
        let gneg = CMat::from_column_slice(3, 1, &[c(0.0), c(1.0), c(0.0)]);
        assert_eq!(polak_ribiere_mu(&gneg, &(&gneg * c(3.0)), &f), 0.0);
        assert_eq!(polak_ribiere_mu(&g, &CMat::zeros(3, 1), &f), 0.0);
    }

    #[test]
    fn armijo_on_scalar_quadratic() {
        // gamma(x) = x^2 at x = 1 along d = -2: step 1 overshoots to x = -1,
        // step 0.5 lands on x = 0.
        let out = armijo_backtrack(1.0, -4.0, &ArmijoSettings::default(), |s| {
            let x = 1.0 - 2.0 * s;
            x * x
        });
        assert!(out.satisfied);
        assert_eq!(out.step, 0.5);
        assert_eq!(out.value, 0.0);
        assert_eq!(out.backtracks, 1);
    }

    #[test]
    fn armijo_limit_returns_smallest_step() {
        let st = ArmijoSettings {
            max_backtracks: 3,
            ..ArmijoSettings::default()
        };
        let out = armijo_backtrack(0.0, -1.0, &st, |_| 1.0);
        assert!(!out.satisfied);
        assert_eq!(out.step, 0.125);
        assert!(out.step > 0.0 && out.step <= st.initial_step);
    }

    #[test]
    fn stationary_start_exits_immediately() {
        let f = CMat::from_column_slice(2, 1, &[c(0.6), C64::new(0.0, 0.8)]);
        let r = &f * f.adjoint();
        let out = solve_rcg(&f, &r, &f, 1.0, 1.0, &RcgSettings::default()).unwrap();
        assert_eq!(out.trace.exit, RcgExit::GradientTolerance);
        assert_eq!(out.trace.iterations(), 0);
        assert_eq!(out.precoder, f);
        assert!(out.trace.final_gamma().abs() < 1e-30);
    }

    #[test]
    fn off_sphere_start_rejected() {
        let f = CMat::from_element(2, 1, c(1.0));
        let r = CMat::zeros(2, 2);
        assert!(solve_rcg(&f, &r, &f, 0.5, 1.0, &RcgSettings::default()).is_err());
    }

    #[test]
    fn trace_dump_has_header() {
        let trace = RcgTrace {
            iterates: vec![RcgIterate { iteration: 0, gamma: 1.0, grad_norm: 2.0, step: 0.0, mu: 0.0 }],
            exit: RcgExit::MaxIterations,
        };
        let mut buf = Vec::new();
        trace.write_delimited(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iteration,gamma,grad_norm,step,mu\n0,"));
    }
}
