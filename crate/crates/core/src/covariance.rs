//! Radar covariance synthesis.
//!
//! For each JCAS subcarrier the covariance `R` minimizes the l1 beampattern
//! mismatch `sum_t |P_d(theta_t) - a_t^H R a_t|` subject to a fixed diagonal
//! `P / N_t` and `R >= 0`. `R` is parametrized by its strictly upper
//! off-diagonal entries, so the diagonal constraint holds exactly and the
//! pattern is affine in the parameters.
//!
//! Two solvers share that parametrization. The default is a log-barrier
//! interior-point method on
//!
//! ```text
//! minimize  sum_t s_t
//! s.t.      -s <= g(p) - P_d <= s,   R(p) > 0
//! ```
//!
//! with Newton steps on the parameters after eliminating `s`; it stops on a
//! duality-gap bound. The alternative is a scaled-form ADMM on the splitting
//!
//! ```text
//! minimize  ||r||_1 + I_psd(Z)
//! s.t.      g(X) - P_d = r,   X = Z
//! ```
//!
//! which returns the best feasible point seen: each `Z` iterate is pulled onto
//! the diagonal constraint by a diagonal congruence, which preserves positive
//! semidefiniteness.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::Serialize;

use crate::array::BeamGrid;
use crate::columnar;
use crate::config::{CovarianceMethod, SystemConfig};
use crate::error::{JcasError, Result};
use crate::linalg::{hermitian_eigen, hermitian_part, hpd_cholesky, CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceSettings {
    pub method: CovarianceMethod,
    /// Newton steps (barrier) or iterations (ADMM).
    pub max_iterations: usize,
    /// Stopping tolerance relative to the design power.
    pub tolerance: f64,
    /// ADMM: starting penalty of the PSD split.
    pub initial_penalty: f64,
    /// ADMM: rebalance the penalty when one residual exceeds the other by this factor.
    pub balance_ratio: f64,
    pub balance_factor: f64,
    /// ADMM: ratio of the pattern penalty to the PSD-split penalty.
    pub pattern_weight: f64,
    /// ADMM: over-relaxation factor in (0, 2).
    pub relaxation: f64,
    pub record_trace: bool,
}

impl Default for CovarianceSettings {
    fn default() -> Self {
        CovarianceSettings {
            method: CovarianceMethod::Barrier,
            max_iterations: 500,
            tolerance: 1e-6,
            initial_penalty: 1.0,
            balance_ratio: 10.0,
            balance_factor: 2.0,
            pattern_weight: 1e-3,
            relaxation: 1.6,
            record_trace: false,
        }
    }
}

impl CovarianceSettings {
    pub fn admm() -> Self {
        CovarianceSettings {
            method: CovarianceMethod::Admm,
            max_iterations: 5000,
            ..CovarianceSettings::default()
        }
    }

    pub fn from_config(cfg: &SystemConfig) -> Self {
        let s = &cfg.solver;
        let max_iterations = match s.covariance_method {
            CovarianceMethod::Barrier => s.barrier_max_iterations,
            CovarianceMethod::Admm => s.admm_max_iterations,
        };
        CovarianceSettings {
            method: s.covariance_method,
            max_iterations,
            tolerance: s.covariance_tolerance,
            ..CovarianceSettings::default()
        }
    }
}

/// One solver iteration, in normalized (unit power) units.
///
/// For ADMM the residuals are the primal and dual residuals and `penalty` is
/// the PSD-split penalty. For the barrier method `primal_residual` is half the
/// squared Newton decrement, `dual_residual` the duality-gap bound and
/// `penalty` the barrier weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverIterate {
    pub iteration: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub penalty: f64,
    /// Best feasible objective so far; non-increasing.
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct CovarianceSolution {
    pub matrix: CMat,
    /// `sum_t |P_d - a_t^H R a_t|` at `matrix`, in absolute units.
    pub objective: f64,
    pub iterations: usize,
    pub trace: Vec<SolverIterate>,
}

/// Radar covariances for the JCAS subcarriers, keyed by 0-based subcarrier.
#[derive(Debug, Clone, Default)]
pub struct CovarianceSet {
    pub entries: BTreeMap<usize, CovarianceSolution>,
}

impl CovarianceSet {
    pub fn get(&self, k: usize) -> Option<&CMat> {
        self.entries.get(&k).map(|s| &s.matrix)
    }

    pub fn objectives(&self) -> BTreeMap<usize, f64> {
        self.entries.iter().map(|(&k, s)| (k, s.objective)).collect()
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        columnar::write_matrices_to_path(
            path,
            None,
            self.entries.iter().map(|(&k, s)| (k, &s.matrix)),
        )
    }

    /// Restrict to `indices`; every index must be present.
    pub fn subset(&self, indices: &[usize]) -> Result<CovarianceSet> {
        let mut entries = BTreeMap::new();
        for &k in indices {
            let s = self.entries.get(&k).ok_or_else(|| {
                JcasError::Input(format!("no radar covariance for subcarrier {k}"))
            })?;
            entries.insert(k, s.clone());
        }
        Ok(CovarianceSet { entries })
    }
}

/// Frobenius-nearest positive semidefinite matrix (eigenvalues clipped at 0).
pub fn psd_project(m: &CMat) -> CMat {
    let (vals, vecs) = hermitian_eigen(&hermitian_part(m));
    let mut scaled = vecs.clone();
    for (mut col, &lambda) in scaled.column_iter_mut().zip(&vals) {
        col *= C64::new(lambda.max(0.0), 0.0);
    }
    hermitian_part(&(scaled * vecs.adjoint()))
}

/// Overwrite the diagonal with `d`, keeping off-diagonal entries.
pub fn diag_project(m: &CMat, d: f64) -> CMat {
    let mut out = m.clone();
    for i in 0..out.nrows().min(out.ncols()) {
        out[(i, i)] = C64::new(d, 0.0);
    }
    out
}

/// Desired gains for subcarrier `k`: the unit-height mask scaled to the
/// design power.
pub fn scaled_mask(grid: &BeamGrid, k: usize, power: f64) -> Vec<f64> {
    grid.desired_gain.column(k).iter().map(|g| g * power).collect()
}

/// Solves the covariance problem for subcarrier `k` of `grid` at the
/// configured design power.
pub fn solve_radar_covariance(
    grid: &BeamGrid,
    cfg: &SystemConfig,
    k: usize,
) -> Result<CovarianceSolution> {
    if k >= grid.n_subcarriers() {
        return Err(JcasError::Input(format!(
            "subcarrier {k} outside grid of {}",
            grid.n_subcarriers()
        )));
    }
    solve_pattern_match(
        &grid.steering[k],
        &scaled_mask(grid, k, cfg.design_power()),
        cfg.design_power(),
        &CovarianceSettings::from_config(cfg),
    )
    .map_err(|e| e.at_subcarrier(k))
}

/// Solves for every subcarrier in `indices`, in parallel.
pub fn solve_covariance_set(
    grid: &BeamGrid,
    cfg: &SystemConfig,
    indices: &[usize],
    record_trace: bool,
) -> Result<CovarianceSet> {
    let settings = CovarianceSettings {
        record_trace,
        ..CovarianceSettings::from_config(cfg)
    };
    let solved = indices
        .par_iter()
        .map(|&k| {
            if k >= grid.n_subcarriers() {
                return Err(JcasError::Input(format!("subcarrier {k} outside grid")));
            }
            solve_pattern_match(
                &grid.steering[k],
                &scaled_mask(grid, k, cfg.design_power()),
                cfg.design_power(),
                &settings,
            )
            .map(|s| (k, s))
            .map_err(|e| e.at_subcarrier(k))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CovarianceSet {
        entries: solved.into_iter().collect(),
    })
}

/// Core solver. `steering` is `n_tx x T`, `desired` has length `T`, and the
/// result has diagonal `power / n_tx`.
///
/// The problem is solved at unit power on `desired / power` and rescaled, so
/// scaling `power` and `desired` together scales the result exactly.
pub fn solve_pattern_match(
    steering: &CMat,
    desired: &[f64],
    power: f64,
    settings: &CovarianceSettings,
) -> Result<CovarianceSolution> {
    let n_tx = steering.nrows();
    let n_angles = steering.ncols();
    if desired.len() != n_angles {
        return Err(JcasError::Input(format!(
            "{} desired gains for {n_angles} grid angles",
            desired.len()
        )));
    }
    if !(power.is_finite() && power > 0.0) {
        return Err(JcasError::Input(format!("power {power} must be > 0")));
    }
    let target: Vec<f64> = desired.iter().map(|&g| g / power).collect();
    let d = 1.0 / n_tx as f64;
    let pattern = PatternMap::new(steering, d);

    let solved = if n_tx == 1 {
        // The diagonal constraint pins the only entry.
        Ok(Normalized {
            matrix: CMat::from_element(1, 1, C64::new(1.0, 0.0)),
            objective: pattern.l1_mismatch(&DVector::zeros(0), &target),
            iterations: 0,
            trace: Vec::new(),
        })
    } else {
        match settings.method {
            CovarianceMethod::Barrier => barrier(&pattern, &target, n_tx, d, settings),
            CovarianceMethod::Admm => admm(&pattern, &target, n_tx, d, settings),
        }
    };
    match solved {
        Ok(n) => Ok(CovarianceSolution {
            matrix: n.matrix * C64::new(power, 0.0),
            objective: n.objective * power,
            iterations: n.iterations,
            trace: n.trace,
        }),
        Err(JcasError::NotConverged {
            iterations,
            primal_residual,
            dual_residual,
            last_iterate,
        }) => Err(JcasError::NotConverged {
            iterations,
            primal_residual,
            dual_residual,
            last_iterate: Box::new(*last_iterate * C64::new(power, 0.0)),
        }),
        Err(e) => Err(e),
    }
}

/// Unit-power solution.
struct Normalized {
    matrix: CMat,
    objective: f64,
    iterations: usize,
    trace: Vec<SolverIterate>,
}

/// Centering stops once half the squared Newton decrement falls below this.
const CENTERED: f64 = 1e-6;
/// Barrier weight multiplier between centering stages.
const BARRIER_GROWTH: f64 = 20.0;

/// Barrier state at one point: the value, the Newton direction and the
/// decrement.
struct NewtonStep {
    dp: DVector<f64>,
    ds: DVector<f64>,
    decrement: f64,
}

fn barrier(
    pattern: &PatternMap,
    target: &[f64],
    n_tx: usize,
    d: f64,
    settings: &CovarianceSettings,
) -> Result<Normalized> {
    let m = &pattern.jacobian;
    let n_params = m.ncols();
    let n_angles = m.nrows();
    // e(p) = M p - c is the signed pattern error.
    let c = DVector::from_iterator(
        n_angles,
        target.iter().zip(&pattern.base_per_angle).map(|(b, g0)| b - g0),
    );
    let n_barrier = (2 * n_angles + n_tx) as f64;

    let mut p = DVector::<f64>::zeros(n_params);
    let mut s = (m * &p - &c).map(|e| e.abs() + 1.0);
    let obj0 = pattern.l1_mismatch(&p, target);
    let mut t = n_barrier / obj0.max(1e-12);

    let mut best_obj = obj0;
    let mut best = p.clone();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut decrement = f64::INFINITY;

    loop {
        // Centering.
        loop {
            if iterations >= settings.max_iterations {
                return Err(JcasError::NotConverged {
                    iterations,
                    primal_residual: decrement,
                    dual_residual: n_barrier / t,
                    last_iterate: Box::new(hermitian_from_params(&best, n_tx, d)),
                });
            }
            let step = newton_step(m, &c, &p, &s, t, n_tx, d)?;
            decrement = step.decrement;
            if decrement <= CENTERED {
                break;
            }
            iterations += 1;
            let f0 = barrier_value(m, &c, &p, &s, t, n_tx, d).unwrap_or(f64::INFINITY);
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let p_new = &p + &step.dp * alpha;
                let s_new = &s + &step.ds * alpha;
                if let Some(f) = barrier_value(m, &c, &p_new, &s_new, t, n_tx, d) {
                    if f <= f0 - 0.25 * alpha * 2.0 * decrement {
                        p = p_new;
                        s = s_new;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            let obj = pattern.l1_mismatch(&p, target);
            if obj < best_obj {
                best_obj = obj;
                best = p.clone();
            }
            if settings.record_trace {
                trace.push(SolverIterate {
                    iteration: iterations,
                    primal_residual: decrement,
                    dual_residual: n_barrier / t,
                    penalty: t,
                    objective: best_obj,
                });
            }
            if !accepted || alpha < 1e-3 {
                // Stalled in rounding noise; as centered as it gets.
                break;
            }
        }
        if n_barrier / t <= settings.tolerance * (1.0 + 1e-12) {
            break;
        }
        t = (t * BARRIER_GROWTH).min(n_barrier / settings.tolerance);
    }

    Ok(Normalized {
        matrix: hermitian_from_params(&best, n_tx, d),
        objective: best_obj,
        iterations,
        trace,
    })
}

/// `t sum s - sum log(s - e) - sum log(s + e) - log det R(p)`, or `None`
/// outside the domain.
fn barrier_value(
    m: &DMatrix<f64>,
    c: &DVector<f64>,
    p: &DVector<f64>,
    s: &DVector<f64>,
    t: f64,
    n_tx: usize,
    d: f64,
) -> Option<f64> {
    let e = m * p - c;
    let mut f = t * s.sum();
    for (&si, &ei) in s.iter().zip(e.iter()) {
        let (lo, hi) = (si - ei, si + ei);
        if lo <= 0.0 || hi <= 0.0 {
            return None;
        }
        f -= lo.ln() + hi.ln();
    }
    let chol = hpd_cholesky(&hermitian_from_params(p, n_tx, d))?;
    let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|z| z.re.ln()).sum::<f64>();
    if !logdet.is_finite() {
        return None;
    }
    Some(f - logdet)
}

fn newton_step(
    m: &DMatrix<f64>,
    c: &DVector<f64>,
    p: &DVector<f64>,
    s: &DVector<f64>,
    t: f64,
    n_tx: usize,
    d: f64,
) -> Result<NewtonStep> {
    let e = m * p - c;
    let a = DVector::from_iterator(e.len(), s.iter().zip(e.iter()).map(|(s, e)| 1.0 / (s - e)));
    let b = DVector::from_iterator(e.len(), s.iter().zip(e.iter()).map(|(s, e)| 1.0 / (s + e)));
    let g_s = a.zip_map(&b, |a, b| t - a - b);
    let g_e = &a - &b;
    let d1 = a.zip_map(&b, |a, b| a * a + b * b);
    let d2 = a.zip_map(&b, |a, b| b * b - a * a);
    // Schur complement weight d1 - d2^2 / d1, in a cancellation-free form.
    let w = a.zip_map(&b, |a, b| 4.0 * a * a * b * b / (a * a + b * b));

    let y = hpd_cholesky(&hermitian_from_params(p, n_tx, d))
        .ok_or_else(|| JcasError::Numeric("barrier iterate left the PSD cone".into()))?
        .inverse();
    let g_p = m.transpose() * &g_e - upper_params(&y) * 2.0;

    // Hessian of -log det R(p): column k is 2 q(Y E_k Y).
    let n_params = p.len();
    let mut h = DMatrix::<f64>::zeros(n_params, n_params);
    let mut col = 0;
    for i in 0..n_tx {
        for j in (i + 1)..n_tx {
            let yi = y.column(i);
            let yj = y.column(j);
            let outer = yi * yj.adjoint();
            let re = &outer + outer.adjoint();
            let im = (&outer - outer.adjoint()) * C64::new(0.0, 1.0);
            h.set_column(col, &(upper_params(&re) * 2.0));
            h.set_column(col + 1, &(upper_params(&im) * 2.0));
            col += 2;
        }
    }
    let mut mw = m.clone();
    for (mut row, &wi) in mw.row_iter_mut().zip(w.iter()) {
        row *= wi;
    }
    h += m.transpose() * mw;
    let rhs = -&g_p + m.transpose() * g_s.zip_map(&d2.component_div(&d1), |g, r| g * r);
    let chol = ridged_cholesky(h)
        .ok_or_else(|| JcasError::Numeric("barrier Hessian is not positive definite".into()))?;
    let dp = chol.solve(&rhs);
    let mdp = m * &dp;
    let ds = DVector::from_iterator(
        s.len(),
        (0..s.len()).map(|i| -(g_s[i] + d2[i] * mdp[i]) / d1[i]),
    );
    let decrement = -(g_p.dot(&dp) + g_s.dot(&ds)) / 2.0;
    Ok(NewtonStep { dp, ds, decrement })
}

/// Cholesky of a symmetric positive (semi)definite matrix, adding a growing
/// relative ridge when rounding has cost it definiteness.
fn ridged_cholesky(h: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let scale = h.diagonal().amax().max(f64::MIN_POSITIVE);
    let n = h.nrows();
    let mut ridge = 0.0;
    for _ in 0..8 {
        if let Some(c) = Cholesky::new(&h + DMatrix::<f64>::identity(n, n) * ridge) {
            return Some(c);
        }
        ridge = if ridge == 0.0 { 1e-14 * scale } else { ridge * 100.0 };
    }
    None
}

fn admm(
    pattern: &PatternMap,
    target: &[f64],
    n_tx: usize,
    d: f64,
    settings: &CovarianceSettings,
) -> Result<Normalized> {
    let m = &pattern.jacobian;
    let n_angles = m.nrows();
    let mtm = m.transpose() * m;
    let b = DVector::from_column_slice(target);
    let g0 = DVector::from_column_slice(&pattern.base_per_angle);
    let alpha = settings.relaxation;

    // Penalties of the pattern split (r) and the PSD split (Z) move together.
    let mut rho_p = settings.initial_penalty * settings.pattern_weight;
    let mut rho_s = settings.initial_penalty;
    let mut chol = admm_factor(&mtm, rho_p, rho_s)?;

    let mut z = CMat::identity(n_tx, n_tx) * C64::new(d, 0.0);
    let mut r = &g0 - &b;
    let mut u = DVector::<f64>::zeros(n_angles);
    let mut big_u = CMat::zeros(n_tx, n_tx);

    let mut best = repair(&z, d);
    let mut best_obj = pattern.l1_mismatch(&upper_params(&best), target);
    let mut trace = Vec::new();
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);

    for it in 1..=settings.max_iterations {
        // X-update: (rho_p M^T M + 2 rho_s I) p = rho_p M^T (b + r - g0 - u) + 2 rho_s q(Z - U)
        let rhs = m.transpose() * (&b + &r - &g0 - &u) * rho_p
            + upper_params(&(&z - &big_u)) * (2.0 * rho_s);
        let params = chol.solve(&rhs);
        let x = hermitian_from_params(&params, n_tx, d);
        let mp = m * &params;

        let r_old = r.clone();
        let z_old = z.clone();
        let hat = (&g0 + &mp - &b) * alpha + &r_old * (1.0 - alpha);
        let x_hat = &x * C64::new(alpha, 0.0) + &z_old * C64::new(1.0 - alpha, 0.0);

        // r-update: soft threshold at 1 / rho_p.
        let thresh = 1.0 / rho_p;
        r = (&hat + &u).map(|v| v.signum() * (v.abs() - thresh).max(0.0));
        z = psd_project(&(&x_hat + &big_u));
        u += &hat - &r;
        big_u += &x_hat - &z;

        let primal_p = (&g0 + &mp - &b - &r).norm();
        let primal_s = frob_sq(&(&x - &z)).sqrt();
        let dual_vec = m.transpose() * (&r - &r_old) * rho_p
            + upper_params(&(&z - &z_old)) * (2.0 * rho_s);
        primal = primal_p.hypot(primal_s);
        dual = dual_vec.norm();

        let cand = repair(&z, d);
        let cand_obj = pattern.l1_mismatch(&upper_params(&cand), target);
        if cand_obj < best_obj {
            best_obj = cand_obj;
            best = cand;
        }
        if settings.record_trace {
            trace.push(SolverIterate {
                iteration: it,
                primal_residual: primal,
                dual_residual: dual,
                penalty: rho_s,
                objective: best_obj,
            });
        }

        if primal < settings.tolerance && dual < settings.tolerance {
            return Ok(Normalized {
                matrix: best,
                objective: best_obj,
                iterations: it,
                trace,
            });
        }

        let factor = if primal > settings.balance_ratio * dual {
            settings.balance_factor
        } else if dual > settings.balance_ratio * primal {
            1.0 / settings.balance_factor
        } else {
            continue;
        };
        rho_p *= factor;
        rho_s *= factor;
        u /= factor;
        big_u /= C64::new(factor, 0.0);
        chol = admm_factor(&mtm, rho_p, rho_s)?;
    }

    Err(JcasError::NotConverged {
        iterations: settings.max_iterations,
        primal_residual: primal,
        dual_residual: dual,
        last_iterate: Box::new(best),
    })
}

fn admm_factor(mtm: &DMatrix<f64>, rho_p: f64, rho_s: f64) -> Result<Cholesky<f64, Dyn>> {
    let n = mtm.nrows();
    Cholesky::new(mtm * rho_p + DMatrix::<f64>::identity(n, n) * (2.0 * rho_s))
        .ok_or_else(|| JcasError::Numeric("normal matrix is not positive definite".into()))
}

fn frob_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Linear map from off-diagonal parameters to grid pattern values:
/// `a_t^H X a_t = base_t + (M p)_t`.
struct PatternMap {
    /// `T x N_t(N_t - 1)`; columns alternate real and imaginary parts of the
    /// upper-triangular entries in row-major pair order.
    jacobian: DMatrix<f64>,
    /// Diagonal contribution `d * ||a_t||^2`.
    base_per_angle: Vec<f64>,
}

impl PatternMap {
    fn new(steering: &CMat, d: f64) -> Self {
        let n_tx = steering.nrows();
        let n_angles = steering.ncols();
        let n_params = n_tx * (n_tx - 1);
        let mut jacobian = DMatrix::<f64>::zeros(n_angles, n_params);
        let mut base_per_angle = Vec::with_capacity(n_angles);
        for t in 0..n_angles {
            let a = steering.column(t);
            base_per_angle.push(d * a.iter().map(|z| z.norm_sqr()).sum::<f64>());
            let mut col = 0;
            for n in 0..n_tx {
                for m in (n + 1)..n_tx {
                    // 2 Re((x + j y) conj(a_n) a_m)
                    let w = a[n].conj() * a[m];
                    jacobian[(t, col)] = 2.0 * w.re;
                    jacobian[(t, col + 1)] = -2.0 * w.im;
                    col += 2;
                }
            }
        }
        PatternMap {
            jacobian,
            base_per_angle,
        }
    }

    fn l1_mismatch(&self, params: &DVector<f64>, target: &[f64]) -> f64 {
        let offdiag = if params.is_empty() {
            DVector::zeros(target.len())
        } else {
            &self.jacobian * params
        };
        target
            .iter()
            .zip(&self.base_per_angle)
            .zip(offdiag.iter())
            .map(|((&b, &g0), &g)| (b - g0 - g).abs())
            .sum()
    }
}

/// Strictly upper off-diagonal entries as interleaved (re, im) pairs.
fn upper_params(m: &CMat) -> DVector<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1));
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(m[(i, j)].re);
            out.push(m[(i, j)].im);
        }
    }
    DVector::from_vec(out)
}

fn hermitian_from_params(p: &DVector<f64>, n: usize, d: f64) -> CMat {
    let mut x = CMat::identity(n, n) * C64::new(d, 0.0);
    let mut col = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let z = C64::new(p[col], p[col + 1]);
            x[(i, j)] = z;
            x[(j, i)] = z.conj();
            col += 2;
        }
    }
    x
}

/// Maps a PSD matrix onto `{diag = d}` by the congruence `S Z S`,
/// `S = diag(sqrt(d / Z_nn))`. A tiny ridge keeps the diagonal positive.
fn repair(z: &CMat, d: f64) -> CMat {
    let n = z.nrows();
    let ridge = 1e-14 * d;
    let s: Vec<f64> = (0..n).map(|i| (d / (z[(i, i)].re + ridge)).sqrt()).collect();
    let mut out = CMat::zeros(n, n);
    for i in 0..n {
        out[(i, i)] = C64::new(d, 0.0);
        for j in (i + 1)..n {
            let v = z[(i, j)] * (s[i] * s[j]);
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    out
}
