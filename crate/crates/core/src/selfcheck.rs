//! Fast invariant suite behind `jcas selfcheck`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::array::BeamGrid;
use crate::config::SystemConfig;
use crate::covariance::solve_radar_covariance;
use crate::linalg::{inner, min_hermitian_eigenvalue, CMat, C64};
use crate::manifold::{
    euclidean_gradient, objective_gamma, project_to_tangent, retract, solve_rcg, RcgSettings,
};
use crate::precoding::waterfill;

pub type GradientFn = fn(&CMat, &CMat, &CMat, f64) -> CMat;

/// Replaceable pieces, so the suite itself can be tested against faults.
#[derive(Clone, Copy)]
pub struct Hooks {
    pub gradient: GradientFn,
}

impl Default for Hooks {
    fn default() -> Self {
        Hooks {
            gradient: euclidean_gradient,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl std::fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {:<28} worst={:.3e} threshold={:.1e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.threshold
        )
    }
}

pub fn random_complex(rng: &mut impl Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

pub fn random_on_sphere(rng: &mut impl Rng, rows: usize, cols: usize, power: f64) -> CMat {
    let m = random_complex(rng, rows, cols);
    let n = m.norm();
    m * C64::new(power.sqrt() / n, 0.0)
}

/// Random Hermitian PSD matrix with trace `power`.
pub fn random_psd(rng: &mut impl Rng, n: usize, power: f64) -> CMat {
    let b = random_complex(rng, n, n);
    let r = &b * b.adjoint();
    let tr: f64 = (0..n).map(|i| r[(i, i)].re).sum();
    r * C64::new(power / tr, 0.0)
}

struct Instance {
    f: CMat,
    r: CMat,
    f_hat: CMat,
    rho: f64,
    power: f64,
}

fn instances(seed: u64, count: usize, n_tx: usize, n_s: usize) -> Vec<Instance> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let power = rng.random_range(0.5..20.0);
            Instance {
                f: random_on_sphere(&mut rng, n_tx, n_s, power),
                r: random_psd(&mut rng, n_tx, power),
                f_hat: random_on_sphere(&mut rng, n_tx, n_s, power),
                rho: rng.random_range(0.0..=1.0),
                power,
            }
        })
        .collect()
}

fn property(name: &'static str, worst: f64, threshold: f64) -> PropertyResult {
    PropertyResult {
        name,
        worst,
        threshold,
        passed: worst.is_finite() && worst <= threshold,
    }
}

/// Relative error of `<grad, D>` against a central difference of `gamma`
/// along random directions `D`, worst case over the instances.
pub fn gradient_check(hooks: &Hooks, seed: u64, count: usize) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed);
    let h = 1e-6;
    instances(seed, count, 4, 2)
        .iter()
        .map(|ins| {
            let d = random_complex(&mut rng, 4, 2);
            let g = (hooks.gradient)(&ins.f, &ins.r, &ins.f_hat, ins.rho);
            let analytic = inner(&g, &d);
            let step = d.clone() * C64::new(h, 0.0);
            let fd = (objective_gamma(&(&ins.f + &step), &ins.r, &ins.f_hat, ins.rho)
                - objective_gamma(&(&ins.f - &step), &ins.r, &ins.f_hat, ins.rho))
                / (2.0 * h);
            (fd - analytic).abs() / analytic.abs().max(1e-8)
        })
        .fold(0.0, f64::max)
}

pub fn run(hooks: &Hooks) -> Vec<PropertyResult> {
    let seed = 2024;
    let mut out = vec![property("gradient_finite_difference", gradient_check(hooks, seed, 20), 1e-5)];

    let cases = instances(seed + 1, 20, 4, 2);
    let mut rng = ChaCha20Rng::seed_from_u64(seed + 2);
    let mut tangency: f64 = 0.0;
    let mut retraction: f64 = 0.0;
    for ins in &cases {
        let g = project_to_tangent(&ins.f, &(hooks.gradient)(&ins.f, &ins.r, &ins.f_hat, ins.rho));
        tangency = tangency.max(inner(&ins.f, &g).abs() / ins.power.max(1.0));
        let step = rng.random_range(0.0..10.0);
        let x = retract(&ins.f, &g, step, ins.power.sqrt()).unwrap_or_else(|_| ins.f.clone() * C64::new(f64::NAN, 0.0));
        retraction = retraction.max((x.norm() - ins.power.sqrt()).abs());
    }
    out.push(property("tangency", tangency, 1e-8));
    out.push(property("retraction_norm", retraction, 1e-9));

    let settings = RcgSettings::default();
    let mut worst_rise: f64 = 0.0;
    for ins in &cases {
        // Start from the communications precoder, as the pipeline does.
        match solve_rcg(&ins.f_hat, &ins.r, &ins.f_hat, ins.rho, ins.power, &settings) {
            Ok(o) => {
                for w in o.trace.iterates.windows(2) {
                    worst_rise = worst_rise.max(w[1].gamma - w[0].gamma);
                }
                let last_g = project_to_tangent(
                    &o.precoder,
                    &(hooks.gradient)(&o.precoder, &ins.r, &ins.f_hat, ins.rho),
                );
                // A wrong gradient shows up as a final point that is not stationary.
                let exact = project_to_tangent(
                    &o.precoder,
                    &euclidean_gradient(&o.precoder, &ins.r, &ins.f_hat, ins.rho),
                );
                worst_rise = worst_rise.max(((last_g - exact).norm() - 1e-3 * ins.power).max(0.0));
            }
            Err(_) => worst_rise = f64::INFINITY,
        }
    }
    out.push(property("rcg_monotone_descent", worst_rise, 0.0));

    let mut kkt: f64 = 0.0;
    let mut wrng = ChaCha20Rng::seed_from_u64(seed + 3);
    for _ in 0..50 {
        let n = wrng.random_range(1..6);
        let mut gains: Vec<f64> = (0..n).map(|_| wrng.random_range(0.01..10.0)).collect();
        gains.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let total = wrng.random_range(0.1..20.0);
        let noise = wrng.random_range(0.1..2.0);
        kkt = kkt.max(match waterfill(&gains, total, noise) {
            Ok(a) => waterfill_kkt_residual(&gains, noise, &a.powers, a.water_level, total),
            Err(_) => f64::INFINITY,
        });
    }
    out.push(property("waterfill_kkt", kkt, 1e-8));

    let cfg = SystemConfig::default();
    let feasibility = BeamGrid::new(&cfg)
        .ok()
        .and_then(|grid| solve_radar_covariance(&grid, &cfg, 0).ok())
        .map(|s| covariance_violation(&s.matrix, cfg.power_budget / cfg.n_tx as f64))
        .unwrap_or(f64::INFINITY);
    out.push(property("covariance_feasibility", feasibility, 1e-8));
    out
}

/// Largest violation of the water-filling optimality conditions.
pub fn waterfill_kkt_residual(gains: &[f64], noise: f64, powers: &[f64], level: f64, total: f64) -> f64 {
    let mut worst = (powers.iter().sum::<f64>() - total).abs();
    for (g, p) in gains.iter().zip(powers) {
        let floor = noise / g;
        let v = if *p > 0.0 {
            (floor + p - level).abs()
        } else {
            (level - floor).max(0.0)
        };
        worst = worst.max(v).max((-p).max(0.0));
    }
    worst
}

/// Worst of: Hermitian asymmetry, diagonal error, negative eigenvalue.
pub fn covariance_violation(r: &CMat, diag: f64) -> f64 {
    let asym = (r - r.adjoint()).norm();
    let d = (0..r.nrows())
        .map(|i| (r[(i, i)].re - diag).abs().max(r[(i, i)].im.abs()))
        .fold(0.0, f64::max);
    let neg = (-min_hermitian_eigenvalue(r)).max(0.0);
    asym.max(d).max(neg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bad_gradient(f: &CMat, r: &CMat, f_hat: &CMat, rho: f64) -> CMat {
        // drops the factor 2 on the covariance term
        let cov = f * f.adjoint() - r;
        (cov * f) * C64::new(2.0 * rho, 0.0) + (f - f_hat) * C64::new(2.0 * (1.0 - rho), 0.0)
    }

    #[test]
    fn clean_build_passes() {
        let report = run(&Hooks::default());
        for p in &report {
            assert!(p.passed, "{p}");
        }
        assert_eq!(report.len(), 6);
    }

    #[test]
    fn injected_gradient_bug_is_caught() {
        let report = run(&Hooks { gradient: bad_gradient });
        let failed: Vec<_> = report.iter().filter(|p| !p.passed).map(|p| p.name).collect();
        assert!(failed.contains(&"gradient_finite_difference"), "{failed:?}");
    }
}
