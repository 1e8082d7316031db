//! Reference oracles written independently of the library solvers. They are
//! slow and simple on purpose and only run on small instances.

#![allow(dead_code)]

use jcas_core::linalg::{CMat, C64};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub fn gaussian(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    })
}

pub fn on_sphere(rng: &mut ChaCha20Rng, rows: usize, cols: usize, power: f64) -> CMat {
    let m = gaussian(rng, rows, cols);
    let n = m.norm();
    m.map(|z| z * (power.sqrt() / n))
}

/// Hermitian PSD with trace `power`.
pub fn psd(rng: &mut ChaCha20Rng, n: usize, power: f64) -> CMat {
    let b = gaussian(rng, n, n);
    let r = &b * b.adjoint();
    let tr: f64 = (0..n).map(|i| r[(i, i)].re).sum();
    r.map(|z| z * (power / tr))
}

fn re_inner(x: &CMat, y: &CMat) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Pattern-match objective written out entry by entry.
pub fn pattern_objective(steering: &CMat, desired: &[f64], r: &CMat) -> f64 {
    let n = steering.nrows();
    let mut total = 0.0;
    for (t, &pd) in desired.iter().enumerate() {
        let mut g = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                g += steering[(i, t)].conj() * r[(i, j)] * steering[(j, t)];
            }
        }
        total += (pd - g.re).abs();
    }
    total
}

/// Two-antenna covariance search: `R = [[d, z], [conj z, d]]` is feasible
/// exactly when `|z| <= d`. Scans a square grid of spacing `step` over the
/// disk, then rescans a window around the best point at `step / 100`.
pub fn brute_force_two_antenna(steering: &CMat, desired: &[f64], power: f64, step: f64) -> f64 {
    assert_eq!(steering.nrows(), 2);
    let d = power / 2.0;
    let eval = |re: f64, im: f64| {
        if re * re + im * im > d * d {
            return f64::INFINITY;
        }
        let z = C64::new(re, im);
        let r = CMat::from_row_slice(2, 2, &[C64::new(d, 0.0), z, z.conj(), C64::new(d, 0.0)]);
        pattern_objective(steering, desired, &r)
    };
    let scan = |c_re: f64, c_im: f64, half: f64, h: f64| {
        let n = (2.0 * half / h).round() as i64;
        let mut best = (f64::INFINITY, c_re, c_im);
        for a in 0..=n {
            for b in 0..=n {
                let re = c_re - half + a as f64 * h;
                let im = c_im - half + b as f64 * h;
                let v = eval(re, im);
                if v < best.0 {
                    best = (v, re, im);
                }
            }
        }
        best
    };
    let coarse = scan(0.0, 0.0, d, step);
    // Points on the boundary circle that the square grid misses.
    let mut best = coarse;
    for i in 0..20_000 {
        let phi = i as f64 * std::f64::consts::TAU / 20_000.0;
        let v = eval(d * phi.cos() * (1.0 - 1e-15), d * phi.sin() * (1.0 - 1e-15));
        if v < best.0 {
            best = (v, d * phi.cos(), d * phi.sin());
        }
    }
    let fine = scan(best.1, best.2, 2.0 * step, step / 100.0);
    best.0.min(fine.0)
}

fn rate(gains: &[f64], powers: &[f64], noise: f64) -> f64 {
    gains
        .iter()
        .zip(powers)
        .map(|(g, p)| (1.0 + g * p / noise).log2())
        .sum()
}

/// Best two-stream rate over `p0 = i * step`, `p1 = total - p0`.
pub fn waterfill_grid_rate(gains: &[f64; 2], total: f64, noise: f64, step: f64) -> f64 {
    let n = (total / step).floor() as usize;
    (0..=n)
        .map(|i| {
            let p0 = (i as f64 * step).min(total);
            rate(gains, &[p0, total - p0], noise)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn stream_rate(gains: &[f64], powers: &[f64], noise: f64) -> f64 {
    rate(gains, powers, noise)
}

/// `rho ||F F^H - R||^2 + (1 - rho) ||F - F_hat||^2` expanded elementwise.
pub fn gamma(f: &CMat, r: &CMat, f_hat: &CMat, rho: f64) -> f64 {
    let n = f.nrows();
    let mut cov = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for c in 0..f.ncols() {
                s += f[(i, c)] * f[(j, c)].conj();
            }
            cov += (s - r[(i, j)]).norm_sqr();
        }
    }
    let dist: f64 = f.iter().zip(f_hat.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
    rho * cov + (1.0 - rho) * dist
}

/// Gradient of `gamma` by central differences on each real coordinate.
pub fn numeric_gradient(f: &CMat, r: &CMat, f_hat: &CMat, rho: f64, h: f64) -> CMat {
    let mut g = CMat::zeros(f.nrows(), f.ncols());
    for i in 0..f.nrows() {
        for j in 0..f.ncols() {
            for (unit, part) in [(C64::new(h, 0.0), 0), (C64::new(0.0, h), 1)] {
                let mut up = f.clone();
                let mut dn = f.clone();
                up[(i, j)] += unit;
                dn[(i, j)] -= unit;
                let d = (gamma(&up, r, f_hat, rho) - gamma(&dn, r, f_hat, rho)) / (2.0 * h);
                if part == 0 {
                    g[(i, j)].re = d;
                } else {
                    g[(i, j)].im = d;
                }
            }
        }
    }
    g
}

/// Riemannian steepest descent on `||F||^2 = power` with backtracking,
/// restarted from `starts` random points. Returns the smallest `gamma`.
pub fn multistart_gamma(
    rng: &mut ChaCha20Rng,
    r: &CMat,
    f_hat: &CMat,
    rho: f64,
    power: f64,
    starts: usize,
) -> f64 {
    let radius = power.sqrt();
    let grad = |f: &CMat| {
        let e = f * f.adjoint() - r;
        let eg = (e * f).map(|z| z * 4.0 * rho) + (f - f_hat).map(|z| z * 2.0 * (1.0 - rho));
        let s = re_inner(f, &eg) / power;
        eg - f.map(|z| z * s)
    };
    let mut best = f64::INFINITY;
    for _ in 0..starts {
        let mut f = on_sphere(rng, f_hat.nrows(), f_hat.ncols(), power);
        let mut val = gamma(&f, r, f_hat, rho);
        let mut step = 1.0;
        for _ in 0..20_000 {
            let g = grad(&f);
            let gn2 = re_inner(&g, &g);
            if gn2.sqrt() < 1e-10 * radius.max(1.0) {
                break;
            }
            step *= 2.0;
            let mut moved = false;
            while step > 1e-16 {
                let x = &f - g.map(|z| z * step);
                let x = x.map(|z| z * (radius / x.norm()));
                let v = gamma(&x, r, f_hat, rho);
                if v <= val - 1e-4 * step * gn2 {
                    f = x;
                    val = v;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        best = best.min(val);
    }
    best
}
