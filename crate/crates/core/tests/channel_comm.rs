mod common;

use approx::assert_abs_diff_eq;
use jcas_core::linalg::{svd_sorted, CMat, C64};
use jcas_core::{
    achievable_rate, eigenmode_precoder, generate_rayleigh, optimal_combiner, steering_vector,
    SystemConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[test]
fn rayleigh_entries_have_unit_power() {
    // 8 x 4 x 31250 = 10^6 entries.
    let cfg = SystemConfig {
        n_subcarriers: 31_250,
        ..SystemConfig::default()
    };
    let ch = generate_rayleigh(&cfg, 2026);
    let power: Vec<f64> = ch
        .matrices
        .iter()
        .flat_map(|h| h.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>())
        .collect();
    assert_eq!(power.len(), 1_000_000);
    let n = power.len() as f64;
    let mean = power.iter().sum::<f64>() / n;
    let var = power.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((mean - 1.0).abs() <= 0.01, "mean |h|^2 = {mean}");
    // |h|^2 is Exp(1) for CN(0, 1), so its variance is 1.
    assert!((var - 1.0).abs() <= 0.01, "var |h|^2 = {var}");

    let re_mean = ch.matrices.iter().flat_map(|h| h.iter().map(|z| z.re).collect::<Vec<_>>()).sum::<f64>() / n;
    assert!(re_mean.abs() <= 0.01);
    // Neighbouring subcarriers are drawn independently.
    let cross: C64 = ch
        .matrices
        .windows(2)
        .map(|w| w[0][(0, 0)] * w[1][(0, 0)].conj())
        .sum::<C64>()
        / (ch.matrices.len() - 1) as f64;
    assert!(cross.norm() <= 0.03);
}

fn random_unitary(rng: &mut ChaCha20Rng, n: usize) -> CMat {
    svd_sorted(&common::gaussian(rng, n, n)).u
}

fn eigenmode_rate(h: &CMat, cfg: &SystemConfig) -> f64 {
    let f = eigenmode_precoder(h, cfg).unwrap().precoder;
    let w = optimal_combiner(h, &f, cfg.n_streams).unwrap().matrix;
    achievable_rate(h, &f, &w, cfg)
}

#[test]
fn eigenmode_rate_is_unitarily_invariant() {
    let cfg = SystemConfig::default();
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    for _ in 0..20 {
        let h = common::gaussian(&mut rng, cfg.n_rx, cfg.n_tx);
        let q = random_unitary(&mut rng, cfg.n_rx);
        let base = eigenmode_rate(&h, &cfg);
        let rotated = eigenmode_rate(&(&q * &h), &cfg);
        assert_abs_diff_eq!(base, rotated, epsilon = 1e-9);
        assert_abs_diff_eq!(base, eigenmode_precoder(&h, &cfg).unwrap().rate, epsilon = 1e-9);
    }
}

#[test]
fn rate_grows_with_power() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    for _ in 0..10 {
        let h = common::gaussian(&mut rng, 4, 8);
        let mut last = 0.0;
        for i in 0..40 {
            let cfg = SystemConfig {
                power_budget: 0.01 * 1.3f64.powi(i),
                ..SystemConfig::default()
            };
            let r = eigenmode_rate(&h, &cfg);
            assert!(r >= last - 1e-12, "rate fell from {last} to {r}");
            last = r;
        }
    }
}

#[test]
fn eigenmode_beats_random_precoders() {
    let cfg = SystemConfig::default();
    let mut rng = ChaCha20Rng::seed_from_u64(31);
    for _ in 0..5 {
        let h = common::gaussian(&mut rng, cfg.n_rx, cfg.n_tx);
        let best = eigenmode_rate(&h, &cfg);
        for _ in 0..100 {
            let f = common::on_sphere(&mut rng, cfg.n_tx, cfg.n_streams, cfg.power_budget);
            let w = optimal_combiner(&h, &f, cfg.n_streams).unwrap().matrix;
            assert!(achievable_rate(&h, &f, &w, &cfg) <= best + 1e-9);
        }
    }
}

#[test]
fn combiner_spans_top_left_singular_vectors() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    for _ in 0..20 {
        let h = common::gaussian(&mut rng, 4, 8);
        let f = common::gaussian(&mut rng, 8, 2);
        let w = optimal_combiner(&h, &f, 2).unwrap().matrix;
        let hf = &h * &f;
        // Projecting H F onto span(W) keeps all of it when rank(H F) = Ns.
        let kept = (&w * w.adjoint() * &hf).norm();
        assert_abs_diff_eq!(kept, hf.norm(), epsilon = 1e-9 * hf.norm());
        let gram = w.adjoint() * &w;
        assert!((gram - CMat::identity(2, 2)).norm() <= 1e-10);
    }
}

#[test]
fn eigenmode_power_is_exact() {
    let mut rng = ChaCha20Rng::seed_from_u64(77);
    for _ in 0..50 {
        let cfg = SystemConfig {
            power_budget: rng.random_range(0.01..1000.0),
            ..SystemConfig::default()
        };
        let h = common::gaussian(&mut rng, cfg.n_rx, cfg.n_tx);
        let f = eigenmode_precoder(&h, &cfg).unwrap().precoder;
        assert_abs_diff_eq!(f.norm_squared(), cfg.power_budget, epsilon = 1e-9 * cfg.power_budget);
    }
}

proptest! {
    #[test]
    fn steering_is_conjugate_symmetric(theta in -90.0f64..=90.0, k in 0usize..64, n_tx in 1usize..16) {
        let cfg = SystemConfig::default();
        let f = cfg.base_freq + k as f64 * cfg.subcarrier_spacing;
        let a = steering_vector(theta, f, n_tx, cfg.antenna_spacing).unwrap();
        let b = steering_vector(-theta, f, n_tx, cfg.antenna_spacing).unwrap();
        prop_assert!((a.conjugate() - b).norm() <= 1e-12 * n_tx as f64);
        prop_assert!(a.iter().all(|z| (z.norm() - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn waterfill_conserves_power(
        gains in proptest::collection::vec(1e-3f64..100.0, 1..6),
        total in 0.0f64..50.0,
        noise in 0.01f64..10.0,
    ) {
        let alloc = jcas_core::waterfill(&gains, total, noise).unwrap();
        let sum: f64 = alloc.powers.iter().sum();
        prop_assert!((sum - total).abs() <= 1e-9 * total.max(1.0));
        prop_assert!(alloc.powers.iter().all(|&p| p >= 0.0));
        for (g, p) in gains.iter().zip(&alloc.powers) {
            if *p > 0.0 {
                prop_assert!((noise / g + p - alloc.water_level).abs() <= 1e-8 * alloc.water_level.max(1.0));
            } else {
                prop_assert!(noise / g >= alloc.water_level - 1e-8);
            }
        }
    }
}
