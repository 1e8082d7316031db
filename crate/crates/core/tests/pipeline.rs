use std::time::Instant;

use approx::assert_abs_diff_eq;
use jcas_core::evaluation::{scheme_label, sweep};
use jcas_core::linalg::{frobenius_sq, CMat};
use jcas_core::pipeline::{run_algorithm1, select_jcas_subcarriers, RunManifest};
use jcas_core::{generate_rayleigh, BeamGrid, SweepSettings, SystemConfig};

fn small() -> SystemConfig {
    SystemConfig {
        n_tx: 4,
        n_rx: 2,
        n_streams: 2,
        n_subcarriers: 8,
        n_jcas: 3,
        ..SystemConfig::default()
    }
}

fn assert_invariants(cfg: &SystemConfig, out: &jcas_core::pipeline::DesignOutput) {
    let bf = &out.beamformers;
    assert_eq!(bf.precoders.len(), cfg.n_subcarriers);
    for f in &bf.precoders {
        assert_abs_diff_eq!(frobenius_sq(f), cfg.design_power(), epsilon = 1e-9 * cfg.design_power());
    }
    for w in &bf.combiners {
        let gram = w.adjoint() * w;
        assert!((gram - CMat::identity(cfg.n_streams, cfg.n_streams)).norm() <= 1e-9);
    }
    assert_eq!(bf.jcas_set.len(), cfg.n_jcas);
    assert!(bf.jcas_set.windows(2).all(|w| w[0] < w[1]));
    assert!(bf.jcas_set.iter().all(|&k| k < cfg.n_subcarriers));
}

#[test]
fn reference_run_satisfies_invariants() {
    let cfg = SystemConfig::default();
    let ch = generate_rayleigh(&cfg, 11);
    let start = Instant::now();
    let out = run_algorithm1(&ch, &cfg).unwrap();
    eprintln!("reference run_algorithm1: {:?}", start.elapsed());
    assert_invariants(&cfg, &out);

    // The selected set holds the weakest step-1 subcarriers.
    let inside: Vec<f64> = out.beamformers.jcas_set.iter().map(|&k| out.step1_rates[k]).collect();
    let outside: Vec<f64> = (0..cfg.n_subcarriers)
        .filter(|k| !out.beamformers.jcas_set.contains(k))
        .map(|k| out.step1_rates[k])
        .collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&inside) <= mean(&outside));
    let worst_outside = outside.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(inside.iter().all(|&r| r <= worst_outside));

    // Step-1 rates upper-bound the final rates, and only J subcarriers change.
    for k in 0..cfg.n_subcarriers {
        assert!(out.final_rates[k] <= out.step1_rates[k] + 1e-9);
        if !out.beamformers.jcas_set.contains(&k) {
            assert_abs_diff_eq!(out.final_rates[k], out.step1_rates[k], epsilon = 1e-9);
        }
    }
    for trace in out.rcg_traces.values() {
        assert!(trace.iterates.windows(2).all(|w| w[1].gamma <= w[0].gamma));
    }

    let grid = BeamGrid::new(&cfg).unwrap();
    let manifest = RunManifest::new(&cfg, &grid, 11, &out);
    assert_eq!(manifest.jcas_subcarriers, out.beamformers.jcas_set);
    assert!(manifest.beampattern_mse.unwrap() >= 0.0);
    serde_json::to_string(&manifest).unwrap();
}

#[test]
fn zero_rho_keeps_step1_rates() {
    let cfg = SystemConfig { rho: 0.0, ..small() };
    let out = run_algorithm1(&generate_rayleigh(&cfg, 3), &cfg).unwrap();
    for k in 0..cfg.n_subcarriers {
        assert_abs_diff_eq!(out.final_rates[k], out.step1_rates[k], epsilon = 1e-6);
    }
    for &k in &out.beamformers.jcas_set {
        let diff = &out.beamformers.precoders[k] - &out.beamformers.comm_precoders[k];
        assert!(diff.norm() <= 1e-6);
    }
}

#[test]
fn empty_and_full_jcas_sets() {
    let ch = generate_rayleigh(&small(), 5);
    let none = SystemConfig { n_jcas: 0, ..small() };
    let out = run_algorithm1(&ch, &none).unwrap();
    assert!(out.beamformers.jcas_set.is_empty());
    assert_eq!(out.beamformers.precoders, out.beamformers.comm_precoders);
    for (a, b) in out.final_rates.iter().zip(&out.step1_rates) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
    }
    assert_invariants(&none, &out);

    let all = SystemConfig { n_jcas: 8, rho: 0.9, ..small() };
    let out = run_algorithm1(&ch, &all).unwrap();
    assert_eq!(out.beamformers.jcas_set, (0..8).collect::<Vec<_>>());
    assert_eq!(out.rcg_traces.len(), 8);
    assert_invariants(&all, &out);
    assert_eq!(scheme_label(8, 8), "Conv.");
}

#[test]
fn jcas_larger_than_k_is_rejected() {
    let cfg = SystemConfig { n_jcas: 9, ..small() };
    let err = run_algorithm1(&generate_rayleigh(&small(), 1), &cfg).unwrap_err();
    assert!(err.is_config());
    assert!(select_jcas_subcarriers(&[1.0, 2.0], 3).is_err());
}

#[test]
fn identical_inputs_give_identical_outputs() {
    let cfg = small();
    let a = run_algorithm1(&generate_rayleigh(&cfg, 9), &cfg).unwrap();
    let b = run_algorithm1(&generate_rayleigh(&cfg, 9), &cfg).unwrap();
    assert_eq!(a.beamformers.precoders, b.beamformers.precoders);
    assert_eq!(a.beamformers.combiners, b.beamformers.combiners);
    assert_eq!(a.final_rates, b.final_rates);
}

#[test]
fn single_realization_sweep_matches_direct_run() {
    let cfg = small();
    let settings = SweepSettings {
        snr_db: vec![cfg.snr_db()],
        rho: vec![cfg.rho],
        jcas: vec![cfg.n_jcas],
        realizations: 1,
    };
    let base = 42;
    let out = sweep(&cfg, &settings, base).unwrap();
    let direct = run_algorithm1(
        &generate_rayleigh(&cfg, jcas_core::realization_seed(base, 0)),
        &cfg,
    )
    .unwrap();
    let res = out.find(cfg.rho, cfg.n_jcas).unwrap();
    assert_abs_diff_eq!(res.avg_rate[0], direct.average_rate(), epsilon = 1e-9);
    let grid = BeamGrid::new(&cfg).unwrap();
    let mse = jcas_core::evaluation::beampattern_mse(
        &direct.beamformers.precoders,
        &direct.beamformers.jcas_set,
        &grid,
        cfg.design_power(),
    );
    assert_abs_diff_eq!(res.avg_mse[0].unwrap(), mse.unwrap(), epsilon = 1e-9);
    assert_eq!(res.scheme, "Prop.");
}

#[test]
fn more_realizations_extend_the_same_draws() {
    // Realization i uses the same channel whatever the total count, so the
    // first-half average times n is a prefix sum of the full average.
    let cfg = small();
    let mk = |n| SweepSettings {
        snr_db: vec![10.0],
        rho: vec![0.5],
        jcas: vec![3],
        realizations: n,
    };
    let one = sweep(&cfg, &mk(1), 4).unwrap();
    let two = sweep(&cfg, &mk(2), 4).unwrap();
    let second = run_algorithm1(
        &generate_rayleigh(&cfg.with_snr_db(10.0), jcas_core::realization_seed(4, 1)),
        &cfg.with_snr_db(10.0),
    )
    .unwrap();
    let r1 = one.results[0].avg_rate[0];
    let r2 = two.results[0].avg_rate[0];
    assert_abs_diff_eq!(2.0 * r2, r1 + second.average_rate(), epsilon = 1e-9);
}
