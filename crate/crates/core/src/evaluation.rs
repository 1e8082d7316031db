//! Beampattern metrics and Monte-Carlo sweeps over SNR, sensing weight and
//! JCAS set size.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::array::BeamGrid;
use crate::channel::{generate_rayleigh, realization_seed};
use crate::config::{SweepSettings, SystemConfig};
use crate::covariance::{solve_covariance_set, CovarianceSet};
use crate::error::{JcasError, Result};
use crate::linalg::CMat;
use crate::pipeline::{
    comm_precoders, finalize, mean, refine_subcarriers, select_jcas_subcarriers,
};

/// `a(theta_t, f_k)^H C a(theta_t, f_k)` over the grid angles.
pub fn beampattern_gain(c: &CMat, grid: &BeamGrid, k: usize) -> Vec<f64> {
    let a = &grid.steering[k];
    let ca = c * a;
    (0..a.ncols())
        .map(|t| a.column(t).dotc(&ca.column(t)).re)
        .collect()
}

/// Beampattern of the transmit covariance `F F^H`, i.e. `||F^H a||^2`.
pub fn precoder_beampattern(f: &CMat, grid: &BeamGrid, k: usize) -> Vec<f64> {
    let proj = f.adjoint() * &grid.steering[k];
    proj.column_iter().map(|c| c.norm_squared()).collect()
}

/// `(1 / J T) sum_{k in jcas} sum_t |P_d(theta_t) - a^H F[k] F[k]^H a / P|^2`
/// with `P_d` the unit-height mask and `P` the design power the precoders
/// carry. `precoders` is indexed by subcarrier. `None` for an empty JCAS set.
pub fn beampattern_mse(
    precoders: &[CMat],
    jcas: &[usize],
    grid: &BeamGrid,
    power: f64,
) -> Option<f64> {
    if jcas.is_empty() {
        return None;
    }
    let total: f64 = jcas
        .iter()
        .map(|&k| {
            precoder_beampattern(&precoders[k], grid, k)
                .iter()
                .zip(grid.desired_gain.column(k).iter())
                .map(|(g, d)| (d - g / power).powi(2))
                .sum::<f64>()
        })
        .sum();
    Some(total / (jcas.len() * grid.n_angles()) as f64)
}

/// Averaged metrics for one `(rho, J)` pair across the SNR grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub rho: f64,
    pub n_jcas: usize,
    /// "Conv." when every subcarrier is a JCAS subcarrier, "Prop." otherwise.
    pub scheme: String,
    pub snr_db: Vec<f64>,
    /// Mean over realizations and subcarriers (bits/s/Hz).
    pub avg_rate: Vec<f64>,
    /// Mean over realizations; `None` when `J = 0`.
    pub avg_mse: Vec<Option<f64>>,
    /// Per SNR point: gain per unit design power at each grid angle, averaged over the JCAS set and
    /// realizations.
    pub beampattern: Vec<Vec<f64>>,
    /// Per SNR point: normalized gain of the median-index JCAS subcarrier, averaged over
    /// realizations.
    pub beampattern_median_k: Vec<Vec<f64>>,
    pub base_seed: u64,
    pub realizations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutput {
    pub angles: Vec<f64>,
    pub ideal: Vec<f64>,
    pub n_subcarriers: usize,
    pub results: Vec<ExperimentResult>,
}

impl SweepOutput {
    pub fn find(&self, rho: f64, n_jcas: usize) -> Option<&ExperimentResult> {
        self.results
            .iter()
            .find(|r| r.rho == rho && r.n_jcas == n_jcas)
    }
}

pub fn scheme_label(n_jcas: usize, n_subcarriers: usize) -> &'static str {
    if n_jcas == n_subcarriers {
        "Conv."
    } else {
        "Prop."
    }
}

/// Metrics of one realization at one `(rho, J)`.
#[derive(Debug, Clone)]
struct PointMetrics {
    rate: f64,
    mse: Option<f64>,
    pattern: Option<Vec<f64>>,
    pattern_median: Option<Vec<f64>>,
}

/// Runs the design over `settings.realizations` channel draws for every
/// combination in the grid. Realization `i` always uses the channel seed
/// `realization_seed(base_seed, i)`, independent of the grid and of the
/// realization count. Aggregation is in realization order, so the result does
/// not depend on thread scheduling.
pub fn sweep(
    template: &SystemConfig,
    settings: &SweepSettings,
    base_seed: u64,
) -> Result<SweepOutput> {
    template.validate()?;
    settings.validate(template.n_subcarriers)?;
    let grid = BeamGrid::new(template)?;
    let n_k = template.n_subcarriers;
    let max_j = settings.jcas.iter().copied().max().unwrap_or(0);
    let all_k: Vec<usize> = (0..n_k).collect();

    // Radar covariances only depend on the grid and the design power.
    let mut banks: HashMap<u64, CovarianceSet> = HashMap::new();
    for &snr in &settings.snr_db {
        let cfg = template.with_snr_db(snr);
        let key = cfg.design_power().to_bits();
        if max_j > 0 && !banks.contains_key(&key) {
            tracing::info!(snr, "solving radar covariances");
            banks.insert(key, solve_covariance_set(&grid, &cfg, &all_k, false)?);
        }
    }
    let empty = CovarianceSet::default();

    let mut per_snr = Vec::with_capacity(settings.snr_db.len());
    for &snr in &settings.snr_db {
        let cfg_snr = template.with_snr_db(snr);
        let bank = banks.get(&cfg_snr.design_power().to_bits()).unwrap_or(&empty);
        tracing::info!(snr, realizations = settings.realizations, "running realizations");
        let runs = (0..settings.realizations)
            .into_par_iter()
            .map(|i| {
                realization_metrics(&cfg_snr, settings, &grid, bank, base_seed, i).map_err(
                    |RealizationError { rho, source }| JcasError::AtSweepPoint {
                        snr_db: snr,
                        rho,
                        realization: i,
                        source: Box::new(source),
                    },
                )
            })
            .collect::<Result<Vec<_>>>()?;
        per_snr.push(runs);
    }

    let mut results = Vec::new();
    for (ri, &rho) in settings.rho.iter().enumerate() {
        for (ji, &j) in settings.jcas.iter().enumerate() {
            let mut avg_rate = Vec::new();
            let mut avg_mse = Vec::new();
            let mut pattern = Vec::new();
            let mut pattern_median = Vec::new();
            for runs in &per_snr {
                let points: Vec<&PointMetrics> = runs.iter().map(|r| &r[ri][ji]).collect();
                avg_rate.push(points.iter().map(|p| p.rate).sum::<f64>() / points.len() as f64);
                let mses: Vec<f64> = points.iter().filter_map(|p| p.mse).collect();
                avg_mse.push(if mses.is_empty() { None } else { Some(mean(&mses)) });
                pattern.push(average_patterns(points.iter().filter_map(|p| p.pattern.as_ref()), grid.n_angles()));
                pattern_median.push(average_patterns(
                    points.iter().filter_map(|p| p.pattern_median.as_ref()),
                    grid.n_angles(),
                ));
            }
            results.push(ExperimentResult {
                rho,
                n_jcas: j,
                scheme: scheme_label(j, n_k).to_owned(),
                snr_db: settings.snr_db.clone(),
                avg_rate,
                avg_mse,
                beampattern: pattern,
                beampattern_median_k: pattern_median,
                base_seed,
                realizations: settings.realizations,
            });
        }
    }

    Ok(SweepOutput {
        ideal: grid.desired_column(0),
        angles: grid.angles.clone(),
        n_subcarriers: n_k,
        results,
    })
}

fn average_patterns<'a>(patterns: impl Iterator<Item = &'a Vec<f64>>, n: usize) -> Vec<f64> {
    let mut acc = vec![0.0; n];
    let mut count = 0usize;
    for p in patterns {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
        count += 1;
    }
    if count > 0 {
        acc.iter_mut().for_each(|a| *a /= count as f64);
    }
    acc
}

struct RealizationError {
    rho: f64,
    source: JcasError,
}

/// `[rho][J]` metrics for realization `index`.
fn realization_metrics(
    cfg: &SystemConfig,
    settings: &SweepSettings,
    grid: &BeamGrid,
    bank: &CovarianceSet,
    base_seed: u64,
    index: usize,
) -> std::result::Result<Vec<Vec<PointMetrics>>, RealizationError> {
    let wrap = |rho: f64| move |source: JcasError| RealizationError { rho, source };
    let first_rho = settings.rho.first().copied().unwrap_or(f64::NAN);

    let channels = generate_rayleigh(cfg, realization_seed(base_seed, index));
    let step1 = comm_precoders(&channels, cfg).map_err(wrap(first_rho))?;
    let rates: Vec<f64> = step1.iter().map(|e| e.rate).collect();
    let max_j = settings.jcas.iter().copied().max().unwrap_or(0);
    // Selections are nested: the J smallest are a prefix of the max_j smallest.
    let widest = select_jcas_subcarriers(&rates, max_j).map_err(wrap(first_rho))?;

    settings
        .rho
        .iter()
        .map(|&rho| {
            let cfg_rho = SystemConfig {
                rho,
                ..cfg.clone()
            };
            let refined =
                refine_subcarriers(&step1, bank, &widest, &cfg_rho).map_err(wrap(rho))?;
            settings
                .jcas
                .iter()
                .map(|&j| {
                    let jcas = select_jcas_subcarriers(&rates, j).map_err(wrap(rho))?;
                    let (bf, final_rates, _) =
                        finalize(&channels, &cfg_rho, &step1, &jcas, &refined).map_err(wrap(rho))?;
                    let mse = beampattern_mse(&bf.precoders, &jcas, grid, cfg.design_power());
                    let (pattern, pattern_median) = if jcas.is_empty() {
                        (None, None)
                    } else {
                        let patterns: Vec<Vec<f64>> = jcas
                            .iter()
                            .map(|&k| {
                                precoder_beampattern(&bf.precoders[k], grid, k)
                                    .into_iter()
                                    .map(|g| g / cfg.design_power())
                                    .collect()
                            })
                            .collect();
                        let median = patterns[(jcas.len() - 1) / 2].clone();
                        (
                            Some(average_patterns(patterns.iter(), grid.n_angles())),
                            Some(median),
                        )
                    };
                    Ok(PointMetrics {
                        rate: mean(&final_rates),
                        mse,
                        pattern,
                        pattern_median,
                    })
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{CVec, C64};
    use approx::assert_abs_diff_eq;

    fn small_grid() -> BeamGrid {
        BeamGrid::from_angles(
            vec![-60.0, -20.0, 0.0, 35.0, 80.0],
            vec![2.0e9],
            4,
            0.075,
            &[0.0],
            10.0,
        )
        .unwrap()
    }

    #[test]
    fn isotropic_covariance_is_flat() {
        let g = small_grid();
        let p = 3.0;
        let c = CMat::identity(4, 4) * C64::new(p / 4.0, 0.0);
        for v in beampattern_gain(&c, &g, 0) {
            assert_abs_diff_eq!(v, p, epsilon = 1e-12);
        }
    }

    #[test]
    fn coherent_beam_peaks_at_n_squared() {
        let g = small_grid();
        let a: CVec = g.steering[0].column(3).into_owned();
        let c = &a * a.adjoint();
        let gain = beampattern_gain(&c, &g, 0);
        assert_abs_diff_eq!(gain[3], 16.0, epsilon = 1e-12);
        assert!(gain.iter().all(|&v| v >= -1e-12));
    }

    #[test]
    fn precoder_pattern_matches_covariance_pattern() {
        let g = small_grid();
        let f = CMat::from_fn(4, 2, |i, j| C64::new(i as f64 - 1.0, j as f64 * 0.3));
        let a = precoder_beampattern(&f, &g, 0);
        let b = beampattern_gain(&(&f * f.adjoint()), &g, 0);
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn mse_cases() {
        // Single angle, one subcarrier, N_t = 1: gain = |f|^2.
        let g = BeamGrid::from_angles(vec![0.0], vec![2.0e9], 1, 0.075, &[0.0], 1.0).unwrap();
        let f = CMat::from_element(1, 1, C64::new(0.5f64.sqrt(), 0.0));
        assert_abs_diff_eq!(beampattern_mse(&[f], &[0], &g, 1.0).unwrap(), 0.25, epsilon = 1e-15);
        let exact = CMat::from_element(1, 1, C64::new(1.0, 0.0));
        assert_eq!(beampattern_mse(std::slice::from_ref(&exact), &[0], &g, 1.0), Some(0.0));
        assert_eq!(beampattern_mse(&[exact], &[], &g, 1.0), None);
    }

    #[test]
    fn labels() {
        assert_eq!(scheme_label(64, 64), "Conv.");
        assert_eq!(scheme_label(16, 64), "Prop.");
    }
}
