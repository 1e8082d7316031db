//! End-to-end JCAS design for one channel realization.
//!
//! Stages, in order: eigenmode precoders on every subcarrier, selection of
//! the `J` weakest subcarriers, radar covariances on the selection, RCG
//! refinement of the selected precoders, assembly, and combiners.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::array::BeamGrid;
use crate::channel::ChannelSet;
use crate::config::SystemConfig;
use crate::covariance::{solve_covariance_set, CovarianceSet};
use crate::error::{JcasError, Result};
use crate::evaluation::beampattern_mse;
use crate::linalg::{frobenius_sq, CMat};
use crate::manifold::{solve_rcg, RcgExit, RcgOutcome, RcgSettings, RcgTrace};
use crate::precoding::{achievable_rate, eigenmode_precoder, optimal_combiner, EigenmodePrecoder};

/// Indices (0-based) of the `j` smallest rates, returned in ascending index
/// order. Ties go to the lower index.
pub fn select_jcas_subcarriers(rates: &[f64], j: usize) -> Result<Vec<usize>> {
    if j > rates.len() {
        return Err(JcasError::Input(format!(
            "cannot select {j} JCAS subcarriers out of {}",
            rates.len()
        )));
    }
    let mut order: Vec<usize> = (0..rates.len()).collect();
    order.sort_by(|&a, &b| rates[a].total_cmp(&rates[b]).then(a.cmp(&b)));
    let mut picked = order[..j].to_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Refined precoders on their subcarriers, step-1 precoders elsewhere.
pub fn assemble_final_precoders(
    comm: &[CMat],
    refined: &BTreeMap<usize, CMat>,
) -> Result<Vec<CMat>> {
    if let Some(&k) = refined.keys().find(|&&k| k >= comm.len()) {
        return Err(JcasError::Input(format!(
            "refined precoder for subcarrier {k} but only {} subcarriers",
            comm.len()
        )));
    }
    Ok(comm
        .iter()
        .enumerate()
        .map(|(k, f)| refined.get(&k).unwrap_or(f).clone())
        .collect())
}

#[derive(Debug, Clone)]
pub struct BeamformerSet {
    /// Final precoders `F[k]`, one per subcarrier.
    pub precoders: Vec<CMat>,
    /// Combiners `W[k]` with orthonormal columns.
    pub combiners: Vec<CMat>,
    /// JCAS subcarriers, 0-based, ascending.
    pub jcas_set: Vec<usize>,
    /// Step-1 eigenmode precoders.
    pub comm_precoders: Vec<CMat>,
}

#[derive(Debug, Clone)]
pub struct DesignOutput {
    pub beamformers: BeamformerSet,
    pub covariances: CovarianceSet,
    /// Eigenmode rates before refinement (bits/s/Hz).
    pub step1_rates: Vec<f64>,
    /// Rates of the assembled design with its combiners.
    pub final_rates: Vec<f64>,
    pub rcg_traces: BTreeMap<usize, RcgTrace>,
    /// Subcarriers whose `H F` had rank below the stream count.
    pub rank_deficient_combiners: Vec<usize>,
}

impl DesignOutput {
    pub fn average_rate(&self) -> f64 {
        mean(&self.final_rates)
    }

    pub fn average_step1_rate(&self) -> f64 {
        mean(&self.step1_rates)
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Step 1 on every subcarrier.
pub fn comm_precoders(channels: &ChannelSet, cfg: &SystemConfig) -> Result<Vec<EigenmodePrecoder>> {
    channels
        .matrices
        .par_iter()
        .enumerate()
        .map(|(k, h)| eigenmode_precoder(h, cfg).map_err(|e| e.at_subcarrier(k)))
        .collect()
}

/// RCG refinement of the step-1 precoders on `indices`, initialized at the
/// step-1 precoders.
pub fn refine_subcarriers(
    step1: &[EigenmodePrecoder],
    covariances: &CovarianceSet,
    indices: &[usize],
    cfg: &SystemConfig,
) -> Result<BTreeMap<usize, RcgOutcome>> {
    let settings = RcgSettings::from_config(cfg);
    let power = cfg.design_power();
    let solved = indices
        .par_iter()
        .map(|&k| {
            let r = covariances.get(k).ok_or_else(|| {
                JcasError::Input(format!("no radar covariance for subcarrier {k}"))
            })?;
            let f_hat = &step1
                .get(k)
                .ok_or_else(|| JcasError::Input(format!("subcarrier {k} out of range")))?
                .precoder;
            solve_rcg(f_hat, r, f_hat, cfg.rho, power, &settings)
                .map(|o| (k, o))
                .map_err(|e| e.at_subcarrier(k))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(solved.into_iter().collect())
}

/// Assembly and combiners for a given JCAS set.
pub fn finalize(
    channels: &ChannelSet,
    cfg: &SystemConfig,
    step1: &[EigenmodePrecoder],
    jcas_set: &[usize],
    refined: &BTreeMap<usize, RcgOutcome>,
) -> Result<(BeamformerSet, Vec<f64>, Vec<usize>)> {
    let comm: Vec<CMat> = step1.iter().map(|e| e.precoder.clone()).collect();
    let chosen: BTreeMap<usize, CMat> = jcas_set
        .iter()
        .map(|&k| {
            refined
                .get(&k)
                .map(|o| (k, o.precoder.clone()))
                .ok_or_else(|| JcasError::Input(format!("subcarrier {k} was not refined")))
        })
        .collect::<Result<_>>()?;
    let precoders = assemble_final_precoders(&comm, &chosen)?;

    let per_k = channels
        .matrices
        .par_iter()
        .zip(precoders.par_iter())
        .enumerate()
        .map(|(k, (h, f))| {
            let w = optimal_combiner(h, f, cfg.n_streams).map_err(|e| e.at_subcarrier(k))?;
            let rate = achievable_rate(h, f, &w.matrix, cfg);
            Ok((w, rate))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut combiners = Vec::with_capacity(per_k.len());
    let mut rates = Vec::with_capacity(per_k.len());
    let mut deficient = Vec::new();
    for (k, (w, rate)) in per_k.into_iter().enumerate() {
        if w.is_rank_deficient() {
            deficient.push(k);
        }
        combiners.push(w.matrix);
        rates.push(rate);
    }
    Ok((
        BeamformerSet {
            precoders,
            combiners,
            jcas_set: jcas_set.to_vec(),
            comm_precoders: comm,
        },
        rates,
        deficient,
    ))
}

/// Full design for one channel realization.
pub fn run_algorithm1(channels: &ChannelSet, cfg: &SystemConfig) -> Result<DesignOutput> {
    let grid = BeamGrid::new(cfg)?;
    run_algorithm1_on_grid(channels, cfg, &grid, None)
}

/// As [`run_algorithm1`], reusing a prebuilt grid and optionally a bank of
/// radar covariances covering at least the selected subcarriers.
pub fn run_algorithm1_on_grid(
    channels: &ChannelSet,
    cfg: &SystemConfig,
    grid: &BeamGrid,
    covariance_bank: Option<&CovarianceSet>,
) -> Result<DesignOutput> {
    cfg.validate()?;
    channels.check_shape(cfg)?;

    let step1 = comm_precoders(channels, cfg)?;
    let step1_rates: Vec<f64> = step1.iter().map(|e| e.rate).collect();
    let jcas_set = select_jcas_subcarriers(&step1_rates, cfg.n_jcas)?;

    let covariances = match covariance_bank {
        Some(bank) => bank.subset(&jcas_set)?,
        None => solve_covariance_set(grid, cfg, &jcas_set, false)?,
    };
    let refined = refine_subcarriers(&step1, &covariances, &jcas_set, cfg)?;
    let (beamformers, final_rates, deficient) =
        finalize(channels, cfg, &step1, &jcas_set, &refined)?;

    Ok(DesignOutput {
        beamformers,
        covariances,
        step1_rates,
        final_rates,
        rcg_traces: refined.into_iter().map(|(k, o)| (k, o.trace)).collect(),
        rank_deficient_combiners: deficient,
    })
}

/// Auditable record of one design run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config: SystemConfig,
    pub seed: u64,
    pub snr_db: f64,
    /// 0-based JCAS subcarrier indices.
    pub jcas_subcarriers: Vec<usize>,
    pub step1_rates: Vec<f64>,
    pub final_rates: Vec<f64>,
    pub average_step1_rate: f64,
    pub average_rate: f64,
    /// Absent when no subcarrier is used for sensing.
    pub beampattern_mse: Option<f64>,
    /// `(1/J) sum_k ||R[k] - F[k] F[k]^H||_F^2` over the JCAS set.
    pub covariance_mismatch: Option<f64>,
    pub sensing_tolerance: Option<f64>,
    pub sensing_tolerance_met: Option<bool>,
    pub covariance_objectives: BTreeMap<usize, f64>,
    pub rcg: BTreeMap<usize, RcgSummary>,
    pub rank_deficient_combiners: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RcgSummary {
    pub iterations: usize,
    pub exit: RcgExit,
    pub final_gamma: f64,
    pub gamma_trace: Vec<f64>,
}

impl RunManifest {
    pub fn new(cfg: &SystemConfig, grid: &BeamGrid, seed: u64, out: &DesignOutput) -> Self {
        let bf = &out.beamformers;
        let mse = beampattern_mse(&bf.precoders, &bf.jcas_set, grid, cfg.design_power());
        let mismatch = if bf.jcas_set.is_empty() {
            None
        } else {
            let total: f64 = bf
                .jcas_set
                .iter()
                .filter_map(|&k| {
                    let r = out.covariances.get(k)?;
                    let f = &bf.precoders[k];
                    Some(frobenius_sq(&(r - f * f.adjoint())))
                })
                .sum();
            Some(total / bf.jcas_set.len() as f64)
        };
        let met = match (mismatch, cfg.sensing_tolerance) {
            (Some(m), Some(tau)) => Some(m <= tau),
            _ => None,
        };
        RunManifest {
            config: cfg.clone(),
            seed,
            snr_db: cfg.snr_db(),
            jcas_subcarriers: bf.jcas_set.clone(),
            step1_rates: out.step1_rates.clone(),
            final_rates: out.final_rates.clone(),
            average_step1_rate: out.average_step1_rate(),
            average_rate: out.average_rate(),
            beampattern_mse: mse,
            covariance_mismatch: mismatch,
            sensing_tolerance: cfg.sensing_tolerance,
            sensing_tolerance_met: met,
            covariance_objectives: out.covariances.objectives(),
            rcg: out
                .rcg_traces
                .iter()
                .map(|(&k, t)| {
                    (
                        k,
                        RcgSummary {
                            iterations: t.iterations(),
                            exit: t.exit,
                            final_gamma: t.final_gamma(),
                            gamma_trace: t.iterates.iter().map(|i| i.gamma).collect(),
                        },
                    )
                })
                .collect(),
            rank_deficient_combiners: out.rank_deficient_combiners.clone(),
        }
    }
}
