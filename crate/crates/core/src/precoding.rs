//! Communications-optimal precoding: eigenmode transmission with
//! water-filling, left-singular-vector combiners, and the achievable rate.

use serde::Serialize;

use crate::config::SystemConfig;
use crate::error::{JcasError, Result};
use crate::linalg::{
    canonical_phase, complete_orthonormal, log2_det_hpd, pseudo_inverse, svd_sorted, CMat, C64,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaterfillAllocation {
    /// Per-stream powers, in the order of the input gains.
    pub powers: Vec<f64>,
    pub water_level: f64,
}

/// Water-filling: `p_i = max(0, mu - noise / g_i)` with `sum p_i = total_power`.
///
/// `gains` are squared singular values. They are normally sorted in
/// descending order, but any order is accepted and preserved.
pub fn waterfill(gains: &[f64], total_power: f64, noise: f64) -> Result<WaterfillAllocation> {
    if gains.is_empty() {
        return Err(JcasError::Input("water-filling needs at least one gain".into()));
    }
    if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
        return Err(JcasError::Input(format!("water-filling gain {g} must be > 0")));
    }
    if !(total_power.is_finite() && total_power >= 0.0) || !(noise.is_finite() && noise > 0.0) {
        return Err(JcasError::Input(format!(
            "bad water-filling budget {total_power} or noise {noise}"
        )));
    }

    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[b].partial_cmp(&gains[a]).unwrap());
    let floors: Vec<f64> = order.iter().map(|&i| noise / gains[i]).collect();

    // Largest active set whose weakest member still gets positive power.
    let mut active = floors.len();
    let mut level = 0.0;
    while active > 0 {
        let sum_floor: f64 = floors[..active].iter().sum();
        level = (total_power + sum_floor) / active as f64;
        if level > floors[active - 1] || active == 1 {
            break;
        }
        active -= 1;
    }

    let mut powers = vec![0.0; gains.len()];
    for (rank, &i) in order.iter().enumerate().take(active) {
        powers[i] = (level - floors[rank]).max(0.0);
    }
    Ok(WaterfillAllocation {
        powers,
        water_level: level,
    })
}

/// Step-1 precoder `F = V P^{1/2}` and its closed-form rate.
#[derive(Debug, Clone)]
pub struct EigenmodePrecoder {
    /// `n_tx x n_streams`; columns of dead modes are zero.
    pub precoder: CMat,
    /// Squared singular values of the strongest `n_streams` modes.
    pub gains: Vec<f64>,
    /// Power per stream (zero for modes that are not allocated).
    pub powers: Vec<f64>,
    pub water_level: f64,
    /// `sum_i log2(1 + c g_i p_i)` with the configured SNR prefactor `c`.
    pub rate: f64,
}

/// Eigenmode precoder for one subcarrier with water-filling over the
/// nonzero singular values. The precoder carries `cfg.design_power()`.
pub fn eigenmode_precoder(h: &CMat, cfg: &SystemConfig) -> Result<EigenmodePrecoder> {
    if h.shape() != (cfg.n_rx, cfg.n_tx) {
        return Err(JcasError::Input(format!(
            "channel shape {:?} does not match ({}, {})",
            h.shape(),
            cfg.n_rx,
            cfg.n_tx
        )));
    }
    let ns = cfg.n_streams;
    let svd = svd_sorted(h);
    let smax = svd.singular_values.first().copied().unwrap_or(0.0);
    if !(smax > 0.0) || !smax.is_finite() {
        return Err(JcasError::DegenerateChannel("channel matrix is zero".into()));
    }
    let cutoff = smax * 1e-12 * cfg.n_tx.max(cfg.n_rx) as f64;
    let gains: Vec<f64> = svd.singular_values.iter().take(ns).map(|s| s * s).collect();
    let live: Vec<f64> = svd
        .singular_values
        .iter()
        .take(ns)
        .take_while(|&&s| s > cutoff)
        .map(|s| s * s)
        .collect();

    let power = cfg.design_power();
    let prefactor = cfg.rate_prefactor();
    let alloc = waterfill(&live, power, 1.0 / prefactor)?;
    let mut powers = alloc.powers.clone();
    powers.resize(ns, 0.0);

    let mut f = CMat::zeros(cfg.n_tx, ns);
    for (i, &p) in powers.iter().enumerate() {
        if p > 0.0 {
            f.set_column(i, &(svd.v.column(i) * C64::new(p.sqrt(), 0.0)));
        }
    }
    let norm = f.norm();
    f *= C64::new(power.sqrt() / norm, 0.0);

    let rate = gains
        .iter()
        .zip(&powers)
        .map(|(g, p)| (1.0 + prefactor * g * p).log2())
        .sum();
    Ok(EigenmodePrecoder {
        precoder: f,
        gains,
        powers,
        water_level: alloc.water_level,
        rate,
    })
}

#[derive(Debug, Clone)]
pub struct Combiner {
    /// `n_rx x n_streams` with orthonormal columns.
    pub matrix: CMat,
    /// Number of columns that came from nonzero singular values of `H F`.
    pub rank: usize,
}

impl Combiner {
    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.matrix.ncols()
    }
}

/// Left singular vectors of `H F` for the `n_streams` largest singular values.
/// Missing directions (rank-deficient `H F`) are filled with an orthonormal
/// complement and logged.
pub fn optimal_combiner(h: &CMat, f: &CMat, n_streams: usize) -> Result<Combiner> {
    if h.ncols() != f.nrows() {
        return Err(JcasError::Input(format!(
            "H is {:?} but F is {:?}",
            h.shape(),
            f.shape()
        )));
    }
    if n_streams > h.nrows() {
        return Err(JcasError::Input(format!(
            "{n_streams} streams exceed {} receive antennas",
            h.nrows()
        )));
    }
    let hf = h * f;
    let svd = svd_sorted(&hf);
    let smax = svd.singular_values.first().copied().unwrap_or(0.0);
    let cutoff = smax * 1e-10 * hf.nrows().max(hf.ncols()) as f64;
    let rank = svd
        .singular_values
        .iter()
        .take(n_streams)
        .take_while(|&&s| s > cutoff && s > 0.0)
        .count();
    let cols: Vec<_> = (0..rank)
        .map(|i| {
            let u = svd.u.column(i).into_owned();
            let ph = canonical_phase(&u);
            u * ph
        })
        .collect();
    let basis = if cols.is_empty() {
        CMat::zeros(h.nrows(), 0)
    } else {
        CMat::from_columns(&cols)
    };
    let matrix = complete_orthonormal(&basis, n_streams);
    if rank < n_streams {
        tracing::debug!(rank, n_streams, "H F is rank deficient; combiner completed with an orthonormal complement");
    }
    Ok(Combiner { matrix, rank })
}

/// `log2 det(I + c W^+ H F F^H H^H W)` with `c = cfg.rate_prefactor()`.
/// Never negative for finite inputs.
pub fn achievable_rate(h: &CMat, f: &CMat, w: &CMat, cfg: &SystemConfig) -> f64 {
    rate_with_prefactor(h, f, w, cfg.rate_prefactor())
}

pub fn rate_with_prefactor(h: &CMat, f: &CMat, w: &CMat, prefactor: f64) -> f64 {
    let gram = w.adjoint() * w;
    let orthonormal = (&gram - CMat::identity(gram.nrows(), gram.ncols())).norm() < 1e-10;
    let w_pinv = if orthonormal { w.adjoint() } else { pseudo_inverse(w) };
    let a = &w_pinv * h * f;
    let n = a.nrows();
    let m = CMat::identity(n, n) + (&a * a.adjoint()) * C64::new(prefactor, 0.0);
    match log2_det_hpd(&m) {
        Some(v) => v.max(0.0),
        None => {
            // I + PSD is always HPD; only reachable with non-finite input
            tracing::warn!("rate matrix failed Cholesky");
            0.0
        }
    }
}
