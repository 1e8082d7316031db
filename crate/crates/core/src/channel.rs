//! Rayleigh-fading channel realizations.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::columnar;
use crate::config::SystemConfig;
use crate::error::{JcasError, Result};
use crate::linalg::{CMat, C64};

/// Per-subcarrier channel matrices `H[k]`, each `n_rx x n_tx`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub matrices: Vec<CMat>,
    pub seed: u64,
}

impl ChannelSet {
    pub fn n_subcarriers(&self) -> usize {
        self.matrices.len()
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        columnar::write_matrices_to_path(path, Some(self.seed), self.matrices.iter().enumerate())
    }

    /// Loads a set written by [`ChannelSet::export`]. Indices must be
    /// contiguous from 0 and all matrices must share one shape.
    pub fn import(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = columnar::read_matrices_from_path(path)?;
        let fmt = |reason: String| JcasError::Format {
            path: path.to_path_buf(),
            reason,
        };
        let mut matrices = Vec::with_capacity(file.matrices.len());
        for (i, (k, m)) in file.matrices.into_iter().enumerate() {
            if k != i {
                return Err(fmt(format!("subcarrier {i} is missing")));
            }
            if let Some(first) = matrices.first() {
                let first: &CMat = first;
                if first.shape() != m.shape() {
                    return Err(fmt(format!("subcarrier {k} has shape {:?}", m.shape())));
                }
            }
            matrices.push(m);
        }
        Ok(ChannelSet {
            matrices,
            seed: file.seed.unwrap_or(0),
        })
    }

    pub fn check_shape(&self, cfg: &SystemConfig) -> Result<()> {
        if self.matrices.len() != cfg.n_subcarriers {
            return Err(JcasError::Input(format!(
                "channel set has {} subcarriers, config expects {}",
                self.matrices.len(),
                cfg.n_subcarriers
            )));
        }
        for (k, h) in self.matrices.iter().enumerate() {
            if h.shape() != (cfg.n_rx, cfg.n_tx) {
                return Err(JcasError::Input(format!(
                    "H[{k}] has shape {:?}, expected ({}, {})",
                    h.shape(),
                    cfg.n_rx,
                    cfg.n_tx
                )));
            }
            if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(JcasError::Input(format!("H[{k}] has non-finite entries")));
            }
        }
        Ok(())
    }
}

/// i.i.d. `CN(0, 1)` entries, independent across subcarriers. Draw order is
/// subcarrier, row, column, real part then imaginary part.
pub fn generate_rayleigh(cfg: &SystemConfig, seed: u64) -> ChannelSet {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let matrices = (0..cfg.n_subcarriers)
        .map(|_| {
            let mut h = CMat::zeros(cfg.n_rx, cfg.n_tx);
            for r in 0..cfg.n_rx {
                for c in 0..cfg.n_tx {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    h[(r, c)] = C64::new(re * scale, im * scale);
                }
            }
            h
        })
        .collect();
    ChannelSet { matrices, seed }
}

/// Seed for Monte-Carlo realization `index` under `base` (SplitMix64 mix).
/// Realization seeds do not depend on the total realization count.
pub fn realization_seed(base: u64, index: usize) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
