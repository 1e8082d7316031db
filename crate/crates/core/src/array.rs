//! Uniform linear array geometry: carrier plan, steering vectors and the
//! ideal (mask) beampattern.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::config::SystemConfig;
use crate::error::{JcasError, Result};
use crate::linalg::{CMat, CVec, C64};
use crate::SPEED_OF_LIGHT;

/// Slack on mainlobe interval endpoints so that grid points produced by
/// floating-point arithmetic land inside closed intervals.
const ENDPOINT_SLACK_DEG: f64 = 1e-9;

/// `f_k = f0 + k * df` for `k = 0..K` (0-based subcarrier index).
pub fn carrier_frequencies(cfg: &SystemConfig) -> Vec<f64> {
    (0..cfg.n_subcarriers)
        .map(|k| cfg.base_freq + k as f64 * cfg.subcarrier_spacing)
        .collect()
}

/// ULA steering vector with entries `exp(j 2 pi n (f spacing / c) sin(theta))`,
/// `n = 0..n_tx`.
pub fn steering_vector(theta_deg: f64, freq: f64, n_tx: usize, spacing: f64) -> Result<CVec> {
    if !(-90.0..=90.0).contains(&theta_deg) {
        return Err(JcasError::Input(format!(
            "steering angle {theta_deg} deg is outside [-90, 90]"
        )));
    }
    if !(freq.is_finite() && freq > 0.0) {
        return Err(JcasError::Input(format!("carrier frequency {freq} must be > 0")));
    }
    Ok(steering_from_phase(
        2.0 * PI * freq * spacing / SPEED_OF_LIGHT * theta_deg.to_radians().sin(),
        n_tx,
    ))
}

fn steering_from_phase(phase: f64, n_tx: usize) -> CVec {
    CVec::from_iterator(
        n_tx,
        (0..n_tx).map(|n| {
            if n == 0 {
                C64::new(1.0, 0.0)
            } else {
                C64::from_polar(1.0, n as f64 * phase)
            }
        }),
    )
}

/// Binary mask: 1 where `theta` lies in some `[target - halfwidth, target + halfwidth]`.
pub fn desired_gain_at(theta_deg: f64, targets: &[f64], halfwidth: f64) -> f64 {
    let hit = targets
        .iter()
        .any(|t| (theta_deg - t).abs() <= halfwidth + ENDPOINT_SLACK_DEG);
    if hit {
        1.0
    } else {
        0.0
    }
}

/// Ideal beampattern on the grid, `angles.len() x n_subcarriers`. Every column
/// is the same mask.
pub fn desired_beampattern(
    angles: &[f64],
    n_subcarriers: usize,
    targets: &[f64],
    halfwidth: f64,
) -> Result<DMatrix<f64>> {
    if targets.is_empty() {
        return Err(JcasError::config("target_angles", "at least one target is required"));
    }
    if let Some(bad) = targets.iter().find(|t| !(-90.0..=90.0).contains(*t)) {
        return Err(JcasError::config(
            "target_angles",
            format!("{bad} is outside [-90, 90] degrees"),
        ));
    }
    let mask: Vec<f64> = angles
        .iter()
        .map(|&a| desired_gain_at(a, targets, halfwidth))
        .collect();
    Ok(DMatrix::from_fn(angles.len(), n_subcarriers, |t, _| mask[t]))
}

/// `grid_size` angles uniformly spaced over `[-90, 90]` degrees.
pub fn uniform_angles(grid_size: usize) -> Vec<f64> {
    if grid_size == 1 {
        return vec![0.0];
    }
    let step = 180.0 / (grid_size - 1) as f64;
    (0..grid_size).map(|t| -90.0 + t as f64 * step).collect()
}

/// Angular grid with per-subcarrier steering matrices and the ideal mask.
#[derive(Debug, Clone)]
pub struct BeamGrid {
    /// Grid angles in degrees, length `T`.
    pub angles: Vec<f64>,
    /// Subcarrier frequencies in Hz, length `K`.
    pub frequencies: Vec<f64>,
    /// One `n_tx x T` matrix per subcarrier whose column `t` is `a(theta_t, f_k)`.
    pub steering: Vec<CMat>,
    /// `T x K` mask.
    pub desired_gain: DMatrix<f64>,
}

impl BeamGrid {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        Self::from_angles(
            uniform_angles(cfg.grid_size),
            carrier_frequencies(cfg),
            cfg.n_tx,
            cfg.antenna_spacing,
            &cfg.target_angles,
            cfg.mainlobe_halfwidth,
        )
    }

    pub fn from_angles(
        angles: Vec<f64>,
        frequencies: Vec<f64>,
        n_tx: usize,
        spacing: f64,
        targets: &[f64],
        halfwidth: f64,
    ) -> Result<Self> {
        let desired_gain = desired_beampattern(&angles, frequencies.len(), targets, halfwidth)?;
        let steering = frequencies
            .iter()
            .map(|&f| {
                let cols = angles
                    .iter()
                    .map(|&a| steering_vector(a, f, n_tx, spacing))
                    .collect::<Result<Vec<_>>>()?;
                Ok(CMat::from_columns(&cols))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BeamGrid {
            angles,
            frequencies,
            steering,
            desired_gain,
        })
    }

    pub fn n_angles(&self) -> usize {
        self.angles.len()
    }

    pub fn n_subcarriers(&self) -> usize {
        self.frequencies.len()
    }

    pub fn desired_column(&self, k: usize) -> Vec<f64> {
        self.desired_gain.column(k).iter().copied().collect()
    }
}
