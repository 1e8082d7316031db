//! System and experiment configuration.
//!
//! Configurations are TOML files with the sections `[array]`, `[carrier]`,
//! `[power]`, `[sensing]`, `[solver]`, `[run]` and `[sweep]`. Unknown keys
//! are rejected. `n_tx`, `n_rx` and `n_subcarriers` are required; every
//! other key falls back to the 8x4, 64-subcarrier reference setup.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{JcasError, Result};
use crate::SPEED_OF_LIGHT;

/// How the achievable rate couples transmit power and noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RateFormula {
    /// Precoders carry the full budget (`||F||_F^2 = P_BS`) and the rate uses
    /// `1 / sigma^2` as SNR prefactor.
    #[default]
    Consistent,
    /// Precoders and radar covariances are designed at unit power and the rate
    /// carries the explicit `P_BS / (sigma^2 N_s)` prefactor.
    Literal,
}

/// Algorithm used for the radar covariance problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceMethod {
    /// Log-barrier interior point with Newton steps.
    #[default]
    Barrier,
    /// Scaled-form ADMM with residual balancing.
    Admm,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSettings {
    pub covariance_method: CovarianceMethod,
    /// Covariance solver tolerance in units of the design power: duality gap
    /// for the barrier method, primal and dual residuals for ADMM.
    pub covariance_tolerance: f64,
    pub admm_max_iterations: usize,
    /// Cap on Newton steps summed over all barrier stages.
    pub barrier_max_iterations: usize,
    pub rcg_max_iterations: usize,
    /// Gradient-norm tolerance of the RCG solver, relative to the sphere radius.
    pub rcg_grad_tolerance: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            covariance_method: CovarianceMethod::Barrier,
            covariance_tolerance: 1e-6,
            admm_max_iterations: 5000,
            barrier_max_iterations: 500,
            rcg_max_iterations: 500,
            rcg_grad_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_streams: usize,
    pub n_subcarriers: usize,
    pub n_jcas: usize,
    /// Transmit power budget `P_BS` (W).
    pub power_budget: f64,
    /// Noise power `sigma_n^2` (W).
    pub noise_power: f64,
    /// Sensing weight in `[0, 1]`.
    pub rho: f64,
    pub base_freq: f64,
    pub subcarrier_spacing: f64,
    /// Antenna spacing (m).
    pub antenna_spacing: f64,
    pub grid_size: usize,
    /// Mainlobe half-width (degrees).
    pub mainlobe_halfwidth: f64,
    /// Target directions (degrees).
    pub target_angles: Vec<f64>,
    /// Sensing tolerance `tau_0`; reported against, never used by the solver.
    pub sensing_tolerance: Option<f64>,
    pub rate_formula: RateFormula,
    pub solver: SolverSettings,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let n_subcarriers = 64;
        let base_freq = 2.0e9;
        let subcarrier_spacing = 100.0e3;
        SystemConfig {
            n_tx: 8,
            n_rx: 4,
            n_streams: 4,
            n_subcarriers,
            n_jcas: 16,
            power_budget: 10.0,
            noise_power: 1.0,
            rho: 0.5,
            base_freq,
            subcarrier_spacing,
            antenna_spacing: half_wavelength_at_top(base_freq, subcarrier_spacing, n_subcarriers),
            grid_size: 181,
            mainlobe_halfwidth: 8.0,
            target_angles: vec![-60.0, -30.0, 30.0, 60.0],
            sensing_tolerance: None,
            rate_formula: RateFormula::Consistent,
            solver: SolverSettings::default(),
            seed: 1,
        }
    }
}

/// `c / (2 f_K)`: half a wavelength at the highest subcarrier.
pub fn half_wavelength_at_top(base_freq: f64, spacing: f64, n_subcarriers: usize) -> f64 {
    let top = base_freq + (n_subcarriers.saturating_sub(1)) as f64 * spacing;
    SPEED_OF_LIGHT / (2.0 * top)
}

impl SystemConfig {
    pub fn rho_bar(&self) -> f64 {
        1.0 - self.rho
    }

    /// `P_BS / sigma_n^2`, in dB.
    pub fn snr_db(&self) -> f64 {
        10.0 * (self.power_budget / self.noise_power).log10()
    }

    /// Copy with `P_BS` set so that `P_BS / sigma_n^2` equals `snr_db`.
    pub fn with_snr_db(&self, snr_db: f64) -> Self {
        let mut out = self.clone();
        out.power_budget = self.noise_power * 10f64.powf(snr_db / 10.0);
        out
    }

    /// Squared Frobenius norm every designed precoder carries.
    pub fn design_power(&self) -> f64 {
        match self.rate_formula {
            RateFormula::Consistent => self.power_budget,
            RateFormula::Literal => 1.0,
        }
    }

    /// Factor multiplying `W^+ H F F^H H^H W` inside the rate log-det.
    pub fn rate_prefactor(&self) -> f64 {
        match self.rate_formula {
            RateFormula::Consistent => 1.0 / self.noise_power,
            RateFormula::Literal => {
                self.power_budget / (self.noise_power * self.n_streams as f64)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: usize| {
            if v == 0 {
                Err(JcasError::config(key, "must be a positive integer"))
            } else {
                Ok(())
            }
        };
        positive("n_tx", self.n_tx)?;
        positive("n_rx", self.n_rx)?;
        positive("n_streams", self.n_streams)?;
        positive("n_subcarriers", self.n_subcarriers)?;
        if self.n_streams > self.n_tx.min(self.n_rx) {
            return Err(JcasError::config(
                "n_streams",
                format!(
                    "{} exceeds min(n_tx, n_rx) = {}",
                    self.n_streams,
                    self.n_tx.min(self.n_rx)
                ),
            ));
        }
        if self.n_jcas > self.n_subcarriers {
            return Err(JcasError::config(
                "n_jcas",
                format!("{} exceeds n_subcarriers = {}", self.n_jcas, self.n_subcarriers),
            ));
        }
        let finite_positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(JcasError::config(key, format!("must be finite and > 0, got {v}")))
            }
        };
        finite_positive("power_budget", self.power_budget)?;
        finite_positive("noise_power", self.noise_power)?;
        finite_positive("base_freq", self.base_freq)?;
        finite_positive("antenna_spacing", self.antenna_spacing)?;
        if !(self.subcarrier_spacing.is_finite() && self.subcarrier_spacing >= 0.0) {
            return Err(JcasError::config("subcarrier_spacing", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(JcasError::config("rho", format!("{} is outside [0, 1]", self.rho)));
        }
        if self.grid_size < 2 {
            return Err(JcasError::config("grid_size", "need at least 2 angles"));
        }
        if !(self.mainlobe_halfwidth.is_finite() && self.mainlobe_halfwidth >= 0.0) {
            return Err(JcasError::config("mainlobe_halfwidth", "must be finite and >= 0"));
        }
        if self.target_angles.is_empty() {
            return Err(JcasError::config("target_angles", "at least one target is required"));
        }
        if let Some(bad) = self
            .target_angles
            .iter()
            .find(|t| !(-90.0..=90.0).contains(*t))
        {
            return Err(JcasError::config(
                "target_angles",
                format!("{bad} is outside [-90, 90] degrees"),
            ));
        }
        if let Some(tau) = self.sensing_tolerance {
            finite_positive("sensing_tolerance", tau)?;
        }
        let s = &self.solver;
        if s.admm_max_iterations == 0 {
            return Err(JcasError::config("admm_max_iterations", "must be positive"));
        }
        if s.barrier_max_iterations == 0 {
            return Err(JcasError::config("barrier_max_iterations", "must be positive"));
        }
        if s.rcg_max_iterations == 0 {
            return Err(JcasError::config("rcg_max_iterations", "must be positive"));
        }
        finite_positive("covariance_tolerance", s.covariance_tolerance)?;
        finite_positive("rcg_grad_tolerance", s.rcg_grad_tolerance)?;
        Ok(())
    }
}

/// Monte-Carlo sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSettings {
    pub snr_db: Vec<f64>,
    pub rho: Vec<f64>,
    pub jcas: Vec<usize>,
    pub realizations: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            snr_db: vec![0.0, 4.0, 8.0, 10.0, 12.0, 16.0, 20.0],
            rho: vec![0.25, 0.5, 0.75],
            jcas: vec![1, 8, 16, 24, 32, 40, 48, 56, 64],
            realizations: 100,
        }
    }
}

impl SweepSettings {
    pub fn validate(&self, n_subcarriers: usize) -> Result<()> {
        if self.snr_db.is_empty() {
            return Err(JcasError::config("snr_db", "list is empty"));
        }
        if let Some(s) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return Err(JcasError::config("snr_db", format!("{s} is not finite")));
        }
        if self.rho.is_empty() {
            return Err(JcasError::config("rho", "list is empty"));
        }
        if let Some(r) = self.rho.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(JcasError::config("rho", format!("{r} is outside [0, 1]")));
        }
        if self.jcas.is_empty() {
            return Err(JcasError::config("jcas", "list is empty"));
        }
        if let Some(j) = self.jcas.iter().find(|&&j| j > n_subcarriers) {
            return Err(JcasError::config(
                "jcas",
                format!("{j} exceeds n_subcarriers = {n_subcarriers}"),
            ));
        }
        if self.realizations == 0 {
            return Err(JcasError::config("realizations", "must be positive"));
        }
        Ok(())
    }
}

/// A parsed configuration file: the system plus its sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub sweep: SweepSettings,
}

impl ExperimentConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            JcasError::config("<file>", format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text)
            .map_err(|e| JcasError::config(offending_key(e.message()), e.message().trim()))?;
        file.resolve()
    }
}

fn offending_key(message: &str) -> String {
    // serde messages quote the key in backticks: "unknown field `foo`, ..."
    message
        .split('`')
        .nth(1)
        .map(str::to_owned)
        .unwrap_or_else(|| "<file>".to_owned())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    array: ArraySection,
    #[serde(default)]
    carrier: CarrierSection,
    #[serde(default)]
    power: PowerSection,
    #[serde(default)]
    sensing: SensingSection,
    #[serde(default)]
    solver: SolverSection,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    sweep: SweepSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArraySection {
    n_tx: Option<usize>,
    n_rx: Option<usize>,
    n_streams: Option<usize>,
    antenna_spacing: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CarrierSection {
    n_subcarriers: Option<usize>,
    base_freq: Option<f64>,
    subcarrier_spacing: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerSection {
    power_budget: Option<f64>,
    snr_db: Option<f64>,
    noise_power: Option<f64>,
    rate_formula: Option<RateFormula>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SensingSection {
    n_jcas: Option<usize>,
    rho: Option<f64>,
    grid_size: Option<usize>,
    mainlobe_halfwidth: Option<f64>,
    target_angles: Option<Vec<f64>>,
    sensing_tolerance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    covariance_method: Option<CovarianceMethod>,
    covariance_tolerance: Option<f64>,
    admm_max_iterations: Option<usize>,
    barrier_max_iterations: Option<usize>,
    rcg_max_iterations: Option<usize>,
    rcg_grad_tolerance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    snr_db: Option<Vec<f64>>,
    rho: Option<Vec<f64>>,
    jcas: Option<Vec<usize>>,
    realizations: Option<usize>,
}

fn required<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| JcasError::config(key, "required key is missing"))
}

impl ConfigFile {
    fn resolve(self) -> Result<ExperimentConfig> {
        let d = SystemConfig::default();
        let n_tx = required(self.array.n_tx, "n_tx")?;
        let n_rx = required(self.array.n_rx, "n_rx")?;
        let n_subcarriers = required(self.carrier.n_subcarriers, "n_subcarriers")?;
        let base_freq = self.carrier.base_freq.unwrap_or(d.base_freq);
        let subcarrier_spacing = self
            .carrier
            .subcarrier_spacing
            .unwrap_or(d.subcarrier_spacing);
        let noise_power = self.power.noise_power.unwrap_or(d.noise_power);
        let power_budget = match (self.power.power_budget, self.power.snr_db) {
            (Some(_), Some(_)) => {
                return Err(JcasError::config(
                    "snr_db",
                    "give either power_budget or snr_db, not both",
                ))
            }
            (Some(p), None) => p,
            (None, Some(s)) => noise_power * 10f64.powf(s / 10.0),
            (None, None) => d.power_budget,
        };
        let solver = SolverSettings {
            covariance_method: self
                .solver
                .covariance_method
                .unwrap_or(d.solver.covariance_method),
            covariance_tolerance: self
                .solver
                .covariance_tolerance
                .unwrap_or(d.solver.covariance_tolerance),
            admm_max_iterations: self
                .solver
                .admm_max_iterations
                .unwrap_or(d.solver.admm_max_iterations),
            barrier_max_iterations: self
                .solver
                .barrier_max_iterations
                .unwrap_or(d.solver.barrier_max_iterations),
            rcg_max_iterations: self
                .solver
                .rcg_max_iterations
                .unwrap_or(d.solver.rcg_max_iterations),
            rcg_grad_tolerance: self
                .solver
                .rcg_grad_tolerance
                .unwrap_or(d.solver.rcg_grad_tolerance),
        };
        let system = SystemConfig {
            n_tx,
            n_rx,
            n_streams: self.array.n_streams.unwrap_or(n_tx.min(n_rx)),
            n_subcarriers,
            n_jcas: self.sensing.n_jcas.unwrap_or(d.n_jcas.min(n_subcarriers)),
            power_budget,
            noise_power,
            rho: self.sensing.rho.unwrap_or(d.rho),
            base_freq,
            subcarrier_spacing,
            antenna_spacing: self.array.antenna_spacing.unwrap_or_else(|| {
                half_wavelength_at_top(base_freq, subcarrier_spacing, n_subcarriers)
            }),
            grid_size: self.sensing.grid_size.unwrap_or(d.grid_size),
            mainlobe_halfwidth: self
                .sensing
                .mainlobe_halfwidth
                .unwrap_or(d.mainlobe_halfwidth),
            target_angles: self.sensing.target_angles.unwrap_or(d.target_angles),
            sensing_tolerance: self.sensing.sensing_tolerance,
            rate_formula: self.power.rate_formula.unwrap_or_default(),
            solver,
            seed: self.run.seed.unwrap_or(d.seed),
        };
        system.validate()?;

        let ds = SweepSettings::default();
        let sweep = SweepSettings {
            snr_db: self.sweep.snr_db.unwrap_or(ds.snr_db),
            rho: self.sweep.rho.unwrap_or(ds.rho),
            jcas: self
                .sweep
                .jcas
                .unwrap_or_else(|| default_jcas_grid(system.n_subcarriers)),
            realizations: self.sweep.realizations.unwrap_or(ds.realizations),
        };
        sweep.validate(system.n_subcarriers)?;
        Ok(ExperimentConfig { system, sweep })
    }
}

/// `{1, 8, 16, ..., K}` clipped to the carrier count.
pub fn default_jcas_grid(n_subcarriers: usize) -> Vec<usize> {
    let mut out = vec![1];
    out.extend((8..=n_subcarriers).step_by(8));
    if *out.last().unwrap() != n_subcarriers {
        out.push(n_subcarriers);
    }
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[array]\nn_tx = 8\nn_rx = 4\n[carrier]\nn_subcarriers = 64\n";

    #[test]
    fn minimal_file_gets_reference_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        let mut expected = SystemConfig::default();
        expected.seed = cfg.system.seed;
        assert_eq!(cfg.system, expected);
        assert_eq!(cfg.sweep.jcas, vec![1, 8, 16, 24, 32, 40, 48, 56, 64]);
    }

    #[test]
    fn default_spacing_is_half_wavelength_at_top_carrier() {
        let d = SystemConfig::default();
        let f_top = 2.0e9 + 63.0 * 100.0e3;
        assert!((d.antenna_spacing - 3.0e8 / (2.0 * f_top)).abs() < 1e-15);
    }

    #[test]
    fn missing_n_tx_is_named() {
        let err = ExperimentConfig::from_toml_str("[array]\nn_rx = 4\n[carrier]\nn_subcarriers = 4\n")
            .unwrap_err();
        assert!(matches!(&err, JcasError::Config { key, .. } if key == "n_tx"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = format!("{MINIMAL}[sensing]\nbogus_key = 3\n");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("bogus_key"), "{err}");
        assert!(err.is_config());
    }

    #[test]
    fn jcas_above_k_is_rejected() {
        let text = "[array]\nn_tx = 2\nn_rx = 2\n[carrier]\nn_subcarriers = 4\n[sensing]\nn_jcas = 5\n";
        let err = ExperimentConfig::from_toml_str(text).unwrap_err();
        assert!(matches!(&err, JcasError::Config { key, .. } if key == "n_jcas"));
    }

    #[test]
    fn stream_count_bounded_by_array() {
        let mut c = SystemConfig::default();
        c.n_streams = 5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn rho_and_targets_checked() {
        let mut c = SystemConfig::default();
        c.rho = 1.5;
        assert!(c.validate().is_err());
        let mut c = SystemConfig::default();
        c.target_angles = vec![95.0];
        assert!(c.validate().is_err());
        let mut c = SystemConfig::default();
        c.target_angles.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn snr_key_sets_power() {
        let text = format!("{MINIMAL}[power]\nsnr_db = 20.0\nnoise_power = 2.0\n");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert!((cfg.system.power_budget - 200.0).abs() < 1e-9);
        assert!((cfg.system.snr_db() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn empty_sweep_list_rejected() {
        let text = format!("{MINIMAL}[sweep]\nrho = []\n");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(matches!(&err, JcasError::Config { key, .. } if key == "rho"));
    }
}
