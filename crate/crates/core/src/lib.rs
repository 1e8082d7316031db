//! Joint communications and sensing (JCAS) beamformer design for
//! multi-carrier MIMO systems.
//!
//! A subset of the OFDM subcarriers (the JCAS set) carries a waveform that
//! also shapes a radar beampattern, while every subcarrier carries data. The
//! design runs in four stages:
//!
//! 1. eigenmode precoding with water-filling on every subcarrier
//!    ([`precoding`]),
//! 2. selection of the `J` weakest subcarriers ([`pipeline`]),
//! 3. radar covariance synthesis ([`covariance`]) followed by Riemannian
//!    conjugate-gradient refinement of the selected precoders ([`manifold`]),
//! 4. optimal combiners on the assembled precoders.
//!
//! [`evaluation`] measures rate and beampattern error and drives Monte-Carlo
//! sweeps; [`table`] and [`columnar`] hold the text formats.

pub mod array;
pub mod channel;
pub mod columnar;
pub mod config;
pub mod covariance;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod manifold;
pub mod pipeline;
pub mod precoding;
pub mod selfcheck;
pub mod table;

pub use array::{carrier_frequencies, desired_beampattern, steering_vector, BeamGrid};
pub use channel::{generate_rayleigh, realization_seed, ChannelSet};
pub use config::{CovarianceMethod, ExperimentConfig, RateFormula, SweepSettings, SystemConfig};
pub use covariance::{scaled_mask, solve_radar_covariance, CovarianceSettings, SolverIterate, CovarianceSet, CovarianceSolution};
pub use error::{JcasError, Result};
pub use evaluation::{beampattern_gain, beampattern_mse, sweep, ExperimentResult};
pub use linalg::{CMat, CVec, C64};
pub use manifold::{solve_rcg, RcgSettings, RcgTrace, SphereManifold};
pub use pipeline::{run_algorithm1, select_jcas_subcarriers, BeamformerSet, DesignOutput};
pub use precoding::{achievable_rate, eigenmode_precoder, optimal_combiner, waterfill};

/// Speed of light used for the array geometry (m/s).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;
