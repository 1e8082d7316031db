//! Shared fixtures for the criterion benches.

use jcas_core::{generate_rayleigh, ChannelSet, SystemConfig};

/// Reference 8x4, 64-subcarrier setup at 10 dB with one channel draw.
pub fn reference_fixture() -> (SystemConfig, ChannelSet) {
    let cfg = SystemConfig::default();
    let channels = generate_rayleigh(&cfg, 1);
    (cfg, channels)
}
