//! Shared fixtures for the benchmarks.

use txshare_core::{AcIndex, ObssLoad, ProtocolKind, ScenarioConfig};

/// A preset shortened to `secs` of simulated time.
pub fn short_preset(protocol: ProtocolKind, load: ObssLoad, secs: f64) -> ScenarioConfig {
    ScenarioConfig::preset(protocol, load, AcIndex::AC0).with_duration(secs)
}

/// Deterministic event times spread over one simulated second.
pub fn event_times(n: usize) -> Vec<u64> {
    (0..n as u64)
        .map(|i| i.wrapping_mul(0x9E37_79B9_7F4A_7C15) % 1_000_000_000)
        .collect()
}
