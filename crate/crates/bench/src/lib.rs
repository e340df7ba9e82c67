//! Shared inputs for the benchmarks.

use coopoffload_core::{generate_synthetic, Network, PairContactParams, PathSpec, SyntheticConfig};

/// A relay hop followed by an infrastructure hop, in the synthetic ranges.
pub fn two_hop_path() -> PathSpec {
    let relay = PairContactParams::new(0.05, 8.0, 2.5, 1.0).expect("valid relay hop");
    let infra = PairContactParams::new(0.005, 3.5, 2.5, 1.0).expect("valid infrastructure hop");
    PathSpec::new(vec![relay, infra]).expect("non-empty path")
}

pub fn synthetic(n: usize) -> Network {
    generate_synthetic(&SyntheticConfig {
        n,
        ..SyntheticConfig::default()
    })
    .expect("default generator settings are valid")
}
