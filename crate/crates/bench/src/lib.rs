//! Fixtures for the criterion benchmarks in `benches/`.

use doi_core::net::{gen_erdos_renyi, pagerank_default};
use doi_core::rng::stream;
use doi_core::simbench::{dgp_generate, BenchmarkConfig, DgpConfig};
use doi_core::{Dataset, FeatureSpec};

/// Scenario 1 on `ER(n, 10/n)` with PageRank scores attached.
pub fn scenario_one(n: usize, seed: u64) -> Dataset {
    let net = gen_erdos_renyi(n, 10.0 / n as f64, &mut stream(seed, &[1])).expect("valid graph");
    let pr = pagerank_default(&net).expect("nonempty graph");
    dgp_generate(
        &DgpConfig::default(),
        &net,
        Some(&pr),
        &mut stream(seed, &[2]),
    )
    .expect("valid dgp")
    .data
}

pub fn features() -> FeatureSpec {
    BenchmarkConfig::feature_spec()
}
