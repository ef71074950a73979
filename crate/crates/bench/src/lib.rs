//! Shared fixtures for the criterion benchmarks.

use specseg::synth::{generate, planted_scene, PlantedParams};
use specseg::Scene;

/// A planted scene of `size x size x channels` with three instances.
pub fn fixture(size: usize, channels: usize, seed: u64) -> Scene {
    let params = PlantedParams { size, channels, ..PlantedParams::default() };
    generate(&planted_scene(&params, 3, seed, false).expect("valid planted parameters")).expect("valid scene")
}
