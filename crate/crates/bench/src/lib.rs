//! Fixtures shared by the benchmarks.

use formctl_core::control::{build_uniform_system, FormationSystem};
use formctl_core::geometry::Configuration;
use formctl_core::graph::{build_from_henneberg, HennebergStep};

/// Strip of triangles on `n >= 3` agents with unit targets: vertex `k` is
/// attached to `k - 2` and `k - 1`.
pub fn strip_system(n: usize) -> FormationSystem {
    let steps: Vec<HennebergStep> = (3..=n).map(|k| HennebergStep::new(k, (k - 2, k - 1))).collect();
    build_uniform_system(&build_from_henneberg(n, &steps).unwrap(), 1.0).unwrap()
}

/// Deterministic generic configuration: a zig-zag with irregular spacing.
pub fn zigzag(n: usize) -> Configuration {
    let xy: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let i = i as f64;
            (0.55 * i + 0.07 * (1.3 * i).sin(), if (i as usize).is_multiple_of(2) { 0.0 } else { 0.8 } + 0.05 * (2.1 * i).cos())
        })
        .collect();
    Configuration::from_xy(&xy)
}

/// All agents on the x-axis, consecutive agents `0.9` apart.
pub fn on_line(n: usize) -> Configuration {
    Configuration::from_xy(&(0..n).map(|i| (0.9 * i as f64, 0.0)).collect::<Vec<_>>())
}
