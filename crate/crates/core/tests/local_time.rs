use stickylab::lattice_walk::{local_time_at, simulate_walk, WalkConfig};
use stickylab::rng::derive_seed;
use stickylab::stats::mc_mean;

/// `E L^0_1 = sqrt(2/π)` for Brownian motion; the walk's visit count times
/// the spacing estimates it.
#[test]
fn walk_local_time_at_origin_has_brownian_mean() {
    let spacing = 0.01;
    let steps = 10_000;
    let seed = derive_seed(11, "local-time");
    let samples: Vec<f64> = (0..4000)
        .map(|p| {
            let walk = simulate_walk(&WalkConfig::new(spacing, steps, 0.0, seed).with_stream(p)).unwrap();
            local_time_at(&walk, 0.0, steps as usize).unwrap()
        })
        .collect();
    let e = mc_mean(&samples).unwrap();
    let target = (2.0 / std::f64::consts::PI).sqrt();
    // Lattice bias of the visit-count estimator is O(δ).
    assert!(e.agrees_with(target, 2.0 * spacing), "{} vs {target} (se {})", e.mean, e.se);
}
