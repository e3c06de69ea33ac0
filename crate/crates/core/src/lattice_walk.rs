//! Simple random walks on the lattice `δℤ` with exact visit counts.
//!
//! One step moves by `±δ` and advances model time by `δ²`, so `δ` times the
//! number of arrivals at a site approximates the Brownian local time there.

use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::{substream, PathRng};

/// Default cap on the memory a materialized walk may use.
pub const DEFAULT_MEMORY_BUDGET: usize = 512 << 20;

/// Relative tolerance used when checking that a coordinate is a lattice point.
const LATTICE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub spacing: f64,
    pub steps: u64,
    pub origin: f64,
    pub seed: u64,
    /// Substream index, one per path in a batch.
    #[serde(default)]
    pub stream: u64,
}

impl WalkConfig {
    pub fn new(spacing: f64, steps: u64, origin: f64, seed: u64) -> Self {
        Self { spacing, steps, origin, seed, stream: 0 }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return domain(format!("spacing must be positive, got {}", self.spacing));
        }
        lattice_index(self.spacing, self.origin).map(|_| ())
    }
}

/// Index `i` with `x = i·δ`, or a domain error if `x` is off the lattice.
pub fn lattice_index(spacing: f64, x: f64) -> Result<i64> {
    let r = x / spacing;
    let i = r.round();
    if !r.is_finite() || i.abs() > (1u64 << 52) as f64 {
        return domain(format!("{x} is not representable on the lattice of spacing {spacing}"));
    }
    if (r - i).abs() > LATTICE_TOL * r.abs().max(1.0) {
        return domain(format!("{x} is not a multiple of the spacing {spacing}"));
    }
    Ok(i as i64)
}

/// Fair ±1 steps drawn one bit at a time from a 64-bit generator.
pub struct StepStream {
    rng: PathRng,
    bits: u64,
    left: u32,
}

impl StepStream {
    pub fn new(rng: PathRng) -> Self {
        Self { rng, bits: 0, left: 0 }
    }

    pub fn from_seed(seed: u64, stream: u64) -> Self {
        Self::new(substream(seed, stream))
    }

    /// Next step: `+1` for a set bit, `-1` otherwise.
    #[inline]
    pub fn next_step(&mut self) -> i64 {
        if self.left == 0 {
            self.bits = self.rng.next_u64();
            self.left = 64;
        }
        let up = (self.bits & 1) as i64;
        self.bits >>= 1;
        self.left -= 1;
        2 * up - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeWalk {
    config: WalkConfig,
    /// Absolute lattice indices; position `k` is `indices[k]·spacing`.
    indices: Vec<i64>,
    visit_counts: BTreeMap<i64, u64>,
}

impl LatticeWalk {
    /// Builds a walk from explicit lattice indices (e.g. hand-made test paths).
    pub fn from_indices(spacing: f64, indices: Vec<i64>) -> Result<Self> {
        let Some(&first) = indices.first() else {
            return domain("a walk needs at least its starting point");
        };
        if indices.windows(2).any(|w| (w[1] - w[0]).abs() != 1) {
            return domain("walk increments must be exactly one lattice step");
        }
        let config = WalkConfig::new(spacing, indices.len() as u64 - 1, first as f64 * spacing, 0);
        config.validate()?;
        let mut visit_counts = BTreeMap::new();
        for &i in &indices {
            *visit_counts.entry(i).or_insert(0) += 1;
        }
        Ok(Self { config, indices, visit_counts })
    }

    pub fn config(&self) -> &WalkConfig {
        &self.config
    }

    pub fn spacing(&self) -> f64 {
        self.config.spacing
    }

    pub fn steps(&self) -> usize {
        self.indices.len() - 1
    }

    pub fn indices(&self) -> &[i64] {
        &self.indices
    }

    pub fn position(&self, k: usize) -> f64 {
        self.indices[k] as f64 * self.config.spacing
    }

    pub fn positions(&self) -> Vec<f64> {
        self.indices.iter().map(|&i| i as f64 * self.config.spacing).collect()
    }

    /// Arrivals per lattice index over the whole walk, including step 0.
    pub fn visit_counts(&self) -> &BTreeMap<i64, u64> {
        &self.visit_counts
    }

    /// `(min, max)` lattice index reached.
    pub fn range(&self) -> (i64, i64) {
        let lo = *self.visit_counts.keys().next().expect("nonempty");
        let hi = *self.visit_counts.keys().next_back().expect("nonempty");
        (lo, hi)
    }

    /// Little-endian dump of the lattice indices.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.indices.iter().flat_map(|i| i.to_le_bytes()).collect()
    }
}

pub fn simulate_walk(config: &WalkConfig) -> Result<LatticeWalk> {
    simulate_walk_with_budget(config, DEFAULT_MEMORY_BUDGET)
}

pub fn simulate_walk_with_budget(config: &WalkConfig, budget_bytes: usize) -> Result<LatticeWalk> {
    config.validate()?;
    let need = (config.steps as u128 + 1) * std::mem::size_of::<i64>() as u128;
    if need > budget_bytes as u128 {
        return Err(Error::Resource(format!(
            "{} steps need {need} bytes, budget is {budget_bytes}",
            config.steps
        )));
    }
    let start = lattice_index(config.spacing, config.origin)?;
    let mut steps = StepStream::from_seed(config.seed, config.stream);
    let mut indices = Vec::with_capacity(config.steps as usize + 1);
    let mut i = start;
    indices.push(i);
    for _ in 0..config.steps {
        i += steps.next_step();
        indices.push(i);
    }
    // Dense counting over the visited range, then a sparse map of visited sites.
    let lo = indices.iter().min().copied().unwrap_or(start);
    let hi = indices.iter().max().copied().unwrap_or(start);
    let mut dense = vec![0u64; (hi - lo + 1) as usize];
    for &j in &indices {
        dense[(j - lo) as usize] += 1;
    }
    let visit_counts = dense
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(off, &c)| (lo + off as i64, c))
        .collect();
    Ok(LatticeWalk { config: *config, indices, visit_counts })
}

/// `δ · #{k ≤ upto_step : position_k = site}`.
pub fn local_time_at(walk: &LatticeWalk, site: f64, upto_step: usize) -> Result<f64> {
    let target = lattice_index(walk.spacing(), site)?;
    if upto_step > walk.steps() {
        return Err(Error::Range(format!("step {upto_step} beyond walk length {}", walk.steps())));
    }
    let count = if upto_step == walk.steps() {
        walk.visit_counts.get(&target).copied().unwrap_or(0) as usize
    } else {
        walk.indices[..=upto_step].iter().filter(|&&i| i == target).count()
    };
    Ok(count as f64 * walk.spacing())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_steps() {
        let w = simulate_walk(&WalkConfig::new(1.0, 0, 0.0, 7)).unwrap();
        assert_eq!(w.positions(), vec![0.0]);
        assert_eq!(w.visit_counts().iter().collect::<Vec<_>>(), vec![(&0, &1)]);
    }

    #[test]
    fn deterministic() {
        let cfg = WalkConfig::new(0.01, 1_000_000, 0.0, 42);
        assert_eq!(simulate_walk(&cfg).unwrap(), simulate_walk(&cfg).unwrap());
        assert_ne!(simulate_walk(&cfg).unwrap(), simulate_walk(&cfg.with_stream(1)).unwrap());
    }

    #[test]
    fn up_fraction_is_binomial() {
        let n = 100_000u64;
        let w = simulate_walk(&WalkConfig::new(1.0, n, 0.0, 3)).unwrap();
        let ups = w.indices().windows(2).filter(|p| p[1] > p[0]).count() as f64;
        let tol = 3.0 * 0.5 / (n as f64).sqrt();
        assert!((ups / n as f64 - 0.5).abs() < tol);
    }

    #[test]
    fn local_time_examples() {
        let w = LatticeWalk::from_indices(0.1, vec![0, 1, 0]).unwrap();
        assert!((local_time_at(&w, 0.0, 2).unwrap() - 0.2).abs() < 1e-15);
        assert!((local_time_at(&w, 0.0, 1).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(local_time_at(&w, 0.5, 2).unwrap(), 0.0);
        assert!(matches!(local_time_at(&w, 0.05, 2), Err(Error::Domain(_))));
        assert!(matches!(local_time_at(&w, 0.0, 3), Err(Error::Range(_))));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(simulate_walk(&WalkConfig::new(0.0, 5, 0.0, 1)).is_err());
        assert!(simulate_walk(&WalkConfig::new(0.1, 5, 0.05, 1)).is_err());
        let r = simulate_walk_with_budget(&WalkConfig::new(0.1, 1000, 0.0, 1), 1000);
        assert!(matches!(r, Err(Error::Resource(_))));
        assert!(LatticeWalk::from_indices(1.0, vec![0, 2]).is_err());
    }

    #[test]
    fn dump_is_little_endian_indices() {
        let w = LatticeWalk::from_indices(1.0, vec![0, -1]).unwrap();
        assert_eq!(w.to_le_bytes()[..8], 0i64.to_le_bytes());
        assert_eq!(w.to_le_bytes()[8..], (-1i64).to_le_bytes());
    }

    proptest! {
        #[test]
        fn walk_invariants(seed in any::<u64>(), steps in 0u64..2000, origin in -50i64..50) {
            let cfg = WalkConfig::new(0.25, steps, origin as f64 * 0.25, seed);
            let w = simulate_walk(&cfg).unwrap();
            prop_assert_eq!(w.indices()[0], origin);
            prop_assert!(w.indices().windows(2).all(|p| (p[1] - p[0]).abs() == 1));
            prop_assert_eq!(w.visit_counts().values().sum::<u64>(), steps + 1);
            // Discrete occupation identity: Σ counts·δ² = (steps+1)·δ².
            let occ: f64 = w.visit_counts().values().map(|&c| c as f64 * 0.0625).sum();
            prop_assert!((occ - (steps + 1) as f64 * 0.0625).abs() < 1e-9);
        }
    }
}
