//! Run configuration: a flat key-value file overlaid by command-line flags.
//!
//! Later sources win: built-in defaults, then the config file, then flags.
//! Unknown keys are rejected so that typos do not silently fall back to defaults.

use std::path::Path;

use crate::error::{Error, Result};
use crate::kv::KvMap;
use crate::speed_measure::{Interval, SpeedMeasure};

/// Every key a run config may contain. Keys under `measure.` describe a custom
/// speed measure in the [`SpeedMeasure::from_kv`] format.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "workers",
    "out",
    "format",
    "gamma",
    "interval",
    "x0",
    "points",
    "probes",
    "method",
    "spacing",
    "epsilon",
    "step",
    "horizon",
    "grid_points",
    "paths",
    "trials",
    "b",
    "n",
    "eta",
    "beta",
    "pilot_trials",
    "diagnostic_trials",
    "suite",
    "budget",
];

const MEASURE_PREFIX: &str = "measure.";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    map: KvMap,
}

impl RunConfig {
    pub fn from_map(map: KvMap) -> Result<Self> {
        for key in map.keys() {
            if !KNOWN_KEYS.contains(&key) && !key.starts_with(MEASURE_PREFIX) {
                return Err(Error::Config(format!("unknown key {key:?}")));
            }
        }
        let cfg = Self { map };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_map(KvMap::parse(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Resource(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies `overrides` on top of this config and revalidates.
    pub fn with_overrides(&self, overrides: &KvMap) -> Result<Self> {
        let mut map = self.map.clone();
        map.overlay(overrides);
        Self::from_map(map)
    }

    pub fn map(&self) -> &KvMap {
        &self.map
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key)
    }

    /// The master seed; there is no wall-clock fallback.
    pub fn seed(&self) -> Result<u64> {
        self.map
            .parsed::<u64>("seed")?
            .ok_or_else(|| Error::Config("a master seed is required (`seed = N` or --seed)".into()))
    }

    pub fn workers(&self) -> Result<Option<usize>> {
        match self.map.parsed::<usize>("workers")? {
            Some(0) => Err(Error::Config("workers must be at least 1".into())),
            w => Ok(w),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.map.parsed_or(key, default)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Config(format!("{key}: must be finite")))
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        self.map.parsed_or(key, default)
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        self.map.parsed(key)
    }

    pub fn list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        Ok(self.map.f64_list(key)?.unwrap_or_else(|| default.to_vec()))
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.map.get(key).unwrap_or(default)
    }

    pub fn gamma(&self) -> Result<f64> {
        let g = self.f64_or("gamma", 1.0)?;
        if g < 0.0 {
            return Err(Error::Config(format!("gamma must be >= 0, got {g}")));
        }
        Ok(g)
    }

    /// A custom measure when any `measure.` key is present, otherwise
    /// `dx + γ δ_0` (Lebesgue measure when `γ = 0`).
    pub fn measure(&self) -> Result<SpeedMeasure> {
        if self.map.keys().any(|k| k.starts_with(MEASURE_PREFIX)) {
            return SpeedMeasure::from_kv(&self.map, MEASURE_PREFIX);
        }
        let g = self.gamma()?;
        if g == 0.0 {
            Ok(SpeedMeasure::lebesgue())
        } else {
            SpeedMeasure::sticky(g).map_err(|e| Error::Config(e.to_string()))
        }
    }

    pub fn interval(&self) -> Result<Interval> {
        let v = self.list_or("interval", &[-1.0, 1.0])?;
        match v.as_slice() {
            [a, b] => Interval::new(*a, *b).map_err(|e| Error::Config(e.to_string())),
            _ => Err(Error::Config(format!("interval: expected [a, b], got {v:?}"))),
        }
    }

    fn validate(&self) -> Result<()> {
        self.workers()?;
        self.map.parsed::<u64>("seed")?;
        self.measure()?;
        self.interval()?;
        for key in ["x0", "spacing", "epsilon", "step", "horizon", "b", "eta", "beta"] {
            self.opt_f64(key)?;
        }
        for key in ["grid_points", "paths", "trials", "pilot_trials", "diagnostic_trials"] {
            self.map.parsed::<u64>(key)?;
        }
        for key in ["points", "probes", "n"] {
            self.map.f64_list(key)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = RunConfig::parse("seed = 7\ngamma = 2\n").unwrap();
        assert_eq!(cfg.seed().unwrap(), 7);
        assert_eq!(cfg.measure().unwrap(), SpeedMeasure::sticky(2.0).unwrap());
        let mut flags = KvMap::new();
        flags.set("seed", "9");
        let cfg = cfg.with_overrides(&flags).unwrap();
        assert_eq!(cfg.seed().unwrap(), 9);
        assert_eq!(cfg.interval().unwrap(), Interval::new(-1.0, 1.0).unwrap());
    }

    #[test]
    fn seed_is_mandatory() {
        let cfg = RunConfig::parse("gamma = 1").unwrap();
        assert!(matches!(cfg.seed(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_unknown_and_malformed_keys() {
        assert!(RunConfig::parse("seed = 1\ngama = 1").is_err());
        assert!(RunConfig::parse("seed = -1").is_err());
        assert!(RunConfig::parse("interval = [1, 0]").is_err());
        assert!(RunConfig::parse("workers = 0").is_err());
        assert!(RunConfig::parse("measure.density.levels = [1]").is_err());
    }

    #[test]
    fn custom_measure() {
        let cfg = RunConfig::parse("seed = 1\nmeasure.atoms = [(0, 0.5)]").unwrap();
        let m = cfg.measure().unwrap();
        assert_eq!(m.atoms().len(), 1);
        assert_eq!(m.atoms()[0].weight, 0.5);
    }

    #[test]
    fn gamma_zero_is_lebesgue() {
        let cfg = RunConfig::parse("seed = 1\ngamma = 0").unwrap();
        assert_eq!(cfg.measure().unwrap(), SpeedMeasure::lebesgue());
    }
}
