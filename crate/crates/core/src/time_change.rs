//! Sticky diffusions as time-changed lattice walks.
//!
//! The clock is `α_k = Σ_{j=1..k} w(s_j)` where `s_j` is the site reached at step
//! `j` and `w(s) = δ·m([s − δ/2, s + δ/2])`, i.e. `δ²·density + δ·atom weight`.
//! The sample path holds `positions[k]` on `(α_{k-1}, α_k]`, so sites carrying
//! an atom hold the path for an extra `γδ` per visit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::lattice_walk::{lattice_index, LatticeWalk, StepStream};
use crate::rng::{substream, PathRng};
use crate::speed_measure::{Interval, SpeedMeasure};

/// Per-site clock increments `w(s)` for a measure on a given lattice.
#[derive(Debug, Clone)]
pub struct SiteWeights {
    spacing: f64,
    measure: SpeedMeasure,
    atoms: BTreeMap<i64, f64>,
}

impl SiteWeights {
    /// Snaps every atom to its nearest lattice site.
    pub fn new(measure: &SpeedMeasure, spacing: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return domain(format!("spacing must be positive, got {spacing}"));
        }
        let mut atoms = BTreeMap::new();
        for atom in measure.atoms() {
            let site = (atom.location / spacing).round();
            if (site * spacing - atom.location).abs() > 0.5 * spacing * (1.0 + 1e-12) {
                return domain(format!("atom at {} cannot be snapped to the lattice", atom.location));
            }
            if atoms.insert(site as i64, atom.weight).is_some() {
                return domain(format!(
                    "two atoms snap to the same site {}; refine the spacing",
                    site * spacing
                ));
            }
        }
        Ok(Self { spacing, measure: measure.clone(), atoms })
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// `w(i·δ)`.
    pub fn weight(&self, index: i64) -> f64 {
        let d = self.spacing;
        let centre = index as f64 * d;
        let (lo, hi) = (centre - 0.5 * d, centre + 0.5 * d);
        let density = self.measure.density();
        let bps = density.breakpoints();
        let split = bps.iter().any(|&b| lo < b && b < hi);
        let cell = if split { d * density.mass(lo, hi) } else { d * d * density.level_at(centre) };
        cell + d * self.atoms.get(&index).copied().unwrap_or(0.0)
    }

    /// Dense table of weights for indices `lo..=hi`.
    pub fn table(&self, lo: i64, hi: i64) -> Vec<f64> {
        (lo..=hi).map(|i| self.weight(i)).collect()
    }

    /// Smallest weight any site can carry, `δ² · min density`.
    pub fn min_weight(&self) -> f64 {
        let density = self.measure.density();
        let min = density.levels().iter().copied().fold(density.default_level(), f64::min);
        self.spacing * self.spacing * min
    }
}

/// Weight table over a window of lattice indices that grows on demand.
pub struct WeightCache<'w> {
    weights: &'w SiteWeights,
    lo: i64,
    table: Vec<f64>,
}

impl<'w> WeightCache<'w> {
    pub fn new(weights: &'w SiteWeights, centre: i64, half_width: i64) -> Self {
        let lo = centre - half_width;
        Self { weights, lo, table: weights.table(lo, centre + half_width) }
    }

    #[inline]
    pub fn get(&mut self, index: i64) -> f64 {
        let off = index - self.lo;
        if off >= 0 && (off as usize) < self.table.len() {
            return self.table[off as usize];
        }
        self.grow(index);
        self.table[(index - self.lo) as usize]
    }

    fn grow(&mut self, index: i64) {
        let hi = self.lo + self.table.len() as i64 - 1;
        let pad = self.table.len() as i64;
        if index < self.lo {
            let new_lo = index - pad;
            let mut front = self.weights.table(new_lo, self.lo - 1);
            front.append(&mut self.table);
            self.table = front;
            self.lo = new_lo;
        } else {
            let extra = self.weights.table(hi + 1, index + pad);
            self.table.extend(extra);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clock {
    alphas: Vec<f64>,
}

impl Clock {
    pub fn from_alphas(alphas: Vec<f64>) -> Result<Self> {
        if alphas.first() != Some(&0.0) {
            return domain("a clock starts at 0");
        }
        if alphas.windows(2).any(|w| !(w[1] >= w[0])) {
            return domain("clock values must be nondecreasing");
        }
        Ok(Self { alphas })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn total(&self) -> f64 {
        *self.alphas.last().expect("nonempty")
    }

    fn check(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) {
            return domain(format!("time must be nonnegative, got {t}"));
        }
        if t > self.total() {
            return Err(Error::Range(format!("time {t} beyond the clock's end {}", self.total())));
        }
        Ok(())
    }

    /// Smallest `k` with `α_k ≥ t`: the step whose position the path holds at `t`.
    pub fn occupant(&self, t: f64) -> Result<usize> {
        self.check(t)?;
        Ok(self.alphas.partition_point(|&a| a < t))
    }
}

pub fn build_clock(walk: &LatticeWalk, m: &SpeedMeasure) -> Result<Clock> {
    let weights = SiteWeights::new(m, walk.spacing())?;
    let (lo, hi) = walk.range();
    let table = weights.table(lo, hi);
    let mut alphas = Vec::with_capacity(walk.indices().len());
    // Compensated running sum, so long clocks stay accurate to a few ulps.
    let (mut acc, mut comp) = (0.0f64, 0.0f64);
    alphas.push(acc);
    for &i in &walk.indices()[1..] {
        let w = table[(i - lo) as usize];
        let next = acc + w;
        comp += if acc.abs() >= w.abs() { (acc - next) + w } else { (w - next) + acc };
        acc = next;
        alphas.push(acc + comp);
    }
    Ok(Clock { alphas })
}

/// Largest `k` with `α_k ≤ t`.
pub fn invert_clock(clock: &Clock, t: f64) -> Result<usize> {
    clock.check(t)?;
    Ok(clock.alphas.partition_point(|&a| a <= t) - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Construction {
    TimeChange,
    Regularized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMeta {
    pub construction: Construction,
    pub params: BTreeMap<String, f64>,
}

impl PathMeta {
    pub fn new(construction: Construction) -> Self {
        Self { construction, params: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    grid: Vec<f64>,
    values: Vec<f64>,
    meta: PathMeta,
}

impl SamplePath {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, meta: PathMeta) -> Result<Self> {
        if grid.len() != values.len() {
            return domain(format!("grid has {} points but {} values", grid.len(), values.len()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("grid must be strictly increasing");
        }
        Ok(Self { grid, values, meta })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn meta(&self) -> &PathMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut buf = String::from("t,x\n");
        for (t, x) in self.grid.iter().zip(&self.values) {
            let _ = writeln!(buf, "{},{}", sig17(*t), sig17(*x));
        }
        out.write_all(buf.as_bytes())
    }
}

/// Decimal with 17 significant digits, enough to round-trip any `f64`.
pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Samples `X_t = positions[occupant(t)]` on `grid`.
pub fn sticky_path(walk: &LatticeWalk, m: &SpeedMeasure, grid: &[f64]) -> Result<SamplePath> {
    let clock = build_clock(walk, m)?;
    let values = grid
        .iter()
        .map(|&t| clock.occupant(t).map(|k| walk.position(k)))
        .collect::<Result<Vec<_>>>()?;
    let meta = PathMeta::new(Construction::TimeChange)
        .with("spacing", walk.spacing())
        .with("x0", walk.position(0));
    SamplePath::new(grid.to_vec(), values, meta)
}

/// The path observed at its own jump times `α_0 < α_1 < …`, which represents it
/// exactly: the value at `α_k` is held on `(α_{k-1}, α_k]`.
pub fn sticky_path_events(walk: &LatticeWalk, m: &SpeedMeasure) -> Result<SamplePath> {
    let clock = build_clock(walk, m)?;
    let meta = PathMeta::new(Construction::TimeChange)
        .with("spacing", walk.spacing())
        .with("x0", walk.position(0));
    SamplePath::new(clock.alphas, walk.positions(), meta)
}

/// Walk length after which the clock is guaranteed to exceed `t`.
pub fn steps_for_horizon(m: &SpeedMeasure, spacing: f64, t: f64) -> Result<u64> {
    let w = SiteWeights::new(m, spacing)?.min_weight();
    let steps = (t / w).ceil() + 1.0;
    if !(steps.is_finite() && steps < 1e15) {
        return domain(format!("horizon {t} is out of reach at spacing {spacing}"));
    }
    Ok(steps as u64)
}

/// A walk run from `x0` until it first hits an endpoint of `[lo, hi]`,
/// keeping only the number of arrivals per site.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitCounts {
    /// Lattice index of the left endpoint; `counts[i]` refers to index `lo + i`.
    pub lo: i64,
    /// Arrivals at steps `1..K`, where `K` is the exit step (the exit arrival is excluded).
    pub counts: Vec<u32>,
    /// `Some(true)` for the right endpoint, `Some(false)` for the left, `None` if censored.
    pub exit_right: Option<bool>,
    pub steps: u64,
}

impl ExitCounts {
    /// `α_{K-1}`, the exit time `inf{t : X_t ∉ (a, b)}`.
    pub fn exit_time(&self, table: &[f64]) -> f64 {
        self.counts.iter().zip(table).map(|(&c, &w)| c as f64 * w).sum()
    }

    /// Time spent at lattice index `index` before exit.
    pub fn time_at(&self, table: &[f64], index: i64) -> f64 {
        let off = (index - self.lo) as usize;
        self.counts.get(off).map_or(0.0, |&c| c as f64 * table[off])
    }

    /// `∫_0^τ f(X_s) ds`, with `f` given per site.
    pub fn occupation(&self, table: &[f64], f: &[f64]) -> f64 {
        self.counts.iter().zip(table).zip(f).map(|((&c, &w), &v)| c as f64 * w * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitConfig {
    pub spacing: f64,
    pub interval: Interval,
    pub x0: f64,
    pub seed: u64,
    /// Censoring cap on walk steps.
    pub max_steps: u64,
}

impl ExitConfig {
    /// Lattice indices `(lo, start, hi)`.
    pub fn indices(&self) -> Result<(i64, i64, i64)> {
        let lo = lattice_index(self.spacing, self.interval.a())?;
        let hi = lattice_index(self.spacing, self.interval.b())?;
        let start = lattice_index(self.spacing, self.x0)?;
        if !(lo < start && start < hi) {
            return domain(format!("start {} must lie strictly inside the interval", self.x0));
        }
        Ok((lo, start, hi))
    }

    /// Site coordinates `lo..=hi` matching [`ExitCounts::counts`].
    pub fn sites(&self) -> Result<Vec<f64>> {
        let (lo, _, hi) = self.indices()?;
        Ok((lo..=hi).map(|i| i as f64 * self.spacing).collect())
    }

    /// Weight table aligned with [`ExitCounts::counts`].
    pub fn table(&self, m: &SpeedMeasure) -> Result<Vec<f64>> {
        let (lo, _, hi) = self.indices()?;
        Ok(SiteWeights::new(m, self.spacing)?.table(lo, hi))
    }
}

pub fn simulate_exit_counts(cfg: &ExitConfig, stream: u64) -> Result<ExitCounts> {
    let (lo, start, hi) = cfg.indices()?;
    let mut counts = vec![0u32; (hi - lo + 1) as usize];
    let mut steps = StepStream::from_seed(cfg.seed, stream);
    let (top, mut pos) = ((hi - lo) as usize, (start - lo) as usize);
    let mut k = 0u64;
    let exit_right = loop {
        if k == cfg.max_steps {
            break None;
        }
        k += 1;
        pos = (pos as i64 + steps.next_step()) as usize;
        if pos == 0 {
            break Some(false);
        }
        if pos == top {
            break Some(true);
        }
        counts[pos] += 1;
    };
    Ok(ExitCounts { lo, counts, exit_right, steps: k })
}

/// Runs paths `0..paths` in parallel and maps each through `f`, in path order.
pub fn exit_batch<T, F>(cfg: &ExitConfig, paths: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(ExitCounts) -> T + Sync,
{
    cfg.indices()?;
    (0..paths).into_par_iter().map(|p| simulate_exit_counts(cfg, p).map(&f)).collect()
}

/// Streams a walk from `x0` and returns `X_t`, without storing the path.
pub fn sample_at_time(weights: &SiteWeights, x0: f64, t: f64, rng: PathRng) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return domain(format!("time must be finite and nonnegative, got {t}"));
    }
    let start = lattice_index(weights.spacing(), x0)?;
    let mut cache = WeightCache::new(weights, start, 64);
    let mut steps = StepStream::new(rng);
    let (mut i, mut alpha) = (start, 0.0);
    while alpha < t {
        i += steps.next_step();
        alpha += cache.get(i);
    }
    Ok(i as f64 * weights.spacing())
}

/// `X_t` for paths `0..paths` from substreams of `seed`, in path order.
pub fn sample_batch_at_time(m: &SpeedMeasure, spacing: f64, x0: f64, t: f64, seed: u64, paths: u64) -> Result<Vec<f64>> {
    let weights = SiteWeights::new(m, spacing)?;
    (0..paths)
        .into_par_iter()
        .map(|p| sample_at_time(&weights, x0, t, substream(seed, p)))
        .collect()
}
