//! Euler–Maruyama simulation of `dX = σ_ε(X) dW`, where `σ_ε = √(ε/γ)` on the
//! band `|x| ≤ ε` and 1 elsewhere, and of the coupled `Y` driven by `σ_{2ε}`
//! with the same increments.
//!
//! [`Stepper`] adds optional leaping for long experiments: while both legs sit
//! well inside regions of constant coefficient, `k` Euler steps collapse into a
//! single `N(0, k·h)` draw. The leap size keeps every watched boundary at least
//! eight standard deviations away, so the result matches plain stepping in law
//! up to a crossing probability below `1e-14` per leap.

use std::fmt::Write as _;
use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::{substream, PathRng};
use crate::time_change::{sig17, Construction, PathMeta, SamplePath};

/// Largest number of grid points a materialized path may have.
pub const MAX_PATH_POINTS: u64 = 50_000_000;

/// Resolution rule `h ≤ ε²/25`.
pub const STEP_RATIO: f64 = 25.0;

pub fn sigma_eps(epsilon: f64, gamma: f64, x: f64) -> Result<f64> {
    if !(epsilon > 0.0 && gamma > 0.0) {
        return domain("epsilon and gamma must be positive");
    }
    if epsilon > gamma {
        return domain(format!("epsilon {epsilon} exceeds gamma {gamma}"));
    }
    Ok(if x.abs() <= epsilon { (epsilon / gamma).sqrt() } else { 1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegConfig {
    pub epsilon: f64,
    pub gamma: f64,
    pub step: f64,
    pub horizon: f64,
    pub x0: f64,
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
}

impl RegConfig {
    /// Config with the coarsest admissible step `ε²/25`.
    pub fn new(epsilon: f64, gamma: f64, horizon: f64, x0: f64, seed: u64) -> Self {
        Self { epsilon, gamma, step: epsilon * epsilon / STEP_RATIO, horizon, x0, seed, stream: 0 }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let Self { epsilon, gamma, step, horizon, x0, .. } = *self;
        if !(epsilon.is_finite() && epsilon > 0.0 && gamma.is_finite() && gamma > 0.0) {
            return domain("epsilon and gamma must be finite and positive");
        }
        if epsilon > gamma {
            return domain(format!("epsilon {epsilon} exceeds gamma {gamma}"));
        }
        // Tolerate the rounding in ε²/25 itself.
        if !(step > 0.0 && step <= epsilon * epsilon / STEP_RATIO * (1.0 + 1e-12)) {
            return domain(format!("step {step} must lie in (0, ε²/25 = {}]", epsilon * epsilon / STEP_RATIO));
        }
        if !(horizon.is_finite() && horizon >= step * (1.0 - 1e-12)) {
            return domain(format!("horizon {horizon} must be at least one step"));
        }
        if !x0.is_finite() {
            return domain("x0 must be finite");
        }
        Ok(())
    }

    pub fn validate_coupled(&self) -> Result<()> {
        self.validate()?;
        if 2.0 * self.epsilon > self.gamma {
            return domain(format!("coupling needs 2ε ≤ γ, got ε = {}, γ = {}", self.epsilon, self.gamma));
        }
        Ok(())
    }

    /// Number of Euler steps up to the horizon.
    pub fn steps(&self) -> u64 {
        // Guard against 1.0000000000000002 style round-up.
        let r = self.horizon / self.step;
        let n = r.round();
        if (r - n).abs() < 1e-9 * n.max(1.0) {
            n as u64
        } else {
            r.floor() as u64
        }
    }

    fn materialized_steps(&self) -> Result<u64> {
        let n = self.steps();
        if n + 1 > MAX_PATH_POINTS {
            return Err(Error::Resource(format!(
                "{n} steps exceed the {MAX_PATH_POINTS}-point limit for stored paths"
            )));
        }
        Ok(n)
    }

    fn meta(&self) -> PathMeta {
        PathMeta::new(Construction::Regularized)
            .with("epsilon", self.epsilon)
            .with("gamma", self.gamma)
            .with("step", self.step)
            .with("x0", self.x0)
    }
}

pub fn simulate_reg(cfg: &RegConfig) -> Result<SamplePath> {
    cfg.validate()?;
    let n = cfg.materialized_steps()?;
    let band = (cfg.epsilon / cfg.gamma).sqrt();
    let sqrt_h = cfg.step.sqrt();
    let mut rng = substream(cfg.seed, cfg.stream);
    let mut x = cfg.x0;
    let mut values = Vec::with_capacity(n as usize + 1);
    values.push(x);
    for _ in 0..n {
        let dw = sqrt_h * rng.sample::<f64, _>(StandardNormal);
        let s = if x.abs() <= cfg.epsilon { band } else { 1.0 };
        x += s * dw;
        values.push(x);
    }
    let grid = (0..=n).map(|j| j as f64 * cfg.step).collect();
    SamplePath::new(grid, values, cfg.meta())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledPath {
    pub grid: Vec<f64>,
    pub x_values: Vec<f64>,
    pub y_values: Vec<f64>,
    pub z_values: Vec<f64>,
}

impl CoupledPath {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Uniform step `h` (the second grid point).
    pub fn step(&self) -> f64 {
        self.grid.get(1).copied().unwrap_or(0.0)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut buf = String::from("t,x,y,z\n");
        for j in 0..self.grid.len() {
            let _ = writeln!(
                buf,
                "{},{},{},{}",
                sig17(self.grid[j]),
                sig17(self.x_values[j]),
                sig17(self.y_values[j]),
                sig17(self.z_values[j])
            );
        }
        out.write_all(buf.as_bytes())
    }
}

pub fn simulate_coupled(cfg: &RegConfig) -> Result<CoupledPath> {
    cfg.validate_coupled()?;
    let n = cfg.materialized_steps()?;
    let stepper = Stepper::new(cfg, false)?;
    let mut rng = substream(cfg.seed, cfg.stream);
    let mut st = CoupledState::start(cfg.x0);
    let cap = n as usize + 1;
    let (mut xs, mut ys, mut zs) = (Vec::with_capacity(cap), Vec::with_capacity(cap), Vec::with_capacity(cap));
    for j in 0..=n {
        if j > 0 {
            stepper.step(&mut st, &mut rng);
        }
        xs.push(st.x);
        ys.push(st.y);
        zs.push(st.x - st.y);
    }
    let grid = (0..=n).map(|j| j as f64 * cfg.step).collect();
    Ok(CoupledPath { grid, x_values: xs, y_values: ys, z_values: zs })
}

/// State of the coupled pair during a streamed run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledState {
    pub x: f64,
    pub y: f64,
    /// Euler steps taken so far.
    pub steps: u64,
    /// Steps that began with `|x| ≤ ε` or `|y| ≤ 2ε`; `J = j_steps · h`.
    pub j_steps: u64,
}

impl CoupledState {
    pub fn start(x0: f64) -> Self {
        Self { x: x0, y: x0, steps: 0, j_steps: 0 }
    }

    pub fn z(&self) -> f64 {
        self.x - self.y
    }
}

/// Boundaries a leap must not cross, beyond the coefficient regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeapLimits {
    /// Steps left before the horizon.
    pub max_steps: u64,
    /// Distance from `Z` to the nearest level being watched.
    pub z_room: f64,
    /// Distance from `X` to the nearest level being watched.
    pub x_room: f64,
}

impl LeapLimits {
    pub fn steps(max_steps: u64) -> Self {
        Self { max_steps, z_room: f64::INFINITY, x_room: f64::INFINITY }
    }
}

/// Standard deviations kept between a leap and any boundary.
const LEAP_SIGMAS: f64 = 8.0;

#[derive(Debug, Clone, Copy)]
pub struct Stepper {
    eps: f64,
    h: f64,
    sqrt_h: f64,
    sx_band: f64,
    sy_band: f64,
    leap: bool,
}

impl Stepper {
    pub fn new(cfg: &RegConfig, leap: bool) -> Result<Self> {
        cfg.validate()?;
        let sy_band = if 2.0 * cfg.epsilon <= cfg.gamma { (2.0 * cfg.epsilon / cfg.gamma).sqrt() } else { 1.0 };
        Ok(Self {
            eps: cfg.epsilon,
            h: cfg.step,
            sqrt_h: cfg.step.sqrt(),
            sx_band: (cfg.epsilon / cfg.gamma).sqrt(),
            sy_band,
            leap,
        })
    }

    #[inline]
    fn coefficients(&self, st: &CoupledState) -> (f64, f64, bool) {
        let in_x = st.x.abs() <= self.eps;
        let in_y = st.y.abs() <= 2.0 * self.eps;
        (
            if in_x { self.sx_band } else { 1.0 },
            if in_y { self.sy_band } else { 1.0 },
            in_x || in_y,
        )
    }

    /// One plain Euler step of both legs.
    #[inline]
    pub fn step(&self, st: &mut CoupledState, rng: &mut PathRng) {
        let (sx, sy, in_j) = self.coefficients(st);
        let dw = self.sqrt_h * rng.sample::<f64, _>(StandardNormal);
        st.x += sx * dw;
        st.y += sy * dw;
        st.steps += 1;
        st.j_steps += in_j as u64;
    }

    /// Advances by one step, or by a leap of several when leaping is enabled and
    /// the limits allow it. Returns the number of Euler steps taken (0 only when
    /// `limits.max_steps` is 0).
    #[inline]
    pub fn advance(&self, st: &mut CoupledState, rng: &mut PathRng, limits: &LeapLimits) -> u64 {
        if limits.max_steps == 0 {
            return 0;
        }
        let k = if self.leap { self.leap_len(st, limits) } else { 1 };
        if k <= 1 {
            self.step(st, rng);
            return 1;
        }
        let (sx, sy, in_j) = self.coefficients(st);
        let dw = (k as f64 * self.h).sqrt() * rng.sample::<f64, _>(StandardNormal);
        st.x += sx * dw;
        st.y += sy * dw;
        st.steps += k;
        st.j_steps += if in_j { k } else { 0 };
        k
    }

    fn leap_len(&self, st: &CoupledState, limits: &LeapLimits) -> u64 {
        let (sx, sy, _) = self.coefficients(st);
        let rx = (st.x.abs() - self.eps).abs();
        let ry = (st.y.abs() - 2.0 * self.eps).abs();
        let mut sd = (rx / sx).min(ry / sy).min(limits.x_room / sx);
        let dz = (sx - sy).abs();
        if dz > 0.0 {
            sd = sd.min(limits.z_room / dz);
        }
        let sd = sd / LEAP_SIGMAS;
        let k = sd * sd / self.h;
        if k < 2.0 {
            1
        } else {
            (k as u64).min(limits.max_steps)
        }
    }
}

/// `X^ε_t` for a single leg, streamed with leaping.
pub fn sample_reg_at(cfg: &RegConfig, leap: bool) -> Result<f64> {
    let stepper = Stepper::new(cfg, leap)?;
    let mut rng = substream(cfg.seed, cfg.stream);
    let mut st = CoupledState::start(cfg.x0);
    let total = cfg.steps();
    while st.steps < total {
        let limits = LeapLimits::steps(total - st.steps);
        stepper.advance_x(&mut st, &mut rng, &limits);
    }
    Ok(st.x)
}

/// `X^ε_T` at the horizon for paths `0..paths` on substreams of `cfg.seed`, in path order.
pub fn sample_reg_batch(cfg: &RegConfig, paths: u64) -> Result<Vec<f64>> {
    cfg.validate()?;
    (0..paths).into_par_iter().map(|p| sample_reg_at(&cfg.with_stream(p), true)).collect()
}

impl Stepper {
    /// Like [`Stepper::advance`] but only the `X` leg's regions limit the leap.
    /// The `Y` leg is carried along with the same increments and is not meaningful.
    #[inline]
    pub fn advance_x(&self, st: &mut CoupledState, rng: &mut PathRng, limits: &LeapLimits) -> u64 {
        if limits.max_steps == 0 {
            return 0;
        }
        let in_x = st.x.abs() <= self.eps;
        let sx = if in_x { self.sx_band } else { 1.0 };
        let mut k = 1u64;
        if self.leap {
            let sd = ((st.x.abs() - self.eps).abs() / sx).min(limits.x_room / sx) / LEAP_SIGMAS;
            let kf = sd * sd / self.h;
            if kf >= 2.0 {
                k = (kf as u64).min(limits.max_steps);
            }
        }
        let dw = (k as f64 * self.h).sqrt() * rng.sample::<f64, _>(StandardNormal);
        st.x += sx * dw;
        st.steps += k;
        st.j_steps += if in_x { k } else { 0 };
        k
    }
}
