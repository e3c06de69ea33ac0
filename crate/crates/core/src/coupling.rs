//! The stopping-time ladder of the coupled pair and the divergence experiment.
//!
//! With `Z = X − Y`: `S_1` is the first time `|Z| ≥ 6ε`, `T_i` the first time
//! after `S_i` that `|Z| ≤ 4ε` or `|Z| ≥ b`, `S_{i+1}` the first time after `T_i`
//! that `|Z| ≥ 6ε`, and `U_b` the first time `|Z| ≥ b`. Once `|Z|` reaches `b`
//! every later `S_i` and `T_i` equals `U_b`, so the ladder stops there.
//! `J_t` is the time before `t` during which `|X| ≤ ε` or `|Y| ≤ 2ε`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::regularized_sde::{CoupledPath, CoupledState, LeapLimits, RegConfig, Stepper};
use crate::rng::substream;
use crate::stats::{mc_fraction, mc_mean, MCEstimate};

/// Trials below which reports are flagged as insufficient.
pub const MIN_TRIALS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StoppingLedger {
    pub s_times: Vec<u64>,
    pub t_times: Vec<u64>,
    pub u_b: Option<u64>,
    /// Last index examined.
    pub truncation: u64,
}

impl StoppingLedger {
    /// Whether `S_n < U_b`; `None` if the path ended before either was decided.
    pub fn s_before_u(&self, n: usize) -> Option<bool> {
        match (self.s_times.get(n.checked_sub(1)?), self.u_b) {
            (Some(&s), Some(u)) => Some(s < u),
            (Some(_), None) => Some(true),
            (None, Some(_)) => Some(false),
            (None, None) => None,
        }
    }

    /// Index of `T_n ∧ U_b`, if reached.
    pub fn t_or_u(&self, n: usize) -> Option<u64> {
        self.t_times.get(n.checked_sub(1)?).copied().or(self.u_b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    AwaitS,
    AwaitT,
    Done,
}

/// Streaming detector for the ladder on `|Z|` observed at successive indices.
#[derive(Debug, Clone)]
pub struct LadderTracker {
    upper: f64,
    lower: f64,
    b: f64,
    phase: Phase,
    ledger: StoppingLedger,
}

impl LadderTracker {
    pub fn new(epsilon: f64, b: f64) -> Result<Self> {
        if !(epsilon > 0.0 && b.is_finite()) {
            return domain("epsilon must be positive and b finite");
        }
        if b <= 6.0 * epsilon {
            return domain(format!("b = {b} must exceed 6ε = {}", 6.0 * epsilon));
        }
        Ok(Self { upper: 6.0 * epsilon, lower: 4.0 * epsilon, b, phase: Phase::AwaitS, ledger: StoppingLedger::default() })
    }

    pub fn observe(&mut self, index: u64, z: f64) {
        let a = z.abs();
        self.ledger.truncation = index;
        if self.phase == Phase::AwaitS && a >= self.upper {
            self.ledger.s_times.push(index);
            self.phase = Phase::AwaitT;
        }
        // T_i may coincide with S_i, so the same index is checked again.
        if self.phase == Phase::AwaitT && (a <= self.lower || a >= self.b) {
            self.ledger.t_times.push(index);
            if a >= self.b {
                self.ledger.u_b = Some(index);
                self.phase = Phase::Done;
            } else {
                self.phase = Phase::AwaitS;
            }
        }
    }

    /// `|Z|` distance to the nearest level that could trigger the next event.
    pub fn room(&self, z: f64) -> f64 {
        let a = z.abs();
        match self.phase {
            Phase::AwaitS => self.upper - a,
            Phase::AwaitT => (a - self.lower).min(self.b - a),
            Phase::Done => f64::INFINITY,
        }
    }

    pub fn done(&self) -> bool {
        self.phase == Phase::Done
    }

    pub fn ledger(&self) -> &StoppingLedger {
        &self.ledger
    }

    pub fn into_ledger(self) -> StoppingLedger {
        self.ledger
    }
}

pub fn detect_ledger(path: &CoupledPath, epsilon: f64, b: f64) -> Result<StoppingLedger> {
    let mut tracker = LadderTracker::new(epsilon, b)?;
    for (j, &z) in path.z_values.iter().enumerate() {
        if tracker.done() {
            break;
        }
        tracker.observe(j as u64, z);
    }
    let mut ledger = tracker.into_ledger();
    ledger.truncation = path.len().saturating_sub(1) as u64;
    Ok(ledger)
}

/// `J[j] = h·#{k < j : |x_k| ≤ ε or |y_k| ≤ 2ε}`.
pub fn occupation_j(path: &CoupledPath, epsilon: f64) -> Vec<f64> {
    let h = path.step();
    let mut out = Vec::with_capacity(path.len());
    let mut count = 0u64;
    out.push(0.0);
    for k in 1..path.len() {
        if path.x_values[k - 1].abs() <= epsilon || path.y_values[k - 1].abs() <= 2.0 * epsilon {
            count += 1;
        }
        out.push(count as f64 * h);
    }
    out
}

/// Ladder data of one streamed trial.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderTrial {
    pub ledger: StoppingLedger,
    /// `J` step count at each `T_i`.
    pub j_at_t: Vec<u64>,
}

impl LadderTrial {
    /// `J_{T_n ∧ U_b}` in model time, if reached.
    pub fn j_at(&self, n: usize, h: f64) -> Option<f64> {
        let i = n.checked_sub(1)?;
        let steps = self.j_at_t.get(i).or_else(|| self.ledger.u_b.and(self.j_at_t.last()))?;
        Some(*steps as f64 * h)
    }
}

/// Runs one coupled trial until `T_{n_max}`, `U_b` or the horizon.
pub fn run_ladder_trial(cfg: &RegConfig, b: f64, n_max: usize, leap: bool) -> Result<LadderTrial> {
    cfg.validate_coupled()?;
    let stepper = Stepper::new(cfg, leap)?;
    let mut tracker = LadderTracker::new(cfg.epsilon, b)?;
    let mut rng = substream(cfg.seed, cfg.stream);
    let mut st = CoupledState::start(cfg.x0);
    let total = cfg.steps();
    let mut j_at_t = Vec::new();
    tracker.observe(0, st.z());
    loop {
        if tracker.done() || tracker.ledger().t_times.len() >= n_max || st.steps >= total {
            break;
        }
        let z = st.z();
        let limits = LeapLimits { max_steps: total - st.steps, z_room: tracker.room(z), x_room: f64::INFINITY };
        stepper.advance(&mut st, &mut rng, &limits);
        let before = tracker.ledger().t_times.len();
        tracker.observe(st.steps, st.z());
        if tracker.ledger().t_times.len() > before {
            j_at_t.push(st.j_steps);
        }
    }
    Ok(LadderTrial { ledger: tracker.into_ledger(), j_at_t })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub epsilon: f64,
    pub gamma: f64,
    pub step: f64,
    pub horizon: f64,
    pub b: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
}

impl Parameters {
    fn from_cfg(cfg: &RegConfig, b: f64) -> Self {
        Self { epsilon: cfg.epsilon, gamma: cfg.gamma, step: cfg.step, horizon: cfg.horizon, b, ..Self::default() }
    }
}

/// Event counts; `None` where an experiment does not track the event.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventCounts {
    pub s_n_before_u_b: Option<u64>,
    pub j_t_n_at_least_threshold: Option<u64>,
    pub j_tau_r_below_k: Option<u64>,
    pub tau_r_after_t0: Option<u64>,
    pub b_eps: Option<u64>,
    pub sup_z_reaches_b: Option<u64>,
    /// Trials whose outcome was not decided within the horizon; counted as the
    /// unfavourable outcome in the tallies above.
    pub undetermined: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub master_seed: u64,
    pub trials: u64,
    pub parameters: Parameters,
    pub event_counts: EventCounts,
    pub estimates: BTreeMap<String, MCEstimate>,
    /// Reference value the headline estimate is compared with.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    /// Trials on which the costly diagnostic events were evaluated, if fewer than all.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic_trials: Option<u64>,
    pub insufficient_sample: bool,
}

impl ExperimentReport {
    fn new(experiment: &str, cfg: &RegConfig, trials: u64, parameters: Parameters) -> Self {
        Self {
            experiment: experiment.to_string(),
            master_seed: cfg.seed,
            trials,
            parameters,
            event_counts: EventCounts::default(),
            estimates: BTreeMap::new(),
            bound: None,
            diagnostic_trials: None,
            insufficient_sample: trials < MIN_TRIALS,
        }
    }

    fn add_fraction(&mut self, name: &str, hits: u64) {
        self.add_fraction_of(name, hits, self.trials);
    }

    fn add_fraction_of(&mut self, name: &str, hits: u64, trials: u64) {
        if let Ok(e) = mc_fraction(hits as usize, trials as usize) {
            self.estimates.insert(name.to_string(), e);
        } else {
            self.insufficient_sample = true;
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::InsufficientSample("at least one trial is required".into()));
    }
    Ok(())
}

/// Runs `trials` ladder trials on substreams `0..trials` of `cfg.seed`.
pub fn ladder_batch(cfg: &RegConfig, b: f64, n_max: usize, trials: u64) -> Result<Vec<LadderTrial>> {
    cfg.validate_coupled()?;
    LadderTracker::new(cfg.epsilon, b)?;
    (0..trials).into_par_iter().map(|p| run_ladder_trial(&cfg.with_stream(p), b, n_max, true)).collect()
}

/// `P(S_n < U_b)` against `(1 − 2ε/b)^n`, for each `n` in `ns`, from one batch.
pub fn verify_est_p1_grid(cfg: &RegConfig, ns: &[usize], b: f64, trials: u64) -> Result<Vec<ExperimentReport>> {
    check_trials(trials)?;
    if ns.is_empty() || ns.contains(&0) {
        return domain("ladder index n must be at least 1");
    }
    let n_max = *ns.iter().max().expect("nonempty");
    let batch = ladder_batch(cfg, b, n_max, trials)?;
    Ok(ns.iter().map(|&n| est_p1_report(cfg, &batch, n, b)).collect())
}

pub fn verify_est_p1(cfg: &RegConfig, n: usize, b: f64, trials: u64) -> Result<ExperimentReport> {
    Ok(verify_est_p1_grid(cfg, &[n], b, trials)?.remove(0))
}

fn est_p1_report(cfg: &RegConfig, batch: &[LadderTrial], n: usize, b: f64) -> ExperimentReport {
    let trials = batch.len() as u64;
    let mut report = ExperimentReport::new("ladder-bound", cfg, trials, Parameters { n: Some(n), ..Parameters::from_cfg(cfg, b) });
    let mut hits = 0u64;
    let mut undetermined = 0u64;
    let mut ratios = Vec::with_capacity(batch.len());
    for trial in batch {
        match trial.ledger.s_before_u(n) {
            Some(true) => hits += 1,
            Some(false) => {}
            None => {
                hits += 1;
                undetermined += 1;
            }
        }
        if let Some(j) = trial.j_at(n, cfg.step) {
            ratios.push(j / (n as f64 * cfg.epsilon));
        }
    }
    report.event_counts.s_n_before_u_b = Some(hits);
    report.event_counts.undetermined = undetermined;
    report.add_fraction("p_s_n_before_u_b", hits);
    match mc_mean(&ratios) {
        Ok(e) => {
            report.estimates.insert("j_t_n_over_n_eps".to_string(), e);
        }
        Err(_) => report.insufficient_sample = true,
    }
    report.bound = Some((1.0 - 2.0 * cfg.epsilon / b).powi(n as i32));
    report
}

/// Constants that drive the divergence experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub r: f64,
    pub t0: f64,
    pub k: f64,
    pub c1: f64,
    pub beta: f64,
    pub n: usize,
    /// Chebyshev alternative `E τ_R / η` for `t0`.
    pub t0_chebyshev: f64,
    pub pilot_trials: u64,
}

/// `n = ⌈β/ε⌉`.
pub fn ladder_index(beta: f64, epsilon: f64) -> Result<usize> {
    if !(beta > 0.0 && beta.is_finite()) {
        return domain(format!("beta must be positive, got {beta}"));
    }
    Ok(((beta / epsilon) - 1e-9).ceil().max(1.0) as usize)
}

/// Geometric grid of candidate half-widths `R`.
fn r_grid(r_max: f64) -> Vec<f64> {
    (0..)
        .map(|k: i32| if k % 2 == 0 { 2f64.powi(k / 2) } else { 2f64.powi(k / 2) * std::f64::consts::SQRT_2 })
        .take_while(|&r| r <= r_max * (1.0 + 1e-12))
        .collect()
}

/// Runs `X` (with `Y` carried along for `J`) until `J ≥ k` or `|X| ≥ r_max`,
/// recording `J` at each first exit from `[−R', R']` on `grid`.
fn j_at_exits(cfg: &RegConfig, grid: &[f64], k_steps: u64) -> Result<Vec<u64>> {
    let stepper = Stepper::new(cfg, true)?;
    let mut rng = substream(cfg.seed, cfg.stream);
    let mut st = CoupledState::start(cfg.x0);
    let mut out = Vec::with_capacity(grid.len());
    let total = cfg.steps();
    while out.len() < grid.len() && st.steps < total {
        if st.j_steps >= k_steps {
            // J only grows, so every remaining exit also has J ≥ K.
            out.resize(grid.len(), st.j_steps);
            break;
        }
        let limits = LeapLimits { max_steps: total - st.steps, z_room: f64::INFINITY, x_room: grid[out.len()] - st.x.abs() };
        stepper.advance(&mut st, &mut rng, &limits);
        while out.len() < grid.len() && st.x.abs() >= grid[out.len()] {
            out.push(st.j_steps);
        }
    }
    Ok(out)
}

/// Exit step of `X` from `[−r, r]`, or `None` at the horizon.
fn exit_step(cfg: &RegConfig, r: f64) -> Result<Option<u64>> {
    let stepper = Stepper::new(cfg, true)?;
    let mut rng = substream(cfg.seed, cfg.stream);
    let mut st = CoupledState::start(cfg.x0);
    let total = cfg.steps();
    while st.x.abs() < r {
        if st.steps >= total {
            return Ok(None);
        }
        let limits = LeapLimits { max_steps: total - st.steps, z_room: f64::INFINITY, x_room: r - st.x.abs() };
        stepper.advance_x(&mut st, &mut rng, &limits);
    }
    Ok(Some(st.steps))
}

/// Largest candidate half-width tried by [`calibrate`].
pub const MAX_R: f64 = 4096.0;

/// Pilot estimates of `(R, t0, K, c1)` for target probability `eta`.
///
/// `c1` is the pilot mean of `J_{T_n ∧ U_b}/(nε)` with `n = ⌈β/ε⌉`, `K = 10·c1·β`,
/// `R` the smallest grid value with empirical `P(J_{τ_R} < K) ≤ η`, and `t0` the
/// empirical `(1 − η)`-quantile of `τ_R`. Each stage uses its own substreams.
pub fn calibrate(cfg: &RegConfig, target_eta: f64, beta: f64, b: f64, pilot_trials: u64) -> Result<Calibration> {
    if !(target_eta > 0.0 && target_eta <= 0.25) {
        return domain(format!("target eta must lie in (0, 1/4], got {target_eta}"));
    }
    if pilot_trials < 2 {
        return Err(Error::InsufficientSample("calibration needs at least 2 pilot trials".into()));
    }
    cfg.validate_coupled()?;
    let n = ladder_index(beta, cfg.epsilon)?;
    let seeds = |label: &str| crate::rng::derive_seed(cfg.seed, label);

    let ladder_cfg = RegConfig { seed: seeds("calibrate/c1"), ..*cfg };
    let batch = ladder_batch(&ladder_cfg, b, n, pilot_trials)?;
    let ratios: Vec<f64> = batch
        .iter()
        .filter_map(|t| t.j_at(n, cfg.step))
        .map(|j| j / (n as f64 * cfg.epsilon))
        .collect();
    if (ratios.len() as u64) < pilot_trials.div_ceil(2) {
        return Err(Error::Calibration(format!(
            "only {} of {pilot_trials} pilot trials reached T_n before the horizon",
            ratios.len()
        )));
    }
    let c1 = mc_mean(&ratios)?.mean;
    let k = 10.0 * c1 * beta;
    let k_steps = (k / cfg.step).ceil() as u64;

    let grid = r_grid(MAX_R);
    let r_cfg = RegConfig { seed: seeds("calibrate/r"), ..*cfg };
    let exits: Vec<Vec<u64>> = (0..pilot_trials)
        .into_par_iter()
        .map(|p| j_at_exits(&r_cfg.with_stream(p), &grid, k_steps))
        .collect::<Result<_>>()?;
    let allowed = (target_eta * pilot_trials as f64).floor() as usize;
    let r = grid
        .iter()
        .enumerate()
        .find(|&(i, _)| exits.iter().filter(|e| e.get(i).is_none_or(|&j| j < k_steps)).count() <= allowed)
        .map(|(_, &r)| r)
        .ok_or_else(|| Error::Calibration(format!("no R up to {MAX_R} gives P(J_tau_R < K) <= {target_eta}")))?;

    let t_cfg = RegConfig { seed: seeds("calibrate/t0"), ..*cfg };
    let taus: Vec<Option<u64>> =
        (0..pilot_trials).into_par_iter().map(|p| exit_step(&t_cfg.with_stream(p), r)).collect::<Result<_>>()?;
    let mut finished: Vec<f64> = taus.iter().flatten().map(|&s| s as f64 * cfg.step).collect();
    finished.sort_by(f64::total_cmp);
    let rank = ((1.0 - target_eta) * pilot_trials as f64).ceil() as usize;
    if rank == 0 || rank > finished.len() {
        return Err(Error::Calibration(format!(
            "{} of {pilot_trials} pilot paths did not leave [-R, R] within the horizon",
            pilot_trials as usize - finished.len()
        )));
    }
    let t0 = finished[rank - 1];
    let mean_tau = finished.iter().sum::<f64>() / finished.len() as f64;
    Ok(Calibration { r, t0, k, c1, beta, n, t0_chebyshev: mean_tau / target_eta, pilot_trials })
}

/// Outcome flags of one divergence trial (bad events are true when undecided).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct DivergenceTrial {
    a1: bool,
    a2: bool,
    /// `A3` and `A4` are only tracked on diagnostic trials.
    a3: Option<bool>,
    a4: Option<bool>,
    sup_z: bool,
    undetermined: bool,
}

fn divergence_trial(cfg: &RegConfig, b: f64, cal: &Calibration, diagnostics: bool) -> Result<DivergenceTrial> {
    let stepper = Stepper::new(cfg, true)?;
    let mut tracker = LadderTracker::new(cfg.epsilon, b)?;
    let mut rng = substream(cfg.seed, cfg.stream);
    let mut st = CoupledState::start(cfg.x0);
    let t0_steps = (cal.t0 / cfg.step).floor() as u64;
    let k_steps = (cal.k / cfg.step).ceil() as u64;
    let j2_steps = (0.5 * cal.k / cfg.step).ceil() as u64;
    let n = cal.n;
    let mut j_tn: Option<u64> = None;
    let mut tau: Option<(u64, u64)> = None;
    tracker.observe(0, st.z());
    loop {
        let ladder_open = !tracker.done();
        let tau_open = diagnostics && tau.is_none();
        if st.steps >= t0_steps || !(ladder_open || tau_open) {
            break;
        }
        let limits = LeapLimits {
            max_steps: t0_steps - st.steps,
            z_room: tracker.room(st.z()),
            x_room: if tau_open { cal.r - st.x.abs() } else { f64::INFINITY },
        };
        if ladder_open || st.j_steps < k_steps {
            stepper.advance(&mut st, &mut rng, &limits);
        } else {
            // Only τ_R is still open and J ≥ K is settled, so Y can be dropped.
            stepper.advance_x(&mut st, &mut rng, &limits);
        }
        if ladder_open {
            tracker.observe(st.steps, st.z());
            if j_tn.is_none() && (tracker.ledger().t_times.len() >= n || tracker.done()) {
                j_tn = Some(st.j_steps);
            }
        }
        if tau_open && st.x.abs() >= cal.r {
            tau = Some((st.steps, st.j_steps));
        }
    }
    let ledger = tracker.ledger();
    let mut out = DivergenceTrial::default();
    // A1: T_n < U_b.
    out.a1 = match (ledger.t_times.get(n - 1), ledger.u_b) {
        (Some(&t), Some(u)) => t < u,
        (Some(_), None) => true,
        (None, Some(_)) => false,
        (None, None) => {
            out.undetermined = true;
            true
        }
    };
    // A2: J_{T_n} ≥ 5·c1·β = K/2.
    out.a2 = match j_tn {
        Some(j) => j >= j2_steps,
        None => true,
    };
    if diagnostics {
        // A3: J_{τ_R} < K; undecided only if τ_R > t0 while J_{t0} < K.
        out.a3 = Some(match tau {
            Some((_, j)) => j < k_steps,
            None => st.j_steps < k_steps,
        });
        if tau.is_none() && st.j_steps < k_steps {
            out.undetermined = true;
        }
        // A4: τ_R > t0.
        out.a4 = Some(tau.is_none());
    }
    out.sup_z = ledger.u_b.is_some_and(|u| u <= t0_steps);
    Ok(out)
}

/// Estimates `P(sup_{s ≤ t0} |Z_s| ≥ b)` together with the bad events
/// `A1 = {T_n < U_b}`, `A2 = {J_{T_n} ≥ K/2}`, `A3 = {J_{τ_R} < K}`, `A4 = {τ_R > t0}`
/// and `B = (A1 ∪ A2 ∪ A3 ∪ A4)^c`, tracking every event on every trial.
pub fn run_divergence(cfg: &RegConfig, b: f64, cal: &Calibration, trials: u64) -> Result<ExperimentReport> {
    run_divergence_with(cfg, b, cal, trials, trials)
}

/// As [`run_divergence`], but `A3`, `A4` and `B` are only evaluated on the first
/// `diagnostic_trials` trials. They need `X` followed until it leaves `[−R, R]`,
/// which costs far more than the headline event.
pub fn run_divergence_with(
    cfg: &RegConfig,
    b: f64,
    cal: &Calibration,
    trials: u64,
    diagnostic_trials: u64,
) -> Result<ExperimentReport> {
    check_trials(trials)?;
    cfg.validate_coupled()?;
    LadderTracker::new(cfg.epsilon, b)?;
    if !(cal.t0 > 0.0 && cal.r > 0.0 && cal.k > 0.0 && cal.n >= 1) {
        return domain("calibration constants must be positive");
    }
    if cfg.horizon < cal.t0 {
        return domain(format!("horizon {} is shorter than t0 = {}", cfg.horizon, cal.t0));
    }
    let diagnostic_trials = diagnostic_trials.min(trials);
    let outcomes: Vec<DivergenceTrial> = (0..trials)
        .into_par_iter()
        .map(|p| divergence_trial(&cfg.with_stream(p), b, cal, p < diagnostic_trials))
        .collect::<Result<_>>()?;
    let count = |f: &dyn Fn(&DivergenceTrial) -> bool| outcomes.iter().filter(|o| f(o)).count() as u64;
    let params = Parameters {
        n: Some(cal.n),
        k: Some(cal.k),
        r: Some(cal.r),
        t0: Some(cal.t0),
        beta: Some(cal.beta),
        c1: Some(cal.c1),
        horizon: cal.t0,
        ..Parameters::from_cfg(cfg, b)
    };
    let mut report = ExperimentReport::new("divergence", cfg, trials, params);
    report.diagnostic_trials = Some(diagnostic_trials);
    let counts = EventCounts {
        s_n_before_u_b: Some(count(&|o| o.a1)),
        j_t_n_at_least_threshold: Some(count(&|o| o.a2)),
        j_tau_r_below_k: Some(count(&|o| o.a3 == Some(true))),
        tau_r_after_t0: Some(count(&|o| o.a4 == Some(true))),
        b_eps: Some(count(&|o| o.a3.is_some() && !(o.a1 || o.a2 || o.a3 == Some(true) || o.a4 == Some(true)))),
        sup_z_reaches_b: Some(count(&|o| o.sup_z)),
        undetermined: count(&|o| o.undetermined),
    };
    for (name, hits, n) in [
        ("p_a1", counts.s_n_before_u_b, trials),
        ("p_a2", counts.j_t_n_at_least_threshold, trials),
        ("p_a3", counts.j_tau_r_below_k, diagnostic_trials),
        ("p_a4", counts.tau_r_after_t0, diagnostic_trials),
        ("p_b_eps", counts.b_eps, diagnostic_trials),
        ("p_sup_z_reaches_b", counts.sup_z_reaches_b, trials),
    ] {
        report.add_fraction_of(name, hits.expect("set above"), n);
    }
    report.event_counts = counts;
    report.bound = Some(0.2);
    Ok(report)
}
