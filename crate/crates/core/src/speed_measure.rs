//! Speed measures and the Green-kernel quantities they determine.
//!
//! A process on natural scale with speed measure `m` satisfies
//! `E^x τ_I = ∫_I g_I(x, y) m(dy)`, where `g_I` is the interval Green kernel.
//! Those closed-form values are the ground truth the Monte Carlo experiments
//! are checked against.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kv::{format_list, format_pairs, KvMap};
use crate::quadrature;

/// A finite closed interval `[a, b]` with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    a: f64,
    b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return domain(format!("interval endpoints must be finite, got [{a}, {b}]"));
        }
        if a >= b {
            return domain(format!("interval needs a < b, got [{a}, {b}]"));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, x: f64) -> bool {
        self.a <= x && x <= self.b
    }

    fn check(&self, what: &str, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            domain(format!("{what} = {x} lies outside [{}, {}]", self.a, self.b))
        }
    }
}

// Unchecked kernel; callers guarantee x, y ∈ [a, b].
#[inline]
fn kernel(a: f64, b: f64, x: f64, y: f64) -> f64 {
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    2.0 * (lo - a) * (b - hi) / (b - a)
}

/// Green kernel `g_I(x, y) = 2 (x∧y − a)(b − x∨y) / (b − a)`.
pub fn green_kernel(interval: &Interval, x: f64, y: f64) -> Result<f64> {
    interval.check("x", x)?;
    interval.check("y", y)?;
    Ok(kernel(interval.a, interval.b, x, y))
}

/// Piecewise-constant density: `levels[i]` applies on `[breakpoints[i], breakpoints[i+1])`
/// and `default_level` applies outside `[breakpoints[0], breakpoints[last])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density {
    breakpoints: Vec<f64>,
    levels: Vec<f64>,
    default_level: f64,
}

impl Density {
    pub fn new(breakpoints: Vec<f64>, levels: Vec<f64>, default_level: f64) -> Result<Self> {
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return domain("density breakpoints must be finite");
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return domain("density breakpoints must be strictly increasing");
        }
        if levels.len() != breakpoints.len().saturating_sub(1) {
            return domain(format!(
                "{} breakpoints need {} levels, got {}",
                breakpoints.len(),
                breakpoints.len().saturating_sub(1),
                levels.len()
            ));
        }
        // Levels must be positive: a zero piece would give some open interval zero mass.
        if levels.iter().chain(std::iter::once(&default_level)).any(|&l| !(l.is_finite() && l > 0.0)) {
            return domain("density levels must be finite and strictly positive");
        }
        Ok(Self { breakpoints, levels, default_level })
    }

    pub fn constant(level: f64) -> Result<Self> {
        Self::new(Vec::new(), Vec::new(), level)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn default_level(&self) -> f64 {
        self.default_level
    }

    /// Pieces `(lo, hi, level)` covering the whole line, in order.
    pub fn pieces(&self) -> Vec<(f64, f64, f64)> {
        let bp = &self.breakpoints;
        if bp.is_empty() {
            return vec![(f64::NEG_INFINITY, f64::INFINITY, self.default_level)];
        }
        let mut out = Vec::with_capacity(bp.len() + 1);
        out.push((f64::NEG_INFINITY, bp[0], self.default_level));
        for (w, &level) in bp.windows(2).zip(&self.levels) {
            out.push((w[0], w[1], level));
        }
        out.push((bp[bp.len() - 1], f64::INFINITY, self.default_level));
        out
    }

    /// Density value at `x` (right-continuous at breakpoints).
    pub fn level_at(&self, x: f64) -> f64 {
        let bp = &self.breakpoints;
        if bp.is_empty() || x < bp[0] || x >= bp[bp.len() - 1] {
            return self.default_level;
        }
        let i = bp.partition_point(|&b| b <= x) - 1;
        self.levels[i]
    }

    /// `∫_lo^hi density(y) dy`.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        self.pieces()
            .into_iter()
            .map(|(p, q, level)| {
                let (u, v) = (p.max(lo), q.min(hi));
                if v > u {
                    level * (v - u)
                } else {
                    0.0
                }
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// How to treat atoms sitting exactly on an interval endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EndpointAtoms {
    /// Reject the interval (the occupation identities assume no endpoint mass).
    #[default]
    Reject,
    /// Proceed; endpoint atoms contribute nothing since `g_I` vanishes there.
    Ignore,
}

/// A speed measure `m = density(y) dy + Σ weight_i δ_{location_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedMeasure {
    density: Density,
    atoms: Vec<Atom>,
}

/// Input for [`SpeedMeasure::occupation_functional`].
pub struct OccupationQuery<'f> {
    pub interval: Interval,
    pub start: f64,
    /// Bounded nonnegative integrand `f`.
    pub integrand: &'f dyn Fn(f64) -> f64,
}

const QUAD_REL_TOL: f64 = 1e-10;
const QUAD_ABS_TOL: f64 = 1e-14;

impl SpeedMeasure {
    pub fn new(density: Density, mut atoms: Vec<Atom>) -> Result<Self> {
        for atom in &atoms {
            if !atom.location.is_finite() {
                return domain("atom locations must be finite");
            }
            if !(atom.weight.is_finite() && atom.weight > 0.0) {
                return domain(format!("atom at {} needs a finite positive weight", atom.location));
            }
        }
        atoms.sort_by(|p, q| p.location.total_cmp(&q.location));
        if atoms.windows(2).any(|w| w[0].location == w[1].location) {
            return domain("atom locations must be pairwise distinct");
        }
        Ok(Self { density, atoms })
    }

    /// Lebesgue measure `dy` (Brownian motion).
    pub fn lebesgue() -> Self {
        Self { density: Density::constant(1.0).expect("valid"), atoms: Vec::new() }
    }

    /// `dy + γ δ_0`, the sticky Brownian motion measure.
    pub fn sticky(gamma: f64) -> Result<Self> {
        Self::new(Density::constant(1.0)?, vec![Atom { location: 0.0, weight: gamma }])
    }

    /// `dy + (γ/ε) 1_{[-ε,ε]}(y) dy`, the smoothed measure of the band approximation.
    pub fn regularized(epsilon: f64, gamma: f64) -> Result<Self> {
        if !(epsilon > 0.0 && gamma > 0.0) {
            return domain("epsilon and gamma must be positive");
        }
        let density = Density::new(vec![-epsilon, epsilon], vec![1.0 + gamma / epsilon], 1.0)?;
        Self::new(density, Vec::new())
    }

    /// `1/σ_ε(y)^2 dy`: the exact speed measure of `dX = σ_ε(X) dW`, whose band
    /// density is `γ/ε` rather than `1 + γ/ε`.
    pub fn band_coefficient(epsilon: f64, gamma: f64) -> Result<Self> {
        if !(epsilon > 0.0 && gamma > 0.0) {
            return domain("epsilon and gamma must be positive");
        }
        let density = Density::new(vec![-epsilon, epsilon], vec![gamma / epsilon], 1.0)?;
        Self::new(density, Vec::new())
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    /// Atoms sorted by location.
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Total mass of `interval`; endpoint atoms count only when `include_endpoints`.
    pub fn measure_mass(&self, interval: &Interval, include_endpoints: bool) -> f64 {
        let (a, b) = (interval.a, interval.b);
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|atom| {
                let x = atom.location;
                (a < x && x < b) || (include_endpoints && (x == a || x == b))
            })
            .map(|atom| atom.weight)
            .sum();
        self.density.mass(a, b) + atoms
    }

    fn check_endpoints(&self, interval: &Interval, policy: EndpointAtoms) -> Result<()> {
        if policy == EndpointAtoms::Reject {
            if let Some(atom) = self.atoms.iter().find(|at| at.location == interval.a || at.location == interval.b) {
                return domain(format!(
                    "atom at {} sits on an endpoint of [{}, {}]",
                    atom.location, interval.a, interval.b
                ));
            }
        }
        Ok(())
    }

    /// `G_I(x) = ∫_I g_I(x, y) m(dy)`, the expected exit time from `I` started at `x`.
    pub fn expected_exit_time(&self, interval: &Interval, x: f64) -> Result<f64> {
        self.expected_exit_time_with(interval, x, EndpointAtoms::Reject)
    }

    pub fn expected_exit_time_with(&self, interval: &Interval, x: f64, policy: EndpointAtoms) -> Result<f64> {
        interval.check("x", x)?;
        self.check_endpoints(interval, policy)?;
        let (a, b) = (interval.a, interval.b);
        // g_I(x, ·) is linear on [a, x] and on [x, b], and the density is constant on
        // each piece, so the trapezoid rule on every sub-piece is exact.
        let mut total = 0.0;
        for (p, q, level) in self.density.pieces() {
            for (u, v) in [(p.max(a), q.min(x)), (p.max(x), q.min(b))] {
                if v > u {
                    total += level * 0.5 * (v - u) * (kernel(a, b, x, u) + kernel(a, b, x, v));
                }
            }
        }
        for atom in &self.atoms {
            if interval.contains(atom.location) {
                total += atom.weight * kernel(a, b, x, atom.location);
            }
        }
        Ok(total)
    }

    /// `∫_I g_I(x, y) f(y) m(dy)`: adaptive quadrature over the density pieces
    /// (relative tolerance 1e-10) plus exact atom terms.
    pub fn occupation_functional(&self, query: &OccupationQuery<'_>) -> Result<f64> {
        let interval = &query.interval;
        let x = query.start;
        interval.check("start", x)?;
        self.check_endpoints(interval, EndpointAtoms::Reject)?;
        let (a, b) = (interval.a, interval.b);
        let f = |y: f64| -> Result<f64> {
            let v = (query.integrand)(y);
            if v.is_finite() && v >= 0.0 {
                Ok(v)
            } else {
                domain(format!("integrand must be finite and nonnegative, f({y}) = {v}"))
            }
        };
        let mut total = 0.0;
        for (p, q, level) in self.density.pieces() {
            for (u, v) in [(p.max(a), q.min(x)), (p.max(x), q.min(b))] {
                if v > u {
                    let part = quadrature::integrate(
                        |y| Ok(kernel(a, b, x, y) * f(y)?),
                        u,
                        v,
                        QUAD_REL_TOL,
                        QUAD_ABS_TOL,
                    )?;
                    total += level * part;
                }
            }
        }
        for atom in &self.atoms {
            if interval.contains(atom.location) {
                total += atom.weight * kernel(a, b, x, atom.location) * f(atom.location)?;
            }
        }
        Ok(total)
    }

    /// Reads `density.breakpoints`, `density.levels`, `density.default` and `atoms`
    /// under `prefix` (e.g. `"measure."`). Missing keys default to Lebesgue measure.
    pub fn from_kv(map: &KvMap, prefix: &str) -> Result<Self> {
        let key = |k: &str| format!("{prefix}{k}");
        let breakpoints = map.f64_list(&key("density.breakpoints"))?.unwrap_or_default();
        let levels = map.f64_list(&key("density.levels"))?.unwrap_or_default();
        let default_level = map.parsed_or(&key("density.default"), 1.0)?;
        let atoms = map
            .pair_list(&key("atoms"))?
            .unwrap_or_default()
            .into_iter()
            .map(|(location, weight)| Atom { location, weight })
            .collect();
        let density = Density::new(breakpoints, levels, default_level).map_err(|e| Error::Config(e.to_string()))?;
        Self::new(density, atoms).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_kv(&self, prefix: &str) -> KvMap {
        let mut map = KvMap::new();
        map.set(format!("{prefix}density.breakpoints"), format_list(&self.density.breakpoints));
        map.set(format!("{prefix}density.levels"), format_list(&self.density.levels));
        map.set(format!("{prefix}density.default"), format!("{:?}", self.density.default_level));
        let pairs: Vec<(f64, f64)> = self.atoms.iter().map(|a| (a.location, a.weight)).collect();
        map.set(format!("{prefix}atoms"), format_pairs(&pairs));
        map
    }

    pub fn to_text(&self) -> String {
        self.to_kv("").to_text()
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(&KvMap::parse(text)?, "")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> Interval {
        Interval::new(-1.0, 1.0).unwrap()
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(green_kernel(&unit(), 0.0, 0.0).unwrap(), 1.0);
        assert_eq!(green_kernel(&unit(), -1.0, 0.3).unwrap(), 0.0);
        let i = Interval::new(0.0, 2.0).unwrap();
        assert!((green_kernel(&i, 0.5, 1.5).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(green_kernel(&unit(), 1.5, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn interval_validation() {
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(Interval::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn mass_examples() {
        let m = SpeedMeasure::sticky(1.0).unwrap();
        assert_eq!(m.measure_mass(&unit(), true), 3.0);
        let leb = SpeedMeasure::lebesgue();
        assert_eq!(leb.measure_mass(&Interval::new(0.0, 5.0).unwrap(), true), 5.0);
        let reg = SpeedMeasure::regularized(0.1, 1.0).unwrap();
        assert!((reg.measure_mass(&unit(), true) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn endpoint_atoms_only_when_flagged() {
        let m = SpeedMeasure::sticky(2.0).unwrap();
        let i = Interval::new(0.0, 1.0).unwrap();
        assert_eq!(m.measure_mass(&i, false), 1.0);
        assert_eq!(m.measure_mass(&i, true), 3.0);
        assert!(m.expected_exit_time(&i, 0.5).is_err());
        let g = m.expected_exit_time_with(&i, 0.5, EndpointAtoms::Ignore).unwrap();
        assert!((g - 0.25).abs() < 1e-15);
    }

    #[test]
    fn measure_validation() {
        assert!(Density::new(vec![0.0, 1.0], vec![0.0], 1.0).is_err());
        assert!(Density::new(vec![1.0, 0.0], vec![1.0], 1.0).is_err());
        assert!(Density::new(vec![0.0, 1.0], vec![], 1.0).is_err());
        let atoms = vec![Atom { location: 0.0, weight: 1.0 }, Atom { location: 0.0, weight: 2.0 }];
        assert!(SpeedMeasure::new(Density::constant(1.0).unwrap(), atoms).is_err());
        assert!(SpeedMeasure::sticky(0.0).is_err());
    }

    /// Independent route: adaptive quadrature of g_I(x, ·) against the density plus atoms.
    fn exit_time_by_quadrature(m: &SpeedMeasure, i: &Interval, x: f64) -> f64 {
        let (a, b) = (i.a(), i.b());
        let mut cuts = vec![a, x, b];
        cuts.extend(m.density().breakpoints().iter().copied().filter(|&p| a < p && p < b));
        cuts.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            total += quadrature::integrate(
                |y| Ok(green_kernel(i, x, y).unwrap() * m.density().level_at(y)),
                w[0],
                w[1],
                1e-12,
                1e-15,
            )
            .unwrap();
        }
        total + m.atoms().iter().map(|at| at.weight * green_kernel(i, x, at.location).unwrap()).sum::<f64>()
    }

    #[test]
    fn sticky_exit_time_matches_quadrature() {
        for gamma in [0.5, 1.0, 2.0] {
            let m = SpeedMeasure::sticky(gamma).unwrap();
            let oracle = exit_time_by_quadrature(&m, &unit(), 0.0);
            assert!((oracle - (1.0 + gamma)).abs() < 1e-10);
            let g = m.expected_exit_time(&unit(), 0.0).unwrap();
            assert!((g - oracle).abs() < 1e-12, "{g} vs {oracle}");
            assert_eq!(m.expected_exit_time(&unit(), 1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn regularized_exit_time_matches_quadrature() {
        let i = unit();
        for (eps, gamma) in [(0.1, 1.0), (0.01, 1.0), (0.05, 0.3)] {
            for m in [
                SpeedMeasure::regularized(eps, gamma).unwrap(),
                SpeedMeasure::band_coefficient(eps, gamma).unwrap(),
            ] {
                for x in [-0.7, -0.05, 0.0, 0.004, 0.5] {
                    let g = m.expected_exit_time(&i, x).unwrap();
                    let oracle = exit_time_by_quadrature(&m, &i, x);
                    assert!((g - oracle).abs() < 1e-10 * oracle.max(1.0), "{g} vs {oracle}");
                }
            }
            // dy + (γ/ε)1_band: 1 + (γ/ε)(2ε − ε²) at the centre.
            let g = SpeedMeasure::regularized(eps, gamma).unwrap().expected_exit_time(&i, 0.0).unwrap();
            assert!((g - (1.0 + gamma * (2.0 - eps))).abs() < 1e-12);
        }
    }

    #[test]
    fn occupation_examples() {
        let gamma = 1.7;
        let m = SpeedMeasure::sticky(gamma).unwrap();
        let at_zero = |y: f64| if y == 0.0 { 1.0 } else { 0.0 };
        let q = OccupationQuery { interval: unit(), start: 0.0, integrand: &at_zero };
        assert!((m.occupation_functional(&q).unwrap() - gamma).abs() < 1e-12);

        let m1 = SpeedMeasure::sticky(1.0).unwrap();
        let one = |_: f64| 1.0;
        let q = OccupationQuery { interval: unit(), start: 0.0, integrand: &one };
        let v = m1.occupation_functional(&q).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        assert!((v - m1.expected_exit_time(&unit(), 0.0).unwrap()).abs() < 1e-12);

        // Oracle: ∫_{0.2}^{0.5} (1 − y) dy = 0.3 − (0.25 − 0.04)/2 = 0.195.
        let band = |y: f64| if (0.2..=0.5).contains(&y) { 1.0 } else { 0.0 };
        let q = OccupationQuery { interval: unit(), start: 0.0, integrand: &band };
        let v = SpeedMeasure::lebesgue().occupation_functional(&q).unwrap();
        assert!((v - 0.195).abs() < 1e-10, "{v}");
    }

    #[test]
    fn occupation_rejects_bad_integrand() {
        let neg = |_: f64| -1.0;
        let q = OccupationQuery { interval: unit(), start: 0.0, integrand: &neg };
        assert!(matches!(SpeedMeasure::lebesgue().occupation_functional(&q), Err(Error::Domain(_))));
        let one = |_: f64| 1.0;
        let q = OccupationQuery { interval: unit(), start: 2.0, integrand: &one };
        assert!(SpeedMeasure::lebesgue().occupation_functional(&q).is_err());
    }

    #[test]
    fn text_format() {
        let text = "density.breakpoints = [-0.1, 0.1]\ndensity.levels = [11]\natoms = [(0.5, 2)]\n";
        let m = SpeedMeasure::parse(text).unwrap();
        assert_eq!(m.density().level_at(0.0), 11.0);
        assert_eq!(m.density().level_at(0.3), 1.0);
        assert_eq!(m.atoms(), &[Atom { location: 0.5, weight: 2.0 }]);
        assert!(SpeedMeasure::parse("atoms = [(0, -1)]").is_err());
        assert_eq!(SpeedMeasure::parse("").unwrap(), SpeedMeasure::lebesgue());
    }

    fn arb_measure() -> impl Strategy<Value = SpeedMeasure> {
        (
            prop::collection::vec(-3.0f64..3.0, 0..4),
            prop::collection::vec(0.1f64..5.0, 4),
            0.1f64..3.0,
            prop::collection::vec((-3.0f64..3.0, 0.01f64..4.0), 0..3),
        )
            .prop_filter_map("distinct", |(mut bps, levels, default, atoms)| {
                bps.sort_by(f64::total_cmp);
                bps.dedup();
                let n = bps.len().saturating_sub(1);
                let density = Density::new(bps, levels[..n].to_vec(), default).ok()?;
                let atoms = atoms.into_iter().map(|(location, weight)| Atom { location, weight }).collect();
                SpeedMeasure::new(density, atoms).ok()
            })
    }

    proptest! {
        #[test]
        fn kernel_symmetric_and_nonnegative(a in -5.0f64..5.0, len in 0.01f64..10.0, s in 0.0f64..1.0, t in 0.0f64..1.0) {
            let i = Interval::new(a, a + len).unwrap();
            let (x, y) = (a + s * len, a + t * len);
            let g = green_kernel(&i, x, y).unwrap();
            prop_assert_eq!(g, green_kernel(&i, y, x).unwrap());
            prop_assert!(g >= 0.0);
            prop_assert_eq!(green_kernel(&i, i.a(), y).unwrap(), 0.0);
            prop_assert_eq!(green_kernel(&i, x, i.b()).unwrap(), 0.0);
        }

        #[test]
        fn lebesgue_closed_form(a in -5.0f64..5.0, len in 0.01f64..10.0, s in 0.0f64..1.0) {
            let i = Interval::new(a, a + len).unwrap();
            let x = a + s * len;
            let g = SpeedMeasure::lebesgue().expected_exit_time(&i, x).unwrap();
            let exact = (x - a) * (a + len - x);
            prop_assert!((g - exact).abs() <= 1e-12 * (1.0 + exact));
        }

        #[test]
        fn occupation_of_one_is_exit_time(m in arb_measure(), a in -2.0f64..0.0, len in 0.5f64..4.0, s in 0.0f64..1.0) {
            let i = Interval::new(a, a + len).unwrap();
            prop_assume!(m.atoms().iter().all(|at| at.location != i.a() && at.location != i.b()));
            let x = a + s * len;
            let one = |_: f64| 1.0;
            let q = OccupationQuery { interval: i, start: x, integrand: &one };
            let occ = m.occupation_functional(&q).unwrap();
            let g = m.expected_exit_time(&i, x).unwrap();
            prop_assert!((occ - g).abs() <= 1e-9 * g.abs().max(1e-12));
        }

        #[test]
        fn interior_atom_increases_exit_time(a in -2.0f64..0.0, len in 0.5f64..4.0, s in 0.01f64..0.99, t in 0.01f64..0.99, w in 0.01f64..3.0) {
            let i = Interval::new(a, a + len).unwrap();
            let (x, loc) = (a + s * len, a + t * len);
            let base = SpeedMeasure::lebesgue();
            let with_atom = SpeedMeasure::new(Density::constant(1.0).unwrap(), vec![Atom { location: loc, weight: w }]).unwrap();
            prop_assert!(with_atom.expected_exit_time(&i, x).unwrap() > base.expected_exit_time(&i, x).unwrap());
        }

        #[test]
        fn text_roundtrip(m in arb_measure()) {
            prop_assert_eq!(SpeedMeasure::parse(&m.to_text()).unwrap(), m);
        }
    }
}
