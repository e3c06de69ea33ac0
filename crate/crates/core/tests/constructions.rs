use stickylab::regularized_sde::{sample_reg_batch, RegConfig};
use stickylab::speed_measure::{Interval, SpeedMeasure};
use stickylab::stats::{ks_two_sample, mc_fraction, mc_mean};
use stickylab::time_change::{exit_batch, sample_batch_at_time, ExitConfig};

fn exit_cfg(interval: Interval, x0: f64, seed: u64) -> ExitConfig {
    ExitConfig { spacing: 0.02, interval, x0, seed, max_steps: u64::MAX }
}

#[test]
fn exit_side_is_linear_in_start_point() {
    let interval = Interval::new(0.0, 1.0).unwrap();
    for (i, x0) in [0.2, 0.5, 0.8].into_iter().enumerate() {
        let right = exit_batch(&exit_cfg(interval, x0, 100 + i as u64), 4000, |ec| ec.exit_right == Some(true)).unwrap();
        let e = mc_fraction(right.iter().filter(|&&r| r).count(), right.len()).unwrap();
        assert!(e.agrees_with(x0, 0.0), "x0 = {x0}: {}", e.mean);
    }
}

#[test]
fn exit_time_matches_green_potential_for_asymmetric_measure() {
    let m = SpeedMeasure::parse("density.breakpoints = [0.5, 1]\ndensity.levels = [3]\natoms = [(0, 0.5)]\n").unwrap();
    let interval = Interval::new(-1.0, 1.0).unwrap();
    let cfg = exit_cfg(interval, 0.0, 7);
    let table = cfg.table(&m).unwrap();
    let times = exit_batch(&cfg, 8000, |ec| ec.exit_time(&table)).unwrap();
    let e = mc_mean(&times).unwrap();
    let target = m.expected_exit_time(&interval, 0.0).unwrap();
    assert!(e.agrees_with(target, 0.03 * target), "{} vs {target}", e.mean);
}

#[test]
fn exit_batches_do_not_depend_on_thread_count() {
    let cfg = exit_cfg(Interval::new(-1.0, 1.0).unwrap(), 0.0, 3);
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| exit_batch(&cfg, 300, |ec| (ec.counts, ec.exit_right)).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn regularized_and_time_change_agree_for_wide_band() {
    // With ε = γ the band has unit volatility, so both sides are Brownian motion at t = 1.
    let reg = sample_reg_batch(&RegConfig::new(0.2, 0.2, 1.0, 0.0, 5), 2000).unwrap();
    let bm = sample_batch_at_time(&SpeedMeasure::lebesgue(), 0.01, 0.0, 1.0, 6, 2000).unwrap();
    let ks = ks_two_sample(&reg, &bm).unwrap();
    assert!(ks.p_value > 1e-3, "{ks:?}");
}

#[test]
fn sticky_point_holds_mass_at_fixed_time() {
    let xs = sample_batch_at_time(&SpeedMeasure::sticky(1.0).unwrap(), 0.01, 0.0, 1.0, 9, 4000).unwrap();
    let at_zero = xs.iter().filter(|&&x| x == 0.0).count();
    let bm = sample_batch_at_time(&SpeedMeasure::lebesgue(), 0.01, 0.0, 1.0, 9, 4000).unwrap();
    let bm_zero = bm.iter().filter(|&&x| x == 0.0).count();
    assert!(at_zero > 10 * bm_zero.max(1), "{at_zero} vs {bm_zero}");
}
