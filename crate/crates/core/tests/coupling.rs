use stickylab::coupling::{ladder_index, verify_est_p1};
use stickylab::regularized_sde::RegConfig;

#[test]
fn ladder_probability_respects_geometric_bound() {
    let cfg = RegConfig::new(0.04, 1.0, 1e8, 0.0, 21);
    let r = verify_est_p1(&cfg, 25, 1.0, 1000).unwrap();
    let p = r.estimates["p_s_n_before_u_b"];
    let bound = r.bound.unwrap();
    assert!((bound - 0.92f64.powi(25)).abs() < 1e-15);
    assert!(p.mean <= bound + 3.0 * p.se, "{} > {bound}", p.mean);
    assert!(!r.insufficient_sample);
    assert_eq!(r.event_counts.undetermined, 0);
}

#[test]
fn ladder_reports_are_reproducible() {
    let cfg = RegConfig::new(0.04, 1.0, 1e8, 0.0, 4);
    let a = verify_est_p1(&cfg, 10, 1.0, 50).unwrap();
    let b = verify_est_p1(&cfg, 10, 1.0, 50).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert!(a.insufficient_sample);
}

#[test]
fn ladder_index_rounds_up() {
    assert_eq!(ladder_index(0.9, 0.04).unwrap(), 23);
    assert_eq!(ladder_index(1.0, 0.5).unwrap(), 2);
}
