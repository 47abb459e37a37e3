use polyharm::rough::{run_mvl_suite, MvlSuiteConfig};

#[test]
fn line_suite_is_stable() {
    let cfg = MvlSuiteConfig {
        dim: 1,
        radii: vec![5, 10, 20],
        probes: vec![vec![0, 0], vec![1, 0], vec![0, 3], vec![2, 5]],
        ..MvlSuiteConfig::default()
    };
    let rep = run_mvl_suite(&cfg).unwrap();
    assert_eq!(rep.q, 8);
    assert_eq!(rep.w_radius, 5);
    assert_eq!(rep.window, 5 + 20 + 5 + 1);
    // a = 2, b = 1: 6ab = 12 dominates 2b/a and 10.
    assert_eq!(rep.radius_floor, 12);
    assert_eq!(rep.below_floor, vec![5, 10]);
    assert!(rep.max_solver_residual < 1e-10);
    assert!(rep.linearity.exact && rep.linearity.injective);
    assert!(rep.linearity.float_max_dev < 1e-12);
    assert!(rep.sup_norm_ok);
    assert!(rep.stable, "ratio {}", rep.ratio);
}

#[test]
fn bad_probe_is_rejected() {
    let cfg = MvlSuiteConfig {
        dim: 1,
        probes: vec![vec![0, 0, 0]],
        ..MvlSuiteConfig::default()
    };
    assert!(run_mvl_suite(&cfg).is_err());
}
