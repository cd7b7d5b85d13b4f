use num_complex::Complex64;
use zeroscope::build_chain;
use zeroscope::noise::{error_stats, noisy_scan, point_rng, sample_estimate};
use zeroscope::oracle::brute_force_z;
use zeroscope::zeros::{find_minima, refine_newton, scan, GridSpec, PlaneTag};

#[test]
fn single_spin_lee_yang_zeros_on_the_imaginary_axis() {
    let base = build_chain(1, false, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)).unwrap();
    let spec = GridSpec::new([-0.6, 0.6, -2.0, 2.0], 31, 81).unwrap();
    let z = |h: Complex64| brute_force_z(&base.with_uniform_field(h)).map(|z| z.to_complex());
    let grid = scan(|h| z(h).map(|v| v.norm_sqr().ln()), spec, PlaneTag::H);
    let minima = find_minima(&grid, 1.0);
    assert_eq!(minima.len(), 2);
    for m in minima {
        let r = refine_newton(z, m.location, spec.scale()).unwrap();
        assert!(r.location.re.abs() < 1e-10);
        assert!((r.location.im.abs() - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    }
}

#[test]
fn noisy_scans_are_seeded() {
    let spec = GridSpec::new([0.0, 1.0, 0.0, 1.0], 8, 8).unwrap();
    let grid = scan(|w| Ok((0.1 + 0.5 * w.re * w.im).ln()), spec, PlaneTag::K);
    let a = noisy_scan(&grid, 1000, 4).unwrap();
    let b = noisy_scan(&grid, 1000, 4).unwrap();
    let c = noisy_scan(&grid, 1000, 5).unwrap();
    assert_eq!(a.estimates, b.estimates);
    assert_ne!(a.estimates, c.estimates);
}

#[test]
fn binomial_estimator_statistics() {
    let (mean, var) = error_stats(0.3, 2000, 4000, 11).unwrap();
    assert!((mean - 0.3).abs() < 2e-3);
    assert!((var / (0.3 * 0.7 / 2000.0) - 1.0).abs() < 0.1);
    assert!(sample_estimate(1.5, 10, &mut point_rng(0, 0)).is_err());
}
