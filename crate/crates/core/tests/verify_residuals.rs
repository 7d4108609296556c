use std::f64::consts::PI;

use arsub_core::verify::{continuity_sample, gauss_samples, momentum_sample, odot_trace_defect, strong_continuity, weak_residual, WeakBasis};
use arsub_core::Grid;

fn nodes(n_t: usize) -> Vec<f64> {
    (0..n_t).map(|k| k as f64 / (n_t - 1) as f64).collect()
}

#[test]
fn static_solenoidal_pair_has_no_weak_residual() {
    let g = Grid::new(2, 32).unwrap();
    let rho = g.sample(|x| 2.0 + 0.3 * (PI * x[0]).sin());
    let m = g.sample_vector(|x| vec![(PI * x[1]).sin(), 0.5]);
    let (t, w) = gauss_samples(&nodes(9), 2);
    let r = weak_residual(&g, &t, &w, |_| continuity_sample(rho.clone(), &m), &WeakBasis::default_for(&g, 1.0));
    assert!(r.relative <= 1e-13, "{r:?}");
    assert!(strong_continuity(&g, &g.zeros(), &m) <= 1e-13);
}

#[test]
fn weak_residual_is_linear_in_injected_defect() {
    // rho(t) = rho_0 + eps t g with a fixed divergence-free m.
    let g = Grid::new(2, 32).unwrap();
    let rho0 = g.sample(|x| 2.0 + 0.3 * (PI * x[0]).sin());
    let bump = g.sample(|x| (PI * x[1]).cos());
    let m = g.sample_vector(|x| vec![(PI * x[1]).sin(), 0.0]);
    let (t, w) = gauss_samples(&nodes(9), 2);
    let basis = WeakBasis::default_for(&g, 1.0);
    let at = |eps: f64| weak_residual(&g, &t, &w, |j| continuity_sample(rho0.axpy(eps * t[j], &bump), &m), &basis).max;
    let (a, b) = (at(1e-4), at(2e-4));
    assert!(a > 1e-6);
    assert!((b / a - 2.0).abs() <= 1e-6, "{a} {b}");
    // int_0^1 b'(t) t dt = -int b = -16/35, times int cos^2 = 2.
    assert!((a - 1e-4 * 2.0 * 16.0 / 35.0).abs() <= 1e-12, "{a}");
}

#[test]
fn shear_flow_satisfies_momentum_equation() {
    let g = Grid::new(2, 32).unwrap();
    let rho = g.sample(|x| 1.5 + 0.2 * (PI * x[1]).cos());
    let u = g.sample_vector(|x| vec![(PI * x[1]).sin(), 0.0]);
    let (t, w) = gauss_samples(&nodes(5), 2);
    let r = weak_residual(&g, &t, &w, |_| momentum_sample(&rho, &u, &u), &WeakBasis::default_for(&g, 1.0));
    assert!(r.max <= 1e-13, "{r:?}");
    assert_eq!(r.basis_size, 4 * 2 * 17 * 17);
}

#[test]
fn odot_is_trace_free_on_random_fields() {
    let g = Grid::new(3, 8).unwrap();
    let rho = g.sample(|x| 2.0 + (PI * x[2]).sin());
    let m = g.sample_vector(|x| vec![(PI * x[0]).cos() * 3.0, x[1].exp(), 1e3 * (PI * x[2]).sin()]);
    assert!(odot_trace_defect(&rho, &m) <= 1e-12 * 1e6);
}
