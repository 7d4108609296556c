mod common;

use std::f64::consts::PI;

use arsub_core::lame::{build_f, build_m, build_n, lame_apply, lame_solve, m_rhs, n_rhs, weak_continuity_probe};
use arsub_core::model::Offset;
use arsub_core::profile::{build_profile, ShapeConfig, TimeGrid};
use arsub_core::scenario::Scenario;
use arsub_core::{Grid, ModelFunctions, VectorField};
use common::{random_vector, rel_vec, rng};

fn model() -> ModelFunctions {
    ModelFunctions::power_law(2, 2.0).unwrap().with_offset(Offset::Linear(vec![0.05, 0.05])).unwrap()
}

#[test]
fn manufactured_solution_is_recovered() {
    for (d, n) in [(2, 64), (3, 16)] {
        let g = Grid::new(d, n).unwrap();
        let u = random_vector(&g, &mut rng(3), 3, true);
        let s = lame_solve(&g, &lame_apply(&g, &u)).unwrap();
        assert!(rel_vec(&s.u, &u) <= 1e-10);
    }
}

#[test]
fn forward_residuals_on_profile_nodes() {
    let g = Grid::new(2, 64).unwrap();
    let m = model();
    let data = Scenario::TwoModeTransfer.data(&g);
    let h0 = g.helmholtz(&data.u0.mul_scalar(&data.rho0));
    let ht = g.helmholtz(&data.u_end.mul_scalar(&data.rho_end));
    let p = build_profile(&g, &data.rho0, &data.rho_end, &h0.potential, &ht.potential, ShapeConfig::default(), TimeGrid::new(1.0, 9).unwrap()).unwrap();
    for (k, node) in p.nodes.iter().enumerate() {
        let s = k as f64 / 8.0;
        let v = h0.solenoidal.scale(1.0 - s).axpy(s, &ht.solenoidal);
        let vm = [0.1, -0.2];
        let rm = m_rhs(&g, &m, &node.rho, &node.rho_t, &node.phi, &vm);
        let rn = n_rhs(&g, &m, &node.rho, &v).unwrap();
        for r in [&rm, &rn] {
            for c in r.comps() {
                assert!(g.mean(c).abs() <= 1e-12 * (1.0 + r.max_abs()), "node {k}: mean {}", g.mean(c));
            }
        }
        let mm = build_m(&g, &m, &node.rho, &node.rho_t, &node.phi, &vm).unwrap();
        let nn = build_n(&g, &m, &node.rho, &v).unwrap();
        assert!(rel_vec(&g.div_tensor(&mm), &rm) <= 1e-9);
        assert!(rel_vec(&g.div_tensor(&nn), &rn) <= 1e-9);
        for t in [&mm, &nn] {
            let trace = (0..g.dim()).map(|i| t.comp(i, i)).fold(g.zeros(), |a, b| a.add(&b));
            assert!(trace.max_abs() <= 1e-14 * (1.0 + t.max_abs()));
        }
    }
}

#[test]
fn n_is_linear_in_the_velocity() {
    let g = Grid::new(2, 64).unwrap();
    let m = model();
    let rho = g.sample(|x| 2.0 + 0.4 * (PI * x[0]).sin() * (PI * x[1]).cos());
    let mut r = rng(5);
    let a = g.helmholtz(&random_vector(&g, &mut r, 4, true)).solenoidal;
    let b = g.helmholtz(&random_vector(&g, &mut r, 4, true)).solenoidal;
    let (alpha, beta) = (0.7, -1.3);
    let lhs = build_n(&g, &m, &rho, &a.scale(alpha).axpy(beta, &b)).unwrap();
    let rhs = build_n(&g, &m, &rho, &a).unwrap().scale(alpha).add(&build_n(&g, &m, &rho, &b).unwrap().scale(beta));
    assert!(lhs.sub(&rhs).max_abs() <= 1e-10 * (1.0 + rhs.max_abs()));
}

#[test]
fn affine_flux_balances_time_derivative() {
    let g = Grid::new(3, 16).unwrap();
    let mut r = rng(9);
    let v0 = g.helmholtz(&random_vector(&g, &mut r, 3, true)).solenoidal;
    let v1 = g.helmholtz(&random_vector(&g, &mut r, 3, true)).solenoidal;
    let f = build_f(&g, &v0, &v1, 2.0).unwrap();
    let dv = v1.sub(&v0).scale(0.5);
    assert!(dv.add(&g.div_tensor(&f)).max_abs() <= 1e-9 * (1.0 + dv.max_abs()));
}

#[test]
fn weak_continuity_probe_decreases() {
    let g = Grid::new(2, 64).unwrap();
    let m = model();
    let rho = g.sample(|x| 2.0 + 0.4 * (PI * x[0]).sin() + 0.2 * (PI * x[1]).cos());
    let base = g.sample_vector(|x| vec![(PI * x[1]).sin(), (PI * x[0]).sin()]);
    // v_n = v + sin(n pi x2) e_1 tends weakly to v.
    let seq: Vec<VectorField> = [2.0, 4.0, 8.0, 16.0]
        .iter()
        .map(|&k| base.add(&g.sample_vector(|x| vec![(k * PI * x[1]).sin(), 0.0])))
        .collect();
    let rec = weak_continuity_probe(&g, &m, &rho, &seq, &base).unwrap();
    assert!(rec.monotone, "{:?}", rec.distances);
    assert!(rec.distances[3] < rec.distances[0]);
}
