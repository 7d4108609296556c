mod common;

use arsub_core::lame::{lame_apply, lame_solve};
use arsub_core::Grid;
use common::{random_field, random_vector, rel, rel_vec, rng};
use proptest::prelude::*;

fn grids() -> impl Strategy<Value = Grid> {
    prop_oneof![Just(Grid::new(2, 16).unwrap()), Just(Grid::new(3, 8).unwrap())]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn helmholtz_parts_are_orthogonal_and_recompose(grid in grids(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let k = grid.n() as i64 / 4;
        let m = random_vector(&grid, &mut r, k, false);
        let h = grid.helmholtz(&m);
        let back = h.solenoidal.add(&grid.grad(&h.potential)).add_constant(&h.mean);
        prop_assert!(rel_vec(&back, &m) < 1e-12);
        prop_assert!(grid.div(&h.solenoidal).max_abs() < 1e-12);
        for c in h.solenoidal.comps() {
            prop_assert!(grid.mean(c).abs() < 1e-14);
        }
        let inner = grid.integrate(&h.solenoidal.dot(&grid.grad(&h.potential)));
        prop_assert!(inner.abs() < 1e-12);
    }

    #[test]
    fn parseval(grid in grids(), seed in any::<u64>()) {
        let f = random_field(&grid, &mut rng(seed), grid.n() as i64 / 2 - 1, false);
        let physical = grid.l2_norm(&f);
        let spectral = grid.spectral_l2_norm(&f);
        prop_assert!((physical - spectral).abs() <= 1e-12 * (1.0 + physical));
    }

    #[test]
    fn derivatives_commute(grid in grids(), seed in any::<u64>()) {
        let f = random_field(&grid, &mut rng(seed), grid.n() as i64 / 2, false);
        let a = grid.partial(&grid.partial(&f, 0), 1);
        let b = grid.partial(&grid.partial(&f, 1), 0);
        prop_assert!(rel(&a, &b) < 1e-12);
        // Nyquist symbols vanish for every operator, so this holds even for
        // fields carrying Nyquist content.
        prop_assert!(rel(&grid.div(&grid.grad(&f)), &grid.laplacian(&f)) < 1e-12);
    }

    #[test]
    fn poisson_roundtrip(grid in grids(), seed in any::<u64>()) {
        let g = random_field(&grid, &mut rng(seed), grid.n() as i64 / 4, true);
        let phi = grid.poisson_solve(&g).unwrap();
        prop_assert!(rel(&grid.laplacian(&phi), &g) < 1e-12);
        prop_assert!(grid.mean(&phi).abs() < 1e-14);
    }

    #[test]
    fn lame_roundtrip(grid in grids(), seed in any::<u64>()) {
        let u = random_vector(&grid, &mut rng(seed), grid.n() as i64 / 4, true);
        let s = lame_solve(&grid, &lame_apply(&grid, &u)).unwrap();
        prop_assert!(rel_vec(&s.u, &u) < 1e-11);
        prop_assert!(s.tensor.sub(&arsub_core::lame::strain_tensor(&grid, &u)).max_abs() < 1e-10);
    }
}
