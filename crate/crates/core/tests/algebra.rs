mod common;

use arsub_core::{lambda_max, pointwise_inequality_slack, SymMatrix};
use proptest::prelude::*;
use rand::Rng;

/// Cyclic Jacobi rotations; returns all eigenvalues.
fn jacobi_eigenvalues(a: &SymMatrix) -> Vec<f64> {
    let d = a.dim();
    let mut m = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            m[i][j] = a.get(i, j);
        }
    }
    for _ in 0..100 {
        let off: f64 = (0..d).flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..d).map(|i| m[i][i]).collect()
}

fn random_sym(rng: &mut impl Rng, d: usize, scale: f64) -> SymMatrix {
    let mut m = SymMatrix::zeros(d);
    for i in 0..d {
        for j in i..d {
            m.set(i, j, rng.gen_range(-scale..scale));
        }
    }
    m
}

fn random_traceless(rng: &mut impl Rng, d: usize, scale: f64) -> SymMatrix {
    let m = random_sym(rng, d, scale);
    m.sub(&SymMatrix::identity(d).scale(m.trace() / d as f64))
}

#[test]
fn lambda_max_matches_jacobi_and_rayleigh_quotients() {
    let mut r = common::rng(11);
    for d in [2, 3] {
        for _ in 0..2000 {
            let a = random_sym(&mut r, d, 5.0);
            let oracle = jacobi_eigenvalues(&a).into_iter().fold(f64::NEG_INFINITY, f64::max);
            let l = lambda_max(&a);
            assert!((l - oracle).abs() <= 1e-10 * (1.0 + oracle.abs()), "d = {d}: {l} vs {oracle}");
        }
        let a = random_sym(&mut r, d, 5.0);
        let l = lambda_max(&a);
        for _ in 0..10_000 {
            let w: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
            let n2: f64 = w.iter().map(|x| x * x).sum();
            if n2 < 1e-12 {
                continue;
            }
            assert!(a.quad_form(&w) / n2 <= l + 1e-10);
        }
    }
}

#[test]
fn degenerate_spectra() {
    assert_eq!(lambda_max(&SymMatrix::diag(&[2.0, -2.0])), 2.0);
    assert_eq!(lambda_max(&SymMatrix::diag(&[1.0, 2.0, 3.0])), 3.0);
    let triple = SymMatrix::identity(3).scale(-4.5);
    assert!((lambda_max(&triple) + 4.5).abs() < 1e-14);
    let double = SymMatrix::from_rows(&[&[1.0, 1.0, 0.0], &[1.0, 1.0, 0.0], &[0.0, 0.0, 2.0]]);
    assert!((lambda_max(&double) - 2.0).abs() < 1e-12);
}

#[test]
fn pointwise_inequality_fuzz() {
    let mut r = common::rng(7);
    let mut worst = f64::INFINITY;
    for d in [2, 3] {
        for i in 0..100_000 {
            let scale = 10f64.powi((i % 7) as i32 - 3);
            let w: Vec<f64> = (0..d).map(|_| r.gen_range(-scale..scale)).collect();
            let amp = scale * scale * r.gen_range(0.0..4.0);
            let b = random_traceless(&mut r, d, amp);
            let slack = pointwise_inequality_slack(&w, &b).unwrap();
            let w2: f64 = w.iter().map(|x| x * x).sum();
            let tol = 1e-12 * (w2 + b.frobenius());
            assert!(slack >= -tol, "d = {d}: slack {slack}");
            worst = worst.min(slack / (1.0 + w2));
        }
    }
    assert!(worst.is_finite());
}

#[test]
fn pointwise_inequality_rejects_trace() {
    assert!(pointwise_inequality_slack(&[1.0, 0.0], &SymMatrix::identity(2)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn lambda_max_is_frobenius_lipschitz(seed in any::<u64>(), three in any::<bool>(), scale in 1e-3f64..1e3) {
        let mut r = common::rng(seed);
        let d = if three { 3 } else { 2 };
        let a = random_sym(&mut r, d, scale);
        let amp = scale * r.gen_range(0.0..1.0);
        let b = a.add(&random_sym(&mut r, d, amp));
        let gap = (lambda_max(&a) - lambda_max(&b)).abs();
        prop_assert!(gap <= a.sub(&b).frobenius() + 1e-12 * (1.0 + scale));
    }
}
