#![allow(dead_code)]

use std::f64::consts::PI;

use arsub_core::{Grid, ScalarField, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random real trigonometric polynomial with modes `|m_a| <= k`, optionally
/// without the constant term.
pub fn random_field(grid: &Grid, rng: &mut ChaCha8Rng, k: i64, mean_zero: bool) -> ScalarField {
    let d = grid.dim();
    let mut terms = Vec::new();
    let side = 2 * k + 1;
    for flat in 0..side.pow(d as u32) {
        let mut m = [0i64; 3];
        let mut r = flat;
        for a in 0..d {
            m[a] = r % side - k;
            r /= side;
        }
        if mean_zero && m.iter().all(|&x| x == 0) {
            continue;
        }
        terms.push((m, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI)));
    }
    let norm = 1.0 / (terms.len() as f64).sqrt();
    grid.sample(|x| {
        terms
            .iter()
            .map(|(m, a, ph)| {
                let arg: f64 = (0..d).map(|i| PI * m[i] as f64 * x[i]).sum();
                a * (arg + ph).cos()
            })
            .sum::<f64>()
            * norm
    })
}

pub fn random_vector(grid: &Grid, rng: &mut ChaCha8Rng, k: i64, mean_zero: bool) -> VectorField {
    VectorField::new((0..grid.dim()).map(|_| random_field(grid, rng, k, mean_zero)).collect()).unwrap()
}

/// `max |a - b| / (1 + max |b|)`.
pub fn rel(a: &ScalarField, b: &ScalarField) -> f64 {
    a.sub(b).max_abs() / (1.0 + b.max_abs())
}

pub fn rel_vec(a: &VectorField, b: &VectorField) -> f64 {
    a.sub(b).max_abs() / (1.0 + b.max_abs())
}
