//! Weak-form residuals, conserved quantities and named verification checks.
//!
//! A conservation law `d_t q + div G = 0` is tested against
//! `phi(t, x) = b(t) exp(i pi m . x)` with `b` a C^2 bump compactly supported
//! in `(0, T)` and `max_a |m_a| <= K`:
//!
//! ```text
//! r(b, m) = int_0^T int (q d_t phi + G : grad phi) dx dt.
//! ```
//!
//! Spatial integrals are read off the FFT; time integrals use the supplied
//! quadrature (see [`gauss_samples`]).

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::eigen::SymMatrix;
use crate::spectral::{Grid, ScalarField, VectorField};

/// `b(t) = 64 [s (1 - s)]^3`, `s = (t - a) / (b - a)` on `[a, b]`, zero outside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeBump {
    pub a: f64,
    pub b: f64,
}

impl TimeBump {
    /// Value and derivative.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        if t <= self.a || t >= self.b {
            return (0.0, 0.0);
        }
        let len = self.b - self.a;
        let s = (t - self.a) / len;
        let q = s * (1.0 - s);
        (64.0 * q * q * q, 192.0 * q * q * (1.0 - 2.0 * s) / len)
    }
}

/// Tensor-product test basis.
#[derive(Clone, Debug)]
pub struct WeakBasis {
    pub bumps: Vec<TimeBump>,
    pub modes: Vec<[i64; 3]>,
}

impl WeakBasis {
    /// Bumps on `(0, T)`, `(0, T/2)`, `(T/4, 3T/4)`, `(T/2, T)`; all modes with
    /// `max_a |m_a| <= k_max`.
    pub fn standard(grid: &Grid, t_final: f64, k_max: usize) -> Self {
        let bumps = [(0.0, 1.0), (0.0, 0.5), (0.25, 0.75), (0.5, 1.0)]
            .iter()
            .map(|&(a, b)| TimeBump {
                a: a * t_final,
                b: b * t_final,
            })
            .collect();
        let k = k_max.min(grid.n() / 2 - 1) as i64;
        let d = grid.dim();
        let mut modes = Vec::new();
        let side = 2 * k + 1;
        for flat in 0..side.pow(d as u32) {
            let mut m = [0i64; 3];
            let mut rem = flat;
            for a in (0..d).rev() {
                m[a] = rem % side - k;
                rem /= side;
            }
            modes.push(m);
        }
        Self { bumps, modes }
    }

    /// The default `K = n/4`.
    pub fn default_for(grid: &Grid, t_final: f64) -> Self {
        Self::standard(grid, t_final, grid.n() / 4)
    }

    pub fn len(&self) -> usize {
        self.bumps.len() * self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Conserved density `q_c` and flux rows `G_{c k}` at one time.
pub struct WeakSample {
    pub density: Vec<ScalarField>,
    pub flux: Vec<Vec<ScalarField>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeakResidual {
    /// `max |r|` over basis functions and components.
    pub max: f64,
    pub rms: f64,
    /// Largest `int int (|q d_t phi| + |G : grad phi|)`; residuals are measured against it.
    pub scale: f64,
    pub relative: f64,
    pub basis_size: usize,
}

/// `int f exp(i pi m . x) dx` for each basis mode.
fn mode_coefficients(grid: &Grid, f: &ScalarField, modes: &[[i64; 3]]) -> Vec<Complex64> {
    let spec = grid.forward(f);
    let w = grid.spacing().powi(grid.dim() as i32);
    modes
        .iter()
        .map(|m| {
            let neg = [-m[0], -m[1], -m[2]];
            let parity = if (m[0] + m[1] + m[2]).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            spec[grid.mode_index(&neg)] * (w * parity)
        })
        .collect()
}

const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// Four-point Gauss-Legendre nodes and weights on each of `refine` equal
/// sub-intervals of every `[t_k, t_{k+1}]`. Exact for piecewise polynomials of
/// degree 7 whose breaks sit on the sub-interval ends.
pub fn gauss_samples(nodes: &[f64], refine: usize) -> (Vec<f64>, Vec<f64>) {
    let refine = refine.max(1);
    let mut t = Vec::new();
    let mut w = Vec::new();
    for pair in nodes.windows(2) {
        let h = (pair[1] - pair[0]) / refine as f64;
        for r in 0..refine {
            let mid = pair[0] + (r as f64 + 0.5) * h;
            for &(x, wx) in &GAUSS4 {
                t.push(mid + 0.5 * h * x);
                w.push(0.5 * h * wx);
            }
        }
    }
    (t, w)
}

/// Weak residual with time quadrature `(times, weights)`; `sample(j)` gives the
/// fields at `times[j]` and is skipped where every bump vanishes.
pub fn weak_residual<F>(grid: &Grid, times: &[f64], weights: &[f64], sample: F, basis: &WeakBasis) -> WeakResidual
where
    F: Fn(usize) -> WeakSample,
{
    assert_eq!(times.len(), weights.len());
    let nm = basis.modes.len();
    let mut comps = 0;
    let mut total: Vec<Complex64> = Vec::new();
    let mut scale: Vec<f64> = Vec::new();
    let pik: Vec<[f64; 3]> = basis
        .modes
        .iter()
        .map(|m| [std::f64::consts::PI * m[0] as f64, std::f64::consts::PI * m[1] as f64, std::f64::consts::PI * m[2] as f64])
        .collect();

    for (j, &t) in times.iter().enumerate() {
        let bumps: Vec<(f64, f64)> = basis.bumps.iter().map(|b| b.eval(t)).collect();
        if bumps.iter().all(|&(v, dv)| v == 0.0 && dv == 0.0) {
            continue;
        }
        let s = sample(j);
        if total.is_empty() {
            comps = s.density.len();
            total = vec![Complex64::default(); basis.bumps.len() * comps * nm];
            scale = vec![0.0; total.len()];
        }
        let cq: Vec<Vec<Complex64>> = s.density.par_iter().map(|f| mode_coefficients(grid, f, &basis.modes)).collect();
        let cg: Vec<Vec<Vec<Complex64>>> = s
            .flux
            .par_iter()
            .map(|row| row.iter().map(|f| mode_coefficients(grid, f, &basis.modes)).collect())
            .collect();
        let w = weights[j];
        total
            .par_iter_mut()
            .zip(scale.par_iter_mut())
            .enumerate()
            .for_each(|(idx, (tot, sc))| {
                let mi = idx % nm;
                let c = (idx / nm) % comps;
                let bi = idx / (nm * comps);
                let (bv, bd) = bumps[bi];
                let q = cq[c][mi];
                let mut g = Complex64::default();
                let mut gabs = 0.0;
                for (k, row) in cg[c].iter().enumerate() {
                    let term = row[mi] * Complex64::new(0.0, pik[mi][k]);
                    g += term;
                    gabs += term.norm();
                }
                *tot += (q * bd + g * bv) * w;
                *sc += w * (q.norm() * bd.abs() + gabs * bv.abs());
            });
    }

    let count = total.len().max(1);
    let max = total.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let rms = (total.iter().map(|c| c.norm_sqr()).sum::<f64>() / count as f64).sqrt();
    let scale = scale.iter().copied().fold(0.0, f64::max);
    WeakResidual {
        max,
        rms,
        scale,
        relative: if scale > 0.0 { max / scale } else { 0.0 },
        basis_size: total.len(),
    }
}

/// Continuity equation `d_t rho + div m = 0`.
pub fn continuity_sample(rho: ScalarField, momentum: &VectorField) -> WeakSample {
    WeakSample {
        density: vec![rho],
        flux: vec![momentum.comps().to_vec()],
    }
}

/// Momentum equation `d_t(rho w) + div(rho w (x) u) = 0`.
pub fn momentum_sample(rho: &ScalarField, u: &VectorField, w: &VectorField) -> WeakSample {
    let rw = w.mul_scalar(rho);
    let flux = (0..w.dim())
        .map(|j| (0..u.dim()).map(|k| rw.comp(j).mul(u.comp(k))).collect())
        .collect();
    WeakSample {
        density: rw.into_comps(),
        flux,
    }
}

/// Strong continuity residual `max |d_t rho + div m|`.
pub fn strong_continuity(grid: &Grid, rho_t: &ScalarField, momentum: &VectorField) -> f64 {
    rho_t.add(&grid.div(momentum)).max_abs()
}

/// Largest `|trace(m (x) m - (1/d) |m|^2 I) / rho|`, assembled entrywise.
pub fn odot_trace_defect(rho: &ScalarField, m: &VectorField) -> f64 {
    let d = m.dim();
    (0..rho.len())
        .map(|i| {
            let w = m.at(i);
            let w2: f64 = w[..d].iter().map(|x| x * x).sum();
            let dyad = SymMatrix::outer(&w[..d]).sub(&SymMatrix::identity(d).scale(w2 / d as f64));
            (dyad.trace() / rho.values()[i]).abs()
        })
        .fold(0.0, f64::max)
}

/// Largest deviation of a time series from its first value.
pub fn drift_from_start(series: &[f64]) -> f64 {
    series.iter().map(|v| (v - series[0]).abs()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= tol`.
    pub fn at_most(name: &str, value: f64, tol: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            tol,
            pass: value <= tol,
        }
    }

    /// Passes when `value > tol`.
    pub fn above(name: &str, value: f64, tol: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            tol,
            pass: value > tol,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
        self.pass = self.checks.iter().all(|c| c.pass);
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_shape() {
        let b = TimeBump { a: 0.0, b: 2.0 };
        assert_eq!(b.eval(1.0).0, 1.0);
        assert_eq!(b.eval(0.0), (0.0, 0.0));
        let h = 1e-6;
        let fd = (b.eval(0.7 + h).0 - b.eval(0.7 - h).0) / (2.0 * h);
        assert!((fd - b.eval(0.7).1).abs() < 1e-8);
    }

    #[test]
    fn mode_coefficients_match_definition() {
        let g = Grid::new(2, 16).unwrap();
        let pi = std::f64::consts::PI;
        // int cos(pi x1) exp(i pi x1) = 2 * int cos^2 = 2
        let f = g.sample(|x| (pi * x[0]).cos() + 0.5 * (2.0 * pi * x[1]).sin());
        let c = mode_coefficients(&g, &f, &[[1, 0, 0], [0, 2, 0], [0, 0, 0]]);
        assert!((c[0] - Complex64::new(2.0, 0.0)).norm() < 1e-13);
        // int 0.5 sin(2 pi x2) exp(2 i pi x2) = 0.5 * 2 * i
        assert!((c[1] - Complex64::new(0.0, 1.0)).norm() < 1e-13);
        assert!(c[2].norm() < 1e-13);
    }

    #[test]
    fn zero_fields_have_zero_residual() {
        let g = Grid::new(2, 8).unwrap();
        let (times, weights) = gauss_samples(&[0.0, 0.5, 1.0], 2);
        let basis = WeakBasis::default_for(&g, 1.0);
        let r = weak_residual(&g, &times, &weights, |_| continuity_sample(g.zeros(), &g.zero_vector()), &basis);
        assert_eq!(r.max, 0.0);
        assert_eq!(r.relative, 0.0);
    }

    #[test]
    fn gauss_samples_integrate_septics() {
        let (t, w) = gauss_samples(&[0.0, 0.3, 1.0], 3);
        let s: f64 = t.iter().zip(&w).map(|(t, w)| w * t.powi(7)).sum();
        assert!((s - 0.125).abs() < 1e-14);
    }

    #[test]
    fn odot_dyad_is_trace_free() {
        let g = Grid::new(3, 8).unwrap();
        let m = g.sample_vector(|x| vec![x[0].sin(), 3.0 * x[1], x[2].cos()]);
        assert!(odot_trace_defect(&g.constant(2.0), &m) <= 1e-12 * 9.0);
    }
}
