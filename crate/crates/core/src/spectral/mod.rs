//! Periodic grid on `[-1, 1)^d` and Fourier-space differential operators.
//!
//! Wavenumbers are `k = pi * m` for the integer mode `m`. The Nyquist mode
//! `m = n/2` is treated as unresolved: every derivative symbol vanishes on
//! it, which keeps odd derivatives real and makes `div . grad` coincide with
//! the Laplacian exactly.

mod field;
pub mod io;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub use field::{MatrixField, ScalarField, SymTensorField0, VectorField};

use crate::error::{Error, Result};
use crate::reduce::{max_abs, pairwise_sum, pairwise_sum_by};

/// Default relative tolerance on the mean of a Poisson right-hand side.
pub const POISSON_MEAN_TOL: f64 = 1e-12;

#[derive(Clone)]
pub struct Grid {
    dim: usize,
    n: usize,
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Derivative wavenumbers per flat index (zero on Nyquist modes).
    kvec: Arc<Vec<[f64; 3]>>,
    /// `|k|^2` built from `kvec`.
    ksq: Arc<Vec<f64>>,
    /// Signed integer modes per flat index.
    modes: Arc<Vec<[i64; 3]>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("dim", &self.dim).field("n", &self.n).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n
    }
}

/// Result of splitting a momentum-like field into solenoidal, constant and
/// gradient parts: `m = solenoidal + mean + grad(potential)`.
#[derive(Clone, Debug)]
pub struct Helmholtz {
    pub solenoidal: VectorField,
    pub mean: Vec<f64>,
    pub potential: ScalarField,
}

impl Grid {
    /// Torus grid, `d` in {2, 3}, `n` a power of two and at least 8.
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension must be 2 or 3, got {dim}")));
        }
        Self::build(dim, n)
    }

    /// One-dimensional periodic line `[-1, 1)`. Only the scalar operators
    /// (`partial`, `integrate`, `dealias`) are meaningful here.
    pub fn line(n: usize) -> Result<Self> {
        Self::build(1, n)
    }

    fn build(dim: usize, n: usize) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "samples per axis must be a power of two >= 8, got {n}"
            )));
        }
        let len = n.pow(dim as u32);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);

        let mut kvec = Vec::with_capacity(len);
        let mut ksq = Vec::with_capacity(len);
        let mut modes = Vec::with_capacity(len);
        let mut idx = [0usize; 3];
        for flat in 0..len {
            let mut rem = flat;
            for a in (0..dim).rev() {
                idx[a] = rem % n;
                rem /= n;
            }
            let mut k = [0.0; 3];
            let mut m = [0i64; 3];
            for a in 0..dim {
                m[a] = signed_mode(idx[a], n);
                k[a] = if idx[a] == n / 2 { 0.0 } else { PI * m[a] as f64 };
            }
            ksq.push(k.iter().map(|v| v * v).sum());
            kvec.push(k);
            modes.push(m);
        }

        Ok(Self {
            dim,
            n,
            len,
            forward,
            inverse,
            kvec: Arc::new(kvec),
            ksq: Arc::new(ksq),
            modes: Arc::new(modes),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of grid points, `n^d`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Torus measure `2^d`.
    pub fn volume(&self) -> f64 {
        2f64.powi(self.dim as i32)
    }

    pub fn spacing(&self) -> f64 {
        2.0 / self.n as f64
    }

    /// Coordinates of a flat index; unused trailing entries are zero.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let mut x = [0.0; 3];
        let mut rem = flat;
        for a in (0..self.dim).rev() {
            x[a] = -1.0 + self.spacing() * (rem % self.n) as f64;
            rem /= self.n;
        }
        x
    }

    /// Signed integer Fourier mode of a flat spectral index.
    pub fn mode(&self, flat: usize) -> [i64; 3] {
        self.modes[flat]
    }

    /// Derivative wavevector `pi m` of a flat spectral index, zero along
    /// Nyquist axes.
    pub fn wavevector(&self, flat: usize) -> [f64; 3] {
        self.kvec[flat]
    }

    /// `|k|^2` of [`Grid::wavevector`].
    pub fn wavenumber_sq(&self, flat: usize) -> f64 {
        self.ksq[flat]
    }

    /// Flat spectral index of an integer mode.
    pub fn mode_index(&self, mode: &[i64]) -> usize {
        let n = self.n as i64;
        mode.iter()
            .take(self.dim)
            .fold(0usize, |acc, &m| acc * self.n + m.rem_euclid(n) as usize)
    }

    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> ScalarField {
        ScalarField::new(
            (0..self.len)
                .map(|i| {
                    let x = self.point(i);
                    f(&x[..self.dim])
                })
                .collect(),
        )
    }

    pub fn sample_vector(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> VectorField {
        let mut comps = vec![Vec::with_capacity(self.len); self.dim];
        for i in 0..self.len {
            let x = self.point(i);
            let v = f(&x[..self.dim]);
            for (c, vi) in comps.iter_mut().zip(v) {
                c.push(vi);
            }
        }
        VectorField::new(comps.into_iter().map(ScalarField::new).collect())
            .expect("equal-length components")
    }

    pub fn constant(&self, c: f64) -> ScalarField {
        ScalarField::constant(self.len, c)
    }

    pub fn zeros(&self) -> ScalarField {
        ScalarField::zeros(self.len)
    }

    pub fn zero_vector(&self) -> VectorField {
        VectorField::zeros(self.dim, self.len)
    }

    pub fn zero_tensor(&self) -> SymTensorField0 {
        SymTensorField0::zeros(self.dim, self.len)
    }

    fn check(&self, f: &ScalarField) {
        assert_eq!(f.len(), self.len, "field does not live on this grid");
    }

    // ---------------------------------------------------------------- FFT --

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        let mut line = vec![Complex64::default(); n];
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(n) {
                    plan.process_with_scratch(chunk, &mut scratch);
                }
                continue;
            }
            let block = stride * n;
            for outer in (0..self.len).step_by(block) {
                for inner in 0..stride {
                    let start = outer + inner;
                    for (j, l) in line.iter_mut().enumerate() {
                        *l = data[start + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, l) in line.iter().enumerate() {
                        data[start + j * stride] = *l;
                    }
                }
            }
        }
    }

    /// Unnormalised forward transform.
    pub fn forward(&self, f: &ScalarField) -> Vec<Complex64> {
        self.check(f);
        let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    /// Inverse of [`Grid::forward`]; the imaginary part is discarded.
    pub fn inverse(&self, mut spec: Vec<Complex64>) -> ScalarField {
        assert_eq!(spec.len(), self.len);
        self.transform(&mut spec, &self.inverse);
        let scale = 1.0 / self.len as f64;
        ScalarField::new(spec.into_iter().map(|c| c.re * scale).collect())
    }

    fn apply(&self, f: &ScalarField, symbol: impl Fn(usize) -> Complex64) -> ScalarField {
        let mut spec = self.forward(f);
        for (i, c) in spec.iter_mut().enumerate() {
            *c *= symbol(i);
        }
        self.inverse(spec)
    }

    // ---------------------------------------------------------- operators --

    pub fn partial(&self, f: &ScalarField, axis: usize) -> ScalarField {
        assert!(axis < self.dim);
        self.apply(f, |i| Complex64::new(0.0, self.kvec[i][axis]))
    }

    pub fn grad(&self, f: &ScalarField) -> VectorField {
        let spec = self.forward(f);
        let comps = (0..self.dim)
            .map(|a| {
                let s = spec
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c * Complex64::new(0.0, self.kvec[i][a]))
                    .collect();
                self.inverse(s)
            })
            .collect();
        VectorField::new(comps).expect("equal-length components")
    }

    pub fn div(&self, v: &VectorField) -> ScalarField {
        assert_eq!(v.dim(), self.dim);
        let mut acc = vec![Complex64::default(); self.len];
        for a in 0..self.dim {
            let spec = self.forward(v.comp(a));
            for (i, (o, c)) in acc.iter_mut().zip(spec).enumerate() {
                *o += c * Complex64::new(0.0, self.kvec[i][a]);
            }
        }
        self.inverse(acc)
    }

    pub fn laplacian(&self, f: &ScalarField) -> ScalarField {
        self.apply(f, |i| Complex64::new(-self.ksq[i], 0.0))
    }

    /// `J[i][j] = d_j v_i`.
    pub fn jacobian(&self, v: &VectorField) -> MatrixField {
        let mut comps = Vec::with_capacity(self.dim * self.dim);
        for i in 0..self.dim {
            comps.extend(self.grad(v.comp(i)).into_comps());
        }
        MatrixField::new(self.dim, comps).expect("d*d components")
    }

    /// Row divergence of a symmetric tensor: `(div T)_j = sum_k d_k T_jk`.
    pub fn div_tensor(&self, t: &SymTensorField0) -> VectorField {
        let comps = (0..self.dim)
            .map(|j| {
                let mut acc = vec![Complex64::default(); self.len];
                for k in 0..self.dim {
                    let spec = self.forward(&t.comp(j, k));
                    for (i, (o, c)) in acc.iter_mut().zip(spec).enumerate() {
                        *o += c * Complex64::new(0.0, self.kvec[i][k]);
                    }
                }
                self.inverse(acc)
            })
            .collect();
        VectorField::new(comps).expect("equal-length components")
    }

    /// Row divergence of a full tensor: `(div M)_j = sum_k d_k M_jk`.
    pub fn div_matrix(&self, m: &MatrixField) -> VectorField {
        let comps = (0..self.dim)
            .map(|j| {
                let mut acc = vec![Complex64::default(); self.len];
                for k in 0..self.dim {
                    let spec = self.forward(m.comp(j, k));
                    for (i, (o, c)) in acc.iter_mut().zip(spec).enumerate() {
                        *o += c * Complex64::new(0.0, self.kvec[i][k]);
                    }
                }
                self.inverse(acc)
            })
            .collect();
        VectorField::new(comps).expect("equal-length components")
    }

    /// 2/3-rule truncation: zero every mode with some `|m_a| > n/3`.
    pub fn dealias(&self, f: &ScalarField) -> ScalarField {
        let cut = (self.n / 3) as i64;
        self.apply(f, |i| {
            let keep = self.modes[i][..self.dim].iter().all(|m| m.abs() <= cut);
            Complex64::new(if keep { 1.0 } else { 0.0 }, 0.0)
        })
    }

    /// Pointwise product followed by 2/3-rule truncation.
    pub fn product(&self, a: &ScalarField, b: &ScalarField) -> ScalarField {
        self.dealias(&a.mul(b))
    }

    /// Zero-mean `phi` with `laplacian(phi) = g`.
    pub fn poisson_solve(&self, g: &ScalarField) -> Result<ScalarField> {
        self.poisson_solve_with_tol(g, POISSON_MEAN_TOL)
    }

    /// As [`Grid::poisson_solve`], with the mean tolerance taken relative to
    /// `max |g|`.
    pub fn poisson_solve_with_tol(&self, g: &ScalarField, tol: f64) -> Result<ScalarField> {
        let scale = g.max_abs();
        if scale == 0.0 {
            return Ok(self.zeros());
        }
        let mean = self.mean(g);
        if mean.abs() > tol * scale {
            return Err(Error::NonZeroMean {
                mean,
                tol: tol * scale,
            });
        }
        Ok(self.apply(g, |i| {
            let k2 = self.ksq[i];
            Complex64::new(if k2 > 0.0 { -1.0 / k2 } else { 0.0 }, 0.0)
        }))
    }

    /// `m = v + V + grad(phi)` with `div v = 0`, `mean v = 0`, `mean phi = 0`.
    pub fn helmholtz(&self, m: &VectorField) -> Helmholtz {
        assert_eq!(m.dim(), self.dim);
        let specs: Vec<Vec<Complex64>> = m.comps().iter().map(|c| self.forward(c)).collect();
        let inv_len = 1.0 / self.len as f64;
        let mean: Vec<f64> = specs.iter().map(|s| s[0].re * inv_len).collect();

        // phi_hat = -(i k . m_hat) / |k|^2
        let phi_spec: Vec<Complex64> = (0..self.len)
            .map(|i| {
                let k2 = self.ksq[i];
                if k2 == 0.0 {
                    return Complex64::default();
                }
                let div: Complex64 = (0..self.dim)
                    .map(|a| specs[a][i] * Complex64::new(0.0, self.kvec[i][a]))
                    .sum();
                -div / k2
            })
            .collect();

        let solenoidal = (0..self.dim)
            .map(|a| {
                let s = (0..self.len)
                    .map(|i| {
                        if i == 0 {
                            return Complex64::default();
                        }
                        specs[a][i] - phi_spec[i] * Complex64::new(0.0, self.kvec[i][a])
                    })
                    .collect();
                self.inverse(s)
            })
            .collect();

        Helmholtz {
            solenoidal: VectorField::new(solenoidal).expect("equal-length components"),
            mean,
            potential: self.inverse(phi_spec),
        }
    }

    // --------------------------------------------------------- quadrature --

    /// Uniform-grid quadrature `sum f * (2/n)^d`, exact for resolved
    /// trigonometric polynomials.
    pub fn integrate(&self, f: &ScalarField) -> f64 {
        self.check(f);
        pairwise_sum(f.values()) * self.spacing().powi(self.dim as i32)
    }

    pub fn integrate_vector(&self, v: &VectorField) -> Vec<f64> {
        v.comps().iter().map(|c| self.integrate(c)).collect()
    }

    pub fn mean(&self, f: &ScalarField) -> f64 {
        self.integrate(f) / self.volume()
    }

    /// `sqrt(integral of f^2)` on the grid.
    pub fn l2_norm(&self, f: &ScalarField) -> f64 {
        let v = f.values();
        (pairwise_sum_by(v.len(), |i| v[i] * v[i]) * self.spacing().powi(self.dim as i32)).sqrt()
    }

    /// The same norm computed from Fourier coefficients (Parseval).
    pub fn spectral_l2_norm(&self, f: &ScalarField) -> f64 {
        let spec = self.forward(f);
        let energy = pairwise_sum_by(spec.len(), |i| spec[i].norm_sqr());
        (energy / self.len as f64 * self.spacing().powi(self.dim as i32)).sqrt()
    }

    pub fn vector_l2_norm(&self, v: &VectorField) -> f64 {
        v.comps().iter().map(|c| self.l2_norm(c).powi(2)).sum::<f64>().sqrt()
    }

    /// Largest spectral amplitude outside the 2/3-rule band, relative to the
    /// largest amplitude overall. Small values mean the field is resolved.
    pub fn tail_fraction(&self, f: &ScalarField) -> f64 {
        let spec = self.forward(f);
        let cut = (self.n / 3) as i64;
        let all = max_abs(&spec.iter().map(|c| c.norm()).collect::<Vec<_>>());
        if all == 0.0 {
            return 0.0;
        }
        let tail = spec
            .iter()
            .enumerate()
            .filter(|(i, _)| self.modes[*i][..self.dim].iter().any(|m| m.abs() > cut))
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max);
        tail / all
    }
}

fn signed_mode(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}
