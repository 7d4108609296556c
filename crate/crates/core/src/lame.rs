//! Trace-free symmetric potentials through the constant-coefficient operator
//!
//! ```text
//! L U = div(grad U + grad U^T - (2/d) div U I) = lap U + (1 - 2/d) grad div U,
//! ```
//!
//! whose Fourier symbol is `-S(k)`, `S(k) = |k|^2 I + (1 - 2/d) k k^T`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelFunctions;
use crate::spectral::{Grid, ScalarField, SymTensorField0, VectorField};

/// Relative tolerance on the mean of a right-hand side.
pub const LAME_MEAN_TOL: f64 = 1e-10;
/// Relative tolerance on `div v` for the transport term.
pub const SOLENOIDAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct LameSolution {
    pub u: VectorField,
    pub tensor: SymTensorField0,
}

fn coupling(dim: usize) -> f64 {
    1.0 - 2.0 / dim as f64
}

/// `S(k)^{-1} r` by Sherman-Morrison:
/// `(1/|k|^2) (r - c k (k.r) / (|k|^2 (1 + c)))`.
fn inverse_symbol(k: &[f64; 3], k2: f64, c: f64, r: &[Complex64; 3], dim: usize) -> [Complex64; 3] {
    let kr: Complex64 = (0..dim).map(|a| r[a] * k[a]).sum();
    let s = c / (k2 * (1.0 + c));
    let mut out = [Complex64::default(); 3];
    for a in 0..dim {
        out[a] = (r[a] - kr * (s * k[a])) / k2;
    }
    out
}

/// Zero-mean `U` with `L U = rhs`, and `grad U + grad U^T - (2/d) div U I`.
pub fn lame_solve(grid: &Grid, rhs: &VectorField) -> Result<LameSolution> {
    let d = grid.dim();
    if rhs.dim() != d {
        return Err(Error::ShapeMismatch(format!("right-hand side needs {d} components")));
    }
    let scale = rhs.max_abs();
    if scale == 0.0 {
        return Ok(LameSolution {
            u: grid.zero_vector(),
            tensor: grid.zero_tensor(),
        });
    }
    for c in rhs.comps() {
        let mean = grid.mean(c);
        if mean.abs() > LAME_MEAN_TOL * scale {
            return Err(Error::NonZeroMean {
                mean,
                tol: LAME_MEAN_TOL * scale,
            });
        }
    }

    let c = coupling(d);
    let specs: Vec<Vec<Complex64>> = rhs.comps().iter().map(|f| grid.forward(f)).collect();
    let mut out = vec![vec![Complex64::default(); grid.len()]; d];
    for i in 0..grid.len() {
        let k2 = grid.wavenumber_sq(i);
        if k2 == 0.0 {
            continue;
        }
        let mut r = [Complex64::default(); 3];
        for a in 0..d {
            r[a] = specs[a][i];
        }
        let u = inverse_symbol(&grid.wavevector(i), k2, c, &r, d);
        for a in 0..d {
            out[a][i] = -u[a];
        }
    }
    let u = VectorField::new(out.into_iter().map(|s| grid.inverse(s)).collect()).expect("dims");
    let tensor = strain_tensor(grid, &u);
    Ok(LameSolution { u, tensor })
}

/// `grad U + grad U^T - (2/d) div U I`.
pub fn strain_tensor(grid: &Grid, u: &VectorField) -> SymTensorField0 {
    SymTensorField0::from_matrix_field(&grid.jacobian(u)).scale(2.0)
}

/// Forward operator `L U`.
pub fn lame_apply(grid: &Grid, u: &VectorField) -> VectorField {
    grid.div_tensor(&strain_tensor(grid, u))
}

/// `div(a (x) b)` with dealiased products, `(div(a (x) b))_j = sum_k d_k (a_j b_k)`.
fn div_outer(grid: &Grid, a: &VectorField, b: &VectorField) -> VectorField {
    let d = grid.dim();
    let comps = (0..d)
        .map(|j| {
            let flux = VectorField::new((0..d).map(|k| grid.product(a.comp(j), b.comp(k))).collect()).expect("dims");
            grid.div(&flux)
        })
        .collect();
    VectorField::new(comps).expect("dims")
}

/// Right-hand side of the first elliptic problem:
/// `div((h + grad p) (x) (V + grad Phi)) - (mean(g) - g)`, `g = d_t(rho h(rho))`.
pub fn m_rhs(grid: &Grid, model: &ModelFunctions, rho: &ScalarField, rho_t: &ScalarField, phi: &ScalarField, v_mean: &[f64]) -> VectorField {
    let a = model.velocity_offset(grid, rho);
    let b = grid.grad(phi).add_constant(v_mean);
    let transport = div_outer(grid, &a, &b);
    let g = model.dh_field(rho).mul_scalar(rho).add(&model.h_field(rho)).mul_scalar(rho_t);
    let g = g.map_comps(|c| {
        let c = grid.dealias(c);
        let m = grid.mean(&c);
        c.map(|x| x - m)
    });
    transport.add(&g)
}

/// First trace-free tensor at one instant.
pub fn build_m(grid: &Grid, model: &ModelFunctions, rho: &ScalarField, rho_t: &ScalarField, phi: &ScalarField, v_mean: &[f64]) -> Result<SymTensorField0> {
    Ok(lame_solve(grid, &m_rhs(grid, model, rho, rho_t, phi, v_mean))?.tensor)
}

/// `(v . grad)(h + grad p)`, the advective reading of the transport term.
pub fn n_rhs(grid: &Grid, model: &ModelFunctions, rho: &ScalarField, v: &VectorField) -> Result<VectorField> {
    let d = grid.dim();
    if v.dim() != d {
        return Err(Error::ShapeMismatch(format!("velocity needs {d} components")));
    }
    let div = grid.div(v).max_abs();
    let tol = SOLENOIDAL_TOL * (1.0 + v.max_abs() * std::f64::consts::PI * grid.n() as f64);
    if div > tol {
        return Err(Error::NotSolenoidal { div, tol });
    }
    let a = model.velocity_offset(grid, rho);
    let comps = (0..d)
        .map(|j| {
            let ga = grid.grad(a.comp(j));
            let mut acc = grid.zeros();
            for i in 0..d {
                acc = acc.add(&grid.product(v.comp(i), ga.comp(i)));
            }
            acc
        })
        .collect();
    Ok(VectorField::new(comps).expect("dims"))
}

/// Second trace-free tensor, linear in `v`.
pub fn build_n(grid: &Grid, model: &ModelFunctions, rho: &ScalarField, v: &VectorField) -> Result<SymTensorField0> {
    Ok(lame_solve(grid, &n_rhs(grid, model, rho, v)?)?.tensor)
}

/// Flux of the affine path `v(t) = (1 - t/T) v_0 + (t/T) v_T`: `d_t v + div F = 0`.
pub fn build_f(grid: &Grid, v0: &VectorField, v_end: &VectorField, t_final: f64) -> Result<SymTensorField0> {
    Ok(lame_solve(grid, &v_end.sub(v0).scale(-1.0 / t_final))?.tensor)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeRecord {
    /// `max |N[v_n] - N[v]|` per sequence element.
    pub distances: Vec<f64>,
    /// Distances never increase along the sequence.
    pub monotone: bool,
}

/// Measure `N[v_n] -> N[v]` along an increasingly oscillatory sequence.
pub fn weak_continuity_probe(grid: &Grid, model: &ModelFunctions, rho: &ScalarField, seq: &[VectorField], limit: &VectorField) -> Result<ProbeRecord> {
    let target = build_n(grid, model, rho, limit)?;
    let distances = seq
        .iter()
        .map(|v| Ok(build_n(grid, model, rho, v)?.sub(&target).max_abs()))
        .collect::<Result<Vec<_>>>()?;
    let monotone = distances.windows(2).all(|w| w[1] <= w[0]);
    Ok(ProbeRecord { distances, monotone })
}
