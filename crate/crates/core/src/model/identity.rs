//! Pointwise checks of the two algebraic reformulations of the momentum
//! equation: the one-dimensional equivalence with the pressureless
//! Navier-Stokes system, and the multi-dimensional viscous form with `Q` and
//! the lower order term `L`.
//!
//! Both identities hold modulo the continuity residual `C = d_t rho +
//! div(rho u)`: the exact relation is `R_lhs - R_rhs = grad(k(rho) C)` with
//! `k = mu/rho` in one dimension and `k = Q'` in general.

use serde::Serialize;

use super::ModelFunctions;
use crate::error::{Error, Result};
use crate::spectral::{Grid, ScalarField, VectorField};

/// `mu(rho) = coef * rho^alpha`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Viscosity {
    pub coef: f64,
    pub alpha: f64,
}

impl Viscosity {
    pub fn new(coef: f64, alpha: f64) -> Self {
        Self { coef, alpha }
    }

    pub fn mu(&self, rho: f64) -> f64 {
        if self.coef == 0.0 {
            0.0
        } else {
            self.coef * rho.powf(self.alpha)
        }
    }

    pub fn dmu(&self, rho: f64) -> f64 {
        if self.coef == 0.0 || self.alpha == 0.0 {
            0.0
        } else {
            self.coef * self.alpha * rho.powf(self.alpha - 1.0)
        }
    }
}

/// Density and velocity with their time derivatives at one instant on a line grid.
#[derive(Clone, Debug)]
pub struct Line1dState {
    pub rho: ScalarField,
    pub rho_t: ScalarField,
    pub u: ScalarField,
    pub u_t: ScalarField,
}

/// Density and velocity with their time derivatives at one instant on the torus.
#[derive(Clone, Debug)]
pub struct TorusState {
    pub rho: ScalarField,
    pub rho_t: ScalarField,
    pub u: VectorField,
    pub u_t: VectorField,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    /// `max |R_lhs - R_rhs|`.
    pub discrepancy: f64,
    /// `max |d_t rho + div(rho u)|`.
    pub continuity_residual: f64,
    /// `max |grad(k C)|`, the discrepancy the continuity defect accounts for.
    pub predicted: f64,
    /// `max |R_lhs - R_rhs - grad(k C)|`.
    pub corrected: f64,
}

fn continuity_guard(residual: f64, tol: f64) -> Result<()> {
    if residual > tol {
        Err(Error::ContinuityViolated { residual, tol })
    } else {
        Ok(())
    }
}

/// Compares `d_t(rho w) + d_x(rho w u)` with `d_t(rho u) + d_x(rho u^2) -
/// d_x(mu d_x u)` for `w = u + (mu/rho^2) d_x rho`.
pub fn check_1d_equivalence(grid: &Grid, state: &Line1dState, mu: Viscosity, continuity_tol: f64) -> Result<IdentityReport> {
    if grid.dim() != 1 {
        return Err(Error::InvalidGrid("the one-dimensional check needs a line grid".into()));
    }
    let Line1dState { rho, rho_t, u, u_t } = state;
    if rho.min() <= 0.0 {
        return Err(Error::NonPositiveDensity(rho.min()));
    }
    let dx = |f: &ScalarField| grid.partial(f, 0);

    let rho_x = dx(rho);
    let mu_f = rho.map(|r| mu.mu(r));
    let mu_over_rho = mu_f.zip_map(rho, |m, r| m / r);
    let continuity = rho_t.add(&dx(&rho.mul(u)));
    let c_max = continuity.max_abs();
    continuity_guard(c_max, continuity_tol)?;

    // d_t(rho u) = rho_t u + rho u_t
    let momentum_t = rho_t.mul(u).add(&rho.mul(u_t));
    // rho w = rho u + (mu/rho) rho_x, and
    // d_t((mu/rho) rho_x) = (mu'/rho - mu/rho^2) rho_t rho_x + (mu/rho) d_x rho_t
    let drift = mu_over_rho.mul(&rho_x);
    let drift_t = {
        let coef = rho.zip_map(&mu_f, |r, m| mu.dmu(r) / r - m / (r * r));
        coef.mul(rho_t).mul(&rho_x).add(&mu_over_rho.mul(&dx(rho_t)))
    };
    let rho_w = rho.mul(u).add(&drift);

    let lhs = momentum_t.add(&drift_t).add(&dx(&rho_w.mul(u)));
    let rhs = momentum_t
        .add(&dx(&rho.mul(u).mul(u)))
        .sub(&dx(&mu_f.mul(&dx(u))));
    let diff = lhs.sub(&rhs);
    let predicted = dx(&mu_over_rho.mul(&continuity));
    Ok(IdentityReport {
        discrepancy: diff.max_abs(),
        continuity_residual: c_max,
        predicted: predicted.max_abs(),
        corrected: diff.sub(&predicted).max_abs(),
    })
}

/// Compares `d_t(rho w) + div(rho w (x) u)` for `w = u + grad p(rho)` with
/// `d_t(rho u) + div(rho u (x) u) - grad(rho Q'(rho) div u) - L[grad Q, grad u]`.
pub fn check_viscous_form_identity(
    grid: &Grid,
    model: &ModelFunctions,
    state: &TorusState,
    continuity_tol: f64,
) -> Result<IdentityReport> {
    if !matches!(model.offset(), super::Offset::Zero) {
        return Err(Error::InvalidModel("the viscous reformulation needs h = 0".into()));
    }
    let TorusState { rho, rho_t, u, u_t } = state;
    let d = grid.dim();
    if u.dim() != d || u_t.dim() != d {
        return Err(Error::ShapeMismatch(format!("velocity must have {d} components")));
    }
    if rho.min() <= 0.0 {
        return Err(Error::NonPositiveDensity(rho.min()));
    }
    model.check_field(rho)?;

    let rho_u = u.mul_scalar(rho);
    let continuity = rho_t.add(&grid.div(&rho_u));
    let c_max = continuity.max_abs();
    continuity_guard(c_max, continuity_tol)?;

    let grad_rho = grid.grad(rho);
    let grad_rho_t = grid.grad(rho_t);
    let dp = model.dp_field(rho);
    let dq = rho.map(|r| model.q_derivative(r));
    let div_u = grid.div(u);
    let ju = grid.jacobian(u);

    // d_t(rho u), shared by both sides
    let momentum_t = u.mul_scalar(rho_t).add(&u_t.mul_scalar(rho));
    // d_t(rho p' grad rho) = (p' + rho p'') rho_t grad rho + rho p' grad rho_t
    let offset_t = {
        let a = rho.map(|r| model.dp(r) + r * model.d2p(r)).mul(rho_t);
        grad_rho.mul_scalar(&a).add(&grad_rho_t.mul_scalar(&rho.mul(&dp)))
    };
    let rho_w = rho_u.add(&grad_rho.mul_scalar(&rho.mul(&dp)));
    let grad_q = grad_rho.mul_scalar(&dq);

    let div_outer = |a: &VectorField| -> VectorField {
        let comps = (0..d)
            .map(|j| {
                let flux = VectorField::new((0..d).map(|k| a.comp(j).mul(u.comp(k))).collect()).expect("dims");
                grid.div(&flux)
            })
            .collect();
        VectorField::new(comps).expect("dims")
    };

    let lhs = momentum_t.add(&offset_t).add(&div_outer(&rho_w));
    let pressure_like = grid.grad(&rho.mul(&dq).mul(&div_u));
    let lower = {
        let comps = (0..d)
            .map(|j| {
                let mut acc = grid.zeros();
                for i in 0..d {
                    acc = acc
                        .add(&grad_q.comp(i).mul(ju.comp(i, j)))
                        .sub(&grad_q.comp(j).mul(ju.comp(i, i)));
                }
                acc
            })
            .collect();
        VectorField::new(comps).expect("dims")
    };
    let rhs = momentum_t.add(&div_outer(&rho_u)).sub(&pressure_like).sub(&lower);
    let diff = lhs.sub(&rhs);
    let predicted = grid.grad(&dq.mul(&continuity));
    Ok(IdentityReport {
        discrepancy: diff.max_abs(),
        continuity_residual: c_max,
        predicted: predicted.max_abs(),
        corrected: diff.sub(&predicted).max_abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_state_has_no_discrepancy() {
        let g = Grid::line(32).unwrap();
        let s = Line1dState {
            rho: g.constant(2.0),
            rho_t: g.zeros(),
            u: g.constant(0.7),
            u_t: g.zeros(),
        };
        let r = check_1d_equivalence(&g, &s, Viscosity::new(1.0, 1.0), 1e-10).unwrap();
        assert_eq!(r.discrepancy, 0.0);
    }

    #[test]
    fn zero_viscosity_coincides() {
        let g = Grid::line(64).unwrap();
        let rho = g.sample(|x| 2.0 + 0.3 * (std::f64::consts::PI * x[0]).sin());
        let u = g.constant(0.0);
        let s = Line1dState {
            rho: rho.clone(),
            rho_t: g.zeros(),
            u,
            u_t: g.sample(|x| x[0].cos()),
        };
        let r = check_1d_equivalence(&g, &s, Viscosity::new(0.0, 1.0), 1e-10).unwrap();
        assert_eq!(r.discrepancy, 0.0);
    }

    #[test]
    fn broken_continuity_is_rejected() {
        let g = Grid::line(32).unwrap();
        let s = Line1dState {
            rho: g.constant(2.0),
            rho_t: g.constant(1.0),
            u: g.zeros(),
            u_t: g.zeros(),
        };
        let err = check_1d_equivalence(&g, &s, Viscosity::new(1.0, 1.0), 1e-6).unwrap_err();
        assert!(matches!(err, Error::ContinuityViolated { .. }));
    }
}
