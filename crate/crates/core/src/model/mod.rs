//! Velocity offset `h(rho) + grad p(rho)` and the potentials derived from it.
//!
//! `P` and `Q` both satisfy `P'(rho) = Q'(rho) = rho p'(rho)`; `P` enters the
//! energy level through `d_t P(rho)`, `Q` the viscous reformulation through
//! `grad Q(rho)`, so additive constants never matter.

mod identity;
mod table;

use std::sync::Arc;

pub use identity::{
    check_1d_equivalence, check_viscous_form_identity, IdentityReport, Line1dState, TorusState, Viscosity,
};
pub use table::{HermiteCurve, ModelTable, NaturalSpline};

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;
use crate::spectral::{Grid, ScalarField, VectorField};

/// Default guard for the singular family, as a fraction of the maximal density.
pub const SINGULAR_MARGIN: f64 = 1e-3;
const POTENTIAL_TOL: f64 = 1e-12;

/// The scalar part `p` of the offset.
#[derive(Clone, Debug)]
pub enum Pressure {
    Zero,
    /// `p = rho^gamma`
    Power { gamma: f64 },
    /// `p = (1/rho - 1/rho_max)^(-gamma)` on `(0, rho_max (1 - margin))`.
    Singular { gamma: f64, rho_max: f64, margin: f64 },
    Table(Arc<ModelTable>),
}

/// The vector part `h` of the offset.
#[derive(Clone, Debug)]
pub enum Offset {
    Zero,
    /// `h = c`
    Constant(Vec<f64>),
    /// `h = c * rho`
    Linear(Vec<f64>),
    Table(Arc<ModelTable>),
}

#[derive(Clone, Debug)]
pub struct ModelFunctions {
    dim: usize,
    pressure: Pressure,
    offset: Offset,
    domain: (f64, f64),
}

impl ModelFunctions {
    pub fn new(dim: usize, pressure: Pressure, offset: Offset) -> Result<Self> {
        let mut domain = (0.0, f64::INFINITY);
        match &pressure {
            Pressure::Zero => {}
            Pressure::Power { gamma } => {
                if !(*gamma > 0.0) {
                    return Err(Error::InvalidModel(format!("power-law exponent must be positive, got {gamma}")));
                }
            }
            Pressure::Singular { gamma, rho_max, margin } => {
                if !(*gamma > 0.0 && *rho_max > 0.0 && (0.0..1.0).contains(margin)) {
                    return Err(Error::InvalidModel(format!(
                        "singular cost needs gamma > 0, rho_max > 0, margin in [0, 1); got {gamma}, {rho_max}, {margin}"
                    )));
                }
                domain.1 = rho_max * (1.0 - margin);
            }
            Pressure::Table(t) => domain = t.domain(),
        }
        match &offset {
            Offset::Constant(c) | Offset::Linear(c) if c.len() != dim => {
                return Err(Error::InvalidModel(format!("offset vector has {} entries for dimension {dim}", c.len())));
            }
            Offset::Table(t) => {
                if t.offset.len() != dim {
                    return Err(Error::InvalidModel(format!("table has {} offset columns for dimension {dim}", t.offset.len())));
                }
                let (lo, hi) = t.domain();
                domain = (domain.0.max(lo), domain.1.min(hi));
            }
            _ => {}
        }
        Ok(Self {
            dim,
            pressure,
            offset,
            domain,
        })
    }

    /// `p = rho^gamma`, `h = 0`.
    pub fn power_law(dim: usize, gamma: f64) -> Result<Self> {
        Self::new(dim, Pressure::Power { gamma }, Offset::Zero)
    }

    /// `p = (1/rho - 1/rho_max)^(-gamma)` with the default domain guard.
    pub fn singular_cost(dim: usize, gamma: f64, rho_max: f64) -> Result<Self> {
        Self::new(
            dim,
            Pressure::Singular {
                gamma,
                rho_max,
                margin: SINGULAR_MARGIN,
            },
            Offset::Zero,
        )
    }

    /// `p = 0`, `h = 0`.
    pub fn trivial(dim: usize) -> Self {
        Self::new(dim, Pressure::Zero, Offset::Zero).expect("trivial model is valid")
    }

    pub fn with_offset(self, offset: Offset) -> Result<Self> {
        Self::new(self.dim, self.pressure, offset)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pressure(&self) -> &Pressure {
        &self.pressure
    }

    pub fn offset(&self) -> &Offset {
        &self.offset
    }

    /// Open interval of validity.
    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn check_density(&self, rho: f64) -> Result<()> {
        let (lo, hi) = self.domain;
        let table = matches!(self.pressure, Pressure::Table(_)) || matches!(self.offset, Offset::Table(_));
        let ok = if table { rho >= lo && rho <= hi } else { rho > lo && rho < hi };
        if ok && rho.is_finite() {
            Ok(())
        } else {
            Err(Error::DomainViolation { rho, lo, hi })
        }
    }

    pub fn check_field(&self, rho: &ScalarField) -> Result<()> {
        self.check_density(rho.min())?;
        self.check_density(rho.max())
    }

    /// True when `h` is independent of the density (`h' = 0`).
    pub fn offset_is_constant(&self) -> bool {
        matches!(self.offset, Offset::Zero | Offset::Constant(_))
    }

    // ---------------------------------------------------------- scalar p --

    pub fn p(&self, rho: f64) -> f64 {
        match &self.pressure {
            Pressure::Zero => 0.0,
            Pressure::Power { gamma } => rho.powf(*gamma),
            Pressure::Singular { gamma, rho_max, .. } => (1.0 / rho - 1.0 / rho_max).powf(-gamma),
            Pressure::Table(t) => t.pressure.eval(rho).0,
        }
    }

    pub fn dp(&self, rho: f64) -> f64 {
        match &self.pressure {
            Pressure::Zero => 0.0,
            Pressure::Power { gamma } => gamma * rho.powf(gamma - 1.0),
            Pressure::Singular { gamma, rho_max, .. } => {
                let s = 1.0 / rho - 1.0 / rho_max;
                gamma * s.powf(-gamma - 1.0) / (rho * rho)
            }
            Pressure::Table(t) => t.pressure.eval(rho).1,
        }
    }

    pub fn d2p(&self, rho: f64) -> f64 {
        match &self.pressure {
            Pressure::Zero => 0.0,
            Pressure::Power { gamma } => gamma * (gamma - 1.0) * rho.powf(gamma - 2.0),
            Pressure::Singular { gamma, rho_max, .. } => {
                let s = 1.0 / rho - 1.0 / rho_max;
                let r2 = rho * rho;
                gamma * (gamma + 1.0) * s.powf(-gamma - 2.0) / (r2 * r2) - 2.0 * gamma * s.powf(-gamma - 1.0) / (r2 * rho)
            }
            Pressure::Table(t) => t.pressure.eval(rho).2,
        }
    }

    /// `P(rho)` with `P' = rho p'`.
    pub fn potential(&self, rho: f64) -> f64 {
        match &self.pressure {
            Pressure::Zero => 0.0,
            Pressure::Power { gamma } => gamma * rho.powf(gamma + 1.0) / (gamma + 1.0),
            Pressure::Singular { rho_max, .. } => self.numerical_potential(rho, 0.5 * rho_max),
            Pressure::Table(t) => {
                let (lo, hi) = t.domain();
                self.numerical_potential(rho, 0.5 * (lo + hi))
            }
        }
    }

    fn numerical_potential(&self, rho: f64, reference: f64) -> f64 {
        adaptive_simpson(&|r: f64| r * self.dp(r), reference, rho, POTENTIAL_TOL)
    }

    /// `P'(rho)`, family-specific closed form where one exists.
    pub fn potential_derivative(&self, rho: f64) -> f64 {
        match &self.pressure {
            Pressure::Zero => 0.0,
            Pressure::Power { gamma } => gamma * rho.powf(*gamma),
            _ => rho * self.dp(rho),
        }
    }

    /// `Q(rho)`; identical to `P` up to the additive constant, which is zero here.
    pub fn q(&self, rho: f64) -> f64 {
        self.potential(rho)
    }

    /// `Q'(rho) = rho p'(rho)`.
    pub fn q_derivative(&self, rho: f64) -> f64 {
        rho * self.dp(rho)
    }

    // ---------------------------------------------------------- vector h --

    /// `h(rho)`, padded to three entries.
    pub fn h(&self, rho: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        match &self.offset {
            Offset::Zero => {}
            Offset::Constant(c) => out[..self.dim].copy_from_slice(c),
            Offset::Linear(c) => {
                for (o, ci) in out.iter_mut().zip(c) {
                    *o = ci * rho;
                }
            }
            Offset::Table(t) => {
                for (o, s) in out.iter_mut().zip(&t.offset) {
                    *o = s.eval(rho).0;
                }
            }
        }
        out
    }

    /// `h'(rho)`.
    pub fn dh(&self, rho: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        match &self.offset {
            Offset::Zero | Offset::Constant(_) => {}
            Offset::Linear(c) => out[..self.dim].copy_from_slice(c),
            Offset::Table(t) => {
                for (o, s) in out.iter_mut().zip(&t.offset) {
                    *o = s.eval(rho).1;
                }
            }
        }
        out
    }

    /// `(rho h(rho))' = h + rho h'`.
    pub fn flux_derivative(&self, rho: f64) -> [f64; 3] {
        let h = self.h(rho);
        let dh = self.dh(rho);
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = h[i] + rho * dh[i];
        }
        out
    }

    // ------------------------------------------------------------ fields --

    pub fn p_field(&self, rho: &ScalarField) -> ScalarField {
        rho.map(|r| self.p(r))
    }

    pub fn dp_field(&self, rho: &ScalarField) -> ScalarField {
        rho.map(|r| self.dp(r))
    }

    pub fn h_field(&self, rho: &ScalarField) -> VectorField {
        self.vector_map(rho, |r| self.h(r))
    }

    pub fn dh_field(&self, rho: &ScalarField) -> VectorField {
        self.vector_map(rho, |r| self.dh(r))
    }

    /// `rho h(rho)`.
    pub fn flux_field(&self, rho: &ScalarField) -> VectorField {
        self.vector_map(rho, |r| {
            let mut h = self.h(r);
            h.iter_mut().for_each(|v| *v *= r);
            h
        })
    }

    fn vector_map(&self, rho: &ScalarField, f: impl Fn(f64) -> [f64; 3]) -> VectorField {
        let mut comps = vec![Vec::with_capacity(rho.len()); self.dim];
        for &r in rho.values() {
            let v = f(r);
            for (c, vi) in comps.iter_mut().zip(v) {
                c.push(vi);
            }
        }
        VectorField::new(comps.into_iter().map(ScalarField::new).collect()).expect("equal lengths")
    }

    /// `grad p(rho) = p'(rho) grad rho`.
    pub fn grad_p(&self, grid: &Grid, rho: &ScalarField) -> VectorField {
        grid.grad(rho).mul_scalar(&self.dp_field(rho))
    }

    /// `h(rho) + grad p(rho)`.
    pub fn velocity_offset(&self, grid: &Grid, rho: &ScalarField) -> VectorField {
        self.h_field(rho).add(&self.grad_p(grid, rho))
    }
}
