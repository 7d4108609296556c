//! Built-in data sets.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::spectral::{Grid, ScalarField, VectorField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// `rho_0 = rho_T` non-constant, zero velocities.
    StaticAdmissible,
    /// Distinct single-mode densities with equal mass and compatible momenta
    /// for any `h = c rho`.
    TwoModeTransfer,
    /// Initial mean density 2, terminal mean density 3.
    IncompatibleDemo,
}

#[derive(Clone, Debug)]
pub struct ScenarioData {
    pub rho0: ScalarField,
    pub u0: VectorField,
    pub rho_end: ScalarField,
    pub u_end: VectorField,
}

fn velocity(grid: &Grid, f: impl Fn(&[f64]) -> [f64; 2]) -> VectorField {
    let d = grid.dim();
    grid.sample_vector(|x| {
        let v = f(x);
        let mut out = vec![0.0; d];
        out[..2].copy_from_slice(&v);
        out
    })
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::StaticAdmissible => "static-admissible",
            Scenario::TwoModeTransfer => "two-mode-transfer",
            Scenario::IncompatibleDemo => "incompatible-demo",
        }
    }

    pub fn data(&self, grid: &Grid) -> ScenarioData {
        let d = grid.dim();
        match self {
            Scenario::StaticAdmissible => {
                let rho = grid.sample(|x| {
                    let extra = if d == 3 { 0.1 * (PI * x[2]).sin() } else { 0.0 };
                    2.0 + 0.3 * (PI * x[0]).sin() + 0.2 * (PI * x[1]).cos() + extra
                });
                ScenarioData {
                    rho0: rho.clone(),
                    u0: grid.zero_vector(),
                    rho_end: rho,
                    u_end: grid.zero_vector(),
                }
            }
            Scenario::TwoModeTransfer => ScenarioData {
                rho0: grid.sample(|x| 2.0 + 0.5 * (PI * x[0]).sin()),
                u0: velocity(grid, |x| [(PI * x[1]).sin(), (PI * x[0]).sin()]),
                rho_end: grid.sample(|x| 2.0 + 0.5 * (PI * x[1]).cos()),
                u_end: velocity(grid, |x| [(PI * x[0]).cos(), (PI * x[1]).cos()]),
            },
            Scenario::IncompatibleDemo => ScenarioData {
                rho0: grid.sample(|x| 2.0 + 0.3 * (PI * x[0]).sin()),
                u0: grid.zero_vector(),
                rho_end: grid.sample(|x| 3.0 + 0.3 * (PI * x[1]).cos()),
                u_end: grid.zero_vector(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_mode_transfer_has_equal_mass_and_momentum() {
        for (d, n) in [(2, 16), (3, 8)] {
            let g = Grid::new(d, n).unwrap();
            let s = Scenario::TwoModeTransfer.data(&g);
            assert!((g.integrate(&s.rho0) - g.integrate(&s.rho_end)).abs() < 1e-12);
            let p0 = g.integrate_vector(&s.u0.mul_scalar(&s.rho0));
            let pt = g.integrate_vector(&s.u_end.mul_scalar(&s.rho_end));
            for i in 0..d {
                assert!((p0[i] - pt[i]).abs() < 1e-12);
            }
            // int rho^2 agrees, so int rho h(rho) agrees for h = c rho
            let q0 = g.integrate(&s.rho0.mul(&s.rho0));
            let qt = g.integrate(&s.rho_end.mul(&s.rho_end));
            assert!((q0 - qt).abs() < 1e-12);
        }
    }

    #[test]
    fn names_match_serde() {
        for s in [Scenario::StaticAdmissible, Scenario::TwoModeTransfer, Scenario::IncompatibleDemo] {
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
    }
}
