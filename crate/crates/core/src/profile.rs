//! Density profile joining `rho_0` to `rho_T`:
//!
//! ```text
//! rho(t) = H(t) rho_0 + (1 - H(t)) rho_T + Z_0(t) lap Phi_0 + Z_T(t) lap Phi_T
//! ```
//!
//! with `H` a smoothstep and `Z_0`, `Z_T` short bumps whose unit slopes at the
//! endpoints reproduce `d_t rho = -lap Phi` there. The acoustic potential at
//! every node solves `lap Phi = -d_t rho`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Grid, ScalarField};

/// Relative tolerance on `|int rho_0 - int rho_T|`.
pub const MASS_TOL: f64 = 1e-10;
/// Default positivity margin: `rho >= (1 - theta) min(inf rho_0, inf rho_T)`.
pub const DEFAULT_THETA: f64 = 0.05;
const MAX_HALVINGS: usize = 60;
// Z support length in units of delta; 27 * 9 / 256 < 1 keeps |Z| < delta.
const SUPPORT_PER_DELTA: f64 = 9.0;

/// Uniform time grid with an odd number of nodes, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_final: f64,
    pub n_t: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, n_t: usize) -> Result<Self> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidTimeGrid(format!("final time must be positive, got {t_final}")));
        }
        if n_t < 3 || n_t % 2 == 0 {
            return Err(Error::InvalidTimeGrid(format!("node count must be odd and at least 3, got {n_t}")));
        }
        Ok(Self { t_final, n_t })
    }

    pub fn step(&self) -> f64 {
        self.t_final / (self.n_t - 1) as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k + 1 == self.n_t {
            self.t_final
        } else {
            k as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_t).map(|k| self.node(k)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeKind {
    H,
    Z0,
    ZT,
}

/// Value, first and second time derivative.
pub type ShapeValue = [f64; 3];

/// The three time shapes for a given `T`, `delta` and support windows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeShapes {
    t_final: f64,
    delta: f64,
    s0: f64,
    s_t: f64,
    sigma0: f64,
    sigma_t: f64,
}

impl TimeShapes {
    pub fn new(t_final: f64, delta: f64, s0: f64, s_t: f64) -> Result<Self> {
        if !(0.0 < s0 && s0 < s_t && s_t < t_final) {
            return Err(Error::BadWindow { s0, s_t, t_final });
        }
        if !(delta > 0.0) {
            return Err(Error::InvalidTimeGrid(format!("bump height must be positive, got {delta}")));
        }
        Ok(Self {
            t_final,
            delta,
            s0,
            s_t,
            sigma0: s0.min(SUPPORT_PER_DELTA * delta),
            sigma_t: (t_final - s_t).min(SUPPORT_PER_DELTA * delta),
        })
    }

    /// Windows `s_0 = T/4`, `s_T = 3T/4`.
    pub fn with_default_windows(t_final: f64, delta: f64) -> Result<Self> {
        Self::new(t_final, delta, 0.25 * t_final, 0.75 * t_final)
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn windows(&self) -> (f64, f64) {
        (self.s0, self.s_t)
    }

    /// Supports `[0, sigma_0]` and `[T - sigma_T, T]` of the two bumps.
    pub fn supports(&self) -> (f64, f64) {
        (self.sigma0, self.t_final - self.sigma_t)
    }

    pub fn eval(&self, kind: ShapeKind, t: f64) -> ShapeValue {
        match kind {
            ShapeKind::H => self.h(t),
            ShapeKind::Z0 => self.z0(t),
            ShapeKind::ZT => self.zt(t),
        }
    }

    /// `H(t) = 1 - S(t/T)`, `S(s) = 10 s^3 - 15 s^4 + 6 s^5`.
    pub fn h(&self, t: f64) -> ShapeValue {
        let tf = self.t_final;
        let s = (t / tf).clamp(0.0, 1.0);
        let v = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
        let d1 = 30.0 * s * s * (1.0 - s) * (1.0 - s);
        let d2 = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
        [1.0 - v, -d1 / tf, -d2 / (tf * tf)]
    }

    /// `Z_0(t) = -t (1 - t/sigma_0)^3` on `[0, sigma_0]`, zero after.
    pub fn z0(&self, t: f64) -> ShapeValue {
        let [v, d1, d2] = bump(t, self.sigma0);
        [-v, -d1, -d2]
    }

    /// `Z_T(t) = tau (1 - tau/sigma_T)^3`, `tau = T - t`, on `[T - sigma_T, T]`.
    pub fn zt(&self, t: f64) -> ShapeValue {
        let [v, d1, d2] = bump(self.t_final - t, self.sigma_t);
        [v, -d1, d2]
    }

    /// `max |Z_0|`, attained at `sigma_0 / 4`.
    pub fn z0_max(&self) -> f64 {
        27.0 * self.sigma0 / 256.0
    }

    pub fn zt_max(&self) -> f64 {
        27.0 * self.sigma_t / 256.0
    }
}

/// `b(tau) = tau (1 - tau/sigma)^3` on `[0, sigma)`, else 0. `b'(0) = 1` and the
/// triple root makes the extension by zero C^2 at `sigma`.
fn bump(tau: f64, sigma: f64) -> ShapeValue {
    if !(0.0..sigma).contains(&tau) {
        return [0.0; 3];
    }
    let r = 1.0 - tau / sigma;
    let v = tau * r * r * r;
    let d1 = r * r * r - 3.0 * tau * r * r / sigma;
    let d2 = -6.0 * r * r / sigma + 6.0 * tau * r / (sigma * sigma);
    [v, d1, d2]
}

/// Density and its first two time derivatives at one instant.
#[derive(Clone, Debug)]
pub struct DensityState {
    pub rho: ScalarField,
    pub rho_t: ScalarField,
    pub rho_tt: ScalarField,
}

/// Closed-form profile, evaluable at any time.
#[derive(Clone, Debug)]
pub struct DensityProfile {
    pub rho0: ScalarField,
    pub rho_end: ScalarField,
    pub lap_phi0: ScalarField,
    pub lap_phi_end: ScalarField,
    pub shapes: TimeShapes,
}

impl DensityProfile {
    pub fn state_at(&self, t: f64) -> DensityState {
        let h = self.shapes.h(t);
        let z0 = self.shapes.z0(t);
        let zt = self.shapes.zt(t);
        let combine = |k: usize| -> ScalarField {
            let mut out = self.rho0.scale(h[k]);
            out = out.axpy(if k == 0 { 1.0 - h[0] } else { -h[k] }, &self.rho_end);
            if z0[k] != 0.0 {
                out = out.axpy(z0[k], &self.lap_phi0);
            }
            if zt[k] != 0.0 {
                out = out.axpy(zt[k], &self.lap_phi_end);
            }
            out
        };
        DensityState {
            rho: combine(0),
            rho_t: combine(1),
            rho_tt: combine(2),
        }
    }

    /// `inf rho` bound from the shape amplitudes, valid for every `t`.
    pub fn lower_bound(&self) -> f64 {
        lower_bound(
            self.rho0.min().min(self.rho_end.min()),
            &self.shapes,
            self.lap_phi0.max_abs(),
            self.lap_phi_end.max_abs(),
        )
    }
}

fn lower_bound(m: f64, shapes: &TimeShapes, a0: f64, at: f64) -> f64 {
    m - shapes.z0_max() * a0 - shapes.zt_max() * at
}

/// Profile sampled at one node, together with its acoustic potential.
#[derive(Clone, Debug)]
pub struct ProfileNode {
    pub t: f64,
    pub rho: ScalarField,
    pub rho_t: ScalarField,
    pub rho_tt: ScalarField,
    pub phi: ScalarField,
    pub phi_t: ScalarField,
}

#[derive(Clone, Debug)]
pub struct DensityProfileBundle {
    pub time: TimeGrid,
    pub delta: f64,
    pub theta: f64,
    pub rho_min: f64,
    pub profile: DensityProfile,
    pub nodes: Vec<ProfileNode>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeConfig {
    /// Initial bump height; `None` selects the automatic start value.
    pub delta0: Option<f64>,
    /// Support windows; `None` selects `T/4` and `3T/4`.
    pub s0: Option<f64>,
    pub s_t: Option<f64>,
    pub theta: f64,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        Self {
            delta0: None,
            s0: None,
            s_t: None,
            theta: DEFAULT_THETA,
        }
    }
}

pub fn check_mass(grid: &Grid, rho0: &ScalarField, rho_end: &ScalarField) -> Result<()> {
    let initial = grid.integrate(rho0);
    let terminal = grid.integrate(rho_end);
    if (initial - terminal).abs() > MASS_TOL * initial.abs() {
        return Err(Error::IncompatibleMass { initial, terminal });
    }
    Ok(())
}

/// Build the profile and sample it on `time`. `phi0`, `phi_end` are the
/// gradient potentials of the initial and terminal momenta.
pub fn build_profile(
    grid: &Grid,
    rho0: &ScalarField,
    rho_end: &ScalarField,
    phi0: &ScalarField,
    phi_end: &ScalarField,
    shapes: ShapeConfig,
    time: TimeGrid,
) -> Result<DensityProfileBundle> {
    for r in [rho0, rho_end] {
        if r.min() <= 0.0 {
            return Err(Error::NonPositiveDensity(r.min()));
        }
    }
    check_mass(grid, rho0, rho_end)?;

    let lap_phi0 = grid.laplacian(phi0);
    let lap_phi_end = grid.laplacian(phi_end);
    let (a0, at) = (lap_phi0.max_abs(), lap_phi_end.max_abs());
    let m = rho0.min().min(rho_end.min());
    let t_final = time.t_final;
    let s0 = shapes.s0.unwrap_or(0.25 * t_final);
    let s_t = shapes.s_t.unwrap_or(0.75 * t_final);
    let target = (1.0 - shapes.theta) * m;

    let mut delta = shapes.delta0.unwrap_or(0.1 * m / (1.0 + a0.max(at)));
    let mut accepted = None;
    for _ in 0..=MAX_HALVINGS {
        let s = TimeShapes::new(t_final, delta, s0, s_t)?;
        if lower_bound(m, &s, a0, at) >= target {
            accepted = Some(s);
            break;
        }
        delta *= 0.5;
    }
    let shapes = accepted.ok_or(Error::PositivityFailure {
        delta,
        rho_min: lower_bound(m, &TimeShapes::new(t_final, delta, s0, s_t)?, a0, at),
    })?;

    let profile = DensityProfile {
        rho0: rho0.clone(),
        rho_end: rho_end.clone(),
        lap_phi0,
        lap_phi_end,
        shapes,
    };
    let nodes = (0..time.n_t)
        .into_par_iter()
        .map(|k| {
            let t = time.node(k);
            let mut s = profile.state_at(t);
            // exact endpoint data
            if k == 0 {
                s.rho = rho0.clone();
            } else if k + 1 == time.n_t {
                s.rho = rho_end.clone();
            }
            let phi = grid.poisson_solve(&s.rho_t.scale(-1.0))?;
            let phi_t = grid.poisson_solve(&s.rho_tt.scale(-1.0))?;
            Ok(ProfileNode {
                t,
                rho: s.rho,
                rho_t: s.rho_t,
                rho_tt: s.rho_tt,
                phi,
                phi_t,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let rho_min = nodes.iter().map(|n| n.rho.min()).fold(f64::INFINITY, f64::min);
    if rho_min <= 0.0 {
        return Err(Error::PositivityFailure {
            delta: shapes.delta(),
            rho_min,
        });
    }
    Ok(DensityProfileBundle {
        time,
        delta: shapes.delta(),
        theta: shapes_theta(m, rho_min),
        rho_min,
        profile,
        nodes,
    })
}

/// Realised margin `1 - rho_min / m`, clamped at zero.
fn shapes_theta(m: f64, rho_min: f64) -> f64 {
    (1.0 - rho_min / m).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central(f: impl Fn(f64) -> f64, t: f64) -> f64 {
        let h = 1e-5;
        (f(t + h) - f(t - h)) / (2.0 * h)
    }

    #[test]
    fn shape_endpoint_values() {
        let s = TimeShapes::new(1.0, 1e-2, 0.25, 0.75).unwrap();
        assert_eq!(s.h(0.0), [1.0, 0.0, 0.0]);
        assert_eq!(s.h(1.0)[..2], [0.0, 0.0]);
        assert_eq!(s.z0(0.0)[..2], [0.0, -1.0]);
        assert_eq!(s.zt(1.0)[..2], [0.0, -1.0]);
        let zmax = (0..10001).map(|i| s.z0(i as f64 * 1e-4)[0].abs()).fold(0.0, f64::max);
        assert!(zmax < 1e-2 && zmax > 0.0);
        assert!((s.z0_max() - 27.0 * 0.09 / 256.0).abs() < 1e-15);
    }

    #[test]
    fn shape_derivatives_match_finite_differences() {
        let s = TimeShapes::new(2.0, 0.02, 0.5, 1.5).unwrap();
        for kind in [ShapeKind::H, ShapeKind::Z0, ShapeKind::ZT] {
            for i in 1..400 {
                let t = i as f64 * 0.005;
                let [_, d1, d2] = s.eval(kind, t);
                let fd1 = central(|x| s.eval(kind, x)[0], t);
                assert!((fd1 - d1).abs() <= 1e-6 * d1.abs().max(1.0), "{kind:?} d1 at {t}");
                // the third derivative jumps at the support ends
                let (a, b) = s.supports();
                if (t - a).abs() > 1e-4 && (t - b).abs() > 1e-4 {
                    let fd2 = central(|x| s.eval(kind, x)[1], t);
                    assert!((fd2 - d2).abs() <= 1e-6 * d2.abs().max(1.0), "{kind:?} d2 at {t}");
                }
            }
        }
    }

    #[test]
    fn bad_window() {
        assert!(matches!(TimeShapes::new(1.0, 0.1, 0.6, 0.5), Err(Error::BadWindow { .. })));
        assert!(TimeGrid::new(1.0, 4).is_err());
    }

    #[test]
    fn constant_profile_is_static() {
        let g = Grid::new(2, 8).unwrap();
        let c = g.constant(1.5);
        let b = build_profile(&g, &c, &c, &g.zeros(), &g.zeros(), ShapeConfig::default(), TimeGrid::new(1.0, 5).unwrap()).unwrap();
        for n in &b.nodes {
            assert!(n.rho.sub(&c).max_abs() < 1e-15);
            assert_eq!(n.phi.max_abs(), 0.0);
        }
        assert_eq!(b.rho_min, 1.5);
    }
}
