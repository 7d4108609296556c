//! Data compatibility and the spatial-mean momentum `V(t)`.
//!
//! `V` absorbs the mean of the momentum equation:
//! `V(t) = V_0 - (1/|T^d|) int_0^t int d_t(rho h(rho)) dx ds`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelFunctions;
use crate::profile::{check_mass, DensityProfileBundle, MASS_TOL};
use crate::quad::simpson_weights;
use crate::reduce::pairwise_sum_by;
use crate::spectral::{Grid, Helmholtz, ScalarField, VectorField};

/// Default relative tolerance for the momentum and endpoint conditions.
pub const MOMENTUM_TOL: f64 = 1e-8;
/// Default number of Simpson sub-panels per time interval in [`build_mean_drift`].
pub const DEFAULT_REFINE: usize = 64;

/// Initial and terminal data with the Helmholtz parts of their momenta.
#[derive(Clone, Debug)]
pub struct DataPair {
    pub rho0: ScalarField,
    pub u0: VectorField,
    pub rho_end: ScalarField,
    pub u_end: VectorField,
    pub initial: Helmholtz,
    pub terminal: Helmholtz,
}

impl DataPair {
    pub fn new(grid: &Grid, rho0: ScalarField, u0: VectorField, rho_end: ScalarField, u_end: VectorField) -> Result<Self> {
        for f in [&rho0, &rho_end] {
            if f.len() != grid.len() {
                return Err(Error::ShapeMismatch("density does not live on the grid".into()));
            }
        }
        for u in [&u0, &u_end] {
            if u.dim() != grid.dim() || u.len() != grid.len() {
                return Err(Error::ShapeMismatch(format!("velocity must have {} components on the grid", grid.dim())));
            }
        }
        let initial = grid.helmholtz(&u0.mul_scalar(&rho0));
        let terminal = grid.helmholtz(&u_end.mul_scalar(&rho_end));
        Ok(Self {
            rho0,
            u0,
            rho_end,
            u_end,
            initial,
            terminal,
        })
    }

    /// `int rho_0 u_0`.
    pub fn initial_momentum(&self, grid: &Grid) -> Vec<f64> {
        self.initial.mean.iter().map(|m| m * grid.volume()).collect()
    }

    pub fn terminal_momentum(&self, grid: &Grid) -> Vec<f64> {
        self.terminal.mean.iter().map(|m| m * grid.volume()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompatibilityReport {
    pub mass_defect: f64,
    pub momentum_defect: Vec<f64>,
    /// `|T^d| V(T) - (int rho_0 u_0 - int rho_T h(rho_T) + int rho_0 h(rho_0))`,
    /// filled in once the drift is built.
    pub endpoint_defect: Option<Vec<f64>>,
    pub mass_pass: bool,
    pub momentum_pass: bool,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompatibilityTolerances {
    pub mass: f64,
    pub momentum: f64,
}

impl Default for CompatibilityTolerances {
    fn default() -> Self {
        Self {
            mass: MASS_TOL,
            momentum: MOMENTUM_TOL,
        }
    }
}

fn momentum_scale(parts: &[&[f64]]) -> f64 {
    1.0 + parts.iter().flat_map(|p| p.iter()).fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Mass condition `int rho_0 = int rho_T` and momentum condition
/// `int rho_T u_T - int rho_0 u_0 = int rho_0 h(rho_0) - int rho_T h(rho_T)`.
pub fn check_compatibility(grid: &Grid, data: &DataPair, model: &ModelFunctions, tol: CompatibilityTolerances) -> CompatibilityReport {
    let m0 = grid.integrate(&data.rho0);
    let mt = grid.integrate(&data.rho_end);
    let mass_defect = (m0 - mt).abs();
    let mass_pass = mass_defect <= tol.mass * m0.abs();

    let p0 = data.initial_momentum(grid);
    let pt = data.terminal_momentum(grid);
    let f0 = grid.integrate_vector(&model.flux_field(&data.rho0));
    let ft = grid.integrate_vector(&model.flux_field(&data.rho_end));
    let momentum_defect: Vec<f64> = (0..grid.dim()).map(|i| (pt[i] - p0[i]) - (f0[i] - ft[i])).collect();
    let scale = momentum_scale(&[&p0, &pt, &f0, &ft]);
    let momentum_pass = momentum_defect.iter().all(|d| d.abs() <= tol.momentum * scale);
    CompatibilityReport {
        mass_defect,
        momentum_defect,
        endpoint_defect: None,
        mass_pass,
        momentum_pass,
        pass: mass_pass && momentum_pass,
    }
}

/// `V` and `V'` at the profile nodes.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct MeanDrift {
    pub times: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub dv: Vec<Vec<f64>>,
    /// Endpoint defect per component, see [`CompatibilityReport::endpoint_defect`].
    pub endpoint_defect: Vec<f64>,
}

impl MeanDrift {
    pub fn dim(&self) -> usize {
        self.v[0].len()
    }

    /// Cubic Hermite interpolation between nodes.
    pub fn at(&self, t: f64) -> Vec<f64> {
        let n = self.times.len();
        let k = match self.times.iter().position(|&s| s > t) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => n - 2,
        }
        .min(n - 2);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = ((t - t0) / h).clamp(0.0, 1.0);
        let (s2, s3) = (s * s, s * s * s);
        let (a, b, c, d) = (2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2);
        (0..self.dim())
            .map(|i| a * self.v[k][i] + b * h * self.dv[k][i] + c * self.v[k + 1][i] + d * h * self.dv[k + 1][i])
            .collect()
    }
}

/// `-(1/|T^d|) int (h + rho h') d_t rho dx` at time `t`.
fn drift_rate(grid: &Grid, model: &ModelFunctions, rho: &ScalarField, rho_t: &ScalarField) -> Vec<f64> {
    let d = grid.dim();
    let (r, rt) = (rho.values(), rho_t.values());
    let w = grid.spacing().powi(d as i32) / grid.volume();
    (0..d)
        .map(|i| -w * pairwise_sum_by(r.len(), |j| model.flux_derivative(r[j])[i] * rt[j]))
        .collect()
}

/// Integrate `V'` by cumulative composite Simpson with `refine` sub-panels
/// (rounded up to even) per node interval, split at the ends of the bump
/// supports, then check the endpoint identity.
pub fn build_mean_drift(
    grid: &Grid,
    profile: &DensityProfileBundle,
    model: &ModelFunctions,
    v0: &[f64],
    refine: usize,
    tol: f64,
) -> Result<MeanDrift> {
    let d = grid.dim();
    if v0.len() != d {
        return Err(Error::ShapeMismatch(format!("mean momentum needs {d} components")));
    }
    let refine = refine.max(2).next_multiple_of(2);
    let time = profile.time;
    let nodes = time.nodes();
    let rate_at = |t: f64| {
        let s = profile.profile.state_at(t);
        drift_rate(grid, model, &s.rho, &s.rho_t)
    };

    let (kink0, kink_t) = profile.profile.shapes.supports();
    let dv: Vec<Vec<f64>> = profile.nodes.iter().map(|n| drift_rate(grid, model, &n.rho, &n.rho_t)).collect();
    let mut v = vec![v0.to_vec()];
    for k in 0..time.n_t - 1 {
        let (a, b) = (nodes[k], nodes[k + 1]);
        // The bumps are only C^2 where their supports end; split there.
        let mut cuts = vec![a];
        cuts.extend([kink0, kink_t].into_iter().filter(|&c| c > a && c < b));
        cuts.push(b);
        let mut inc = vec![0.0; d];
        for piece in cuts.windows(2) {
            let h = (piece[1] - piece[0]) / refine as f64;
            let w = simpson_weights(refine, h);
            for (j, wj) in w.iter().enumerate() {
                let t = piece[0] + j as f64 * h;
                let r = if j == 0 && piece[0] == a {
                    dv[k].clone()
                } else if j == refine && piece[1] == b {
                    dv[k + 1].clone()
                } else {
                    rate_at(if j == refine { piece[1] } else { t })
                };
                for i in 0..d {
                    inc[i] += wj * r[i];
                }
            }
        }
        let last = v.last().expect("non-empty");
        v.push((0..d).map(|i| last[i] + inc[i]).collect());
    }

    let vol = grid.volume();
    let f0 = grid.integrate_vector(&model.flux_field(&profile.profile.rho0));
    let ft = grid.integrate_vector(&model.flux_field(&profile.profile.rho_end));
    let v_end = v.last().expect("non-empty");
    let endpoint_defect: Vec<f64> = (0..d).map(|i| vol * v_end[i] - (vol * v0[i] - ft[i] + f0[i])).collect();
    let scale = momentum_scale(&[&v0.iter().map(|x| x * vol).collect::<Vec<_>>(), &f0, &ft]);
    let worst = endpoint_defect.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if worst > tol * scale {
        return Err(Error::EndpointMismatch {
            defect: worst,
            tol: tol * scale,
        });
    }
    Ok(MeanDrift {
        times: nodes,
        v,
        dv,
        endpoint_defect,
    })
}

/// Mass check shared with the profile, exposed for data validation.
pub fn check_data_mass(grid: &Grid, data: &DataPair) -> Result<()> {
    check_mass(grid, &data.rho0, &data.rho_end)
}
