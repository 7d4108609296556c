//! Affine subsolution, energy level schedules and the membership test
//!
//! ```text
//! (d/2) lambda_max[ m (x) m / rho - F + M + N[v] ] < e,
//! e = Lambda - (d/2) d_t(Phi + P(rho)),   m = v + V + grad Phi.
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::{DataPair, MeanDrift};
use crate::eigen::SymMatrix;
use crate::error::{Error, Result};
use crate::lame::{build_f, build_m, build_n};
use crate::model::ModelFunctions;
use crate::profile::{DensityProfileBundle, TimeGrid};
use crate::spectral::{Grid, ScalarField, SymTensorField0, VectorField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    /// `Lambda` as small as membership allows, plus a margin.
    Minimal,
    /// Non-increasing `Lambda` certifying the energy inequality on static data.
    Admissible,
}

#[derive(Clone, Debug)]
pub struct SubsolutionNode {
    pub t: f64,
    pub v: VectorField,
    pub m: SymTensorField0,
    pub n: SymTensorField0,
    /// `(d/2) lambda_max[K]`.
    pub kinetic: ScalarField,
    /// `(d/2) (d_t Phi + P'(rho) d_t rho)`.
    pub potential: ScalarField,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSchedule {
    pub mode: ScheduleMode,
    pub eta: f64,
    pub times: Vec<f64>,
    pub lambda: Vec<f64>,
    pub dlambda: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SubsolutionBundle {
    pub profile: DensityProfileBundle,
    pub drift: MeanDrift,
    pub v0: VectorField,
    pub v_end: VectorField,
    pub f: SymTensorField0,
    pub nodes: Vec<SubsolutionNode>,
    pub schedule: LambdaSchedule,
}

impl SubsolutionBundle {
    /// `e = Lambda - (d/2) d_t(Phi + P)` at node `k`.
    pub fn energy_density(&self, k: usize) -> ScalarField {
        let l = self.schedule.lambda[k];
        self.nodes[k].potential.map(|q| l - q)
    }

    /// `m = v + V + grad Phi` at node `k`.
    pub fn momentum(&self, grid: &Grid, k: usize) -> VectorField {
        momentum(grid, &self.nodes[k].v, &self.drift.v[k], &self.profile.nodes[k].phi)
    }
}

pub fn momentum(grid: &Grid, v: &VectorField, v_mean: &[f64], phi: &ScalarField) -> VectorField {
    v.add(&grid.grad(phi)).add_constant(v_mean)
}

/// `K = m (x) m / rho - F + M + N` at one grid point.
pub fn k_matrix(idx: usize, rho: &ScalarField, m: &VectorField, f: &SymTensorField0, mm: &SymTensorField0, nn: &SymTensorField0) -> SymMatrix {
    let d = m.dim();
    let w = m.at(idx);
    SymMatrix::outer(&w[..d])
        .scale(1.0 / rho.values()[idx])
        .sub(&f.at(idx))
        .add(&mm.at(idx))
        .add(&nn.at(idx))
}

/// `(d/2) lambda_max[K]` on the grid.
pub fn kinetic_field(rho: &ScalarField, m: &VectorField, f: &SymTensorField0, mm: &SymTensorField0, nn: &SymTensorField0) -> ScalarField {
    let half_d = 0.5 * m.dim() as f64;
    ScalarField::new(
        (0..rho.len())
            .into_par_iter()
            .map(|i| half_d * k_matrix(i, rho, m, f, mm, nn).lambda_max())
            .collect(),
    )
}

/// `(d/2) (d_t Phi + P'(rho) d_t rho)`.
pub fn potential_field(model: &ModelFunctions, rho: &ScalarField, rho_t: &ScalarField, phi_t: &ScalarField, dim: usize) -> ScalarField {
    let half_d = 0.5 * dim as f64;
    let dp = rho.map(|r| model.potential_derivative(r));
    phi_t.add(&dp.mul(rho_t)).scale(half_d)
}

/// Affine path `(1 - t/T) v_0 + (t/T) v_T`, exact at both ends.
pub fn affine_path(v0: &VectorField, v_end: &VectorField, time: &TimeGrid, k: usize) -> VectorField {
    if k == 0 {
        return v0.clone();
    }
    if k + 1 == time.n_t {
        return v_end.clone();
    }
    let s = time.node(k) / time.t_final;
    v0.scale(1.0 - s).axpy(s, v_end)
}

/// Everything except the energy level.
pub struct Assembly {
    pub v0: VectorField,
    pub v_end: VectorField,
    pub f: SymTensorField0,
    pub nodes: Vec<SubsolutionNode>,
}

pub fn assemble(grid: &Grid, model: &ModelFunctions, data: &DataPair, profile: &DensityProfileBundle, drift: &MeanDrift) -> Result<Assembly> {
    let d = grid.dim();
    let time = profile.time;
    let v0 = data.initial.solenoidal.clone();
    let v_end = data.terminal.solenoidal.clone();
    let f = build_f(grid, &v0, &v_end, time.t_final)?;
    let nodes = profile
        .nodes
        .par_iter()
        .enumerate()
        .map(|(k, node)| {
            model.check_field(&node.rho)?;
            let v = affine_path(&v0, &v_end, &time, k);
            let mm = build_m(grid, model, &node.rho, &node.rho_t, &node.phi, &drift.v[k])?;
            let nn = build_n(grid, model, &node.rho, &v)?;
            let m = momentum(grid, &v, &drift.v[k], &node.phi);
            Ok(SubsolutionNode {
                t: node.t,
                kinetic: kinetic_field(&node.rho, &m, &f, &mm, &nn),
                potential: potential_field(model, &node.rho, &node.rho_t, &node.phi_t, d),
                v,
                m: mm,
                n: nn,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Assembly { v0, v_end, f, nodes })
}

/// Fritsch-Carlson slopes of the monotone cubic interpolant through `(t, y)`.
pub fn monotone_slopes(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / (t[k + 1] - t[k])).collect();
    let mut m = vec![0.0; n];
    m[0] = delta[0];
    m[n - 1] = delta[n - 2];
    for k in 1..n - 1 {
        m[k] = if delta[k - 1] * delta[k] <= 0.0 {
            0.0
        } else {
            0.5 * (delta[k - 1] + delta[k])
        };
    }
    for k in 0..n - 1 {
        if delta[k] == 0.0 {
            m[k] = 0.0;
            m[k + 1] = 0.0;
            continue;
        }
        let a = m[k] / delta[k];
        let b = m[k + 1] / delta[k];
        let s = a * a + b * b;
        if s > 9.0 {
            let tau = 3.0 / s.sqrt();
            m[k] = tau * a * delta[k];
            m[k + 1] = tau * b * delta[k];
        }
    }
    m
}

/// `Lambda(t_k) = max_x { (d/2) lambda_max[K] + (d/2) d_t(Phi + P) } + eta`.
pub fn schedule_lambda_minimal(nodes: &[SubsolutionNode], eta: f64) -> Result<LambdaSchedule> {
    if !(eta > 0.0) {
        return Err(Error::Config(format!("energy margin eta must be positive, got {eta}")));
    }
    let times: Vec<f64> = nodes.iter().map(|n| n.t).collect();
    let lambda: Vec<f64> = nodes
        .iter()
        .map(|n| n.kinetic.zip_map(&n.potential, |a, b| a + b).max() + eta)
        .collect();
    let dlambda = monotone_slopes(&times, &lambda);
    Ok(LambdaSchedule {
        mode: ScheduleMode::Minimal,
        eta,
        times,
        lambda,
        dlambda,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeMargin {
    pub t: f64,
    pub min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MembershipReport {
    pub tau: f64,
    pub nodes: Vec<NodeMargin>,
    pub margin: f64,
    pub pass: bool,
}

/// `min_x (e - (d/2) lambda_max[K])` per node from the cached fields.
pub fn membership_from_parts(times: &[f64], kinetic: &[&ScalarField], potential: &[&ScalarField], lambda: &[f64], tau: f64) -> MembershipReport {
    let nodes: Vec<NodeMargin> = (0..times.len())
        .filter(|&k| tau <= 0.0 || times[k] > tau)
        .map(|k| {
            let l = lambda[k];
            let min = kinetic[k]
                .zip_map(potential[k], |s, q| l - q - s)
                .min();
            NodeMargin { t: times[k], min }
        })
        .collect();
    let margin = nodes.iter().map(|n| n.min).fold(f64::INFINITY, f64::min);
    MembershipReport {
        tau,
        nodes,
        margin,
        pass: margin > 0.0,
    }
}

/// Check the strict inequality on every node of `(tau, T]`, or of `[0, T]`
/// when `tau = 0`.
pub fn check_membership(bundle: &SubsolutionBundle, tau: f64) -> MembershipReport {
    let kinetic: Vec<&ScalarField> = bundle.nodes.iter().map(|n| &n.kinetic).collect();
    let potential: Vec<&ScalarField> = bundle.nodes.iter().map(|n| &n.potential).collect();
    let times: Vec<f64> = bundle.nodes.iter().map(|n| n.t).collect();
    membership_from_parts(&times, &kinetic, &potential, &bundle.schedule.lambda, tau)
}

// ------------------------------------------------------------------------
// Admissible schedule

/// Constants of the conservative bound on `|int rho (u + h + grad p) (x) u : grad h|`
/// when `|v|^2 / (2 rho) = Lambda`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyBound {
    pub volume: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    /// `sup |h'(rho_0) (x) grad rho_0|` (Frobenius).
    pub grad_h: f64,
    /// `sup |h(rho_0) + grad p(rho_0)|`.
    pub offset: f64,
}

impl EnergyBound {
    pub fn new(grid: &Grid, model: &ModelFunctions, rho0: &ScalarField) -> Self {
        let grad = grid.grad(rho0);
        let dh = model.dh_field(rho0);
        let d = grid.dim();
        let grad_h = (0..rho0.len())
            .map(|i| {
                let (a, b) = (dh.at(i), grad.at(i));
                let mut s = 0.0;
                for j in 0..d {
                    for k in 0..d {
                        s += (a[j] * b[k]).powi(2);
                    }
                }
                s.sqrt()
            })
            .fold(0.0, f64::max);
        Self {
            volume: grid.volume(),
            rho_min: rho0.min(),
            rho_max: rho0.max(),
            grad_h,
            offset: model.velocity_offset(grid, rho0).max_norm(),
        }
    }

    /// `|T^d| rho_max G (sqrt(2 Lambda / rho_min) + A) sqrt(2 Lambda / rho_min)`.
    pub fn eval(&self, lambda: f64) -> f64 {
        let s = (2.0 * lambda.max(0.0) / self.rho_min).sqrt();
        self.volume * self.rho_max * self.grad_h * (s + self.offset) * s
    }

    /// `Lambda' = -(2/|T^d|) BOUND(Lambda)`.
    pub fn rate(&self, lambda: f64) -> f64 {
        -2.0 / self.volume * self.eval(lambda)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdmissibleSchedule {
    pub bound: EnergyBound,
    pub times: Vec<f64>,
    pub lambda: Vec<f64>,
    pub dlambda: Vec<f64>,
}

impl AdmissibleSchedule {
    /// `(|T^d|/2) Lambda'(t_k) + BOUND(Lambda(t_k))` per node; zero up to rounding.
    pub fn derivative_certificate(&self) -> Vec<f64> {
        self.lambda
            .iter()
            .zip(&self.dlambda)
            .map(|(&l, &dl)| 0.5 * self.bound.volume * dl + self.bound.eval(l))
            .collect()
    }

    /// `(|T^d|/2) (Lambda_{k+1} - Lambda_k)/dt + BOUND(Lambda_{k+1})` per step.
    /// Non-positive up to integration error because BOUND grows with Lambda and
    /// Lambda decreases across the step.
    pub fn step_certificate(&self) -> Vec<f64> {
        self.step_values(|_, next| next)
    }

    /// As [`AdmissibleSchedule::step_certificate`] with `BOUND(Lambda_k)`; positive at
    /// first order in the step whenever the bound is active.
    pub fn left_step_certificate(&self) -> Vec<f64> {
        self.step_values(|prev, _| prev)
    }

    fn step_values(&self, pick: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.lambda
            .windows(2)
            .zip(self.times.windows(2))
            .map(|(l, t)| 0.5 * self.bound.volume * (l[1] - l[0]) / (t[1] - t[0]) + self.bound.eval(pick(l[0], l[1])))
            .collect()
    }
}

/// Integrate `Lambda' = -(2/|T^d|) BOUND(Lambda)` by classical RK4 with
/// `substeps` steps per node interval.
pub fn schedule_lambda_admissible(
    grid: &Grid,
    model: &ModelFunctions,
    rho0: &ScalarField,
    lambda0: f64,
    time: TimeGrid,
    substeps: usize,
) -> Result<AdmissibleSchedule> {
    if !(lambda0 > 0.0) {
        return Err(Error::Config(format!("initial energy level must be positive, got {lambda0}")));
    }
    model.check_field(rho0)?;
    let bound = EnergyBound::new(grid, model, rho0);
    let substeps = substeps.max(1);
    let times = time.nodes();
    let mut lambda = vec![lambda0];
    let mut l = lambda0;
    for k in 0..time.n_t - 1 {
        let h = (times[k + 1] - times[k]) / substeps as f64;
        for s in 0..substeps {
            let k1 = bound.rate(l);
            let k2 = bound.rate(l + 0.5 * h * k1);
            let k3 = bound.rate(l + 0.5 * h * k2);
            let k4 = bound.rate(l + h * k3);
            l += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !(l > 0.0) {
                return Err(Error::LambdaDepleted {
                    t: times[k] + (s + 1) as f64 * h,
                });
            }
        }
        lambda.push(l);
    }
    let dlambda = lambda.iter().map(|&l| bound.rate(l)).collect();
    Ok(AdmissibleSchedule {
        bound,
        times,
        lambda,
        dlambda,
    })
}

// ------------------------------------------------------------------------
// Energy

/// `E = (1/2) rho |u + h(rho) + grad p(rho)|^2` and its integral.
pub fn energy_field(grid: &Grid, model: &ModelFunctions, rho: &ScalarField, u: &VectorField) -> (ScalarField, f64) {
    let w = u.add(&model.velocity_offset(grid, rho));
    let e = w.norm_squared().mul(rho).scale(0.5);
    let total = grid.integrate(&e);
    (e, total)
}

/// Total energy carried by solutions emanating from the subsolution: the
/// kinetic part `|m|^2 / (2 rho) = e` is fixed by the energy level, the part
/// linear in the momentum is taken from the subsolution.
/// `int e + int m . (h + grad p) + (1/2) int rho |h + grad p|^2`.
pub fn solution_energy(grid: &Grid, model: &ModelFunctions, rho: &ScalarField, m: &VectorField, e: &ScalarField) -> f64 {
    let a = model.velocity_offset(grid, rho);
    let cross = m.dot(&a);
    let offset = a.norm_squared().mul(rho).scale(0.5);
    let vals = e.add(&cross).add(&offset);
    grid.integrate(&vals)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyVerdict {
    pub pass: bool,
    pub tol: f64,
    /// Largest `E(t_{k+1}) - E(t_k)` and largest `E(t_k) - E(t_0)`.
    pub max_uptick: f64,
    pub max_excess: f64,
    /// First node at which either inequality fails.
    pub first_violation: Option<f64>,
}

/// `E(t_{k+1}) <= E(t_k) + tol` and `E(t_k) <= E(t_0) + tol` for all `k`.
pub fn energy_monitor(times: &[f64], totals: &[f64], tol: f64) -> EnergyVerdict {
    let mut max_uptick = f64::NEG_INFINITY;
    let mut max_excess = f64::NEG_INFINITY;
    let mut first = None;
    for k in 0..totals.len() {
        let excess = totals[k] - totals[0];
        max_excess = max_excess.max(excess);
        let up = if k > 0 { totals[k] - totals[k - 1] } else { 0.0 };
        max_uptick = max_uptick.max(up);
        if (up > tol || excess > tol) && first.is_none() {
            first = Some(times[k]);
        }
    }
    EnergyVerdict {
        pass: first.is_none(),
        tol,
        max_uptick: max_uptick.max(0.0),
        max_excess: max_excess.max(0.0),
        first_violation: first,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_slopes_preserve_flat_runs() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let s = monotone_slopes(&t, &[1.0, 1.0, 0.5, 0.5]);
        assert_eq!(s[0], 0.0);
        assert_eq!(s[3], 0.0);
        assert!(s[1] <= 0.0 && s[2] <= 0.0);
    }

    #[test]
    fn energy_vanishes_when_velocity_cancels_offset() {
        let g = Grid::new(2, 16).unwrap();
        let pi = std::f64::consts::PI;
        let rho = g.sample(|x| 2.0 + 0.2 * (pi * x[0]).sin());
        let model = ModelFunctions::power_law(2, 2.0).unwrap().with_offset(crate::model::Offset::Linear(vec![0.5, 0.1])).unwrap();
        let u = model.velocity_offset(&g, &rho).scale(-1.0);
        let (e, total) = energy_field(&g, &model, &rho, &u);
        assert_eq!(e.max_abs(), 0.0);
        assert_eq!(total, 0.0);
    }

    #[test]
    fn monitor_locates_uptick() {
        let t = [0.0, 0.25, 0.5, 0.75, 1.0];
        let ok = energy_monitor(&t, &[3.0, 3.0, 3.0, 3.0, 3.0], 1e-12);
        assert!(ok.pass);
        let bad = energy_monitor(&t, &[3.0, 2.9, 3.2, 2.8, 2.7], 1e-12);
        assert!(!bad.pass);
        assert_eq!(bad.first_violation, Some(0.5));
        assert!((bad.max_uptick - 0.3).abs() < 1e-12);
    }

    #[test]
    fn constant_offset_keeps_lambda_constant() {
        let g = Grid::new(2, 16).unwrap();
        let rho = g.sample(|x| 2.0 + 0.3 * (std::f64::consts::PI * x[0]).sin());
        let model = ModelFunctions::power_law(2, 2.0).unwrap().with_offset(crate::model::Offset::Constant(vec![1.0, 0.0])).unwrap();
        let s = schedule_lambda_admissible(&g, &model, &rho, 2.0, TimeGrid::new(1.0, 9).unwrap(), 4).unwrap();
        assert!(s.lambda.iter().all(|&l| l == 2.0));
    }
}
