//! End-to-end construction, bundle persistence and bundle verification.
//!
//! Bundle layout:
//!
//! ```text
//! meta.json  config.json  compatibility.json  drift.json  membership.json
//! lambda.csv (t, lambda, dlambda)   energy.csv (t, energy)
//! conserved.csv (t, mass, w_1 .. w_d)   F.fld   admissible.json (admissible mode)
//! nodes/NNNN/{rho, rho_t, phi, phi_t, v, M, N}.fld
//! report.json (written by verification)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Check1dConfig, DataSource, RunConfig};
use crate::drift::{build_mean_drift, check_compatibility, CompatibilityReport, CompatibilityTolerances, DataPair, MeanDrift};
use crate::error::{Error, Result};
use crate::lame::{build_m, build_n, m_rhs, n_rhs};
use crate::model::{check_1d_equivalence, IdentityReport, Line1dState, ModelFunctions, Viscosity};
use crate::profile::{build_profile, DensityProfile, DensityProfileBundle, TimeGrid, TimeShapes};
use crate::spectral::io::{read_scalar, read_tensor, read_vector, write_field, StoredField};
use crate::spectral::{Grid, Helmholtz, ScalarField, SymTensorField0, VectorField};
use crate::subsolution::{
    assemble, energy_monitor, kinetic_field, membership_from_parts, momentum, potential_field, schedule_lambda_admissible,
    schedule_lambda_minimal, solution_energy, AdmissibleSchedule, EnergyBound, EnergyVerdict, LambdaSchedule, MembershipReport,
    ScheduleMode, SubsolutionBundle,
};
use crate::verify::{
    continuity_sample, gauss_samples, odot_trace_defect, weak_residual, Check, VerificationReport, WeakBasis, WeakResidual, WeakSample,
};

// ------------------------------------------------------------------------
// Data

/// Initial and terminal data named by the configuration.
pub fn load_data(cfg: &RunConfig, grid: &Grid) -> Result<DataPair> {
    match cfg.data.source()? {
        DataSource::Scenario(s) => {
            let d = s.data(grid);
            DataPair::new(grid, d.rho0, d.u0, d.rho_end, d.u_end)
        }
        DataSource::Files { rho0, u0, rho_end, u_end } => {
            let check = |p: &Path, h: &crate::spectral::io::FieldHeader| {
                if h.d != grid.dim() || h.n != grid.n() {
                    Err(Error::MalformedFile {
                        path: p.to_path_buf(),
                        offset: 0,
                        msg: format!("header has d = {}, n = {}; the configuration asks for d = {}, n = {}", h.d, h.n, grid.dim(), grid.n()),
                    })
                } else {
                    Ok(())
                }
            };
            let (h, r0) = read_scalar(rho0)?;
            check(rho0, &h)?;
            let (h, v0) = read_vector(u0)?;
            check(u0, &h)?;
            let (h, rt) = read_scalar(rho_end)?;
            check(rho_end, &h)?;
            let (h, vt) = read_vector(u_end)?;
            check(u_end, &h)?;
            DataPair::new(grid, r0, v0, rt, vt)
        }
    }
}

fn compatibility_tolerances(cfg: &RunConfig) -> CompatibilityTolerances {
    CompatibilityTolerances {
        mass: cfg.tolerances.mass,
        momentum: cfg.tolerances.momentum,
    }
}

// ------------------------------------------------------------------------
// Build

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub n_t: usize,
    pub delta: f64,
    pub theta: f64,
    pub rho_min: f64,
    pub s0: f64,
    #[serde(rename = "sT")]
    pub s_t: f64,
    pub mode: ScheduleMode,
    pub eta: f64,
    pub tau: f64,
    /// Mean momenta of the initial and terminal data.
    pub initial_mean: Vec<f64>,
    pub terminal_mean: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    pub bound: EnergyBound,
    pub derivative: Vec<f64>,
    /// `(|T^d|/2) (Lambda_{k+1} - Lambda_k)/dt + BOUND(Lambda_{k+1})`.
    pub step: Vec<f64>,
    /// Same with `BOUND(Lambda_k)`; informational.
    pub left_step: Vec<f64>,
}

impl CertificateReport {
    fn new(s: &AdmissibleSchedule) -> Self {
        Self {
            bound: s.bound,
            derivative: s.derivative_certificate(),
            step: s.step_certificate(),
            left_step: s.left_step_certificate(),
        }
    }
}

pub struct BuildOutput {
    pub config: RunConfig,
    pub grid: Grid,
    pub model: ModelFunctions,
    pub data: DataPair,
    pub compatibility: CompatibilityReport,
    pub bundle: SubsolutionBundle,
    pub certificate: Option<CertificateReport>,
    pub membership: MembershipReport,
    pub energy: Vec<f64>,
    pub energy_verdict: EnergyVerdict,
    pub conserved: Conserved,
}

impl BuildOutput {
    pub fn meta(&self) -> BundleMeta {
        let p = &self.bundle.profile;
        let (s0, s_t) = p.profile.shapes.windows();
        BundleMeta {
            d: self.grid.dim(),
            n: self.grid.n(),
            t_final: p.time.t_final,
            n_t: p.time.n_t,
            delta: p.delta,
            theta: p.theta,
            rho_min: p.rho_min,
            s0,
            s_t,
            mode: self.bundle.schedule.mode,
            eta: self.bundle.schedule.eta,
            tau: self.config.schedule.tau,
            initial_mean: self.data.initial.mean.clone(),
            terminal_mean: self.data.terminal.mean.clone(),
        }
    }
}

/// Run every construction stage. Compatibility failures stop the run unless
/// `force` is set; with `force` the mean-momentum endpoint identity is
/// recorded instead of enforced.
pub fn build(cfg: &RunConfig, force: bool) -> Result<BuildOutput> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let model = cfg.model()?;
    let time = cfg.time_grid()?;
    let data = load_data(cfg, &grid)?;
    model.check_field(&data.rho0)?;
    model.check_field(&data.rho_end)?;

    let mut compatibility = check_compatibility(&grid, &data, &model, compatibility_tolerances(cfg));
    if !compatibility.mass_pass {
        return Err(Error::IncompatibleMass {
            initial: grid.integrate(&data.rho0),
            terminal: grid.integrate(&data.rho_end),
        });
    }
    if !compatibility.momentum_pass && !force {
        let defect = compatibility.momentum_defect.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        return Err(Error::IncompatibleMomentum {
            defect,
            tol: cfg.tolerances.momentum,
        });
    }

    let profile = build_profile(
        &grid,
        &data.rho0,
        &data.rho_end,
        &data.initial.potential,
        &data.terminal.potential,
        cfg.shape_config(),
        time,
    )?;
    let endpoint_tol = if force { f64::INFINITY } else { cfg.tolerances.momentum };
    let drift = build_mean_drift(&grid, &profile, &model, &data.initial.mean, cfg.verify.drift_refine, endpoint_tol)?;
    compatibility.endpoint_defect = Some(drift.endpoint_defect.clone());

    let assembly = assemble(&grid, &model, &data, &profile, &drift)?;
    let (schedule, certificate) = match cfg.schedule.mode {
        ScheduleMode::Minimal => (schedule_lambda_minimal(&assembly.nodes, cfg.schedule.eta)?, None),
        ScheduleMode::Admissible => {
            require_static(&grid, &profile, &drift, &data)?;
            let lambda0 = cfg.schedule.lambda0.expect("validated");
            let s = schedule_lambda_admissible(&grid, &model, &data.rho0, lambda0, time, cfg.schedule.substeps)?;
            let cert = CertificateReport::new(&s);
            (
                LambdaSchedule {
                    mode: ScheduleMode::Admissible,
                    eta: cfg.schedule.eta,
                    times: s.times,
                    lambda: s.lambda,
                    dlambda: s.dlambda,
                },
                Some(cert),
            )
        }
    };

    let bundle = SubsolutionBundle {
        profile,
        drift,
        v0: assembly.v0,
        v_end: assembly.v_end,
        f: assembly.f,
        nodes: assembly.nodes,
        schedule,
    };
    let times = bundle.schedule.times.clone();
    let kinetic: Vec<&ScalarField> = bundle.nodes.iter().map(|n| &n.kinetic).collect();
    let potential: Vec<&ScalarField> = bundle.nodes.iter().map(|n| &n.potential).collect();
    let membership = membership_from_parts(&times, &kinetic, &potential, &bundle.schedule.lambda, cfg.schedule.tau);

    let energy: Vec<f64> = (0..times.len())
        .map(|k| {
            let m = bundle.momentum(&grid, k);
            solution_energy(&grid, &model, &bundle.profile.nodes[k].rho, &m, &bundle.energy_density(k))
        })
        .collect();
    let energy_verdict = energy_monitor(&times, &energy, cfg.tolerances.energy * (1.0 + energy[0].abs()));
    let conserved = conserved_quantities(
        &grid,
        &model,
        &times,
        &bundle.profile.nodes.iter().map(|n| n.rho.clone()).collect::<Vec<_>>(),
        &(0..times.len()).map(|k| bundle.momentum(&grid, k)).collect::<Vec<_>>(),
    );

    Ok(BuildOutput {
        config: cfg.clone(),
        grid,
        model,
        data,
        compatibility,
        bundle,
        certificate,
        membership,
        energy,
        energy_verdict,
        conserved,
    })
}

/// The admissible schedule assumes a static density with zero potential and mean drift.
fn require_static(grid: &Grid, profile: &DensityProfileBundle, drift: &MeanDrift, data: &DataPair) -> Result<()> {
    let scale = 1.0 + data.rho0.max_abs();
    let moving = data.rho0.sub(&data.rho_end).max_abs() > 1e-14 * scale
        || data.initial.potential.max_abs() > 0.0
        || data.terminal.potential.max_abs() > 0.0
        || drift.v.iter().flatten().any(|&x| x != 0.0)
        || profile.nodes.iter().any(|n| n.rho_t.max_abs() > 0.0);
    if moving {
        return Err(Error::Config(format!(
            "the admissible schedule needs a static density with zero potential and zero mean momentum on the {}-dimensional grid",
            grid.dim()
        )));
    }
    Ok(())
}

// ------------------------------------------------------------------------
// Conserved quantities

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Conserved {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    /// `int rho w = int (m + rho (h + grad p))`.
    pub w_momentum: Vec<Vec<f64>>,
    pub mass_drift: f64,
    pub w_momentum_drift: f64,
}

pub fn conserved_quantities(grid: &Grid, model: &ModelFunctions, times: &[f64], rho: &[ScalarField], m: &[VectorField]) -> Conserved {
    let mass: Vec<f64> = rho.iter().map(|r| grid.integrate(r)).collect();
    let w_momentum: Vec<Vec<f64>> = rho
        .iter()
        .zip(m)
        .map(|(r, m)| grid.integrate_vector(&m.add(&model.velocity_offset(grid, r).mul_scalar(r))))
        .collect();
    let mass_drift = crate::verify::drift_from_start(&mass);
    let w_momentum_drift = (0..grid.dim())
        .map(|i| crate::verify::drift_from_start(&w_momentum.iter().map(|w| w[i]).collect::<Vec<_>>()))
        .fold(0.0, f64::max);
    Conserved {
        times: times.to_vec(),
        mass,
        w_momentum,
        mass_drift,
        w_momentum_drift,
    }
}

// ------------------------------------------------------------------------
// Persistence

/// Exclusive marker for a bundle directory, removed on drop.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(".lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "{} is locked by another run (remove {} if no run is active)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Write rows of numbers with a header; `Display` for `f64` round-trips exactly.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|x| x.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Config(format!("{}: row {}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn node_dir(dir: &Path, k: usize) -> PathBuf {
    dir.join("nodes").join(format!("{k:04}"))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Persist a build. The configuration copy omits the output directory so that
/// bundles written to different places are byte-identical.
pub fn write_bundle(dir: &Path, out: &BuildOutput) -> Result<()> {
    create_dir(dir)?;
    let _lock = DirLock::acquire(dir)?;
    let (d, n) = (out.grid.dim(), out.grid.n());
    let b = &out.bundle;

    let mut cfg = out.config.clone();
    cfg.output = None;
    write_json(&dir.join("config.json"), &cfg)?;
    write_json(&dir.join("meta.json"), &out.meta())?;
    write_json(&dir.join("compatibility.json"), &out.compatibility)?;
    write_json(&dir.join("drift.json"), &b.drift)?;
    write_json(&dir.join("membership.json"), &out.membership)?;
    let admissible = dir.join("admissible.json");
    match &out.certificate {
        Some(c) => write_json(&admissible, c)?,
        None if admissible.exists() => fs::remove_file(&admissible).map_err(|e| Error::io(&admissible, e))?,
        None => {}
    }
    write_field(&dir.join("F.fld"), d, n, &StoredField::Tensor0(b.f.clone()))?;

    let s = &b.schedule;
    write_csv(
        &dir.join("lambda.csv"),
        &["t".into(), "lambda".into(), "dlambda".into()],
        &(0..s.times.len()).map(|k| vec![s.times[k], s.lambda[k], s.dlambda[k]]).collect::<Vec<_>>(),
    )?;
    write_energy_csv(&dir.join("energy.csv"), &s.times, &out.energy)?;
    write_conserved_csv(&dir.join("conserved.csv"), &out.conserved)?;

    b.profile
        .nodes
        .par_iter()
        .zip(&b.nodes)
        .enumerate()
        .try_for_each(|(k, (p, s))| -> Result<()> {
            let nd = node_dir(dir, k);
            create_dir(&nd)?;
            let fields = [
                ("rho", StoredField::Scalar(p.rho.clone())),
                ("rho_t", StoredField::Scalar(p.rho_t.clone())),
                ("phi", StoredField::Scalar(p.phi.clone())),
                ("phi_t", StoredField::Scalar(p.phi_t.clone())),
                ("v", StoredField::Vector(s.v.clone())),
                ("M", StoredField::Tensor0(s.m.clone())),
                ("N", StoredField::Tensor0(s.n.clone())),
            ];
            for (name, f) in &fields {
                write_field(&nd.join(format!("{name}.fld")), d, n, f)?;
            }
            Ok(())
        })?;
    let report = dir.join("report.json");
    if report.exists() {
        fs::remove_file(&report).map_err(|e| Error::io(&report, e))?;
    }
    Ok(())
}

pub fn write_energy_csv(path: &Path, times: &[f64], energy: &[f64]) -> Result<()> {
    write_csv(
        path,
        &["t".into(), "energy".into()],
        &times.iter().zip(energy).map(|(&t, &e)| vec![t, e]).collect::<Vec<_>>(),
    )
}

fn write_conserved_csv(path: &Path, c: &Conserved) -> Result<()> {
    let d = c.w_momentum.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string(), "mass".to_string()];
    header.extend((1..=d).map(|i| format!("w_momentum_{i}")));
    let rows: Vec<Vec<f64>> = (0..c.times.len())
        .map(|k| {
            let mut r = vec![c.times[k], c.mass[k]];
            r.extend(&c.w_momentum[k]);
            r
        })
        .collect();
    write_csv(path, &header, &rows)
}

/// Stored node fields.
#[derive(Clone, Debug)]
pub struct StoredNode {
    pub t: f64,
    pub rho: ScalarField,
    pub rho_t: ScalarField,
    pub phi: ScalarField,
    pub phi_t: ScalarField,
    pub v: VectorField,
    pub m: SymTensorField0,
    pub n: SymTensorField0,
}

#[derive(Clone, Debug)]
pub struct LoadedBundle {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub meta: BundleMeta,
    pub grid: Grid,
    pub model: ModelFunctions,
    pub nodes: Vec<StoredNode>,
    pub f: SymTensorField0,
    pub schedule: LambdaSchedule,
    pub drift: MeanDrift,
}

pub fn load_bundle(dir: &Path) -> Result<LoadedBundle> {
    let meta: BundleMeta = read_json(&dir.join("meta.json"))?;
    let config: RunConfig = read_json(&dir.join("config.json"))?;
    config.validate()?;
    let grid = Grid::new(meta.d, meta.n)?;
    let model = config.model()?;
    let time = TimeGrid::new(meta.t_final, meta.n_t)?;
    if meta.initial_mean.len() != meta.d || meta.terminal_mean.len() != meta.d {
        return Err(Error::MalformedFile {
            path: dir.join("meta.json"),
            offset: 0,
            msg: format!("endpoint mean momenta need {} components", meta.d),
        });
    }

    let shape_check = |path: &Path, h: &crate::spectral::io::FieldHeader| {
        if h.d != meta.d || h.n != meta.n {
            Err(Error::MalformedFile {
                path: path.to_path_buf(),
                offset: 0,
                msg: format!("header has d = {}, n = {}; bundle has d = {}, n = {}", h.d, h.n, meta.d, meta.n),
            })
        } else {
            Ok(())
        }
    };
    let scalar = |p: PathBuf| -> Result<ScalarField> {
        let (h, f) = read_scalar(&p)?;
        shape_check(&p, &h)?;
        Ok(f)
    };
    let tensor = |p: PathBuf| -> Result<SymTensorField0> {
        let (h, f) = read_tensor(&p)?;
        shape_check(&p, &h)?;
        Ok(f)
    };
    let nodes = (0..meta.n_t)
        .into_par_iter()
        .map(|k| {
            let nd = node_dir(dir, k);
            let vp = nd.join("v.fld");
            let (h, v) = read_vector(&vp)?;
            shape_check(&vp, &h)?;
            Ok(StoredNode {
                t: time.node(k),
                rho: scalar(nd.join("rho.fld"))?,
                rho_t: scalar(nd.join("rho_t.fld"))?,
                phi: scalar(nd.join("phi.fld"))?,
                phi_t: scalar(nd.join("phi_t.fld"))?,
                v,
                m: tensor(nd.join("M.fld"))?,
                n: tensor(nd.join("N.fld"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let f = tensor(dir.join("F.fld"))?;

    let lambda_path = dir.join("lambda.csv");
    let (_, rows) = read_csv(&lambda_path)?;
    if rows.len() != meta.n_t || rows.iter().any(|r| r.len() != 3) {
        return Err(Error::Config(format!(
            "{}: expected {} rows of (t, lambda, dlambda)",
            lambda_path.display(),
            meta.n_t
        )));
    }
    let schedule = LambdaSchedule {
        mode: meta.mode,
        eta: meta.eta,
        times: rows.iter().map(|r| r[0]).collect(),
        lambda: rows.iter().map(|r| r[1]).collect(),
        dlambda: rows.iter().map(|r| r[2]).collect(),
    };
    let drift: MeanDrift = read_json(&dir.join("drift.json"))?;
    if drift.times.len() != meta.n_t || drift.v.iter().chain(&drift.dv).any(|v| v.len() != meta.d) {
        return Err(Error::Config(format!("{}: drift does not match the time grid", dir.join("drift.json").display())));
    }
    Ok(LoadedBundle {
        dir: dir.to_path_buf(),
        config,
        meta,
        grid,
        model,
        nodes,
        f,
        schedule,
        drift,
    })
}

// ------------------------------------------------------------------------
// Verification

impl LoadedBundle {
    pub fn time_grid(&self) -> TimeGrid {
        TimeGrid::new(self.meta.t_final, self.meta.n_t).expect("validated on load")
    }

    /// The closed-form profile regenerated from the endpoint nodes and the shape parameters.
    pub fn profile(&self) -> Result<DensityProfile> {
        let first = &self.nodes[0];
        let last = self.nodes.last().expect("at least three nodes");
        Ok(DensityProfile {
            rho0: first.rho.clone(),
            rho_end: last.rho.clone(),
            lap_phi0: first.rho_t.scale(-1.0),
            lap_phi_end: last.rho_t.scale(-1.0),
            shapes: TimeShapes::new(self.meta.t_final, self.meta.delta, self.meta.s0, self.meta.s_t)?,
        })
    }

    pub fn momentum(&self, k: usize) -> VectorField {
        momentum(&self.grid, &self.nodes[k].v, &self.drift.v[k], &self.nodes[k].phi)
    }

    pub fn kinetic(&self, k: usize) -> ScalarField {
        let n = &self.nodes[k];
        kinetic_field(&n.rho, &self.momentum(k), &self.f, &n.m, &n.n)
    }

    pub fn potential(&self, k: usize) -> ScalarField {
        let n = &self.nodes[k];
        potential_field(&self.model, &n.rho, &n.rho_t, &n.phi_t, self.meta.d)
    }

    /// `e = Lambda - potential` with the stored energy level.
    pub fn energy_density(&self, k: usize) -> ScalarField {
        let l = self.schedule.lambda[k];
        self.potential(k).map(|q| l - q)
    }

    /// Total energy per node and the monotonicity verdict.
    pub fn energy_series(&self) -> (Vec<f64>, EnergyVerdict) {
        let totals: Vec<f64> = (0..self.nodes.len())
            .into_par_iter()
            .map(|k| solution_energy(&self.grid, &self.model, &self.nodes[k].rho, &self.momentum(k), &self.energy_density(k)))
            .collect();
        let tol = self.config.tolerances.energy * (1.0 + totals[0].abs());
        let verdict = energy_monitor(&self.schedule.times, &totals, tol);
        (totals, verdict)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BundleReport {
    pub pass: bool,
    pub checks: Vec<Check>,
    pub continuity_weak: WeakResidual,
    pub flux_weak: WeakResidual,
    pub membership: MembershipReport,
    pub energy: EnergyVerdict,
    pub energy_series: Vec<f64>,
    pub conserved: Conserved,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateReport>,
}

impl BundleReport {
    pub fn verification(&self) -> VerificationReport {
        VerificationReport {
            checks: self.checks.clone(),
            pass: self.pass,
        }
    }
}

fn rel(value: f64, scale: f64) -> f64 {
    value / (1.0 + scale)
}

struct NodeFindings {
    consistency: f64,
    continuity: f64,
    solenoidal: f64,
    affine: f64,
    flux: f64,
    m_residual: f64,
    n_residual: f64,
    stored_tensors: f64,
    dyad_trace: f64,
    min_e: f64,
    rhs_mean: f64,
    kinetic: ScalarField,
    potential: ScalarField,
}

/// Affine path at an arbitrary time.
fn affine_at(v0: &VectorField, v_end: &VectorField, t: f64, t_final: f64) -> VectorField {
    let s = t / t_final;
    v0.scale(1.0 - s).axpy(s, v_end)
}

/// Re-derive every stored quantity and test the construction's identities.
pub fn verify_bundle(b: &LoadedBundle) -> Result<BundleReport> {
    let grid = &b.grid;
    let model = &b.model;
    let tol = b.config.tolerances;
    let time = b.time_grid();
    let t_final = time.t_final;
    let profile = b.profile()?;
    let v0 = &b.nodes[0].v;
    let v_end = &b.nodes[b.nodes.len() - 1].v;
    let dv = v_end.sub(v0).scale(1.0 / t_final);
    let last = b.nodes.len() - 1;
    let pi_n = std::f64::consts::PI * grid.n() as f64;

    let findings = (0..b.nodes.len())
        .into_par_iter()
        .map(|k| -> Result<NodeFindings> {
            let node = &b.nodes[k];
            let t = time.node(k);
            let consistency = if k == 0 || k == last {
                0.0
            } else {
                let s = profile.state_at(t);
                let phi = grid.poisson_solve(&s.rho_t.scale(-1.0))?;
                let phi_t = grid.poisson_solve(&s.rho_tt.scale(-1.0))?;
                [(&node.rho, &s.rho), (&node.rho_t, &s.rho_t), (&node.phi, &phi), (&node.phi_t, &phi_t)]
                    .iter()
                    .map(|(a, b)| rel(a.sub(b).max_abs(), b.max_abs()))
                    .fold(0.0, f64::max)
            };
            let m = b.momentum(k);
            let continuity = rel(crate::verify::strong_continuity(grid, &node.rho_t, &m), node.rho_t.max_abs());
            let vmax = node.v.max_abs();
            let mean_v = node.v.comps().iter().map(|c| grid.mean(c).abs()).fold(0.0, f64::max);
            let solenoidal = (grid.div(&node.v).max_abs() / (1.0 + pi_n * vmax)).max(mean_v / (1.0 + vmax));
            let affine = if k == 0 || k == last {
                0.0
            } else {
                rel(node.v.sub(&affine_at(v0, v_end, t, t_final)).max_abs(), vmax)
            };
            let flux = rel(dv.add(&grid.div_tensor(&b.f)).max_abs(), dv.max_abs());

            let rm = m_rhs(grid, model, &node.rho, &node.rho_t, &node.phi, &b.drift.v[k]);
            let rn = n_rhs(grid, model, &node.rho, &node.v)?;
            let m_residual = rel(grid.div_tensor(&node.m).sub(&rm).max_abs(), rm.max_abs());
            let n_residual = rel(grid.div_tensor(&node.n).sub(&rn).max_abs(), rn.max_abs());
            let rhs_mean = [&rm, &rn]
                .iter()
                .flat_map(|r| r.comps().iter().map(|c| rel(grid.mean(c).abs(), r.max_abs())))
                .fold(0.0, f64::max);
            let mm = build_m(grid, model, &node.rho, &node.rho_t, &node.phi, &b.drift.v[k])?;
            let nn = build_n(grid, model, &node.rho, &node.v)?;
            let stored_tensors = rel(mm.sub(&node.m).max_abs(), mm.max_abs()).max(rel(nn.sub(&node.n).max_abs(), nn.max_abs()));
            let kinetic_scale = m.norm_squared().zip_map(&node.rho, |a, r| a / r).max_abs();
            let dyad_trace = rel(odot_trace_defect(&node.rho, &m), kinetic_scale);
            let potential = b.potential(k);
            let l = b.schedule.lambda[k];
            let min_e = potential.map(|q| l - q).min();
            Ok(NodeFindings {
                consistency,
                continuity,
                solenoidal,
                affine,
                flux,
                m_residual,
                n_residual,
                stored_tensors,
                dyad_trace,
                min_e,
                rhs_mean,
                kinetic: b.kinetic(k),
                potential,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = |f: fn(&NodeFindings) -> f64| findings.iter().map(f).fold(0.0, f64::max);

    let mut report = VerificationReport::default();
    report.push(Check::at_most("profile consistency", worst(|f| f.consistency), tol.consistency));
    let inf0 = b.nodes[0].rho.min().min(b.nodes[last].rho.min());
    let rho_min = b.nodes.iter().map(|n| n.rho.min()).fold(f64::INFINITY, f64::min);
    let theta = if rho_min > 0.0 { 1.0 - rho_min / inf0 } else { f64::INFINITY };
    report.push(Check::at_most("density positivity", theta, b.config.shapes.theta));
    report.push(Check::at_most("continuity (strong)", worst(|f| f.continuity), tol.continuity));

    // Weak forms on a refined time grid with the profile's kinks as breakpoints.
    let mut breaks = time.nodes();
    let (a, z) = profile.shapes.supports();
    breaks.extend([a, z]);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let (times, weights) = gauss_samples(&breaks, b.config.verify.refine);
    let basis = match b.config.verify.k_max {
        Some(k) => WeakBasis::standard(grid, t_final, k),
        None => WeakBasis::default_for(grid, t_final),
    };
    let drift_ref = &b.drift;
    let continuity_weak = weak_residual(
        grid,
        &times,
        &weights,
        |j| {
            let t = times[j];
            let s = profile.state_at(t);
            let phi = grid.poisson_solve(&s.rho_t.scale(-1.0)).expect("mean-zero by construction");
            let v = affine_at(v0, v_end, t, t_final);
            continuity_sample(s.rho, &momentum(grid, &v, &drift_ref.at(t), &phi))
        },
        &basis,
    );
    report.push(Check::at_most("continuity (weak)", continuity_weak.relative, tol.weak));

    report.push(Check::at_most("subsolution solenoidal", worst(|f| f.solenoidal), tol.algebraic));
    report.push(Check::at_most("affine path", worst(|f| f.affine), tol.consistency));
    report.push(Check::at_most("flux equation (strong)", worst(|f| f.flux), tol.elliptic));
    let f_rows: Vec<Vec<ScalarField>> = (0..grid.dim()).map(|j| (0..grid.dim()).map(|k| b.f.comp(j, k)).collect()).collect();
    let flux_weak = weak_residual(
        grid,
        &times,
        &weights,
        |j| WeakSample {
            density: affine_at(v0, v_end, times[j], t_final).into_comps(),
            flux: f_rows.clone(),
        },
        &basis,
    );
    report.push(Check::at_most("flux equation (weak)", flux_weak.relative, tol.weak));
    report.push(Check::at_most("first elliptic residual", worst(|f| f.m_residual), tol.elliptic));
    report.push(Check::at_most("second elliptic residual", worst(|f| f.n_residual), tol.elliptic));
    report.push(Check::at_most("elliptic right-hand side mean", worst(|f| f.rhs_mean), tol.algebraic));
    report.push(Check::at_most("stored tensors", worst(|f| f.stored_tensors), tol.consistency));
    report.push(Check::at_most("trace-free dyad", worst(|f| f.dyad_trace), tol.algebraic));

    let rho: Vec<ScalarField> = b.nodes.iter().map(|n| n.rho.clone()).collect();
    let m: Vec<VectorField> = (0..b.nodes.len()).map(|k| b.momentum(k)).collect();
    let conserved = conserved_quantities(grid, model, &b.schedule.times, &rho, &m);
    report.push(Check::at_most("mass conservation", conserved.mass_drift / conserved.mass[0].abs(), tol.mass));
    let vol = grid.volume();
    let f0 = grid.integrate_vector(&model.flux_field(&b.nodes[0].rho));
    let ft = grid.integrate_vector(&model.flux_field(&b.nodes[last].rho));
    let (va, vz) = (&b.drift.v[0], &b.drift.v[last]);
    let mut endpoint: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for i in 0..grid.dim() {
        endpoint = endpoint.max((vol * vz[i] - (vol * va[i] - ft[i] + f0[i])).abs());
        scale = scale.max((vol * va[i]).abs()).max(f0[i].abs()).max(ft[i].abs());
    }
    report.push(Check::at_most("mean momentum endpoint identity", endpoint / (1.0 + scale), tol.momentum));
    let mut ends: f64 = 0.0;
    for (v, target) in [(va, &b.meta.initial_mean), (vz, &b.meta.terminal_mean)] {
        let size = target.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for i in 0..grid.dim() {
            ends = ends.max((v[i] - target[i]).abs() / size);
        }
    }
    report.push(Check::at_most("mean momentum endpoint values", ends, tol.momentum));
    let w_scale = conserved.w_momentum.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
    report.push(Check::at_most("w-momentum conservation", rel(conserved.w_momentum_drift, w_scale), tol.momentum));

    let kinetic: Vec<&ScalarField> = findings.iter().map(|f| &f.kinetic).collect();
    let potential: Vec<&ScalarField> = findings.iter().map(|f| &f.potential).collect();
    let membership = membership_from_parts(&b.schedule.times, &kinetic, &potential, &b.schedule.lambda, b.meta.tau);
    report.push(Check::above("subsolution membership", membership.margin, 0.0));
    report.push(Check::above(
        "energy density positivity",
        findings.iter().map(|f| f.min_e).fold(f64::INFINITY, f64::min),
        0.0,
    ));

    let (energy_series, energy) = b.energy_series();
    let mut certificate = None;
    if b.meta.mode == ScheduleMode::Admissible {
        let rise = b.schedule.lambda.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        report.push(Check::at_most("energy level non-increasing", rise, 0.0));
        let bound = EnergyBound::new(grid, model, &b.nodes[0].rho);
        let sched = AdmissibleSchedule {
            bound,
            times: b.schedule.times.clone(),
            lambda: b.schedule.lambda.clone(),
            dlambda: b.schedule.dlambda.clone(),
        };
        let cert = CertificateReport::new(&sched);
        let worst_step = cert.step.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        report.push(Check::at_most(
            "energy level certificate",
            rel(worst_step, bound.eval(b.schedule.lambda[0])),
            tol.certificate,
        ));
        report.push(Check::at_most("energy inequality", energy.max_uptick.max(energy.max_excess), energy.tol));
        certificate = Some(cert);
    }

    Ok(BundleReport {
        pass: report.pass,
        checks: report.checks,
        continuity_weak,
        flux_weak,
        membership,
        energy,
        energy_series,
        conserved,
        certificate,
    })
}

pub fn write_report(dir: &Path, report: &BundleReport) -> Result<()> {
    write_json(&dir.join("report.json"), report)
}

// ------------------------------------------------------------------------
// Other commands

/// Helmholtz parts of one momentum field.
#[derive(Clone, Debug, Serialize)]
pub struct DecompositionSummary {
    pub mean: Vec<f64>,
    /// `max |v + V + grad Phi - m|`.
    pub roundtrip: f64,
}

pub fn recompose(grid: &Grid, h: &Helmholtz) -> VectorField {
    momentum(grid, &h.solenoidal, &h.mean, &h.potential)
}

/// Write `v.fld`, `V.json`, `phi.fld` for a momentum field into `dir`.
pub fn write_decomposition(grid: &Grid, m: &VectorField, dir: &Path) -> Result<DecompositionSummary> {
    create_dir(dir)?;
    let h = grid.helmholtz(m);
    let (d, n) = (grid.dim(), grid.n());
    write_field(&dir.join("v.fld"), d, n, &StoredField::Vector(h.solenoidal.clone()))?;
    write_field(&dir.join("phi.fld"), d, n, &StoredField::Scalar(h.potential.clone()))?;
    write_json(&dir.join("V.json"), &h.mean)?;
    let roundtrip = recompose(grid, &h).sub(m).max_abs();
    Ok(DecompositionSummary { mean: h.mean, roundtrip })
}

/// Decompose the initial and terminal momenta of a configuration.
pub fn decompose_data(cfg: &RunConfig, dir: &Path) -> Result<[DecompositionSummary; 2]> {
    let grid = cfg.grid()?;
    let data = load_data(cfg, &grid)?;
    Ok([
        write_decomposition(&grid, &data.u0.mul_scalar(&data.rho0), &dir.join("initial"))?,
        write_decomposition(&grid, &data.u_end.mul_scalar(&data.rho_end), &dir.join("terminal"))?,
    ])
}

/// One CSV per node with grid coordinates and the stored scalar data.
pub fn export_csv(b: &LoadedBundle, dir: &Path) -> Result<usize> {
    create_dir(dir)?;
    let grid = &b.grid;
    let d = grid.dim();
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    header.extend(["rho", "rho_t", "phi", "phi_t"].map(String::from));
    header.extend((1..=d).map(|i| format!("v{i}")));
    header.extend((1..=d).map(|i| format!("m{i}")));
    header.extend(["e", "kinetic"].map(String::from));
    (0..b.nodes.len()).into_par_iter().try_for_each(|k| -> Result<()> {
        let node = &b.nodes[k];
        let m = b.momentum(k);
        let e = b.energy_density(k);
        let kin = b.kinetic(k);
        let rows: Vec<Vec<f64>> = (0..grid.len())
            .map(|i| {
                let x = grid.point(i);
                let mut r: Vec<f64> = x[..d].to_vec();
                r.extend([node.rho.values()[i], node.rho_t.values()[i], node.phi.values()[i], node.phi_t.values()[i]]);
                r.extend(&node.v.at(i)[..d]);
                r.extend(&m.at(i)[..d]);
                r.extend([e.values()[i], kin.values()[i]]);
                r
            })
            .collect();
        write_csv(&dir.join(format!("node_{k:04}.csv")), &header, &rows)
    })?;
    let s = &b.schedule;
    write_csv(
        &dir.join("lambda.csv"),
        &["t".into(), "lambda".into(), "dlambda".into()],
        &(0..s.times.len()).map(|k| vec![s.times[k], s.lambda[k], s.dlambda[k]]).collect::<Vec<_>>(),
    )?;
    Ok(b.nodes.len())
}

#[derive(Clone, Debug, Serialize)]
pub struct Check1dReport {
    pub n: usize,
    pub defect: f64,
    pub report: IdentityReport,
    pub tol: f64,
    pub pass: bool,
}

/// Manufactured one-dimensional state: `rho = 2 + 0.5 sin(pi x)`,
/// `u = 0.3 + 0.2 cos(pi x)`, `d_t rho = -d_x(rho u) + defect sin(2 pi x)`.
pub fn manufactured_line_state(grid: &Grid, defect: f64) -> Line1dState {
    use std::f64::consts::PI;
    let rho = grid.sample(|x| 2.0 + 0.5 * (PI * x[0]).sin());
    let u = grid.sample(|x| 0.3 + 0.2 * (PI * x[0]).cos());
    let rho_t = grid
        .partial(&rho.mul(&u), 0)
        .scale(-1.0)
        .add(&grid.sample(|x| defect * (2.0 * PI * x[0]).sin()));
    let u_t = grid.sample(|x| 0.1 * (PI * x[0]).sin() + 0.05 * (2.0 * PI * x[0]).cos());
    Line1dState { rho, rho_t, u, u_t }
}

pub fn check_1d(cfg: &Check1dConfig) -> Result<Check1dReport> {
    let grid = Grid::line(cfg.n)?;
    let state = manufactured_line_state(&grid, cfg.defect);
    let report = check_1d_equivalence(&grid, &state, Viscosity::new(cfg.coef, cfg.alpha), cfg.continuity_tol)?;
    Ok(Check1dReport {
        n: cfg.n,
        defect: cfg.defect,
        pass: report.discrepancy <= cfg.tol,
        tol: cfg.tol,
        report,
    })
}
