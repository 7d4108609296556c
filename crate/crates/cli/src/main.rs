//! `arsub`: build and check subsolution bundles.
//!
//! Exit codes: 0 every verdict passes, 1 a verification verdict fails,
//! 2 configuration or data error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use arsub_core::config::{Check1dConfig, RunConfig};
use arsub_core::pipeline::{self, BundleReport};
use arsub_core::spectral::io::read_vector;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "arsub", version, about = "Subsolutions of the dissipative Aw-Rascle system on the periodic box")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Helmholtz split of the configured data, or of a single momentum field.
    Decompose {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Vector field file to split instead of the configured data.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Construct a subsolution bundle.
    Build {
        #[arg(long)]
        config: PathBuf,
        /// Bundle directory (overrides `output` in the configuration).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue past a failed momentum compatibility check.
        #[arg(long)]
        force: bool,
    },
    /// Re-derive and check a bundle; writes report.json.
    Verify { bundle: PathBuf },
    /// Energy series of a bundle; writes energy.csv.
    Energy { bundle: PathBuf },
    /// Aw-Rascle versus Navier-Stokes momentum identity on a manufactured 1D state.
    #[command(name = "check-1d")]
    Check1d {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Per-node CSV tables for plotting.
    #[command(name = "export-csv")]
    ExportCsv {
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// A failed verdict as opposed to an error.
struct Verdict(bool);

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(Verdict(true)) => ExitCode::SUCCESS,
        Ok(Verdict(false)) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> anyhow::Result<Verdict> {
    match cmd {
        Command::Decompose { config, input, out } => decompose(config.as_deref(), input.as_deref(), &out),
        Command::Build { config, out, force } => build(&config, out, force),
        Command::Verify { bundle } => verify(&bundle),
        Command::Energy { bundle } => energy(&bundle),
        Command::Check1d { config } => check_1d(config.as_deref()),
        Command::ExportCsv { bundle, out } => {
            let b = pipeline::load_bundle(&bundle).context("loading bundle")?;
            let count = pipeline::export_csv(&b, &out).context("export")?;
            println!("wrote {count} node tables to {}", out.display());
            Ok(Verdict(true))
        }
    }
}

fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    RunConfig::load(path).with_context(|| format!("configuration {}", path.display()))
}

fn decompose(config: Option<&Path>, input: Option<&Path>, out: &Path) -> anyhow::Result<Verdict> {
    let summaries = match (config, input) {
        (_, Some(input)) => {
            let (h, m) = read_vector(input).context("reading momentum field")?;
            let grid = arsub_core::Grid::new(h.d, h.n)?;
            vec![("input", pipeline::write_decomposition(&grid, &m, out)?)]
        }
        (Some(cfg), None) => {
            let cfg = load_config(cfg)?;
            let [a, b] = pipeline::decompose_data(&cfg, out).context("decompose")?;
            vec![("initial", a), ("terminal", b)]
        }
        (None, None) => return Err(anyhow!("decompose needs --config or --input")),
    };
    for (name, s) in &summaries {
        println!("{name}: mean momentum {:?}, recomposition error {:.3e}", s.mean, s.roundtrip);
    }
    Ok(Verdict(true))
}

fn build(config: &Path, out: Option<PathBuf>, force: bool) -> anyhow::Result<Verdict> {
    let cfg = load_config(config)?;
    let dir = out
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| anyhow!("no bundle directory: pass --out or set output in the configuration"))?;
    let result = pipeline::build(&cfg, force).context("build")?;
    pipeline::write_bundle(&dir, &result).with_context(|| format!("writing {}", dir.display()))?;
    let c = &result.compatibility;
    let p = &result.bundle.profile;
    println!("mass compatibility: {} (defect {:.3e})", pass(c.mass_pass), c.mass_defect);
    println!("momentum compatibility: {} (defect {:?})", pass(c.momentum_pass), c.momentum_defect);
    println!("density positivity: delta {:.4e}, rho_min {:.6}, theta {:.4}", p.delta, p.rho_min, p.theta);
    println!(
        "subsolution membership: {} (margin {:.6e}, eta {})",
        pass(result.membership.pass),
        result.membership.margin,
        result.bundle.schedule.eta
    );
    println!("bundle written to {}", dir.display());
    Ok(Verdict(result.membership.pass && c.pass))
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn print_report(r: &BundleReport) {
    for c in &r.checks {
        println!("{}: {} (value {:.3e}, tolerance {:.1e})", c.name, pass(c.pass), c.value, c.tol);
    }
    println!("verification: {}", pass(r.pass));
}

fn verify(bundle: &Path) -> anyhow::Result<Verdict> {
    let b = pipeline::load_bundle(bundle).context("loading bundle")?;
    let report = pipeline::verify_bundle(&b).context("verify")?;
    pipeline::write_report(bundle, &report)?;
    print_report(&report);
    Ok(Verdict(report.pass))
}

fn energy(bundle: &Path) -> anyhow::Result<Verdict> {
    let b = pipeline::load_bundle(bundle).context("loading bundle")?;
    let (totals, verdict) = b.energy_series();
    pipeline::write_energy_csv(&bundle.join("energy.csv"), &b.schedule.times, &totals)?;
    match verdict.first_violation {
        Some(t) => println!(
            "energy inequality: FAIL at t = {t} (max uptick {:.3e}, max excess {:.3e}, tolerance {:.1e})",
            verdict.max_uptick, verdict.max_excess, verdict.tol
        ),
        None => println!("energy inequality: PASS (max uptick {:.3e}, tolerance {:.1e})", verdict.max_uptick, verdict.tol),
    }
    Ok(Verdict(verdict.pass))
}

fn check_1d(config: Option<&Path>) -> anyhow::Result<Verdict> {
    let cfg = match config {
        Some(p) => load_config(p)?.check1d.unwrap_or_default(),
        None => Check1dConfig::default(),
    };
    let r = pipeline::check_1d(&cfg).context("check-1d")?;
    println!(
        "1D momentum equivalence: {} (n {}, discrepancy {:.3e}, continuity residual {:.3e}, tolerance {:.1e})",
        pass(r.pass),
        r.n,
        r.report.discrepancy,
        r.report.continuity_residual,
        r.tol
    );
    println!("{}", serde_json::to_string_pretty(&r)?);
    Ok(Verdict(r.pass))
}
