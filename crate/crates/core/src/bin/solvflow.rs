//! Command-line interface: single-molecule energies and features, dataset
//! fitting, cross-validation, and the solvent-radius sweep.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use solvflow::fit::{fit_parameters, FitConfig, ParameterSet};
use solvflow::harness::{
    cross_validate, parse_fold_assignments, parse_radius_spec, solvent_radius_sweep, FoldSpec,
};
use solvflow::mol::{assign_type_indices, parse_dataset, parse_molecule, Molecule, TypeTable};
use solvflow::scf::{run_scf, ScfConfig, ScfMode, ScfResult};
use solvflow::{Error, Result};

#[derive(Parser)]
#[command(name = "solvflow", version, about = "Implicit-solvent solvation free energies")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// Grid spacing, A.
    #[arg(long, default_value_t = 0.25, global = true)]
    grid_spacing: f64,
    /// Box margin beyond the inflated atoms, A.
    #[arg(long, default_value_t = 6.0, global = true)]
    buffer: f64,
    /// Probe radius for the initial surface, A.
    #[arg(long, default_value_t = 1.4, global = true)]
    probe: f64,
    /// Solvent radius in the dispersion kernel, A.
    #[arg(long, default_value_t = 3.0, global = true)]
    solvent_radius: f64,
    #[arg(long, default_value_t = 1.0, global = true)]
    eps_solute: f64,
    #[arg(long, default_value_t = 80.0, global = true)]
    eps_solvent: f64,
    /// Lower bound on the surface tension.
    #[arg(long, default_value_t = 0.05, global = true)]
    gamma0: f64,
    /// Pressure-ratio bound.
    #[arg(long, default_value_t = 0.1, global = true)]
    beta: f64,
    /// Regularization weight.
    #[arg(long, default_value_t = 10.0, global = true)]
    lambda: f64,
    /// Under-relaxation weight for surface sweeps.
    #[arg(long, default_value_t = 0.5, global = true)]
    a1: f64,
    /// Convergence threshold shared by the nested loops.
    #[arg(long, default_value_t = 0.01, global = true)]
    tol: f64,
    /// Seed for fold shuffling.
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    /// Atom type table file (label radius per line); defaults to H/C/O.
    #[arg(long, global = true)]
    type_table: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Full-system run for one molecule; prints an energy breakdown as JSON.
    Energy {
        structure: PathBuf,
        /// Learned parameters, JSON.
        #[arg(long)]
        params: PathBuf,
    },
    /// Learn parameters on a dataset manifest.
    Fit {
        manifest: PathBuf,
        /// Write the fit result JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the per-iteration trace CSV here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// k-fold cross-validation with blind predictions.
    Crossval {
        manifest: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Explicit fold assignment CSV (name,fold).
        #[arg(long)]
        folds: Option<PathBuf>,
        /// Write the report JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write a per-fold summary CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Refit at each solvent radius; prints the RMS curve as CSV.
    Sweep {
        manifest: PathBuf,
        /// start:stop:step or comma-separated radii, A.
        #[arg(long, default_value = "0.5:5.5:0.5")]
        radii: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Feature row for one molecule, CSV.
    Features {
        structure: PathBuf,
        #[arg(long)]
        params: PathBuf,
    },
}

#[derive(Serialize)]
struct EnergyBreakdown {
    name: String,
    dg_polar: f64,
    g_nonpolar: f64,
    dg_total: f64,
    area: f64,
    volume: f64,
    lj_features: Vec<f64>,
    outer_iterations: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    match &cli.cmd {
        Cmd::Energy { structure, params } => {
            let m = load_molecule(structure, c)?;
            let p = load_params(params)?;
            let r = run_scf(&m, &p, &scf_config(c, ScfMode::Full))?;
            let g_nonpolar = p.gamma * r.area
                + p.p * r.volume
                + p.epsilons.iter().zip(&r.lj_features).map(|(e, f)| e * f).sum::<f64>();
            let breakdown = EnergyBreakdown {
                name: m.name.clone(),
                dg_polar: r.dg_polar,
                g_nonpolar,
                dg_total: r.dg_polar + g_nonpolar,
                area: r.area,
                volume: r.volume,
                lj_features: r.lj_features,
                outer_iterations: r.outer_iterations,
            };
            println!("{}", to_json(&breakdown)?);
        }
        Cmd::Features { structure, params } => {
            let m = load_molecule(structure, c)?;
            let p = load_params(params)?;
            let r = run_scf(&m, &p, &scf_config(c, ScfMode::Full))?;
            print!("{}", feature_csv(&m.name, &r));
        }
        Cmd::Fit {
            manifest,
            out,
            trace,
        } => {
            let ds = load_dataset(manifest, c)?;
            let (result, points) = fit_parameters(&ds, &fit_config(c))?;
            if let Some(path) = trace {
                let mut csv = String::from("outer,rms,gamma,p");
                for j in 0..result.params.epsilons.len() {
                    csv.push_str(&format!(",eps_{}", j + 1));
                }
                csv.push('\n');
                for pt in &points {
                    csv.push_str(&format!("{},{},{},{}", pt.outer, pt.rms, pt.params.gamma, pt.params.p));
                    for e in &pt.params.epsilons {
                        csv.push_str(&format!(",{e}"));
                    }
                    csv.push('\n');
                }
                write_file(path, &csv)?;
            }
            emit(out.as_deref(), &to_json(&result)?)?;
        }
        Cmd::Crossval {
            manifest,
            k,
            folds,
            out,
            csv,
        } => {
            let ds = load_dataset(manifest, c)?;
            let spec = match folds {
                Some(path) => FoldSpec::Explicit(parse_fold_assignments(&read_file(path)?)?),
                None => FoldSpec::Seeded(c.seed),
            };
            let report = cross_validate(&ds, *k, &spec, &fit_config(c))?;
            if let Some(path) = csv {
                let mut text = String::from("fold,train_rms,validation_rms,error\n");
                for f in &report.folds {
                    text.push_str(&format!(
                        "{},{},{},{}\n",
                        f.fold,
                        f.train_rms.map_or(String::new(), |v| v.to_string()),
                        f.validation_rms.map_or(String::new(), |v| v.to_string()),
                        f.error.as_deref().unwrap_or("")
                    ));
                }
                write_file(path, &text)?;
            }
            emit(out.as_deref(), &to_json(&report)?)?;
        }
        Cmd::Sweep {
            manifest,
            radii,
            out,
        } => {
            let ds = load_dataset(manifest, c)?;
            let radii = parse_radius_spec(radii)?;
            let report = solvent_radius_sweep(&ds, &radii, &fit_config(c))?;
            let mut text = String::from("radius,rms\n");
            for p in &report.points {
                text.push_str(&format!("{},{}\n", p.radius, p.rms));
            }
            text.push_str(&format!("# best_radius,{}\n", report.best_radius));
            emit(out.as_deref(), &text)?;
        }
    }
    Ok(())
}

fn type_table(c: &Common) -> Result<TypeTable> {
    match &c.type_table {
        Some(path) => TypeTable::parse(&read_file(path)?),
        None => Ok(TypeTable::default_hco()),
    }
}

fn load_molecule(path: &Path, c: &Common) -> Result<Molecule> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "molecule".into());
    let m = parse_molecule(&name, &read_file(path)?)?;
    assign_type_indices(&m, &type_table(c)?)
}

fn load_dataset(path: &Path, c: &Common) -> Result<solvflow::mol::Dataset> {
    parse_dataset(path, Some(&type_table(c)?))
}

fn load_params(path: &Path) -> Result<ParameterSet> {
    let p: ParameterSet = serde_json::from_str(&read_file(path)?)
        .map_err(|e| Error::Config(format!("parameter file {}: {e}", path.display())))?;
    p.check_feasible()?;
    Ok(p)
}

fn scf_config(c: &Common, mode: ScfMode) -> ScfConfig {
    let mut cfg = ScfConfig {
        mode,
        energy_tol: c.tol,
        h: c.grid_spacing,
        buffer: c.buffer,
        probe: c.probe,
        ..ScfConfig::default()
    };
    cfg.lb.a1 = c.a1;
    cfg.lb.area_tol = c.tol;
    cfg.lb.vol_tol = c.tol;
    cfg.pb.eps_solute = c.eps_solute;
    cfg.pb.eps_solvent = c.eps_solvent;
    cfg.lj.sigma_s = c.solvent_radius;
    cfg
}

fn fit_config(c: &Common) -> FitConfig {
    FitConfig {
        scf: scf_config(c, ScfMode::Full),
        gamma0: c.gamma0,
        beta: c.beta,
        lambda: c.lambda,
        rms_tol: c.tol,
        ..FitConfig::default()
    }
}

fn feature_csv(name: &str, r: &ScfResult) -> String {
    let mut header = String::from("name,dG_polar,area,volume");
    let mut row = format!("{name},{},{},{}", r.dg_polar, r.area, r.volume);
    for (j, f) in r.lj_features.iter().enumerate() {
        header.push_str(&format!(",lj_{}", j + 1));
        row.push_str(&format!(",{f}"));
    }
    format!("{header}\n{row}\n")
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Config(format!("serialization: {e}")))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            println!("{}", text.trim_end());
            Ok(())
        }
    }
}
