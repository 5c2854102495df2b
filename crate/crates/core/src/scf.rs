//! Self-consistent coupling of surface evolution and electrostatics: the
//! surface shapes the dielectric, the resulting potential feeds back into
//! the surface driving term, iterated until the polar energy settles.

use serde::{Deserialize, Serialize};

use crate::electrostatics::{
    coupling_potential, dh_boundary, dielectric_map, gpb_source, reaction_field_energy,
    solve_gpb, spread_charges, PbConfig,
};
use crate::error::{Error, Result};
use crate::fit::ParameterSet;
use crate::grid::{
    build_grid, enclosed_volume, extended_mask, surface_area, vdw_mask, ScalarField,
};
use crate::mol::Molecule;
use crate::nonpolar::{lj_features, lj_field, LjConfig};
use crate::surface::{evolve_surface, init_surface, LbConfig, SurfaceMasks};

/// Which external potential drives the surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScfMode {
    /// Dielectric coupling only.
    Auxiliary,
    /// Pressure, dispersion, and dielectric coupling.
    Full,
}

/// Self-consistent loop settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScfConfig {
    pub mode: ScfMode,
    /// Convergence threshold on the polar energy, kcal/mol.
    pub energy_tol: f64,
    pub max_outer: usize,
    /// Grid spacing, A.
    pub h: f64,
    /// Box margin beyond the inflated atoms, A.
    pub buffer: f64,
    /// Probe radius for the initial surface, A.
    pub probe: f64,
    pub lb: LbConfig,
    pub pb: PbConfig,
    pub lj: LjConfig,
}

impl Default for ScfConfig {
    fn default() -> Self {
        ScfConfig {
            mode: ScfMode::Full,
            energy_tol: 0.01,
            max_outer: 60,
            h: 0.25,
            buffer: 6.0,
            probe: 1.4,
            lb: LbConfig::default(),
            pb: PbConfig::default(),
            lj: LjConfig::default(),
        }
    }
}

/// One outer iteration of the loop (iteration 0 is the initial solve).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScfTrace {
    pub outer: usize,
    pub dg_polar: f64,
    pub area: f64,
    pub volume: f64,
}

/// Converged state of one molecule.
#[derive(Debug, Clone, PartialEq)]
pub struct ScfResult {
    pub surface: ScalarField,
    pub potential: ScalarField,
    pub potential_homogeneous: ScalarField,
    /// kcal/mol.
    pub dg_polar: f64,
    /// A^2.
    pub area: f64,
    /// A^3.
    pub volume: f64,
    /// Per-type interaction integrals, A^3.
    pub lj_features: Vec<f64>,
    pub outer_iterations: usize,
    pub trace: Vec<ScfTrace>,
}

/// Driving potential for the surface equation. The dielectric coupling term
/// expects the unit-free potential, so the physical field is rescaled by the
/// Coulomb constant first.
pub fn assemble_ve(
    mode: ScfMode,
    p: f64,
    u: &ScalarField,
    phi: &ScalarField,
    pb: &PbConfig,
) -> ScalarField {
    let coupling = coupling_potential(&phi.scaled(1.0 / pb.coulomb_const), pb);
    match mode {
        ScfMode::Auxiliary => coupling,
        ScfMode::Full => ScalarField {
            grid: coupling.grid,
            values: coupling
                .values
                .iter()
                .zip(&u.values)
                .map(|(c, uv)| -p + uv + c)
                .collect(),
        },
    }
}

/// Runs the coupled loop for one molecule.
pub fn run_scf(m: &Molecule, params: &ParameterSet, cfg: &ScfConfig) -> Result<ScfResult> {
    params.check_feasible()?;
    // a dataset-wide parameter vector may carry more types than one molecule
    if params.epsilons.len() < m.num_types() {
        return Err(Error::Config(format!(
            "{} well depths for {} atom types",
            params.epsilons.len(),
            m.num_types()
        )));
    }

    let g = build_grid(m, cfg.h, cfg.buffer);
    let masks = SurfaceMasks {
        vdw: vdw_mask(&g, m),
    };
    let ext = extended_mask(&g, m, cfg.probe);
    let mut lb = cfg.lb.clone();
    lb.gamma = params.gamma;

    let rho = spread_charges(m, &g)?;
    let bc = dh_boundary(m, &g, &cfg.pb, cfg.pb.eps_solvent)?;
    let bc_h = dh_boundary(m, &g, &cfg.pb, cfg.pb.eps_solute)?;

    // the homogeneous reference never depends on the surface
    let ones = ScalarField::constant(g, 1.0);
    let src_h = gpb_source(&ones, &rho, &cfg.pb);
    let eps_h = ScalarField::constant(g, cfg.pb.eps_solute);
    let phi_h = solve_gpb(&eps_h, &src_h, &bc_h, &cfg.pb)?;

    let u = match cfg.mode {
        ScfMode::Auxiliary => ScalarField::zeros(g),
        ScfMode::Full => lj_field(m, &params.epsilons[..m.num_types()], g, &cfg.lj)?,
    };

    let mut s = init_surface(&g, &ext);
    let mut phi = {
        let eps = dielectric_map(&s, &cfg.pb);
        let src = gpb_source(&s, &rho, &cfg.pb);
        solve_gpb(&eps, &src, &bc, &cfg.pb)?
    };
    let mut dg = reaction_field_energy(&phi, &phi_h, m)?;
    let mut trace = vec![ScfTrace {
        outer: 0,
        dg_polar: dg,
        area: surface_area(&s),
        volume: enclosed_volume(&s),
    }];

    let mut last_delta = f64::INFINITY;
    for outer in 1..=cfg.max_outer {
        let ve = assemble_ve(cfg.mode, params.p, &u, &phi, &cfg.pb);
        let (s_new, _) = evolve_surface(&s, &lb, &ve, &masks)?;
        s = s_new;
        let eps = dielectric_map(&s, &cfg.pb);
        let src = gpb_source(&s, &rho, &cfg.pb);
        phi = solve_gpb(&eps, &src, &bc, &cfg.pb)?;
        let dg_new = reaction_field_energy(&phi, &phi_h, m)?;
        last_delta = (dg_new - dg).abs();
        dg = dg_new;
        trace.push(ScfTrace {
            outer,
            dg_polar: dg,
            area: surface_area(&s),
            volume: enclosed_volume(&s),
        });
        if last_delta < cfg.energy_tol {
            return Ok(ScfResult {
                lj_features: lj_features(m, &s, &cfg.lj),
                area: surface_area(&s),
                volume: enclosed_volume(&s),
                dg_polar: dg,
                surface: s,
                potential: phi,
                potential_homogeneous: phi_h,
                outer_iterations: outer,
                trace,
            });
        }
    }
    Err(Error::ScfNonConvergence {
        outer: cfg.max_outer,
        delta: last_delta,
    })
}
