//! Lennard-Jones solvent-solute interaction: the truncated and core-clamped
//! kernel, per-type feature integrals, the interaction field, and the
//! nonpolar part of the energy functional.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{enclosed_volume, integrate, surface_area, vdw_mask, Grid, ScalarField};
use crate::mol::Molecule;

/// Lennard-Jones settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LjConfig {
    /// Solvent radius, A.
    pub sigma_s: f64,
    /// Truncation distance, A.
    pub cutoff: f64,
    /// Lower clamp on r as a fraction of sigma, in (0, 1).
    pub clamp_radius_fraction: f64,
}

impl Default for LjConfig {
    fn default() -> Self {
        LjConfig {
            sigma_s: 3.0,
            cutoff: 12.0,
            clamp_radius_fraction: 0.8,
        }
    }
}

/// `(sigma/r)^12 - 2 (sigma/r)^6`, with `r` clamped below at
/// `clamp_radius_fraction * sigma` and truncated to zero at the cutoff.
pub fn lj_kernel(r: f64, sigma: f64, cfg: &LjConfig) -> f64 {
    if r >= cfg.cutoff {
        return 0.0;
    }
    let rc = r.max(cfg.clamp_radius_fraction * sigma);
    let q = (sigma / rc).powi(6);
    q * q - 2.0 * q
}

/// Per-type kernel sums at every node outside the van der Waals domain,
/// one field per atom type.
fn type_kernel_fields(m: &Molecule, g: Grid, cfg: &LjConfig) -> Vec<ScalarField> {
    let vdw = vdw_mask(&g, m);
    let nt = m.num_types();
    let mut fields: Vec<ScalarField> = (0..nt).map(|_| ScalarField::zeros(g)).collect();
    let cut2 = cfg.cutoff * cfg.cutoff;
    for a in &m.atoms {
        let sigma = cfg.sigma_s + a.radius;
        let field = &mut fields[a.type_index].values;
        // bounding box of the cutoff ball around the atom
        let lo = |c: f64, o: f64| (((c - cfg.cutoff - o) / g.h).floor().max(0.0)) as usize;
        let hi = |c: f64, o: f64, n: usize| {
            ((((c + cfg.cutoff - o) / g.h).ceil()) as usize).min(n - 1)
        };
        let (i0, i1) = (lo(a.position[0], g.origin[0]), hi(a.position[0], g.origin[0], g.dims[0]));
        let (j0, j1) = (lo(a.position[1], g.origin[1]), hi(a.position[1], g.origin[1], g.dims[1]));
        let (k0, k1) = (lo(a.position[2], g.origin[2]), hi(a.position[2], g.origin[2], g.dims[2]));
        for k in k0..=k1 {
            for j in j0..=j1 {
                for i in i0..=i1 {
                    if vdw.at(i, j, k) {
                        continue;
                    }
                    let p = g.node_pos(i, j, k);
                    let d2 = (p[0] - a.position[0]).powi(2)
                        + (p[1] - a.position[1]).powi(2)
                        + (p[2] - a.position[2]).powi(2);
                    if d2 >= cut2 {
                        continue;
                    }
                    field[g.index(i, j, k)] += lj_kernel(d2.sqrt(), sigma, cfg);
                }
            }
        }
    }
    fields
}

/// All per-type feature integrals `int (1 - S) sum_{i in type j} kernel`.
pub fn lj_features(m: &Molecule, s: &ScalarField, cfg: &LjConfig) -> Vec<f64> {
    let fields = type_kernel_fields(m, s.grid, cfg);
    let h3 = s.grid.h.powi(3);
    fields
        .iter()
        .map(|f| {
            f.values
                .iter()
                .zip(&s.values)
                .map(|(kv, sv)| (1.0 - sv) * kv)
                .sum::<f64>()
                * h3
        })
        .collect()
}

/// Feature integral for a single atom type.
pub fn lj_type_integral(m: &Molecule, j: usize, s: &ScalarField, cfg: &LjConfig) -> Result<f64> {
    let feats = lj_features(m, s, cfg);
    feats
        .get(j)
        .copied()
        .ok_or_else(|| Error::Config(format!("type index {j} out of range (N_T = {})", feats.len())))
}

/// Interaction field `U = sum_j eps_j sum_{i in type j} kernel`, zero inside
/// the van der Waals domain.
pub fn lj_field(m: &Molecule, epsilons: &[f64], g: Grid, cfg: &LjConfig) -> Result<ScalarField> {
    let nt = m.num_types();
    if epsilons.len() != nt {
        return Err(Error::Config(format!(
            "{} well depths for {} atom types",
            epsilons.len(),
            nt
        )));
    }
    let fields = type_kernel_fields(m, g, cfg);
    let mut u = ScalarField::zeros(g);
    for (e, f) in epsilons.iter().zip(&fields) {
        for (uv, fv) in u.values.iter_mut().zip(&f.values) {
            *uv += e * fv;
        }
    }
    Ok(u)
}

/// `G^NP = gamma * Area(S) + p * Vol(S) + int (1 - S) U`.
pub fn nonpolar_energy(s: &ScalarField, gamma: f64, p: f64, u: &ScalarField) -> f64 {
    let one_minus_s_u = ScalarField {
        grid: s.grid,
        values: s
            .values
            .iter()
            .zip(&u.values)
            .map(|(sv, uv)| (1.0 - sv) * uv)
            .collect(),
    };
    gamma * surface_area(s) + p * enclosed_volume(s) + integrate(&one_minus_s_u)
}
