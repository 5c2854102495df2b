//! Grid electrostatics: smooth dielectric profile, charge spreading,
//! screened-Coulomb boundary values, the variable-coefficient elliptic solve
//! for the potential, and the energies/potentials derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{axis_diff, Grid, ScalarField};
use crate::mol::Molecule;

/// Electrostatics settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PbConfig {
    /// Solute dielectric constant.
    pub eps_solute: f64,
    /// Solvent dielectric constant.
    pub eps_solvent: f64,
    /// Modified Debye-Hueckel screening, 1/A. Zero for pure water.
    pub kappa_bar: f64,
    /// kcal A / (mol e^2).
    pub coulomb_const: f64,
    /// Relative residual tolerance for the linear solve.
    pub solver_tol: f64,
    pub solver_max_iter: usize,
}

impl Default for PbConfig {
    fn default() -> Self {
        PbConfig {
            eps_solute: 1.0,
            eps_solvent: 80.0,
            kappa_bar: 0.0,
            coulomb_const: 332.0637,
            solver_tol: 1e-8,
            solver_max_iter: 20_000,
        }
    }
}

/// Smooth permittivity: `eps(S) = (1 - S) eps_s + S eps_m`.
pub fn dielectric_map(s: &ScalarField, cfg: &PbConfig) -> ScalarField {
    s.map(|v| (1.0 - v) * cfg.eps_solvent + v * cfg.eps_solute)
}

/// Spread point charges onto the 8 surrounding nodes by trilinear weights,
/// as a density (e / A^3).
pub fn spread_charges(m: &Molecule, g: &Grid) -> Result<ScalarField> {
    let mut rho = ScalarField::zeros(*g);
    let inv_h3 = 1.0 / g.h.powi(3);
    for a in &m.atoms {
        let ([i, j, k], [fx, fy, fz]) = g.locate(a.position)?;
        for dz in 0..2 {
            for dy in 0..2 {
                for dx in 0..2 {
                    let w = (if dx == 0 { 1.0 - fx } else { fx })
                        * (if dy == 0 { 1.0 - fy } else { fy })
                        * (if dz == 0 { 1.0 - fz } else { fz });
                    rho.values[g.index(i + dx, j + dy, k + dz)] += a.charge * w * inv_h3;
                }
            }
        }
    }
    Ok(rho)
}

/// Screened-Coulomb Dirichlet values on the six box faces:
/// `Phi = sum_i C Q_i / (eps |r - r_i|) exp(-kappa |r - r_i|)`.
///
/// `eps` is the far-field dielectric: the solvent constant for the solvated
/// solve, the solute constant for the homogeneous reference.
pub fn dh_boundary(m: &Molecule, g: &Grid, cfg: &PbConfig, eps: f64) -> Result<ScalarField> {
    let mut bc = ScalarField::zeros(*g);
    let mut fill = |i: usize, j: usize, k: usize| -> Result<()> {
        let p = g.node_pos(i, j, k);
        let mut phi = 0.0;
        for a in &m.atoms {
            let r = ((p[0] - a.position[0]).powi(2)
                + (p[1] - a.position[1]).powi(2)
                + (p[2] - a.position[2]).powi(2))
            .sqrt();
            if r == 0.0 {
                return Err(Error::SingularBoundary(p));
            }
            phi += cfg.coulomb_const * a.charge / (eps * r) * (-cfg.kappa_bar * r).exp();
        }
        bc.values[g.index(i, j, k)] = phi;
        Ok(())
    };
    for k in 0..g.dims[2] {
        for j in 0..g.dims[1] {
            for i in 0..g.dims[0] {
                if g.on_boundary(i, j, k) {
                    fill(i, j, k)?;
                }
            }
        }
    }
    Ok(bc)
}

/// Harmonic mean of the two node permittivities on a cell face.
#[inline(always)]
fn face_eps(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Matrix-free application of the 7-point variable-coefficient operator
/// `A phi = -div(eps grad phi) * h^2` on interior nodes; boundary entries of
/// `phi` are treated as zero (their contribution lives in the rhs).
struct StencilOp<'a> {
    g: Grid,
    eps: &'a [f64],
    interior: &'a [bool],
}

impl StencilOp<'_> {
    fn apply(&self, phi: &[f64], out: &mut [f64]) {
        let (nx, ny, nz) = (self.g.dims[0], self.g.dims[1], self.g.dims[2]);
        let sy = nx as isize;
        let sz = (nx * ny) as isize;
        for v in out.iter_mut() {
            *v = 0.0;
        }
        for k in 1..nz - 1 {
            for j in 1..ny - 1 {
                let row = (k * ny + j) * nx;
                for i in 1..nx - 1 {
                    let idx = row + i;
                    let iu = idx as isize;
                    let e0 = self.eps[idx];
                    let mut diag = 0.0;
                    let mut acc = 0.0;
                    for &off in &[1isize, -1, sy, -sy, sz, -sz] {
                        let nb = (iu + off) as usize;
                        let ef = face_eps(e0, self.eps[nb]);
                        diag += ef;
                        if self.interior[nb] {
                            acc -= ef * phi[nb];
                        }
                    }
                    out[idx] = diag * phi[idx] + acc;
                }
            }
        }
    }

    fn diagonal(&self, out: &mut [f64]) {
        let (nx, ny, nz) = (self.g.dims[0], self.g.dims[1], self.g.dims[2]);
        let sy = nx as isize;
        let sz = (nx * ny) as isize;
        for v in out.iter_mut() {
            *v = 1.0;
        }
        for k in 1..nz - 1 {
            for j in 1..ny - 1 {
                let row = (k * ny + j) * nx;
                for i in 1..nx - 1 {
                    let idx = row + i;
                    let iu = idx as isize;
                    let e0 = self.eps[idx];
                    let mut diag = 0.0;
                    for &off in &[1isize, -1, sy, -sy, sz, -sz] {
                        diag += face_eps(e0, self.eps[(iu + off) as usize]);
                    }
                    out[idx] = diag;
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve `-div(eps grad Phi) = source` with Dirichlet boundary values `bc`,
/// by Jacobi-preconditioned BiCGStab on the 7-point discretization.
///
/// `source` is the full right-hand side density already including any factor
/// of S and unit constants; callers use [`gpb_source`] for the physical one.
pub fn solve_gpb(
    eps_field: &ScalarField,
    source: &ScalarField,
    bc: &ScalarField,
    cfg: &PbConfig,
) -> Result<ScalarField> {
    let g = eps_field.grid;
    let n = g.num_nodes();
    let h2 = g.h * g.h;
    let (nx, ny, nz) = (g.dims[0], g.dims[1], g.dims[2]);

    let mut interior = vec![false; n];
    for k in 1..nz - 1 {
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                interior[g.index(i, j, k)] = true;
            }
        }
    }
    let op = StencilOp {
        g,
        eps: &eps_field.values,
        interior: &interior,
    };

    // rhs = h^2 * source + boundary-value flux terms.
    let sy = nx as isize;
    let sz = (nx * ny) as isize;
    let mut rhs = vec![0.0; n];
    for k in 1..nz - 1 {
        for j in 1..ny - 1 {
            let row = (k * ny + j) * nx;
            for i in 1..nx - 1 {
                let idx = row + i;
                let iu = idx as isize;
                let mut b = h2 * source.values[idx];
                let e0 = eps_field.values[idx];
                for &off in &[1isize, -1, sy, -sy, sz, -sz] {
                    let nb = (iu + off) as usize;
                    if !interior[nb] {
                        b += face_eps(e0, eps_field.values[nb]) * bc.values[nb];
                    }
                }
                rhs[idx] = b;
            }
        }
    }

    let mut diag = vec![1.0; n];
    op.diagonal(&mut diag);
    let precond = |r: &[f64], z: &mut [f64]| {
        for i in 0..r.len() {
            z[i] = r[i] / diag[i];
        }
    };

    let rhs_norm = norm(&rhs).max(f64::MIN_POSITIVE);
    let tol = cfg.solver_tol * rhs_norm;

    // BiCGStab with right Jacobi preconditioning.
    let mut x = vec![0.0; n];
    let mut r = rhs.clone();
    let r0 = r.clone();
    let mut rho_old = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ph = vec![0.0; n];
    let mut sh = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut s_vec = vec![0.0; n];
    let mut residual = norm(&r);
    if residual <= tol {
        // zero source and zero boundary
        return finish_solution(x, bc, &interior, g);
    }
    for iter in 0..cfg.solver_max_iter {
        let rho = dot(&r0, &r);
        if rho.abs() < f64::MIN_POSITIVE {
            return Err(Error::SolverNonConvergence {
                residual,
                iterations: iter,
            });
        }
        if iter == 0 {
            p.copy_from_slice(&r);
        } else {
            let beta = (rho / rho_old) * (alpha / omega);
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
        }
        precond(&p, &mut ph);
        op.apply(&ph, &mut v);
        alpha = rho / dot(&r0, &v);
        for i in 0..n {
            s_vec[i] = r[i] - alpha * v[i];
        }
        if norm(&s_vec) <= tol {
            for i in 0..n {
                x[i] += alpha * ph[i];
            }
            return finish_solution(x, bc, &interior, g);
        }
        precond(&s_vec, &mut sh);
        op.apply(&sh, &mut t);
        omega = dot(&t, &s_vec) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
            r[i] = s_vec[i] - omega * t[i];
        }
        residual = norm(&r);
        if residual <= tol {
            return finish_solution(x, bc, &interior, g);
        }
        rho_old = rho;
    }
    Err(Error::SolverNonConvergence {
        residual,
        iterations: cfg.solver_max_iter,
    })
}

fn finish_solution(
    mut x: Vec<f64>,
    bc: &ScalarField,
    interior: &[bool],
    g: Grid,
) -> Result<ScalarField> {
    for i in 0..x.len() {
        if !interior[i] {
            x[i] = bc.values[i];
        }
    }
    let phi = ScalarField { grid: g, values: x };
    if !phi.is_finite() {
        return Err(Error::SolverNonConvergence {
            residual: f64::NAN,
            iterations: 0,
        });
    }
    Ok(phi)
}

/// Physical right-hand side of the pure-water equation: `4 pi C * S * rho`.
pub fn gpb_source(s: &ScalarField, rho: &ScalarField, cfg: &PbConfig) -> ScalarField {
    let scale = 4.0 * std::f64::consts::PI * cfg.coulomb_const;
    ScalarField {
        grid: s.grid,
        values: s
            .values
            .iter()
            .zip(&rho.values)
            .map(|(sv, rv)| scale * sv * rv)
            .collect(),
    }
}

/// Polar solvation energy: `1/2 sum_i Q_i [Phi(r_i) - Phi_h(r_i)]` with
/// trilinear readout at the atom centers.
pub fn reaction_field_energy(
    phi: &ScalarField,
    phi_h: &ScalarField,
    m: &Molecule,
) -> Result<f64> {
    assert_eq!(phi.grid, phi_h.grid, "potentials must share a grid");
    let mut e = 0.0;
    for a in &m.atoms {
        let v = phi.interpolate(a.position)?;
        let vh = phi_h.interpolate(a.position)?;
        e += 0.5 * a.charge * (v - vh);
    }
    Ok(e)
}

/// Dielectric-coupling potential `1/2 (eps_m - eps_s) |grad Phi|^2` by
/// central differences.
pub fn coupling_potential(phi: &ScalarField, cfg: &PbConfig) -> ScalarField {
    let g = phi.grid;
    let inv2h = 1.0 / (2.0 * g.h);
    let invh = 1.0 / g.h;
    let half_de = 0.5 * (cfg.eps_solute - cfg.eps_solvent);
    let mut out = vec![0.0; g.num_nodes()];
    for k in 0..g.dims[2] {
        for j in 0..g.dims[1] {
            for i in 0..g.dims[0] {
                let gx = axis_diff(phi, i, j, k, 0, inv2h, invh);
                let gy = axis_diff(phi, i, j, k, 1, inv2h, invh);
                let gz = axis_diff(phi, i, j, k, 2, inv2h, invh);
                out[g.index(i, j, k)] = half_de * (gx * gx + gy * gy + gz * gz);
            }
        }
    }
    ScalarField {
        grid: g,
        values: out,
    }
}
