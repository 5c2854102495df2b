//! Surface function evolution: explicit time stepping of the generalized
//! Laplace-Beltrami equation with Dirichlet values on the van der Waals
//! domain and the outer box, plus under-relaxed outer updates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{enclosed_volume, surface_area, DomainMask, Grid, ScalarField};

/// Settings for one surface evolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LbConfig {
    /// Surface tension, kcal/(mol A^2). Must stay above the stability bound.
    pub gamma: f64,
    /// Fraction of the CFL limit actually used, in (0, 1].
    pub dt_safety: f64,
    /// Gradient-norm regularization.
    pub delta_reg: f64,
    /// Under-relaxation weight for the sweep blend, in (0, 1].
    pub a1: f64,
    /// Convergence threshold on the surface-area change between sweeps.
    pub area_tol: f64,
    /// Convergence threshold on the enclosed-volume change between sweeps.
    pub vol_tol: f64,
    /// Time steps taken per sweep before blending.
    pub steps_per_sweep: usize,
    /// Sweep cap.
    pub max_sweeps: usize,
}

impl Default for LbConfig {
    fn default() -> Self {
        LbConfig {
            gamma: 0.05,
            dt_safety: 0.9,
            delta_reg: 1e-6,
            a1: 0.5,
            area_tol: 0.01,
            vol_tol: 0.01,
            steps_per_sweep: 50,
            max_sweeps: 400,
        }
    }
}

/// Dirichlet node sets for the evolution: S = 1 on the van der Waals domain,
/// S = 0 on the outer box faces.
#[derive(Debug, Clone)]
pub struct SurfaceMasks {
    pub vdw: DomainMask,
}

/// Per-sweep convergence record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepTrace {
    pub sweep: usize,
    pub area: f64,
    pub volume: f64,
    pub dt: f64,
}

/// Initial surface: 1 on the extended solute domain, 0 elsewhere.
pub fn init_surface(g: &Grid, ext: &DomainMask) -> ScalarField {
    assert_eq!(*g, ext.grid, "mask must live on the target grid");
    ScalarField {
        grid: *g,
        values: ext
            .inside
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect(),
    }
}

/// Stable step size: `dt_safety * min(h^2/(6 gamma), 1/(max |V_e| + delta))`.
pub fn cfl_dt(gamma: f64, h: f64, v_e: &ScalarField, dt_safety: f64, delta_reg: f64) -> f64 {
    assert!(gamma > 0.0 && h > 0.0);
    let diffusive = h * h / (6.0 * gamma);
    let potential = 1.0 / (v_e.max_abs() + delta_reg);
    dt_safety * diffusive.min(potential)
}

/// Largest |V_e| over nodes where the surface can actually move (outside the
/// van der Waals domain and off the outer boundary). The potential blows up
/// near point charges, but those nodes are pinned at S = 1.
pub fn max_potential_outside(v_e: &ScalarField, masks: &SurfaceMasks) -> f64 {
    let g = v_e.grid;
    let mut m = 0.0f64;
    for k in 0..g.dims[2] {
        for j in 0..g.dims[1] {
            for i in 0..g.dims[0] {
                if g.on_boundary(i, j, k) || masks.vdw.at(i, j, k) {
                    continue;
                }
                m = m.max(v_e.at(i, j, k).abs());
            }
        }
    }
    m
}

/// Scratch arrays reused across time steps.
struct StepBuffers {
    nx: Vec<f64>,
    ny: Vec<f64>,
    nz: Vec<f64>,
    mag: Vec<f64>,
}

impl StepBuffers {
    fn new(n: usize) -> Self {
        StepBuffers {
            nx: vec![0.0; n],
            ny: vec![0.0; n],
            nz: vec![0.0; n],
            mag: vec![0.0; n],
        }
    }
}

/// One forward-Euler step of `dS/dt = |grad S| [div(gamma grad S / |grad S|) + V_e]`,
/// followed by re-imposing the Dirichlet values and clamping to [0, 1].
pub fn lb_step(
    s: &ScalarField,
    gamma: f64,
    v_e: &ScalarField,
    dt: f64,
    masks: &SurfaceMasks,
    delta_reg: f64,
) -> Result<ScalarField> {
    let mut buf = StepBuffers::new(s.grid.num_nodes());
    let mut out = s.clone();
    lb_step_into(&s.values, &mut out.values, s.grid, gamma, v_e, dt, masks, delta_reg, &mut buf)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn lb_step_into(
    s: &[f64],
    out: &mut [f64],
    g: Grid,
    gamma: f64,
    v_e: &ScalarField,
    dt: f64,
    masks: &SurfaceMasks,
    delta_reg: f64,
    buf: &mut StepBuffers,
) -> Result<()> {
    let inv2h = 1.0 / (2.0 * g.h);
    let invh = 1.0 / g.h;
    let (nx_d, ny_d, nz_d) = (g.dims[0], g.dims[1], g.dims[2]);
    let sx = 1isize;
    let sy = nx_d as isize;
    let sz = (nx_d * ny_d) as isize;
    let d2 = delta_reg * delta_reg;

    // Pass 1: unit normal n = grad S / |grad S|_reg and the regularized norm.
    for k in 0..nz_d {
        for j in 0..ny_d {
            let row = (k * ny_d + j) * nx_d;
            for i in 0..nx_d {
                let idx = row + i;
                let gx = one_axis(s, idx, i, nx_d, sx, inv2h, invh);
                let gy = one_axis(s, idx, j, ny_d, sy, inv2h, invh);
                let gz = one_axis(s, idx, k, nz_d, sz, inv2h, invh);
                let m = (gx * gx + gy * gy + gz * gz + d2).sqrt();
                buf.nx[idx] = gx / m;
                buf.ny[idx] = gy / m;
                buf.nz[idx] = gz / m;
                buf.mag[idx] = m;
            }
        }
    }

    // Pass 2: divergence of the normal field and the Euler update (interior,
    // non-Dirichlet nodes only).
    out.copy_from_slice(s);
    let mut finite = true;
    for k in 1..nz_d - 1 {
        for j in 1..ny_d - 1 {
            let row = (k * ny_d + j) * nx_d;
            for i in 1..nx_d - 1 {
                let idx = row + i;
                if masks.vdw.inside[idx] {
                    continue;
                }
                let iu = idx as isize;
                let div = (buf.nx[(iu + sx) as usize] - buf.nx[(iu - sx) as usize]
                    + buf.ny[(iu + sy) as usize]
                    - buf.ny[(iu - sy) as usize]
                    + buf.nz[(iu + sz) as usize]
                    - buf.nz[(iu - sz) as usize])
                    * inv2h;
                let rate = buf.mag[idx] * (gamma * div + v_e.values[idx]);
                let v = (s[idx] + dt * rate).clamp(0.0, 1.0);
                finite &= v.is_finite();
                out[idx] = v;
            }
        }
    }
    if !finite {
        return Err(Error::Instability);
    }
    // Dirichlet values: 1 on the van der Waals domain, 0 on the outer box.
    impose_dirichlet(out, &g, masks);
    Ok(())
}

/// Finite difference along one axis of a flat array: central in the
/// interior, one-sided at the faces.
#[inline(always)]
fn one_axis(s: &[f64], idx: usize, coord: usize, n: usize, stride: isize, inv2h: f64, invh: f64) -> f64 {
    let iu = idx as isize;
    if coord == 0 {
        (s[(iu + stride) as usize] - s[idx]) * invh
    } else if coord == n - 1 {
        (s[idx] - s[(iu - stride) as usize]) * invh
    } else {
        (s[(iu + stride) as usize] - s[(iu - stride) as usize]) * inv2h
    }
}

fn impose_dirichlet(values: &mut [f64], g: &Grid, masks: &SurfaceMasks) {
    for k in 0..g.dims[2] {
        for j in 0..g.dims[1] {
            for i in 0..g.dims[0] {
                let idx = g.index(i, j, k);
                if masks.vdw.at(i, j, k) {
                    values[idx] = 1.0;
                } else if g.on_boundary(i, j, k) {
                    values[idx] = 0.0;
                }
            }
        }
    }
}

/// Evolve to steady state: repeat fixed sweeps of `lb_step`, blend
/// `S <- a1 S_new + (1 - a1) S_old`, stop when both the area and volume
/// changes between sweeps fall below tolerance.
pub fn evolve_surface(
    s0: &ScalarField,
    cfg: &LbConfig,
    v_e: &ScalarField,
    masks: &SurfaceMasks,
) -> Result<(ScalarField, Vec<SweepTrace>)> {
    let mut s = s0.clone();
    impose_dirichlet(&mut s.values, &s0.grid, masks);
    let v_max = max_potential_outside(v_e, masks);
    let v_proxy = ScalarField::constant(s0.grid, v_max);
    let dt = cfl_dt(cfg.gamma, s0.grid.h, &v_proxy, cfg.dt_safety, cfg.delta_reg);

    let mut area = surface_area(&s);
    let mut vol = enclosed_volume(&s);
    let mut trace = Vec::new();
    let mut d_area = f64::INFINITY;
    let mut d_vol = f64::INFINITY;
    let mut buf = StepBuffers::new(s.grid.num_nodes());
    let mut next = s.values.clone();
    for sweep in 0..cfg.max_sweeps {
        let old = s.clone();
        for _ in 0..cfg.steps_per_sweep {
            lb_step_into(
                &s.values,
                &mut next,
                s.grid,
                cfg.gamma,
                v_e,
                dt,
                masks,
                cfg.delta_reg,
                &mut buf,
            )?;
            std::mem::swap(&mut s.values, &mut next);
        }
        // Under-relaxed update against the pre-sweep field.
        for (v, o) in s.values.iter_mut().zip(&old.values) {
            *v = cfg.a1 * *v + (1.0 - cfg.a1) * *o;
        }
        let new_area = surface_area(&s);
        let new_vol = enclosed_volume(&s);
        d_area = (new_area - area).abs();
        d_vol = (new_vol - vol).abs();
        area = new_area;
        vol = new_vol;
        trace.push(SweepTrace {
            sweep,
            area,
            volume: vol,
            dt,
        });
        if d_area < cfg.area_tol && d_vol < cfg.vol_tol {
            return Ok((s, trace));
        }
    }
    Err(Error::SurfaceNonConvergence {
        sweeps: cfg.max_sweeps,
        d_area,
        d_vol,
    })
}
