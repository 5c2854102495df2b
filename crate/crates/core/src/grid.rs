//! Regular 3D Cartesian grid, scalar fields, domain masks, and the
//! differential/integral operators used by the surface and electrostatics
//! solvers.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mol::Molecule;

/// Axis-aligned node lattice: nodes sit at `origin + (i, j, k) * h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: [f64; 3],
    pub h: f64,
    pub dims: [usize; 3],
}

impl Grid {
    pub fn new(origin: [f64; 3], h: f64, dims: [usize; 3]) -> Self {
        assert!(h > 0.0, "grid spacing must be positive");
        assert!(dims.iter().all(|&n| n >= 2), "need at least 2 nodes per axis");
        Grid { origin, h, dims }
    }

    pub fn num_nodes(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    #[inline]
    pub fn node_pos(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + i as f64 * self.h,
            self.origin[1] + j as f64 * self.h,
            self.origin[2] + k as f64 * self.h,
        ]
    }

    /// True for nodes on any of the six box faces.
    #[inline]
    pub fn on_boundary(&self, i: usize, j: usize, k: usize) -> bool {
        i == 0
            || j == 0
            || k == 0
            || i == self.dims[0] - 1
            || j == self.dims[1] - 1
            || k == self.dims[2] - 1
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|a| {
            let max = self.origin[a] + (self.dims[a] - 1) as f64 * self.h;
            p[a] >= self.origin[a] && p[a] <= max
        })
    }

    /// Trilinear interpolation weights: base node `(i, j, k)` plus fractional
    /// offsets in `[0, 1)` per axis.
    pub fn locate(&self, p: [f64; 3]) -> Result<([usize; 3], [f64; 3])> {
        if !self.contains(p) {
            return Err(Error::OutsideGrid(p));
        }
        let mut base = [0usize; 3];
        let mut frac = [0f64; 3];
        for a in 0..3 {
            let t = (p[a] - self.origin[a]) / self.h;
            let mut i = t.floor() as usize;
            // Clamp points sitting exactly on the upper face into the last cell.
            if i >= self.dims[a] - 1 {
                i = self.dims[a] - 2;
            }
            base[a] = i;
            frac[a] = t - i as f64;
        }
        Ok((base, frac))
    }
}

/// One real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField {
            values: vec![0.0; grid.num_nodes()],
            grid,
        }
    }

    pub fn constant(grid: Grid, v: f64) -> Self {
        ScalarField {
            values: vec![v; grid.num_nodes()],
            grid,
        }
    }

    /// Fill from a function of node position.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let mut values = vec![0.0; grid.num_nodes()];
        for k in 0..grid.dims[2] {
            for j in 0..grid.dims[1] {
                for i in 0..grid.dims[0] {
                    values[grid.index(i, j, k)] = f(grid.node_pos(i, j, k));
                }
            }
        }
        ScalarField { grid, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, j, k)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> ScalarField {
        self.map(|v| v * s)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Trilinear interpolation at an arbitrary point inside the grid.
    pub fn interpolate(&self, p: [f64; 3]) -> Result<f64> {
        let ([i, j, k], [fx, fy, fz]) = self.grid.locate(p)?;
        let mut acc = 0.0;
        for dz in 0..2 {
            for dy in 0..2 {
                for dx in 0..2 {
                    let w = (if dx == 0 { 1.0 - fx } else { fx })
                        * (if dy == 0 { 1.0 - fy } else { fy })
                        * (if dz == 0 { 1.0 - fz } else { fz });
                    acc += w * self.at(i + dx, j + dy, k + dz);
                }
            }
        }
        Ok(acc)
    }

    /// Debug dump: small text header (dims, origin, spacing) followed by one
    /// node value per line in index order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# dims {} {} {} origin {} {} {} spacing {}",
            self.grid.dims[0],
            self.grid.dims[1],
            self.grid.dims[2],
            self.grid.origin[0],
            self.grid.origin[1],
            self.grid.origin[2],
            self.grid.h
        )?;
        for v in &self.values {
            writeln!(w, "{v}")?;
        }
        Ok(())
    }
}

/// One boolean per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainMask {
    pub grid: Grid,
    pub inside: Vec<bool>,
}

impl DomainMask {
    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> bool {
        self.inside[self.grid.index(i, j, k)]
    }

    pub fn count_inside(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }
}

/// Build the computational box: covers every atom center inflated by
/// `radius + buffer`, each axis snapped up to an integer number of cells,
/// expanded symmetrically about the box center.
pub fn build_grid(m: &Molecule, h: f64, buffer: f64) -> Grid {
    assert!(h > 0.0 && buffer >= 0.0);
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for a in &m.atoms {
        for axis in 0..3 {
            lo[axis] = lo[axis].min(a.position[axis] - a.radius - buffer);
            hi[axis] = hi[axis].max(a.position[axis] + a.radius + buffer);
        }
    }
    let mut origin = [0.0; 3];
    let mut dims = [0usize; 3];
    for axis in 0..3 {
        let raw = hi[axis] - lo[axis];
        let cells = (raw / h - 1e-12).ceil().max(1.0) as usize;
        let len = cells as f64 * h;
        let center = 0.5 * (lo[axis] + hi[axis]);
        origin[axis] = center - 0.5 * len;
        dims[axis] = cells + 1;
    }
    Grid::new(origin, h, dims)
}

fn ball_mask(g: &Grid, m: &Molecule, inflate: f64) -> DomainMask {
    let mut inside = vec![false; g.num_nodes()];
    // Per-atom loop over the bounding sub-box of each ball.
    for a in &m.atoms {
        let r = a.radius + inflate;
        let r2 = r * r;
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for axis in 0..3 {
            let lo_f = (a.position[axis] - r - g.origin[axis]) / g.h;
            let hi_f = (a.position[axis] + r - g.origin[axis]) / g.h;
            lo[axis] = lo_f.floor().max(0.0) as usize;
            hi[axis] = (hi_f.ceil() as usize).min(g.dims[axis] - 1);
        }
        for k in lo[2]..=hi[2] {
            for j in lo[1]..=hi[1] {
                for i in lo[0]..=hi[0] {
                    let p = g.node_pos(i, j, k);
                    let d2 = (p[0] - a.position[0]).powi(2)
                        + (p[1] - a.position[1]).powi(2)
                        + (p[2] - a.position[2]).powi(2);
                    // Closed-ball membership.
                    if d2 <= r2 {
                        inside[g.index(i, j, k)] = true;
                    }
                }
            }
        }
    }
    DomainMask {
        grid: *g,
        inside,
    }
}

/// Union of van der Waals balls.
pub fn vdw_mask(g: &Grid, m: &Molecule) -> DomainMask {
    ball_mask(g, m, 0.0)
}

/// Union of probe-inflated balls (extended solute domain).
pub fn extended_mask(g: &Grid, m: &Molecule, r_probe: f64) -> DomainMask {
    ball_mask(g, m, r_probe)
}

/// Node-sum midpoint rule: sum of values times the cell volume.
pub fn integrate(f: &ScalarField) -> f64 {
    let h3 = f.grid.h.powi(3);
    f.values.iter().sum::<f64>() * h3
}

/// Regularized gradient magnitude `sqrt(|grad f|^2 + delta^2)`: central
/// differences in the interior, one-sided at the box faces.
pub fn gradient_magnitude(f: &ScalarField, delta_reg: f64) -> ScalarField {
    let g = f.grid;
    let mut out = vec![0.0; g.num_nodes()];
    let inv2h = 1.0 / (2.0 * g.h);
    let invh = 1.0 / g.h;
    for k in 0..g.dims[2] {
        for j in 0..g.dims[1] {
            for i in 0..g.dims[0] {
                let gx = axis_diff(f, i, j, k, 0, inv2h, invh);
                let gy = axis_diff(f, i, j, k, 1, inv2h, invh);
                let gz = axis_diff(f, i, j, k, 2, inv2h, invh);
                out[g.index(i, j, k)] =
                    (gx * gx + gy * gy + gz * gz + delta_reg * delta_reg).sqrt();
            }
        }
    }
    ScalarField {
        grid: g,
        values: out,
    }
}

/// One component of the gradient by finite differences, one-sided at faces.
#[inline]
pub(crate) fn axis_diff(
    f: &ScalarField,
    i: usize,
    j: usize,
    k: usize,
    axis: usize,
    inv2h: f64,
    invh: f64,
) -> f64 {
    let idx = [i, j, k];
    let n = f.grid.dims[axis];
    let get = |off: isize| {
        let mut c = idx;
        c[axis] = (c[axis] as isize + off) as usize;
        f.at(c[0], c[1], c[2])
    };
    if idx[axis] == 0 {
        (get(1) - get(0)) * invh
    } else if idx[axis] == n - 1 {
        (get(0) - get(-1)) * invh
    } else {
        (get(1) - get(-1)) * inv2h
    }
}

/// Surface area functional: integral of the (unregularized) gradient norm.
pub fn surface_area(s: &ScalarField) -> f64 {
    integrate(&gradient_magnitude(s, 0.0))
}

/// Enclosed volume functional: integral of the surface function itself.
pub fn enclosed_volume(s: &ScalarField) -> f64 {
    integrate(s)
}

/// Smoothed sphere indicator with a tanh transition profile; handy fixture
/// shared by tests across modules.
pub fn smoothed_sphere(grid: Grid, center: [f64; 3], radius: f64, width: f64) -> ScalarField {
    ScalarField::from_fn(grid, |p| {
        let r = ((p[0] - center[0]).powi(2)
            + (p[1] - center[1]).powi(2)
            + (p[2] - center[2]).powi(2))
        .sqrt();
        0.5 * (1.0 - ((r - radius) / width).tanh())
    })
}
