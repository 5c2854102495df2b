//! Linear energy model over per-molecule features and the stability
//! constrained, l2-regularized convex fit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mol::Dataset;
use crate::scf::{run_scf, ScfConfig, ScfMode};

/// Model parameters: surface tension, pressure, and per-type well depths,
/// together with the constraint and regularization constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    /// kcal/(mol A^2).
    pub gamma: f64,
    /// kcal/(mol A^3).
    pub p: f64,
    /// Per-type well depths, kcal/(mol A^3).
    pub epsilons: Vec<f64>,
    /// Lower bound on gamma.
    pub gamma0: f64,
    /// Pressure-ratio bound: |p| <= beta * gamma.
    pub beta: f64,
    /// Regularization weight.
    pub lambda: f64,
}

impl ParameterSet {
    /// Feasible starting point: gamma at its bound, everything else zero.
    pub fn bootstrap(num_types: usize, gamma0: f64, beta: f64, lambda: f64) -> Self {
        ParameterSet {
            gamma: gamma0,
            p: 0.0,
            epsilons: vec![0.0; num_types],
            gamma0,
            beta,
            lambda,
        }
    }

    /// Checks the stability constraints, naming the violated inequality.
    pub fn check_feasible(&self) -> Result<()> {
        if !(self.gamma >= self.gamma0) {
            return Err(Error::ConstraintViolation(format!(
                "gamma >= gamma0 fails: {} < {}",
                self.gamma, self.gamma0
            )));
        }
        if !(self.p.abs() <= self.beta * self.gamma) {
            return Err(Error::ConstraintViolation(format!(
                "|p| <= beta * gamma fails: |{}| > {}",
                self.p,
                self.beta * self.gamma
            )));
        }
        Ok(())
    }

    /// l2 norm of the parameter vector (gamma, p, epsilons).
    pub fn norm(&self) -> f64 {
        (self.gamma * self.gamma
            + self.p * self.p
            + self.epsilons.iter().map(|e| e * e).sum::<f64>())
        .sqrt()
    }
}

/// One molecule's precomputed contributions to the energy model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeFeatures {
    pub name: String,
    /// kcal/mol.
    pub dg_polar: f64,
    /// A^2.
    pub area: f64,
    /// A^3.
    pub volume: f64,
    /// Per-type interaction integrals, A^3.
    pub lj: Vec<f64>,
    /// kcal/mol.
    pub dg_exp: f64,
}

/// One molecule's prediction against experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculePrediction {
    pub name: String,
    pub predicted: f64,
    pub experimental: f64,
    pub error: f64,
}

/// Outcome of the outer learning loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ParameterSet,
    pub predictions: Vec<MoleculePrediction>,
    pub rms: f64,
    pub outer_iterations: usize,
    pub converged: bool,
}

/// `dG = dG_polar + gamma * area + p * volume + sum_j eps_j lj_j`.
pub fn predict_energy(f: &MoleculeFeatures, params: &ParameterSet) -> Result<f64> {
    if f.lj.len() != params.epsilons.len() {
        return Err(Error::Config(format!(
            "{} well depths for {} feature columns",
            params.epsilons.len(),
            f.lj.len()
        )));
    }
    Ok(f.dg_polar
        + params.gamma * f.area
        + params.p * f.volume
        + params
            .epsilons
            .iter()
            .zip(&f.lj)
            .map(|(e, x)| e * x)
            .sum::<f64>())
}

/// Euclidean projection onto `K = {gamma >= gamma0} ∩ {|p| <= beta gamma}`.
pub fn project_feasible(gamma: f64, p: f64, gamma0: f64, beta: f64) -> (f64, f64) {
    if gamma >= gamma0 && p.abs() <= beta * gamma {
        return (gamma, p);
    }
    let s = if p >= 0.0 { 1.0 } else { -1.0 };
    let mut best = (gamma0, s * beta * gamma0);
    let mut best_d2 = (gamma - best.0).powi(2) + (p - best.1).powi(2);
    let mut consider = |cand: (f64, f64)| {
        let d2 = (gamma - cand.0).powi(2) + (p - cand.1).powi(2);
        if d2 < best_d2 {
            best = cand;
            best_d2 = d2;
        }
    };
    if p.abs() <= beta * gamma0 {
        consider((gamma0, p));
    }
    // foot of the perpendicular onto the cone edge p = s beta gamma
    let t = (gamma + s * beta * p) / (1.0 + beta * beta);
    if t >= gamma0 {
        consider((t, s * beta * t));
    }
    best
}

/// Subgradient solver settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvexOptions {
    /// Step scale of the first cycle (iteration k within a cycle takes a
    /// normalized step of length `step / sqrt(k)`).
    pub step: f64,
    /// The step scale halves whenever a cycle stalls; below this the solve
    /// is declared converged.
    pub step_min: f64,
    pub max_iters: usize,
    /// Convergence: best objective improves less than this ...
    pub tol: f64,
    /// ... over this many consecutive iterations.
    pub patience: usize,
}

impl Default for ConvexOptions {
    fn default() -> Self {
        ConvexOptions {
            step: 1.0,
            step_min: 1e-10,
            max_iters: 400_000,
            tol: 1e-6,
            patience: 200,
        }
    }
}

/// Best feasible iterate and its objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexSolution {
    pub params: ParameterSet,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// The fitting objective `||dG(P) - dG_exp||_2 + lambda ||P||_2`.
pub fn fit_objective(features: &[MoleculeFeatures], params: &ParameterSet) -> Result<f64> {
    let mut r2 = 0.0;
    for f in features {
        let e = predict_energy(f, params)? - f.dg_exp;
        r2 += e * e;
    }
    Ok(r2.sqrt() + params.lambda * params.norm())
}

/// Projected subgradient descent on [`fit_objective`] over the feasible set;
/// well depths are unconstrained. Variables are scaled internally by the
/// feature column norms (gamma and p share one factor so the constraint cone
/// keeps its shape). Each cycle takes diminishing normalized steps
/// `step / sqrt(k)`; a stalled cycle restarts from the best iterate with the
/// step scale halved. Returns the best iterate seen.
pub fn solve_convex(
    features: &[MoleculeFeatures],
    init: &ParameterSet,
    opts: &ConvexOptions,
) -> Result<ConvexSolution> {
    if features.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let nt = init.epsilons.len();
    for f in features {
        if f.lj.len() != nt {
            return Err(Error::Config(format!(
                "feature arity mismatch for {:?}: {} vs {}",
                f.name,
                f.lj.len(),
                nt
            )));
        }
    }
    init.check_feasible()?;

    let n = 2 + nt;
    let m = features.len();
    // column norms of the design matrix; one shared scale for (gamma, p)
    let mut scale = vec![1.0; n];
    {
        let mut col = vec![0.0; n];
        for f in features {
            col[0] += f.area * f.area;
            col[1] += f.volume * f.volume;
            for (cj, lj) in col[2..].iter_mut().zip(&f.lj) {
                *cj += lj * lj;
            }
        }
        let gp = col[0].max(col[1]).sqrt().max(1.0);
        scale[0] = gp;
        scale[1] = gp;
        for (sj, cj) in scale[2..].iter_mut().zip(&col[2..]) {
            *sj = cj.sqrt().max(1.0);
        }
    }
    let gamma0_s = init.gamma0 * scale[0];

    let to_params = |x: &[f64]| -> ParameterSet {
        ParameterSet {
            gamma: x[0] / scale[0],
            p: x[1] / scale[1],
            epsilons: x[2..].iter().zip(&scale[2..]).map(|(v, s)| v / s).collect(),
            gamma0: init.gamma0,
            beta: init.beta,
            lambda: init.lambda,
        }
    };

    // scaled residual rows and objective pieces
    let eval = |x: &[f64], residuals: &mut [f64]| -> (f64, f64) {
        let mut r2 = 0.0;
        for (ri, f) in residuals.iter_mut().zip(features) {
            let mut v = f.dg_polar - f.dg_exp
                + x[0] / scale[0] * f.area
                + x[1] / scale[1] * f.volume;
            for ((xj, sj), lj) in x[2..].iter().zip(&scale[2..]).zip(&f.lj) {
                v += xj / sj * lj;
            }
            *ri = v;
            r2 += v * v;
        }
        let pnorm = x
            .iter()
            .zip(&scale)
            .map(|(v, s)| (v / s) * (v / s))
            .sum::<f64>()
            .sqrt();
        (r2.sqrt(), pnorm)
    };

    let mut best_x = vec![
        init.gamma * scale[0],
        init.p * scale[1],
    ];
    best_x.extend(init.epsilons.iter().zip(&scale[2..]).map(|(e, s)| e * s));
    let mut residuals = vec![0.0; m];
    let (rn0, pn0) = eval(&best_x, &mut residuals);
    let mut best_obj = rn0 + init.lambda * pn0;

    let mut x = best_x.clone();
    let mut grad = vec![0.0; n];
    let mut total = 0usize;
    let mut converged = false;
    let mut c = opts.step;

    'outer: while c >= opts.step_min {
        x.copy_from_slice(&best_x);
        let mut stall = 0usize;
        let mut k = 0usize;
        loop {
            if total >= opts.max_iters {
                break 'outer;
            }
            k += 1;
            total += 1;
            let (rnorm, pnorm) = eval(&x, &mut residuals);
            let obj = rnorm + init.lambda * pnorm;
            if obj < best_obj - opts.tol {
                stall = 0;
            } else {
                stall += 1;
                if stall >= opts.patience {
                    break;
                }
            }
            if obj < best_obj {
                best_obj = obj;
                best_x.copy_from_slice(&x);
            }

            for gi in grad.iter_mut() {
                *gi = 0.0;
            }
            if rnorm > 0.0 {
                for (ri, f) in residuals.iter().zip(features) {
                    let w = ri / rnorm;
                    grad[0] += w * f.area / scale[0];
                    grad[1] += w * f.volume / scale[1];
                    for ((gj, sj), lj) in grad[2..].iter_mut().zip(&scale[2..]).zip(&f.lj) {
                        *gj += w * lj / sj;
                    }
                }
            }
            if pnorm > 0.0 {
                for ((gj, xj), sj) in grad.iter_mut().zip(&x).zip(&scale) {
                    *gj += init.lambda * xj / (sj * sj) / pnorm;
                }
            }
            let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if gnorm == 0.0 {
                converged = true;
                break 'outer;
            }
            let step = c / (k as f64).sqrt() / gnorm;
            for (xi, gi) in x.iter_mut().zip(&grad) {
                *xi -= step * gi;
            }
            let (g, pp) = project_feasible(x[0], x[1], gamma0_s, init.beta);
            x[0] = g;
            x[1] = pp;
        }
        c *= 0.5;
    }
    if c < opts.step_min {
        converged = true;
    }

    let mut params = to_params(&best_x);
    // unscaling can drift off the boundary by an ulp; snap back
    let (g, p) = project_feasible(params.gamma, params.p, init.gamma0, init.beta);
    params.gamma = g;
    params.p = p;
    params.check_feasible()?;
    Ok(ConvexSolution {
        params,
        objective: best_obj,
        iterations: total,
        converged,
    })
}

/// Outer learning loop settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    /// Per-molecule solver settings; the mode field is managed internally.
    pub scf: ScfConfig,
    pub convex: ConvexOptions,
    pub gamma0: f64,
    pub beta: f64,
    pub lambda: f64,
    /// Outer stop: successive RMS values differ by less than this, kcal/mol.
    pub rms_tol: f64,
    pub max_outer: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            scf: ScfConfig::default(),
            convex: ConvexOptions::default(),
            gamma0: 0.05,
            beta: 0.1,
            lambda: 10.0,
            rms_tol: 0.01,
            max_outer: 20,
        }
    }
}

/// One outer fit iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTracePoint {
    pub outer: usize,
    pub rms: f64,
    pub params: ParameterSet,
}

fn scf_features(
    ds: &Dataset,
    params: &ParameterSet,
    cfg: &ScfConfig,
    mode: ScfMode,
    nt: usize,
) -> Result<Vec<MoleculeFeatures>> {
    let mut cfg = cfg.clone();
    cfg.mode = mode;
    let mut out = Vec::with_capacity(ds.len());
    for (m, dg_exp) in &ds.entries {
        let r = run_scf(m, params, &cfg).map_err(|e| Error::FitMolecule {
            molecule: m.name.clone(),
            source: Box::new(e),
        })?;
        let mut lj = r.lj_features;
        lj.resize(nt, 0.0);
        out.push(MoleculeFeatures {
            name: m.name.clone(),
            dg_polar: r.dg_polar,
            area: r.area,
            volume: r.volume,
            lj,
            dg_exp: *dg_exp,
        });
    }
    Ok(out)
}

fn predictions(features: &[MoleculeFeatures], params: &ParameterSet) -> Result<Vec<MoleculePrediction>> {
    features
        .iter()
        .map(|f| {
            let predicted = predict_energy(f, params)?;
            Ok(MoleculePrediction {
                name: f.name.clone(),
                predicted,
                experimental: f.dg_exp,
                error: predicted - f.dg_exp,
            })
        })
        .collect()
}

fn rms_of(preds: &[MoleculePrediction]) -> f64 {
    (preds.iter().map(|p| p.error * p.error).sum::<f64>() / preds.len() as f64).sqrt()
}

/// The outer learning loop: bootstrap on the auxiliary system, fit, then
/// alternate full-system feature extraction with convex refits until the
/// RMS error settles.
pub fn fit_parameters(ds: &Dataset, cfg: &FitConfig) -> Result<(FitResult, Vec<FitTracePoint>)> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let nt = ds.num_types();
    let bootstrap = ParameterSet::bootstrap(nt, cfg.gamma0, cfg.beta, cfg.lambda);

    let mut features = scf_features(ds, &bootstrap, &cfg.scf, ScfMode::Auxiliary, nt)?;
    let mut params = solve_convex(&features, &bootstrap, &cfg.convex)?.params;
    let mut preds = predictions(&features, &params)?;
    let mut rms = rms_of(&preds);
    let mut trace = vec![FitTracePoint {
        outer: 0,
        rms,
        params: params.clone(),
    }];

    let mut converged = false;
    let mut outer_iterations = cfg.max_outer;
    for outer in 1..=cfg.max_outer {
        features = scf_features(ds, &params, &cfg.scf, ScfMode::Full, nt)?;
        params = solve_convex(&features, &params, &cfg.convex)?.params;
        preds = predictions(&features, &params)?;
        let rms_new = rms_of(&preds);
        trace.push(FitTracePoint {
            outer,
            rms: rms_new,
            params: params.clone(),
        });
        let delta = (rms_new - rms).abs();
        rms = rms_new;
        if delta < cfg.rms_tol {
            converged = true;
            outer_iterations = outer;
            break;
        }
    }

    Ok((
        FitResult {
            params,
            predictions: preds,
            rms,
            outer_iterations,
            converged,
        },
        trace,
    ))
}
