//! Benchmark harness: RMS error, k-fold cross-validation, and the solvent
//! radius sweep.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{
    fit_parameters, predict_energy, FitConfig, MoleculeFeatures, MoleculePrediction, ParameterSet,
};
use crate::mol::Dataset;
use crate::scf::{run_scf, ScfMode};

/// `sqrt(mean((pred - exp)^2))`.
pub fn rmse(pred: &[f64], exp: &[f64]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::InvalidArgument("rmse of empty vectors".into()));
    }
    if pred.len() != exp.len() {
        return Err(Error::InvalidArgument(format!(
            "rmse length mismatch: {} vs {}",
            pred.len(),
            exp.len()
        )));
    }
    let s: f64 = pred.iter().zip(exp).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((s / pred.len() as f64).sqrt())
}

/// How to assign molecules to folds.
#[derive(Debug, Clone)]
pub enum FoldSpec {
    /// Seeded shuffle, sizes as uniform as possible.
    Seeded(u64),
    /// Explicit molecule-name to fold-index map.
    Explicit(BTreeMap<String, usize>),
}

/// Parses an explicit assignment file: CSV rows `name,fold`.
pub fn parse_fold_assignments(text: &str) -> Result<BTreeMap<String, usize>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut map = BTreeMap::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: row + 2,
            msg: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(Error::Parse {
                line: row + 2,
                msg: format!("expected 2 columns, got {}", record.len()),
            });
        }
        let fold: usize = record[1].parse().map_err(|_| Error::Parse {
            line: row + 2,
            msg: format!("bad fold index {:?}", &record[1]),
        })?;
        if map.insert(record[0].to_string(), fold).is_some() {
            return Err(Error::DuplicateEntry(record[0].to_string()));
        }
    }
    Ok(map)
}

/// Splits the dataset into `k` folds of entry indices. Sizes differ by at
/// most one; the same seed always yields the same split.
pub fn kfold_split(ds: &Dataset, k: usize, spec: &FoldSpec) -> Result<Vec<Vec<usize>>> {
    let n = ds.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k = {k} must be >= 2")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} folds for {n} molecules"
        )));
    }
    match spec {
        FoldSpec::Seeded(seed) => {
            let mut order: Vec<usize> = (0..n).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            order.shuffle(&mut rng);
            let base = n / k;
            let extra = n % k;
            let mut folds = Vec::with_capacity(k);
            let mut at = 0;
            for f in 0..k {
                let size = base + usize::from(f < extra);
                let mut fold: Vec<usize> = order[at..at + size].to_vec();
                fold.sort_unstable();
                folds.push(fold);
                at += size;
            }
            Ok(folds)
        }
        FoldSpec::Explicit(map) => {
            let mut folds = vec![Vec::new(); k];
            for (i, (m, _)) in ds.entries.iter().enumerate() {
                let f = *map.get(&m.name).ok_or_else(|| {
                    Error::InvalidArgument(format!("no fold assigned to {:?}", m.name))
                })?;
                if f >= k {
                    return Err(Error::InvalidArgument(format!(
                        "fold {f} out of range for {:?}",
                        m.name
                    )));
                }
                folds[f].push(i);
            }
            if folds.iter().any(Vec::is_empty) {
                return Err(Error::InvalidArgument("empty fold in assignment".into()));
            }
            Ok(folds)
        }
    }
}

/// One fold's fit and blind prediction; a failed fold records its error and
/// leaves the rest of the report intact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub validation_molecules: Vec<String>,
    pub train_rms: Option<f64>,
    pub validation_rms: Option<f64>,
    pub params: Option<ParameterSet>,
    pub predictions: Vec<MoleculePrediction>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldReport>,
    /// Molecule name to fold index.
    pub assignment: Vec<(String, usize)>,
}

/// Fits on each training portion and blind-predicts the held-out molecules
/// with full-system runs under the fitted parameters.
pub fn cross_validate(ds: &Dataset, k: usize, spec: &FoldSpec, cfg: &FitConfig) -> Result<CvReport> {
    let folds = kfold_split(ds, k, spec)?;
    let nt = ds.num_types();
    let mut assignment = Vec::with_capacity(ds.len());
    for (f, fold) in folds.iter().enumerate() {
        for &i in fold {
            assignment.push((ds.entries[i].0.name.clone(), f));
        }
    }
    assignment.sort();

    let mut reports = Vec::with_capacity(k);
    for (f, fold) in folds.iter().enumerate() {
        let validation_molecules: Vec<String> = fold
            .iter()
            .map(|&i| ds.entries[i].0.name.clone())
            .collect();
        let train = Dataset {
            family_label: format!("{}-fold{f}-train", ds.family_label),
            entries: ds
                .entries
                .iter()
                .enumerate()
                .filter(|(i, _)| !fold.contains(i))
                .map(|(_, e)| e.clone())
                .collect(),
        };
        match cv_fold(ds, &train, fold, nt, cfg) {
            Ok((train_rms, validation_rms, params, predictions)) => reports.push(FoldReport {
                fold: f,
                validation_molecules,
                train_rms: Some(train_rms),
                validation_rms: Some(validation_rms),
                params: Some(params),
                predictions,
                error: None,
            }),
            Err(e) => reports.push(FoldReport {
                fold: f,
                validation_molecules,
                train_rms: None,
                validation_rms: None,
                params: None,
                predictions: Vec::new(),
                error: Some(format!("fold {f}: {e}")),
            }),
        }
    }
    Ok(CvReport {
        folds: reports,
        assignment,
    })
}

fn cv_fold(
    ds: &Dataset,
    train: &Dataset,
    holdout: &[usize],
    nt: usize,
    cfg: &FitConfig,
) -> Result<(f64, f64, ParameterSet, Vec<MoleculePrediction>)> {
    let (fit, _) = fit_parameters(train, cfg)?;
    let mut params = fit.params.clone();
    // the training subset may use fewer type columns than the whole dataset
    params.epsilons.resize(nt, 0.0);

    let mut scf_cfg = cfg.scf.clone();
    scf_cfg.mode = ScfMode::Full;
    let mut predictions = Vec::with_capacity(holdout.len());
    for &i in holdout {
        let (m, dg_exp) = &ds.entries[i];
        if m.num_types() > fit.params.epsilons.len() {
            return Err(Error::FitMolecule {
                molecule: m.name.clone(),
                source: Box::new(Error::Config(
                    "molecule uses an atom type absent from the training set".into(),
                )),
            });
        }
        let r = run_scf(m, &params, &scf_cfg).map_err(|e| Error::FitMolecule {
            molecule: m.name.clone(),
            source: Box::new(e),
        })?;
        let mut lj = r.lj_features;
        lj.resize(nt, 0.0);
        let features = MoleculeFeatures {
            name: m.name.clone(),
            dg_polar: r.dg_polar,
            area: r.area,
            volume: r.volume,
            lj,
            dg_exp: *dg_exp,
        };
        let predicted = predict_energy(&features, &params)?;
        predictions.push(MoleculePrediction {
            name: m.name.clone(),
            predicted,
            experimental: *dg_exp,
            error: predicted - *dg_exp,
        });
    }
    let validation_rms = rms_errors(&predictions);
    Ok((fit.rms, validation_rms, params, predictions))
}

fn rms_errors(preds: &[MoleculePrediction]) -> f64 {
    (preds.iter().map(|p| p.error * p.error).sum::<f64>() / preds.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Solvent radius, A.
    pub radius: f64,
    pub rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub best_radius: f64,
}

/// Parses a radius list: either `start:stop:step` or comma-separated values.
pub fn parse_radius_spec(spec: &str) -> Result<Vec<f64>> {
    let bad = |msg: &str| Error::InvalidArgument(format!("radius spec {spec:?}: {msg}"));
    let radii: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:stop:step"));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.parse().map_err(|_| bad("not a number")))
            .collect::<Result<_>>()?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if step <= 0.0 || stop < start {
            return Err(bad("need step > 0 and stop >= start"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| start + i as f64 * step).collect()
    } else {
        spec.split(',')
            .map(|p| p.trim().parse().map_err(|_| bad("not a number")))
            .collect::<Result<_>>()?
    };
    validate_radii(&radii)?;
    Ok(radii)
}

fn validate_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::InvalidArgument("no radii given".into()));
    }
    if radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidArgument("radii must be positive".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "radii must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Refits the whole dataset at each solvent radius and reports the RMS curve.
pub fn solvent_radius_sweep(ds: &Dataset, radii: &[f64], cfg: &FitConfig) -> Result<SweepReport> {
    validate_radii(radii)?;
    let mut points = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut cfg = cfg.clone();
        cfg.scf.lj.sigma_s = r;
        let (fit, _) = fit_parameters(ds, &cfg)?;
        points.push(SweepPoint {
            radius: r,
            rms: fit.rms,
        });
    }
    let best_radius = points
        .iter()
        .min_by(|a, b| a.rms.total_cmp(&b.rms))
        .map(|p| p.radius)
        .unwrap();
    Ok(SweepReport {
        points,
        best_radius,
    })
}
