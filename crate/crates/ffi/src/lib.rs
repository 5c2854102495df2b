//! C ABI over the solvation engine: opaque handles, integer status codes,
//! and a thread-local last-error message.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::ptr;

use libc::c_char;

use solvflow::fit::ParameterSet;
use solvflow::mol::{assign_type_indices, parse_molecule, Molecule, TypeTable};
use solvflow::scf::{run_scf, ScfConfig, ScfMode};
use solvflow::Error;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolvStatus {
    SolvOk = 0,
    SolvErrNullArgument = 1,
    SolvErrUtf8 = 2,
    SolvErrParse = 3,
    SolvErrConfig = 4,
    SolvErrConstraint = 5,
    SolvErrSolver = 6,
    SolvErrNonConvergence = 7,
    SolvErrIo = 8,
    SolvErrOther = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SolvStatus {
    match e {
        Error::Parse { .. } | Error::EmptyMolecule | Error::UnknownTypeLabel(_) => {
            SolvStatus::SolvErrParse
        }
        Error::Config(_) | Error::InvalidArgument(_) => SolvStatus::SolvErrConfig,
        Error::ConstraintViolation(_) => SolvStatus::SolvErrConstraint,
        Error::SolverNonConvergence { .. } | Error::Instability => SolvStatus::SolvErrSolver,
        Error::SurfaceNonConvergence { .. } | Error::ScfNonConvergence { .. } => {
            SolvStatus::SolvErrNonConvergence
        }
        Error::Io { .. } => SolvStatus::SolvErrIo,
        _ => SolvStatus::SolvErrOther,
    }
}

fn fail(e: &Error) -> SolvStatus {
    set_error(&e.to_string());
    status_of(e)
}

unsafe fn cstr<'a>(p: *const c_char) -> Result<&'a str, SolvStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(SolvStatus::SolvErrNullArgument);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        SolvStatus::SolvErrUtf8
    })
}

/// Last error message for this thread, or null if none. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn solv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map_or(ptr::null(), |c| c.as_ptr())
    })
}

/// Opaque parsed molecule.
pub struct SolvMolecule {
    inner: Molecule,
}

/// Opaque parameter set.
pub struct SolvParams {
    inner: ParameterSet,
}

/// Opaque result of one full-system run.
pub struct SolvResult {
    dg_polar: f64,
    g_nonpolar: f64,
    area: f64,
    volume: f64,
    lj: Vec<f64>,
    outer_iterations: usize,
}

/// Parses a structure text ("name x y z charge radius type_label" lines) and
/// assigns type indices against a type table ("label radius" lines, or null
/// for the built-in H/C/O table). On success stores a new handle in `out`.
#[no_mangle]
pub unsafe extern "C" fn solv_molecule_parse(
    name: *const c_char,
    structure_text: *const c_char,
    type_table_text: *const c_char,
    out: *mut *mut SolvMolecule,
) -> SolvStatus {
    if out.is_null() {
        set_error("null output handle");
        return SolvStatus::SolvErrNullArgument;
    }
    let name = match cstr(name) {
        Ok(s) => s,
        Err(st) => return st,
    };
    let text = match cstr(structure_text) {
        Ok(s) => s,
        Err(st) => return st,
    };
    let table = if type_table_text.is_null() {
        TypeTable::default_hco()
    } else {
        match cstr(type_table_text).map(|t| TypeTable::parse(t)) {
            Ok(Ok(t)) => t,
            Ok(Err(e)) => return fail(&e),
            Err(st) => return st,
        }
    };
    match parse_molecule(name, text).and_then(|m| assign_type_indices(&m, &table)) {
        Ok(m) => {
            *out = Box::into_raw(Box::new(SolvMolecule { inner: m }));
            SolvStatus::SolvOk
        }
        Err(e) => fail(&e),
    }
}

#[no_mangle]
pub unsafe extern "C" fn solv_molecule_free(m: *mut SolvMolecule) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of atoms in a parsed molecule; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn solv_molecule_num_atoms(m: *const SolvMolecule) -> usize {
    m.as_ref().map_or(0, |m| m.inner.atoms.len())
}

/// Loads a parameter set from its JSON document and checks the stability
/// constraints.
#[no_mangle]
pub unsafe extern "C" fn solv_params_from_json(
    json: *const c_char,
    out: *mut *mut SolvParams,
) -> SolvStatus {
    if out.is_null() {
        set_error("null output handle");
        return SolvStatus::SolvErrNullArgument;
    }
    let json = match cstr(json) {
        Ok(s) => s,
        Err(st) => return st,
    };
    let params: ParameterSet = match serde_json::from_str(json) {
        Ok(p) => p,
        Err(e) => {
            set_error(&format!("parameter JSON: {e}"));
            return SolvStatus::SolvErrParse;
        }
    };
    if let Err(e) = params.check_feasible() {
        return fail(&e);
    }
    *out = Box::into_raw(Box::new(SolvParams { inner: params }));
    SolvStatus::SolvOk
}

#[no_mangle]
pub unsafe extern "C" fn solv_params_free(p: *mut SolvParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Runs the full coupled solve. `config_json` overrides solver settings
/// (same schema as the library's ScfConfig); pass null for defaults.
#[no_mangle]
pub unsafe extern "C" fn solv_run_energy(
    m: *const SolvMolecule,
    p: *const SolvParams,
    config_json: *const c_char,
    out: *mut *mut SolvResult,
) -> SolvStatus {
    if out.is_null() || m.is_null() || p.is_null() {
        set_error("null handle argument");
        return SolvStatus::SolvErrNullArgument;
    }
    let mut cfg = if config_json.is_null() {
        ScfConfig::default()
    } else {
        match cstr(config_json) {
            Ok(s) => match serde_json::from_str::<ScfConfig>(s) {
                Ok(c) => c,
                Err(e) => {
                    set_error(&format!("config JSON: {e}"));
                    return SolvStatus::SolvErrParse;
                }
            },
            Err(st) => return st,
        }
    };
    cfg.mode = ScfMode::Full;
    let mol = &(*m).inner;
    let params = &(*p).inner;
    match run_scf(mol, params, &cfg) {
        Ok(r) => {
            let g_nonpolar = params.gamma * r.area
                + params.p * r.volume
                + params
                    .epsilons
                    .iter()
                    .zip(&r.lj_features)
                    .map(|(e, f)| e * f)
                    .sum::<f64>();
            *out = Box::into_raw(Box::new(SolvResult {
                dg_polar: r.dg_polar,
                g_nonpolar,
                area: r.area,
                volume: r.volume,
                lj: r.lj_features,
                outer_iterations: r.outer_iterations,
            }));
            SolvStatus::SolvOk
        }
        Err(e) => fail(&e),
    }
}

#[no_mangle]
pub unsafe extern "C" fn solv_result_free(r: *mut SolvResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Polar solvation energy, kcal/mol; NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn solv_result_dg_polar(r: *const SolvResult) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.dg_polar)
}

/// Nonpolar energy under the loaded parameters, kcal/mol.
#[no_mangle]
pub unsafe extern "C" fn solv_result_g_nonpolar(r: *const SolvResult) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.g_nonpolar)
}

/// Total solvation free energy, kcal/mol.
#[no_mangle]
pub unsafe extern "C" fn solv_result_dg_total(r: *const SolvResult) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.dg_polar + r.g_nonpolar)
}

/// Surface area of the converged interface, A^2.
#[no_mangle]
pub unsafe extern "C" fn solv_result_area(r: *const SolvResult) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.area)
}

/// Enclosed solute volume, A^3.
#[no_mangle]
pub unsafe extern "C" fn solv_result_volume(r: *const SolvResult) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.volume)
}

/// Number of per-type interaction features.
#[no_mangle]
pub unsafe extern "C" fn solv_result_num_lj(r: *const SolvResult) -> usize {
    r.as_ref().map_or(0, |r| r.lj.len())
}

/// Interaction feature `i`, A^3; NaN when out of range.
#[no_mangle]
pub unsafe extern "C" fn solv_result_lj(r: *const SolvResult, i: usize) -> f64 {
    r.as_ref()
        .and_then(|r| r.lj.get(i).copied())
        .unwrap_or(f64::NAN)
}

/// Outer iterations the coupled loop took.
#[no_mangle]
pub unsafe extern "C" fn solv_result_outer_iterations(r: *const SolvResult) -> usize {
    r.as_ref().map_or(0, |r| r.outer_iterations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    const PARAMS: &str = r#"{"gamma":0.06,"p":0.002,"epsilons":[-0.05,-0.1],
        "gamma0":0.05,"beta":0.1,"lambda":10.0}"#;
    const CONFIG: &str = r#"{"mode":"Full","energy_tol":0.01,"max_outer":60,
        "h":0.5,"buffer":3.5,"probe":1.4,
        "lb":{"gamma":0.05,"dt_safety":0.9,"delta_reg":1e-6,"a1":0.5,
              "area_tol":0.01,"vol_tol":0.01,"steps_per_sweep":50,"max_sweeps":400},
        "pb":{"eps_solute":1.0,"eps_solvent":80.0,"kappa_bar":0.0,
              "coulomb_const":332.0637,"solver_tol":1e-8,"solver_max_iter":20000},
        "lj":{"sigma_s":3.0,"cutoff":12.0,"clamp_radius_fraction":0.8}}"#;

    #[test]
    fn round_trip_energy() {
        let name = c("mol");
        let text = c("C1 0 0 0 0.4 1.7 C\nH1 1.1 0 0 -0.4 1.2 H\n");
        let mut mol = ptr::null_mut();
        let st = unsafe { solv_molecule_parse(name.as_ptr(), text.as_ptr(), ptr::null(), &mut mol) };
        assert_eq!(st, SolvStatus::SolvOk);
        assert_eq!(unsafe { solv_molecule_num_atoms(mol) }, 2);

        let mut params = ptr::null_mut();
        let pj = c(PARAMS);
        assert_eq!(
            unsafe { solv_params_from_json(pj.as_ptr(), &mut params) },
            SolvStatus::SolvOk
        );

        let cj = c(CONFIG);
        let mut res = ptr::null_mut();
        let st = unsafe { solv_run_energy(mol, params, cj.as_ptr(), &mut res) };
        assert_eq!(st, SolvStatus::SolvOk);
        unsafe {
            assert!(solv_result_dg_polar(res).is_finite());
            assert!(solv_result_area(res) > 0.0);
            assert!(solv_result_volume(res) > 0.0);
            assert_eq!(solv_result_num_lj(res), 2);
            assert!(solv_result_lj(res, 0).is_finite());
            assert!(solv_result_lj(res, 5).is_nan());
            let total = solv_result_dg_total(res);
            let parts = solv_result_dg_polar(res) + solv_result_g_nonpolar(res);
            assert_eq!(total, parts);
            assert!(solv_result_outer_iterations(res) >= 1);
            solv_result_free(res);
            solv_params_free(params);
            solv_molecule_free(mol);
        }
    }

    #[test]
    fn error_paths_set_codes_and_message() {
        let mut mol = ptr::null_mut();
        let st = unsafe {
            solv_molecule_parse(ptr::null(), ptr::null(), ptr::null(), &mut mol)
        };
        assert_eq!(st, SolvStatus::SolvErrNullArgument);
        assert!(!solv_last_error().is_null());

        let name = c("m");
        let bad = c("onlythreefields 1 2\n");
        let st = unsafe {
            solv_molecule_parse(name.as_ptr(), bad.as_ptr(), ptr::null(), &mut mol)
        };
        assert_eq!(st, SolvStatus::SolvErrParse);
        let msg = unsafe { CStr::from_ptr(solv_last_error()) }.to_str().unwrap();
        assert!(msg.contains("line 1"), "{msg}");

        let mut params = ptr::null_mut();
        let infeasible = c(r#"{"gamma":0.01,"p":0.0,"epsilons":[],
            "gamma0":0.05,"beta":0.1,"lambda":10.0}"#);
        let st = unsafe { solv_params_from_json(infeasible.as_ptr(), &mut params) };
        assert_eq!(st, SolvStatus::SolvErrConstraint);
    }

    #[test]
    fn null_accessors_are_inert() {
        unsafe {
            assert!(solv_result_dg_polar(ptr::null()).is_nan());
            assert_eq!(solv_result_num_lj(ptr::null()), 0);
            assert_eq!(solv_molecule_num_atoms(ptr::null()), 0);
            solv_result_free(ptr::null_mut());
            solv_params_free(ptr::null_mut());
            solv_molecule_free(ptr::null_mut());
        }
    }
}
