//! Crate-wide error type.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("molecule has no atoms")]
    EmptyMolecule,

    #[error("unknown atom type label {0:?}")]
    UnknownTypeLabel(String),

    #[error("duplicate entry {0:?} in dataset")]
    DuplicateEntry(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },

    #[error("point {0:?} outside grid")]
    OutsideGrid([f64; 3]),

    #[error("boundary node coincides with atom center {0:?}")]
    SingularBoundary([f64; 3]),

    #[error("linear solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    SolverNonConvergence { residual: f64, iterations: usize },

    #[error("surface evolution produced a non-finite value (CFL or parameter violation)")]
    Instability,

    #[error(
        "surface evolution did not converge after {sweeps} sweeps (|dArea|={d_area:.3e}, |dVol|={d_vol:.3e})"
    )]
    SurfaceNonConvergence {
        sweeps: usize,
        d_area: f64,
        d_vol: f64,
    },

    #[error("self-consistent loop did not converge after {outer} outer iterations (last |dG^P delta|={delta:.3e})")]
    ScfNonConvergence { outer: usize, delta: f64 },

    #[error("stability constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("fit failed for molecule {molecule:?}: {source}")]
    FitMolecule {
        molecule: String,
        source: Box<Error>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
