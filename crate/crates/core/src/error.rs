use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown potential family `{0}`")]
    UnknownFamily(String),

    #[error("wavenumber must be nonzero")]
    ZeroWavenumber,

    #[error("|Im k| = {0} exceeds the supported limit of {1}")]
    ImaginaryPartTooLarge(f64, f64),

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error("integrator failed to converge (last change {max_change:e} after {substeps} substeps)")]
    IntegratorFailure { max_change: f64, substeps: usize },

    #[error("unitarity defect {defect:e} at k = {k} exceeds tolerance {tol:e}")]
    Unitarity { k: f64, defect: f64, tol: f64 },

    #[error("sample magnitude {magnitude:e} at k = {k} is below the zero threshold {threshold:e}")]
    NearZero { k: f64, magnitude: f64, threshold: f64 },

    #[error("phase step {step:.4} at k = {k} is too large to unwrap; grid too coarse")]
    PhaseStep { k: f64, step: f64 },

    #[error("m_hat turns by {step:.3} rad between -k_min and k_min, which the grid cannot resolve; lower k_min")]
    UnresolvedGap { step: f64 },

    #[error("cannot classify behaviour at k = 0: {0}")]
    OriginOrder(String),

    #[error("Riemann problem index ind_m = {ind_m} is nonzero; bound states present, inversion refused")]
    NonzeroIndex { ind_m: i64 },

    #[error("{what} residual {value:e} exceeds threshold {threshold:e}")]
    Residual {
        what: &'static str,
        value: f64,
        threshold: f64,
    },

    #[error("Marchenko system at x = {x} is ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { x: f64, condition: f64 },

    #[error("eigenvalue {0:e} lies inside the zero deadband; bound-state count indeterminate")]
    BorderlineEigenvalue(f64),

    #[error("norming constant: {0}")]
    Norming(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
