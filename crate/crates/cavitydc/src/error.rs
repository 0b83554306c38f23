//! Crate-wide error type.
//!
//! Variants are grouped by how the CLI maps them to exit codes: input/validation
//! problems (bad modes, bad parameters, malformed configs) exit with 2, numerical
//! failures (non-convergence, fit breakdown) with 3, I/O trouble with 1.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    /// Mode index outside the supported TE_m0l family (or all-zero).
    #[error("invalid mode: {0}")]
    InvalidMode(String),

    /// A position argument lies outside the cavity interior / field-map domain.
    #[error("position ({0}, {1}, {2}) m lies outside the domain")]
    OutsideDomain(f64, f64, f64),

    /// Parameter out of its physical domain (negative power, zero radius, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Operation defined only for a subset of inputs (e.g. electrode loss model
    /// is calibrated for TE301 only).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An electrode or aperture rasterizes to nothing on the requested grid:
    /// it would have zero influence on the discrete problem.
    #[error("{0} unresolved by grid (no node or stencil arm intersects it)")]
    UnresolvedFeature(&'static str),

    /// Relaxation ran out of sweeps before reaching tolerance.
    #[error("field solve did not converge: residual {residual:.3e} after {iterations} sweeps")]
    NonConverged { residual: f64, iterations: usize },

    /// Nonlinear least squares failed to converge or produced a degenerate model.
    #[error("fit failed: {0}")]
    FitFailed(String),

    /// A statistics region or sample set contains no usable points.
    #[error("empty selection: {0}")]
    EmptySelection(String),

    /// Too few data points for the requested fit/analysis.
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    /// Trace does not span enough linewidths for a trustworthy linewidth fit.
    #[error("trace spans only {spanned:.2} fitted linewidths; need at least {needed:.1}")]
    SpanTooNarrow { spanned: f64, needed: f64 },

    /// Scenario config failed validation (missing block, bad value, kind mismatch).
    #[error("config validation: {0}")]
    Validation(String),

    /// Scenario config failed to parse at all.
    #[error("config parse: {0}")]
    ConfigParse(String),

    #[error("csv: {0}")]
    CsvFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code the CLI uses for this error class.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            InvalidMode(_) | OutsideDomain(..) | InvalidInput(_) | Unsupported(_)
            | UnresolvedFeature(_) | EmptySelection(_) | TooFewSamples { .. }
            | Validation(_) | ConfigParse(_) | CsvFormat(_) => 2,
            NonConverged { .. } | FitFailed(_) | SpanTooNarrow { .. } => 3,
            Io(_) => 1,
        }
    }
}
