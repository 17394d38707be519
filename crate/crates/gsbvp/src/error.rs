use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Every failure mode of the library.
///
/// Variants are grouped roughly by origin: linear algebra, data validation,
/// quadrature/series, ellipticity-gated analysis, the PDE oracle, and the
/// gauge-symbol constructions.
#[derive(Debug, Error)]
pub enum Error {
    /// Input matrix violates the Hermitian precondition.
    #[error("matrix is not Hermitian: |M - M^H| = {residual:.3e} exceeds {tol:.3e}")]
    NotHermitian { residual: f64, tol: f64 },

    /// Iterative eigensolver did not converge.
    #[error("eigensolver failed to converge for order-{order} matrix")]
    ConvergenceFailure { order: usize },

    /// A scalar function was evaluated outside its domain on the spectrum.
    #[error("matrix function undefined at eigenvalue {eigenvalue}: {reason}")]
    DomainError { eigenvalue: f64, reason: String },

    /// Matrix/vector dimensions do not match the declared shapes.
    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: String },

    /// A nonzero tangential covector is required.
    #[error("operation requires a nonzero covector")]
    ZeroCovector,

    /// Computation requires a strongly elliptic boundary setup.
    #[error("strong ellipticity violated (margin {margin})")]
    NotElliptic { margin: f64 },

    /// Quadrature node values overflowed or lost all precision.
    #[error("quadrature diverged: {context}")]
    QuadratureDivergence { context: String },

    /// Series truncation order exceeds the supported maximum.
    #[error("series order {requested} exceeds maximum {max}")]
    OrderTooHigh { requested: usize, max: usize },

    /// No closed-form branch matches the algebraic structure of the setup.
    #[error("no closed form applies: {context}")]
    NoClosedForm { context: String },

    /// Resolvent parameter lies on the spectral branch cut [0, inf).
    #[error("resolvent parameter {lambda} lies on the branch cut [0, +inf)")]
    BranchCut { lambda: String },

    /// The resolvent bracket is singular: s coincides with an eigenvalue of
    /// the tangential symbol.
    #[error("resolvent pole: s = {s} hits the boundary-symbol spectrum (distance {distance:.3e})")]
    ResolventPole { s: String, distance: f64 },

    /// A spectral branch exceeds the parametrix existence threshold: the
    /// boundary-layer integral diverges.
    #[error("non-elliptic divergence: spectral branch nu = {nu} > 1 destroys the boundary integral")]
    NonellipticDivergence { nu: f64 },

    /// The direction-resolved spectrum is anisotropic; the trace profile is
    /// only defined for direction-independent spectra.
    #[error("operation requires an isotropic natural spectrum")]
    IsotropyRequired,

    /// The eigenvalue multiset of the tangential symbol cannot be arranged
    /// into zeros plus symmetric pairs.
    #[error("spectrum is not natural: branch at nu = {nu:.6e} has odd symmetrized multiplicity {count}")]
    NonNaturalSpectrum { nu: f64, count: usize },

    /// Finite-difference grid too coarse for the boundary stencil.
    #[error("grid too coarse: n = {n_grid} < {min} points")]
    GridTooCoarse { n_grid: usize, min: usize },

    /// Discrete operator acquired spurious negative modes in a regime where
    /// it must be nonnegative.
    #[error("discrete operator unstable: eigenvalue {min_eigenvalue:.6e} below tolerance in elliptic regime")]
    InstabilityDetected { min_eigenvalue: f64 },

    /// Tangential-frequency cutoff insufficient for the requested time.
    #[error("frequency cutoff {cutoff:.3e} below required {required:.3e}")]
    CutoffTooSmall { cutoff: f64, required: f64 },

    /// Small-time fit requested on a degenerate time sweep.
    #[error("fit ill-conditioned: {context}")]
    FitIllConditioned { context: String },

    /// A structural claim about induced boundary data failed; the input does
    /// not satisfy the assumed symbol algebra.
    #[error("induced-boundary claim violated: {claim} (residual {residual:.3e})")]
    ClaimViolated { claim: String, residual: f64 },

    /// Unknown built-in model name or unsupported parameter combination.
    #[error("unsupported model: {context}")]
    UnsupportedModel { context: String },

    /// A metric or normalization required by a model construction degenerated.
    #[error("normalization failure: {context}")]
    NormalizationFailure { context: String },

    /// Failure attributed to a specific mesh cell.
    #[error("mesh cell {index}: {source}")]
    Cell {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attach a mesh-cell index to an error.
    pub fn at_cell(self, index: usize) -> Error {
        Error::Cell {
            index,
            source: Box::new(self),
        }
    }
}
