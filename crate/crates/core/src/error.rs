use thiserror::Error;

/// Rejected grid geometry.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum GridError {
    #[error("dimension must be 1, 2 or 3, got {0}")]
    Dimension(usize),
    #[error("points per axis must be even, got {0}")]
    OddPoints(usize),
    #[error("points per axis must be at least 8, got {0}")]
    TooFewPoints(usize),
    #[error("box length must be at least 4 and finite, got {0}")]
    BoxTooSmall(f64),
    #[error("{points}^{dims} points exceeds the budget of 2^28")]
    PointBudget { points: usize, dims: usize },
}

/// Errors from field-level operations.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum FieldError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("expected a {expected} field, got {found}")]
    Representation {
        expected: &'static str,
        found: &'static str,
    },
    #[error("value array has {found} entries, grid needs {expected}")]
    Length { expected: usize, found: usize },
    #[error("fields live on different grids")]
    GridMismatch,
}

/// Errors raised while integrating.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum PropagatorError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("nonlinearity exponent must be positive and finite, got {0}")]
    Alpha(f64),
    #[error("alpha = {alpha} violates 0 < alpha < 4/(d-2) = {bound} for d = {dims}")]
    AlphaRange { alpha: f64, dims: usize, bound: f64 },
    #[error("time step must be positive and finite, got {0}")]
    TimeStep(f64),
    #[error("final time must be nonnegative and finite, got {0}")]
    FinalTime(f64),
    #[error("sample cadence must be at least one step")]
    Cadence,
    #[error("non-finite value in the field at step {step}")]
    NonFinite { step: u64 },
    #[error("wavevector is not on the dual lattice of the grid")]
    OffLattice,
    #[error("amplitude must be positive and finite, got {0}")]
    Amplitude(f64),
    #[error("gaussian width {sigma} must be at least four cells ({min})")]
    Unresolved { sigma: f64, min: f64 },
    #[error(
        "dispersed gaussian width {width} does not fit six times in the box of length {box_length}"
    )]
    ExceedsBox { width: f64, box_length: f64 },
    #[error("profile parameter `{0}` is invalid")]
    Profile(&'static str),
}

/// Errors raised by the diagnostic functionals.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("Lebesgue exponent must be at least 1, got {0}")]
    Exponent(f64),
    #[error("nonlinearity exponent must be positive and finite, got {0}")]
    Alpha(f64),
    #[error("cube side must lie in (0, L/2], got {side} with L/2 = {half_box}")]
    CubeSide { side: f64, half_box: f64 },
    #[error("ratio undefined for the zero field")]
    ZeroField,
    #[error("kernel exponent must be positive and finite, got {0}")]
    KernelExponent(f64),
    #[error("margin fraction must lie in (0, 0.5), got {0}")]
    Margin(f64),
    #[error("sample spacing {found} differs from the accumulator cadence {expected}")]
    MixedCadence { expected: f64, found: f64 },
    #[error("accumulator dimension {expected} does not match field dimension {found}")]
    Dimension { expected: usize, found: usize },
}
