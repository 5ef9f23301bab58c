use thiserror::Error;

/// Errors raised by the operator-algebra toolkit and the game workbench.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (symmetry defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("map is not completely positive (Choi eigenvalue {min_eigenvalue:.3e})")]
    NotCP { min_eigenvalue: f64 },

    #[error("operator is not a contraction (norm {norm:.6})")]
    NotContraction { norm: f64 },

    #[error("operator is not unitary (defect {defect:.3e})")]
    NotUnitary { defect: f64 },

    #[error("not a state: {0}")]
    NotState(String),

    #[error("map is not dominated (Choi difference eigenvalue {min_eigenvalue:.3e})")]
    NotDominated { min_eigenvalue: f64 },

    #[error("derivative spectrum [{min:.3e}, {max:.3e}] escapes [0, 1]")]
    RangeViolation { min: f64, max: f64 },

    #[error("parts do not sum to the dilated map (defect {defect:.3e})")]
    SumMismatch { defect: f64 },

    #[error("operator is not in the commutant of the map's range (defect {defect:.3e})")]
    NotInCommutant { defect: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("problem too large: {size} exceeds cap {cap}")]
    TooLarge { size: u128, cap: u128 },

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("operators do not commute (defect {defect:.3e})")]
    NotCommuting { defect: f64 },

    #[error("strategy is not operationally no-signalling (state defect {state_defect:.3e}, instrument defects {instrument_defects:?})")]
    NotOns {
        state_defect: f64,
        instrument_defects: Vec<f64>,
    },

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),

    #[error("unsupported label space: {0}")]
    UnsupportedLabelSpace(String),

    #[error("eigendecomposition did not converge")]
    NoConvergence,
}

pub type Result<T> = std::result::Result<T, Error>;
