use num_complex::Complex64;

/// Errors produced by the numerical kernels and fixture loaders.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dyadic scale {0} is outside the supported range")]
    ScaleOutOfRange(i64),

    #[error("dyadic index overflow for x = {x} at scale {scale}")]
    IndexOverflow { x: f64, scale: i32 },

    #[error("non-finite input in {0}")]
    NonFinite(&'static str),

    #[error("Schatten index must satisfy p >= 1, got {0}")]
    InvalidSchattenIndex(f64),

    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("z = {0} is not in the open upper half-plane")]
    NotUpperHalfPlane(Complex64),

    #[error("z = {0} lies on the real axis")]
    OnRealAxis(Complex64),

    #[error("Hilbert transform is undefined at x = {0} (atom or density edge)")]
    UndefinedAtAtom(f64),

    #[error("empty grid")]
    EmptyGrid,

    #[error("empty measure")]
    EmptyMeasure,

    #[error("intervals {0} and {1} overlap")]
    OverlappingIntervals(String, String),

    #[error("good part does not match the stopping intervals")]
    MismatchedGoodPart,

    #[error("I + B0(z)J is singular at z = {z} (smallest singular value {sigma_min:e})")]
    SingularPerturbation { z: Complex64, sigma_min: f64 },

    #[error("epsilon {eps:e} is below the resolution floor {floor:e}")]
    BelowFloor { eps: f64, floor: f64 },

    #[error("matrix {0} is not Hermitian")]
    NotHermitian(&'static str),

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
