use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("EvenPeriod: period {0} is even, only odd periods are supported")]
    EvenPeriod(usize),
    #[error("TooShort: period {0} is below the minimum of 3")]
    TooShort(usize),
    #[error("NonPositiveWeight: c[{index}] = {value} must be strictly positive")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("InvalidRange: {0}")]
    InvalidRange(String),
    #[error("InvalidTolerance: {0}")]
    InvalidTolerance(String),
    #[error("ParityViolation: coefficient of lambda^{power} is {value:e}, expected zero")]
    ParityViolation { power: usize, value: f64 },
    #[error("OutOfRange: {0}")]
    OutOfRange(String),
    #[error("LengthMismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("RootFindingFailure: {0}")]
    RootFindingFailure(String),
    #[error("SingularCurve: branch points {a} and {b} are closer than {sep:e}")]
    SingularCurve { a: String, b: String, sep: f64 },
    #[error("DegenerateSpectrum: Dirichlet eigenvalues {0} and {1} coincide")]
    DegenerateSpectrum(f64, f64),
    #[error("BranchAmbiguity: lambda = {0} is within the separation tolerance of a branch point")]
    BranchAmbiguity(String),
    #[error("NearBranchPoint: sample lambda = {0} is too close to a branch point")]
    NearBranchPoint(String),
    #[error("PoleHit: lambda = {0} is a pole of the Bloch function on this sheet")]
    PoleHit(f64),
    #[error("FitIllConditioned: condition number {0:e} exceeds the threshold")]
    FitIllConditioned(f64),
    #[error("SheetFlip: Floquet multiplier changed sheet under perturbation of c[{0}]")]
    SheetFlip(usize),
    #[error("CanonicityFailure: {0}")]
    CanonicityFailure(String),
    #[error("PositivityLoss: weight c[{index}] = {value} at t = {t}")]
    PositivityLoss { index: usize, value: f64, t: f64 },
    #[error("StepLimitExceeded: no convergence after {0} step halvings")]
    StepLimitExceeded(usize),
    #[error("InvalidInput: {0}")]
    InvalidInput(String),
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
    #[error("Json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::EvenPeriod(_)
            | Error::TooShort(_)
            | Error::NonPositiveWeight { .. }
            | Error::InvalidRange(_)
            | Error::InvalidTolerance(_)
            | Error::OutOfRange(_)
            | Error::LengthMismatch { .. }
            | Error::InvalidInput(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
            _ => 3,
        }
    }

    /// Short machine-readable tag, the variant name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EvenPeriod(_) => "EvenPeriod",
            Error::TooShort(_) => "TooShort",
            Error::NonPositiveWeight { .. } => "NonPositiveWeight",
            Error::InvalidRange(_) => "InvalidRange",
            Error::InvalidTolerance(_) => "InvalidTolerance",
            Error::ParityViolation { .. } => "ParityViolation",
            Error::OutOfRange(_) => "OutOfRange",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::RootFindingFailure(_) => "RootFindingFailure",
            Error::SingularCurve { .. } => "SingularCurve",
            Error::DegenerateSpectrum(..) => "DegenerateSpectrum",
            Error::BranchAmbiguity(_) => "BranchAmbiguity",
            Error::NearBranchPoint(_) => "NearBranchPoint",
            Error::PoleHit(_) => "PoleHit",
            Error::FitIllConditioned(_) => "FitIllConditioned",
            Error::SheetFlip(_) => "SheetFlip",
            Error::CanonicityFailure(_) => "CanonicityFailure",
            Error::PositivityLoss { .. } => "PositivityLoss",
            Error::StepLimitExceeded(_) => "StepLimitExceeded",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}
