use thiserror::Error;

/// Errors raised by the simulator kernels and checkers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImcfError {
    #[error("DomainError: {0}")]
    Domain(String),
    #[error("SingularMetric: {0}")]
    SingularMetric(String),
    #[error("NotTimelike: g(nu, nu) = {0} is not negative")]
    NotTimelike(f64),
    #[error("NotSpacelike: |Du|^2 = {value} exceeds 1 - {margin} at point {point}")]
    NotSpacelike { value: f64, margin: f64, point: usize },
    #[error("NonPositiveH: H = {value} at point {point}")]
    NonPositiveH { value: f64, point: usize },
    #[error("NumericalBlowup: {0}")]
    NumericalBlowup(String),
    #[error("InitialDataInvalid: {0}")]
    InitialDataInvalid(String),
    #[error("NoHorizon: {0}")]
    NoHorizon(String),
    #[error("UnsupportedTopology: {0}")]
    UnsupportedTopology(String),
    #[error("NotPositive: phi({at}) = {value}")]
    NotPositive { at: f64, value: f64 },
    #[error("BarrierViolated: e^psi H = {lhs} < phi = {phi} at x0 = {at}")]
    BarrierViolated { at: f64, lhs: f64, phi: f64 },
    #[error("RangeError: {0}")]
    Range(String),
    #[error("Unbounded: {0}")]
    Unbounded(String),
    #[error("OutOfFoliation: {0}")]
    OutOfFoliation(String),
    #[error("StiffnessFailure: step size {0:e} collapsed")]
    StiffnessFailure(f64),
    #[error("PreconditionViolated: {0}")]
    Precondition(String),
    #[error("InvalidGrid: {0}")]
    InvalidGrid(String),
}

impl ImcfError {
    /// True for errors that signal bad inputs rather than a numerical breakdown.
    pub fn is_precondition(&self) -> bool {
        !matches!(
            self,
            ImcfError::NumericalBlowup(_)
                | ImcfError::StiffnessFailure(_)
                | ImcfError::Unbounded(_)
                | ImcfError::SingularMetric(_)
        )
    }
}

pub type Result<T, E = ImcfError> = std::result::Result<T, E>;
