use thiserror::Error;

/// Errors raised by the physics modules.
///
/// Numeric payloads are reported as `f64` regardless of the working scalar.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhysicsError {
    #[error("velocity |v| = {speed} violates the sub-luminal guard {limit}")]
    Superluminal { speed: f64, limit: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("central potential evaluated at r = 0 without a declared limit")]
    DegenerateProbe,

    #[error("step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("maximum number of steps ({0}) exceeded")]
    TooManySteps(usize),

    #[error("non-finite value encountered in the right-hand side at t = {t}")]
    NonFinite { t: f64 },

    #[error("Penning trap at or below the stability boundary: lambda = {lambda}, critical field B_c = {critical_field}")]
    InstabilityBoundary { lambda: f64, critical_field: f64 },

    #[error("observer lies on the world line at t = {t}")]
    ObserverOnWorldLine { t: f64 },

    #[error("retarded time solver did not converge after {0} iterations")]
    RetardedTimeDiverged(usize),

    #[error("coincident particle positions ({i}, {j})")]
    CoincidentPositions { i: usize, j: usize },

    #[error("acceleration coupling matrix is singular")]
    SingularCoupling,

    #[error("delay history does not cover [{required_from}, {required_to}]")]
    HistoryTooShort { required_from: f64, required_to: f64 },

    #[error("quadrature failed to reach tolerance {tol} (estimate {estimate})")]
    Quadrature { tol: f64, estimate: f64 },

    #[error("root finding failed: {0}")]
    RootFinding(String),
}

pub type Result<T, E = PhysicsError> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> PhysicsError {
    PhysicsError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
