use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("kinetic term diverges: Im(m) = {im_m} < 0")]
    KineticDivergence { im_m: f64 },

    #[error("potential term diverges: Im(m ω²) = {im_m_omega2} > 0")]
    PotentialDivergence { im_m_omega2: f64 },

    #[error("invalid regulators: {0}")]
    RegulatorInvalid(String),

    #[error("angles (θ_m = {theta_m}, θ_ω = {theta_omega}) lie outside the allowed parallelogram")]
    OutOfDomain { theta_m: f64, theta_omega: f64 },

    #[error("degenerate division: {0}")]
    DivisionDegenerate(&'static str),

    #[error("states are not normalizable: |arg(mω)| = {theta_abs} ≥ π/2")]
    NotNormalizable { theta_abs: f64 },

    #[error("contour angle {angle} is too steep (|angle| must be < π/2)")]
    AngleTooSteep { angle: f64 },

    #[error("integrand is not finite at node {index}")]
    NonFiniteSample { index: usize },

    #[error("path tangent angle {max_tangent_angle} violates the delta-function bound π/4")]
    PathInvalid { max_tangent_angle: f64 },

    #[error("sign(Re a) is undefined for Re a = 0")]
    SignUndefined,

    #[error("closed form invalid for n = {n}: requires n < 1/ε = {limit}")]
    ValidityExceeded { n: usize, limit: f64 },

    #[error("finite-ε convergence condition violated: {0}")]
    ConvergenceViolated(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("overlap ⟨B|_Q A⟩ vanishes (|overlap| = {magnitude:e})")]
    VanishingOverlap { magnitude: f64 },

    #[error("state is not Q-normalized: norm = {norm}")]
    NotNormalized { norm: f64 },

    #[error("time {t} outside the window [{t_a}, {t_b}]")]
    TimeOutOfWindow { t: f64, t_a: f64, t_b: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),
}
