//! Error type shared by all modules.

use thiserror::Error;

#[derive(Error, Debug, Clone)]
pub enum EqgError {
    /// An infinite product was asked to converge with a modulus of absolute
    /// value >= 1, or a series tail failed to shrink below tolerance.
    #[error("non-convergent: {0}")]
    NonConvergent(String),

    /// Argument outside the domain of the function (e.g. `Theta_p(0)`).
    #[error("domain error: {0}")]
    DomainError(String),

    /// A product factor grew large enough to destroy all precision.
    #[error("overflow risk in product evaluation: |factor| = {magnitude:.3e}")]
    Overflow { magnitude: f64 },

    /// A denominator came within `dist` of zero; the caller should resample.
    #[error("pole proximity in {what}: |value| = {dist:.3e}")]
    PoleProximity { what: String, dist: f64 },

    /// The fusion subspace lost rank (descent vector collapsed or the
    /// invariance residual exceeded tolerance).
    #[error("fusion degenerate: {0}")]
    FusionDegenerate(String),

    /// Operator composition over incompatible modules.
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    /// Generator outside the evaluation representation's table.
    #[error("bad generator: {0}")]
    BadGenerator(String),

    /// Mode index 0 passed where a nonzero mode is required.
    #[error("zero mode index not allowed")]
    ZeroMode,

    /// A series comparison point left the common convergence annulus.
    #[error("annulus violation: {0}")]
    AnnulusViolation(String),

    /// Configuration errors surfaced by the harness.
    #[error("config error: {0}")]
    Config(String),
}
