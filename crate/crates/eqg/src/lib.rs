//! Numerical toolkit for the elliptic quantum group U_{q,p}(sl2^) at desk scale.
//!
//! The crate is organized around the objects the algebra is built from:
//!
//! - [`qseries`]: truncated multi-base infinite products, the theta function
//!   `Theta_p(z)` and the brackets `[u]`, `[u]*` with truncation control;
//! - [`rmatrix`]: the elliptic dynamical R-matrix `R+(u,s)`, its scalar
//!   factors `rho+`, the constant `kappa`, fused matrices `R+_{1l}` and
//!   dynamical Yang-Baxter residuals;
//! - [`dynrep`]: bigraded dynamical operators over weight modules with
//!   shift-aware composition, moment maps and the twisted tensor product;
//! - [`evalrep`]: the evaluation representation: Drinfeld generator images,
//!   half currents by delta localization, the L-operator built two ways, and
//!   RLL residuals;
//! - [`algebroid`]: coproduct, counit and antipode on L-operator entries,
//!   verified on evaluation modules, plus the intertwining-equation
//!   consistency harness;
//! - [`freefield`]: boson mode algebra, vertex-operator contraction kernels
//!   and exchange-relation checks as truncated series identities;
//! - [`suites`]: the randomized verification suites consumed by the CLI and
//!   the acceptance tests.
//!
//! All numerical routines are pure functions of their arguments; values are
//! immutable and safe to share across threads.

pub mod algebroid;
pub mod dynrep;
pub mod error;
pub mod evalrep;
pub mod expr;
pub mod freefield;
pub mod laurent;
pub mod params;
pub mod qseries;
pub mod report;
pub mod rmatrix;
pub mod sampling;
pub mod scalar;
pub mod suites;

pub use error::EqgError;
pub use report::{CheckRecord, Report, RunConfig};
pub use params::{EllipticParams, ThetaValue, TruncationPolicy};
pub use scalar::{Cx, CxX, Real};

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, EqgError>;
