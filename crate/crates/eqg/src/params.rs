//! The parameter pack every function consumes, plus truncation policy and
//! the `ThetaValue` result carrying an error estimate.

use crate::error::EqgError;
use crate::scalar::{abs_f64, cx_from, Cx, Real};
use crate::Result;
use num_complex::Complex;

/// Parameters of the elliptic algebra: deformation parameter `q`, elliptic
/// level parameter `r` and the central value `c` (the level, written `k` for
/// infinite-dimensional modules), with the derived quantities
/// `p = q^{2r}`, `r* = r - c`, `p* = q^{2r*}`.
///
/// All fractional powers of `q` are taken with the fixed principal branch
/// `log_q`, which makes every `z^a`-type factor single-valued.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticParams<T: Real = f64> {
    pub q: Complex<T>,
    pub r: Complex<T>,
    pub c: Complex<T>,
    pub p: Complex<T>,
    pub r_star: Complex<T>,
    pub p_star: Complex<T>,
    pub log_q: Complex<T>,
}

impl<T: Real> EllipticParams<T> {
    /// Build and validate the parameter pack. Rejects `q = 0`, `|q| >= 1`,
    /// `|p| >= 1` and `|p*| >= 1`.
    pub fn new(q: Complex<T>, r: Complex<T>, c: Complex<T>) -> Result<Self> {
        let qn = abs_f64(q);
        if qn == 0.0 {
            return Err(EqgError::DomainError("q must be nonzero".into()));
        }
        if qn >= 1.0 {
            return Err(EqgError::DomainError(format!("|q| = {qn} must be < 1")));
        }
        let log_q = q.ln();
        let two = Complex::new(T::from_f64_real(2.0), T::zero());
        let r_star = r - c;
        let p = (two * r * log_q).exp();
        let p_star = (two * r_star * log_q).exp();
        if abs_f64(p) >= 1.0 {
            return Err(EqgError::NonConvergent(format!(
                "|p| = {} must be < 1",
                abs_f64(p)
            )));
        }
        if abs_f64(p_star) >= 1.0 {
            return Err(EqgError::NonConvergent(format!(
                "|p*| = {} must be < 1",
                abs_f64(p_star)
            )));
        }
        Ok(Self {
            q,
            r,
            c,
            p,
            r_star,
            p_star,
            log_q,
        })
    }

    /// `q^e` on the fixed branch.
    #[inline]
    pub fn q_pow(&self, e: Complex<T>) -> Complex<T> {
        (e * self.log_q).exp()
    }

    /// `q^{2u}`, the standard multiplicative variable.
    #[inline]
    pub fn z_of_u(&self, u: Complex<T>) -> Complex<T> {
        let two = Complex::new(T::from_f64_real(2.0), T::zero());
        (two * u * self.log_q).exp()
    }

    /// Modulus and level parameter for the starred or unstarred bracket.
    #[inline]
    pub fn sector(&self, starred: bool) -> (Complex<T>, Complex<T>) {
        if starred {
            (self.p_star, self.r_star)
        } else {
            (self.p, self.r)
        }
    }

    /// The `tau` with `p = e^{-2 pi i / tau}` on the principal branch,
    /// i.e. `tau = -pi i / (r log q)`.
    pub fn tau(&self) -> Complex<T> {
        let pi = Complex::new(T::zero(), T::from_f64_real(-std::f64::consts::PI));
        pi / (self.r * self.log_q)
    }
}

impl EllipticParams<f64> {
    /// Lift the parameter pack to double-double precision.
    pub fn to_extended(&self) -> Result<EllipticParams<twofloat::TwoFloat>> {
        EllipticParams::new(cx_from(self.q), cx_from(self.r), cx_from(self.c))
    }
}

/// Truncation order and target relative tolerance for series evaluation.
///
/// `order` bounds the total degree `n_1 + ... + n_m` of retained modulus
/// powers; the error estimate compares the order-`order` value against the
/// order-`order + 10` value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub order: usize,
    pub tol: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            order: 40,
            tol: 1e-9,
        }
    }
}

impl TruncationPolicy {
    pub fn new(order: usize, tol: f64) -> Self {
        Self { order, tol }
    }

    /// Same tolerance, higher order; used by self-oracles.
    pub fn escalate(&self, extra: usize) -> Self {
        Self {
            order: self.order + extra,
            tol: self.tol,
        }
    }
}

/// A truncated evaluation: the value, whether the truncation-error estimate
/// met the policy tolerance, and the estimate itself.
#[derive(Debug, Clone, Copy)]
pub struct ThetaValue<T: Real = f64> {
    pub value: Complex<T>,
    pub converged: bool,
    pub est_error: f64,
}

impl<T: Real> ThetaValue<T> {
    pub fn new(value: Complex<T>, est_error: f64, tol: f64) -> Self {
        Self {
            value,
            converged: est_error.is_finite() && est_error <= tol,
            est_error,
        }
    }

    /// Exact value (error exactly zero), e.g. for empty products.
    pub fn exact(value: Complex<T>) -> Self {
        Self {
            value,
            converged: true,
            est_error: 0.0,
        }
    }

    pub fn to_f64(&self) -> ThetaValue<f64> {
        ThetaValue {
            value: crate::scalar::cx_to_f64(self.value),
            converged: self.converged,
            est_error: self.est_error,
        }
    }
}

/// Default verification parameter pack: a generic complex point with
/// `|p| <= 0.3`.
pub fn default_params() -> EllipticParams<f64> {
    EllipticParams::new(Cx::new(0.35, 0.05), Cx::new(1.2, 0.1), Cx::new(0.0, 0.0))
        .expect("default parameters are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_quantities() {
        let p = default_params();
        assert!((p.p - p.q_pow(Cx::new(2.0, 0.0) * p.r)).norm() < 1e-15);
        assert!(p.p.norm() < 0.3);
        // c = 0 collapses the starred sector exactly
        assert_eq!(p.r_star, p.r);
        assert_eq!(p.p_star, p.p);
    }

    #[test]
    fn rejects_bad_moduli() {
        assert!(EllipticParams::<f64>::new(Cx::new(0.0, 0.0), Cx::new(1.0, 0.0), Cx::new(0.0, 0.0)).is_err());
        assert!(EllipticParams::<f64>::new(Cx::new(1.2, 0.0), Cx::new(1.0, 0.0), Cx::new(0.0, 0.0)).is_err());
        // r < 0 makes |p| > 1
        assert!(EllipticParams::<f64>::new(Cx::new(0.35, 0.0), Cx::new(-1.0, 0.0), Cx::new(0.0, 0.0)).is_err());
        // c large makes |p*| > 1
        assert!(EllipticParams::<f64>::new(Cx::new(0.35, 0.0), Cx::new(1.0, 0.0), Cx::new(3.0, 0.0)).is_err());
    }

    #[test]
    fn tau_matches_p() {
        let p = default_params();
        let tau = p.tau();
        // p = e^{-2 pi i / tau}
        let lhs = (Cx::new(0.0, -2.0 * std::f64::consts::PI) / tau).exp();
        assert!((lhs - p.p).norm() < 1e-13);
    }
}
