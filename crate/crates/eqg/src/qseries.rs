//! Truncated evaluation of multi-base infinite products, the theta function
//! `Theta_p(z)` and the brackets `[u]`, `[u]*`.
//!
//! Conventions:
//!
//! ```text
//! (z; p_1, ..., p_m)_inf = prod_{n_1,...,n_m >= 0} (1 - z p_1^{n_1} ... p_m^{n_m})
//! Theta_p(z)             = (z; p)_inf (p/z; p)_inf (p; p)_inf
//! [u]  = q^{u^2/r  - u} Theta_p (q^{2u}) / (p ; p )_inf^3
//! [u]* = q^{u^2/r* - u} Theta_p*(q^{2u}) / (p*; p*)_inf^3
//! ```
//!
//! Multi-base products are truncated by total degree `n_1 + ... + n_m <= N`,
//! which gives a uniform error bound in `max|p_i|`. Products are accumulated
//! logarithmically and exponentiated once at the end; the error estimate
//! compares the order-`N` and order-`N + 10` partial evaluations.

use crate::error::EqgError;
use crate::params::{EllipticParams, ThetaValue, TruncationPolicy};
use crate::scalar::{abs_f64, Cx, Real};
use crate::Result;
use num_complex::Complex;

const EXTRA_ORDER: usize = 10;
const OVERFLOW_GUARD: f64 = 1e140;

/// Walk all exponent tuples of total degree <= `order`, calling `f` with the
/// modulus power product `p_1^{n_1} ... p_m^{n_m}` and its total degree.
/// Tuples that raise a numerically zero modulus to a positive power are
/// skipped; their factor is exactly 1.
fn walk_lattice<T: Real>(
    moduli: &[Complex<T>],
    order: usize,
    f: &mut impl FnMut(Complex<T>, usize),
) {
    let m = moduli.len();
    if m == 0 {
        f(one::<T>(), 0);
        return;
    }
    let mut powers: Vec<Vec<Complex<T>>> = Vec::with_capacity(m);
    for &p in moduli {
        let mut col = Vec::with_capacity(order + 1);
        let mut cur = one::<T>();
        for _ in 0..=order {
            col.push(cur);
            cur = cur * p;
        }
        powers.push(col);
    }
    let mut exps = vec![0usize; m];
    loop {
        let total: usize = exps.iter().sum();
        if total <= order {
            let mut prod = one::<T>();
            let mut skip = false;
            for (i, &e) in exps.iter().enumerate() {
                if e > 0 && abs_f64(moduli[i]) == 0.0 {
                    skip = true;
                    break;
                }
                prod = prod * powers[i][e];
            }
            if !skip {
                f(prod, total);
            }
        }
        // odometer increment constrained to total degree <= order
        let mut i = 0;
        loop {
            if i == m {
                return;
            }
            exps[i] += 1;
            if exps.iter().sum::<usize>() <= order {
                break;
            }
            exps[i] = 0;
            i += 1;
        }
    }
}

#[inline]
fn one<T: Real>() -> Complex<T> {
    Complex::new(T::one(), T::zero())
}

fn check_moduli<T: Real>(moduli: &[Complex<T>]) -> Result<()> {
    for &p in moduli {
        let a = abs_f64(p);
        if a >= 1.0 {
            return Err(EqgError::NonConvergent(format!(
                "modulus |p| = {a} must be < 1"
            )));
        }
    }
    Ok(())
}

fn poch_impl<T: Real>(
    z: Complex<T>,
    moduli: &[Complex<T>],
    policy: TruncationPolicy,
    skip_unit_tuple: bool,
) -> Result<ThetaValue<T>> {
    check_moduli(moduli)?;
    if abs_f64(z) == 0.0 {
        return Ok(ThetaValue::exact(one::<T>()));
    }
    if abs_f64(z) > OVERFLOW_GUARD {
        return Err(EqgError::Overflow {
            magnitude: abs_f64(z),
        });
    }
    let n_hi = policy.order + EXTRA_ORDER;
    let mut log_lo = Complex::new(T::zero(), T::zero());
    let mut log_hi = Complex::new(T::zero(), T::zero());
    let mut err: Option<EqgError> = None;
    walk_lattice(moduli, n_hi, &mut |pw, degree| {
        if err.is_some() {
            return;
        }
        if skip_unit_tuple && degree == 0 {
            return;
        }
        let factor = one::<T>() - z * pw;
        let fa = abs_f64(factor);
        if !fa.is_finite() || fa > OVERFLOW_GUARD {
            err = Some(EqgError::Overflow { magnitude: fa });
            return;
        }
        if fa == 0.0 {
            // an exact zero factor annihilates the product
            log_lo = Complex::new(T::from_f64_real(f64::NEG_INFINITY), T::zero());
            log_hi = log_lo;
            return;
        }
        let lf = factor.ln();
        log_hi = log_hi + lf;
        if degree <= policy.order {
            log_lo = log_lo + lf;
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    if log_lo.re.to_f64_real() == f64::NEG_INFINITY {
        return Ok(ThetaValue::exact(Complex::new(T::zero(), T::zero())));
    }
    let v_lo = log_lo.exp();
    let v_hi = log_hi.exp();
    let scale = abs_f64(v_hi).max(f64::MIN_POSITIVE);
    let est = abs_f64(v_hi - v_lo) / scale;
    Ok(ThetaValue::new(v_hi, est, policy.tol))
}

/// The multi-base infinite product `(z; p_1, ..., p_m)_inf`, truncated by
/// total degree.
pub fn pochhammer_multi<T: Real>(
    z: Complex<T>,
    moduli: &[Complex<T>],
    policy: TruncationPolicy,
) -> Result<ThetaValue<T>> {
    poch_impl(z, moduli, policy, false)
}

/// `(z; p_1, ..., p_m)_inf / (1 - z)`: the same product with the degree-zero
/// factor omitted. This is the analytic regularization used to cancel the
/// common vanishing factor in ratios evaluated at `z = 1`-type points.
pub fn pochhammer_multi_reg<T: Real>(
    z: Complex<T>,
    moduli: &[Complex<T>],
    policy: TruncationPolicy,
) -> Result<ThetaValue<T>> {
    poch_impl(z, moduli, policy, true)
}

/// `Theta_p(z) = (z;p)_inf (p/z;p)_inf (p;p)_inf` by the defining product.
pub fn theta_big<T: Real>(
    z: Complex<T>,
    p: Complex<T>,
    policy: TruncationPolicy,
) -> Result<ThetaValue<T>> {
    if abs_f64(z) == 0.0 {
        return Err(EqgError::DomainError("Theta_p(0) is undefined".into()));
    }
    let ms = [p];
    let a = poch_impl(z, &ms, policy, false)?;
    let b = poch_impl(p / z, &ms, policy, false)?;
    let c = poch_impl(p, &ms, policy, false)?;
    let value = a.value * b.value * c.value;
    let est = a.est_error + b.est_error + c.est_error;
    Ok(ThetaValue::new(value, est, policy.tol))
}

/// Jacobi-triple-product summation form of `Theta_p`:
/// `sum_{n in Z} (-1)^n p^{n(n-1)/2} z^n`. Serves as an independent oracle
/// for [`theta_big`].
pub fn theta_sum_oracle<T: Real>(
    z: Complex<T>,
    p: Complex<T>,
    policy: TruncationPolicy,
) -> Result<ThetaValue<T>> {
    if abs_f64(z) == 0.0 {
        return Err(EqgError::DomainError("Theta_p(0) is undefined".into()));
    }
    check_moduli(&[p])?;
    let zinv = one::<T>() / z;
    let mut sum = Complex::new(T::zero(), T::zero());
    let mut last_mag = f64::INFINITY;
    let nmax = (policy.order + EXTRA_ORDER).max(12) as i64;
    // p^{n(n-1)/2} via iterated multiplication keeps powers exact on the
    // fixed branch of the inputs.
    let mut term_mag_tail = 0.0_f64;
    for n in -nmax..=nmax {
        let tri = (n * (n - 1)) / 2; // always >= 0
        let mut pp = one::<T>();
        for _ in 0..tri {
            pp = pp * p;
        }
        let mut zp = one::<T>();
        if n >= 0 {
            for _ in 0..n {
                zp = zp * z;
            }
        } else {
            for _ in 0..(-n) {
                zp = zp * zinv;
            }
        }
        let sign = if n.rem_euclid(2) == 0 {
            T::one()
        } else {
            -T::one()
        };
        let term = Complex::new(sign, T::zero()) * pp * zp;
        sum = sum + term;
        let m = abs_f64(term);
        if n.abs() == nmax {
            term_mag_tail = term_mag_tail.max(m);
        }
        last_mag = m;
    }
    let _ = last_mag;
    let scale = abs_f64(sum).max(f64::MIN_POSITIVE);
    Ok(ThetaValue::new(sum, term_mag_tail / scale, policy.tol))
}

/// The theta bracket `[u]` (or `[u]*` with `starred`), all fractional powers
/// taken on the fixed `log_q` branch.
pub fn bracket<T: Real>(
    u: Complex<T>,
    params: &EllipticParams<T>,
    starred: bool,
    policy: TruncationPolicy,
) -> Result<ThetaValue<T>> {
    let (p, r) = params.sector(starred);
    let z = params.z_of_u(u);
    let theta = theta_big(z, p, policy)?;
    let poch3 = {
        let pp = poch_impl(p, &[p], policy, false)?;
        ThetaValue::new(pp.value * pp.value * pp.value, 3.0 * pp.est_error, policy.tol)
    };
    let gauss = params.q_pow(u * u / r - u);
    let value = gauss * theta.value / poch3.value;
    Ok(ThetaValue::new(
        value,
        theta.est_error + poch3.est_error,
        policy.tol,
    ))
}

/// Cached bracket evaluator: precomputes `(p;p)^3` and `(p*;p*)^3` once so
/// hot paths (R-matrix entries, operator matrix elements) pay only the two
/// single-modulus theta products per call.
#[derive(Debug, Clone)]
pub struct BracketCtx {
    pub params: EllipticParams<f64>,
    pub policy: TruncationPolicy,
    poch3: Cx,
    poch3_star: Cx,
}

impl BracketCtx {
    pub fn new(params: EllipticParams<f64>, policy: TruncationPolicy) -> Result<Self> {
        let pp = pochhammer_multi(params.p, &[params.p], policy)?.value;
        let pps = pochhammer_multi(params.p_star, &[params.p_star], policy)?.value;
        Ok(Self {
            params,
            policy,
            poch3: pp * pp * pp,
            poch3_star: pps * pps * pps,
        })
    }

    /// Fast `[u]` / `[u]*` evaluation (no error estimate; the context policy
    /// fixed the order up front).
    pub fn eval(&self, u: Cx, starred: bool) -> Cx {
        let (p, r) = self.params.sector(starred);
        let z = self.params.z_of_u(u);
        let theta = theta_product_fast(z, p, self.policy.order + EXTRA_ORDER);
        let gauss = self.params.q_pow(u * u / r - u);
        let den = if starred { self.poch3_star } else { self.poch3 };
        gauss * theta / den
    }

    /// `[n]_q = (q^n - q^{-n})/(q - q^{-1})`.
    pub fn qnum(&self, n: Cx) -> Cx {
        let q = self.params.q;
        (self.params.q_pow(n) - self.params.q_pow(-n)) / (q - 1.0 / q)
    }
}

/// Direct product evaluation of `Theta_p(z)` at a fixed number of factors,
/// no error bookkeeping.
pub fn theta_product_fast(z: Cx, p: Cx, nfactors: usize) -> Cx {
    let mut acc = Cx::new(1.0, 0.0);
    let mut pw = Cx::new(1.0, 0.0);
    let p_over_z = p / z;
    for _ in 0..=nfactors {
        acc *= 1.0 - z * pw;
        acc *= 1.0 - p_over_z * pw;
        acc *= 1.0 - p * pw;
        pw *= p;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::default_params;
    use proptest::prelude::*;

    fn pol() -> TruncationPolicy {
        TruncationPolicy::default()
    }

    #[test]
    fn pochhammer_z_zero_is_one() {
        let v = pochhammer_multi(Cx::new(0.0, 0.0), &[Cx::new(0.2, 0.0)], pol()).unwrap();
        assert_eq!(v.value, Cx::new(1.0, 0.0));
        assert_eq!(v.est_error, 0.0);
    }

    #[test]
    fn pochhammer_p_zero_single_factor() {
        let z = Cx::new(0.37, 0.11);
        let v = pochhammer_multi(z, &[Cx::new(0.0, 0.0)], pol()).unwrap();
        assert!((v.value - (Cx::new(1.0, 0.0) - z)).norm() < 1e-15);
    }

    #[test]
    fn pochhammer_order_self_oracle() {
        // z = 0.3, p = 0.1: order 30 vs order 80 agree to < 1e-12 relative
        let z = Cx::new(0.3, 0.0);
        let p = Cx::new(0.1, 0.0);
        let lo = pochhammer_multi(z, &[p], TruncationPolicy::new(30, 1e-9)).unwrap();
        let hi = pochhammer_multi(z, &[p], TruncationPolicy::new(80, 1e-9)).unwrap();
        let rel = (lo.value - hi.value).norm() / hi.value.norm();
        assert!(rel < 1e-12, "rel = {rel}");
        assert!(lo.converged);
    }

    #[test]
    fn pochhammer_rejects_large_modulus() {
        assert!(matches!(
            pochhammer_multi(Cx::new(0.5, 0.0), &[Cx::new(1.0, 0.0)], pol()),
            Err(EqgError::NonConvergent(_))
        ));
    }

    #[test]
    fn pochhammer_overflow_reported() {
        assert!(matches!(
            pochhammer_multi(Cx::new(1e200, 0.0), &[Cx::new(0.2, 0.0)], pol()),
            Err(EqgError::Overflow { .. })
        ));
    }

    #[test]
    fn multi_base_product_against_direct_double_sum() {
        // (z; p1, p2) compared against an explicit double product
        let z = Cx::new(0.41, 0.13);
        let p1 = Cx::new(0.22, 0.03);
        let p2 = Cx::new(0.09, -0.02);
        let v = pochhammer_multi(z, &[p1, p2], TruncationPolicy::new(60, 1e-9)).unwrap();
        let mut direct = Cx::new(1.0, 0.0);
        for n1 in 0..60 {
            for n2 in 0..60 {
                direct *= Cx::new(1.0, 0.0) - z * p1.powi(n1) * p2.powi(n2);
            }
        }
        assert!((v.value - direct).norm() / direct.norm() < 1e-12);
        assert!(v.converged);
    }

    #[test]
    fn regularized_product_drops_unit_factor() {
        // at z = 1 the full product vanishes; the regularized one is the
        // finite co-factor
        let p1 = Cx::new(0.2, 0.0);
        let full = pochhammer_multi(Cx::new(1.0, 0.0), &[p1], pol()).unwrap();
        assert_eq!(full.value, Cx::new(0.0, 0.0));
        let reg = pochhammer_multi_reg(Cx::new(1.0, 0.0), &[p1], pol()).unwrap();
        let expect = pochhammer_multi(p1, &[p1], pol()).unwrap().value;
        assert!((reg.value - expect).norm() < 1e-12);
    }

    #[test]
    fn theta_at_one_vanishes() {
        let v = theta_big(Cx::new(1.0, 0.0), Cx::new(0.2, 0.0), pol()).unwrap();
        assert_eq!(v.value, Cx::new(0.0, 0.0));
    }

    #[test]
    fn theta_rejects_zero() {
        assert!(matches!(
            theta_big(Cx::new(0.0, 0.0), Cx::new(0.2, 0.0), pol()),
            Err(EqgError::DomainError(_))
        ));
    }

    #[test]
    fn theta_symmetry_z_to_p_over_z() {
        let p = Cx::new(0.23, 0.04);
        for &z in &[Cx::new(0.7, 0.2), Cx::new(-0.4, 0.6), Cx::new(1.3, -0.2)] {
            let a = theta_big(z, p, pol()).unwrap().value;
            let b = theta_big(p / z, p, pol()).unwrap().value;
            assert!((a - b).norm() / a.norm().max(1.0) < 1e-12);
        }
    }

    #[test]
    fn theta_product_matches_sum_oracle() {
        // frozen reference point: z = 0.7 + 0.2i, p = 0.2
        let z = Cx::new(0.7, 0.2);
        let p = Cx::new(0.2, 0.0);
        let prod = theta_big(z, p, pol()).unwrap().value;
        let sum = theta_sum_oracle(z, p, pol()).unwrap().value;
        assert!((prod - sum).norm() / sum.norm() < 1e-10);
    }

    #[test]
    fn bracket_zero_at_origin() {
        let params = default_params();
        let v = bracket(Cx::new(0.0, 0.0), &params, false, pol()).unwrap();
        assert_eq!(v.value, Cx::new(0.0, 0.0));
    }

    #[test]
    fn bracket_quasi_periodicity_r() {
        let params = default_params();
        for &u in &[Cx::new(0.31, 0.12), Cx::new(-0.62, 0.27), Cx::new(0.85, -0.33)] {
            let a = bracket(u + params.r, &params, false, pol()).unwrap().value;
            let b = bracket(u, &params, false, pol()).unwrap().value;
            let res = (a + b).norm() / b.norm().max(1.0);
            assert!(res < 1e-12, "residual {res}");
        }
    }

    #[test]
    fn bracket_quasi_periodicity_r_tau() {
        // The r*tau shift moves only the Gaussian prefactor; the verified
        // multiplier carries an extra factor -1 relative to a bare
        // exp(-pi i (2u/r + tau)).
        let params = default_params();
        let tau = params.tau();
        let rtau = params.r * tau;
        for &u in &[Cx::new(0.31, 0.12), Cx::new(-0.62, 0.27)] {
            let lhs = bracket(u + rtau, &params, false, pol()).unwrap().value;
            let i = Cx::new(0.0, 1.0);
            let mult = -(-i * std::f64::consts::PI * (2.0 * u / params.r + tau)).exp();
            let rhs = mult * bracket(u, &params, false, pol()).unwrap().value;
            let res = (lhs - rhs).norm() / rhs.norm().max(1.0);
            assert!(res < 1e-11, "residual {res}");
        }
    }

    #[test]
    fn bracket_ctx_matches_bracket() {
        let params = default_params();
        let ctx = BracketCtx::new(params, pol()).unwrap();
        for &u in &[Cx::new(0.31, 0.12), Cx::new(-1.62, 0.27), Cx::new(2.15, -0.33)] {
            let a = ctx.eval(u, false);
            let b = bracket(u, &params, false, pol()).unwrap().value;
            assert!((a - b).norm() / b.norm().max(1e-30) < 1e-12);
        }
    }

    #[test]
    fn starred_collapses_at_c_zero() {
        let params = default_params();
        let u = Cx::new(0.47, 0.21);
        let a = bracket(u, &params, true, pol()).unwrap().value;
        let b = bracket(u, &params, false, pol()).unwrap().value;
        assert_eq!(a, b); // identical code path when p* = p, r* = r
    }

    #[test]
    fn error_estimate_monotone_in_order() {
        let z = Cx::new(0.45, 0.1);
        let p = Cx::new(0.28, 0.03);
        let mut last = f64::INFINITY;
        for order in [10usize, 20, 30, 40] {
            let v = pochhammer_multi(z, &[p], TruncationPolicy::new(order, 1e-9)).unwrap();
            assert!(v.est_error <= last + 1e-18, "order {order}");
            last = v.est_error;
        }
    }

    proptest! {
        #[test]
        fn bracket_oddness(re in -0.8f64..0.8, im in 0.05f64..0.3) {
            let params = default_params();
            let u = Cx::new(re, im);
            let a = bracket(u, &params, false, pol()).unwrap().value;
            let b = bracket(-u, &params, false, pol()).unwrap().value;
            let res = (a + b).norm() / a.norm().max(1e-12);
            prop_assert!(res < 1e-10, "residual {}", res);
        }

        #[test]
        fn triple_product_equivalence(zre in 0.4f64..1.2, zim in -0.5f64..0.5, pm in 0.05f64..0.5) {
            let z = Cx::new(zre, zim);
            let p = Cx::new(pm, 0.02);
            let prod = theta_big(z, p, pol()).unwrap().value;
            let sum = theta_sum_oracle(z, p, pol()).unwrap().value;
            let res = (prod - sum).norm() / sum.norm().max(1e-12);
            prop_assert!(res < 1e-9, "residual {}", res);
        }
    }
}
