//! Scalar abstraction: the same series/product algorithms run in double
//! precision (`Cx` = `Complex<f64>`) and in double-double precision
//! (`CxX` = `Complex<TwoFloat>`, ~31 significant digits). The extended mode
//! backs the precision-escalation oracles and the CLI `--precision extended`
//! flag.

use num_complex::Complex;
use num_traits::Float;
use twofloat::TwoFloat;

/// Real scalar the kernels are generic over.
pub trait Real: Float + std::fmt::Debug + Send + Sync + 'static {
    fn from_f64_real(x: f64) -> Self;
    fn to_f64_real(self) -> f64;
}

impl Real for f64 {
    #[inline]
    fn from_f64_real(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64_real(self) -> f64 {
        self
    }
}

impl Real for TwoFloat {
    #[inline]
    fn from_f64_real(x: f64) -> Self {
        TwoFloat::from(x)
    }
    #[inline]
    fn to_f64_real(self) -> f64 {
        self.hi()
    }
}

/// Double-precision complex scalar, the workhorse type.
pub type Cx = Complex<f64>;
/// Double-double complex scalar for precision escalation.
pub type CxX = Complex<TwoFloat>;

/// Convert a double-precision complex into any supported scalar.
#[inline]
pub fn cx_from<T: Real>(z: Cx) -> Complex<T> {
    Complex::new(T::from_f64_real(z.re), T::from_f64_real(z.im))
}

/// Round a supported scalar down to double precision.
#[inline]
pub fn cx_to_f64<T: Real>(z: Complex<T>) -> Cx {
    Cx::new(z.re.to_f64_real(), z.im.to_f64_real())
}

/// `|z|` as f64, usable on any supported scalar.
#[inline]
pub fn abs_f64<T: Real>(z: Complex<T>) -> f64 {
    cx_to_f64(z).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twofloat_roundtrip_and_transcendentals() {
        let z = cx_from::<TwoFloat>(Cx::new(0.35, 0.05));
        let w = z.exp().ln();
        let back = cx_to_f64(w);
        assert!((back - Cx::new(0.35, 0.05)).norm() < 1e-15);
    }
}
