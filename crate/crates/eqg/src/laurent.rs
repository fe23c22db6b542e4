//! Normal form for two-sided product expressions in a single multiplicative
//! variable: `const . zeta^nu . prod (1 - t zeta^{+-1} sigma-lattice)^mult`.
//!
//! Exchange-relation checks compare two such sides. Comparison happens in a
//! common annulus around `|zeta| = 1`: every elementary factor with modulus
//! `>= 1` is peeled exactly via `(1 - T zeta^e) = (-T zeta^e)(1 - T^{-1} zeta^{-e})`,
//! after which both sides are `const . zeta^nu . exp(sum_{n != 0} g_n zeta^n)`
//! with absolutely convergent coefficients; equality of the analytic
//! continuations is equality of `nu`, the constants and the coefficients.

use crate::error::EqgError;
use crate::scalar::Cx;
use crate::Result;
use std::collections::BTreeMap;

const LATTICE_CUTOFF: f64 = 1e-18;
const PEEL_GUARD: f64 = 1e-4;

/// One pochhammer-type factor `(t zeta^e; sigma_1, ..., sigma_m)^mult`.
#[derive(Debug, Clone)]
pub struct Factor {
    pub t: Cx,
    /// exponent of zeta inside the factor, +1 or -1
    pub e: i64,
    pub moduli: Vec<Cx>,
    pub mult: i64,
}

/// A product side in normal-form-ready shape.
#[derive(Debug, Clone)]
pub struct FactorSide {
    pub const_: Cx,
    pub nu: Cx,
    pub factors: Vec<Factor>,
}

/// Peeled, truncated normal form.
#[derive(Debug, Clone)]
pub struct NormalSide {
    pub const_: Cx,
    pub nu: Cx,
    /// log-series coefficients `g_n`, `|n| <= order`, `n != 0`
    pub log_coeffs: BTreeMap<i64, Cx>,
}

impl FactorSide {
    pub fn one() -> Self {
        Self {
            const_: Cx::new(1.0, 0.0),
            nu: Cx::new(0.0, 0.0),
            factors: Vec::new(),
        }
    }

    pub fn mul_const(&mut self, c: Cx) {
        self.const_ *= c;
    }

    pub fn mul_zeta_pow(&mut self, nu: Cx) {
        self.nu += nu;
    }

    pub fn push(&mut self, t: Cx, e: i64, moduli: &[Cx], mult: i64) {
        if mult != 0 {
            self.factors.push(Factor {
                t,
                e,
                moduli: moduli.to_vec(),
                mult,
            });
        }
    }

    /// Multiply by another side.
    pub fn mul(&mut self, other: &FactorSide) {
        self.const_ *= other.const_;
        self.nu += other.nu;
        self.factors.extend(other.factors.iter().cloned());
    }

    /// Multiply by the inverse of another side.
    pub fn div(&mut self, other: &FactorSide) {
        self.const_ /= other.const_;
        self.nu -= other.nu;
        for f in &other.factors {
            let mut g = f.clone();
            g.mult = -g.mult;
            self.factors.push(g);
        }
    }

    /// Enumerate the elementary lattice points `T = t sigma_1^{j_1} ...` with
    /// `|T| >= cutoff`, by total degree.
    fn lattice_points(f: &Factor) -> Result<Vec<Cx>> {
        for s in &f.moduli {
            if s.norm() >= 1.0 {
                return Err(EqgError::NonConvergent(format!(
                    "lattice modulus |sigma| = {} must be < 1",
                    s.norm()
                )));
            }
        }
        let mut out = Vec::new();
        let m = f.moduli.len();
        let mut exps = vec![0usize; m];
        // total-degree bound from the largest modulus
        let max_sigma = f
            .moduli
            .iter()
            .map(|s| s.norm())
            .fold(0.0f64, f64::max)
            .min(0.999);
        let dmax = if m == 0 || f.t.norm() < LATTICE_CUTOFF {
            0
        } else {
            ((LATTICE_CUTOFF / f.t.norm().max(LATTICE_CUTOFF)).ln() / max_sigma.max(1e-12).ln())
                .ceil()
                .max(1.0) as usize
                + 2
        };
        if m == 0 {
            return Ok(vec![f.t]);
        }
        loop {
            let mut tt = f.t;
            for (i, &e) in exps.iter().enumerate() {
                for _ in 0..e {
                    tt *= f.moduli[i];
                }
            }
            if tt.norm() >= LATTICE_CUTOFF {
                out.push(tt);
            }
            let mut i = 0;
            loop {
                if i == m {
                    return Ok(out);
                }
                exps[i] += 1;
                if exps.iter().sum::<usize>() <= dmax {
                    break;
                }
                exps[i] = 0;
                i += 1;
            }
        }
    }

    /// Peel and expand into the normal form, truncating the log series at
    /// `order`. Elementary factors sitting on the unit circle (typically
    /// `(1 - zeta^{+-1})` pairs from theta braces) are cancelled exactly;
    /// uncancelled boundary factors raise [`EqgError::AnnulusViolation`].
    pub fn normalize(&self, order: usize) -> Result<NormalSide> {
        let mut const_ = self.const_;
        let mut nu = self.nu;
        let mut log: BTreeMap<i64, Cx> = BTreeMap::new();
        // unit-circle factors, all converted to e = -1 form
        let mut boundary: Vec<(Cx, i64)> = Vec::new();
        for f in &self.factors {
            for tt in Self::lattice_points(f)? {
                let a = tt.norm();
                if (a - 1.0).abs() < PEEL_GUARD {
                    // convert (1 - T zeta)^m = (-T)^m zeta^m (1 - T^{-1} zeta^{-1})^m
                    let (t_m, m) = if f.e == 1 {
                        const_ *= (-tt).powi(f.mult as i32);
                        nu += Cx::new(f.mult as f64, 0.0);
                        (1.0 / tt, f.mult)
                    } else {
                        (tt, f.mult)
                    };
                    if let Some(entry) = boundary.iter_mut().find(|(t0, _)| (*t0 - t_m).norm() < 1e-9) {
                        entry.1 += m;
                    } else {
                        boundary.push((t_m, m));
                    }
                    continue;
                }
                let (t_eff, e_eff) = if a > 1.0 {
                    // (1 - T zeta^e) = (-T zeta^e)(1 - T^{-1} zeta^{-e})
                    let neg_t_pow = (-tt).powi(f.mult as i32);
                    const_ *= neg_t_pow;
                    nu += Cx::new((f.e * f.mult) as f64, 0.0);
                    (1.0 / tt, -f.e)
                } else {
                    (tt, f.e)
                };
                // log(1 - t zeta^e)^mult = -mult sum_j t^j zeta^{e j} / j
                let mut pw = t_eff;
                let mut j = 1i64;
                while pw.norm() > LATTICE_CUTOFF {
                    let idx = e_eff * j;
                    if idx.unsigned_abs() as usize <= order {
                        *log.entry(idx).or_insert(Cx::new(0.0, 0.0)) -=
                            Cx::new(f.mult as f64, 0.0) * pw / (j as f64);
                    }
                    if j as usize > order + 64 {
                        break;
                    }
                    pw *= t_eff;
                    j += 1;
                }
            }
        }
        for (t, m) in boundary {
            if m != 0 {
                return Err(EqgError::AnnulusViolation(format!(
                    "uncancelled unit-circle factor (1 - {t} zeta^-1)^{m}"
                )));
            }
        }
        Ok(NormalSide {
            const_,
            nu,
            log_coeffs: log,
        })
    }

    /// Formal log-series coefficients in the factor variable, valid for any
    /// elementary magnitude: the coefficient of `zeta^{e n}` from
    /// `(t zeta^e; sigmas)^mult` is `-mult t^n / (n prod(1 - sigma^n))`.
    /// Used by self-tests that compare against directly computed exponents.
    pub fn formal_log_coeffs(&self, order: usize) -> BTreeMap<i64, Cx> {
        let mut log: BTreeMap<i64, Cx> = BTreeMap::new();
        for f in &self.factors {
            let mut tn = Cx::new(1.0, 0.0);
            for n in 1..=order as i64 {
                tn *= f.t;
                let mut den = Cx::new(1.0, 0.0);
                for s in &f.moduli {
                    den *= Cx::new(1.0, 0.0) - s.powi(n as i32);
                }
                *log.entry(f.e * n).or_insert(Cx::new(0.0, 0.0)) -=
                    Cx::new(f.mult as f64, 0.0) * tn / (den * n as f64);
            }
        }
        log
    }

    /// Evaluate the product side at a numeric point, with `zeta^nu` on the
    /// fixed branch of `log zeta`.
    pub fn eval(&self, zeta: Cx) -> Result<Cx> {
        let mut acc = self.const_ * (self.nu * zeta.ln()).exp();
        for f in &self.factors {
            for tt in Self::lattice_points(f)? {
                let base = Cx::new(1.0, 0.0)
                    - tt * if f.e == 1 { zeta } else { 1.0 / zeta };
                acc *= base.powi(f.mult as i32);
            }
        }
        Ok(acc)
    }
}

/// Max deviation between two sides: the `zeta`-power exponents must agree
/// exactly; constants and log-coefficients are compared up to `order`.
pub fn side_deviation(a: &FactorSide, b: &FactorSide, order: usize) -> Result<f64> {
    let na = a.normalize(order)?;
    let nb = b.normalize(order)?;
    let nu_diff = (na.nu - nb.nu).norm();
    if nu_diff > 1e-9 {
        return Err(EqgError::AnnulusViolation(format!(
            "zeta-power mismatch: {} vs {}",
            na.nu, nb.nu
        )));
    }
    let cdev = (na.const_ - nb.const_).norm() / na.const_.norm().max(nb.const_.norm()).max(1e-30);
    let mut dev = cdev;
    let mut keys: Vec<i64> = na.log_coeffs.keys().chain(nb.log_coeffs.keys()).copied().collect();
    keys.dedup();
    for k in keys {
        let x = na.log_coeffs.get(&k).copied().unwrap_or(Cx::new(0.0, 0.0));
        let y = nb.log_coeffs.get(&k).copied().unwrap_or(Cx::new(0.0, 0.0));
        dev = dev.max((x - y).norm());
    }
    Ok(dev)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peeling_identity_pointwise() {
        // (1 - 3 zeta) as a factor must evaluate equal after normalization
        // bookkeeping: compare against (-3 zeta)(1 - (1/3) zeta^{-1})
        let mut side = FactorSide::one();
        side.push(Cx::new(3.0, 0.4), 1, &[], 1);
        let z = Cx::new(0.9, 0.31);
        let direct = Cx::new(1.0, 0.0) - Cx::new(3.0, 0.4) * z;
        assert!((side.eval(z).unwrap() - direct).norm() < 1e-12);
        let n = side.normalize(24).unwrap();
        // reconstruct from the normal form
        let mut acc = n.const_ * (n.nu * z.ln()).exp();
        let mut logsum = Cx::new(0.0, 0.0);
        for (k, c) in &n.log_coeffs {
            logsum += c * (Cx::new(*k as f64, 0.0) * z.ln()).exp();
        }
        acc *= logsum.exp();
        assert!((acc - direct).norm() / direct.norm() < 1e-10, "{acc} vs {direct}");
    }

    #[test]
    fn pochhammer_factor_log_coeffs() {
        // (t zeta; sigma): g_n = -t^n / (n (1 - sigma^n))
        let t = Cx::new(0.3, 0.1);
        let s = Cx::new(0.2, 0.0);
        let mut side = FactorSide::one();
        side.push(t, 1, &[s], 1);
        let n = side.normalize(10).unwrap();
        for k in 1..=10i64 {
            let tk = t.powi(k as i32);
            let sk = s.powi(k as i32);
            let expect = -tk / ((1.0 - sk) * k as f64);
            let got = n.log_coeffs.get(&k).copied().unwrap();
            assert!((got - expect).norm() < 1e-14, "k = {k}");
        }
    }

    #[test]
    fn deviation_zero_for_identical_products_in_different_forms() {
        // (q^{-2} x; p): |q^{-2}| > 1 forces peeling; compare against the
        // explicitly peeled form
        let q2 = Cx::new(8.0, 1.5);
        let p = Cx::new(0.04, 0.01);
        let mut a = FactorSide::one();
        a.push(q2, 1, &[p], 1);
        let mut b = FactorSide::one();
        b.mul_const(-q2);
        b.mul_zeta_pow(Cx::new(1.0, 0.0));
        b.push(1.0 / q2, -1, &[], 1);
        b.push(q2 * p, 1, &[p], 1);
        let dev = side_deviation(&a, &b, 30).unwrap();
        assert!(dev < 1e-13, "dev = {dev}");
    }
}
