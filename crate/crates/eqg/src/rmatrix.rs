//! The elliptic dynamical R-matrix `R+(u,s)`, its scalar factors, the
//! constant `kappa`, fused matrices `R+_{1l}` and Yang-Baxter checks.
//!
//! Conventions (with `z = q^{2u}` and `{x} = (x; p, q^4)_inf`):
//!
//! ```text
//! R+(u,s) = rho+(u) . diag-block[1, (b c / cbar bbar), 1]
//! b(u,s)    = [s+1][s-1][u] / ([s]^2 [1+u])     c(u,s)    = [1][s+u] / ([s][1+u])
//! cbar(u,s) = [1][s-u] / ([s][1+u])             bbar(u,s) = [u] / [1+u]
//! rho+(u)   = z^{1/2r} {pq^2 z}^2 {1/z}{q^4/z} / ({pz}{pq^4 z}{q^2/z}^2)
//! ```
//!
//! Basis order on C^2 (x) C^2 is (++, +-, -+, --); rows are out-states.
//! The fused `R+_{1l}(u,s)` acts on C^2 (x) C^{l+1}; its closed form is the
//! primary path, and `fuse_r` rebuilds it by an l-fold dynamical product of
//! spin-1/2 blocks projected on the symmetric subspace as a cross-check.
//!
//! Two gauges are exposed for the fused family: `Gauge::RepL` matches the
//! closed-form normalization (scalar `z^{l/2r} rho+_{1l}`, which at `l = 1`
//! carries an extra `q^{1/2}` relative to `rho+`), while `Gauge::RMat`
//! removes the `q^{kl/2}` constant so that the `l = 1` block is exactly
//! `r_matrix` output.

use crate::dynrep::{dyn_tensor, DynamicalOperator, WeightModule};
use crate::error::EqgError;
use crate::expr::{Expr, ExprRef};
use crate::params::{EllipticParams, TruncationPolicy};
use crate::qseries::{pochhammer_multi, pochhammer_multi_reg, BracketCtx};
use crate::scalar::{cx_from, cx_to_f64, Cx, Real};
use crate::Result;
use num_complex::Complex;

/// Distance at which a denominator factor triggers [`EqgError::PoleProximity`].
pub const POLE_EPS: f64 = 1e-6;

/// A dynamical R-matrix block on `C^{d1} (x) C^{d2}`: bare entries plus a
/// scalar prefactor recorded separately, at dynamical argument `s`.
#[derive(Debug, Clone)]
pub struct RMatrixBlock {
    pub dims: (usize, usize),
    /// Bare entries, row-major over the composite index `(i1, i2)`, rows are
    /// out-pairs.
    pub entries: Vec<Cx>,
    pub scalar_prefactor: Cx,
    pub s: Cx,
    /// Weights of the two factors (for ice-rule checks and embeddings).
    pub weights: (Vec<i64>, Vec<i64>),
}

impl RMatrixBlock {
    pub fn dim(&self) -> usize {
        self.dims.0 * self.dims.1
    }

    #[inline]
    pub fn bare(&self, row: usize, col: usize) -> Cx {
        self.entries[row * self.dim() + col]
    }

    /// Prefactor times bare entry.
    #[inline]
    pub fn full(&self, row: usize, col: usize) -> Cx {
        self.scalar_prefactor * self.bare(row, col)
    }

    pub fn full_matrix(&self) -> Vec<Cx> {
        self.entries.iter().map(|e| e * self.scalar_prefactor).collect()
    }

    /// Ice rule: entry ((i1', i2') <- (i1, i2)) must vanish unless the weight
    /// sums agree. Returns the largest violating magnitude (0 for exact
    /// conservation).
    pub fn ice_rule_violation(&self) -> f64 {
        let (d1, d2) = self.dims;
        let mut worst = 0.0f64;
        for i1o in 0..d1 {
            for i2o in 0..d2 {
                for i1i in 0..d1 {
                    for i2i in 0..d2 {
                        let out = self.weights.0[i1o] + self.weights.1[i2o];
                        let inw = self.weights.0[i1i] + self.weights.1[i2i];
                        if out != inw {
                            let v = self.bare(i1o * d2 + i2o, i1i * d2 + i2i).norm();
                            worst = worst.max(v);
                        }
                    }
                }
            }
        }
        worst
    }
}

fn pole_guard(what: &str, v: Cx) -> Result<Cx> {
    if v.norm() < POLE_EPS {
        Err(EqgError::PoleProximity {
            what: what.to_string(),
            dist: v.norm(),
        })
    } else {
        Ok(v)
    }
}

/// `{x} = (x; p, q^4)_inf` for the given sector.
fn brace<T: Real>(
    x: Complex<T>,
    p: Complex<T>,
    q4: Complex<T>,
    policy: TruncationPolicy,
) -> Result<Complex<T>> {
    Ok(pochhammer_multi(x, &[p, q4], policy)?.value)
}

/// The scalar factor `rho+(u)` (or its starred variant). Denominator factors
/// within [`POLE_EPS`] of zero raise [`EqgError::PoleProximity`].
pub fn rho_plus<T: Real>(
    u: Complex<T>,
    params: &EllipticParams<T>,
    starred: bool,
    policy: TruncationPolicy,
) -> Result<Complex<T>> {
    let (p, r) = params.sector(starred);
    let z = params.z_of_u(u);
    let zi = Complex::new(T::one(), T::zero()) / z;
    let q2 = params.q * params.q;
    let q4 = q2 * q2;
    let n1 = brace(p * q2 * z, p, q4, policy)?;
    let n2 = brace(zi, p, q4, policy)?;
    let n3 = brace(q4 * zi, p, q4, policy)?;
    let d1 = brace(p * z, p, q4, policy)?;
    let d2 = brace(p * q4 * z, p, q4, policy)?;
    let d3 = brace(q2 * zi, p, q4, policy)?;
    for (name, v) in [("{pz}", d1), ("{pq^4 z}", d2), ("{q^2/z}", d3)] {
        pole_guard(name, cx_to_f64(v))?;
    }
    let zpow = (u / r * params.log_q).exp();
    Ok(zpow * n1 * n1 * n2 * n3 / (d1 * d2 * d3 * d3))
}

/// `rho(u) = rho+*(u) / rho+(u)`; identically 1 at `c = 0`.
pub fn rho_ratio<T: Real>(
    u: Complex<T>,
    params: &EllipticParams<T>,
    policy: TruncationPolicy,
) -> Result<Complex<T>> {
    Ok(rho_plus(u, params, true, policy)? / rho_plus(u, params, false, policy)?)
}

/// `kappa = lim_{z -> q^{-2}} xi(z; p*, q) / xi(z; p, q)`, where
/// `xi(z; p, q) = (q^2 z; p, q^4)(p q^2 z; p, q^4) / ((q^4 z; p, q^4)(p z; p, q^4))`.
///
/// The limit is taken by cancelling the common degree-zero factor
/// `(1 - q^2 z)` of the two vanishing products analytically and substituting
/// `z = q^{-2}` directly.
pub fn kappa<T: Real>(params: &EllipticParams<T>, policy: TruncationPolicy) -> Result<Complex<T>> {
    kappa_from(params.q, params.p_star, params.p, policy)
}

/// `kappa` with explicit numerator/denominator moduli (numerator sector
/// first); `kappa_from(q, p, p*) = 1 / kappa_from(q, p*, p)`.
pub fn kappa_from<T: Real>(
    q: Complex<T>,
    p_num: Complex<T>,
    p_den: Complex<T>,
    policy: TruncationPolicy,
) -> Result<Complex<T>> {
    let policy = policy.escalate(40);
    let one = Complex::new(T::one(), T::zero());
    let q2 = q * q;
    let q4 = q2 * q2;
    let z = one / q2;
    // xi-numerator-sector at z = q^{-2}: (1; p, q^4)' (p; p, q^4) / ((q^2; p, q^4)(p q^{-2}; p, q^4))
    let xi_at = |p: Complex<T>| -> Result<(Complex<T>, Complex<T>)> {
        let vanish_reg = pochhammer_multi_reg(q2 * z, &[p, q4], policy)?.value;
        let n2 = pochhammer_multi(p * q2 * z, &[p, q4], policy)?.value;
        let d1 = pochhammer_multi(q4 * z, &[p, q4], policy)?.value;
        let d2 = pochhammer_multi(p * z, &[p, q4], policy)?.value;
        Ok((vanish_reg * n2, d1 * d2))
    };
    let (num_n, num_d) = xi_at(p_num)?;
    let (den_n, den_d) = xi_at(p_den)?;
    Ok((num_n * den_d) / (num_d * den_n))
}

/// Raw-ratio Richardson extrapolation oracle for `kappa`: evaluates
/// `xi*/xi` at `z = q^{-2}(1 + eps)` for `eps = 1e-3, 1e-4, 1e-5` and
/// extrapolates the first two orders away.
pub fn kappa_extrapolated(params: &EllipticParams<f64>, policy: TruncationPolicy) -> Result<Cx> {
    let policy = policy.escalate(40);
    let q2 = params.q * params.q;
    let q4 = q2 * q2;
    let xi = |z: Cx, p: Cx| -> Result<Cx> {
        let n1 = pochhammer_multi(q2 * z, &[p, q4], policy)?.value;
        let n2 = pochhammer_multi(p * q2 * z, &[p, q4], policy)?.value;
        let d1 = pochhammer_multi(q4 * z, &[p, q4], policy)?.value;
        let d2 = pochhammer_multi(p * z, &[p, q4], policy)?.value;
        Ok(n1 * n2 / (d1 * d2))
    };
    let raw = |eps: f64| -> Result<Cx> {
        let z = (1.0 + eps) / q2;
        Ok(xi(z, params.p_star)? / xi(z, params.p)?)
    };
    let f1 = raw(1e-3)?;
    let f2 = raw(1e-4)?;
    let f3 = raw(1e-5)?;
    let g1 = (f2 * 10.0 - f1) / 9.0;
    let g2 = (f3 * 10.0 - f2) / 9.0;
    Ok((g2 * 100.0 - g1) / 99.0)
}

/// Bare R-matrix entries as numbers.
pub fn bare_entries(u: Cx, s: Cx, ctx: &BracketCtx, starred: bool) -> Result<[Cx; 4]> {
    let b = |x: Cx| ctx.eval(x, starred);
    let den_u = pole_guard("[1+u]", b(u + 1.0))?;
    let den_s = pole_guard("[s]", b(s))?;
    let bb = b(s + 1.0) * b(s - 1.0) * b(u) / (den_s * den_s * den_u);
    let cc = b(Cx::new(1.0, 0.0)) * b(s + u) / (den_s * den_u);
    let cbar = b(Cx::new(1.0, 0.0)) * b(s - u) / (den_s * den_u);
    let bbar = b(u) / den_u;
    Ok([bb, cc, cbar, bbar])
}

/// The 4x4 dynamical R-matrix, prefactor `rho+` recorded separately.
pub fn r_matrix(
    u: Cx,
    s: Cx,
    params: &EllipticParams<f64>,
    starred: bool,
    policy: TruncationPolicy,
) -> Result<RMatrixBlock> {
    let ctx = BracketCtx::new(*params, policy)?;
    let [bb, cc, cbar, bbar] = bare_entries(u, s, &ctx, starred)?;
    let rho = rho_plus(u, params, starred, policy)?;
    let mut entries = vec![Cx::new(0.0, 0.0); 16];
    entries[0] = Cx::new(1.0, 0.0);
    entries[1 * 4 + 1] = bb;
    entries[1 * 4 + 2] = cc;
    entries[2 * 4 + 1] = cbar;
    entries[2 * 4 + 2] = bbar;
    entries[3 * 4 + 3] = Cx::new(1.0, 0.0);
    Ok(RMatrixBlock {
        dims: (2, 2),
        entries,
        scalar_prefactor: rho,
        s,
        weights: (vec![1, -1], vec![1, -1]),
    })
}

/// Fused scalar `rho+_{kl}(z, p)`; `rho+_{11}` is `q^{1/2} z^{-1/2r} rho+`.
pub fn rho_kl(
    k: i64,
    l: i64,
    u: Cx,
    params: &EllipticParams<f64>,
    starred: bool,
    policy: TruncationPolicy,
) -> Result<Cx> {
    let (p, _r) = {
        let (p, r) = params.sector(starred);
        (p, r)
    };
    let z = params.z_of_u(u);
    let q = params.q;
    let q4 = q.powi(4);
    let qp = |e: i64| params.q_pow(Cx::new(e as f64, 0.0));
    let zi = 1.0 / z;
    let n1 = brace(p * qp(k - l + 2) * z, p, q4, policy)?;
    let n2 = brace(p * qp(-k + l + 2) * z, p, q4, policy)?;
    let d1 = brace(p * qp(k + l + 2) * z, p, q4, policy)?;
    let d2 = brace(p * qp(-k - l + 2) * z, p, q4, policy)?;
    let n3 = brace(qp(k + l + 2) * zi, p, q4, policy)?;
    let n4 = brace(qp(-k - l + 2) * zi, p, q4, policy)?;
    let d3 = brace(qp(k - l + 2) * zi, p, q4, policy)?;
    let d4 = brace(qp(-k + l + 2) * zi, p, q4, policy)?;
    for (name, v) in [("{pq^{k+l+2}z}", d1), ("{pq^{-k-l+2}z}", d2), ("{q^{k-l+2}/z}", d3), ("{q^{-k+l+2}/z}", d4)] {
        pole_guard(name, v)?;
    }
    let pref = params.q_pow(Cx::new((k * l) as f64 / 2.0, 0.0));
    Ok(pref * n1 * n2 * n3 * n4 / (d1 * d2 * d3 * d4))
}

/// `phi_l(u) = -z^{-l/2r} rho+_{1l}(z,p)^{-1} [u + (l+1)/2]`.
pub fn phi_l(
    l: i64,
    u: Cx,
    params: &EllipticParams<f64>,
    starred: bool,
    policy: TruncationPolicy,
) -> Result<Cx> {
    let (_p, r) = params.sector(starred);
    let ctx = BracketCtx::new(*params, policy)?;
    let z_pow = params.q_pow(-Cx::new(l as f64, 0.0) * u / r);
    let rho = rho_kl(1, l, u, params, starred, policy)?;
    let br = ctx.eval(u + Cx::new((l as f64 + 1.0) / 2.0, 0.0), starred);
    Ok(-z_pow * br / rho)
}

/// The scalar prefactor of the fused block in the closed-form normalization:
/// `z^{l/2r} rho+_{1l}(z,p)`, so that entry = prefactor * bare.
pub fn fused_prefactor(
    l: i64,
    u: Cx,
    params: &EllipticParams<f64>,
    starred: bool,
    policy: TruncationPolicy,
) -> Result<Cx> {
    let (_p, r) = params.sector(starred);
    let z_pow = params.q_pow(Cx::new(l as f64, 0.0) * u / r);
    Ok(z_pow * rho_kl(1, l, u, params, starred, policy)?)
}

/// Normalization gauge for fused blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    /// Closed-form normalization (scalar `z^{l/2r} rho+_{1l}`).
    RepL,
    /// `q^{kl/2}` removed; at `l = 1` this is exactly the `r_matrix` output.
    RMat,
}

/// Bare closed-form entry of `R+_{1l}(u, s)` as an expression in the
/// dynamical variable (`s = P`), without the scalar prefactor. Index
/// convention: out-pair `(eps_out, m_out)`, in-pair `(eps_in, m_in)`,
/// `eps = +1 -> 0`, `eps = -1 -> 1`, weight `mu = l - 2 m_in`.
/// Returns `None` for entries outside the ice-rule pattern.
pub fn r1l_bare_entry_expr(
    l: i64,
    eps_out: i64,
    eps_in: i64,
    m_out: i64,
    m_in: i64,
    u: Cx,
    starred: bool,
) -> Option<ExprRef> {
    if m_out < 0 || m_out > l || m_in < 0 || m_in > l {
        return None;
    }
    // weight conservation: eps_out + (l - 2 m_out) = eps_in + (l - 2 m_in)
    if eps_out - 2 * m_out != eps_in - 2 * m_in {
        return None;
    }
    let mu = (l - 2 * m_in) as f64;
    let lf = l as f64;
    let cr = |x: f64| Cx::new(x, 0.0);
    let den_u = Expr::bracket_const(u + cr((lf + 1.0) / 2.0), starred);
    let e = match (eps_out, eps_in) {
        (1, 1) => {
            // [u+(mu+1)/2][s-(l-mu)/2][s+(l+mu+2)/2] / ([u+(l+1)/2][s][s+mu+1])
            let num = Expr::mul(
                &Expr::bracket_const(u + cr((mu + 1.0) / 2.0), starred),
                &Expr::mul(
                    &Expr::bracket_p(cr(-(lf - mu) / 2.0), starred),
                    &Expr::bracket_p(cr((lf + mu + 2.0) / 2.0), starred),
                ),
            );
            let den = Expr::mul(
                &den_u,
                &Expr::mul(
                    &Expr::bracket_p(cr(0.0), starred),
                    &Expr::bracket_p(cr(mu + 1.0), starred),
                ),
            );
            Expr::div(&num, &den)
        }
        (-1, -1) => Expr::div(&Expr::bracket_const(u - cr((mu - 1.0) / 2.0), starred), &den_u),
        (1, -1) => {
            // lowering: m_out = m_in + 1
            // [u+s+(mu-1)/2][(l-mu+2)/2] / ([u+(l+1)/2][s+mu-1])
            let num = Expr::mul(
                &Expr::bracket(&Expr::p_plus(u + cr((mu - 1.0) / 2.0)), starred),
                &Expr::bracket_const(cr((lf - mu + 2.0) / 2.0), starred),
            );
            let den = Expr::mul(&den_u, &Expr::bracket_p(cr(mu - 1.0), starred));
            Expr::div(&num, &den)
        }
        (-1, 1) => {
            // raising: m_out = m_in - 1
            // -[u-s-(mu+1)/2][(l+mu+2)/2] / ([u+(l+1)/2][s])
            let arg = Expr::sub(
                &Expr::constant(u - cr((mu + 1.0) / 2.0)),
                &Expr::p(),
            );
            let num = Expr::mul(
                &Expr::bracket(&arg, starred),
                &Expr::bracket_const(cr((lf + mu + 2.0) / 2.0), starred),
            );
            let den = Expr::mul(&den_u, &Expr::bracket_p(cr(0.0), starred));
            Expr::neg(&Expr::div(&num, &den))
        }
        _ => return None,
    };
    Some(e)
}

/// Closed-form fused block `R+_{1l}(u, s)` evaluated numerically.
pub fn closed_form_r1l(
    l: usize,
    u: Cx,
    s: Cx,
    params: &EllipticParams<f64>,
    starred: bool,
    policy: TruncationPolicy,
    gauge: Gauge,
) -> Result<RMatrixBlock> {
    let ctx = BracketCtx::new(*params, policy)?;
    let d2 = l + 1;
    let dim = 2 * d2;
    let mut entries = vec![Cx::new(0.0, 0.0); dim * dim];
    for (r_eps, eps_out) in [(0usize, 1i64), (1, -1)] {
        for m_out in 0..=l {
            for (c_eps, eps_in) in [(0usize, 1i64), (1, -1)] {
                for m_in in 0..=l {
                    if let Some(e) = r1l_bare_entry_expr(
                        l as i64,
                        eps_out,
                        eps_in,
                        m_out as i64,
                        m_in as i64,
                        u,
                        starred,
                    ) {
                        let row = r_eps * d2 + m_out;
                        let col = c_eps * d2 + m_in;
                        entries[row * dim + col] = e.eval(s, &ctx);
                    }
                }
            }
        }
    }
    let mut pref = fused_prefactor(l as i64, u, params, starred, policy)?;
    if gauge == Gauge::RMat {
        pref = pref / params.q_pow(Cx::new(l as f64 / 2.0, 0.0));
    }
    Ok(RMatrixBlock {
        dims: (2, d2),
        entries,
        scalar_prefactor: pref,
        s,
        weights: (vec![1, -1], (0..=l).map(|m| l as i64 - 2 * m as i64).collect()),
    })
}

/// The spin-1/2 L-operator blocks used by the fusion product: closed-form
/// `l = 1` entries (including the scalar prefactor) with the dynamical
/// variable symbolic. Indexed as `[eps1][eps2]` with `+ -> 0, - -> 1`.
pub fn site_l_ops(
    u: Cx,
    params: &EllipticParams<f64>,
    starred: bool,
    policy: TruncationPolicy,
) -> Result<[[DynamicalOperator; 2]; 2]> {
    let module = WeightModule::spin(1);
    let pref = fused_prefactor(1, u, params, starred, policy)?;
    let mk = |eps1: i64, eps2: i64| -> DynamicalOperator {
        let mut op = DynamicalOperator::zero(&module);
        for m_out in 0..=1i64 {
            for m_in in 0..=1i64 {
                if let Some(e) = r1l_bare_entry_expr(1, eps1, eps2, m_out, m_in, u, starred) {
                    op.set(
                        m_out as usize,
                        m_in as usize,
                        Expr::mul(&Expr::constant(pref), &e),
                    );
                }
            }
        }
        op.q_charge = eps2;
        op.alpha_charge = eps1;
        op
    };
    Ok([[mk(1, 1), mk(1, -1)], [mk(-1, 1), mk(-1, -1)]])
}

/// Composite L-operator entries on `(C^2)^{(x) l}` at fusion points
/// `v_j = (l + 1 - 2j)/2`: the coproduct-product of spin-1/2 blocks.
pub fn composite_l_ops(
    l: usize,
    u: Cx,
    params: &EllipticParams<f64>,
    starred: bool,
    policy: TruncationPolicy,
) -> Result<[[DynamicalOperator; 2]; 2]> {
    let site = |j: usize| -> Result<[[DynamicalOperator; 2]; 2]> {
        let vj = Cx::new((l as f64 + 1.0 - 2.0 * j as f64) / 2.0, 0.0);
        site_l_ops(u - vj, params, starred, policy)
    };
    let mut acc = site(1)?;
    for j in 2..=l {
        let next = site(j)?;
        let mut out: Vec<Vec<DynamicalOperator>> = Vec::new();
        for e1 in 0..2usize {
            let mut row = Vec::new();
            for e2 in 0..2usize {
                let mut sum: Option<DynamicalOperator> = None;
                for mid in 0..2usize {
                    let term = dyn_tensor(&acc[e1][mid], &next[mid][e2]);
                    sum = Some(match sum {
                        None => term,
                        Some(s) => s.add(&term)?,
                    });
                }
                row.push(sum.unwrap());
            }
            out.push(row);
        }
        acc = [
            [out[0][0].clone(), out[0][1].clone()],
            [out[1][0].clone(), out[1][1].clone()],
        ];
    }
    Ok(acc)
}

/// Fixed generic spectral point used to build the fusion embedding.
const FUSION_DESCENT_U: Cx = Cx::new(0.23, 0.37);

fn mat_vec(mat: &[Cx], v: &[Cx]) -> Vec<Cx> {
    let d = v.len();
    (0..d)
        .map(|i| (0..d).map(|j| mat[i * d + j] * v[j]).sum())
        .collect()
}

/// `R+_{1l}(u, s)` by the fusion procedure: the l-fold product of spin-1/2
/// blocks restricted to the symmetric (spin-l) subspace. The embedding is
/// generated by descending from the highest-weight product vector with the
/// composite lowering entry at a fixed generic spectral point, normalized
/// against the closed form so the cross-check is entrywise.
pub fn fuse_r(
    l: usize,
    u: Cx,
    s: Cx,
    params: &EllipticParams<f64>,
    starred: bool,
    policy: TruncationPolicy,
    gauge: Gauge,
) -> Result<RMatrixBlock> {
    if l == 0 {
        return Err(EqgError::DomainError("fusion needs l >= 1".into()));
    }
    if l == 1 && gauge == Gauge::RMat {
        // no fusion step: exactly the elementary matrix
        return r_matrix(u, s, params, starred, policy);
    }
    let ctx = BracketCtx::new(*params, policy)?;
    let comp = composite_l_ops(l, u, params, starred, policy)?;
    let lowering = composite_l_ops(l, FUSION_DESCENT_U, params, starred, policy)?[0][1].clone();

    // descent embedding iota(m, P), normalized against the closed form
    fn iota(
        m: usize,
        p0: Cx,
        l: usize,
        lowering: &DynamicalOperator,
        params: &EllipticParams<f64>,
        starred: bool,
        ctx: &BracketCtx,
    ) -> Result<Vec<Cx>> {
        if m == 0 {
            let mut v = vec![Cx::new(0.0, 0.0); 1 << l];
            v[0] = Cx::new(1.0, 0.0);
            return Ok(v);
        }
        let prev = iota(m - 1, p0 - 1.0, l, lowering, params, starred, ctx)?;
        let mat = lowering.eval_at(p0, ctx);
        let raw = mat_vec(&mat, &prev);
        // closed-form L_{+-} entry (m <- m-1) at the descent point
        let cf = r1l_bare_entry_expr(
            l as i64,
            1,
            -1,
            m as i64,
            m as i64 - 1,
            FUSION_DESCENT_U,
            starred,
        )
        .ok_or_else(|| EqgError::FusionDegenerate("missing lowering entry".into()))?;
        let pref = fused_prefactor(l as i64, FUSION_DESCENT_U, params, starred, ctx.policy)?;
        let denom = pref * cf.eval(p0, ctx);
        if denom.norm() < POLE_EPS {
            return Err(EqgError::FusionDegenerate(format!(
                "descent normalizer vanished at m = {m}"
            )));
        }
        Ok(raw.iter().map(|x| x / denom).collect())
    }

    let d2 = l + 1;
    let dim = 2 * d2;
    let mut entries = vec![Cx::new(0.0, 0.0); dim * dim];
    let mut pref = fused_prefactor(l as i64, u, params, starred, policy)?;
    let gauge_div = if gauge == Gauge::RMat {
        params.q_pow(Cx::new(l as f64 / 2.0, 0.0))
    } else {
        Cx::new(1.0, 0.0)
    };

    for (r_eps, eps1) in [(0usize, 1i64), (1, -1)] {
        for (c_eps, eps2) in [(0usize, 1i64), (1, -1)] {
            let op = &comp[r_eps][c_eps];
            let mat = op.eval_at(s, &ctx);
            for m_in in 0..=l {
                let target = m_in as i64 - (eps2 - eps1) / 2;
                let vin = iota(m_in, s + Cx::new(eps2 as f64, 0.0), l, &lowering, params, starred, &ctx)?;
                let y = mat_vec(&mat, &vin);
                let ynorm: f64 = y.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                if target < 0 || target > l as i64 {
                    if ynorm > 1e-6 * (1.0 + pref.norm()) {
                        return Err(EqgError::FusionDegenerate(format!(
                            "image escapes the spin-{l} subspace: |y| = {ynorm:.3e}"
                        )));
                    }
                    continue;
                }
                let w = iota(target as usize, s, l, &lowering, params, starred, &ctx)?;
                let wn: f64 = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                if wn < 1e-12 {
                    return Err(EqgError::FusionDegenerate(format!(
                        "embedding vector collapsed at m = {target}"
                    )));
                }
                let inner: Cx = w.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum();
                let coeff = inner / Cx::new(wn * wn, 0.0);
                // invariance residual of the projection
                let mut res = 0.0f64;
                for (yi, wi) in y.iter().zip(w.iter()) {
                    res = res.max((yi - coeff * wi).norm());
                }
                if res > 1e-6 * ynorm.max(pref.norm()).max(1.0) {
                    return Err(EqgError::FusionDegenerate(format!(
                        "projection residual {res:.3e} at (eps {eps1},{eps2}; m {m_in})"
                    )));
                }
                let row = r_eps * d2 + target as usize;
                let col = c_eps * d2 + m_in;
                entries[row * dim + col] = coeff / pref;
            }
        }
    }
    pref /= gauge_div;
    Ok(RMatrixBlock {
        dims: (2, d2),
        entries,
        scalar_prefactor: pref,
        s,
        weights: (vec![1, -1], (0..=l).map(|m| l as i64 - 2 * m as i64).collect()),
    })
}

/// Apply an R-block to the pair `(a, b)` of a triple tensor space, with the
/// dynamical argument shifted by the spectator's weight when requested.
fn embed_pair(
    dims: [usize; 3],
    weights: [&[i64]; 3],
    pair: (usize, usize),
    spectator_shift: bool,
    mut r_at: impl FnMut(Cx) -> Result<RMatrixBlock>,
    s: Cx,
) -> Result<Vec<Cx>> {
    let (a, b) = pair;
    let c = 3 - a - b;
    let dim: usize = dims.iter().product();
    let mut out = vec![Cx::new(0.0, 0.0); dim * dim];
    let idx = |ia: usize, ib: usize, ic: usize| -> usize {
        let mut v = [0usize; 3];
        v[a] = ia;
        v[b] = ib;
        v[c] = ic;
        (v[0] * dims[1] + v[1]) * dims[2] + v[2]
    };
    for ic in 0..dims[c] {
        let sarg = if spectator_shift {
            s + Cx::new(weights[c][ic] as f64, 0.0)
        } else {
            s
        };
        let block = r_at(sarg)?;
        let full = block.full_matrix();
        let (da, db) = block.dims;
        debug_assert_eq!((da, db), (dims[a], dims[b]));
        for iao in 0..da {
            for ibo in 0..db {
                for iai in 0..da {
                    for ibi in 0..db {
                        let v = full[(iao * db + ibo) * da * db + (iai * db + ibi)];
                        if v.norm() != 0.0 {
                            out[idx(iao, ibo, ic) * dim + idx(iai, ibi, ic)] += v;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn mat_mul(a: &[Cx], b: &[Cx], d: usize) -> Vec<Cx> {
    let mut out = vec![Cx::new(0.0, 0.0); d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik.norm() == 0.0 {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    out
}

/// Normalized max-norm residual of the dynamical Yang-Baxter equation
///
/// ```text
/// R12(u1-u2, s+h3) R13(u1-u3, s) R23(u2-u3, s+h1)
///   = R23(u2-u3, s) R13(u1-u3, s+h2) R12(u1-u2, s)
/// ```
///
/// for arbitrary blocks on the three spaces, provided by `r_for`:
/// `r_for(a, b, s')` returns the block acting on spaces `(a, b)` at the
/// appropriate spectral difference (closed over by the caller).
pub fn dybe_residual_general(
    dims: [usize; 3],
    weights: [&[i64]; 3],
    r_for: &mut impl FnMut(usize, usize, Cx) -> Result<RMatrixBlock>,
    s: Cx,
) -> Result<f64> {
    let dim: usize = dims.iter().product();
    let m12_shift = embed_pair(dims, weights, (0, 1), true, |sa| r_for(0, 1, sa), s)?;
    let m13 = embed_pair(dims, weights, (0, 2), false, |sa| r_for(0, 2, sa), s)?;
    let m23_shift = embed_pair(dims, weights, (1, 2), true, |sa| r_for(1, 2, sa), s)?;
    let m23 = embed_pair(dims, weights, (1, 2), false, |sa| r_for(1, 2, sa), s)?;
    let m13_shift = {
        // shift by h^(2): spectator of (0,2) is space 1
        embed_pair(dims, weights, (0, 2), true, |sa| r_for(0, 2, sa), s)?
    };
    let m12 = embed_pair(dims, weights, (0, 1), false, |sa| r_for(0, 1, sa), s)?;
    let lhs = mat_mul(&mat_mul(&m12_shift, &m13, dim), &m23_shift, dim);
    let rhs = mat_mul(&mat_mul(&m23, &m13_shift, dim), &m12, dim);
    let scale = lhs
        .iter()
        .chain(rhs.iter())
        .map(|z| z.norm())
        .fold(1.0f64, f64::max);
    Ok(lhs
        .iter()
        .zip(rhs.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0f64, f64::max)
        / scale)
}

/// DYBE residual for three spin-1/2 spaces with the elementary R-matrix.
pub fn dybe_residual(
    u1: Cx,
    u2: Cx,
    u3: Cx,
    s: Cx,
    params: &EllipticParams<f64>,
    starred: bool,
    policy: TruncationPolicy,
) -> Result<f64> {
    let us = [u1, u2, u3];
    let w: Vec<i64> = vec![1, -1];
    let mut r_for = |a: usize, b: usize, sa: Cx| -> Result<RMatrixBlock> {
        r_matrix(us[a] - us[b], sa, params, starred, policy)
    };
    dybe_residual_general([2, 2, 2], [&w, &w, &w], &mut r_for, s)
}

/// Mixed DYBE residual for spaces `(C^2, C^2, V^(l))`: the elementary matrix
/// on the pair (1,2) and the fused (closed-form) block on the pairs with the
/// third space. With `starred` every bracket and scalar runs in the starred
/// sector; this is the consistency identity behind the intertwining
/// equations.
pub fn dybe_residual_mixed(
    l: usize,
    u1: Cx,
    u2: Cx,
    u3: Cx,
    s: Cx,
    params: &EllipticParams<f64>,
    starred: bool,
    policy: TruncationPolicy,
    fused_by_product: bool,
) -> Result<f64> {
    let us = [u1, u2, u3];
    let w2: Vec<i64> = vec![1, -1];
    let wl: Vec<i64> = (0..=l).map(|m| l as i64 - 2 * m as i64).collect();
    let mut r_for = |a: usize, b: usize, sa: Cx| -> Result<RMatrixBlock> {
        let du = us[a] - us[b];
        if b == 2 {
            if fused_by_product {
                fuse_r(l, du, sa, params, starred, policy, Gauge::RepL)
            } else {
                closed_form_r1l(l, du, sa, params, starred, policy, Gauge::RepL)
            }
        } else {
            r_matrix(du, sa, params, starred, policy)
        }
    };
    dybe_residual_general([2, 2, l + 1], [&w2, &w2, &wl], &mut r_for, s)
}

/// Convenience: `rho+` evaluated in extended precision and rounded back.
pub fn rho_plus_extended(
    u: Cx,
    params: &EllipticParams<f64>,
    starred: bool,
    policy: TruncationPolicy,
) -> Result<Cx> {
    let px = params.to_extended()?;
    Ok(cx_to_f64(rho_plus(cx_from(u), &px, starred, policy)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::default_params;
    use crate::sampling::{check_rng, sample_generic_point};

    fn pol() -> TruncationPolicy {
        TruncationPolicy::default()
    }

    #[test]
    fn rho_ratio_is_one_at_c_zero() {
        let params = default_params();
        let u = Cx::new(0.4, 0.2);
        let r = rho_ratio(u, &params, pol()).unwrap();
        assert!((r - Cx::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn rho_precision_escalation() {
        let params = default_params();
        let u = Cx::new(0.37, 0.18);
        let a = rho_plus(u, &params, false, pol()).unwrap();
        let b = rho_plus_extended(u, &params, false, pol()).unwrap();
        assert!((a - b).norm() / b.norm() < 1e-9);
    }

    #[test]
    fn rho_truncation_self_oracle() {
        let params = default_params();
        let u = Cx::new(0.52, 0.11);
        let a = rho_plus(u, &params, false, TruncationPolicy::new(40, 1e-9)).unwrap();
        let b = rho_plus(u, &params, false, TruncationPolicy::new(80, 1e-9)).unwrap();
        assert!((a - b).norm() / b.norm() < 1e-10);
    }

    #[test]
    fn rho_vanishes_at_zero_spectral_point() {
        let params = default_params();
        let v = rho_plus(Cx::new(0.0, 0.0), &params, false, pol()).unwrap();
        assert_eq!(v, Cx::new(0.0, 0.0));
    }

    #[test]
    fn kappa_is_one_at_c_zero() {
        let params = default_params();
        let k = kappa(&params, pol()).unwrap();
        assert!((k - Cx::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn kappa_matches_extrapolation() {
        let params = EllipticParams::new(Cx::new(0.35, 0.05), Cx::new(2.5, 0.1), Cx::new(1.0, 0.0)).unwrap();
        let ka = kappa(&params, pol()).unwrap();
        let ke = kappa_extrapolated(&params, pol()).unwrap();
        assert!((ka - ke).norm() < 1e-7, "analytic {ka} vs extrapolated {ke}");
    }

    #[test]
    fn kappa_swap_inverts() {
        let params = EllipticParams::new(Cx::new(0.35, 0.05), Cx::new(2.5, 0.1), Cx::new(1.0, 0.0)).unwrap();
        let k = kappa_from(params.q, params.p_star, params.p, pol()).unwrap();
        let ks = kappa_from(params.q, params.p, params.p_star, pol()).unwrap();
        assert!((k * ks - Cx::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn rho_11_reduces_to_rho_plus() {
        // rho+_{11}(z, p) = q^{1/2} z^{-1/2r} rho+(u) on the overlap domain
        let params = default_params();
        for &u in &[Cx::new(0.41, 0.17), Cx::new(-0.33, 0.22)] {
            let lhs = rho_kl(1, 1, u, &params, false, pol()).unwrap();
            let z_pow = params.q_pow(-u / params.r);
            let rhs = params.q_pow(Cx::new(0.5, 0.0)) * z_pow
                * rho_plus(u, &params, false, pol()).unwrap();
            assert!((lhs - rhs).norm() / rhs.norm() < 1e-12);
        }
    }

    #[test]
    fn ice_rule_exact() {
        let params = default_params();
        let blk = r_matrix(Cx::new(0.4, 0.1), Cx::new(0.9, 0.2), &params, false, pol()).unwrap();
        assert_eq!(blk.ice_rule_violation(), 0.0);
    }

    #[test]
    fn u_zero_degeneration() {
        let params = default_params();
        let ctx = BracketCtx::new(params, pol()).unwrap();
        let [b, c, cbar, bbar] = bare_entries(Cx::new(0.0, 0.0), Cx::new(0.83, 0.21), &ctx, false).unwrap();
        assert_eq!(b, Cx::new(0.0, 0.0));
        assert_eq!(bbar, Cx::new(0.0, 0.0));
        assert!((c - 1.0).norm() < 1e-10);
        assert!((cbar - 1.0).norm() < 1e-10);
    }

    #[test]
    fn bare_entries_two_code_paths_agree() {
        // expression-builder path vs direct bracket arithmetic
        let params = default_params();
        let ctx = BracketCtx::new(params, pol()).unwrap();
        let u = Cx::new(0.41, 0.17);
        let s = Cx::new(0.77, 0.23);
        let [b, c, cbar, bbar] = bare_entries(u, s, &ctx, false).unwrap();
        let via_expr = |e1: i64, e2: i64, mo: i64, mi: i64| {
            r1l_bare_entry_expr(1, e1, e2, mo, mi, u, false)
                .unwrap()
                .eval(s, &ctx)
        };
        assert!((via_expr(1, 1, 1, 1) - b).norm() < 1e-12);
        assert!((via_expr(1, -1, 1, 0) - c).norm() < 1e-12);
        assert!((via_expr(-1, 1, 0, 1) - cbar).norm() < 1e-12);
        assert!((via_expr(-1, -1, 0, 0) - bbar).norm() < 1e-12);
    }

    #[test]
    fn dybe_residual_small_at_generic_points() {
        let params = default_params();
        let mut rng = check_rng(42, "rmatrix", 0);
        for trial in 0..5 {
            let u1 = sample_generic_point(&mut rng);
            let u2 = sample_generic_point(&mut rng);
            let u3 = sample_generic_point(&mut rng);
            let s = sample_generic_point(&mut rng) + Cx::new(0.8, 0.0);
            let res = dybe_residual(u1, u2, u3, s, &params, false, pol()).unwrap();
            assert!(res < 1e-9, "trial {trial}: residual {res}");
            let res_star = dybe_residual(u1, u2, u3, s, &params, true, pol()).unwrap();
            assert!(res_star < 1e-9, "trial {trial}: starred residual {res_star}");
        }
    }

    #[test]
    fn dybe_degenerate_equal_spectral_points() {
        let params = default_params();
        let u = Cx::new(0.45, 0.2);
        let u3 = Cx::new(-0.3, 0.15);
        let s = Cx::new(1.1, 0.2);
        let res = dybe_residual(u, u, u3, s, &params, false, pol()).unwrap();
        assert!(res < 1e-12, "residual {res}");
    }

    #[test]
    fn fused_l1_rmat_gauge_is_r_matrix_bit_for_bit() {
        let params = default_params();
        let u = Cx::new(0.4, 0.12);
        let s = Cx::new(0.95, 0.18);
        let a = fuse_r(1, u, s, &params, false, pol(), Gauge::RMat).unwrap();
        let b = r_matrix(u, s, &params, false, pol()).unwrap();
        assert_eq!(a.scalar_prefactor, b.scalar_prefactor);
        assert_eq!(a.entries, b.entries);
    }

    #[test]
    fn fused_l1_repl_gauge_matches_closed_form() {
        let params = default_params();
        let u = Cx::new(0.4, 0.12);
        let s = Cx::new(0.95, 0.18);
        let a = fuse_r(1, u, s, &params, false, pol(), Gauge::RepL).unwrap();
        let b = closed_form_r1l(1, u, s, &params, false, pol(), Gauge::RepL).unwrap();
        for (x, y) in a.full_matrix().iter().zip(b.full_matrix().iter()) {
            assert!((x - y).norm() / y.norm().max(1e-12) < 1e-10);
        }
    }

    #[test]
    fn fused_l2_matches_closed_form() {
        let params = default_params();
        let u = Cx::new(0.43, 0.21);
        let s = Cx::new(1.05, 0.27);
        let a = fuse_r(2, u, s, &params, false, pol(), Gauge::RepL).unwrap();
        let b = closed_form_r1l(2, u, s, &params, false, pol(), Gauge::RepL).unwrap();
        let scale = b
            .full_matrix()
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        for (i, (x, y)) in a.full_matrix().iter().zip(b.full_matrix().iter()).enumerate() {
            assert!(
                (x - y).norm() / scale < 1e-8,
                "entry {i}: fused {x} vs closed {y}"
            );
        }
    }

    /// Exploratory, not a gate: whether rho+ normalizes R+ to satisfy
    /// unitarity R(u) R_21-ish(-u) = 1 is not asserted anywhere upstream;
    /// run on demand with --ignored to inspect the actual value.
    #[test]
    #[ignore]
    fn exploratory_r_unitarity() {
        let params = default_params();
        let u = Cx::new(0.37, 0.15);
        let s = Cx::new(0.91, 0.22);
        let a = r_matrix(u, s, &params, false, pol()).unwrap();
        let b = r_matrix(-u, s, &params, false, pol()).unwrap();
        let fa = a.full_matrix();
        let fb = b.full_matrix();
        let prod = mat_mul(&fa, &fb, 4);
        let mut dev = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { Cx::new(1.0, 0.0) } else { Cx::new(0.0, 0.0) };
                dev = dev.max((prod[i * 4 + j] - expect).norm());
            }
        }
        println!("R(u) R(-u) deviation from identity: {dev:.6e}");
    }

    #[test]
    fn mixed_dybe_with_fused_block() {
        let params = default_params();
        let mut rng = check_rng(42, "rmatrix-mixed", 0);
        let u1 = sample_generic_point(&mut rng);
        let u2 = sample_generic_point(&mut rng);
        let u3 = sample_generic_point(&mut rng);
        let s = sample_generic_point(&mut rng) + Cx::new(0.9, 0.0);
        for l in [1usize, 2] {
            let res = dybe_residual_mixed(l, u1, u2, u3, s, &params, false, pol(), true).unwrap();
            assert!(res < 1e-8, "l = {l}: residual {res}");
        }
    }
}
