//! The randomized verification suites behind `verify`: every identity the
//! library implements, run at seeded generic points, producing one
//! [`CheckRecord`] per check. Check order is fixed and every check draws
//! from its own `(seed, suite, index)`-keyed generator, so reports are
//! deterministic byte-for-byte.

use crate::algebroid::{
    antipode_residual, coassociativity_residual, counit_residual, formal_charge_checks,
    intertwiner_consistency, s_preserves_rll_residual,
};
use crate::dynrep::residual_at;
use crate::evalrep::{
    half_current, k_current_image, l_operator, pi_drinfeld, rll_residual, EvaluationRep,
    Generator, HalfCurrent, LMethod, PiImage,
};
use crate::expr::Expr;
use crate::freefield::{
    dressing_cross_check, ef_pole_structure, exchange_ratio_check, grading_checks,
    kernel_factor_list, pair_log_coeff, BaseCurrent, ExchangePair, ModeAlgebra,
};
use crate::laurent::FactorSide;
use crate::params::{EllipticParams, TruncationPolicy};
use crate::qseries::{bracket, pochhammer_multi, theta_big, theta_sum_oracle, BracketCtx};
use crate::report::{CheckRecord, Precision, Report, RunConfig};
use crate::rmatrix::{
    bare_entries, closed_form_r1l, dybe_residual, dybe_residual_mixed, fuse_r, kappa,
    kappa_extrapolated, kappa_from, r_matrix, rho_plus, rho_plus_extended, rho_ratio, Gauge,
};
use crate::sampling::{check_rng, sample_dynamical, sample_generic_point};
use crate::scalar::{cx_from, cx_to_f64, Cx};
use crate::Result;
use num_complex::Complex;
use rand_chacha::ChaCha12Rng;
use twofloat::TwoFloat;

struct SuiteCtx {
    cfg: RunConfig,
    params: EllipticParams<f64>,
    policy: TruncationPolicy,
    precision: Precision,
}

impl SuiteCtx {
    fn new(cfg: &RunConfig) -> Result<Self> {
        Ok(Self {
            cfg: cfg.clone(),
            params: cfg.params()?,
            policy: TruncationPolicy::new(cfg.trunc, cfg.tol.min(1e-9)),
            precision: cfg.precision_mode()?,
        })
    }

    /// Effective tolerance: the pinned per-check default unless the user
    /// overrode the configured tolerance.
    fn tol(&self, pinned: f64) -> f64 {
        let default_tol = RunConfig::default().tol;
        if (self.cfg.tol - default_tol).abs() > f64::EPSILON {
            self.cfg.tol
        } else {
            pinned
        }
    }

    fn rng(&self, suite: &str, idx: u64) -> ChaCha12Rng {
        check_rng(self.cfg.seed, suite, idx)
    }
}

fn push_check(
    out: &mut Vec<CheckRecord>,
    suite: &str,
    name: &str,
    anchor: &str,
    tol: f64,
    result: Result<(f64, String)>,
) {
    match result {
        Ok((residual, params)) => {
            out.push(CheckRecord::new(suite, name, anchor, params, residual, tol))
        }
        Err(e) => out.push(CheckRecord::errored(suite, name, anchor, &e, tol)),
    }
}

// ---------------------------------------------------------------------------
// theta suite
// ---------------------------------------------------------------------------

fn bracket_residuals_generic<T: crate::scalar::Real>(
    params: &EllipticParams<T>,
    policy: TruncationPolicy,
    rng: &mut ChaCha12Rng,
    samples: usize,
    shift: Complex<T>,
    multiplier: impl Fn(Complex<T>) -> Complex<T>,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let u = cx_from::<T>(sample_generic_point(rng));
        let lhs = bracket(u + shift, params, false, policy)?.value;
        let rhs = multiplier(u) * bracket(u, params, false, policy)?.value;
        let scale = cx_to_f64(rhs).norm().max(1.0);
        worst = worst.max(cx_to_f64(lhs - rhs).norm() / scale);
    }
    Ok(worst)
}

fn theta_suite(ctx: &SuiteCtx) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    let suite = "theta";
    let n = ctx.cfg.samples.max(50);
    let p64 = ctx.params;
    let policy = ctx.policy;

    // 0: [u + r] = -[u]
    let res = (|| -> Result<(f64, String)> {
        let mut rng = ctx.rng(suite, 0);
        let worst = match ctx.precision {
            Precision::Double => bracket_residuals_generic(
                &p64,
                policy,
                &mut rng,
                n,
                p64.r,
                |_| Cx::new(-1.0, 0.0),
            )?,
            Precision::Extended => {
                let px = p64.to_extended()?;
                bracket_residuals_generic(&px, policy, &mut rng, n, px.r, |_| {
                    Complex::new(TwoFloat::from(-1.0), TwoFloat::from(0.0))
                })?
            }
        };
        Ok((worst, format!("{n} random u")))
    })();
    push_check(&mut out, suite, "quasi_periodicity_r", "theta-bracket-shift-r", ctx.tol(1e-9), res);

    // 1: [u + r tau] = -exp(-pi i (2u/r + tau)) [u]
    let res = (|| -> Result<(f64, String)> {
        let mut rng = ctx.rng(suite, 1);
        let tau = p64.tau();
        let worst = bracket_residuals_generic(&p64, policy, &mut rng, n, p64.r * tau, |u| {
            let i = Cx::new(0.0, 1.0);
            -(-i * std::f64::consts::PI * (2.0 * u / p64.r + tau)).exp()
        })?;
        Ok((worst, format!("{n} random u, verified multiplier")))
    })();
    push_check(&mut out, suite, "quasi_periodicity_rtau", "theta-bracket-shift-rtau", ctx.tol(1e-9), res);

    // 2: oddness [-u] = -[u]
    let res = (|| -> Result<(f64, String)> {
        let mut rng = ctx.rng(suite, 2);
        let mut worst = 0.0f64;
        for _ in 0..n {
            let u = sample_generic_point(&mut rng);
            let a = bracket(u, &p64, false, policy)?.value;
            let b = bracket(-u, &p64, false, policy)?.value;
            worst = worst.max((a + b).norm() / a.norm().max(1e-12));
        }
        Ok((worst, format!("{n} random u")))
    })();
    push_check(&mut out, suite, "oddness", "theta-bracket-odd", ctx.tol(1e-9), res);

    // 3: triple product vs product form, |p| <= 0.5
    let res = (|| -> Result<(f64, String)> {
        let mut rng = ctx.rng(suite, 3);
        let mut worst = 0.0f64;
        // frozen reference point
        let z0 = Cx::new(0.7, 0.2);
        let p0 = Cx::new(0.2, 0.0);
        let a = theta_big(z0, p0, policy)?.value;
        let b = theta_sum_oracle(z0, p0, policy)?.value;
        worst = worst.max((a - b).norm() / b.norm());
        for _ in 0..ctx.cfg.samples {
            use rand::RngExt;
            let z = Cx::new(rng.random_range(0.4..1.2), rng.random_range(-0.5..0.5));
            let p = Cx::new(rng.random_range(0.05..0.5), rng.random_range(-0.05..0.05));
            let a = theta_big(z, p, policy)?.value;
            let b = theta_sum_oracle(z, p, policy)?.value;
            worst = worst.max((a - b).norm() / b.norm().max(1e-12));
        }
        Ok((worst, format!("frozen point + {} samples, |p| <= 0.5", ctx.cfg.samples)))
    })();
    push_check(&mut out, suite, "triple_product", "jacobi-triple-product", ctx.tol(1e-10), res);

    // 4: starred collapse at c = 0 (identical code path)
    let res = (|| -> Result<(f64, String)> {
        let mut rng = ctx.rng(suite, 4);
        let mut worst = 0.0f64;
        for _ in 0..10 {
            let u = sample_generic_point(&mut rng);
            let a = bracket(u, &p64, true, policy)?.value;
            let b = bracket(u, &p64, false, policy)?.value;
            worst = worst.max((a - b).norm());
        }
        Ok((worst, "10 samples, exact equality".into()))
    })();
    push_check(&mut out, suite, "starred_collapse", "starred-sector-c0", 0.0, res);

    // 5: truncation error monotone in order
    let res = (|| -> Result<(f64, String)> {
        let z = Cx::new(0.45, 0.1);
        let p = Cx::new(0.28, 0.03);
        let mut last = f64::INFINITY;
        let mut violations = 0usize;
        for order in [10usize, 20, 30, 40] {
            let v = pochhammer_multi(z, &[p], TruncationPolicy::new(order, 1e-9))?;
            if v.est_error > last + 1e-18 {
                violations += 1;
            }
            last = v.est_error;
        }
        Ok((violations as f64, "orders 10..40".into()))
    })();
    push_check(&mut out, suite, "truncation_monotonic", "truncation-error-monotonicity", 0.5, res);

    // 6: order-30 vs order-80 self oracle
    let res = (|| -> Result<(f64, String)> {
        let z = Cx::new(0.3, 0.0);
        let p = Cx::new(0.1, 0.0);
        let lo = pochhammer_multi(z, &[p], TruncationPolicy::new(30, 1e-9))?.value;
        let hi = pochhammer_multi(z, &[p], TruncationPolicy::new(80, 1e-9))?.value;
        Ok(((lo - hi).norm() / hi.norm(), "z=0.3, p=0.1, N=30 vs 80".into()))
    })();
    push_check(&mut out, suite, "pochhammer_self_oracle", "pochhammer-truncation", ctx.tol(1e-12), res);

    out
}

// ---------------------------------------------------------------------------
// rmatrix suite
// ---------------------------------------------------------------------------

fn rmatrix_suite(ctx: &SuiteCtx) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    let suite = "rmatrix";
    let p = ctx.params;
    let policy = ctx.policy;
    let n = ctx.cfg.samples;

    // 0: ice rule, structural
    let res = (|| -> Result<(f64, String)> {
        let mut rng = ctx.rng(suite, 0);
        let ctxb = BracketCtx::new(p, policy)?;
        let u = sample_generic_point(&mut rng);
        let s = sample_dynamical(&mut rng, &ctxb, &[])?;
        let blk = r_matrix(u, s, &p, false, policy)?;
        Ok((blk.ice_rule_violation(), format!("u={u}, s={s}")))
    })();
    push_check(&mut out, suite, "ice_rule", "ice-rule", 0.0, res);

    // 1: u = 0 degeneration
    let res = (|| -> Result<(f64, String)> {
        let mut rng = ctx.rng(suite, 1);
        let ctxb = BracketCtx::new(p, policy)?;
        let s = sample_dynamical(&mut rng, &ctxb, &[])?;
        let [b, c, cbar, bbar] = bare_entries(Cx::new(0.0, 0.0), s, &ctxb, false)?;
        let worst = b
            .norm()
            .max(bbar.norm())
            .max((c - 1.0).norm())
            .max((cbar - 1.0).norm());
        Ok((worst, format!("s={s}")))
    })();
    push_check(&mut out, suite, "u_zero_degeneration", "r-matrix-u0", ctx.tol(1e-10), res);

    // 2: entries recomputed through the expression path agree with direct
    // bracket arithmetic
    let res = (|| -> Result<(f64, String)> {
        let mut rng = ctx.rng(suite, 2);
        let ctxb = BracketCtx::new(p, policy)?;
        let mut worst = 0.0f64;
        for _ in 0..5 {
            let u = sample_generic_point(&mut rng);
            let s = sample_dynamical(&mut rng, &ctxb, &[])?;
            let [b, c, cbar, bbar] = bare_entries(u, s, &ctxb, false)?;
            let via = |e1: i64, e2: i64, mo: i64, mi: i64| {
                crate::rmatrix::r1l_bare_entry_expr(1, e1, e2, mo, mi, u, false)
                    .map(|e| e.eval(s, &ctxb))
                    .unwrap_or(Cx::new(0.0, 0.0))
            };
            worst = worst
                .max((via(1, 1, 1, 1) - b).norm())
                .max((via(1, -1, 1, 0) - c).norm())
                .max((via(-1, 1, 0, 1) - cbar).norm())
                .max((via(-1, -1, 0, 0) - bbar).norm());
        }
        Ok((worst, "5 samples, two code paths".into()))
    })();
    push_check(&mut out, suite, "entries_two_paths", "r-matrix-entries", ctx.tol(1e-12), res);

    // 3/4: dynamical YBE, unstarred and starred
    for (idx, starred) in [(3u64, false), (4, true)] {
        let name = if starred { "dybe_starred" } else { "dybe" };
        let res = (|| -> Result<(f64, String)> {
            let mut rng = ctx.rng(suite, idx);
            let ctxb = BracketCtx::new(p, policy)?;
            let mut worst = 0.0f64;
            for _ in 0..n {
                let u1 = sample_generic_point(&mut rng);
                let u2 = sample_generic_point(&mut rng);
                let u3 = sample_generic_point(&mut rng);
                let s = sample_dynamical(&mut rng, &ctxb, &[2.0, -2.0])?;
                worst = worst.max(dybe_residual(u1, u2, u3, s, &p, starred, policy)?);
            }
            Ok((worst, format!("{n} random (u1,u2,u3,s)")))
        })();
        push_check(&mut out, suite, name, "dynamical-ybe", ctx.tol(1e-9), res);
    }

    // 5: degenerate equal spectral points
    let res = (|| -> Result<(f64, String)> {
        let mut rng = ctx.rng(suite, 5);
        let ctxb = BracketCtx::new(p, policy)?;
        let u = sample_generic_point(&mut rng);
        let u3 = sample_generic_point(&mut rng);
        let s = sample_dynamical(&mut rng, &ctxb, &[2.0, -2.0])?;
        Ok((dybe_residual(u, u, u3, s, &p, false, policy)?, format!("u1=u2={u}")))
    })();
    push_check(&mut out, suite, "dybe_degenerate", "dynamical-ybe-degenerate", ctx.tol(1e-12), res);

    // 6: kappa at c = 0 is exactly 1
    let res = (|| -> Result<(f64, String)> {
        let k = kappa(&p, policy)?;
        Ok(((k - 1.0).norm(), "level zero".into()))
    })();
    push_check(&mut out, suite, "kappa_c0", "kappa-level-zero", ctx.tol(1e-12), res);

    // 7: kappa analytic cancellation vs Richardson extrapolation (c = 1)
    let res = (|| -> Result<(f64, String)> {
        let pk = EllipticParams::new(p.q, p.r + Cx::new(1.3, 0.0), Cx::new(1.0, 0.0))?;
        let ka = kappa(&pk, policy)?;
        let ke = kappa_extrapolated(&pk, policy)?;
        Ok(((ka - ke).norm(), format!("c=1, r={}", pk.r)))
    })();
    push_check(&mut out, suite, "kappa_extrapolation", "kappa-limit", ctx.tol(1e-7), res);

    // 8: kappa inverts under p <-> p*
    let res = (|| -> Result<(f64, String)> {
        let pk = EllipticParams::new(p.q, p.r + Cx::new(1.3, 0.0), Cx::new(1.0, 0.0))?;
        let a = kappa_from(pk.q, pk.p_star, pk.p, policy)?;
        let b = kappa_from(pk.q, pk.p, pk.p_star, policy)?;
        Ok(((a * b - 1.0).norm(), "swap oracle".into()))
    })();
    push_check(&mut out, suite, "kappa_swap", "kappa-inversion", ctx.tol(1e-10), res);

    // 9: rho ratio at c = 0
    let res = (|| -> Result<(f64, String)> {
        let mut rng = ctx.rng(suite, 9);
        let u = sample_generic_point(&mut rng);
        Ok(((rho_ratio(u, &p, policy)? - 1.0).norm(), format!("u={u}")))
    })();
    push_check(&mut out, suite, "rho_c0", "rho-ratio-level-zero", ctx.tol(1e-13), res);

    // 10: rho double vs extended precision
    let res = (|| -> Result<(f64, String)> {
        let mut rng = ctx.rng(suite, 10);
        let u = sample_generic_point(&mut rng);
        let a = rho_plus(u, &p, false, policy)?;
        let b = rho_plus_extended(u, &p, false, policy)?;
        Ok(((a - b).norm() / b.norm(), format!("u={u}")))
    })();
    push_check(&mut out, suite, "rho_precision", "rho-precision-escalation", ctx.tol(1e-9), res);

    // 11: rho truncation self oracle N vs N+40
    let res = (|| -> Result<(f64, String)> {
        let mut rng = ctx.rng(suite, 11);
        let u = sample_generic_point(&mut rng);
        let a = rho_plus(u, &p, false, policy)?;
        let b = rho_plus(u, &p, false, policy.escalate(40))?;
        Ok(((a - b).norm() / b.norm(), format!("u={u}, N={} vs {}", policy.order, policy.order + 40)))
    })();
    push_check(&mut out, suite, "rho_truncation", "rho-truncation", ctx.tol(1e-10), res);

    // 12: fusion at l = 1 in the elementary gauge is bit-for-bit r_matrix
    let res = (|| -> Result<(f64, String)> {
        let mut rng = ctx.rng(suite, 12);
        let ctxb = BracketCtx::new(p, policy)?;
        let u = sample_generic_point(&mut rng);
        let s = sample_dynamical(&mut rng, &ctxb, &[])?;
        let a = fuse_r(1, u, s, &p, false, policy, Gauge::RMat)?;
        let b = r_matrix(u, s, &p, false, policy)?;
        let exact = a.entries == b.entries && a.scalar_prefactor == b.scalar_prefactor;
        Ok((if exact { 0.0 } else { 1.0 }, format!("u={u}, s={s}")))
    })();
    push_check(&mut out, suite, "fuse_l1_unit_gauge", "fusion-identity-gauge", 0.0, res);

    // 13/14: fusion vs closed form, l = 2, 3
    for (idx, l) in [(13u64, 2usize), (14, 3)] {
        let name = if l == 2 { "fuse_l2" } else { "fuse_l3" };
        let res = (|| -> Result<(f64, String)> {
            let mut rng = ctx.rng(suite, idx);
            let ctxb = BracketCtx::new(p, policy)?;
            let mut worst = 0.0f64;
            for _ in 0..3.min(n) {
                let u = sample_generic_point(&mut rng);
                let s = sample_dynamical(&mut rng, &ctxb, &[2.0, -2.0, 3.0, -3.0])?;
                let a = fuse_r(l, u, s, &p, false, policy, Gauge::RepL)?;
                let b = closed_form_r1l(l, u, s, &p, false, policy, Gauge::RepL)?;
                let fa = a.full_matrix();
                let fb = b.full_matrix();
                let scale = fb.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
                for (x, y) in fa.iter().zip(fb.iter()) {
                    worst = worst.max((x - y).norm() / scale);
                }
            }
            Ok((worst, format!("spin-l fusion, l={l}, 3 samples")))
        })();
        push_check(&mut out, suite, name, "fusion-vs-closed-form", ctx.tol(1e-8), res);
    }

    // 15: mixed DYBE with the fused block built by the product route
    let res = (|| -> Result<(f64, String)> {
        let mut rng = ctx.rng(suite, 15);
        let ctxb = BracketCtx::new(p, policy)?;
        let u1 = sample_generic_point(&mut rng);
        let u2 = sample_generic_point(&mut rng);
        let u3 = sample_generic_point(&mut rng);
        let s = sample_dynamical(&mut rng, &ctxb, &[2.0, -2.0, 3.0])?;
        Ok((
            dybe_residual_mixed(2, u1, u2, u3, s, &p, false, policy, true)?,
            "l=2 fused by product".into(),
        ))
    })();
    push_check(&mut out, suite, "mixed_dybe_fused", "mixed-dynamical-ybe", ctx.tol(1e-8), res);

    out
}

// ---------------------------------------------------------------------------
// rll suite (evaluation representation)
// ---------------------------------------------------------------------------

fn rll_suite(ctx: &SuiteCtx) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    let suite = "rll";
    let p = ctx.params;
    let policy = ctx.policy;
    let n = ctx.cfg.samples;

    // 0: central and scaling elements map to zero; h has weight eigenvalues;
    // a images commute
    let res = (|| -> Result<(f64, String)> {
        let rep = EvaluationRep::new(2, Cx::new(0.1, 0.08), p)?;
        let ctxb = BracketCtx::new(p, policy)?;
        let mut worst = 0.0f64;
        for g in [Generator::C, Generator::D] {
            if let PiImage::Op(op) = pi_drinfeld(g, &rep)? {
                worst = worst.max(
                    op.eval_at(Cx::new(0.7, 0.2), &ctxb)
                        .iter()
                        .map(|z| z.norm())
                        .fold(0.0f64, f64::max),
                );
            }
        }
        let a1 = match pi_drinfeld(Generator::A(1), &rep)? {
            PiImage::Op(op) => op,
            _ => unreachable!(),
        };
        let am1 = match pi_drinfeld(Generator::A(-1), &rep)? {
            PiImage::Op(op) => op,
            _ => unreachable!(),
        };
        let lhs = a1.compose(&am1)?;
        let rhs = am1.compose(&a1)?;
        worst = worst.max(residual_at(&lhs, &rhs, Cx::new(0.7, 0.2), &ctxb));
        Ok((worst, "pi(c)=pi(d)=0, [pi(a1),pi(a-1)]=0".into()))
    })();
    push_check(&mut out, suite, "drinfeld_images", "evaluation-level-zero", ctx.tol(1e-13), res);

    // 1: half-current weight shifts and charges
    let res = (|| -> Result<(f64, String)> {
        let rep = EvaluationRep::new(2, Cx::new(0.1, 0.08), p)?;
        let e = half_current(HalfCurrent::EPlus, Cx::new(0.3, 0.2), &rep, policy)?;
        let f = half_current(HalfCurrent::FPlus, Cx::new(0.3, 0.2), &rep, policy)?;
        let ok = e.weight_shift() == Some(2)
            && e.q_charge == 2
            && f.weight_shift() == Some(-2)
            && f.q_charge == 0;
        Ok((if ok { 0.0 } else { 1.0 }, "grading bookkeeping".into()))
    })();
    push_check(&mut out, suite, "half_current_grading", "half-current-weights", 0.0, res);

    // 2: K+(u) = K(u + (r+1)/2)
    let res = (|| -> Result<(f64, String)> {
        let rep = EvaluationRep::new(1, Cx::new(0.1, 0.08), p)?;
        let ctxb = BracketCtx::new(p, policy)?;
        let mut rng = ctx.rng(suite, 2);
        let u = sample_generic_point(&mut rng);
        let kp = half_current(HalfCurrent::KPlus, u, &rep, policy)?;
        let ks = k_current_image(u + (p.r + 1.0) / 2.0, &rep, policy)?;
        Ok((residual_at(&kp, &ks, Cx::new(0.8, 0.2), &ctxb), format!("u={u}")))
    })();
    push_check(&mut out, suite, "kplus_shift", "kplus-argument-shift", ctx.tol(1e-14), res);

    // 3/4: Gauss decomposition vs closed form, l = 1, 2
    for (idx, l) in [(3u64, 1usize), (4, 2)] {
        let name = if l == 1 { "gauss_vs_closed_l1" } else { "gauss_vs_closed_l2" };
        let res = (|| -> Result<(f64, String)> {
            let mut rng = ctx.rng(suite, idx);
            let ctxb = BracketCtx::new(p, policy)?;
            let mut worst = 0.0f64;
            let pts = n.min(8);
            for _ in 0..pts {
                let v = sample_generic_point(&mut rng);
                let rep = EvaluationRep::new(l, v, p)?;
                let u = sample_generic_point(&mut rng);
                let p0 = sample_dynamical(&mut rng, &ctxb, &[2.0, -2.0])?;
                let gauss = l_operator(u, &rep, LMethod::Gauss, policy)?;
                let closed = l_operator(u, &rep, LMethod::ClosedForm, policy)?;
                for e1 in 0..2 {
                    for e2 in 0..2 {
                        worst = worst.max(residual_at(&gauss[e1][e2], &closed[e1][e2], p0, &ctxb));
                    }
                }
            }
            Ok((worst, format!("{pts} random (u, v, P)")))
        })();
        push_check(&mut out, suite, name, "l-operator-two-routes", ctx.tol(1e-9), res);
    }

    // 5..7: closed form entries equal the fused matrix, l = 1, 2, 3
    for (idx, l) in [(5u64, 1usize), (6, 2), (7, 3)] {
        let name = match l {
            1 => "fused_equality_l1",
            2 => "fused_equality_l2",
            _ => "fused_equality_l3",
        };
        let res = (|| -> Result<(f64, String)> {
            let mut rng = ctx.rng(suite, idx);
            let ctxb = BracketCtx::new(p, policy)?;
            let mut worst = 0.0f64;
            for _ in 0..2 {
                let u = sample_generic_point(&mut rng);
                let s = sample_dynamical(&mut rng, &ctxb, &[2.0, -2.0, 3.0, -3.0])?;
                let fused = fuse_r(l, u, s, &p, false, policy, Gauge::RepL)?.full_matrix();
                let closed = closed_form_r1l(l, u, s, &p, false, policy, Gauge::RepL)?.full_matrix();
                let scale = closed.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
                for (x, y) in fused.iter().zip(closed.iter()) {
                    worst = worst.max((x - y).norm() / scale);
                }
            }
            Ok((worst, format!("l = {l}, 2 samples")))
        })();
        push_check(&mut out, suite, name, "l-entries-vs-fused-r", ctx.tol(1e-8), res);
    }

    // 8: bigrading relation f(P+h) L = L f(P+h-e1)
    let res = (|| -> Result<(f64, String)> {
        let mut rng = ctx.rng(suite, 8);
        let ctxb = BracketCtx::new(p, policy)?;
        let rep = EvaluationRep::new(2, Cx::new(0.1, 0.12), p)?;
        let u = sample_generic_point(&mut rng);
        let p0 = sample_dynamical(&mut rng, &ctxb, &[2.0, -2.0])?;
        let lops = l_operator(u, &rep, LMethod::ClosedForm, policy)?;
        let f = Expr::bracket_p(Cx::new(0.0, 0.0), false);
        let mut worst = 0.0f64;
        for (i1, e1) in [(0usize, 1i64), (1, -1)] {
            for i2 in 0..2usize {
                let lhs = crate::dynrep::moment_map(crate::dynrep::Side::Left, &f, &rep.module)
                    .compose(&lops[i1][i2])?;
                let f_shift = f.substitute(&Expr::p_plus(Cx::new(-e1 as f64, 0.0)), false);
                let rhs = lops[i1][i2].compose(&crate::dynrep::moment_map(
                    crate::dynrep::Side::Left,
                    &f_shift,
                    &rep.module,
                ))?;
                worst = worst.max(residual_at(&lhs, &rhs, p0, &ctxb));
            }
        }
        Ok((worst, format!("u={u}, P={p0}")))
    })();
    push_check(&mut out, suite, "bigrading", "l-entry-bigrading", ctx.tol(1e-12), res);

    // 9..12: RLL residuals for (l1, l2) in {1,2}^2
    for (idx, l1, l2) in [(9u64, 1usize, 1usize), (10, 1, 2), (11, 2, 1), (12, 2, 2)] {
        let name = format!("rll_{l1}{l2}");
        let pinned = if (l1, l2) == (1, 1) { 1e-9 } else { 1e-8 };
        let res = (|| -> Result<(f64, String)> {
            let mut rng = ctx.rng(suite, idx);
            let ctxb = BracketCtx::new(p, policy)?;
            let rep1 = EvaluationRep::new(l1, Cx::new(0.05, 0.18), p)?;
            let rep2 = EvaluationRep::new(l2, Cx::new(-0.22, 0.11), p)?;
            let mut worst = 0.0f64;
            for _ in 0..n {
                let u1 = sample_generic_point(&mut rng);
                let u2 = sample_generic_point(&mut rng);
                let p0 = sample_dynamical(&mut rng, &ctxb, &[2.0, -2.0, 3.0, -3.0])?;
                worst = worst.max(rll_residual(u1, u2, &rep1, &rep2, p0, policy)?);
            }
            Ok((worst, format!("{n} random (u1, u2, P)")))
        })();
        push_check(&mut out, suite, &name, "rll-relation", ctx.tol(pinned), res);
    }

    // 13: coinciding spectral points
    let res = (|| -> Result<(f64, String)> {
        let rep1 = EvaluationRep::new(1, Cx::new(0.05, 0.18), p)?;
        let rep2 = EvaluationRep::new(1, Cx::new(0.05, 0.18), p)?;
        let u = Cx::new(0.41, 0.23);
        Ok((
            rll_residual(u, u, &rep1, &rep2, Cx::new(1.13, 0.21), policy)?,
            "u1 = u2, identical reps".into(),
        ))
    })();
    push_check(&mut out, suite, "rll_degenerate", "rll-degenerate", ctx.tol(1e-12), res);

    out
}

// ---------------------------------------------------------------------------
// algebroid suite
// ---------------------------------------------------------------------------

fn algebroid_suite(ctx: &SuiteCtx) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    let suite = "algebroid";
    let p = ctx.params;
    let policy = ctx.policy;
    let n = ctx.cfg.samples;

    // 0: coassociativity on triple modules
    let res = (|| -> Result<(f64, String)> {
        let mut rng = ctx.rng(suite, 0);
        let ctxb = BracketCtx::new(p, policy)?;
        let ra = EvaluationRep::new(1, Cx::new(0.05, 0.12), p)?;
        let rb = EvaluationRep::new(1, Cx::new(-0.2, 0.17), p)?;
        let rc = EvaluationRep::new(1, Cx::new(0.3, 0.08), p)?;
        let mut worst = 0.0f64;
        let pts = n.min(10);
        for _ in 0..pts {
            let u = sample_generic_point(&mut rng);
            let p0 = sample_dynamical(&mut rng, &ctxb, &[2.0, -2.0, 3.0])?;
            worst = worst.max(coassociativity_residual(u, &ra, &rb, &rc, p0, policy)?);
        }
        Ok((worst, format!("{pts} random (u, P), spin-1/2 triple")))
    })();
    push_check(&mut out, suite, "coassociativity", "coassociativity", ctx.tol(1e-8), res);

    // 1: counit axiom on all four entries
    let res = (|| -> Result<(f64, String)> {
        let mut rng = ctx.rng(suite, 1);
        let ctxb = BracketCtx::new(p, policy)?;
        let rep = EvaluationRep::new(2, Cx::new(0.11, 0.14), p)?;
        let mut worst = 0.0f64;
        let pts = n.min(10);
        for _ in 0..pts {
            let u = sample_generic_point(&mut rng);
            let p0 = sample_dynamical(&mut rng, &ctxb, &[2.0, -2.0])?;
            for (e1, e2) in [(1i64, 1i64), (1, -1), (-1, 1), (-1, -1)] {
                worst = worst.max(counit_residual(e1, e2, u, &rep, p0, policy)?);
            }
        }
        Ok((worst, format!("{pts} points, four entries")))
    })();
    push_check(&mut out, suite, "counit", "counit", ctx.tol(1e-9), res);

    // 2: counit on moment maps (structural)
    let res = (|| -> Result<(f64, String)> {
        let rep = EvaluationRep::new(1, Cx::new(0.0, 0.1), p)?;
        let ok = formal_charge_checks(&rep, policy)?;
        Ok((if ok { 0.0 } else { 1.0 }, "charge bookkeeping".into()))
    })();
    push_check(&mut out, suite, "structural_charges", "counit-moment-maps", 0.0, res);

    // 3: antipode axioms
    let res = (|| -> Result<(f64, String)> {
        let mut rng = ctx.rng(suite, 3);
        let ctxb = BracketCtx::new(p, policy)?;
        let rep = EvaluationRep::new(1, Cx::new(0.07, 0.16), p)?;
        let mut worst = 0.0f64;
        let pts = n;
        for _ in 0..pts {
            let u = sample_generic_point(&mut rng);
            let p0 = sample_dynamical(&mut rng, &ctxb, &[2.0, -2.0])?;
            worst = worst.max(antipode_residual(u, &rep, p0, policy)?);
        }
        Ok((worst, format!("{pts} random (u, P)")))
    })();
    push_check(&mut out, suite, "antipode", "antipode-axioms", ctx.tol(1e-8), res);

    // 4: S preserves RLL
    let res = (|| -> Result<(f64, String)> {
        let mut rng = ctx.rng(suite, 4);
        let ctxb = BracketCtx::new(p, policy)?;
        let rep = EvaluationRep::new(1, Cx::new(0.07, 0.16), p)?;
        let mut worst = 0.0f64;
        let pts = n.min(8);
        for _ in 0..pts {
            let u1 = sample_generic_point(&mut rng);
            let u2 = sample_generic_point(&mut rng);
            let p0 = sample_dynamical(&mut rng, &ctxb, &[2.0, -2.0])?;
            worst = worst.max(s_preserves_rll_residual(u1, u2, &rep, p0, policy)?);
        }
        Ok((worst, format!("{pts} random (u1, u2, P)")))
    })();
    push_check(&mut out, suite, "s_preserves_rll", "antipode-rll", ctx.tol(1e-8), res);

    // 5: Delta preserves RLL (coproduct realization on a pair)
    let res = (|| -> Result<(f64, String)> {
        let mut rng = ctx.rng(suite, 5);
        let ctxb = BracketCtx::new(p, policy)?;
        let rep1 = EvaluationRep::new(1, Cx::new(0.05, 0.18), p)?;
        let rep2 = EvaluationRep::new(1, Cx::new(-0.22, 0.11), p)?;
        let mut worst = 0.0f64;
        let pts = n.min(10);
        for _ in 0..pts {
            let u1 = sample_generic_point(&mut rng);
            let u2 = sample_generic_point(&mut rng);
            let p0 = sample_dynamical(&mut rng, &ctxb, &[2.0, -2.0, 3.0])?;
            worst = worst.max(rll_residual(u1, u2, &rep1, &rep2, p0, policy)?);
        }
        Ok((worst, format!("{pts} points, coproduct realization")))
    })();
    push_check(&mut out, suite, "delta_preserves_rll", "coproduct-rll", ctx.tol(1e-8), res);

    // 6/7: intertwining-equation consistency, n = 1, 2
    for (idx, nn) in [(6u64, 1usize), (7, 2)] {
        let name = format!("intertwiner_n{nn}");
        let res = (|| -> Result<(f64, String)> {
            let mut rng = ctx.rng(suite, idx);
            let ctxb = BracketCtx::new(p, policy)?;
            let u1 = sample_generic_point(&mut rng);
            let u2 = sample_generic_point(&mut rng);
            let u3 = sample_generic_point(&mut rng);
            let s = sample_dynamical(&mut rng, &ctxb, &[2.0, -2.0, 3.0])?;
            Ok((
                intertwiner_consistency(nn, u1, u2, u3, s, &p, policy)?,
                "both orderings, type I and II".into(),
            ))
        })();
        push_check(&mut out, suite, &name, "intertwiner-consistency", ctx.tol(1e-8), res);
    }

    // 8: degenerate ordering
    let res = (|| -> Result<(f64, String)> {
        let mut rng = ctx.rng(suite, 8);
        let ctxb = BracketCtx::new(p, policy)?;
        let u1 = sample_generic_point(&mut rng);
        let u3 = sample_generic_point(&mut rng);
        let s = sample_dynamical(&mut rng, &ctxb, &[2.0, -2.0])?;
        Ok((
            intertwiner_consistency(1, u1, u1, u3, s, &p, policy)?,
            "coinciding spectral points".into(),
        ))
    })();
    push_check(&mut out, suite, "intertwiner_degenerate", "intertwiner-degenerate", ctx.tol(1e-12), res);

    out
}

// ---------------------------------------------------------------------------
// freefield suite
// ---------------------------------------------------------------------------

/// Free-field parameter pack derived from the configured `q`: level `k = 1`
/// with a large elliptic parameter so every exchange kernel decays.
fn freefield_params_from(cfg_params: &EllipticParams<f64>) -> Result<EllipticParams<f64>> {
    EllipticParams::new(cfg_params.q, Cx::new(3.5, 0.2), Cx::new(1.0, 0.0))
}

fn freefield_suite(ctx: &SuiteCtx) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    let suite = "freefield";
    let order = ctx.cfg.trunc.max(40);

    let params = match freefield_params_from(&ctx.params) {
        Ok(p) => p,
        Err(e) => {
            out.push(CheckRecord::errored(suite, "params", "freefield-params", &e, 0.0));
            return out;
        }
    };
    let ma = ModeAlgebra::new(params);

    // 0: alpha commutator closed form vs transformation oracle
    let res = (|| -> Result<(f64, String)> {
        let mut worst = 0.0f64;
        for n in 1..=12i64 {
            let a = ma.alpha_commutator(n, -n)?;
            let b = ma.alpha_commutator_via_transform(n, -n)?;
            worst = worst.max((a - b).norm() / a.norm().max(1e-30));
            worst = worst.max(ma.alpha_commutator(n, n + 1)?.norm());
        }
        Ok((worst, "modes 1..12".into()))
    })();
    push_check(&mut out, suite, "alpha_commutator", "alpha-mode-commutator", ctx.tol(1e-12), res);

    // 1..7: exchange relations, ten points each
    let pairs = [
        ExchangePair::EE,
        ExchangePair::FF,
        ExchangePair::KK,
        ExchangePair::KE,
        ExchangePair::KF,
        ExchangePair::HplusHminus,
        ExchangePair::HHSame,
    ];
    for (i, pair) in pairs.iter().enumerate() {
        let res = (|| -> Result<(f64, String)> {
            let mut rng = ctx.rng(suite, 1 + i as u64);
            let mut worst = 0.0f64;
            for _ in 0..10 {
                use rand::RngExt;
                let du = Cx::new(rng.random_range(-0.4..0.4), rng.random_range(0.05..0.25));
                worst = worst.max(exchange_ratio_check(*pair, du, &params, order)?);
            }
            Ok((worst, format!("10 points, N = {order}")))
        })();
        push_check(
            &mut out,
            suite,
            &format!("exchange_{}", pair.label()),
            "current-exchange",
            ctx.tol(1e-8),
            res,
        );
    }

    // 8: E-F pole and residue structure
    let res = (|| -> Result<(f64, String)> {
        let report = ef_pole_structure(&params, 10)?;
        if report.degenerate {
            return Ok((0.0, "degenerate (c = 0), skipped".into()));
        }
        let loc: f64 = if report.pole_locations_ok { 0.0 } else { 1.0 };
        Ok((loc.max(report.residue_dev), "poles at q^{+-c}, residue vs H+".into()))
    })();
    push_check(&mut out, suite, "ef_pole_structure", "ef-commutator-poles", ctx.tol(1e-8), res);

    // 9: dressing-automorphism cross-derivation of the current exponents
    let res = (|| -> Result<(f64, String)> {
        Ok((dressing_cross_check(&params, 20)?, "modes 1..20".into()))
    })();
    push_check(&mut out, suite, "dressing_cross", "dressing-automorphism", ctx.tol(1e-12), res);

    // 10: grading and charge integers
    let res = (|| -> Result<(f64, String)> {
        Ok((if grading_checks(&params) { 0.0 } else { 1.0 }, "charge integers".into()))
    })();
    push_check(&mut out, suite, "grading_charges", "current-charges", 0.0, res);

    // 11: kernel factor lists vs direct coefficients
    let res = (|| -> Result<(f64, String)> {
        use BaseCurrent::*;
        let mut worst = 0.0f64;
        for (a, b) in [(K, K), (E, E), (F, F), (K, E), (K, F), (E, F)] {
            let mut side = FactorSide::one();
            for (t, m, mult) in kernel_factor_list(a, b, &ma) {
                side.push(t, 1, &m, mult);
            }
            let log = side.formal_log_coeffs(20);
            let scale = (1..=20i64)
                .map(|nn| pair_log_coeff(a, b, nn, &ma).norm())
                .fold(1e-30f64, f64::max);
            for nn in 1..=20i64 {
                let direct = pair_log_coeff(a, b, nn, &ma);
                let res = log.get(&nn).copied().unwrap_or(Cx::new(0.0, 0.0));
                worst = worst.max((direct - res).norm() / scale);
            }
        }
        Ok((worst, "six pairs, modes 1..20".into()))
    })();
    push_check(&mut out, suite, "kernel_resummation", "kernel-resummation", ctx.tol(1e-10), res);

    out
}

/// Run the selected suites, in fixed order, into a deterministic report.
pub fn run_suites(cfg: &RunConfig) -> Result<Report> {
    let ctx = SuiteCtx::new(cfg)?;
    let mut checks = Vec::new();
    for suite in cfg.selected_suites()? {
        match suite {
            "theta" => checks.extend(theta_suite(&ctx)),
            "rmatrix" => checks.extend(rmatrix_suite(&ctx)),
            "rll" => checks.extend(rll_suite(&ctx)),
            "algebroid" => checks.extend(algebroid_suite(&ctx)),
            "freefield" => checks.extend(freefield_suite(&ctx)),
            _ => unreachable!(),
        }
    }
    Ok(Report::new(cfg.clone(), checks))
}
