//! Bigraded dynamical operators over weight modules.
//!
//! An operator is stored as a matrix of `P`-expressions together with an
//! `e^{bQ}` charge, in the normal form "entry functions to the left of the
//! charge":
//!
//! ```text
//! X = sum_{ij} f_ij(P) E_ij e^{bQ},      X (f(P) v) = f(P + b) X(v).
//! ```
//!
//! Composition evaluates the right factor at the left factor's charge shift,
//! `(A B)_{il}(P) = sum_j A_ij(P) B_jl(P + b_A)`, which realizes the shift
//! semantics `mu_r(f) X = X mu_r(T_beta f)` with `beta = -bQ`. The twisted
//! tensor product transports right-moment-map factors of the left slot onto
//! the right slot: entries `x_{i'i}(P + nu_{j'}) y_{j'j}(P)` with `nu_{j'}`
//! the weight of the out-state in the right slot, and the composite charge is
//! the right slot's charge (the outer grading of the tensor product).

use crate::error::EqgError;
use crate::expr::{Expr, ExprRef};
use crate::qseries::BracketCtx;
use crate::scalar::Cx;
use crate::Result;
use std::rc::Rc;

/// A finite weight module: `h`-eigenvalues per basis vector. For the spin
/// module `V^(l)` the basis is `v^l_m`, `m = 0..l`, with weight `l - 2m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightModule {
    pub weights: Vec<i64>,
}

impl WeightModule {
    pub fn spin(l: usize) -> Rc<Self> {
        Rc::new(Self {
            weights: (0..=l).map(|m| l as i64 - 2 * m as i64).collect(),
        })
    }

    /// One-dimensional weight-zero module (the shift-operator slot).
    pub fn trivial() -> Rc<Self> {
        Rc::new(Self { weights: vec![0] })
    }

    pub fn tensor(a: &Self, b: &Self) -> Rc<Self> {
        let mut weights = Vec::with_capacity(a.dim() * b.dim());
        for &wa in &a.weights {
            for &wb in &b.weights {
                weights.push(wa + wb);
            }
        }
        Rc::new(Self { weights })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

/// Which moment map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A dynamical operator on a weight module.
#[derive(Debug, Clone)]
pub struct DynamicalOperator {
    pub module: Rc<WeightModule>,
    /// Dense row-major entries; `None` is an exact zero.
    pub entries: Vec<Option<ExprRef>>,
    /// `e^{bQ}` count; the beta grading is `-q_charge * Q`.
    pub q_charge: i64,
    /// `alpha = -alpha_charge * Q`; carried for shift bookkeeping in the
    /// antipode axioms.
    pub alpha_charge: i64,
}

impl DynamicalOperator {
    pub fn zero(module: &Rc<WeightModule>) -> Self {
        Self {
            module: module.clone(),
            entries: vec![None; module.dim() * module.dim()],
            q_charge: 0,
            alpha_charge: 0,
        }
    }

    pub fn identity(module: &Rc<WeightModule>) -> Self {
        let mut op = Self::zero(module);
        for i in 0..module.dim() {
            op.set(i, i, Expr::one());
        }
        op
    }

    /// Identity matrix with charges: the realized image of `e^{nQ}`.
    pub fn charge_unit(module: &Rc<WeightModule>, n: i64) -> Self {
        let mut op = Self::identity(module);
        op.q_charge = n;
        op.alpha_charge = n;
        op
    }

    /// The operator "multiplication by P" (diagonal, zero charge).
    pub fn p_variable(module: &Rc<WeightModule>) -> Self {
        let mut op = Self::zero(module);
        for i in 0..module.dim() {
            op.set(i, i, Expr::p());
        }
        op
    }

    pub fn dim(&self) -> usize {
        self.module.dim()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Option<&ExprRef> {
        self.entries[row * self.dim() + col].as_ref()
    }

    pub fn set(&mut self, row: usize, col: usize, e: ExprRef) {
        let d = self.dim();
        self.entries[row * d + col] = Some(e);
    }

    pub fn with_charges(mut self, q_charge: i64, alpha_charge: i64) -> Self {
        self.q_charge = q_charge;
        self.alpha_charge = alpha_charge;
        self
    }

    /// Left multiplication by a scalar `P`-function (zero charge, zero weight).
    pub fn scale(&self, g: &ExprRef) -> Self {
        let mut out = self.clone();
        for e in out.entries.iter_mut() {
            if let Some(x) = e {
                *e = Some(Expr::mul(g, x));
            }
        }
        out
    }

    pub fn scale_const(&self, c: Cx) -> Self {
        self.scale(&Expr::constant(c))
    }

    /// Operator product `self * rhs` with shift-aware evaluation.
    pub fn compose(&self, rhs: &Self) -> Result<Self> {
        if !Rc::ptr_eq(&self.module, &rhs.module) && self.module != rhs.module {
            return Err(EqgError::DimMismatch(format!(
                "compose: {} vs {}",
                self.dim(),
                rhs.dim()
            )));
        }
        let d = self.dim();
        let mut out = Self::zero(&self.module);
        out.q_charge = self.q_charge + rhs.q_charge;
        out.alpha_charge = self.alpha_charge + rhs.alpha_charge;
        for i in 0..d {
            for l in 0..d {
                let mut acc: Option<ExprRef> = None;
                for j in 0..d {
                    if let (Some(a), Some(b)) = (self.get(i, j), self.get_of(rhs, j, l)) {
                        let term = Expr::mul(a, &b.shift_p(self.q_charge));
                        acc = Some(match acc {
                            None => term,
                            Some(s) => Expr::add(&s, &term),
                        });
                    }
                }
                out.entries[i * d + l] = acc;
            }
        }
        Ok(out)
    }

    #[inline]
    fn get_of<'a>(&self, rhs: &'a Self, row: usize, col: usize) -> Option<&'a ExprRef> {
        rhs.entries[row * rhs.dim() + col].as_ref()
    }

    /// Sum of operators with identical charges.
    pub fn add(&self, rhs: &Self) -> Result<Self> {
        if self.module != rhs.module {
            return Err(EqgError::DimMismatch("add: module mismatch".into()));
        }
        if self.q_charge != rhs.q_charge || self.alpha_charge != rhs.alpha_charge {
            return Err(EqgError::DimMismatch(format!(
                "add: charge mismatch ({},{}) vs ({},{})",
                self.alpha_charge, self.q_charge, rhs.alpha_charge, rhs.q_charge
            )));
        }
        let mut out = self.clone();
        let d = self.dim();
        for i in 0..d * d {
            out.entries[i] = match (&out.entries[i], &rhs.entries[i]) {
                (None, None) => None,
                (Some(a), None) => Some(a.clone()),
                (None, Some(b)) => Some(b.clone()),
                (Some(a), Some(b)) => Some(Expr::add(a, b)),
            };
        }
        Ok(out)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.add(&rhs.scale_const(Cx::new(-1.0, 0.0)))
    }

    /// Numeric matrix at dynamical parameter `p0`.
    pub fn eval_at(&self, p0: Cx, ctx: &BracketCtx) -> Vec<Cx> {
        self.entries
            .iter()
            .map(|e| match e {
                None => Cx::new(0.0, 0.0),
                Some(x) => x.eval(p0, ctx),
            })
            .collect()
    }

    /// Weight selection rule: entry (i, j) may be nonzero only when
    /// `weight[i] = weight[j] + delta`. Returns the common `delta` if the
    /// operator is weight-homogeneous.
    pub fn weight_shift(&self) -> Option<i64> {
        let d = self.dim();
        let mut delta: Option<i64> = None;
        for i in 0..d {
            for j in 0..d {
                if self.get(i, j).is_some() {
                    let this = self.module.weights[i] - self.module.weights[j];
                    match delta {
                        None => delta = Some(this),
                        Some(d0) if d0 != this => return None,
                        _ => {}
                    }
                }
            }
        }
        delta.or(Some(0))
    }
}

/// Moment maps: `mu_l(f) v = f(P + mu, r* + c) v` on a weight-`mu` vector,
/// `mu_r(f) v = f(P, r*) v`. Both have zero bigrading.
pub fn moment_map(side: Side, f: &ExprRef, module: &Rc<WeightModule>) -> DynamicalOperator {
    let mut op = DynamicalOperator::zero(module);
    for i in 0..module.dim() {
        let entry = match side {
            Side::Right => f.clone(),
            Side::Left => {
                let mu = module.weights[i] as f64;
                f.substitute(&Expr::p_plus(Cx::new(mu, 0.0)), true)
            }
        };
        op.set(i, i, entry);
    }
    op
}

/// The twisted tensor product of operators on two modules, realized on the
/// tensor module. Requires (for homomorphic composition) that the left
/// factor's beta grading matches the right factor's alpha grading, which
/// holds for every coproduct term; the entry formula itself is valid for any
/// pair.
pub fn dyn_tensor(x: &DynamicalOperator, y: &DynamicalOperator) -> DynamicalOperator {
    let dx = x.dim();
    let dy = y.dim();
    let module = WeightModule::tensor(&x.module, &y.module);
    let mut out = DynamicalOperator::zero(&module);
    out.q_charge = y.q_charge;
    out.alpha_charge = x.alpha_charge;
    for ix in 0..dx {
        for jx in 0..dx {
            let Some(xe) = x.get(ix, jx) else { continue };
            for iy in 0..dy {
                for jy in 0..dy {
                    let Some(ye) = y.get(iy, jy) else { continue };
                    // x's entry functions transported past the right slot's
                    // out state: P -> P + weight(out_y)
                    let nu = y.module.weights[iy] as f64;
                    let xs = xe.substitute(&Expr::p_plus(Cx::new(nu, 0.0)), false);
                    let row = ix * dy + iy;
                    let col = jx * dy + jy;
                    out.entries[row * module.dim() + col] = Some(Expr::mul(&xs, ye));
                }
            }
        }
    }
    out
}

/// Max-norm of the difference of two operators evaluated at `p0`, normalized
/// by the larger of 1 and the max entry magnitude.
pub fn residual_at(a: &DynamicalOperator, b: &DynamicalOperator, p0: Cx, ctx: &BracketCtx) -> f64 {
    let ma = a.eval_at(p0, ctx);
    let mb = b.eval_at(p0, ctx);
    let scale = ma
        .iter()
        .chain(mb.iter())
        .map(|z| z.norm())
        .fold(1.0_f64, f64::max);
    ma.iter()
        .zip(mb.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0_f64, f64::max)
        / scale
}
