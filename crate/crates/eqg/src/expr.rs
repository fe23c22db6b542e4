//! Expression trees in the dynamical parameter `P`.
//!
//! Operator entries are expressions over bracket/power primitives rather than
//! baked-in numbers, because composition must evaluate entries at shifted
//! arguments (`P + integer`) exactly. Numeric evaluation happens only at
//! check time, at generic sampled `P`.

use crate::qseries::BracketCtx;
use crate::scalar::Cx;
use std::fmt;
use std::rc::Rc;

/// A scalar function of the dynamical variable `P` (and formally of `r*`).
#[derive(Debug, Clone)]
pub enum Expr {
    Const(Cx),
    /// The dynamical variable.
    P,
    /// The formal level-shifted parameter `r*`; evaluates to the context's
    /// `r*` value. The left moment map substitutes `r* -> r* + c`.
    RStar,
    Add(Rc<Expr>, Rc<Expr>),
    Sub(Rc<Expr>, Rc<Expr>),
    Mul(Rc<Expr>, Rc<Expr>),
    Div(Rc<Expr>, Rc<Expr>),
    Neg(Rc<Expr>),
    /// Theta bracket `[arg]` (or `[arg]*`).
    Bracket { arg: Rc<Expr>, starred: bool },
    /// `q^{arg}` on the fixed branch.
    QPow(Rc<Expr>),
}

pub type ExprRef = Rc<Expr>;

impl Expr {
    pub fn constant(z: Cx) -> ExprRef {
        Rc::new(Expr::Const(z))
    }
    pub fn one() -> ExprRef {
        Self::constant(Cx::new(1.0, 0.0))
    }
    pub fn p() -> ExprRef {
        Rc::new(Expr::P)
    }
    /// `P + s` for a constant complex shift.
    pub fn p_plus(s: Cx) -> ExprRef {
        if s.norm() == 0.0 {
            Self::p()
        } else {
            Rc::new(Expr::Add(Self::p(), Self::constant(s)))
        }
    }
    pub fn add(a: &ExprRef, b: &ExprRef) -> ExprRef {
        Rc::new(Expr::Add(a.clone(), b.clone()))
    }
    pub fn sub(a: &ExprRef, b: &ExprRef) -> ExprRef {
        Rc::new(Expr::Sub(a.clone(), b.clone()))
    }
    pub fn mul(a: &ExprRef, b: &ExprRef) -> ExprRef {
        Rc::new(Expr::Mul(a.clone(), b.clone()))
    }
    pub fn div(a: &ExprRef, b: &ExprRef) -> ExprRef {
        Rc::new(Expr::Div(a.clone(), b.clone()))
    }
    pub fn neg(a: &ExprRef) -> ExprRef {
        Rc::new(Expr::Neg(a.clone()))
    }
    /// `[arg]` or `[arg]*`.
    pub fn bracket(arg: &ExprRef, starred: bool) -> ExprRef {
        Rc::new(Expr::Bracket {
            arg: arg.clone(),
            starred,
        })
    }
    /// Bracket of `P + shift`.
    pub fn bracket_p(shift: Cx, starred: bool) -> ExprRef {
        Self::bracket(&Self::p_plus(shift), starred)
    }
    /// Bracket of a constant argument.
    pub fn bracket_const(arg: Cx, starred: bool) -> ExprRef {
        Self::bracket(&Self::constant(arg), starred)
    }
    pub fn qpow(arg: &ExprRef) -> ExprRef {
        Rc::new(Expr::QPow(arg.clone()))
    }

    /// Evaluate at numeric `P`.
    pub fn eval(&self, p: Cx, ctx: &BracketCtx) -> Cx {
        match self {
            Expr::Const(z) => *z,
            Expr::P => p,
            Expr::RStar => ctx.params.r_star,
            Expr::Add(a, b) => a.eval(p, ctx) + b.eval(p, ctx),
            Expr::Sub(a, b) => a.eval(p, ctx) - b.eval(p, ctx),
            Expr::Mul(a, b) => a.eval(p, ctx) * b.eval(p, ctx),
            Expr::Div(a, b) => a.eval(p, ctx) / b.eval(p, ctx),
            Expr::Neg(a) => -a.eval(p, ctx),
            Expr::Bracket { arg, starred } => ctx.eval(arg.eval(p, ctx), *starred),
            Expr::QPow(arg) => ctx.params.q_pow(arg.eval(p, ctx)),
        }
    }

    /// Substitute `P -> P + k` through the tree.
    pub fn shift_p(self: &Rc<Self>, k: i64) -> ExprRef {
        if k == 0 {
            return self.clone();
        }
        self.substitute(&Expr::p_plus(Cx::new(k as f64, 0.0)), false)
    }

    /// Substitute `P -> p_new`; with `level_shift` also apply `r* -> r* + c`,
    /// which turns every starred bracket into an unstarred one (`r* + c = r`).
    pub fn substitute(self: &Rc<Self>, p_new: &ExprRef, level_shift: bool) -> ExprRef {
        match &**self {
            Expr::Const(_) => self.clone(),
            Expr::P => p_new.clone(),
            Expr::RStar => self.clone(),
            Expr::Add(a, b) => Rc::new(Expr::Add(
                a.substitute(p_new, level_shift),
                b.substitute(p_new, level_shift),
            )),
            Expr::Sub(a, b) => Rc::new(Expr::Sub(
                a.substitute(p_new, level_shift),
                b.substitute(p_new, level_shift),
            )),
            Expr::Mul(a, b) => Rc::new(Expr::Mul(
                a.substitute(p_new, level_shift),
                b.substitute(p_new, level_shift),
            )),
            Expr::Div(a, b) => Rc::new(Expr::Div(
                a.substitute(p_new, level_shift),
                b.substitute(p_new, level_shift),
            )),
            Expr::Neg(a) => Rc::new(Expr::Neg(a.substitute(p_new, level_shift))),
            Expr::Bracket { arg, starred } => Rc::new(Expr::Bracket {
                arg: arg.substitute(p_new, level_shift),
                starred: *starred && !level_shift,
            }),
            Expr::QPow(arg) => Rc::new(Expr::QPow(arg.substitute(p_new, level_shift))),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(z) => write!(f, "({:.4}{:+.4}i)", z.re, z.im),
            Expr::P => write!(f, "P"),
            Expr::RStar => write!(f, "r*"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "{a}*{b}"),
            Expr::Div(a, b) => write!(f, "{a}/{b}"),
            Expr::Neg(a) => write!(f, "-{a}"),
            Expr::Bracket { arg, starred } => {
                write!(f, "[{arg}]{}", if *starred { "*" } else { "" })
            }
            Expr::QPow(arg) => write!(f, "q^{{{arg}}}"),
        }
    }
}
