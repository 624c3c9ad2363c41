//! Expression trees with exact evaluation and symbolic differentiation.
//!
//! The node set is deliberately small: constants, indexed variables of three
//! kinds, sums, products, integer/rational powers, and the two absolute-power
//! forms `|e|^q` and `sign(e)·|e|^q` that close the family under
//! differentiation. `|e|^{3/2}` is C¹ with zero slope at `e = 0` and has no
//! second derivative there; second-order queries refuse rather than
//! approximate in that case.

use crate::exactla::{dot, ExactlaError, Rat, RatMatrix};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Param,
    Decision,
    Multiplier,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Rat),
    Var(VarKind, usize),
    Neg(Arc<Expr>),
    Sum(Vec<Expr>),
    Prod(Vec<Expr>),
    /// `base ^ exponent` with a rational exponent. Integer exponents evaluate
    /// exactly; fractional exponents require a nonnegative base and evaluate
    /// exactly only when the root is rational.
    Pow(Arc<Expr>, Rat),
    /// `|base|^exponent`, exponent a positive rational.
    AbsPow(Arc<Expr>, Rat),
    /// `sign(base)·|base|^exponent`; arises as the derivative of `AbsPow`.
    SgnAbsPow(Arc<Expr>, Rat),
}

/// Errors from evaluation and differentiation.
#[derive(Debug, Clone, thiserror::Error)]
pub enum FuncError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("second-order derivative unavailable: {0}")]
    SecondOrderUnavailable(String),
    #[error("exact value not representable: {0}")]
    NotExact(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Exact(#[from] ExactlaError),
}

pub type Result<T> = std::result::Result<T, FuncError>;

/// Evaluation result: exact rational when representable, otherwise a flagged
/// high-precision float.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Exact(Rat),
    Approx(f64),
}

impl Scalar {
    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(r) => crate::exactla::to_f64(r),
            Scalar::Approx(x) => *x,
        }
    }

    pub fn exact(&self) -> Option<&Rat> {
        match self {
            Scalar::Exact(r) => Some(r),
            Scalar::Approx(_) => None,
        }
    }
}

/// Evaluation point split by variable kind.
#[derive(Debug, Clone, Default)]
pub struct EvalPoint {
    pub params: Vec<Rat>,
    pub decisions: Vec<Rat>,
    pub multipliers: Vec<Rat>,
}

impl EvalPoint {
    pub fn new(params: Vec<Rat>, decisions: Vec<Rat>) -> Self {
        EvalPoint {
            params,
            decisions,
            multipliers: vec![],
        }
    }

    fn get(&self, kind: VarKind, idx: usize) -> Option<&Rat> {
        match kind {
            VarKind::Param => self.params.get(idx),
            VarKind::Decision => self.decisions.get(idx),
            VarKind::Multiplier => self.multipliers.get(idx),
        }
    }
}

/// Float evaluation point (sampling probe only).
#[derive(Debug, Clone, Default)]
pub struct EvalPointF {
    pub params: Vec<f64>,
    pub decisions: Vec<f64>,
    pub multipliers: Vec<f64>,
}

impl EvalPointF {
    fn get(&self, kind: VarKind, idx: usize) -> Option<f64> {
        match kind {
            VarKind::Param => self.params.get(idx).copied(),
            VarKind::Decision => self.decisions.get(idx).copied(),
            VarKind::Multiplier => self.multipliers.get(idx).copied(),
        }
    }
}

/// Exact q-th power of a nonnegative rational, if it is rational.
fn rat_pow_exact(base: &Rat, exp: &Rat) -> Option<Rat> {
    if exp.is_integer() {
        let e = exp.to_integer().to_i64()?;
        if base.is_zero() && e < 0 {
            return None;
        }
        return Some(rat_powi(base, e));
    }
    if base.is_negative() {
        return None;
    }
    if base.is_zero() {
        return if exp.is_positive() {
            Some(Rat::zero())
        } else {
            None
        };
    }
    // base^(p/q) with q > 0: rational iff numerator and denominator of base
    // are exact q-th powers.
    let q = exp.denom().to_u32()?;
    let root_n = nth_root_exact(base.numer(), q)?;
    let root_d = nth_root_exact(base.denom(), q)?;
    let root = Rat::new(root_n, root_d);
    let p = exp.numer().to_i64()?;
    Some(rat_powi(&root, p))
}

fn rat_powi(base: &Rat, e: i64) -> Rat {
    if e == 0 {
        return Rat::one();
    }
    let mut acc = Rat::one();
    for _ in 0..e.unsigned_abs() {
        acc *= base;
    }
    if e < 0 {
        Rat::one() / acc
    } else {
        acc
    }
}

/// Exact integer n-th root, if it exists.
fn nth_root_exact(x: &BigInt, n: u32) -> Option<BigInt> {
    if x.is_negative() {
        return None;
    }
    let r = x.nth_root(n);
    if num_traits::pow::Pow::pow(&r, n) == *x {
        Some(r)
    } else {
        None
    }
}

impl Expr {
    pub fn constant(r: Rat) -> Expr {
        Expr::Const(r)
    }

    pub fn int(n: i64) -> Expr {
        Expr::Const(crate::exactla::rint(n))
    }

    pub fn param(i: usize) -> Expr {
        Expr::Var(VarKind::Param, i)
    }

    pub fn decision(i: usize) -> Expr {
        Expr::Var(VarKind::Decision, i)
    }

    pub fn multiplier(i: usize) -> Expr {
        Expr::Var(VarKind::Multiplier, i)
    }

    pub fn add(terms: Vec<Expr>) -> Expr {
        let mut flat = Vec::new();
        let mut c = Rat::zero();
        for t in terms {
            match t {
                Expr::Const(r) => c += r,
                Expr::Sum(ts) => flat.extend(ts),
                other => flat.push(other),
            }
        }
        if !c.is_zero() {
            flat.push(Expr::Const(c));
        }
        match flat.len() {
            0 => Expr::Const(Rat::zero()),
            1 => flat.pop().unwrap(),
            _ => Expr::Sum(flat),
        }
    }

    pub fn mul(factors: Vec<Expr>) -> Expr {
        let mut flat = Vec::new();
        let mut c = Rat::one();
        for f in factors {
            match f {
                Expr::Const(r) => {
                    if r.is_zero() {
                        return Expr::Const(Rat::zero());
                    }
                    c *= r;
                }
                Expr::Prod(fs) => flat.extend(fs),
                other => flat.push(other),
            }
        }
        if flat.is_empty() {
            return Expr::Const(c);
        }
        if !c.is_one() {
            flat.insert(0, Expr::Const(c));
        }
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            Expr::Prod(flat)
        }
    }

    pub fn neg(e: Expr) -> Expr {
        match e {
            Expr::Const(r) => Expr::Const(-r),
            Expr::Neg(inner) => inner.as_ref().clone(),
            other => Expr::Neg(Arc::new(other)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::add(vec![a, Expr::neg(b)])
    }

    pub fn pow(base: Expr, exp: Rat) -> Expr {
        if exp.is_one() {
            return base;
        }
        if exp.is_zero() {
            return Expr::Const(Rat::one());
        }
        Expr::Pow(Arc::new(base), exp)
    }

    pub fn powi(base: Expr, e: i64) -> Expr {
        Expr::pow(base, crate::exactla::rint(e))
    }

    /// `|e|^{3/2}` — the only nonsmooth primitive the fixtures need.
    pub fn abs_pow_3_2(base: Expr) -> Expr {
        Expr::AbsPow(Arc::new(base), crate::exactla::rq(3, 2))
    }

    /// Scale by a rational constant.
    pub fn scale(self, c: Rat) -> Expr {
        Expr::mul(vec![Expr::Const(c), self])
    }

    pub fn eval(&self, p: &EvalPoint) -> Result<Scalar> {
        Ok(match self {
            Expr::Const(r) => Scalar::Exact(r.clone()),
            Expr::Var(k, i) => Scalar::Exact(
                p.get(*k, *i)
                    .ok_or_else(|| FuncError::Dimension(format!("variable {k:?}[{i}] out of range")))?
                    .clone(),
            ),
            Expr::Neg(e) => match e.eval(p)? {
                Scalar::Exact(r) => Scalar::Exact(-r),
                Scalar::Approx(x) => Scalar::Approx(-x),
            },
            Expr::Sum(ts) => {
                let mut exact = Rat::zero();
                let mut approx = 0.0f64;
                let mut is_exact = true;
                for t in ts {
                    match t.eval(p)? {
                        Scalar::Exact(r) => {
                            if is_exact {
                                exact += r;
                            } else {
                                approx += crate::exactla::to_f64(&r);
                            }
                        }
                        Scalar::Approx(x) => {
                            if is_exact {
                                approx = crate::exactla::to_f64(&exact);
                                is_exact = false;
                            }
                            approx += x;
                        }
                    }
                }
                if is_exact {
                    Scalar::Exact(exact)
                } else {
                    Scalar::Approx(approx)
                }
            }
            Expr::Prod(fs) => {
                let mut exact = Rat::one();
                let mut approx = 1.0f64;
                let mut is_exact = true;
                for f in fs {
                    match f.eval(p)? {
                        Scalar::Exact(r) => {
                            if is_exact {
                                exact *= r;
                            } else {
                                approx *= crate::exactla::to_f64(&r);
                            }
                        }
                        Scalar::Approx(x) => {
                            if is_exact {
                                approx = crate::exactla::to_f64(&exact);
                                is_exact = false;
                            }
                            approx *= x;
                        }
                    }
                }
                if is_exact {
                    Scalar::Exact(exact)
                } else {
                    Scalar::Approx(approx)
                }
            }
            Expr::Pow(b, e) => {
                let bv = b.eval(p)?;
                match bv {
                    Scalar::Exact(r) => {
                        if !e.is_integer() && r.is_negative() {
                            return Err(FuncError::Domain(format!(
                                "negative base {r} with fractional exponent {e}"
                            )));
                        }
                        if r.is_zero() && e.is_negative() {
                            return Err(FuncError::Domain("zero base with negative exponent".into()));
                        }
                        match rat_pow_exact(&r, e) {
                            Some(v) => Scalar::Exact(v),
                            None => Scalar::Approx(
                                crate::exactla::to_f64(&r).powf(crate::exactla::to_f64(e)),
                            ),
                        }
                    }
                    Scalar::Approx(x) => {
                        if !e.is_integer() && x < 0.0 {
                            return Err(FuncError::Domain(
                                "negative base with fractional exponent".into(),
                            ));
                        }
                        Scalar::Approx(x.powf(crate::exactla::to_f64(e)))
                    }
                }
            }
            Expr::AbsPow(b, e) => {
                let bv = b.eval(p)?;
                match bv {
                    Scalar::Exact(r) => {
                        let a = r.abs();
                        if a.is_zero() && !e.is_positive() {
                            return Err(FuncError::Domain("|0|^q with q ≤ 0".into()));
                        }
                        match rat_pow_exact(&a, e) {
                            Some(v) => Scalar::Exact(v),
                            None => Scalar::Approx(
                                crate::exactla::to_f64(&a).powf(crate::exactla::to_f64(e)),
                            ),
                        }
                    }
                    Scalar::Approx(x) => {
                        if x == 0.0 && !e.is_positive() {
                            return Err(FuncError::Domain("|0|^q with q ≤ 0".into()));
                        }
                        Scalar::Approx(x.abs().powf(crate::exactla::to_f64(e)))
                    }
                }
            }
            Expr::SgnAbsPow(b, e) => {
                let bv = b.eval(p)?;
                match bv {
                    Scalar::Exact(r) => {
                        let a = r.abs();
                        if a.is_zero() && !e.is_positive() {
                            return Err(FuncError::Domain("sign·|0|^q with q ≤ 0".into()));
                        }
                        let s: Rat = if r.is_negative() {
                            -Rat::one()
                        } else if r.is_zero() {
                            Rat::zero()
                        } else {
                            Rat::one()
                        };
                        match rat_pow_exact(&a, e) {
                            Some(v) => Scalar::Exact(s * v),
                            None => Scalar::Approx(
                                crate::exactla::to_f64(&s)
                                    * crate::exactla::to_f64(&a).powf(crate::exactla::to_f64(e)),
                            ),
                        }
                    }
                    Scalar::Approx(x) => {
                        Scalar::Approx(x.signum() * x.abs().powf(crate::exactla::to_f64(e)))
                    }
                }
            }
        })
    }

    pub fn eval_f64(&self, p: &EvalPointF) -> Result<f64> {
        Ok(match self {
            Expr::Const(r) => crate::exactla::to_f64(r),
            Expr::Var(k, i) => p
                .get(*k, *i)
                .ok_or_else(|| FuncError::Dimension(format!("variable {k:?}[{i}] out of range")))?,
            Expr::Neg(e) => -e.eval_f64(p)?,
            Expr::Sum(ts) => {
                let mut s = 0.0;
                for t in ts {
                    s += t.eval_f64(p)?;
                }
                s
            }
            Expr::Prod(fs) => {
                let mut s = 1.0;
                for f in fs {
                    s *= f.eval_f64(p)?;
                }
                s
            }
            Expr::Pow(b, e) => {
                let x = b.eval_f64(p)?;
                let ef = crate::exactla::to_f64(e);
                if e.is_integer() {
                    x.powi(ef as i32)
                } else {
                    x.powf(ef)
                }
            }
            Expr::AbsPow(b, e) => b.eval_f64(p)?.abs().powf(crate::exactla::to_f64(e)),
            Expr::SgnAbsPow(b, e) => {
                let x = b.eval_f64(p)?;
                x.signum() * x.abs().powf(crate::exactla::to_f64(e))
            }
        })
    }

    /// Symbolic partial derivative with respect to variable `(kind, idx)`.
    ///
    /// `AbsPow(e, q)` differentiates to `q·sign(e)|e|^{q-1}·e'`, which is the
    /// everywhere-defined C¹ derivative when `q > 1`.
    pub fn derivative(&self, kind: VarKind, idx: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(Rat::zero()),
            Expr::Var(k, i) => {
                if *k == kind && *i == idx {
                    Expr::Const(Rat::one())
                } else {
                    Expr::Const(Rat::zero())
                }
            }
            Expr::Neg(e) => Expr::neg(e.derivative(kind, idx)),
            Expr::Sum(ts) => Expr::add(ts.iter().map(|t| t.derivative(kind, idx)).collect()),
            Expr::Prod(fs) => {
                let mut terms = Vec::new();
                for (i, f) in fs.iter().enumerate() {
                    let df = f.derivative(kind, idx);
                    if matches!(&df, Expr::Const(c) if c.is_zero()) {
                        continue;
                    }
                    let mut factors = vec![df];
                    for (j, g) in fs.iter().enumerate() {
                        if j != i {
                            factors.push(g.clone());
                        }
                    }
                    terms.push(Expr::mul(factors));
                }
                Expr::add(terms)
            }
            Expr::Pow(b, e) => {
                let db = b.derivative(kind, idx);
                if matches!(&db, Expr::Const(c) if c.is_zero()) {
                    return Expr::Const(Rat::zero());
                }
                Expr::mul(vec![
                    Expr::Const(e.clone()),
                    Expr::pow(b.as_ref().clone(), e - Rat::one()),
                    db,
                ])
            }
            Expr::AbsPow(b, e) => {
                let db = b.derivative(kind, idx);
                if matches!(&db, Expr::Const(c) if c.is_zero()) {
                    return Expr::Const(Rat::zero());
                }
                Expr::mul(vec![
                    Expr::Const(e.clone()),
                    Expr::SgnAbsPow(b.clone(), e - Rat::one()),
                    db,
                ])
            }
            Expr::SgnAbsPow(b, e) => {
                let db = b.derivative(kind, idx);
                if matches!(&db, Expr::Const(c) if c.is_zero()) {
                    return Expr::Const(Rat::zero());
                }
                Expr::mul(vec![
                    Expr::Const(e.clone()),
                    Expr::AbsPow(b.clone(), e - Rat::one()),
                    db,
                ])
            }
        }
    }

    /// True if the expression mentions the given variable.
    pub fn uses_var(&self, kind: VarKind, idx: usize) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(k, i) => *k == kind && *i == idx,
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::AbsPow(e, _) | Expr::SgnAbsPow(e, _) => {
                e.uses_var(kind, idx)
            }
            Expr::Sum(ts) | Expr::Prod(ts) => ts.iter().any(|t| t.uses_var(kind, idx)),
        }
    }

    /// Substitute constants for the parameter variables.
    pub fn substitute_params(&self, values: &[Rat]) -> Expr {
        match self {
            Expr::Const(r) => Expr::Const(r.clone()),
            Expr::Var(VarKind::Param, i) => Expr::Const(values[*i].clone()),
            Expr::Var(k, i) => Expr::Var(*k, *i),
            Expr::Neg(e) => Expr::neg(e.substitute_params(values)),
            Expr::Sum(ts) => Expr::add(ts.iter().map(|t| t.substitute_params(values)).collect()),
            Expr::Prod(ts) => Expr::mul(ts.iter().map(|t| t.substitute_params(values)).collect()),
            Expr::Pow(e, q) => Expr::Pow(Arc::new(e.substitute_params(values)), q.clone()),
            Expr::AbsPow(e, q) => Expr::AbsPow(Arc::new(e.substitute_params(values)), q.clone()),
            Expr::SgnAbsPow(e, q) => {
                Expr::SgnAbsPow(Arc::new(e.substitute_params(values)), q.clone())
            }
        }
    }

    /// Rewrite variables through `f`; used to reindex parameters or lift
    /// multiplier variables into the decision block.
    pub fn map_vars(&self, f: &impl Fn(VarKind, usize) -> (VarKind, usize)) -> Expr {
        match self {
            Expr::Const(r) => Expr::Const(r.clone()),
            Expr::Var(k, i) => {
                let (nk, ni) = f(*k, *i);
                Expr::Var(nk, ni)
            }
            Expr::Neg(e) => Expr::Neg(Arc::new(e.map_vars(f))),
            Expr::Sum(ts) => Expr::Sum(ts.iter().map(|t| t.map_vars(f)).collect()),
            Expr::Prod(ts) => Expr::Prod(ts.iter().map(|t| t.map_vars(f)).collect()),
            Expr::Pow(e, q) => Expr::Pow(Arc::new(e.map_vars(f)), q.clone()),
            Expr::AbsPow(e, q) => Expr::AbsPow(Arc::new(e.map_vars(f)), q.clone()),
            Expr::SgnAbsPow(e, q) => Expr::SgnAbsPow(Arc::new(e.map_vars(f)), q.clone()),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(r) => write!(f, "{r}"),
            Expr::Var(VarKind::Param, i) => write!(f, "p{}", i + 1),
            Expr::Var(VarKind::Decision, i) => write!(f, "x{}", i + 1),
            Expr::Var(VarKind::Multiplier, i) => write!(f, "y{}", i + 1),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Sum(ts) => {
                write!(f, "(")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
            Expr::Prod(ts) => {
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    write!(f, "({t})")?;
                }
                Ok(())
            }
            Expr::Pow(b, e) => write!(f, "({b})^({e})"),
            Expr::AbsPow(b, e) => write!(f, "abs({b})^({e})"),
            Expr::SgnAbsPow(b, e) => write!(f, "sgn({b})*abs({b})^({e})"),
        }
    }
}

/// A vector-valued function of parameters and decisions.
#[derive(Debug, Clone)]
pub struct FuncVec {
    pub components: Vec<Expr>,
    pub param_dim: usize,
    pub decision_dim: usize,
    pub multiplier_dim: usize,
}

/// Differentiation target for [`FuncVec::jacobian`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wrt {
    Param,
    Decision,
    /// Parameters first, then decisions.
    Both,
}

impl FuncVec {
    pub fn new(components: Vec<Expr>, param_dim: usize, decision_dim: usize) -> Self {
        FuncVec {
            components,
            param_dim,
            decision_dim,
            multiplier_dim: 0,
        }
    }

    pub fn out_dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, p: &EvalPoint) -> Result<Vec<Scalar>> {
        self.components.iter().map(|c| c.eval(p)).collect()
    }

    pub fn eval_exact(&self, p: &EvalPoint) -> Result<Vec<Rat>> {
        self.eval(p)?
            .into_iter()
            .map(|s| match s {
                Scalar::Exact(r) => Ok(r),
                Scalar::Approx(x) => Err(FuncError::NotExact(format!(
                    "component evaluated to irrational value ≈ {x}"
                ))),
            })
            .collect()
    }

    pub fn eval_f64(&self, p: &EvalPointF) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.eval_f64(p)).collect()
    }

    fn var_list(&self, wrt: Wrt) -> Vec<(VarKind, usize)> {
        match wrt {
            Wrt::Param => (0..self.param_dim).map(|i| (VarKind::Param, i)).collect(),
            Wrt::Decision => (0..self.decision_dim)
                .map(|i| (VarKind::Decision, i))
                .collect(),
            Wrt::Both => (0..self.param_dim)
                .map(|i| (VarKind::Param, i))
                .chain((0..self.decision_dim).map(|i| (VarKind::Decision, i)))
                .collect(),
        }
    }

    /// Exact Jacobian at a rational point.
    pub fn jacobian(&self, p: &EvalPoint, wrt: Wrt) -> Result<RatMatrix> {
        let vars = self.var_list(wrt);
        let mut rows = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let mut row = Vec::with_capacity(vars.len());
            for (k, i) in &vars {
                let d = c.derivative(*k, *i);
                match d.eval(p)? {
                    Scalar::Exact(r) => row.push(r),
                    Scalar::Approx(x) => {
                        return Err(FuncError::NotExact(format!(
                            "derivative evaluated to irrational value ≈ {x}"
                        )))
                    }
                }
            }
            rows.push(row);
        }
        Ok(RatMatrix::from_rows(rows)?)
    }

    /// Float Jacobian (probe only).
    pub fn jacobian_f64(&self, p: &EvalPointF, wrt: Wrt) -> Result<Vec<Vec<f64>>> {
        let vars = self.var_list(wrt);
        let mut rows = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let mut row = Vec::with_capacity(vars.len());
            for (k, i) in &vars {
                row.push(c.derivative(*k, *i).eval_f64(p)?);
            }
            rows.push(row);
        }
        Ok(rows)
    }

    /// Exact Hessian of `⟨λ, f⟩` in the joint (param, decision) variables.
    ///
    /// Components with zero weight are skipped, so a nonsmooth term only
    /// fails the query if its weight is active.
    pub fn hessian_form(&self, lambda: &[Rat], p: &EvalPoint) -> Result<RatMatrix> {
        if lambda.len() != self.components.len() {
            return Err(FuncError::Dimension("hessian_form: weight length".into()));
        }
        let vars = self.var_list(Wrt::Both);
        let n = vars.len();
        let mut h = RatMatrix::zeros(n, n);
        for (ci, comp) in self.components.iter().enumerate() {
            if lambda[ci].is_zero() {
                continue;
            }
            // First derivatives once, then the lower triangle of seconds.
            let firsts: Vec<Expr> = vars.iter().map(|(k, i)| comp.derivative(*k, *i)).collect();
            for a in 0..n {
                for b in 0..=a {
                    let (k, i) = vars[b];
                    let second = firsts[a].derivative(k, i);
                    let val = match second.eval(p) {
                        Ok(Scalar::Exact(r)) => r,
                        Ok(Scalar::Approx(x)) => {
                            return Err(FuncError::NotExact(format!(
                                "second derivative irrational ≈ {x}"
                            )))
                        }
                        Err(FuncError::Domain(msg)) => {
                            return Err(FuncError::SecondOrderUnavailable(format!(
                                "component {} is not twice differentiable here: {msg}",
                                ci + 1
                            )))
                        }
                        Err(e) => return Err(e),
                    };
                    let w = &lambda[ci] * &val;
                    let cur = h.get(a, b).clone();
                    h.set(a, b, &cur + &w);
                    if a != b {
                        let cur = h.get(b, a).clone();
                        h.set(b, a, &cur + &w);
                    }
                }
            }
        }
        Ok(h)
    }

    /// Evaluate the quadratic form `⟨H z, z⟩` of [`hessian_form`].
    pub fn hessian_quadratic(&self, lambda: &[Rat], p: &EvalPoint, z: &[Rat]) -> Result<Rat> {
        let h = self.hessian_form(lambda, p)?;
        let hz = h.mat_vec(z)?;
        Ok(dot(&hz, z))
    }

    /// Pre-differentiate once for repeated float evaluation in sampling
    /// loops.
    pub fn compile_f64(&self) -> CompiledFunc {
        let vars = self.var_list(Wrt::Both);
        let derivs = self
            .components
            .iter()
            .map(|c| vars.iter().map(|(k, i)| c.derivative(*k, *i)).collect())
            .collect();
        CompiledFunc {
            components: self.components.clone(),
            derivs,
            param_dim: self.param_dim,
        }
    }
}

/// A [`FuncVec`] with symbolic derivatives precomputed, for hot float loops.
pub struct CompiledFunc {
    components: Vec<Expr>,
    derivs: Vec<Vec<Expr>>,
    param_dim: usize,
}

impl CompiledFunc {
    pub fn eval(&self, p: &EvalPointF) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.eval_f64(p)).collect()
    }

    /// Jacobian rows over the joint (param, decision) variables.
    pub fn jac(&self, p: &EvalPointF) -> Result<Vec<Vec<f64>>> {
        self.derivs
            .iter()
            .map(|row| row.iter().map(|d| d.eval_f64(p)).collect())
            .collect()
    }

    /// Decision-block columns of [`CompiledFunc::jac`].
    pub fn jac_decision(&self, p: &EvalPointF) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .jac(p)?
            .into_iter()
            .map(|row| row[self.param_dim..].to_vec())
            .collect())
    }
}
