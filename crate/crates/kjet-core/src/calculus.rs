//! Exact differentiation, numeric evaluation, and substitution.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;

use crate::context::{Context, CoordId};
use crate::error::{Error, Result};
use crate::expr::{Expr, Node, UnaryFn};

impl Expr {
    /// Exact partial derivative with respect to `v`. Total on every
    /// expression; domain issues (e.g. the derivative of `sqrt` at 0)
    /// surface at evaluation time.
    pub fn differentiate(&self, v: CoordId) -> Expr {
        match self.node() {
            Node::Const(_) => Expr::zero(),
            Node::Coord(c) => {
                if *c == v {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Sum(ts) => Expr::sum(ts.iter().map(|t| t.differentiate(v)).collect()),
            Node::Prod(fs) => {
                let mut terms = Vec::with_capacity(fs.len());
                for (i, f) in fs.iter().enumerate() {
                    let df = f.differentiate(v);
                    if df.is_zero() {
                        continue;
                    }
                    let mut factors: Vec<Expr> = Vec::with_capacity(fs.len());
                    factors.extend(fs.iter().take(i).cloned());
                    factors.push(df);
                    factors.extend(fs.iter().skip(i + 1).cloned());
                    terms.push(Expr::product(factors));
                }
                Expr::sum(terms)
            }
            Node::Pow(base, exp) => {
                let db = base.differentiate(v);
                if db.is_zero() {
                    return Expr::zero();
                }
                let scaled = Expr::product(vec![Expr::pow(base.clone(), exp - 1), db]);
                Expr::mul(Expr::int(*exp), scaled)
            }
            Node::Quot(num, den) => {
                let dn = num.differentiate(v);
                let dd = den.differentiate(v);
                if dd.is_zero() {
                    return Expr::quotient(dn, den.clone());
                }
                let top = Expr::sub(
                    Expr::mul(dn, den.clone()),
                    Expr::mul(num.clone(), dd),
                );
                Expr::quotient(top, Expr::pow(den.clone(), 2))
            }
            Node::Func(f, arg) => {
                let da = arg.differentiate(v);
                if da.is_zero() {
                    return Expr::zero();
                }
                match f {
                    UnaryFn::Sqrt => Expr::quotient(
                        da,
                        Expr::mul(Expr::int(2), Expr::func(UnaryFn::Sqrt, arg.clone())),
                    ),
                    UnaryFn::Exp => Expr::mul(da, Expr::func(UnaryFn::Exp, arg.clone())),
                    UnaryFn::Log => Expr::quotient(da, arg.clone()),
                    UnaryFn::Sin => Expr::mul(da, Expr::func(UnaryFn::Cos, arg.clone())),
                    UnaryFn::Cos => {
                        Expr::neg(Expr::mul(da, Expr::func(UnaryFn::Sin, arg.clone())))
                    }
                }
            }
        }
    }

    /// Evaluate over a slot-ordered coordinate vector (see
    /// [`Context::slot_of`]). Reports poles and domain violations.
    pub fn evaluate_slots(&self, ctx: Context, slots: &[f64]) -> Result<f64> {
        if slots.len() != ctx.slots() {
            return Err(Error::ShapeMismatch(format!(
                "state has {} slots, context needs {}",
                slots.len(),
                ctx.slots()
            )));
        }
        self.eval_inner(ctx, slots)
    }

    fn eval_inner(&self, ctx: Context, slots: &[f64]) -> Result<f64> {
        match self.node() {
            Node::Const(c) => c
                .to_f64()
                .ok_or_else(|| Error::Eval("constant overflows f64".to_string())),
            Node::Coord(c) => {
                ctx.check(*c)?;
                Ok(slots[ctx.slot_of(*c)])
            }
            Node::Sum(ts) => {
                let mut acc = 0.0;
                for t in ts {
                    acc += t.eval_inner(ctx, slots)?;
                }
                Ok(acc)
            }
            Node::Prod(fs) => {
                let mut acc = 1.0;
                for f in fs {
                    acc *= f.eval_inner(ctx, slots)?;
                }
                Ok(acc)
            }
            Node::Pow(base, exp) => {
                let b = base.eval_inner(ctx, slots)?;
                if b == 0.0 && *exp < 0 {
                    return Err(Error::Eval("zero raised to a negative power".to_string()));
                }
                Ok(b.powi(*exp as i32))
            }
            Node::Quot(num, den) => {
                let d = den.eval_inner(ctx, slots)?;
                if d == 0.0 {
                    return Err(Error::Eval("division by zero".to_string()));
                }
                Ok(num.eval_inner(ctx, slots)? / d)
            }
            Node::Func(f, arg) => {
                let a = arg.eval_inner(ctx, slots)?;
                match f {
                    UnaryFn::Sqrt => {
                        if a < 0.0 {
                            Err(Error::Eval(format!("sqrt of negative value {a}")))
                        } else {
                            Ok(a.sqrt())
                        }
                    }
                    UnaryFn::Exp => Ok(a.exp()),
                    UnaryFn::Log => {
                        if a <= 0.0 {
                            Err(Error::Eval(format!("log of non-positive value {a}")))
                        } else {
                            Ok(a.ln())
                        }
                    }
                    UnaryFn::Sin => Ok(a.sin()),
                    UnaryFn::Cos => Ok(a.cos()),
                }
            }
        }
    }

    /// Simultaneous substitution of coordinates by expressions, then
    /// canonicalization. Binding keys must be valid in `ctx`.
    pub fn substitute(&self, bindings: &BTreeMap<CoordId, Expr>, ctx: Context) -> Result<Expr> {
        for key in bindings.keys() {
            ctx.check(*key)?;
        }
        Ok(self.subst_inner(bindings))
    }

    fn subst_inner(&self, bindings: &BTreeMap<CoordId, Expr>) -> Expr {
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Coord(c) => bindings.get(c).cloned().unwrap_or_else(|| self.clone()),
            Node::Sum(ts) => Expr::sum(ts.iter().map(|t| t.subst_inner(bindings)).collect()),
            Node::Prod(fs) => {
                Expr::product(fs.iter().map(|f| f.subst_inner(bindings)).collect())
            }
            Node::Pow(base, exp) => Expr::pow(base.subst_inner(bindings), *exp),
            Node::Quot(num, den) => {
                Expr::quotient(num.subst_inner(bindings), den.subst_inner(bindings))
            }
            Node::Func(f, arg) => Expr::func(*f, arg.subst_inner(bindings)),
        }
    }
}

/// Central finite difference in the coordinate `v`, the independent oracle
/// used against symbolic derivatives throughout the test suites.
pub fn central_difference(
    e: &Expr,
    v: CoordId,
    ctx: Context,
    slots: &[f64],
    h: f64,
) -> Result<f64> {
    let slot = ctx.slot_of(v);
    let mut plus = slots.to_vec();
    let mut minus = slots.to_vec();
    plus[slot] += h;
    minus[slot] -= h;
    Ok((e.evaluate_slots(ctx, &plus)? - e.evaluate_slots(ctx, &minus)?) / (2.0 * h))
}
