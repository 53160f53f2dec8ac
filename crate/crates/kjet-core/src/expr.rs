//! Immutable symbolic expressions over the phase-space coordinates.
//!
//! Every constructor canonicalizes: sums and products are flattened and
//! sorted under a fixed total order, rational constants are folded, like
//! terms are combined, and the 0/1 identities are eliminated. Two
//! expressions that agree after canonicalization compare equal with `==`,
//! which makes syntactic equality a sound (but deliberately incomplete)
//! equality test; semantic checks are done numerically elsewhere.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::context::CoordId;

/// Named unary functions admitted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UnaryFn {
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
}

impl UnaryFn {
    pub fn name(&self) -> &'static str {
        match self {
            UnaryFn::Sqrt => "sqrt",
            UnaryFn::Exp => "exp",
            UnaryFn::Log => "log",
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
        }
    }
}

#[derive(Debug, PartialEq, Eq, Hash)]
pub(crate) enum Node {
    /// Exact rational constant.
    Const(BigRational),
    Coord(CoordId),
    /// Integer power with exponent >= 2; the base is never a constant,
    /// product, power, or quotient.
    Pow(Expr, i64),
    Func(UnaryFn, Expr),
    /// Quotient with a non-constant denominator (constant denominators fold
    /// into a product), except for the poisoned `a / 0` which is kept so the
    /// error surfaces at evaluation.
    Quot(Expr, Expr),
    /// >= 2 factors, at most one leading constant (!= 0, +-1 unless alone),
    /// non-constant factors sorted, equal bases merged into powers.
    Prod(Vec<Expr>),
    /// >= 2 terms, sorted, like terms merged, at most one constant term.
    Sum(Vec<Expr>),
}

/// An immutable, canonical symbolic expression.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

fn rank(node: &Node) -> u8 {
    match node {
        Node::Const(_) => 0,
        Node::Coord(_) => 1,
        Node::Pow(..) => 2,
        Node::Func(..) => 3,
        Node::Quot(..) => 4,
        Node::Prod(_) => 5,
        Node::Sum(_) => 6,
    }
}

impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.node(), other.node());
        rank(a).cmp(&rank(b)).then_with(|| match (a, b) {
            (Node::Const(x), Node::Const(y)) => x.cmp(y),
            (Node::Coord(x), Node::Coord(y)) => x.cmp(y),
            (Node::Pow(bx, ex), Node::Pow(by, ey)) => bx.cmp(by).then(ex.cmp(ey)),
            (Node::Func(fx, ax), Node::Func(fy, ay)) => fx.cmp(fy).then_with(|| ax.cmp(ay)),
            (Node::Quot(nx, dx), Node::Quot(ny, dy)) => nx.cmp(ny).then_with(|| dx.cmp(dy)),
            (Node::Prod(xs), Node::Prod(ys)) | (Node::Sum(xs), Node::Sum(ys)) => {
                for (x, y) in xs.iter().zip(ys.iter()) {
                    let c = x.cmp(y);
                    if c != Ordering::Equal {
                        return c;
                    }
                }
                xs.len().cmp(&ys.len())
            }
            _ => unreachable!("rank already discriminated"),
        })
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Expr {
    fn mk(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub(crate) fn node(&self) -> &Node {
        &self.0
    }

    pub fn zero() -> Expr {
        Expr::constant(BigRational::zero())
    }

    pub fn one() -> Expr {
        Expr::constant(BigRational::one())
    }

    pub fn int(v: i64) -> Expr {
        Expr::constant(BigRational::from_integer(BigInt::from(v)))
    }

    /// Exact rational `p / q`; panics on `q == 0` (constructor misuse, not a
    /// runtime input path).
    pub fn rational(p: i64, q: i64) -> Expr {
        assert!(q != 0, "rational constant with zero denominator");
        Expr::constant(BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    pub fn constant(c: BigRational) -> Expr {
        Expr::mk(Node::Const(c))
    }

    pub fn coord(c: CoordId) -> Expr {
        Expr::mk(Node::Coord(c))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.node(), Node::Const(c) if c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self.node(), Node::Const(c) if c.is_one())
    }

    pub fn as_const(&self) -> Option<&BigRational> {
        match self.node() {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Split into (rational coefficient, non-constant remainder). The
    /// remainder is `None` for pure constants. Used for like-term merging.
    fn decompose(&self) -> (BigRational, Option<Expr>) {
        match self.node() {
            Node::Const(c) => (c.clone(), None),
            Node::Prod(fs) => {
                if let Node::Const(c) = fs[0].node() {
                    let tail = &fs[1..];
                    let rest = if tail.len() == 1 {
                        tail[0].clone()
                    } else {
                        Expr::mk(Node::Prod(tail.to_vec()))
                    };
                    (c.clone(), Some(rest))
                } else {
                    (BigRational::one(), Some(self.clone()))
                }
            }
            _ => (BigRational::one(), Some(self.clone())),
        }
    }

    /// Canonical sum of already-canonical children.
    pub fn sum(children: Vec<Expr>) -> Expr {
        let mut consts = BigRational::zero();
        let mut terms: BTreeMap<Expr, BigRational> = BTreeMap::new();
        let mut stack = children;
        stack.reverse();
        while let Some(child) = stack.pop() {
            match child.node() {
                Node::Sum(cs) => {
                    for c in cs.iter().rev() {
                        stack.push(c.clone());
                    }
                }
                _ => {
                    let (coeff, rest) = child.decompose();
                    match rest {
                        None => consts += coeff,
                        Some(term) => {
                            let entry = terms.entry(term).or_insert_with(BigRational::zero);
                            *entry += coeff;
                        }
                    }
                }
            }
        }
        let mut out: Vec<Expr> = Vec::with_capacity(terms.len() + 1);
        if !consts.is_zero() {
            out.push(Expr::constant(consts));
        }
        for (term, coeff) in terms {
            if coeff.is_zero() {
                continue;
            }
            out.push(Expr::mul_const(term, &coeff));
        }
        out.sort();
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::mk(Node::Sum(out)),
        }
    }

    /// Canonical product of already-canonical factors.
    pub fn product(factors: Vec<Expr>) -> Expr {
        let mut coeff = BigRational::one();
        let mut bases: BTreeMap<Expr, i64> = BTreeMap::new();
        let mut stack = factors;
        stack.reverse();
        while let Some(factor) = stack.pop() {
            match factor.node() {
                Node::Prod(fs) => {
                    for f in fs.iter().rev() {
                        stack.push(f.clone());
                    }
                }
                Node::Const(c) => {
                    if c.is_zero() {
                        return Expr::zero();
                    }
                    coeff *= c;
                }
                Node::Pow(base, exp) => {
                    *bases.entry(base.clone()).or_insert(0) += exp;
                }
                _ => {
                    *bases.entry(factor).or_insert(0) += 1;
                }
            }
        }
        let mut parts: Vec<Expr> = Vec::with_capacity(bases.len());
        for (base, exp) in bases {
            if exp == 0 {
                continue; // x^0 -> 1 in the nonzero-base convention
            }
            let factor = Expr::pow(base, exp);
            match factor.node() {
                Node::Const(c) => coeff *= c,
                _ => parts.push(factor),
            }
        }
        // products distribute over bare sum factors, so algebraically equal
        // construction orders reach one normal form (powers of sums stay
        // unexpanded as atoms)
        if let Some(idx) = parts.iter().position(|p| matches!(p.node(), Node::Sum(_))) {
            let sum = parts.swap_remove(idx);
            let Node::Sum(terms) = sum.node() else { unreachable!() };
            let scaled = terms
                .iter()
                .map(|t| {
                    let mut factors = Vec::with_capacity(parts.len() + 2);
                    factors.push(Expr::constant(coeff.clone()));
                    factors.push(t.clone());
                    factors.extend(parts.iter().cloned());
                    Expr::product(factors)
                })
                .collect();
            return Expr::sum(scaled);
        }
        parts.sort();
        if parts.is_empty() {
            return Expr::constant(coeff);
        }
        if coeff.is_one() {
            return if parts.len() == 1 {
                parts.pop().unwrap()
            } else {
                Expr::mk(Node::Prod(parts))
            };
        }
        let mut out = Vec::with_capacity(parts.len() + 1);
        out.push(Expr::constant(coeff));
        out.extend(parts);
        Expr::mk(Node::Prod(out))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::product(vec![a, b])
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::sum(vec![a, b])
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::sum(vec![a, Expr::neg(b)])
    }

    pub fn neg(e: Expr) -> Expr {
        Expr::mul_const(e, &-BigRational::one())
    }

    pub(crate) fn mul_const(e: Expr, c: &BigRational) -> Expr {
        if c.is_one() {
            return e;
        }
        Expr::product(vec![Expr::constant(c.clone()), e])
    }

    /// Canonical integer power.
    pub fn pow(base: Expr, exp: i64) -> Expr {
        if exp == 0 {
            return Expr::one();
        }
        if exp == 1 {
            return base;
        }
        match base.node() {
            Node::Const(c) => {
                if c.is_zero() && exp < 0 {
                    // keep the pole; evaluation reports it
                    return Expr::mk(Node::Quot(Expr::one(), Expr::zero()));
                }
                Expr::constant(c.pow(exp as i32))
            }
            Node::Pow(b, e) => Expr::pow(b.clone(), e * exp),
            Node::Prod(fs) => {
                let powered = fs.iter().map(|f| Expr::pow(f.clone(), exp)).collect();
                Expr::product(powered)
            }
            Node::Quot(num, den) => {
                if exp > 0 {
                    Expr::quotient(Expr::pow(num.clone(), exp), Expr::pow(den.clone(), exp))
                } else {
                    Expr::quotient(Expr::pow(den.clone(), -exp), Expr::pow(num.clone(), -exp))
                }
            }
            _ => {
                if exp < 0 {
                    Expr::quotient(Expr::one(), Expr::pow(base, -exp))
                } else {
                    Expr::mk(Node::Pow(base, exp))
                }
            }
        }
    }

    /// Canonical quotient. Constant denominators fold into products; rational
    /// constants migrate out of numerator and denominator.
    pub fn quotient(num: Expr, den: Expr) -> Expr {
        if let Node::Const(c) = den.node() {
            if c.is_zero() {
                return Expr::mk(Node::Quot(num, den)); // poison pole
            }
            return Expr::mul_const(num, &c.recip());
        }
        if num.is_zero() {
            return Expr::zero();
        }
        // a/(b/c) = a*c/b, (a/b)/c = a/(b*c)
        if let Node::Quot(dn, dd) = den.node() {
            return Expr::quotient(Expr::mul(num, dd.clone()), dn.clone());
        }
        if let Node::Quot(nn, nd) = num.node() {
            return Expr::quotient(nn.clone(), Expr::mul(nd.clone(), den));
        }
        let (nc, nrest) = num.decompose();
        let (dc, drest) = den.decompose();
        let drest = drest.expect("constant denominator handled above");
        let scale = nc / dc;
        let num_core = nrest.unwrap_or_else(Expr::one);
        if scale.is_one() && num_core == num && drest == den {
            return Expr::mk(Node::Quot(num, den));
        }
        // rerun on the coefficient-free core; nested quotients re-fold there
        Expr::mul_const(Expr::quotient(num_core, drest), &scale)
    }

    /// Canonical function application; folds the exact special values.
    pub fn func(f: UnaryFn, arg: Expr) -> Expr {
        if let Node::Const(c) = arg.node() {
            match f {
                UnaryFn::Sqrt => {
                    if c.is_zero() {
                        return Expr::zero();
                    }
                    if !c.is_negative() {
                        let (ns, ds) = (c.numer().sqrt(), c.denom().sqrt());
                        if &ns.clone() * &ns == *c.numer() && &ds.clone() * &ds == *c.denom() {
                            return Expr::constant(BigRational::new(ns, ds));
                        }
                    }
                }
                UnaryFn::Exp => {
                    if c.is_zero() {
                        return Expr::one();
                    }
                }
                UnaryFn::Log => {
                    if c.is_one() {
                        return Expr::zero();
                    }
                }
                UnaryFn::Sin => {
                    if c.is_zero() {
                        return Expr::zero();
                    }
                }
                UnaryFn::Cos => {
                    if c.is_zero() {
                        return Expr::one();
                    }
                }
            }
        }
        Expr::mk(Node::Func(f, arg))
    }

    /// Coordinates appearing in the expression.
    pub fn coords_used(&self) -> Vec<CoordId> {
        let mut out = Vec::new();
        self.visit_coords(&mut |c| {
            if !out.contains(&c) {
                out.push(c);
            }
        });
        out.sort();
        out
    }

    /// Highest coordinate level appearing, or `None` for constants.
    pub fn max_level(&self) -> Option<usize> {
        self.coords_used().iter().map(|c| c.level).max()
    }

    fn visit_coords(&self, f: &mut impl FnMut(CoordId)) {
        match self.node() {
            Node::Const(_) => {}
            Node::Coord(c) => f(*c),
            Node::Pow(b, _) => b.visit_coords(f),
            Node::Func(_, a) => a.visit_coords(f),
            Node::Quot(a, b) => {
                a.visit_coords(f);
                b.visit_coords(f);
            }
            Node::Prod(cs) | Node::Sum(cs) => {
                for c in cs {
                    c.visit_coords(f);
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// printing (round-trips through the parser)
// ---------------------------------------------------------------------------

fn needs_parens_as_factor(e: &Expr) -> bool {
    matches!(e.node(), Node::Sum(_) | Node::Quot(..))
}

fn needs_parens_as_pow_base(e: &Expr) -> bool {
    matches!(
        e.node(),
        Node::Sum(_) | Node::Prod(_) | Node::Quot(..) | Node::Const(_)
    )
}

fn needs_parens_as_denominator(e: &Expr) -> bool {
    matches!(e.node(), Node::Sum(_) | Node::Prod(_) | Node::Quot(..))
}

fn fmt_const(c: &BigRational, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c.denom().is_one() {
        write!(f, "{}", c.numer())
    } else {
        write!(f, "{}/{}", c.numer(), c.denom())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => fmt_const(c, f),
            Node::Coord(c) => write!(f, "{c}"),
            Node::Pow(b, e) => {
                if needs_parens_as_pow_base(b) {
                    write!(f, "({b})^{e}")
                } else {
                    write!(f, "{b}^{e}")
                }
            }
            Node::Func(func, a) => write!(f, "{}({a})", func.name()),
            Node::Quot(n, d) => {
                if matches!(n.node(), Node::Sum(_)) {
                    write!(f, "({n})")?;
                } else {
                    write!(f, "{n}")?;
                }
                if needs_parens_as_denominator(d) {
                    write!(f, "/({d})")
                } else {
                    write!(f, "/{d}")
                }
            }
            Node::Prod(fs) => {
                let mut rest = fs.as_slice();
                // a leading -1 prints as a sign, other constants as c*
                if let Node::Const(c) = fs[0].node() {
                    if *c == -BigRational::one() {
                        write!(f, "-")?;
                    } else {
                        fmt_const(c, f)?;
                        write!(f, "*")?;
                    }
                    rest = &fs[1..];
                }
                for (i, factor) in rest.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    if needs_parens_as_factor(factor) {
                        write!(f, "({factor})")?;
                    } else {
                        write!(f, "{factor}")?;
                    }
                }
                Ok(())
            }
            Node::Sum(ts) => {
                for (i, term) in ts.iter().enumerate() {
                    let (coeff, rest) = term.decompose();
                    if i == 0 {
                        write!(f, "{term}")?;
                    } else if coeff.is_negative() {
                        let flipped = Expr::mul_const(
                            rest.map_or(Expr::one(), |r| r),
                            &-coeff,
                        );
                        write!(f, " - {flipped}")?;
                    } else {
                        write!(f, " + {term}")?;
                    }
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::CoordId;

    fn y(m: usize, i: usize) -> Expr {
        Expr::coord(CoordId::velocity(m, i))
    }

    fn x(i: usize) -> Expr {
        Expr::coord(CoordId::base(i))
    }

    #[test]
    fn identities_fold() {
        let u = y(1, 1);
        assert_eq!(Expr::add(u.clone(), Expr::zero()), u);
        assert_eq!(Expr::mul(u.clone(), Expr::one()), u);
        assert!(Expr::mul(u.clone(), Expr::zero()).is_zero());
        assert!(Expr::pow(u.clone(), 0).is_one());
        assert_eq!(Expr::pow(u.clone(), 1), u);
    }

    #[test]
    fn like_terms_cancel() {
        let u = y(1, 1);
        let e = Expr::sub(
            Expr::mul(x(1), u.clone()),
            Expr::mul(u.clone(), x(1)),
        );
        assert!(e.is_zero());
        let two_u = Expr::add(u.clone(), u.clone());
        assert_eq!(two_u, Expr::mul_const(u, &BigRational::from_integer(2.into())));
    }

    #[test]
    fn powers_merge_in_products() {
        let u = y(1, 1);
        let e = Expr::mul(u.clone(), Expr::pow(u.clone(), 2));
        assert_eq!(e, Expr::pow(u, 3));
    }

    #[test]
    fn constant_distributes_over_single_sum() {
        // (1/2)*(2v + u^2) = v + (1/2)u^2
        let u = y(1, 1);
        let v = y(2, 1);
        let inner = Expr::add(
            Expr::mul_const(v.clone(), &BigRational::from_integer(2.into())),
            Expr::pow(u.clone(), 2),
        );
        let half = BigRational::new(1.into(), 2.into());
        let lhs = Expr::mul_const(inner, &half);
        let rhs = Expr::add(v, Expr::mul_const(Expr::pow(u, 2), &half));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn quotient_by_constant_folds() {
        let u = y(1, 1);
        let q = Expr::quotient(u.clone(), Expr::int(-3));
        assert_eq!(q, Expr::mul_const(u, &BigRational::new((-1).into(), 3.into())));
        assert_eq!(Expr::quotient(Expr::int(3), Expr::int(4)), Expr::rational(3, 4));
    }

    #[test]
    fn division_by_zero_is_kept_for_evaluation() {
        let q = Expr::quotient(x(1), Expr::zero());
        assert!(matches!(q.node(), Node::Quot(..)));
    }

    #[test]
    fn negative_exponents_become_quotients() {
        let u = y(1, 1);
        assert_eq!(
            Expr::pow(u.clone(), -2),
            Expr::quotient(Expr::one(), Expr::pow(u, 2))
        );
    }

    #[test]
    fn sqrt_folds_perfect_squares() {
        assert_eq!(Expr::func(UnaryFn::Sqrt, Expr::rational(4, 9)), Expr::rational(2, 3));
        let kept = Expr::func(UnaryFn::Sqrt, Expr::int(2));
        assert!(matches!(kept.node(), Node::Func(UnaryFn::Sqrt, _)));
    }

    #[test]
    fn display_matches_expected_forms() {
        let u = y(1, 1);
        let v = y(2, 1);
        let g = Expr::mul_const(u.clone(), &BigRational::new((-1).into(), 3.into()));
        assert_eq!(g.to_string(), "-1/3*y(1,1)");
        let half = BigRational::new(1.into(), 2.into());
        let m2 = Expr::add(v, Expr::mul_const(Expr::pow(u, 2), &half));
        assert_eq!(m2.to_string(), "y(2,1) + 1/2*y(1,1)^2");
    }
}
