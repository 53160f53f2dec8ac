//! Recursive-descent parser for the expression grammar.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | postfix
//! postfix := atom ('^' ['-'] integer)?
//! atom    := number | 'x' '(' int ')' | 'y' '(' int ',' int ')'
//!          | func '(' expr ')' | '(' expr ')'
//! number  := digits ('.' digits)?
//! func    := sqrt | exp | log | sin | cos
//! ```
//!
//! Rational literals `p/q` come out of constant folding of the division
//! operator; decimals are converted to exact rationals.

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::context::{Context, CoordId};
use crate::error::{Error, Result};
use crate::expr::{Expr, UnaryFn};

pub fn parse_expr(text: &str, ctx: Context) -> Result<Expr> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        ctx,
    };
    p.skip_ws();
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    ctx: Context,
}

impl<'a> Parser<'a> {
    fn err(&self, message: &str) -> Error {
        Error::Syntax {
            position: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat(b'+') {
                terms.push(self.term()?);
            } else if self.eat(b'-') {
                terms.push(Expr::neg(self.term()?));
            } else {
                return Ok(Expr::sum(terms));
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(b'*') {
                acc = Expr::mul(acc, self.unary()?);
            } else if self.eat(b'/') {
                acc = Expr::quotient(acc, self.unary()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            Ok(Expr::neg(self.unary()?))
        } else {
            self.postfix()
        }
    }

    fn postfix(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let neg = self.eat(b'-');
            let exp = self.integer()?;
            let exp: i64 = exp
                .try_into()
                .map_err(|_| self.err("exponent out of range"))?;
            self.skip_ws();
            Ok(Expr::pow(base, if neg { -exp } else { exp }))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.expect(b'(')?;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(self.err("expected a number, coordinate, function, or '('")),
        }
    }

    fn integer(&mut self) -> Result<u64> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected an integer"));
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        s.parse().map_err(|_| self.err("integer out of range"))
    }

    fn number(&mut self) -> Result<Expr> {
        let int_part = self.integer()?;
        let mut value = BigRational::from_integer(BigInt::from(int_part));
        if self.peek() == Some(b'.') {
            self.pos += 1;
            let start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            if self.pos == start {
                return Err(self.err("expected digits after decimal point"));
            }
            let frac = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let numer: BigInt = frac.parse().unwrap();
            let denom = BigInt::from(10u32).pow((self.pos - start) as u32);
            value += BigRational::new(numer, denom);
        }
        self.skip_ws();
        Ok(Expr::constant(value))
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_alphabetic()) {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
        self.skip_ws();
        match name.as_str() {
            "x" => {
                self.expect(b'(')?;
                let index = self.index_value()?;
                self.expect(b')')?;
                let coord = CoordId::base(index);
                self.ctx.check(coord)?;
                Ok(Expr::coord(coord))
            }
            "y" => {
                self.expect(b'(')?;
                let level = self.index_value()?;
                self.expect(b',')?;
                let index = self.index_value()?;
                self.expect(b')')?;
                if level == 0 {
                    return Err(Error::CoordOutOfRange(
                        "y-level must be >= 1; use x(i) for level 0".to_string(),
                    ));
                }
                let coord = CoordId::velocity(level, index);
                self.ctx.check(coord)?;
                Ok(Expr::coord(coord))
            }
            "sqrt" => self.call(UnaryFn::Sqrt),
            "exp" => self.call(UnaryFn::Exp),
            "log" => self.call(UnaryFn::Log),
            "sin" => self.call(UnaryFn::Sin),
            "cos" => self.call(UnaryFn::Cos),
            _ => {
                self.pos = start;
                Err(self.err(&format!("unknown identifier '{name}'")))
            }
        }
    }

    fn index_value(&mut self) -> Result<usize> {
        let v = self.integer()?;
        self.skip_ws();
        usize::try_from(v).map_err(|_| self.err("index out of range"))
    }

    fn call(&mut self, f: UnaryFn) -> Result<Expr> {
        self.expect(b'(')?;
        let arg = self.expr()?;
        self.expect(b')')?;
        Ok(Expr::func(f, arg))
    }
}

/// Split `text` at top-level commas (commas inside parentheses, as in
/// `y(1,2)`, do not split). Used for multi-component fields in problem files.
pub fn split_top_level(text: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut current = String::new();
    for ch in text.chars() {
        match ch {
            '(' => {
                depth += 1;
                current.push(ch);
            }
            ')' => {
                depth = depth.saturating_sub(1);
                current.push(ch);
            }
            ',' if depth == 0 => {
                parts.push(current.trim().to_string());
                current.clear();
            }
            _ => current.push(ch),
        }
    }
    parts.push(current.trim().to_string());
    parts
}
