use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, ToPrimitive, Zero};

use super::polynomial::fmt_rational;
use super::{PolyError, Polynomial, Rational, Symbol};

/// Polynomials extended with division, `sin`/`cos` of a single variable,
/// rational multiples of pi and square roots.
///
/// Build values through [`Expr::add`], [`Expr::mul`] and friends: they keep a
/// normal form (polynomial parts merged, sums and products flattened, pi
/// factors pulled out of products) that the printer and parser agree on.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Poly(Polynomial),
    /// `q * pi`
    Pi(Rational),
    Sin(Symbol),
    Cos(Symbol),
    Sqrt(Box<Expr>),
    Sum(Vec<Expr>),
    Prod(Vec<Expr>),
    Neg(Box<Expr>),
    Quot(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

impl From<Polynomial> for Expr {
    fn from(p: Polynomial) -> Self {
        Expr::Poly(p)
    }
}

impl Expr {
    pub fn zero() -> Self {
        Expr::Poly(Polynomial::zero())
    }

    pub fn int(c: i64) -> Self {
        Expr::Poly(Polynomial::int(c))
    }

    pub fn rational(q: Rational) -> Self {
        Expr::Poly(Polynomial::constant(q))
    }

    pub fn var(name: &str) -> Self {
        Expr::Poly(Polynomial::var(name))
    }

    pub fn pi(q: Rational) -> Self {
        if q.is_zero() {
            Expr::zero()
        } else {
            Expr::Pi(q)
        }
    }

    pub fn sin(v: &str) -> Self {
        Expr::Sin(Symbol::new(v))
    }

    pub fn cos(v: &str) -> Self {
        Expr::Cos(Symbol::new(v))
    }

    pub fn sqrt(x: Expr) -> Self {
        Expr::Sqrt(Box::new(x))
    }

    pub fn as_poly(&self) -> Option<&Polynomial> {
        match self {
            Expr::Poly(p) => Some(p),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Poly(p) if p.is_zero())
    }

    fn constant_poly(&self) -> Option<Rational> {
        self.as_poly().and_then(Polynomial::constant_value)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        let mut poly = Polynomial::zero();
        let mut pi = Rational::zero();
        let mut rest = Vec::new();
        let mut push = |x: Expr, rest: &mut Vec<Expr>| match x {
            Expr::Poly(p) => poly = std::mem::take(&mut poly) + p,
            Expr::Pi(q) => pi += q,
            other => rest.push(other),
        };
        for x in [a, b] {
            match x {
                Expr::Sum(v) => v.into_iter().for_each(|y| push(y, &mut rest)),
                other => push(other, &mut rest),
            }
        }
        let mut parts = Vec::new();
        if !poly.is_zero() {
            parts.push(Expr::Poly(poly));
        }
        if !pi.is_zero() {
            parts.push(Expr::Pi(pi));
        }
        parts.extend(rest);
        match parts.len() {
            0 => Expr::zero(),
            1 => parts.pop().unwrap(),
            _ => Expr::Sum(parts),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::add(a, Expr::neg(b))
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Poly(p) => Expr::Poly(-p),
            Expr::Pi(q) => Expr::Pi(-q),
            Expr::Neg(x) => *x,
            Expr::Prod(mut v) if matches!(v.first(), Some(Expr::Poly(_))) => {
                if let Expr::Poly(p) = &mut v[0] {
                    *p = -std::mem::take(p);
                }
                Expr::Prod(v)
            }
            Expr::Quot(n, d) => Expr::Quot(Box::new(Expr::neg(*n)), d),
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        let mut poly = Polynomial::one();
        let mut pi_scale = Rational::one();
        let mut pis = 0usize;
        let mut rest = Vec::new();
        let mut negate = false;
        let mut work = vec![b, a];
        while let Some(x) = work.pop() {
            match x {
                Expr::Prod(v) => work.extend(v.into_iter().rev()),
                Expr::Neg(inner) => {
                    negate = !negate;
                    work.push(*inner);
                }
                Expr::Poly(p) => poly = &poly * &p,
                Expr::Pi(q) => {
                    pi_scale *= q;
                    pis += 1;
                }
                other => rest.push(other),
            }
        }
        if poly.is_zero() {
            return Expr::zero();
        }
        if negate {
            poly = -poly;
        }
        if rest.is_empty() && pis == 1 {
            if let Some(c) = poly.constant_value() {
                return Expr::Pi(c * pi_scale);
            }
        }
        let poly = poly.scale(&pi_scale);
        let mut parts = Vec::new();
        if !(poly.is_constant() && poly.constant_value() == Some(Rational::one())) {
            parts.push(Expr::Poly(poly));
        }
        parts.extend(std::iter::repeat(Expr::Pi(Rational::one())).take(pis));
        parts.extend(rest);
        match parts.len() {
            0 => Expr::Poly(Polynomial::one()),
            1 => parts.pop().unwrap(),
            _ => Expr::Prod(parts),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Result<Expr, PolyError> {
        if b.is_zero() {
            return Err(PolyError::DivisionByZero);
        }
        if let Some(c) = b.constant_poly() {
            return Ok(Expr::mul(a, Expr::rational(c.recip())));
        }
        if let (Expr::Poly(n), Expr::Poly(d)) = (&a, &b) {
            if let Some(q) = n.try_divide(d)? {
                return Ok(Expr::Poly(q));
            }
        }
        Ok(Expr::Quot(Box::new(a), Box::new(b)))
    }

    pub fn pow(a: Expr, n: u32) -> Expr {
        match (a, n) {
            (_, 0) => Expr::Poly(Polynomial::one()),
            (a, 1) => a,
            (Expr::Poly(p), n) => Expr::Poly(p.pow(n)),
            (Expr::Pi(q), n) if n > 1 => {
                let mut acc = Expr::Pi(q.clone());
                for _ in 1..n {
                    acc = Expr::mul(acc, Expr::Pi(q.clone()));
                }
                acc
            }
            (a, n) => Expr::Pow(Box::new(a), n),
        }
    }

    pub fn free_symbols(&self) -> std::collections::BTreeSet<Symbol> {
        let mut out = std::collections::BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut std::collections::BTreeSet<Symbol>) {
        match self {
            Expr::Poly(p) => out.extend(p.variables()),
            Expr::Pi(_) => {}
            Expr::Sin(v) | Expr::Cos(v) => {
                out.insert(v.clone());
            }
            Expr::Sqrt(x) | Expr::Neg(x) | Expr::Pow(x, _) => x.collect_symbols(out),
            Expr::Sum(v) | Expr::Prod(v) => v.iter().for_each(|x| x.collect_symbols(out)),
            Expr::Quot(a, b) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
        }
    }

    pub fn is_polynomial(&self) -> bool {
        matches!(self, Expr::Poly(_))
    }

    /// True when the expression has no transcendental or irrational node, so
    /// rational evaluation is exact.
    pub fn is_rational_function(&self) -> bool {
        match self {
            Expr::Poly(_) => true,
            Expr::Pi(_) | Expr::Sin(_) | Expr::Cos(_) | Expr::Sqrt(_) => false,
            Expr::Neg(x) | Expr::Pow(x, _) => x.is_rational_function(),
            Expr::Sum(v) | Expr::Prod(v) => v.iter().all(Expr::is_rational_function),
            Expr::Quot(a, b) => a.is_rational_function() && b.is_rational_function(),
        }
    }

    pub fn eval_rational(
        &self,
        point: &dyn Fn(&Symbol) -> Option<Rational>,
    ) -> Result<Rational, PolyError> {
        Ok(match self {
            Expr::Poly(p) => p.eval_rational(point)?,
            Expr::Pi(_) | Expr::Sin(_) | Expr::Cos(_) | Expr::Sqrt(_) => {
                return Err(PolyError::NotRational)
            }
            Expr::Neg(x) => -x.eval_rational(point)?,
            Expr::Pow(x, n) => num_traits::pow(x.eval_rational(point)?, *n as usize),
            Expr::Sum(v) => {
                let mut acc = Rational::zero();
                for x in v {
                    acc += x.eval_rational(point)?;
                }
                acc
            }
            Expr::Prod(v) => {
                let mut acc = Rational::one();
                for x in v {
                    acc *= x.eval_rational(point)?;
                }
                acc
            }
            Expr::Quot(a, b) => {
                let den = b.eval_rational(point)?;
                if den.is_zero() {
                    return Err(PolyError::DivisionByZero);
                }
                a.eval_rational(point)? / den
            }
        })
    }

    pub fn eval_f64(&self, point: &dyn Fn(&Symbol) -> Option<f64>) -> Result<f64, PolyError> {
        let lookup = |s: &Symbol| point(s).ok_or_else(|| PolyError::UnboundSymbol(s.clone()));
        Ok(match self {
            Expr::Poly(p) => p.eval_f64(point)?,
            Expr::Pi(q) => q.to_f64().unwrap_or(f64::NAN) * std::f64::consts::PI,
            Expr::Sin(v) => lookup(v)?.sin(),
            Expr::Cos(v) => lookup(v)?.cos(),
            Expr::Sqrt(x) => x.eval_f64(point)?.sqrt(),
            Expr::Neg(x) => -x.eval_f64(point)?,
            Expr::Pow(x, n) => x.eval_f64(point)?.powi(*n as i32),
            Expr::Sum(v) => {
                let mut acc = 0.0;
                for x in v {
                    acc += x.eval_f64(point)?;
                }
                acc
            }
            Expr::Prod(v) => {
                let mut acc = 1.0;
                for x in v {
                    acc *= x.eval_f64(point)?;
                }
                acc
            }
            Expr::Quot(a, b) => {
                let den = b.eval_f64(point)?;
                if den == 0.0 {
                    return Err(PolyError::DivisionByZero);
                }
                a.eval_f64(point)? / den
            }
        })
    }

    pub fn evaluate(&self, point: &BTreeMap<Symbol, Rational>) -> Result<Rational, PolyError> {
        self.eval_rational(&|s| point.get(s).cloned())
    }

    pub fn evaluate_f64(&self, point: &BTreeMap<Symbol, f64>) -> Result<f64, PolyError> {
        self.eval_f64(&|s| point.get(s).copied())
    }

    /// Polynomial view where `pi`, `sin(v)`, `cos(v)` and `sqrt(..)` become
    /// opaque symbols. Quotients by non-constants have no such view.
    pub fn to_opaque_polynomial(&self) -> Option<Polynomial> {
        Some(match self {
            Expr::Poly(p) => p.clone(),
            Expr::Pi(q) => Polynomial::var("pi").scale(q),
            Expr::Sin(v) => Polynomial::var(&format!("sin({v})")),
            Expr::Cos(v) => Polynomial::var(&format!("cos({v})")),
            Expr::Sqrt(x) => Polynomial::var(&format!("sqrt({x})")),
            Expr::Neg(x) => -x.to_opaque_polynomial()?,
            Expr::Pow(x, n) => x.to_opaque_polynomial()?.pow(*n),
            Expr::Sum(v) => {
                let mut acc = Polynomial::zero();
                for x in v {
                    acc = acc + x.to_opaque_polynomial()?;
                }
                acc
            }
            Expr::Prod(v) => {
                let mut acc = Polynomial::one();
                for x in v {
                    acc = &acc * &x.to_opaque_polynomial()?;
                }
                acc
            }
            Expr::Quot(a, b) => {
                let c = b.to_opaque_polynomial()?.constant_value()?;
                if c.is_zero() {
                    return None;
                }
                a.to_opaque_polynomial()?.scale(&c.recip())
            }
        })
    }

    fn is_atomic_print(&self) -> bool {
        match self {
            Expr::Poly(p) => {
                p.num_terms() <= 1
                    && p.terms().all(|(m, c)| !c.is_negative() && (m.is_one() || c.is_one()))
                    && p.terms().all(|(_, c)| c.is_integer())
            }
            Expr::Pi(q) => *q == Rational::one(),
            Expr::Sin(_) | Expr::Cos(_) | Expr::Sqrt(_) => true,
            _ => false,
        }
    }
}

fn fmt_pi(q: &Rational) -> String {
    let num = q.numer().abs();
    let sign = if q.is_negative() { "-" } else { "" };
    let head = if num.is_one() {
        "pi".to_string()
    } else {
        format!("{num}*pi")
    };
    if q.denom().is_one() {
        format!("{sign}{head}")
    } else {
        format!("{sign}{head}/{}", q.denom())
    }
}

fn paren(x: &Expr) -> String {
    if x.is_atomic_print() {
        x.to_string()
    } else {
        format!("({x})")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Poly(p) => write!(f, "{p}"),
            Expr::Pi(q) => f.write_str(&fmt_pi(q)),
            Expr::Sin(v) => write!(f, "sin({v})"),
            Expr::Cos(v) => write!(f, "cos({v})"),
            Expr::Sqrt(x) => write!(f, "sqrt({x})"),
            Expr::Neg(x) => write!(f, "-{}", paren(x)),
            Expr::Pow(x, n) => write!(f, "{}^{n}", paren(x)),
            Expr::Quot(a, b) => write!(f, "{}/{}", paren(a), paren(b)),
            Expr::Sum(v) => {
                for (i, x) in v.iter().enumerate() {
                    let s = match x {
                        Expr::Sum(_) => format!("({x})"),
                        _ => x.to_string(),
                    };
                    if i == 0 {
                        f.write_str(&s)?;
                    } else if let Some(rest) = s.strip_prefix('-') {
                        if matches!(x, Expr::Prod(_) | Expr::Pi(_) | Expr::Neg(_)) {
                            write!(f, " - {rest}")?;
                        } else {
                            write!(f, " + {s}")?;
                        }
                    } else {
                        write!(f, " + {s}")?;
                    }
                }
                Ok(())
            }
            Expr::Prod(v) => {
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    let s = match x {
                        Expr::Poly(p) if i == 0 && p.num_terms() == 1 => x.to_string(),
                        Expr::Pi(q) if q.is_one() => "pi".to_string(),
                        _ => paren(x),
                    };
                    f.write_str(&s)?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

/// Formats a rational the way the parser reads it back.
pub fn format_rational(q: &Rational) -> String {
    fmt_rational(q)
}
