//! Semialgebraic sets: boolean combinations of sign conditions `expr ⋈ 0`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::poly::{Expr, Parser, PolyError, Symbol, Token};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Lt,
    Le,
    Eq,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Eq => "=",
        }
    }
}

/// `expr ⋈ 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub expr: Expr,
    pub rel: Rel,
}

impl Atom {
    pub fn new(expr: Expr, rel: Rel) -> Self {
        Atom { expr, rel }
    }

    pub fn holds_f64(&self, point: &BTreeMap<Symbol, f64>, eq_tol: f64) -> Option<bool> {
        let v = self.expr.evaluate_f64(point).ok()?;
        if !v.is_finite() {
            return None;
        }
        Some(match self.rel {
            Rel::Lt => v < 0.0,
            Rel::Le => v <= 0.0,
            Rel::Eq => v.abs() <= eq_tol,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} 0", self.expr, self.rel.symbol())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SemialgSet {
    True,
    False,
    Atom(Atom),
    And(Vec<SemialgSet>),
    Or(Vec<SemialgSet>),
    Not(Box<SemialgSet>),
}

/// Comparison between two expressions, as written by a user.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl SemialgSet {
    pub fn atom(expr: Expr, rel: Rel) -> Self {
        SemialgSet::Atom(Atom::new(expr, rel))
    }

    /// `lhs cmp rhs` rewritten as sign conditions on a single expression.
    pub fn compare(lhs: Expr, cmp: Cmp, rhs: Expr) -> Self {
        match cmp {
            Cmp::Lt => Self::atom(Expr::sub(lhs, rhs), Rel::Lt),
            Cmp::Le => Self::atom(Expr::sub(lhs, rhs), Rel::Le),
            Cmp::Eq => Self::atom(Expr::sub(lhs, rhs), Rel::Eq),
            Cmp::Gt => Self::atom(Expr::sub(rhs, lhs), Rel::Lt),
            Cmp::Ge => Self::atom(Expr::sub(rhs, lhs), Rel::Le),
            Cmp::Ne => SemialgSet::Not(Box::new(Self::atom(Expr::sub(lhs, rhs), Rel::Eq))),
        }
    }

    pub fn and(parts: Vec<SemialgSet>) -> Self {
        let mut out = Vec::new();
        for p in parts {
            match p {
                SemialgSet::True => {}
                SemialgSet::False => return SemialgSet::False,
                SemialgSet::And(v) => out.extend(v),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => SemialgSet::True,
            1 => out.pop().unwrap(),
            _ => SemialgSet::And(out),
        }
    }

    pub fn or(parts: Vec<SemialgSet>) -> Self {
        let mut out = Vec::new();
        for p in parts {
            match p {
                SemialgSet::False => {}
                SemialgSet::True => return SemialgSet::True,
                SemialgSet::Or(v) => out.extend(v),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => SemialgSet::False,
            1 => out.pop().unwrap(),
            _ => SemialgSet::Or(out),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(s: SemialgSet) -> Self {
        SemialgSet::Not(Box::new(s))
    }

    /// Negation normal form: negations are pushed into the atoms, so the
    /// result has no `Not` nodes.
    pub fn nnf(&self) -> SemialgSet {
        self.nnf_with(false)
    }

    fn nnf_with(&self, negate: bool) -> SemialgSet {
        match (self, negate) {
            (SemialgSet::True, false) | (SemialgSet::False, true) => SemialgSet::True,
            (SemialgSet::True, true) | (SemialgSet::False, false) => SemialgSet::False,
            (SemialgSet::Atom(a), false) => SemialgSet::Atom(a.clone()),
            (SemialgSet::Atom(a), true) => match a.rel {
                Rel::Lt => Self::atom(Expr::neg(a.expr.clone()), Rel::Le),
                Rel::Le => Self::atom(Expr::neg(a.expr.clone()), Rel::Lt),
                Rel::Eq => Self::or(vec![
                    Self::atom(a.expr.clone(), Rel::Lt),
                    Self::atom(Expr::neg(a.expr.clone()), Rel::Lt),
                ]),
            },
            (SemialgSet::And(v), false) | (SemialgSet::Or(v), true) => {
                Self::and(v.iter().map(|s| s.nnf_with(negate)).collect())
            }
            (SemialgSet::Or(v), false) | (SemialgSet::And(v), true) => {
                Self::or(v.iter().map(|s| s.nnf_with(negate)).collect())
            }
            (SemialgSet::Not(s), n) => s.nnf_with(!n),
        }
    }

    pub fn negate(&self) -> SemialgSet {
        self.nnf_with(true)
    }

    /// Top-level conjuncts (the set itself when it is not a conjunction).
    pub fn conjuncts(&self) -> Vec<&SemialgSet> {
        match self {
            SemialgSet::And(v) => v.iter().flat_map(|s| s.conjuncts()).collect(),
            SemialgSet::True => Vec::new(),
            other => vec![other],
        }
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            SemialgSet::Atom(a) => out.push(a),
            SemialgSet::And(v) | SemialgSet::Or(v) => v.iter().for_each(|s| s.collect_atoms(out)),
            SemialgSet::Not(s) => s.collect_atoms(out),
            _ => {}
        }
    }

    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        self.atoms()
            .into_iter()
            .flat_map(|a| a.expr.free_symbols())
            .collect()
    }

    /// Float membership test; equalities hold within `eq_tol`. `None` when an
    /// atom cannot be evaluated at the point.
    pub fn contains_f64(&self, point: &BTreeMap<Symbol, f64>, eq_tol: f64) -> Option<bool> {
        Some(match self {
            SemialgSet::True => true,
            SemialgSet::False => false,
            SemialgSet::Atom(a) => a.holds_f64(point, eq_tol)?,
            SemialgSet::And(v) => {
                for s in v {
                    if !s.contains_f64(point, eq_tol)? {
                        return Some(false);
                    }
                }
                true
            }
            SemialgSet::Or(v) => {
                for s in v {
                    if s.contains_f64(point, eq_tol)? {
                        return Some(true);
                    }
                }
                false
            }
            SemialgSet::Not(s) => !s.contains_f64(point, eq_tol)?,
        })
    }

    /// Replaces every equality `q = 0` by the band `-w <= q <= w`.
    pub fn thicken_equalities(&self, w: f64) -> SemialgSet {
        let width = crate::poly::rational_from_f64(w).expect("finite width");
        self.map_atoms(&|a| match a.rel {
            Rel::Eq => Self::and(vec![
                Self::atom(Expr::sub(a.expr.clone(), Expr::rational(width.clone())), Rel::Le),
                Self::atom(
                    Expr::sub(Expr::neg(a.expr.clone()), Expr::rational(width.clone())),
                    Rel::Le,
                ),
            ]),
            _ => SemialgSet::Atom(a.clone()),
        })
    }

    /// Relaxes every inequality `q ⋈ 0` to `q ⋈ w` (outer inflation).
    pub fn inflate(&self, w: f64) -> SemialgSet {
        let width = crate::poly::rational_from_f64(w).expect("finite width");
        self.nnf().map_atoms(&|a| match a.rel {
            Rel::Eq => SemialgSet::Atom(a.clone()).thicken_equalities(w),
            rel => Self::atom(Expr::sub(a.expr.clone(), Expr::rational(width.clone())), rel),
        })
    }

    pub fn map_atoms(&self, f: &dyn Fn(&Atom) -> SemialgSet) -> SemialgSet {
        match self {
            SemialgSet::True => SemialgSet::True,
            SemialgSet::False => SemialgSet::False,
            SemialgSet::Atom(a) => f(a),
            SemialgSet::And(v) => Self::and(v.iter().map(|s| s.map_atoms(f)).collect()),
            SemialgSet::Or(v) => Self::or(v.iter().map(|s| s.map_atoms(f)).collect()),
            SemialgSet::Not(s) => SemialgSet::Not(Box::new(s.map_atoms(f))),
        }
    }

    pub fn parse(src: &str) -> Result<SemialgSet, PolyError> {
        let mut p = Parser::new(src)?;
        let s = parse_disj(&mut p)?;
        if !p.at_end() {
            return Err(p.error("trailing input"));
        }
        Ok(s)
    }
}

fn is_word(p: &Parser, w: &str) -> bool {
    matches!(p.peek(), Some(Token::Ident(s)) if s == w)
}

fn parse_disj(p: &mut Parser) -> Result<SemialgSet, PolyError> {
    let mut parts = vec![parse_conj(p)?];
    loop {
        if p.eat_op("|") || p.eat_op("||") {
        } else if is_word(p, "or") {
            p.bump();
        } else {
            break;
        }
        parts.push(parse_conj(p)?);
    }
    Ok(if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        SemialgSet::Or(parts)
    })
}

fn parse_conj(p: &mut Parser) -> Result<SemialgSet, PolyError> {
    let mut parts = vec![parse_neg(p)?];
    loop {
        if p.eat_op("&") || p.eat_op("&&") {
        } else if is_word(p, "and") {
            p.bump();
        } else {
            break;
        }
        parts.push(parse_neg(p)?);
    }
    Ok(if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        SemialgSet::And(parts)
    })
}

fn parse_neg(p: &mut Parser) -> Result<SemialgSet, PolyError> {
    if p.eat_op("!") {
        return Ok(SemialgSet::Not(Box::new(parse_neg(p)?)));
    }
    if is_word(p, "not") {
        p.bump();
        return Ok(SemialgSet::Not(Box::new(parse_neg(p)?)));
    }
    if is_word(p, "true") {
        p.bump();
        return Ok(SemialgSet::True);
    }
    if is_word(p, "false") {
        p.bump();
        return Ok(SemialgSet::False);
    }
    if p.peek() == Some(&Token::LParen) {
        let save = p.position();
        p.bump();
        if let Ok(inner) = parse_disj(p) {
            if p.peek() == Some(&Token::RParen) {
                p.bump();
                let continues = matches!(p.peek(), Some(Token::Op(o)) if cmp_of(o).is_some()
                    || matches!(*o, "+" | "-" | "*" | "/" | "^"));
                if !continues {
                    return Ok(inner);
                }
            }
        }
        p.reset(save);
    }
    parse_comparison(p)
}

fn cmp_of(op: &str) -> Option<Cmp> {
    Some(match op {
        "<" => Cmp::Lt,
        "<=" => Cmp::Le,
        "=" | "==" => Cmp::Eq,
        "!=" => Cmp::Ne,
        ">=" => Cmp::Ge,
        ">" => Cmp::Gt,
        _ => return None,
    })
}

fn parse_comparison(p: &mut Parser) -> Result<SemialgSet, PolyError> {
    let mut lhs = p.expr()?;
    let mut parts = Vec::new();
    loop {
        let cmp = match p.peek() {
            Some(Token::Op(o)) => match cmp_of(o) {
                Some(c) => c,
                None => break,
            },
            _ => break,
        };
        p.bump();
        let rhs = p.expr()?;
        parts.push(SemialgSet::compare(lhs, cmp, rhs.clone()));
        lhs = rhs;
    }
    match parts.len() {
        0 => Err(p.error("expected a comparison")),
        1 => Ok(parts.pop().unwrap()),
        _ => Ok(SemialgSet::And(parts)),
    }
}

impl fmt::Display for SemialgSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, v: &[SemialgSet], sep: &str| -> fmt::Result {
            for (i, s) in v.iter().enumerate() {
                if i > 0 {
                    f.write_str(sep)?;
                }
                match s {
                    SemialgSet::And(_) | SemialgSet::Or(_) => write!(f, "({s})")?,
                    _ => write!(f, "{s}")?,
                }
            }
            Ok(())
        };
        match self {
            SemialgSet::True => f.write_str("true"),
            SemialgSet::False => f.write_str("false"),
            SemialgSet::Atom(a) => write!(f, "{a}"),
            SemialgSet::And(v) => join(f, v, " & "),
            SemialgSet::Or(v) => join(f, v, " | "),
            SemialgSet::Not(s) => write!(f, "!({s})"),
        }
    }
}

impl serde::Serialize for SemialgSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for SemialgSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        SemialgSet::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(pairs: &[(&str, f64)]) -> BTreeMap<Symbol, f64> {
        pairs.iter().map(|(s, v)| (Symbol::new(s), *v)).collect()
    }

    #[test]
    fn parses_boolean_structure() {
        let s = SemialgSet::parse("d > 0 & (g <= 0 | 2*g^2 <= 1)").unwrap();
        assert!(matches!(&s, SemialgSet::And(v) if v.len() == 2));
        assert_eq!(s.contains_f64(&pt(&[("d", 1.0), ("g", 0.5)]), 0.0), Some(true));
        assert_eq!(s.contains_f64(&pt(&[("d", 1.0), ("g", 0.9)]), 0.0), Some(false));
        let chain = SemialgSet::parse("0 <= d <= 2").unwrap();
        assert_eq!(chain.contains_f64(&pt(&[("d", 2.0)]), 0.0), Some(true));
        assert_eq!(chain.contains_f64(&pt(&[("d", 2.5)]), 0.0), Some(false));
        let paren_expr = SemialgSet::parse("(g + h) * 2 > 0").unwrap();
        assert_eq!(paren_expr.contains_f64(&pt(&[("g", 1.0), ("h", 0.0)]), 0.0), Some(true));
    }

    #[test]
    fn display_round_trip() {
        for src in [
            "d > 0 & (g <= 0 | 2*g^2 <= 1)",
            "!(g = 0) | h != 1",
            "phi >= pi/4 & phi <= 7*pi/4 & d^2 + 2*d*h > 0",
            "true",
        ] {
            let s = SemialgSet::parse(src).unwrap();
            assert_eq!(SemialgSet::parse(&s.to_string()).unwrap(), s, "{src}");
        }
    }

    #[test]
    fn nnf_removes_negations() {
        let s = SemialgSet::parse("!(d > 0 & g = 0)").unwrap().nnf();
        fn has_not(s: &SemialgSet) -> bool {
            match s {
                SemialgSet::Not(_) => true,
                SemialgSet::And(v) | SemialgSet::Or(v) => v.iter().any(has_not),
                _ => false,
            }
        }
        assert!(!has_not(&s));
        for (d, g) in [(1.0, 0.0), (-1.0, 0.0), (1.0, 0.3), (0.0, 2.0)] {
            let p = pt(&[("d", d), ("g", g)]);
            let orig = SemialgSet::parse("!(d > 0 & g = 0)").unwrap();
            assert_eq!(s.contains_f64(&p, 0.0), orig.contains_f64(&p, 0.0));
        }
    }
}
