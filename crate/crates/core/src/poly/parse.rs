//! Infix reader for polynomials and expressions: `1 + 2*e*h`, `cos(phi)`,
//! `7*pi/4`, `(d^2 + 2*d*h)/d`. Decimal literals are read exactly.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::{Expr, PolyError, Polynomial, Rational};

#[derive(Clone, Debug, PartialEq)]
pub enum Token {
    Num(Rational),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
}

const OPS: [&str; 16] = [
    "<=", ">=", "!=", "==", "&&", "||", "+", "-", "*", "/", "^", "<", ">", "=", "&", "|",
];

pub fn tokenize(src: &str) -> Result<Vec<(usize, Token)>, PolyError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit()) {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            let lit = &src[start..i];
            out.push((start, Token::Num(parse_decimal(lit).ok_or_else(|| PolyError::Parse {
                pos: start,
                msg: format!("bad number `{lit}`"),
            })?)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Token::Ident(src[start..i].to_string())));
            continue;
        }
        match c {
            '(' => {
                out.push((i, Token::LParen));
                i += 1;
                continue;
            }
            ')' => {
                out.push((i, Token::RParen));
                i += 1;
                continue;
            }
            _ => {}
        }
        if c == '!' && !src[i..].starts_with("!=") {
            out.push((i, Token::Op("!")));
            i += 1;
            continue;
        }
        match OPS.iter().find(|op| src[i..].starts_with(**op)) {
            Some(op) => {
                out.push((i, Token::Op(op)));
                i += op.len();
            }
            None => {
                return Err(PolyError::Parse {
                    pos: i,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    Ok(out)
}

fn parse_decimal(lit: &str) -> Option<Rational> {
    let mut parts = lit.split('.');
    let int = parts.next()?;
    let frac = parts.next().unwrap_or("");
    if parts.next().is_some() {
        return None;
    }
    let digits = format!("{int}{frac}");
    let num: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let den = num_traits::pow(BigInt::from(10), frac.len());
    Some(Rational::new(num, den))
}

/// Recursive-descent reader over a token stream; the set grammar in
/// `certify::set` drives it for the arithmetic parts.
pub struct Parser {
    toks: Vec<(usize, Token)>,
    pos: usize,
    len: usize,
}

impl Parser {
    pub fn new(src: &str) -> Result<Self, PolyError> {
        Ok(Parser {
            toks: tokenize(src)?,
            pos: 0,
            len: src.len(),
        })
    }

    pub fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    pub fn peek_at(&self, k: usize) -> Option<&Token> {
        self.toks.get(self.pos + k).map(|(_, t)| t)
    }

    pub fn bump(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    pub fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.len)
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    /// Rewinds to a previously saved position.
    pub fn reset(&mut self, pos: usize) {
        self.pos = pos;
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn error(&self, msg: impl Into<String>) -> PolyError {
        PolyError::Parse {
            pos: self.offset(),
            msg: msg.into(),
        }
    }

    pub fn eat_op(&mut self, op: &str) -> bool {
        if matches!(self.peek(), Some(Token::Op(o)) if *o == op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, t: Token) -> Result<(), PolyError> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected {t:?}")))
        }
    }

    pub fn expr(&mut self) -> Result<Expr, PolyError> {
        let mut acc = self.term()?;
        loop {
            if self.eat_op("+") {
                acc = Expr::add(acc, self.term()?);
            } else if self.eat_op("-") {
                acc = Expr::sub(acc, self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, PolyError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat_op("*") {
                acc = Expr::mul(acc, self.unary()?);
            } else if self.eat_op("/") {
                let at = self.offset();
                let den = self.unary()?;
                acc = Expr::div(acc, den).map_err(|_| PolyError::Parse {
                    pos: at,
                    msg: "division by zero".into(),
                })?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, PolyError> {
        if self.eat_op("-") {
            return Ok(Expr::neg(self.unary()?));
        }
        if self.eat_op("+") {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, PolyError> {
        let base = self.atom()?;
        if self.eat_op("^") {
            match self.bump() {
                Some(Token::Num(n)) if n.is_integer() && n >= Rational::zero() => {
                    let k: u32 = n
                        .to_integer()
                        .try_into()
                        .map_err(|_| self.error("exponent too large"))?;
                    Ok(Expr::pow(base, k))
                }
                _ => Err(self.error("exponent must be a non-negative integer")),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, PolyError> {
        match self.bump() {
            Some(Token::Num(q)) => Ok(Expr::rational(q)),
            Some(Token::LParen) => {
                let e = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(e)
            }
            Some(Token::Ident(name)) => match name.as_str() {
                "pi" => Ok(Expr::Pi(Rational::one())),
                "sin" | "cos" => {
                    self.expect(Token::LParen)?;
                    let v = match self.bump() {
                        Some(Token::Ident(v)) => v,
                        _ => return Err(self.error("sin/cos take a single variable")),
                    };
                    self.expect(Token::RParen)?;
                    Ok(if name == "sin" { Expr::sin(&v) } else { Expr::cos(&v) })
                }
                "sqrt" => {
                    self.expect(Token::LParen)?;
                    let e = self.expr()?;
                    self.expect(Token::RParen)?;
                    Ok(Expr::sqrt(e))
                }
                _ => Ok(Expr::var(&name)),
            },
            Some(t) => {
                self.pos -= 1;
                Err(self.error(format!("unexpected token {t:?}")))
            }
            None => Err(self.error("unexpected end of input")),
        }
    }
}

pub fn parse_expr(src: &str) -> Result<Expr, PolyError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    if !p.at_end() {
        return Err(p.error("trailing input"));
    }
    Ok(e)
}

pub fn parse_poly(src: &str) -> Result<Polynomial, PolyError> {
    match parse_expr(src)? {
        Expr::Poly(p) => Ok(p),
        other => Err(PolyError::Parse {
            pos: 0,
            msg: format!("`{other}` is not a polynomial"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi_multiples() {
        assert_eq!(parse_expr("7*pi/4").unwrap(), Expr::Pi(Rational::new(7.into(), 4.into())));
        assert_eq!(parse_expr("pi/4").unwrap().to_string(), "pi/4");
        assert_eq!(parse_expr("-7*pi/4").unwrap().to_string(), "-7*pi/4");
    }

    #[test]
    fn decimals_are_exact() {
        assert_eq!(parse_poly("7.6").unwrap(), Polynomial::constant(Rational::new(38.into(), 5.into())));
    }

    #[test]
    fn errors_carry_position() {
        match parse_expr("g + * h") {
            Err(PolyError::Parse { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
        assert!(parse_expr("sin(g+h)").is_err());
        assert!(parse_expr("g^-1").is_err());
        assert!(parse_expr("g/0").is_err());
    }

    #[test]
    fn round_trips() {
        for s in [
            "1 + 2*e*h",
            "cos(phi)",
            "pi/4",
            "-phi + 7*pi/4",
            "-2*g*(h + 1)/e",
            "(112/pi)*phi - 25*d - 6",
            "sqrt(2)/2",
            "d^2 + 2*d*sin(phi)",
            "sin(phi)^2 + cos(phi)^2 - 1",
            "-(sin(phi)*cos(phi))",
            "g*pi*sin(phi) - 3/4*e",
        ] {
            let e = parse_expr(s).unwrap();
            let again = parse_expr(&e.to_string()).unwrap();
            assert_eq!(e, again, "{s} -> {e}");
        }
    }
}
