//! Exact symbolic core: sparse polynomials over the rationals, an extended
//! expression type for certification, Lie derivatives and the infix reader.

mod expr;
mod lie;
mod monomial;
mod parse;
mod polynomial;
mod symbol;

pub use expr::{format_rational, Expr};
pub use lie::{lie_derivative, lie_derivative_expr};
pub use monomial::Monomial;
pub use parse::{parse_expr, parse_poly, tokenize, Parser, Token};
pub use polynomial::Polynomial;
pub use symbol::Symbol;

pub type Rational = num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolyError {
    #[error("variable `{0}` has no derivative in the vector field")]
    UnknownVariable(Symbol),
    #[error("symbol `{0}` is not bound")]
    UnboundSymbol(Symbol),
    #[error("division by zero")]
    DivisionByZero,
    #[error("division by the zero polynomial")]
    ZeroDivisor,
    #[error("expression has no exact rational value")]
    NotRational,
    #[error("parse error at offset {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// Rational from a float, exactly.
pub fn rational_from_f64(x: f64) -> Option<Rational> {
    Rational::from_float(x)
}

/// `num/den` as a rational.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(num.into(), den.into())
}

macro_rules! string_serde {
    ($t:ty, $parse:path) => {
        impl serde::Serialize for $t {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_string())
            }
        }
        impl<'de> serde::Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                $parse(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(Polynomial, parse_poly);
string_serde!(Expr, parse_expr);
