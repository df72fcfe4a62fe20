use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{Monomial, PolyError, Rational, Symbol};

/// Sparse multivariate polynomial with exact rational coefficients.
///
/// Terms are kept in a map ordered by graded lex, so the last entry is the
/// leading term. Zero coefficients are never stored, which makes structural
/// equality the same as polynomial equality.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, Rational>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn int(c: i64) -> Self {
        Self::constant(Rational::from_integer(BigInt::from(c)))
    }

    pub fn var(name: &str) -> Self {
        Self::monomial(Monomial::var(Symbol::new(name)), Rational::one())
    }

    pub fn monomial(m: Monomial, c: Rational) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, Rational)>>(terms: I) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    /// Accumulates `c * m`, dropping the entry if it cancels.
    pub fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &Monomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(Monomial::is_one)
    }

    pub fn constant_value(&self) -> Option<Rational> {
        if self.is_constant() {
            Some(self.coeff(&Monomial::one()))
        } else {
            None
        }
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn leading_term(&self) -> Option<(&Monomial, &Rational)> {
        self.terms.iter().next_back()
    }

    pub fn variables(&self) -> BTreeSet<Symbol> {
        self.terms
            .keys()
            .flat_map(|m| m.factors().iter().map(|(s, _)| s.clone()))
            .collect()
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Polynomial {
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    pub fn mul_monomial(&self, mono: &Monomial, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|(m, k)| (m.mul(mono), k * c))
                .collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::one();
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = &acc * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    pub fn derivative(&self, var: &Symbol) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            if let Some((k, rest)) = m.derive(var) {
                out.add_term(rest, c * Rational::from_integer(BigInt::from(k)));
            }
        }
        out
    }

    /// Replaces `var` by `value` everywhere.
    pub fn substitute(&self, var: &Symbol, value: &Polynomial) -> Self {
        let mut out = Self::zero();
        let mut powers: BTreeMap<u32, Polynomial> = BTreeMap::new();
        for (m, c) in &self.terms {
            let k = m.exponent(var);
            let rest = Monomial::from_pairs(
                m.factors()
                    .iter()
                    .filter(|(s, _)| s != var)
                    .cloned(),
            );
            let pk = powers.entry(k).or_insert_with(|| value.pow(k)).clone();
            out = out + pk.mul_monomial(&rest, c);
        }
        out
    }

    /// Scales so the leading coefficient is one. Zero stays zero.
    pub fn monic(&self) -> Self {
        match self.leading_term() {
            Some((_, lc)) => self.scale(&lc.recip()),
            None => Self::zero(),
        }
    }

    /// Scales to integer coefficients with gcd one and a positive leading
    /// coefficient.
    pub fn primitive(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let lcm_den = self
            .terms
            .values()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let ints: Vec<BigInt> = self
            .terms
            .values()
            .map(|c| (c * Rational::from_integer(lcm_den.clone())).to_integer())
            .collect();
        let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
        let mut factor = Rational::new(lcm_den, g);
        if self.leading_term().map(|(_, c)| c.is_negative()) == Some(true) {
            factor = -factor;
        }
        self.scale(&factor)
    }

    /// Exact quotient `self / den`, or `None` when `den` does not divide `self`.
    pub fn try_divide(&self, den: &Polynomial) -> Result<Option<Polynomial>, PolyError> {
        let (lm, lc) = match den.leading_term() {
            Some((m, c)) => (m.clone(), c.clone()),
            None => return Err(PolyError::ZeroDivisor),
        };
        let mut rem = self.clone();
        let mut quot = Polynomial::zero();
        while let Some((m, c)) = rem.leading_term() {
            let Some(qm) = m.div(&lm) else {
                return Ok(None);
            };
            let qc = c / &lc;
            rem = rem - den.mul_monomial(&qm, &qc);
            quot.add_term(qm, qc);
        }
        Ok(Some(quot))
    }

    /// Monomial dividing every term (the empty monomial for the zero polynomial).
    pub fn monomial_content(&self) -> Monomial {
        let mut it = self.terms.keys();
        let Some(first) = it.next() else {
            return Monomial::one();
        };
        it.fold(first.clone(), |acc, m| acc.gcd(m))
    }

    pub fn eval_rational(&self, point: &dyn Fn(&Symbol) -> Option<Rational>) -> Result<Rational, PolyError> {
        let mut acc = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (s, k) in m.factors() {
                let v = point(s).ok_or_else(|| PolyError::UnboundSymbol(s.clone()))?;
                t *= num_traits::pow(v, *k as usize);
            }
            acc += t;
        }
        Ok(acc)
    }

    pub fn eval_f64(&self, point: &dyn Fn(&Symbol) -> Option<f64>) -> Result<f64, PolyError> {
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mut t = c.to_f64().unwrap_or(f64::NAN);
            for (s, k) in m.factors() {
                let v = point(s).ok_or_else(|| PolyError::UnboundSymbol(s.clone()))?;
                t *= v.powi(*k as i32);
            }
            acc += t;
        }
        Ok(acc)
    }

    pub fn evaluate(&self, point: &BTreeMap<Symbol, Rational>) -> Result<Rational, PolyError> {
        self.eval_rational(&|s| point.get(s).cloned())
    }

    pub fn evaluate_f64(&self, point: &BTreeMap<Symbol, f64>) -> Result<f64, PolyError> {
        self.eval_f64(&|s| point.get(s).copied())
    }
}

pub(crate) fn fmt_rational(c: &Rational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

impl fmt::Display for Polynomial {
    /// Terms in descending graded-lex order, e.g. `2*e*h + 1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if i == 0 {
                if neg {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if neg { " - " } else { " + " })?;
            }
            if m.is_one() {
                f.write_str(&fmt_rational(&mag))?;
            } else if mag.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{}*{m}", fmt_rational(&mag))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial({self})")
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Add for Polynomial {
    type Output = Polynomial;
    fn add(mut self, rhs: Polynomial) -> Polynomial {
        for (m, c) in rhs.terms {
            self.add_term(m, c);
        }
        self
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl Sub for Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: Polynomial) -> Polynomial {
        &self - &rhs
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }
}

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        -&self
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl Mul for Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: Polynomial) -> Polynomial {
        &self * &rhs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_poly;

    fn p(s: &str) -> Polynomial {
        parse_poly(s).unwrap()
    }

    #[test]
    fn distributivity_examples() {
        assert_eq!(&p("e") * &p("1 + 2*e*h"), p("e + 2*e^2*h"));
        assert_eq!(&p("d") * &p("d + 2*h"), p("d^2 + 2*d*h"));
        let q = p("3*g^2 - h*e + 7/2");
        assert!((&q + &(-&q)).is_zero());
    }

    #[test]
    fn try_divide_examples() {
        assert_eq!(p("g*e^2").try_divide(&p("e")).unwrap(), Some(p("g*e")));
        let num = &p("g*e") * &p("d*e - 1");
        assert_eq!(num.try_divide(&p("d*e - 1")).unwrap(), Some(p("g*e")));
        assert_eq!(p("g + h").try_divide(&p("e")).unwrap(), None);
        assert_eq!(
            p("g").try_divide(&Polynomial::zero()),
            Err(PolyError::ZeroDivisor)
        );
    }

    #[test]
    fn evaluate_examples() {
        let mut pt = BTreeMap::new();
        pt.insert(Symbol::new("d"), Rational::from_integer(1.into()));
        pt.insert(Symbol::new("h"), Rational::from_integer((-1).into()));
        assert_eq!(
            p("d^2 + 2*d*h").evaluate(&pt).unwrap(),
            Rational::from_integer((-1).into())
        );
        let mut pt = BTreeMap::new();
        pt.insert(Symbol::new("e"), Rational::from_integer(2.into()));
        assert_eq!(p("e").evaluate(&pt).unwrap(), Rational::from_integer(2.into()));
        assert!(matches!(
            p("e + g").evaluate(&pt),
            Err(PolyError::UnboundSymbol(_))
        ));
    }

    #[test]
    fn normalizations() {
        assert_eq!(p("2*e*h + 1").monic(), p("e*h + 1/2"));
        assert_eq!(p("e*h + 1/2").primitive(), p("2*e*h + 1"));
        assert_eq!(p("-4*h + 6").primitive(), p("2*h - 3"));
        assert_eq!(p("6*g*e*d + 4*g*d^2").monomial_content(), p("g*d").leading_term().unwrap().0.clone());
    }

    #[test]
    fn substitution() {
        let r = p("g^2 + h^2").substitute(&Symbol::new("g"), &p("1 - h"));
        assert_eq!(r, p("2*h^2 - 2*h + 1"));
    }

    #[test]
    fn display_descending() {
        assert_eq!(p("1 + 2*e*h").to_string(), "2*h*e + 1");
        assert_eq!(p("-g - 1/2").to_string(), "-g - 1/2");
    }
}

/// Compares terms from the leading one down (monomial, then coefficient).
impl Ord for Polynomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.terms.iter().rev().cmp(other.terms.iter().rev())
    }
}

impl PartialOrd for Polynomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
