//! Darboux polynomial search and rational first integrals.

pub mod linalg;

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::VectorField;
use crate::poly::{lie_derivative, Expr, Monomial, PolyError, Polynomial, Rational, Symbol};

pub const DEFAULT_CAP: usize = 1_000_000;

#[derive(Debug, thiserror::Error)]
pub enum DarbouxError {
    #[error("cofactor enumeration would produce {0} candidates (cap {1})")]
    BudgetExceeded(u128, usize),
    #[error("search variables are not closed under the field")]
    NotClosed,
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DarbouxPair {
    pub p: Polynomial,
    pub cofactor: Polynomial,
}

impl DarbouxPair {
    pub fn new(p: Polynomial, cofactor: Polynomial) -> Self {
        DarbouxPair { p, cofactor }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FirstIntegral {
    pub expr: Expr,
    pub numerator: Polynomial,
    pub denominator: Polynomial,
    pub pairs: Vec<DarbouxPair>,
    pub exponents: Vec<i64>,
}

/// Search space for [`search`].
#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub pdeg: u32,
    pub cofdeg: u32,
    pub coeffs: Vec<Rational>,
    pub maxterms: usize,
    pub cap: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            pdeg: 2,
            cofdeg: 2,
            coeffs: (-2..=2).map(|c| Rational::from_integer(c.into())).collect(),
            maxterms: 2,
            cap: DEFAULT_CAP,
        }
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Every polynomial over `vars` of degree at most `maxdeg` with at most
/// `maxterms` terms and coefficients drawn from `coeffs`, zero first.
/// Nonzero constant cofactors are not generated.
pub fn enumerate_cofactors(
    vars: &[Symbol],
    maxdeg: u32,
    coeffs: &[Rational],
    maxterms: usize,
    cap: usize,
) -> Result<Vec<Polynomial>, DarbouxError> {
    let mut cs: Vec<Rational> = coeffs.iter().filter(|c| !c.is_zero()).cloned().collect();
    cs.sort();
    cs.dedup();
    let monos: Vec<Monomial> = Monomial::all_up_to(vars, maxdeg)
        .into_iter()
        .filter(|m| !m.is_one())
        .collect();
    let count: u128 = (0..=maxterms.min(monos.len()) as u128)
        .map(|k| binomial(monos.len() as u128, k).saturating_mul((cs.len() as u128).saturating_pow(k as u32)))
        .fold(0u128, |a, b| a.saturating_add(b));
    if count > cap as u128 {
        return Err(DarbouxError::BudgetExceeded(count, cap));
    }
    let mut out = vec![Polynomial::zero()];
    for k in 1..=maxterms.min(monos.len()) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let mut digits = vec![0usize; k];
            loop {
                out.push(Polynomial::from_terms(
                    idx.iter().zip(&digits).map(|(&i, &j)| (monos[i].clone(), cs[j].clone())),
                ));
                let mut pos = k;
                while pos > 0 {
                    pos -= 1;
                    digits[pos] += 1;
                    if digits[pos] < cs.len() {
                        break;
                    }
                    digits[pos] = 0;
                    if pos == 0 {
                        pos = usize::MAX;
                        break;
                    }
                }
                if pos == usize::MAX || cs.is_empty() {
                    break;
                }
            }
            // next k-combination of monomial indices
            let mut i = k;
            let mut advanced = false;
            while i > 0 {
                i -= 1;
                if idx[i] < monos.len() - k + i {
                    idx[i] += 1;
                    for j in i + 1..k {
                        idx[j] = idx[j - 1] + 1;
                    }
                    advanced = true;
                    break;
                }
            }
            if !advanced || cs.is_empty() {
                break;
            }
        }
    }
    Ok(out)
}

/// Scales to primitive integer coefficients with a positive leading coefficient.
pub fn normalize(p: &Polynomial) -> Polynomial {
    p.primitive()
}

pub fn verify(pair: &DarbouxPair, f: &VectorField) -> bool {
    match lie_derivative(&pair.p, f) {
        Ok(lp) => (lp - &pair.cofactor * &pair.p).is_zero(),
        Err(_) => false,
    }
}

fn poly_from_vector(monos: &[Monomial], v: &[BigInt]) -> Polynomial {
    Polynomial::from_terms(
        monos
            .iter()
            .zip(v)
            .filter(|(_, c)| !c.is_zero())
            .map(|(m, c)| (m.clone(), Rational::from_integer(c.clone()))),
    )
}

/// Darboux polynomials of degree ≤ `pdeg` over `vars` whose cofactor lies in
/// the enumerated cofactor space.
pub fn search(f: &VectorField, vars: &[Symbol], cfg: &SearchConfig) -> Result<Vec<DarbouxPair>, DarbouxError> {
    let sub = f.restrict(vars).ok_or(DarbouxError::NotClosed)?;
    let cofactors = enumerate_cofactors(vars, cfg.cofdeg, &cfg.coeffs, cfg.maxterms, cfg.cap)?;
    // template monomials, descending so that echelon pivots are leading terms
    let mut template = Monomial::all_up_to(vars, cfg.pdeg);
    template.reverse();
    let lies: Vec<Polynomial> = template
        .iter()
        .map(|m| lie_derivative(&Polynomial::monomial(m.clone(), Rational::one()), &sub))
        .collect::<Result<_, _>>()?;

    let found: Vec<Vec<DarbouxPair>> = cofactors
        .par_iter()
        .map(|c| solve_for_cofactor(c, &template, &lies))
        .collect();

    let mut by_p: BTreeMap<Polynomial, DarbouxPair> = BTreeMap::new();
    for pair in found.into_iter().flatten() {
        by_p.entry(pair.p.clone()).or_insert(pair);
    }
    let all: Vec<DarbouxPair> = by_p.into_values().collect();
    let mut out: Vec<DarbouxPair> = all
        .iter()
        .filter(|pair| {
            !all.iter().any(|q| {
                q.p.total_degree() < pair.p.total_degree()
                    && matches!(pair.p.try_divide(&q.p), Ok(Some(r)) if !r.is_constant())
            })
        })
        .cloned()
        .collect();
    out.sort_by(|a, b| {
        (a.p.total_degree(), a.p.num_terms())
            .cmp(&(b.p.total_degree(), b.p.num_terms()))
            .then_with(|| a.p.cmp(&b.p))
    });
    Ok(out)
}

fn solve_for_cofactor(c: &Polynomial, template: &[Monomial], lies: &[Polynomial]) -> Vec<DarbouxPair> {
    let cols: Vec<Polynomial> = template
        .iter()
        .zip(lies)
        .map(|(m, l)| l - &c.mul_monomial(m, &Rational::one()))
        .collect();
    let mut row_monos: Vec<&Monomial> = cols.iter().flat_map(|p| p.terms().map(|(m, _)| m)).collect();
    row_monos.sort();
    row_monos.dedup();
    let rows: Vec<Vec<Rational>> = row_monos
        .iter()
        .map(|m| cols.iter().map(|p| p.coeff(m)).collect())
        .collect();
    let basis = linalg::nullspace(linalg::integer_rows(&rows), template.len());
    if basis.is_empty() {
        return Vec::new();
    }
    let (basis, _) = linalg::reduced_echelon(basis, template.len());
    basis
        .iter()
        .filter_map(|v| {
            let mut p = poly_from_vector(template, v);
            if c.is_zero() {
                p = Polynomial::from_terms(
                    p.terms()
                        .filter(|(m, _)| !m.is_one())
                        .map(|(m, q)| (m.clone(), q.clone())),
                );
            }
            if p.is_constant() {
                return None;
            }
            Some(DarbouxPair::new(normalize(&p), c.clone()))
        })
        .collect()
}

/// Products of powers of Darboux polynomials whose cofactors cancel.
pub fn first_integrals(pairs: &[DarbouxPair]) -> Vec<FirstIntegral> {
    if pairs.is_empty() {
        return Vec::new();
    }
    let mut monos: Vec<&Monomial> = pairs
        .iter()
        .flat_map(|p| p.cofactor.terms().map(|(m, _)| m))
        .collect();
    monos.sort();
    monos.dedup();
    let rows: Vec<Vec<Rational>> = monos
        .iter()
        .map(|m| pairs.iter().map(|p| p.cofactor.coeff(m)).collect())
        .collect();
    let basis = if rows.is_empty() {
        (0..pairs.len())
            .map(|i| (0..pairs.len()).map(|j| BigInt::from((i == j) as i64)).collect())
            .collect()
    } else {
        let ns = linalg::nullspace(linalg::integer_rows(&rows), pairs.len());
        if ns.is_empty() {
            return Vec::new();
        }
        linalg::reduced_echelon(ns, pairs.len()).0
    };
    let mut out = Vec::new();
    for mut lambda in basis {
        if let Some(last) = lambda.iter().rev().find(|x| !x.is_zero()) {
            if last.is_negative() {
                lambda.iter_mut().for_each(|x| *x = -&*x);
            }
        }
        let exps: Option<Vec<i64>> = lambda.iter().map(|x| i64::try_from(x).ok()).collect();
        let Some(exps) = exps else { continue };
        let mut num = Polynomial::one();
        let mut den = Polynomial::one();
        for (pair, &k) in pairs.iter().zip(&exps) {
            if k > 0 {
                num = num * pair.p.pow(k as u32);
            } else if k < 0 {
                den = den * pair.p.pow((-k) as u32);
            }
        }
        if matches!(num.try_divide(&den), Ok(Some(q)) if q.is_constant()) {
            continue;
        }
        let expr = Expr::div(Expr::Poly(num.clone()), Expr::Poly(den.clone())).expect("nonzero denominator");
        out.push(FirstIntegral {
            expr,
            numerator: num,
            denominator: den,
            pairs: pairs.to_vec(),
            exponents: exps,
        });
    }
    out
}

/// `lie(N)·D − N·lie(D) ≡ 0`.
pub fn is_first_integral(fi: &FirstIntegral, f: &VectorField) -> bool {
    match (lie_derivative(&fi.numerator, f), lie_derivative(&fi.denominator, f)) {
        (Ok(ln), Ok(ld)) => (&ln * &fi.denominator - &fi.numerator * &ld).is_zero(),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{station_keeping_model, sym};
    use crate::poly::parse_poly;

    fn ghe() -> Vec<Symbol> {
        ["g", "h", "e"].iter().map(|s| sym(s)).collect()
    }

    fn ints(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&c| Rational::from_integer(c.into())).collect()
    }

    fn pair(p: &str, c: &str) -> DarbouxPair {
        DarbouxPair::new(parse_poly(p).unwrap(), parse_poly(c).unwrap())
    }

    #[test]
    fn cofactor_enumeration() {
        let small = enumerate_cofactors(&ghe(), 1, &ints(&[0, 1]), 1, DEFAULT_CAP).unwrap();
        assert_eq!(small.len(), 4);
        let big = enumerate_cofactors(&ghe(), 2, &ints(&[-2, -1, 0, 1, 2]), 2, DEFAULT_CAP).unwrap();
        for c in ["g*e", "2*g*e", "g*e - g", "0"] {
            assert!(big.contains(&parse_poly(c).unwrap()), "{c}");
        }
        assert!(matches!(
            enumerate_cofactors(&ghe(), 2, &ints(&[-2, -1, 1, 2]), 2, 100),
            Err(DarbouxError::BudgetExceeded(613, 100))
        ));
    }

    #[test]
    fn verify_examples() {
        let m = station_keeping_model();
        let f = &m.modes[0].field;
        assert!(verify(&pair("e", "g*e"), f));
        assert!(!verify(&pair("h", "g*e"), f));
        assert!(verify(&pair("5", "0"), f));
    }

    #[test]
    fn first_integral_examples() {
        let fis = first_integrals(&[pair("e", "g*e"), pair("2*e*h + 1", "2*g*e")]);
        assert_eq!(fis.len(), 1);
        assert_eq!(fis[0].exponents, vec![-2, 1]);
        assert_eq!(fis[0].expr.to_string(), "(2*h*e + 1)/e^2");
        assert!(first_integrals(&[pair("e", "g*e")]).is_empty());
        assert!(first_integrals(&[pair("e", "g*e"), pair("e^2", "2*g*e")]).is_empty());
    }
}
