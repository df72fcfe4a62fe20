//! Exact reasoning on sign conditions: normal forms modulo polynomial
//! equalities, canonical atoms with sign sets, and implication through
//! positive multipliers.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use super::{Atom, Rel};
use crate::poly::{Expr, Monomial, Polynomial, Rational, Symbol};

pub const NEG: u8 = 1;
pub const ZERO: u8 = 2;
pub const POS: u8 = 4;

/// Rewrite rules `lead -> tail` taken from equalities `lead - tail = 0`.
#[derive(Clone, Debug, Default)]
pub struct Rewriter {
    rules: Vec<(Monomial, Polynomial)>,
}

impl Rewriter {
    /// Rules from every polynomial equality atom. Each atom contributes its
    /// leading term, so `g^2 + h^2 - 1 = 0` rewrites `g^2` and `d*e - 1 = 0`
    /// rewrites `d*e`. Equalities whose leading monomial is already reducible
    /// are skipped, which keeps the rule set terminating.
    pub fn from_atoms<'a, I: IntoIterator<Item = &'a Atom>>(atoms: I) -> Self {
        let mut rw = Rewriter::default();
        let mut eqs: Vec<Polynomial> = atoms
            .into_iter()
            .filter(|a| a.rel == Rel::Eq)
            .filter_map(|a| a.expr.as_poly().cloned())
            .filter(|p| !p.is_constant())
            .collect();
        eqs.sort_by_key(|p| (p.total_degree(), p.num_terms()));
        for p in eqs {
            let p = rw.reduce(&p);
            let Some((lead, lc)) = p.leading_term() else { continue };
            if lead.is_one() {
                continue;
            }
            let lead = lead.clone();
            let inv = Rational::from_integer(1.into()) / lc;
            let tail = Polynomial::from_terms(
                p.terms()
                    .filter(|(m, _)| **m != lead)
                    .map(|(m, c)| (m.clone(), -(c * &inv))),
            );
            rw.rules.push((lead, tail));
        }
        rw
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Remainder of `p` under the rules (graded lex).
    pub fn reduce(&self, p: &Polynomial) -> Polynomial {
        if self.rules.is_empty() {
            return p.clone();
        }
        let mut work = p.clone();
        let mut out = Polynomial::zero();
        let mut steps = 0usize;
        while let Some((m, c)) = work.leading_term().map(|(m, c)| (m.clone(), c.clone())) {
            steps += 1;
            if steps > 100_000 {
                return p.clone();
            }
            let hit = self
                .rules
                .iter()
                .find_map(|(lead, tail)| m.div(lead).map(|q| (q, tail)));
            match hit {
                Some((q, tail)) => {
                    work.add_term(m.clone(), -c.clone());
                    work = work + tail.mul_monomial(&q, &c);
                }
                None => {
                    work.add_term(m.clone(), -c.clone());
                    out.add_term(m, c);
                }
            }
        }
        out
    }
}

/// Polynomial view of an atom (transcendental parts as opaque symbols),
/// reduced and scaled to primitive form, together with its sign set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Canon {
    pub key: Polynomial,
    pub signs: u8,
}

fn rel_signs(rel: Rel) -> u8 {
    match rel {
        Rel::Lt => NEG,
        Rel::Le => NEG | ZERO,
        Rel::Eq => ZERO,
    }
}

fn flip(signs: u8) -> u8 {
    (signs & ZERO) | if signs & NEG != 0 { POS } else { 0 } | if signs & POS != 0 { NEG } else { 0 }
}

fn sign_of(q: &Rational) -> u8 {
    if q.is_zero() {
        ZERO
    } else if q.is_positive() {
        POS
    } else {
        NEG
    }
}

pub fn canon(a: &Atom, rw: &Rewriter) -> Option<Canon> {
    let p = a.expr.to_opaque_polynomial()?;
    canon_poly(&rw.reduce(&p), rel_signs(a.rel))
}

fn canon_poly(p: &Polynomial, signs: u8) -> Option<Canon> {
    if let Some(c) = p.constant_value() {
        return Some(Canon {
            key: Polynomial::zero(),
            signs: if sign_of(&c) & signs != 0 { POS | NEG | ZERO } else { 0 },
        });
    }
    let prim = p.primitive();
    let (_, lc) = p.leading_term()?;
    let signs = if lc.is_negative() { flip(signs) } else { signs };
    Some(Canon { key: prim, signs })
}

/// True when the conjunction is contradictory on sign sets alone.
pub fn contradictory(atoms: &[Atom], rw: &Rewriter) -> bool {
    let mut acc: BTreeMap<Polynomial, u8> = BTreeMap::new();
    for a in atoms {
        if let Some(c) = canon(a, rw) {
            let slot = acc.entry(c.key).or_insert(POS | NEG | ZERO);
            *slot &= c.signs;
            if *slot == 0 {
                return true;
            }
        }
    }
    false
}

/// A hypothesis `q < 0` (strict) or `q <= 0`.
#[derive(Clone, Debug)]
pub struct Hyp {
    pub q: Polynomial,
    pub strict: bool,
}

pub fn hypotheses(atoms: &[Atom], rw: &Rewriter) -> Vec<Hyp> {
    let mut out = Vec::new();
    for a in atoms {
        let Some(c) = canon(a, rw) else { continue };
        if c.key.is_zero() {
            continue;
        }
        let neg = -c.key.clone();
        match c.signs {
            s if s == NEG => out.push(Hyp { q: c.key, strict: true }),
            s if s == NEG | ZERO => out.push(Hyp { q: c.key, strict: false }),
            s if s == POS => out.push(Hyp { q: neg, strict: true }),
            s if s == POS | ZERO => out.push(Hyp { q: neg, strict: false }),
            s if s == ZERO => {
                out.push(Hyp { q: c.key, strict: false });
                out.push(Hyp { q: neg, strict: false });
            }
            _ => {}
        }
    }
    out
}

/// Variables known to be positive: from hypotheses `-v < 0` or a box
/// lower bound above zero.
pub fn positive_vars(hyps: &[Hyp], box_positive: &[Symbol]) -> Vec<Symbol> {
    let mut out: Vec<Symbol> = box_positive.to_vec();
    for h in hyps {
        if h.strict && h.q.num_terms() == 1 {
            if let Some((m, c)) = h.q.leading_term() {
                if c.is_negative() && m.degree() == 1 {
                    out.push(m.factors()[0].0.clone());
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Candidate positive multipliers: 1, v, v*w for positive variables.
pub fn multipliers(pos: &[Symbol]) -> Vec<Monomial> {
    let mut out = vec![Monomial::one()];
    for (i, v) in pos.iter().enumerate() {
        out.push(Monomial::var(v.clone()));
        for w in &pos[i..] {
            out.push(Monomial::from_pairs([(v.clone(), 1), (w.clone(), 1)]));
        }
    }
    out
}

/// An implication `m * c = k * q + r` with `m > 0`, `k > 0`, found for the
/// goal `c ⋈ 0`; the caller still has to show `r <= 0`.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub multiplier: Monomial,
    pub k: Rational,
    pub hyp: Hyp,
    pub remainder: Polynomial,
}

/// Ways to derive `goal < 0` (strict) or `goal <= 0` from one hypothesis.
/// Reductions with a zero remainder come first.
pub fn reductions(goal: &Polynomial, strict: bool, hyps: &[Hyp], pos: &[Symbol], rw: &Rewriter) -> Vec<Reduction> {
    let mut out = Vec::new();
    for m in multipliers(pos) {
        let mc = rw.reduce(&goal.mul_monomial(&m, &Rational::from_integer(1.into())));
        let Some((lead, lc)) = mc.leading_term() else { continue };
        for h in hyps {
            if strict && !h.strict {
                continue;
            }
            let hc = h.q.coeff(lead);
            if hc.is_zero() {
                continue;
            }
            let k = lc / &hc;
            if !k.is_positive() {
                continue;
            }
            let r = &mc - &h.q.scale(&k);
            out.push(Reduction {
                multiplier: m.clone(),
                k,
                hyp: h.clone(),
                remainder: r,
            });
        }
    }
    out.sort_by_key(|r| (!r.remainder.is_zero(), r.remainder.num_terms()));
    out
}

/// `c ⋈ 0` as a goal polynomial and strictness, from an atom to be proved.
pub fn goal_of(a: &Atom) -> Option<(Polynomial, bool)> {
    let p = a.expr.to_opaque_polynomial()?;
    match a.rel {
        Rel::Lt => Some((p, true)),
        Rel::Le => Some((p, false)),
        Rel::Eq => None,
    }
}

/// The negation of a strict/non-strict atom as a single atom.
pub fn negated_atom(a: &Atom) -> Option<Atom> {
    match a.rel {
        Rel::Lt => Some(Atom::new(Expr::neg(a.expr.clone()), Rel::Le)),
        Rel::Le => Some(Atom::new(Expr::neg(a.expr.clone()), Rel::Lt)),
        Rel::Eq => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::SemialgSet;
    use crate::poly::parse_poly;

    fn atoms(src: &str) -> Vec<Atom> {
        SemialgSet::parse(src).unwrap().nnf().atoms().into_iter().cloned().collect()
    }

    #[test]
    fn normal_form_modulo_coherence() {
        let rw = Rewriter::from_atoms(&atoms("g^2 + h^2 - 1 = 0 & d*e - 1 = 0"));
        assert_eq!(rw.reduce(&parse_poly("g^2*e*d + h^2").unwrap()), Polynomial::int(1));
        assert_eq!(rw.reduce(&parse_poly("d^2*h*e").unwrap()), parse_poly("d*h").unwrap());
    }

    #[test]
    fn sign_set_contradictions() {
        let rw = Rewriter::default();
        assert!(contradictory(&atoms("2*g^2 - 1 > 0 & 2*g^2 <= 1"), &rw));
        assert!(contradictory(&atoms("phi < pi/4 & phi >= pi/4"), &rw));
        assert!(!contradictory(&atoms("phi <= pi/4 & phi >= pi/4"), &rw));
        assert!(contradictory(&atoms("-1 > 0"), &rw));
    }

    #[test]
    fn multiplier_reduction() {
        let region = atoms("g^2 + h^2 - 1 = 0 & d*e - 1 = 0 & d > 0 & d^2 + 2*d*h > 0");
        let rw = Rewriter::from_atoms(&region);
        let hyps = hypotheses(&region, &rw);
        let pos = positive_vars(&hyps, &[]);
        assert_eq!(pos, vec![Symbol::new("d")]);
        let goal = parse_poly("-h*e - 1/2").unwrap();
        let red = reductions(&goal, true, &hyps, &pos, &rw);
        assert!(red.first().map(|r| r.remainder.is_zero()).unwrap_or(false));
    }
}
