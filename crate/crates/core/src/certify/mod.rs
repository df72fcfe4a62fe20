//! Sound, incomplete certification of sign claims and set containments.
//!
//! Every claim is reduced to the emptiness of a semialgebraic set over a
//! bounded box. A cube of the set's DNF is closed either by exact reasoning
//! (sign-set contradictions, implication through positive multipliers modulo
//! the equalities of the cube) or by interval branch-and-bound with HC4
//! contraction. "Proved" is only reported when every cube is closed.

pub mod bnb;
pub mod ibox;
pub mod interval;
pub mod program;
pub mod set;
pub mod symbolic;

use std::fmt;
use std::time::Instant;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

pub use bnb::{Budget, Outcome, Stats, Witness};
pub use ibox::IntervalBox;
pub use interval::Interval;
pub use program::{interval_eval, Program, Truth};
pub use set::{Atom, Cmp, Rel, SemialgSet};

use crate::darboux::{verify, DarbouxPair};
use crate::dynamics::{Mode, VectorField};
use crate::poly::{lie_derivative, lie_derivative_expr, Expr, PolyError, Polynomial, Rational, Symbol};
use symbolic::Rewriter;

#[derive(Debug, thiserror::Error)]
pub enum CertifyError {
    #[error("a denominator enclosure contains zero")]
    DivisionInterval,
    #[error("variable `{0}` is not bounded by the box")]
    UnboundedVariable(Symbol),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Proved,
    Disproved,
    Undetermined,
}

impl Verdict {
    /// Conjunction: Disproved dominates, then Undetermined.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Disproved, _) | (_, Disproved) => Disproved,
            (Undetermined, _) | (_, Undetermined) => Undetermined,
            _ => Proved,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Proved => "Proved",
            Verdict::Disproved => "Disproved",
            Verdict::Undetermined => "Undetermined",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub claim: String,
    #[serde(rename = "box")]
    pub bounds: IntervalBox,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub stats: Stats,
    pub method: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Certificate {
    pub fn proved(&self) -> bool {
        self.verdict == Verdict::Proved
    }

    fn exact(claim: String, b: &IntervalBox, verdict: Verdict, method: &str, started: Instant) -> Self {
        Certificate {
            claim,
            bounds: b.clone(),
            verdict,
            witness: None,
            stats: Stats {
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
                ..Stats::default()
            },
            method: method.into(),
            notes: Vec::new(),
        }
    }
}

/// Sign claims for [`sign_certify`]; margins are rational.
#[derive(Clone, Debug, PartialEq)]
pub enum SignClaim {
    /// x ≤ 0
    NonPositive,
    /// x ≤ −ε
    NegativeMargin(Rational),
    /// x ≥ 0
    NonNegative,
    /// x ≥ ε
    PositiveMargin(Rational),
}

impl SignClaim {
    /// The claim as an atom `q ≤ 0`.
    pub fn atom(&self, x: &Expr) -> Atom {
        let q = match self {
            SignClaim::NonPositive => x.clone(),
            SignClaim::NegativeMargin(eps) => Expr::add(x.clone(), Expr::rational(eps.clone())),
            SignClaim::NonNegative => Expr::neg(x.clone()),
            SignClaim::PositiveMargin(eps) => Expr::sub(Expr::rational(eps.clone()), x.clone()),
        };
        Atom::new(q, Rel::Le)
    }

    pub fn describe(&self, x: &Expr) -> String {
        match self {
            SignClaim::NonPositive => format!("{x} <= 0"),
            SignClaim::NegativeMargin(e) => format!("{x} <= -{}", crate::poly::format_rational(e)),
            SignClaim::NonNegative => format!("{x} >= 0"),
            SignClaim::PositiveMargin(e) => format!("{x} >= {}", crate::poly::format_rational(e)),
        }
    }
}

/// Certifies that `set ∩ b` is empty.
pub fn certify_empty(set: &SemialgSet, b: &IntervalBox, budget: &Budget, claim: String) -> Certificate {
    let started = Instant::now();
    let eng = bnb::Engine::new(budget);
    let (out, cubes, sym) = eng.empty(set, b);
    let (verdict, witness) = match out {
        Outcome::Empty => (Verdict::Proved, None),
        Outcome::Unknown => (Verdict::Undetermined, None),
        Outcome::Witness(w) => (Verdict::Disproved, Some(w)),
    };
    let method = if cubes > 0 && sym == cubes { "symbolic" } else { "interval" };
    Certificate {
        claim,
        bounds: b.clone(),
        verdict,
        witness,
        stats: eng.stats(started, cubes, sym),
        method: method.into(),
        notes: Vec::new(),
    }
}

/// `x` satisfies `claim` on `region ∩ b`.
pub fn sign_certify(x: &Expr, region: &SemialgSet, b: &IntervalBox, claim: &SignClaim, budget: &Budget) -> Certificate {
    let goal = SemialgSet::Atom(claim.atom(x));
    let bad = SemialgSet::and(vec![region.clone(), goal.negate()]);
    certify_empty(&bad, b, budget, format!("{} on {region}", claim.describe(x)))
}

/// `a ∩ box ⊆ b`.
pub fn contains(a: &SemialgSet, b: &SemialgSet, bx: &IntervalBox, budget: &Budget) -> Certificate {
    let bad = SemialgSet::and(vec![a.clone(), b.negate()]);
    certify_empty(&bad, bx, budget, format!("({a}) implies ({b})"))
}

/// Rewriting rules from the polynomial equalities of a set's conjuncts.
pub fn equality_rules(s: &SemialgSet) -> Rewriter {
    let nnf = s.nnf();
    let atoms: Vec<Atom> = nnf
        .conjuncts()
        .into_iter()
        .filter_map(|c| match c {
            SemialgSet::Atom(a) => Some(a.clone()),
            _ => None,
        })
        .collect();
    Rewriter::from_atoms(&atoms)
}

/// Numerator of an expression that is a polynomial or a quotient of
/// polynomials, together with the denominator.
fn as_fraction(x: &Expr) -> Option<(Polynomial, Polynomial)> {
    match x {
        Expr::Poly(p) => Some((p.clone(), Polynomial::one())),
        Expr::Quot(n, d) => Some((n.as_poly()?.clone(), d.as_poly()?.clone())),
        _ => None,
    }
}

/// Numerator of the Lie derivative of a rational expression.
pub fn derivative_numerator(x: &Expr, f: &VectorField) -> Option<Polynomial> {
    let (n, d) = as_fraction(x)?;
    let ln = lie_derivative(&n, f).ok()?;
    let ld = lie_derivative(&d, f).ok()?;
    Some(&ln * &d - &n * &ld)
}

/// Differential-invariant check for `p ≤ 0` in `mode` under `extra`.
pub fn di_check(p: &Expr, mode: &Mode, extra: &SemialgSet, b: &IntervalBox, budget: &Budget) -> Certificate {
    let started = Instant::now();
    let region = SemialgSet::and(vec![mode.domain.clone(), extra.clone()]);
    let claim = format!("[{}] {p} <= 0 is invariant", mode.name);
    let dp = match lie_derivative_expr(p, &mode.field) {
        Ok(d) => d,
        Err(e) => {
            let mut c = Certificate::exact(claim, b, Verdict::Undetermined, "error", started);
            c.notes.push(e.to_string());
            return c;
        }
    };
    let rw = equality_rules(&region);
    let mut target = dp.clone();
    if let Some(num) = derivative_numerator(p, &mode.field) {
        let num = rw.reduce(&num);
        if num.is_zero() {
            let mut c = Certificate::exact(claim, b, Verdict::Proved, "symbolic", started);
            c.notes.push(format!("derivative {dp} reduces to 0"));
            return c;
        }
        // same sign as the derivative wherever the region's equalities hold
        target = Expr::Poly(num);
    }
    let mut cert = sign_certify(&target, &region, b, &SignClaim::NonPositive, budget);
    cert.claim = claim;
    cert.notes.push(format!("derivative: {dp}"));
    if cert.verdict == Verdict::Disproved {
        // a positive derivative somewhere does not refute invariance
        cert.verdict = Verdict::Undetermined;
        cert.notes
            .push("derivative is positive at the witness; the first-order rule is inconclusive".into());
    }
    cert
}

/// Which rules [`invariance_check`] may use for an atom's boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InvarianceRules {
    /// Strictly inward Lie derivative on every active boundary.
    FirstOrder,
    /// Additionally accept atoms `q ⋈ 0` whose Lie derivative is a multiple
    /// of `q` modulo the set's equalities (Darboux atoms keep their sign).
    WithDarboux,
}

/// Boundary slices of `s`: for each atom, the set with that atom replaced by
/// its boundary `q = 0` (sibling disjuncts negated). `None` when `s` is not a
/// conjunction of atoms and disjunctions of atoms.
fn boundary_slices(s: &SemialgSet) -> Option<Vec<(Atom, SemialgSet)>> {
    let nnf = s.nnf();
    let conj: Vec<SemialgSet> = nnf.conjuncts().into_iter().cloned().collect();
    let mut out = Vec::new();
    for (i, c) in conj.iter().enumerate() {
        let others: Vec<SemialgSet> = conj
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, x)| x.clone())
            .collect();
        let atoms: Vec<Atom> = match c {
            SemialgSet::Atom(a) => vec![a.clone()],
            SemialgSet::Or(parts) => parts
                .iter()
                .map(|p| match p {
                    SemialgSet::Atom(a) => Some(a.clone()),
                    _ => None,
                })
                .collect::<Option<_>>()?,
            SemialgSet::False => vec![],
            _ => return None,
        };
        for (k, a) in atoms.iter().enumerate() {
            let mut parts = others.clone();
            parts.push(SemialgSet::atom(a.expr.clone(), Rel::Eq));
            for (m, b) in atoms.iter().enumerate() {
                if m != k {
                    parts.push(SemialgSet::Atom(b.clone()).negate());
                }
            }
            out.push((a.clone(), SemialgSet::and(parts)));
        }
    }
    Some(out)
}

/// First-order invariance of `s` under `mode` while `domain` holds.
pub fn invariance_check(
    s: &SemialgSet,
    mode: &Mode,
    domain: &SemialgSet,
    b: &IntervalBox,
    budget: &Budget,
    rules: InvarianceRules,
) -> Certificate {
    let started = Instant::now();
    let claim = format!("[{}] ({s}) is invariant while ({domain})", mode.name);
    let Some(slices) = boundary_slices(s) else {
        let mut c = Certificate::exact(claim, b, Verdict::Undetermined, "unsupported", started);
        c.notes.push("set is not a conjunction of atoms and atom disjunctions".into());
        return c;
    };
    let rw = equality_rules(s);
    let mut verdict = Verdict::Proved;
    let mut stats = Stats::default();
    let mut notes = Vec::new();
    let mut witness = None;
    let mut all_symbolic = true;
    for (atom, slice) in slices {
        let q = &atom.expr;
        let dq = match lie_derivative_expr(q, &mode.field) {
            Ok(d) => d,
            Err(e) => {
                notes.push(format!("{atom}: {e}"));
                verdict = verdict.and(Verdict::Undetermined);
                continue;
            }
        };
        if let (Some(num), Some((qn, _))) = (derivative_numerator(q, &mode.field), as_fraction(q)) {
            let num = rw.reduce(&num);
            if num.is_zero() {
                notes.push(format!("{atom}: derivative vanishes identically"));
                continue;
            }
            if rules == InvarianceRules::WithDarboux && q.as_poly().is_some() {
                let qn = rw.reduce(&qn);
                if !qn.is_zero() && matches!(num.try_divide(&qn), Ok(Some(_))) {
                    notes.push(format!("{atom}: Darboux atom, sign preserved"));
                    continue;
                }
            }
        }
        if atom.rel == Rel::Eq {
            notes.push(format!("{atom}: equality atom with non-vanishing derivative"));
            verdict = verdict.and(Verdict::Undetermined);
            all_symbolic = false;
            continue;
        }
        let region = SemialgSet::and(vec![slice, domain.clone()]);
        let target = match derivative_numerator(q, &mode.field) {
            Some(num) => Expr::Poly(equality_rules(&region).reduce(&num)),
            None => dq.clone(),
        };
        // strictly inward: empty {q̇ ≥ 0} on the slice
        let strict = {
            let bad = SemialgSet::and(vec![region, SemialgSet::atom(Expr::neg(target), Rel::Le)]);
            certify_empty(&bad, b, budget, String::new())
        };
        stats.boxes += strict.stats.boxes;
        stats.max_depth = stats.max_depth.max(strict.stats.max_depth);
        stats.cubes += strict.stats.cubes;
        stats.symbolic_cubes += strict.stats.symbolic_cubes;
        if strict.method != "symbolic" {
            all_symbolic = false;
        }
        match strict.verdict {
            Verdict::Proved => notes.push(format!("{atom}: boundary closed")),
            Verdict::Disproved => {
                notes.push(format!("{atom}: derivative not inward at a boundary point"));
                if witness.is_none() {
                    witness = strict.witness.clone();
                }
                verdict = verdict.and(Verdict::Undetermined);
            }
            Verdict::Undetermined => {
                notes.push(format!("{atom}: boundary undetermined"));
                verdict = verdict.and(Verdict::Undetermined);
            }
        }
    }
    stats.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    Certificate {
        claim,
        bounds: b.clone(),
        verdict,
        witness,
        stats,
        method: if all_symbolic { "symbolic" } else { "interval" }.into(),
        notes,
    }
}

/// Invariance of the variety `p = 0` from the Darboux identity, exactly.
pub fn darboux_invariance(pair: &DarbouxPair, f: &VectorField) -> Certificate {
    let started = Instant::now();
    let claim = format!("{} = 0 is invariant (cofactor {})", pair.p, pair.cofactor);
    let b = IntervalBox::new([]);
    if verify(pair, f) {
        return Certificate::exact(claim, &b, Verdict::Proved, "darboux", started);
    }
    let mut c = Certificate::exact(claim, &b, Verdict::Disproved, "darboux", started);
    let residual = match lie_derivative(&pair.p, f) {
        Ok(lp) => lp - &pair.cofactor * &pair.p,
        Err(e) => {
            c.verdict = Verdict::Undetermined;
            c.notes.push(e.to_string());
            return c;
        }
    };
    c.notes.push(format!("residual {residual}"));
    // a point where the residual is nonzero
    let vars: Vec<Symbol> = residual.variables().into_iter().collect();
    'search: for k in 1..=7i64 {
        for shift in 0..vars.len().max(1) {
            let pt: std::collections::BTreeMap<Symbol, Rational> = vars
                .iter()
                .enumerate()
                .map(|(i, v)| (v.clone(), Rational::new(((i + shift) as i64 % 3 + k).into(), 3.into())))
                .collect();
            if let Ok(v) = residual.evaluate(&pt) {
                if !v.is_zero() {
                    use num_traits::ToPrimitive;
                    c.witness = Some(Witness {
                        point: pt
                            .iter()
                            .map(|(s, q)| (s.name().to_string(), q.to_f64().unwrap_or(f64::NAN)))
                            .collect(),
                    });
                    break 'search;
                }
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{coherence, station_keeping_model};
    use crate::poly::{parse_expr, parse_poly, ratio};

    fn set(s: &str) -> SemialgSet {
        SemialgSet::parse(s).unwrap()
    }

    fn small_box() -> IntervalBox {
        IntervalBox::new([])
            .with("g", -1.0, 1.0)
            .with("h", -1.0, 1.0)
            .with("e", 0.5, 2.0)
    }

    #[test]
    fn sign_examples() {
        let budget = Budget::default();
        let x = parse_expr("-2*g*(h+1)/e").unwrap();
        let region = set("2*g^2 > 1 & g > 0 & e > 0");
        let c = sign_certify(&x, &region, &small_box(), &SignClaim::NonPositive, &budget);
        assert_eq!(c.verdict, Verdict::Proved, "{c:?}");
        let c = sign_certify(&x, &region, &small_box(), &SignClaim::NegativeMargin(ratio(1, 100)), &budget);
        assert_eq!(c.verdict, Verdict::Disproved, "{c:?}");
        assert!(c.witness.unwrap().point["h"] < -0.9);
        let c = sign_certify(
            &parse_expr("-g").unwrap(),
            &set("2*g^2 > 1 & g > 0"),
            &small_box(),
            &SignClaim::NegativeMargin(Rational::new(70710678118i64.into(), 100000000000i64.into())),
            &budget,
        );
        assert_eq!(c.verdict, Verdict::Proved, "{c:?}");
    }

    #[test]
    fn containment_examples() {
        let budget = Budget::default();
        let b = IntervalBox::new([]).with("d", 0.0, 10.0).with("h", -1.0, 1.0);
        let c = contains(&set("d^2 + 2*d*h <= 0 & d > 0"), &set("d <= 2"), &b, &budget);
        assert_eq!(c.verdict, Verdict::Proved, "{c:?}");
        let a = set("d > 0 & (g <= 0 | 2*g^2 <= 1)");
        assert!(contains(&a, &a, &IntervalBox::case_study(), &budget).proved());
    }

    #[test]
    fn di_examples() {
        let budget = Budget::default();
        let m = station_keeping_model();
        let v = parse_expr("d^2 + 2*d*h").unwrap();
        let b = IntervalBox::case_study();
        let c = di_check(&v, &m.modes[0], &coherence(), &b, &budget);
        assert_eq!((c.verdict, c.method.as_str()), (Verdict::Proved, "symbolic"));
        let c = di_check(&v, &m.modes[1], &coherence(), &b, &budget);
        assert_eq!(c.verdict, Verdict::Proved, "{c:?}");
        let c = di_check(&parse_expr("h").unwrap(), &m.modes[1], &coherence(), &b, &budget);
        assert_eq!(c.verdict, Verdict::Undetermined, "{c:?}");
    }

    #[test]
    fn darboux_invariance_examples() {
        let m = station_keeping_model();
        let de = DarbouxPair::new(parse_poly("d*e - 1").unwrap(), parse_poly("g*e").unwrap());
        for mode in &m.modes {
            assert!(darboux_invariance(&de, &mode.field).proved());
        }
        let h = DarbouxPair::new(parse_poly("h").unwrap(), parse_poly("g*e - g").unwrap());
        assert!(darboux_invariance(&h, &m.modes[1].field).proved());
        let bad = DarbouxPair::new(parse_poly("h").unwrap(), parse_poly("g*e").unwrap());
        let c = darboux_invariance(&bad, &m.modes[0].field);
        assert_eq!(c.verdict, Verdict::Disproved);
        assert!(c.witness.is_some());
    }

    #[test]
    fn invariance_examples() {
        let budget = Budget::default();
        let m = station_keeping_model();
        let b = IntervalBox::case_study();
        let c = invariance_check(&SemialgSet::True, &m.modes[1], &SemialgSet::True, &b, &budget, InvarianceRules::FirstOrder);
        assert!(c.proved());
        let c = invariance_check(&set("h >= 0"), &m.modes[1], &SemialgSet::True, &b, &budget, InvarianceRules::FirstOrder);
        assert_eq!(c.verdict, Verdict::Undetermined, "{c:?}");
    }
}
