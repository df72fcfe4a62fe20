//! Branch-and-bound emptiness checks over conjunctions of atoms.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::symbolic::{self, Rewriter};
use super::{Atom, Interval, IntervalBox, Program, Rel, SemialgSet, Truth};
use crate::poly::{Expr, Polynomial, Rational, Symbol};

pub const EQ_TOL: f64 = 1e-12;
pub const DNF_CAP: usize = 4096;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Budget {
    pub max_depth: usize,
    pub max_boxes: usize,
    pub min_rel_width: f64,
    pub time_limit: Option<Duration>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_depth: 40,
            max_boxes: 1_000_000,
            min_rel_width: 1e-9,
            time_limit: None,
        }
    }
}

impl Budget {
    pub fn scaled(&self, k: usize) -> Budget {
        Budget {
            max_depth: self.max_depth + (k as f64).log2().ceil() as usize * 4,
            max_boxes: self.max_boxes.saturating_mul(k),
            min_rel_width: self.min_rel_width / k as f64,
            time_limit: self.time_limit.map(|t| t * k as u32),
        }
    }
}

#[derive(Debug, Default)]
pub struct Counters {
    pub boxes: AtomicUsize,
    pub max_depth: AtomicUsize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub boxes: usize,
    pub max_depth: usize,
    pub wall_ms: f64,
    pub cubes: usize,
    pub symbolic_cubes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Empty,
    Witness(Witness),
    Unknown,
}

impl Outcome {
    fn rank(&self) -> u8 {
        match self {
            Outcome::Empty => 0,
            Outcome::Unknown => 1,
            Outcome::Witness(_) => 2,
        }
    }

    /// Witness dominates, then unknown, then empty.
    pub fn combine(self, other: Outcome) -> Outcome {
        if other.rank() > self.rank() {
            other
        } else {
            self
        }
    }
}

/// Disjunctive normal form of a set (negations pushed to atoms).
pub fn dnf(s: &SemialgSet, cap: usize) -> Option<Vec<Vec<Atom>>> {
    match s {
        SemialgSet::True => Some(vec![Vec::new()]),
        SemialgSet::False => Some(Vec::new()),
        SemialgSet::Atom(a) => Some(vec![vec![a.clone()]]),
        SemialgSet::Or(parts) => {
            let mut out = Vec::new();
            for p in parts {
                out.extend(dnf(p, cap)?);
                if out.len() > cap {
                    return None;
                }
            }
            Some(out)
        }
        SemialgSet::And(parts) => {
            let mut acc: Vec<Vec<Atom>> = vec![Vec::new()];
            for p in parts {
                let d = dnf(p, cap)?;
                let mut next = Vec::with_capacity(acc.len() * d.len());
                for a in &acc {
                    for b in &d {
                        let mut c = a.clone();
                        c.extend(b.iter().cloned());
                        next.push(c);
                    }
                }
                if next.len() > cap {
                    return None;
                }
                acc = next;
            }
            Some(acc)
        }
        SemialgSet::Not(_) => dnf(&s.nnf(), cap),
    }
}

pub struct Engine<'a> {
    pub budget: &'a Budget,
    pub counters: Counters,
    pub deadline: Option<Instant>,
    pub symbolic: bool,
}

fn sym(s: &str) -> Symbol {
    Symbol::new(s)
}

impl<'a> Engine<'a> {
    pub fn new(budget: &'a Budget) -> Self {
        Engine {
            budget,
            counters: Counters::default(),
            deadline: budget.time_limit.map(|t| Instant::now() + t),
            symbolic: true,
        }
    }

    pub fn stats(&self, started: Instant, cubes: usize, symbolic_cubes: usize) -> Stats {
        Stats {
            boxes: self.counters.boxes.load(Ordering::Relaxed),
            max_depth: self.counters.max_depth.load(Ordering::Relaxed),
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
            cubes,
            symbolic_cubes,
        }
    }

    /// Emptiness of `set ∩ b`. Returns the outcome and how many cubes were
    /// closed symbolically.
    pub fn empty(&self, set: &SemialgSet, b: &IntervalBox) -> (Outcome, usize, usize) {
        let Some(cubes) = dnf(&set.nnf(), DNF_CAP) else {
            return (Outcome::Unknown, 0, 0);
        };
        let n = cubes.len();
        let results: Vec<(Outcome, bool)> = cubes.par_iter().map(|c| self.cube(c, b)).collect();
        let symbolic = results.iter().filter(|(_, s)| *s).count();
        let out = results
            .into_iter()
            .map(|(o, _)| o)
            .fold(Outcome::Empty, |acc, o| acc.combine(o));
        (out, n, symbolic)
    }

    /// Emptiness of one cube; the flag tells whether it was closed by exact
    /// reasoning alone.
    pub fn cube(&self, atoms: &[Atom], b: &IntervalBox) -> (Outcome, bool) {
        let rw = Rewriter::from_atoms(atoms);
        if symbolic::contradictory(atoms, &rw) {
            return (Outcome::Empty, true);
        }
        if self.symbolic {
            if let Some(exact) = self.refute_by_implication(atoms, b, &rw) {
                return (Outcome::Empty, exact);
            }
        }
        (self.branch_and_bound(atoms, b), false)
    }

    /// Looks for an atom whose negation follows from the others; `Some(true)`
    /// when no interval check of a remainder was needed.
    fn refute_by_implication(&self, atoms: &[Atom], b: &IntervalBox, rw: &Rewriter) -> Option<bool> {
        let box_pos: Vec<Symbol> = b
            .axes()
            .filter(|(_, iv)| iv.lo > 0.0)
            .map(|(s, _)| s.clone())
            .collect();
        for (i, x) in atoms.iter().enumerate() {
            let Some(neg) = symbolic::negated_atom(x) else { continue };
            let Some((goal, strict)) = symbolic::goal_of(&neg) else { continue };
            let rest: Vec<Atom> = atoms
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, a)| a.clone())
                .collect();
            let hyps = symbolic::hypotheses(&rest, rw);
            let pos = symbolic::positive_vars(&hyps, &box_pos);
            for red in symbolic::reductions(&goal, strict, &hyps, &pos, rw).into_iter().take(6) {
                if red.remainder.is_zero() {
                    return Some(true);
                }
                if red.remainder.variables().iter().any(|v| v.name().starts_with("pi") || v.name().contains('(')) {
                    continue;
                }
                // r <= 0 on the rest of the cube
                let mut sub = rest.clone();
                sub.push(Atom::new(Expr::neg(Expr::Poly(red.remainder.clone())), Rel::Lt));
                let inner = Engine {
                    budget: &Budget {
                        max_boxes: 20_000,
                        ..self.budget.clone()
                    },
                    counters: Counters::default(),
                    deadline: self.deadline,
                    symbolic: false,
                };
                if inner.branch_and_bound(&sub, b) == Outcome::Empty {
                    self.counters
                        .boxes
                        .fetch_add(inner.counters.boxes.load(Ordering::Relaxed), Ordering::Relaxed);
                    return Some(false);
                }
            }
        }
        None
    }

    fn compile(&self, atoms: &[Atom], b: &IntervalBox) -> Program {
        let mut p = Program::new();
        for a in atoms {
            let tol = if a.rel == Rel::Eq { EQ_TOL } else { 0.0 };
            p.constrain(&a.expr, a.rel, tol);
        }
        let (g, h, phi) = (sym("g"), sym("h"), sym("phi"));
        let has = |s: &Symbol| p.vars.contains(s);
        if has(&phi) && (has(&g) || has(&h)) && b.get(&g).is_some() && b.get(&h).is_some() {
            p.var(&g);
            p.var(&h);
            p.add_trig_coherence(&g, &h, &phi);
        }
        p
    }

    pub fn branch_and_bound(&self, atoms: &[Atom], b: &IntervalBox) -> Outcome {
        let p = self.compile(atoms, b);
        if p.vars.iter().any(|v| b.get(v).is_none()) {
            return Outcome::Unknown;
        }
        let root = p.load(b);
        let scale: Vec<f64> = root.iter().map(|iv| if iv.width() > 0.0 { iv.width() } else { 1.0 }).collect();
        let trig = p.vars.contains(&sym("phi")) && p.vars.contains(&sym("g"));
        let witness_ctx = WitnessCtx::new(atoms, &p, b, trig);
        let mut stack = vec![(root, 0usize)];
        let mut unknown = false;
        while let Some((mut dom, depth)) = stack.pop() {
            let n = self.counters.boxes.fetch_add(1, Ordering::Relaxed);
            self.counters.max_depth.fetch_max(depth, Ordering::Relaxed);
            if n >= self.budget.max_boxes || self.deadline.map(|d| Instant::now() > d).unwrap_or(false) {
                return Outcome::Unknown;
            }
            if !p.contract(&mut dom, 8) {
                continue;
            }
            let truth = p.truth(&dom);
            if truth.contains(&Truth::False) {
                continue;
            }
            if let Some(w) = witness_ctx.try_at(&dom) {
                return Outcome::Witness(w);
            }
            if truth.iter().all(|t| *t == Truth::True) {
                unknown = true;
                continue;
            }
            let (axis, rel) = dom
                .iter()
                .zip(&scale)
                .map(|(iv, s)| iv.width() / s)
                .enumerate()
                .fold((0, -1.0), |best, (i, w)| if w > best.1 { (i, w) } else { best });
            if depth >= self.budget.max_depth || rel < self.budget.min_rel_width {
                unknown = true;
                continue;
            }
            let iv = dom[axis];
            let m = iv.mid();
            if !(m > iv.lo && m < iv.hi) {
                unknown = true;
                continue;
            }
            let mut left = dom.clone();
            let mut right = dom;
            left[axis] = Interval::new(iv.lo, m);
            right[axis] = Interval::new(m, iv.hi);
            stack.push((right, depth + 1));
            stack.push((left, depth + 1));
        }
        if unknown {
            Outcome::Unknown
        } else {
            Outcome::Empty
        }
    }
}

/// Builds and confirms candidate counterexamples. Points are repaired onto
/// the coherence relations present in the cube (unit circle via a rational
/// parametrisation, `e = 1/d`), then every atom is checked exactly, or with
/// rigorous point enclosures when an angle is involved.
struct WitnessCtx<'a> {
    atoms: &'a [Atom],
    vars: Vec<Symbol>,
    b: &'a IntervalBox,
    circle: bool,
    inverse: bool,
    trig: bool,
}

fn is_poly_eq(a: &Atom, target: &str) -> bool {
    a.rel == Rel::Eq
        && matches!(a.expr.as_poly(), Some(p) if p.primitive() == crate::poly::parse_poly(target).expect("literal").primitive())
}

impl<'a> WitnessCtx<'a> {
    fn new(atoms: &'a [Atom], p: &Program, b: &'a IntervalBox, trig: bool) -> Self {
        WitnessCtx {
            atoms,
            vars: p.vars.clone(),
            b,
            circle: trig || atoms.iter().any(|a| is_poly_eq(a, "g^2 + h^2 - 1")),
            inverse: atoms.iter().any(|a| is_poly_eq(a, "d*e - 1")),
            trig,
        }
    }

    /// Float candidate at the middle of the domain, repaired.
    fn candidate(&self, dom: &[Interval]) -> BTreeMap<Symbol, f64> {
        let mut pt: BTreeMap<Symbol, f64> = self.vars.iter().zip(dom).map(|(v, iv)| (v.clone(), iv.mid())).collect();
        if self.trig {
            let phi = pt[&sym("phi")];
            pt.insert(sym("g"), phi.cos());
            pt.insert(sym("h"), phi.sin());
        } else if self.circle {
            if let (Some(g), Some(h)) = (pt.get(&sym("g")).copied(), pt.get(&sym("h")).copied()) {
                let r = g.hypot(h);
                if r > 0.0 {
                    pt.insert(sym("g"), g / r);
                    pt.insert(sym("h"), h / r);
                }
            }
        }
        if self.inverse {
            if let Some(d) = pt.get(&sym("d")).copied() {
                pt.insert(sym("e"), 1.0 / d);
            }
        }
        pt
    }

    fn try_at(&self, dom: &[Interval]) -> Option<Witness> {
        let pt = self.candidate(dom);
        let float_ok = self.atoms.iter().all(|a| match a.expr.evaluate_f64(&pt) {
            Ok(v) => match a.rel {
                Rel::Lt => v < 0.0,
                Rel::Le => v <= 0.0,
                Rel::Eq => v.abs() <= 1e-9,
            },
            Err(_) => false,
        });
        if !float_ok {
            return None;
        }
        self.confirm(&pt)
    }

    fn confirm(&self, pt: &BTreeMap<Symbol, f64>) -> Option<Witness> {
        let mut exact: BTreeMap<Symbol, Rational> = BTreeMap::new();
        for (s, v) in pt {
            exact.insert(s.clone(), Rational::from_float(*v)?);
        }
        let mut phi_enc: Option<Interval> = None;
        if self.circle {
            if let (Some(g), Some(h)) = (pt.get(&sym("g")), pt.get(&sym("h"))) {
                let (gq, hq) = if 1.0 + g < 1e-12 {
                    (-Rational::one(), Rational::zero())
                } else {
                    let t = Rational::from_float(h / (1.0 + g))?;
                    let t2 = &t * &t;
                    let den = Rational::one() + &t2;
                    ((Rational::one() - &t2) / &den, (Rational::from_integer(2.into()) * &t) / &den)
                };
                exact.insert(sym("g"), gq);
                exact.insert(sym("h"), hq);
            }
        }
        if self.inverse {
            if let Some(d) = exact.get(&sym("d")).cloned() {
                if d.is_zero() {
                    return None;
                }
                exact.insert(sym("e"), Rational::one() / d);
            }
        }
        if self.trig {
            use num_traits::ToPrimitive;
            let g = exact[&sym("g")].to_f64()?;
            let h = exact[&sym("h")].to_f64()?;
            let a = h.atan2(g);
            let mut enc = Interval::new(a.next_down().next_down(), a.next_up().next_up());
            let target = pt[&sym("phi")];
            let two_pi = Interval::point(2.0).mul(&Interval::pi());
            let shifted = enc.add(&two_pi);
            if (shifted.mid() - target).abs() < (enc.mid() - target).abs() {
                enc = shifted;
            }
            phi_enc = Some(enc);
            exact.remove(&sym("phi"));
        }
        // inside the certification box
        for (s, q) in &exact {
            let iv = self.b.get(s)?;
            let f = Interval::from_rational(q);
            if f.lo < iv.lo || f.hi > iv.hi {
                return None;
            }
        }
        if let Some(enc) = phi_enc {
            let iv = self.b.get(&sym("phi"))?;
            if enc.lo < iv.lo || enc.hi > iv.hi {
                return None;
            }
        }
        for a in self.atoms {
            if !atom_holds(a, &exact, phi_enc) {
                return None;
            }
        }
        let mut point: BTreeMap<String, f64> = exact
            .iter()
            .map(|(s, q)| {
                use num_traits::ToPrimitive;
                (s.name().to_string(), q.to_f64().unwrap_or(f64::NAN))
            })
            .collect();
        if let Some(enc) = phi_enc {
            point.insert("phi".into(), enc.mid());
        }
        Some(Witness { point })
    }
}

/// Rigorous check of one atom at a rational point (with an optional angle
/// enclosure for φ).
fn atom_holds(a: &Atom, exact: &BTreeMap<Symbol, Rational>, phi: Option<Interval>) -> bool {
    if let Ok(v) = a.expr.eval_rational(&|s: &Symbol| exact.get(s).cloned()) {
        return match a.rel {
            Rel::Lt => v < Rational::zero(),
            Rel::Le => v <= Rational::zero(),
            Rel::Eq => v.is_zero(),
        };
    }
    let mut p = Program::new();
    let root = p.expr(&a.expr);
    let dom: Vec<Interval> = p
        .vars
        .iter()
        .map(|v| {
            if v.name() == "phi" {
                if let Some(enc) = phi {
                    return enc;
                }
            }
            exact.get(v).map(Interval::from_rational).unwrap_or(Interval::ENTIRE)
        })
        .collect();
    match p.eval_root(root, &dom) {
        Some(r) => match a.rel {
            Rel::Lt => r.hi < 0.0,
            Rel::Le => r.hi <= 0.0,
            Rel::Eq => r.lo == 0.0 && r.hi == 0.0,
        },
        None => false,
    }
}

/// Exact value of a polynomial at a rational point, if all symbols are bound.
pub fn eval_exact(p: &Polynomial, pt: &BTreeMap<Symbol, Rational>) -> Option<Rational> {
    p.eval_rational(&|s: &Symbol| pt.get(s).cloned()).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(src: &str) -> Vec<Atom> {
        SemialgSet::parse(src).unwrap().nnf().atoms().into_iter().cloned().collect()
    }

    #[test]
    fn empty_and_witness() {
        let budget = Budget::default();
        let eng = Engine::new(&budget);
        let b = IntervalBox::case_study();
        assert_eq!(eng.cube(&cube("g > 0.8 & g < 0.7"), &b).0, Outcome::Empty);
        match eng.cube(&cube("g^2 + h^2 - 1 = 0 & d*e - 1 = 0 & d > 0 & h < -0.5 & d > 3"), &b).0 {
            Outcome::Witness(w) => {
                assert!(w.point["h"] < -0.5 && w.point["d"] > 3.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dnf_sizes() {
        let s = SemialgSet::parse("(a < 0 | b < 0) & (c < 0 | d < 0 | e < 0)").unwrap();
        assert_eq!(dnf(&s, 100).unwrap().len(), 6);
        assert!(dnf(&s, 3).is_none());
    }
}
