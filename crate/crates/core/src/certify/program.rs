//! Expressions compiled to a shared node arena for forward evaluation and
//! forward-backward (HC4) contraction.

use std::collections::HashMap;

use super::{Interval, IntervalBox, Rel};
use crate::poly::{Expr, Monomial, Polynomial, Rational, Symbol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Node {
    Const(u64, u64),
    Var(usize),
    Add(usize, usize),
    Mul(usize, usize),
    Neg(usize),
    Pow(usize, u32),
    Div(usize, usize),
    Sqrt(usize),
    Sin(usize),
    Cos(usize),
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub root: usize,
    pub rel: Rel,
    /// Half-width of the band used for equalities.
    pub tol: f64,
}

#[derive(Clone, Debug, Default)]
pub struct Program {
    nodes: Vec<Node>,
    memo: HashMap<Node, usize>,
    pub vars: Vec<Symbol>,
    pub constraints: Vec<Constraint>,
    /// Variable indices of (g, h, φ) tied by g = cos φ, h = sin φ.
    trig: Option<(usize, usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Truth {
    True,
    False,
    Unknown,
}

impl Program {
    pub fn new() -> Self {
        Program::default()
    }

    fn push(&mut self, n: Node) -> usize {
        if let Some(&i) = self.memo.get(&n) {
            return i;
        }
        self.nodes.push(n);
        let i = self.nodes.len() - 1;
        self.memo.insert(n, i);
        i
    }

    fn constant(&mut self, iv: Interval) -> usize {
        self.push(Node::Const(iv.lo.to_bits(), iv.hi.to_bits()))
    }

    pub fn var(&mut self, s: &Symbol) -> usize {
        let idx = match self.vars.iter().position(|v| v == s) {
            Some(i) => i,
            None => {
                self.vars.push(s.clone());
                self.vars.len() - 1
            }
        };
        self.push(Node::Var(idx))
    }

    fn add(&mut self, a: usize, b: usize) -> usize {
        self.push(Node::Add(a, b))
    }

    fn mul(&mut self, a: usize, b: usize) -> usize {
        self.push(Node::Mul(a, b))
    }

    fn monomial(&mut self, m: &Monomial) -> Option<usize> {
        let mut acc: Option<usize> = None;
        for (s, k) in m.factors() {
            let v = self.var(s);
            let f = if *k == 1 { v } else { self.push(Node::Pow(v, *k)) };
            acc = Some(match acc {
                None => f,
                Some(a) => self.mul(a, f),
            });
        }
        acc
    }

    fn term(&mut self, m: &Monomial, c: &Rational) -> usize {
        let one = Rational::from_integer(1.into());
        match self.monomial(m) {
            None => self.constant(Interval::from_rational(c)),
            Some(mn) if *c == one => mn,
            Some(mn) if *c == -one.clone() => self.push(Node::Neg(mn)),
            Some(mn) => {
                let k = self.constant(Interval::from_rational(c));
                self.mul(k, mn)
            }
        }
    }

    /// Polynomials are evaluated as (monomial content) × (sum of terms),
    /// which keeps common sign factors like `d*g` visible to the arithmetic.
    pub fn poly(&mut self, p: &Polynomial) -> usize {
        if p.is_zero() {
            return self.constant(Interval::point(0.0));
        }
        let content = p.monomial_content();
        if !content.is_one() && p.num_terms() > 1 {
            let rest = Polynomial::from_terms(
                p.terms()
                    .map(|(m, c)| (m.div(&content).expect("content divides"), c.clone())),
            );
            let m = self.monomial(&content).expect("non-trivial content");
            let r = self.poly(&rest);
            return self.mul(m, r);
        }
        let mut acc: Option<usize> = None;
        for (m, c) in p.terms().rev() {
            let t = self.term(m, c);
            acc = Some(match acc {
                None => t,
                Some(a) => self.add(a, t),
            });
        }
        acc.expect("nonzero polynomial")
    }

    pub fn expr(&mut self, x: &Expr) -> usize {
        match x {
            Expr::Poly(p) => self.poly(p),
            Expr::Pi(q) => {
                let iv = Interval::from_rational(q).mul(&Interval::pi());
                self.constant(iv)
            }
            Expr::Sin(v) => {
                let n = self.var(v);
                self.push(Node::Sin(n))
            }
            Expr::Cos(v) => {
                let n = self.var(v);
                self.push(Node::Cos(n))
            }
            Expr::Sqrt(a) => {
                let n = self.expr(a);
                self.push(Node::Sqrt(n))
            }
            Expr::Sum(v) => {
                let mut it = v.iter();
                let mut acc = self.expr(it.next().expect("non-empty sum"));
                for t in it {
                    let n = self.expr(t);
                    acc = self.add(acc, n);
                }
                acc
            }
            Expr::Prod(v) => {
                let mut it = v.iter();
                let mut acc = self.expr(it.next().expect("non-empty product"));
                for t in it {
                    let n = self.expr(t);
                    acc = self.mul(acc, n);
                }
                acc
            }
            Expr::Neg(a) => {
                let n = self.expr(a);
                self.push(Node::Neg(n))
            }
            Expr::Quot(a, b) => {
                let (na, nb) = (self.expr(a), self.expr(b));
                self.push(Node::Div(na, nb))
            }
            Expr::Pow(a, k) => {
                let n = self.expr(a);
                self.push(Node::Pow(n, *k))
            }
        }
    }

    pub fn constrain(&mut self, x: &Expr, rel: Rel, tol: f64) -> usize {
        let root = self.expr(x);
        self.constraints.push(Constraint { root, rel, tol });
        root
    }

    /// Adds `g = cos φ` and `h = sin φ` when all three variables occur.
    pub fn add_trig_coherence(&mut self, g: &Symbol, h: &Symbol, phi: &Symbol) {
        if [g, h, phi].iter().all(|s| self.vars.contains(s)) {
            let (gv, hv, pv) = (self.var(g), self.var(h), self.var(phi));
            let idx = |s: &Symbol| self.vars.iter().position(|v| v == s).expect("present");
            self.trig = Some((idx(g), idx(h), idx(phi)));
            let c = self.push(Node::Cos(pv));
            let s = self.push(Node::Sin(pv));
            for (v, t) in [(gv, c), (hv, s)] {
                let nt = self.push(Node::Neg(t));
                let root = self.add(v, nt);
                self.constraints.push(Constraint {
                    root,
                    rel: Rel::Eq,
                    tol: 0.0,
                });
            }
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Box axes in program variable order; missing axes are unbounded.
    pub fn load(&self, b: &IntervalBox) -> Vec<Interval> {
        self.vars
            .iter()
            .map(|v| b.get(v).unwrap_or(Interval::ENTIRE))
            .collect()
    }

    pub fn store(&self, dom: &[Interval], b: &mut IntervalBox) {
        for (v, iv) in self.vars.iter().zip(dom) {
            b.set(v.clone(), *iv);
        }
    }

    /// Forward evaluation; `None` entries mean a division by an interval
    /// containing zero somewhere below that node.
    pub fn forward(&self, dom: &[Interval]) -> Vec<Option<Interval>> {
        let mut vals: Vec<Option<Interval>> = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let v = match *n {
                Node::Const(lo, hi) => Some(Interval::new(f64::from_bits(lo), f64::from_bits(hi))),
                Node::Var(i) => Some(dom[i]),
                Node::Add(a, b) => vals[a].zip(vals[b]).map(|(x, y)| x.add(&y)),
                Node::Mul(a, b) => vals[a].zip(vals[b]).map(|(x, y)| x.mul(&y)),
                Node::Neg(a) => vals[a].map(|x| x.neg()),
                Node::Pow(a, k) => vals[a].map(|x| x.powi(k)),
                Node::Div(a, b) => vals[a].zip(vals[b]).and_then(|(x, y)| x.div(&y)),
                Node::Sqrt(a) => vals[a].map(|x| x.sqrt()),
                Node::Sin(a) => vals[a].map(|x| x.sin()),
                Node::Cos(a) => vals[a].map(|x| x.cos()),
            };
            vals.push(v);
        }
        vals
    }

    pub fn eval_root(&self, root: usize, dom: &[Interval]) -> Option<Interval> {
        self.forward(dom)[root]
    }

    /// Three-valued truth of each constraint over the domain.
    pub fn truth(&self, dom: &[Interval]) -> Vec<Truth> {
        let vals = self.forward(dom);
        self.constraints
            .iter()
            .map(|c| match vals[c.root] {
                None => Truth::Unknown,
                Some(r) if r.is_empty() => Truth::False,
                Some(r) => match c.rel {
                    Rel::Lt if r.hi < 0.0 => Truth::True,
                    Rel::Lt if r.lo >= 0.0 => Truth::False,
                    Rel::Le if r.hi <= 0.0 => Truth::True,
                    Rel::Le if r.lo > 0.0 => Truth::False,
                    Rel::Eq if r.lo > c.tol || r.hi < -c.tol => Truth::False,
                    Rel::Eq if r.lo >= -c.tol && r.hi <= c.tol => Truth::True,
                    _ => Truth::Unknown,
                },
            })
            .collect()
    }

    /// One forward-backward sweep over every constraint. Returns `false` when
    /// the domain is proved empty.
    pub fn hc4(&self, dom: &mut [Interval]) -> bool {
        let fwd = self.forward(dom);
        let mut vals: Vec<Interval> = fwd.iter().map(|v| v.unwrap_or(Interval::ENTIRE)).collect();
        let mut known: Vec<bool> = fwd.iter().map(|v| v.is_some()).collect();
        for c in &self.constraints {
            let band = match c.rel {
                Rel::Lt | Rel::Le => Interval::new(f64::NEG_INFINITY, 0.0),
                Rel::Eq => Interval::new(-c.tol, c.tol),
            };
            vals[c.root] = vals[c.root].intersect(&band);
            if vals[c.root].is_empty() || (c.rel == Rel::Lt && vals[c.root].lo >= 0.0 && known[c.root]) {
                return false;
            }
        }
        for i in (0..self.nodes.len()).rev() {
            let z = vals[i];
            if z.is_empty() {
                return false;
            }
            match self.nodes[i] {
                Node::Const(..) | Node::Var(_) => {}
                Node::Add(a, b) => {
                    let va = vals[a].intersect(&z.sub(&vals[b]));
                    let vb = vals[b].intersect(&z.sub(&va));
                    vals[a] = va;
                    vals[b] = vb;
                }
                Node::Mul(a, b) => {
                    if a == b {
                        let r = z.nth_root_nonneg(2);
                        vals[a] = narrow_even(vals[a], r);
                    } else {
                        if let Some(q) = z.div(&vals[b]) {
                            vals[a] = vals[a].intersect(&q);
                        }
                        if let Some(q) = z.div(&vals[a]) {
                            vals[b] = vals[b].intersect(&q);
                        }
                    }
                }
                Node::Neg(a) => vals[a] = vals[a].intersect(&z.neg()),
                Node::Pow(a, k) => {
                    if k % 2 == 0 {
                        let r = z.nth_root_nonneg(k);
                        vals[a] = narrow_even(vals[a], r);
                    } else {
                        let pos = z.nth_root_nonneg(k);
                        let neg = z.neg().nth_root_nonneg(k).neg();
                        let hull = pos.hull(&neg);
                        vals[a] = vals[a].intersect(&hull);
                    }
                }
                Node::Div(a, b) => {
                    if known[b] {
                        vals[a] = vals[a].intersect(&z.mul(&vals[b]));
                    }
                    if let Some(q) = vals[a].div(&z) {
                        vals[b] = vals[b].intersect(&q);
                    }
                }
                Node::Sqrt(a) => {
                    let zz = z.intersect(&Interval::new(0.0, f64::INFINITY));
                    vals[a] = vals[a].intersect(&zz.sqr());
                }
                Node::Sin(a) => vals[a] = vals[a].sin_preimage(&z),
                Node::Cos(a) => vals[a] = vals[a].cos_preimage(&z),
            }
            known[i] = true;
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if let Node::Var(k) = n {
                dom[*k] = dom[*k].intersect(&vals[i]);
                if dom[*k].is_empty() {
                    return false;
                }
            }
        }
        self.trig_step(dom)
    }

    /// Joint angle narrowing: the cosine and sine branches are intersected
    /// piecewise before taking the hull, which handles the wrap at 0 / 2π.
    fn trig_step(&self, dom: &mut [Interval]) -> bool {
        let Some((gi, hi, pi)) = self.trig else {
            return true;
        };
        let phi = dom[pi];
        let cos_pieces = phi.trig_preimage_pieces(&dom[gi], 0.0);
        let sin_pieces = phi.trig_preimage_pieces(&dom[hi], 0.5);
        let mut out = Interval::empty();
        for c in &cos_pieces {
            for s in &sin_pieces {
                out = out.hull(&c.intersect(s));
            }
        }
        dom[pi] = out;
        if out.is_empty() {
            return false;
        }
        dom[gi] = dom[gi].intersect(&out.cos());
        dom[hi] = dom[hi].intersect(&out.sin());
        !dom[gi].is_empty() && !dom[hi].is_empty()
    }

    /// Repeated HC4 sweeps until the domain stops shrinking noticeably.
    pub fn contract(&self, dom: &mut [Interval], max_sweeps: usize) -> bool {
        for _ in 0..max_sweeps {
            let before: Vec<f64> = dom.iter().map(|iv| iv.width()).collect();
            if !self.hc4(dom) {
                return false;
            }
            let progress = dom
                .iter()
                .zip(&before)
                .any(|(iv, w)| *w > 0.0 && iv.width() < 0.9 * w);
            if !progress {
                break;
            }
        }
        true
    }
}

/// x ∩ (−r ∪ r) for a nonnegative interval r, returned as a hull.
fn narrow_even(x: Interval, r: Interval) -> Interval {
    let pos = x.intersect(&r);
    let neg = x.intersect(&r.neg());
    pos.hull(&neg)
}

/// Enclosure of the range of `x` over `b`.
pub fn interval_eval(x: &Expr, b: &IntervalBox) -> Result<Interval, super::CertifyError> {
    let mut p = Program::new();
    let root = p.expr(x);
    for v in &p.vars {
        if b.get(v).is_none() {
            return Err(super::CertifyError::UnboundedVariable(v.clone()));
        }
    }
    let dom = p.load(b);
    p.eval_root(root, &dom).ok_or(super::CertifyError::DivisionInterval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_expr;

    fn bx(axes: &[(&str, f64, f64)]) -> IntervalBox {
        IntervalBox::new(axes.iter().map(|(s, lo, hi)| (Symbol::new(s), Interval::new(*lo, *hi))))
    }

    #[test]
    fn eval_examples() {
        let x = parse_expr("-2*g*(h+1)/e").unwrap();
        let r = interval_eval(&x, &bx(&[("g", 0.71, 1.0), ("h", -1.0, 1.0), ("e", 0.5, 2.0)])).unwrap();
        assert!(r.lo >= (-8.0f64).next_down() && r.hi <= 0.0f64.next_up(), "{r:?}");
        assert_eq!(r.hi, 0.0);
        let c = interval_eval(&parse_expr("cos(phi)").unwrap(), &bx(&[("phi", 0.0, std::f64::consts::FRAC_PI_4)])).unwrap();
        assert!(c.lo <= std::f64::consts::FRAC_1_SQRT_2 && c.hi >= 1.0);
        let k = interval_eval(&parse_expr("3").unwrap(), &bx(&[])).unwrap();
        assert_eq!(k, Interval::point(3.0));
        assert!(interval_eval(&parse_expr("1/g").unwrap(), &bx(&[("g", -1.0, 1.0)])).is_err());
    }

    #[test]
    fn contraction_detects_infeasibility() {
        let mut p = Program::new();
        p.constrain(&parse_expr("1 - 2*g^2").unwrap(), Rel::Lt, 0.0);
        p.constrain(&parse_expr("g - 7/10").unwrap(), Rel::Le, 0.0);
        p.constrain(&parse_expr("-g").unwrap(), Rel::Lt, 0.0);
        let mut dom = p.load(&bx(&[("g", -1.0, 1.0)]));
        assert!(!p.contract(&mut dom, 10));
    }

    #[test]
    fn trig_coherence_contracts_angle() {
        let mut p = Program::new();
        p.constrain(&parse_expr("1 - 2*g^2").unwrap(), Rel::Lt, 0.0);
        p.constrain(&parse_expr("-g").unwrap(), Rel::Lt, 0.0);
        p.constrain(&parse_expr("1/10 - h").unwrap(), Rel::Lt, 0.0);
        p.var(&Symbol::new("phi"));
        p.add_trig_coherence(&Symbol::new("g"), &Symbol::new("h"), &Symbol::new("phi"));
        let b = IntervalBox::case_study();
        let mut dom = p.load(&b);
        assert!(p.contract(&mut dom, 20));
        let phi = dom[p.vars.iter().position(|v| v.name() == "phi").unwrap()];
        assert!(phi.lo >= 0.0 && phi.hi < 0.7854, "{phi:?}");
    }
}
