use std::cmp::Ordering;
use std::fmt;

use super::Symbol;

/// Power product of variables. Exponents are strictly positive and the factors
/// are sorted by variable; the empty product is `1`.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(Symbol, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(s: Symbol) -> Self {
        Monomial(vec![(s, 1)])
    }

    pub fn from_pairs<I: IntoIterator<Item = (Symbol, u32)>>(pairs: I) -> Self {
        let mut v: Vec<(Symbol, u32)> = Vec::new();
        for (s, k) in pairs {
            if k == 0 {
                continue;
            }
            match v.iter_mut().find(|(t, _)| *t == s) {
                Some(slot) => slot.1 += k,
                None => v.push((s, k)),
            }
        }
        v.sort_by(|a, b| a.0.cmp(&b.0));
        Monomial(v)
    }

    pub fn factors(&self) -> &[(Symbol, u32)] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, k)| *k).sum()
    }

    pub fn exponent(&self, s: &Symbol) -> u32 {
        self.0
            .iter()
            .find(|(t, _)| t == s)
            .map(|(_, k)| *k)
            .unwrap_or(0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0.clone(), a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::with_capacity(self.0.len());
        let mut j = 0;
        for (s, k) in &self.0 {
            if j < other.0.len() && other.0[j].0 == *s {
                let m = other.0[j].1;
                if m > *k {
                    return None;
                }
                if *k > m {
                    out.push((s.clone(), k - m));
                }
                j += 1;
            } else if j < other.0.len() && other.0[j].0 < *s {
                return None;
            } else {
                out.push((s.clone(), *k));
            }
        }
        if j < other.0.len() {
            return None;
        }
        Some(Monomial(out))
    }

    /// Greatest common divisor of two monomials.
    pub fn gcd(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .filter_map(|(s, k)| {
                    let m = other.exponent(s);
                    (m > 0).then(|| (s.clone(), (*k).min(m)))
                })
                .collect(),
        )
    }

    /// Partial derivative: `(exponent, monomial / var)`, or `None` if `var` is absent.
    pub fn derive(&self, var: &Symbol) -> Option<(u32, Monomial)> {
        let k = self.exponent(var);
        if k == 0 {
            return None;
        }
        let rest = self
            .0
            .iter()
            .filter_map(|(s, e)| {
                if s == var {
                    (k > 1).then(|| (s.clone(), k - 1))
                } else {
                    Some((s.clone(), *e))
                }
            })
            .collect();
        Some((k, Monomial(rest)))
    }

    pub fn pow(&self, n: u32) -> Monomial {
        if n == 0 {
            return Monomial::one();
        }
        Monomial(self.0.iter().map(|(s, k)| (s.clone(), k * n)).collect())
    }

    /// All monomials over `vars` with total degree at most `maxdeg`, ascending.
    pub fn all_up_to(vars: &[Symbol], maxdeg: u32) -> Vec<Monomial> {
        let mut sorted = vars.to_vec();
        sorted.sort();
        sorted.dedup();
        let mut out = Vec::new();
        let mut current = Vec::new();
        fn rec(
            vars: &[Symbol],
            idx: usize,
            left: u32,
            current: &mut Vec<(Symbol, u32)>,
            out: &mut Vec<Monomial>,
        ) {
            if idx == vars.len() {
                out.push(Monomial::from_pairs(current.iter().cloned()));
                return;
            }
            for k in 0..=left {
                current.push((vars[idx].clone(), k));
                rec(vars, idx + 1, left - k, current, out);
                current.pop();
            }
        }
        rec(&sorted, 0, maxdeg, &mut current, &mut out);
        out.sort();
        out
    }
}

/// Graded lexicographic order with the variable order of [`Symbol`].
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            o => return o,
        }
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        loop {
            match (a.get(i), b.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some((sa, ka)), Some((sb, kb))) => match sa.cmp(sb) {
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => {
                        if ka != kb {
                            return ka.cmp(kb);
                        }
                        i += 1;
                        j += 1;
                    }
                },
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for (i, (s, k)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            if *k == 1 {
                write!(f, "{s}")?;
            } else {
                write!(f, "{s}^{k}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(pairs: &[(&str, u32)]) -> Monomial {
        Monomial::from_pairs(pairs.iter().map(|(s, k)| (Symbol::new(s), *k)))
    }

    #[test]
    fn grlex_order() {
        // degree first
        assert!(m(&[("d", 2)]) > m(&[("g", 1)]));
        // then lex with g > h > e > d
        assert!(m(&[("g", 1), ("e", 1)]) > m(&[("h", 2)]));
        assert!(m(&[("h", 1), ("e", 1)]) > m(&[("e", 2)]));
        assert!(m(&[("e", 1)]) > m(&[("d", 1)]));
        assert_eq!(m(&[("e", 1), ("h", 1)]), m(&[("h", 1), ("e", 1)]));
    }

    #[test]
    fn division_and_gcd() {
        let a = m(&[("g", 2), ("e", 1)]);
        let b = m(&[("g", 1)]);
        assert_eq!(a.div(&b), Some(m(&[("g", 1), ("e", 1)])));
        assert_eq!(b.div(&a), None);
        assert_eq!(m(&[("h", 1)]).div(&m(&[("e", 1)])), None);
        assert_eq!(a.gcd(&m(&[("g", 1), ("d", 3)])), b);
    }

    #[test]
    fn template_size() {
        let vars: Vec<Symbol> = ["g", "h", "e"].iter().map(|s| Symbol::new(s)).collect();
        assert_eq!(Monomial::all_up_to(&vars, 2).len(), 10);
        assert_eq!(Monomial::all_up_to(&vars, 0), vec![Monomial::one()]);
    }
}
