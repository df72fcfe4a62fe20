use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

/// Variables with a fixed position in the monomial order. Anything else sorts
/// after them alphabetically.
const RANKED: [&str; 11] = [
    "g", "h", "e", "d", "phi", "alpha", "x", "y", "theta", "u", "t",
];

/// A variable name. Ordering follows `(g, h, e, d, phi, ...)` and then
/// lexicographic order on the name.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Self {
        Symbol(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    fn rank(&self) -> usize {
        RANKED
            .iter()
            .position(|r| *r == &*self.0)
            .unwrap_or(RANKED.len())
    }
}

impl Ord for Symbol {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank()
            .cmp(&other.rank())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_study_order() {
        let mut v: Vec<Symbol> = ["phi", "d", "zeta", "g", "e", "h", "abc"]
            .iter()
            .map(|s| Symbol::new(s))
            .collect();
        v.sort();
        let names: Vec<&str> = v.iter().map(|s| s.name()).collect();
        assert_eq!(names, ["g", "h", "e", "d", "phi", "abc", "zeta"]);
    }
}
