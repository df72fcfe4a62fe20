use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::Interval;
use crate::poly::Symbol;

/// Axis-aligned box: one closed interval per variable.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "BTreeMap<String, [f64; 2]>", try_from = "BTreeMap<String, [f64; 2]>")]
pub struct IntervalBox {
    axes: BTreeMap<Symbol, Interval>,
}

impl IntervalBox {
    pub fn new<I: IntoIterator<Item = (Symbol, Interval)>>(it: I) -> Self {
        IntervalBox {
            axes: it.into_iter().collect(),
        }
    }

    /// d ∈ [1e-3, 1e2], e ∈ [1e-2, 1e3], g, h ∈ [−1, 1], φ ∈ [0, 2π].
    pub fn case_study() -> Self {
        IntervalBox::new([
            (Symbol::new("g"), Interval::new(-1.0, 1.0)),
            (Symbol::new("h"), Interval::new(-1.0, 1.0)),
            (Symbol::new("e"), Interval::new(1e-2, 1e3)),
            (Symbol::new("d"), Interval::new(1e-3, 1e2)),
            (Symbol::new("phi"), Interval::new(0.0, (2.0 * PI).next_up())),
        ])
    }

    pub fn get(&self, s: &Symbol) -> Option<Interval> {
        self.axes.get(s).copied()
    }

    pub fn set(&mut self, s: Symbol, iv: Interval) {
        self.axes.insert(s, iv);
    }

    pub fn with(mut self, name: &str, lo: f64, hi: f64) -> Self {
        self.set(Symbol::new(name), Interval::new(lo, hi));
        self
    }

    pub fn axes(&self) -> impl Iterator<Item = (&Symbol, &Interval)> {
        self.axes.iter()
    }

    pub fn variables(&self) -> Vec<Symbol> {
        self.axes.keys().cloned().collect()
    }

    pub fn contains_point(&self, p: &BTreeMap<Symbol, f64>) -> bool {
        self.axes
            .iter()
            .all(|(s, iv)| p.get(s).map(|x| iv.contains(*x)).unwrap_or(true))
    }

    pub fn is_empty(&self) -> bool {
        self.axes.values().any(|iv| iv.is_empty())
    }

    pub fn midpoint(&self) -> BTreeMap<Symbol, f64> {
        self.axes.iter().map(|(s, iv)| (s.clone(), iv.mid())).collect()
    }

    /// Restriction to the listed variables (missing ones are skipped).
    pub fn restrict(&self, vars: &[Symbol]) -> IntervalBox {
        IntervalBox {
            axes: vars
                .iter()
                .filter_map(|v| self.axes.get(v).map(|iv| (v.clone(), *iv)))
                .collect(),
        }
    }

    /// Parses `name=lo:hi`.
    pub fn parse_axis(spec: &str) -> Result<(Symbol, Interval), String> {
        let (name, range) = spec.split_once('=').ok_or_else(|| format!("expected k=lo:hi, got `{spec}`"))?;
        let (lo, hi) = range.split_once(':').ok_or_else(|| format!("expected lo:hi in `{spec}`"))?;
        let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower bound in `{spec}`"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper bound in `{spec}`"))?;
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(format!("invalid bounds in `{spec}`"));
        }
        Ok((Symbol::new(name.trim()), Interval::new(lo, hi)))
    }
}

impl From<IntervalBox> for BTreeMap<String, [f64; 2]> {
    fn from(b: IntervalBox) -> Self {
        b.axes
            .into_iter()
            .map(|(s, iv)| (s.name().to_string(), [iv.lo, iv.hi]))
            .collect()
    }
}

impl TryFrom<BTreeMap<String, [f64; 2]>> for IntervalBox {
    type Error = String;
    fn try_from(m: BTreeMap<String, [f64; 2]>) -> Result<Self, String> {
        let mut out = BTreeMap::new();
        for (k, [lo, hi]) in m {
            if !(lo <= hi) {
                return Err(format!("empty axis {k}"));
            }
            out.insert(Symbol::new(&k), Interval::new(lo, hi));
        }
        Ok(IntervalBox { axes: out })
    }
}

impl fmt::Debug for IntervalBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for IntervalBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .axes
            .iter()
            .map(|(s, iv)| format!("{s}∈[{}, {}]", iv.lo, iv.hi))
            .collect();
        f.write_str(&parts.join(", "))
    }
}
