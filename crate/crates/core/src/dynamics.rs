//! Vector fields, control modes and the built-in station-keeping models.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::certify::SemialgSet;
use crate::poly::{parse_poly, Expr, PolyError, Polynomial, Symbol};

#[derive(Debug, thiserror::Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("`{0}` is not a declared state variable")]
    UndeclaredVariable(Symbol),
    #[error("invalid model json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Polynomial right-hand side, one entry per state variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorField {
    components: BTreeMap<Symbol, Polynomial>,
}

impl VectorField {
    pub fn new<I: IntoIterator<Item = (Symbol, Polynomial)>>(it: I) -> Self {
        VectorField {
            components: it.into_iter().collect(),
        }
    }

    pub fn component(&self, v: &Symbol) -> Option<&Polynomial> {
        self.components.get(v)
    }

    pub fn components(&self) -> impl Iterator<Item = (&Symbol, &Polynomial)> {
        self.components.iter()
    }

    pub fn variables(&self) -> Vec<Symbol> {
        self.components.keys().cloned().collect()
    }

    /// Sub-field on `vars`; `None` unless the restriction is autonomous.
    pub fn restrict(&self, vars: &[Symbol]) -> Option<VectorField> {
        let mut out = BTreeMap::new();
        for v in vars {
            let c = self.components.get(v)?;
            if !c.variables().iter().all(|s| vars.contains(s)) {
                return None;
            }
            out.insert(v.clone(), c.clone());
        }
        Some(VectorField { components: out })
    }

    pub fn eval_f64(&self, point: &BTreeMap<Symbol, f64>) -> Result<BTreeMap<Symbol, f64>, PolyError> {
        self.components
            .iter()
            .map(|(v, p)| Ok((v.clone(), p.evaluate_f64(point)?)))
            .collect()
    }
}

pub fn sym(name: &str) -> Symbol {
    Symbol::new(name)
}

/// The polynomial plant with control `u` substituted:
/// ġ = −(he+u)h, ḣ = (he+u)g, ė = ge², ḋ = −g, φ̇ = he+u.
pub fn plant_field(u: &Polynomial) -> VectorField {
    let (g, h, e) = (Polynomial::var("g"), Polynomial::var("h"), Polynomial::var("e"));
    let turn = &(&h * &e) + u;
    VectorField::new([
        (sym("g"), -(&turn * &h)),
        (sym("h"), &turn * &g),
        (sym("e"), &(&g * &e) * &e),
        (sym("d"), -g.clone()),
        (sym("phi"), turn.clone()),
    ])
}

/// Adds the bearing α with α̇ = −he.
pub fn with_alpha(f: &VectorField) -> VectorField {
    let mut out = f.clone();
    out.components
        .insert(sym("alpha"), -(&Polynomial::var("h") * &Polynomial::var("e")));
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mode {
    pub name: String,
    pub control: Polynomial,
    pub field: VectorField,
    pub domain: SemialgSet,
}

impl Mode {
    pub fn new(name: &str, control: Polynomial, domain: SemialgSet) -> Self {
        let field = plant_field(&control);
        Mode {
            name: name.to_string(),
            control,
            field,
            domain,
        }
    }
}

/// The polynomial vector field of a mode (control already eliminated).
pub fn mode_vector_field(m: &Mode) -> VectorField {
    m.field.clone()
}

#[derive(Clone, Debug, PartialEq)]
pub struct HybridSystem {
    pub variables: Vec<Symbol>,
    pub modes: Vec<Mode>,
    pub coherence: SemialgSet,
}

fn set(src: &str) -> SemialgSet {
    SemialgSet::parse(src).expect("built-in set")
}

/// `2g ≤ √2`, written with polynomial atoms only.
pub fn constant_guard() -> SemialgSet {
    set("g <= 0 | 2*g^2 - 1 <= 0")
}

/// `2g > √2`.
pub fn proportional_guard() -> SemialgSet {
    set("g > 0 & 2*g^2 - 1 > 0")
}

/// Δ: g² + h² = 1 ∧ de = 1 ∧ d > 0.
pub fn coherence() -> SemialgSet {
    set("g^2 + h^2 - 1 = 0 & d*e - 1 = 0 & d > 0")
}

pub fn station_keeping_model() -> HybridSystem {
    let d_pos = set("d > 0");
    HybridSystem {
        variables: ["g", "h", "e", "d", "phi"].iter().map(|s| sym(s)).collect(),
        modes: vec![
            Mode::new(
                "constant",
                Polynomial::int(1),
                SemialgSet::and(vec![d_pos.clone(), constant_guard()]),
            ),
            Mode::new(
                "proportional",
                -Polynomial::var("h"),
                SemialgSet::and(vec![d_pos, proportional_guard()]),
            ),
        ],
        coherence: coherence(),
    }
}

impl HybridSystem {
    pub fn mode(&self, name: &str) -> Option<&Mode> {
        self.modes.iter().find(|m| m.name == name)
    }

    pub fn to_json(&self) -> ModelJson {
        ModelJson {
            variables: self.variables.iter().map(|s| s.name().to_string()).collect(),
            modes: self
                .modes
                .iter()
                .map(|m| ModeJson {
                    name: m.name.clone(),
                    control: m.control.to_string(),
                    field: m
                        .field
                        .components()
                        .map(|(v, p)| (v.name().to_string(), p.to_string()))
                        .collect(),
                    domain: m.domain.to_string(),
                })
                .collect(),
            coherence: self.coherence.to_string(),
        }
    }

    pub fn from_json(m: &ModelJson) -> Result<HybridSystem, DynamicsError> {
        let variables: Vec<Symbol> = m.variables.iter().map(|s| sym(s)).collect();
        let declared = |s: &Symbol| -> Result<(), DynamicsError> {
            if variables.contains(s) {
                Ok(())
            } else {
                Err(DynamicsError::UndeclaredVariable(s.clone()))
            }
        };
        let mut modes = Vec::new();
        for mj in &m.modes {
            let control = parse_poly(&mj.control)?;
            let mut comps = Vec::new();
            for (v, src) in &mj.field {
                let v = sym(v);
                declared(&v)?;
                let p = parse_poly(src)?;
                for s in p.variables() {
                    declared(&s)?;
                }
                comps.push((v, p));
            }
            let domain = SemialgSet::parse(&mj.domain)?;
            for s in domain.free_symbols() {
                declared(&s)?;
            }
            modes.push(Mode {
                name: mj.name.clone(),
                control,
                field: VectorField::new(comps),
                domain,
            });
        }
        Ok(HybridSystem {
            variables,
            modes,
            coherence: SemialgSet::parse(&m.coherence)?,
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("model serializes")
    }

    pub fn from_json_str(src: &str) -> Result<HybridSystem, DynamicsError> {
        let m: ModelJson = serde_json::from_str(src)?;
        Self::from_json(&m)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelJson {
    pub variables: Vec<String>,
    pub modes: Vec<ModeJson>,
    pub coherence: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeJson {
    pub name: String,
    pub control: String,
    pub field: BTreeMap<String, String>,
    pub domain: String,
}

/// Field given by expressions (used for the Cartesian model).
#[derive(Clone, Debug, PartialEq)]
pub struct ExprField {
    pub components: Vec<(Symbol, Expr)>,
}

impl ExprField {
    pub fn eval_f64(&self, point: &BTreeMap<Symbol, f64>) -> Result<Vec<f64>, PolyError> {
        self.components.iter().map(|(_, x)| x.evaluate_f64(point)).collect()
    }
}

/// ẋ = cos θ, ẏ = sin θ, θ̇ = u.
pub fn cartesian_model(u: Expr) -> ExprField {
    ExprField {
        components: vec![
            (sym("x"), Expr::cos("theta")),
            (sym("y"), Expr::sin("theta")),
            (sym("theta"), u),
        ],
    }
}

/// Polar coordinates (d, φ, α) of a Cartesian pose, with φ in [0, 2π).
pub fn cartesian_to_polar(x: f64, y: f64, theta: f64) -> (f64, f64, f64) {
    let d = x.hypot(y);
    let alpha = y.atan2(x);
    let phi = (theta - alpha + PI).rem_euclid(2.0 * PI);
    (d, phi, alpha)
}

pub fn polar_to_cartesian(d: f64, phi: f64, alpha: f64) -> (f64, f64, f64) {
    (d * alpha.cos(), d * alpha.sin(), phi + alpha - PI)
}

/// The control law as a function of φ: u = 1 when 2cos φ ≤ √2, else −sin φ.
pub fn control_law(phi: f64) -> f64 {
    let g = phi.cos();
    if g <= 0.0 || 2.0 * g * g <= 1.0 {
        1.0
    } else {
        -phi.sin()
    }
}

/// Coherent polynomial state `[g, h, e, d, φ]` for a polar position.
pub fn coherent_state(d: f64, phi: f64) -> [f64; 5] {
    [phi.cos(), phi.sin(), 1.0 / d, d, phi]
}

pub fn state_map(x: &[f64; 5]) -> BTreeMap<Symbol, f64> {
    ["g", "h", "e", "d", "phi"]
        .iter()
        .zip(x.iter())
        .map(|(s, v)| (sym(s), *v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{lie_derivative, parse_poly};

    #[test]
    fn model_components() {
        let m = station_keeping_model();
        assert_eq!(m.modes.len(), 2);
        let c = mode_vector_field(&m.modes[0]);
        let p = mode_vector_field(&m.modes[1]);
        assert_eq!(c.component(&sym("e")).unwrap(), &parse_poly("g*e^2").unwrap());
        assert_eq!(p.component(&sym("h")).unwrap(), &parse_poly("(h*e - h)*g").unwrap());
        assert_eq!(c.component(&sym("phi")).unwrap(), &parse_poly("h*e + 1").unwrap());
        assert_eq!(p.component(&sym("phi")).unwrap(), &parse_poly("h*e - h").unwrap());
        assert_eq!(p.component(&sym("g")).unwrap(), &parse_poly("-(h*e - h)*h").unwrap());
    }

    #[test]
    fn coherence_is_preserved_symbolically() {
        let circle = parse_poly("g^2 + h^2 - 1").unwrap();
        let de = parse_poly("d*e - 1").unwrap();
        for m in station_keeping_model().modes {
            assert!(lie_derivative(&circle, &m.field).unwrap().is_zero());
            assert_eq!(
                lie_derivative(&de, &m.field).unwrap(),
                &parse_poly("g*e").unwrap() * &de
            );
        }
    }

    #[test]
    fn json_round_trip() {
        let m = station_keeping_model();
        let back = HybridSystem::from_json_str(&m.to_json_string()).unwrap();
        assert_eq!(back, m);
        let bad = m.to_json_string().replace("\"g*e^2\"", "\"z*e^2\"");
        assert!(matches!(
            HybridSystem::from_json_str(&bad),
            Err(DynamicsError::UndeclaredVariable(_))
        ));
    }

    #[test]
    fn cartesian_field() {
        let f = cartesian_model(Expr::int(1));
        let pt: BTreeMap<Symbol, f64> = [(sym("theta"), 0.0)].into_iter().collect();
        assert_eq!(f.eval_f64(&pt).unwrap(), vec![1.0, 0.0, 1.0]);
        let f0 = cartesian_model(Expr::zero());
        assert_eq!(f0.eval_f64(&pt).unwrap()[2], 0.0);
    }

    #[test]
    fn equilibrium_is_fixed() {
        let m = station_keeping_model();
        let x = state_map(&[0.0, -1.0, 1.0, 1.0, 1.5 * PI]);
        for v in m.modes[0].field.eval_f64(&x).unwrap().values() {
            assert_eq!(*v, 0.0);
        }
    }
}
