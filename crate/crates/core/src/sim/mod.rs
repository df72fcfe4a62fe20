//! Fixed-step RK4 simulation of the switched plant with event localization.

mod output;

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::PI;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::certify::SemialgSet;
use crate::dynamics::{cartesian_to_polar, HybridSystem, VectorField};
use crate::poly::{Polynomial, Symbol};

pub use output::{axes as output_axes, phase_portrait_svg, trajectory_csv, write_events_json};

pub type State = [f64; 5];

pub const VARS: [&str; 5] = ["g", "h", "e", "d", "phi"];
const G: usize = 0;
const H: usize = 1;
const E: usize = 2;
const D: usize = 3;
const PHI: usize = 4;

/// Chattering threshold: switches per simulated second.
pub const CHATTER_RATE: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },
    #[error("d fell below d_min at t = {t}")]
    SingularApproach { t: f64, state: State, trajectory: Box<Trajectory> },
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
    #[error("initial state is not coherent")]
    Incoherent,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub event_tol: f64,
    pub hysteresis: f64,
    pub d_min: f64,
    pub e_max: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            horizon: 100.0,
            event_tol: 1e-10,
            hysteresis: 1e-6,
            d_min: 1e-6,
            e_max: 1e6,
        }
    }
}

impl SimConfig {
    pub fn with_horizon(mut self, t: f64) -> Self {
        self.horizon = t;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Switch,
    RegionEntry,
    BlowupStop,
    SingularJump,
    Stop,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: State,
    pub mode: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    pub blowup: bool,
    pub chattering: bool,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    pub fn switch_count(&self) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::Switch).count()
    }

    fn push(&mut self, t: f64, state: State, mode: &str) {
        if let Some(last) = self.samples.last() {
            if t <= last.t {
                return;
            }
        }
        self.samples.push(Sample {
            t,
            state,
            mode: mode.to_string(),
        });
    }

    fn append(&mut self, other: Trajectory) {
        for s in other.samples {
            self.push(s.t, s.state, &s.mode);
        }
        self.events.extend(other.events);
        self.blowup |= other.blowup;
        self.chattering |= other.chattering;
    }
}

/// A polynomial vector field compiled to index form for fast evaluation.
#[derive(Clone, Debug)]
pub struct CompiledField {
    rows: Vec<Vec<(f64, Vec<(usize, i32)>)>>,
}

impl CompiledField {
    /// Compiles `f` over the state layout `g, h, e, d, phi`; variables
    /// without a component have zero derivative.
    pub fn new(f: &VectorField) -> Self {
        let compile = |p: &Polynomial| {
            p.terms()
                .map(|(m, c)| {
                    let idx = m
                        .factors()
                        .iter()
                        .map(|(s, k)| (VARS.iter().position(|v| *v == s.name()).expect("state variable"), *k as i32))
                        .collect();
                    (c.to_f64().unwrap_or(f64::NAN), idx)
                })
                .collect()
        };
        let rows = VARS
            .iter()
            .map(|v| f.component(&Symbol::new(v)).map(compile).unwrap_or_default())
            .collect();
        CompiledField { rows }
    }

    pub fn eval(&self, x: &State) -> State {
        let mut out = [0.0; 5];
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row
                .iter()
                .map(|(c, ms)| ms.iter().fold(*c, |acc, (i, k)| acc * x[*i].powi(*k)))
                .sum();
        }
        out
    }
}

pub fn rk4<const N: usize>(f: &dyn Fn(&[f64; N]) -> [f64; N], x: &[f64; N], h: f64) -> [f64; N] {
    let add = |a: &[f64; N], b: &[f64; N], s: f64| {
        let mut o = *a;
        for i in 0..N {
            o[i] += s * b[i];
        }
        o
    };
    let k1 = f(x);
    let k2 = f(&add(x, &k1, h / 2.0));
    let k3 = f(&add(x, &k2, h / 2.0));
    let k4 = f(&add(x, &k3, h));
    let mut o = *x;
    for i in 0..N {
        o[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    o
}

/// Switching function: positive exactly where the proportional law applies.
pub fn guard_value(g: f64) -> f64 {
    if g > 0.0 {
        2.0 * g * g - 1.0
    } else {
        -1.0
    }
}

pub fn v_cst(x: &State) -> f64 {
    x[D] * x[D] + 2.0 * x[D] * x[H]
}

/// Region label 1..4 (0 on the φ = 0 ray), from φ mod 2π.
pub fn region_of(x: &State) -> u8 {
    let phi = x[PHI].rem_euclid(2.0 * PI);
    if phi > 0.0 && phi < PI / 4.0 {
        1
    } else if v_cst(x) <= 0.0 {
        4
    } else if phi == 0.0 {
        0
    } else if phi <= 7.0 * PI / 4.0 {
        2
    } else {
        3
    }
}

pub fn state_map(x: &State) -> BTreeMap<Symbol, f64> {
    crate::dynamics::state_map(x)
}

type Field<'a, const N: usize> = &'a dyn Fn(&[f64; N]) -> [f64; N];

/// Shared stepping loop for polar and Cartesian models.
struct Stepper<'a, const N: usize> {
    fields: Vec<Field<'a, N>>,
    names: Vec<String>,
    /// Switching function; mode 1 is active above the band.
    guard: Option<&'a dyn Fn(&[f64; N]) -> f64>,
    max_step: &'a dyn Fn(&[f64; N]) -> f64,
    to_state: &'a dyn Fn(&[f64; N]) -> State,
    stop: &'a dyn Fn(&[f64; N]) -> bool,
    blowup: &'a dyn Fn(&[f64; N]) -> bool,
    singular: Option<&'a dyn Fn(&[f64; N]) -> bool>,
    cfg: &'a SimConfig,
    regions: bool,
}

enum Halt {
    Horizon,
    Stop,
    Blowup,
    Singular,
    NonFinite(f64),
}

#[derive(Clone, Copy, PartialEq)]
enum Trigger {
    Switch,
    Stop,
    Blowup,
    Singular,
}

impl<'a, const N: usize> Stepper<'a, N> {
    fn switch_due(&self, mode: usize, x: &[f64; N]) -> bool {
        let Some(s) = self.guard else { return false };
        let v = s(x);
        let delta = self.cfg.hysteresis;
        if mode == 0 {
            v >= delta
        } else {
            v <= -delta
        }
    }

    fn triggered(&self, mode: usize, x: &[f64; N]) -> Option<Trigger> {
        if (self.stop)(x) {
            Some(Trigger::Stop)
        } else if self.singular.map(|f| f(x)).unwrap_or(false) {
            Some(Trigger::Singular)
        } else if (self.blowup)(x) {
            Some(Trigger::Blowup)
        } else if self.switch_due(mode, x) {
            Some(Trigger::Switch)
        } else {
            None
        }
    }

    fn run(&self, x0: [f64; N], t0: f64, mode0: usize, traj: &mut Trajectory) -> (Halt, f64, [f64; N], usize) {
        let cfg = self.cfg;
        let (mut t, mut x, mut mode) = (t0, x0, mode0);
        let mut region = if self.regions { region_of(&(self.to_state)(&x)) } else { 0 };
        let mut switches: VecDeque<f64> = VecDeque::new();
        traj.push(t, (self.to_state)(&x), &self.names[mode]);
        match self.triggered(mode, &x) {
            Some(Trigger::Stop) => return (Halt::Stop, t, x, mode),
            Some(Trigger::Singular) => return (Halt::Singular, t, x, mode),
            Some(Trigger::Blowup) => return (Halt::Blowup, t, x, mode),
            _ => {}
        }
        if self.switch_due(mode, &x) {
            mode = 1 - mode;
        }
        let end = t0 + cfg.horizon;
        let mut k = 0u64;
        while t < end - 1e-12 {
            let next_grid = (t0 + (k + 1) as f64 * cfg.dt).min(end);
            let h = (next_grid - t).min((self.max_step)(&x)).max(1e-300);
            let f = self.fields[mode];
            let x1 = rk4(f, &x, h);
            if x1.iter().any(|v| !v.is_finite()) {
                return (Halt::NonFinite(t), t, x, mode);
            }
            let trig = self.triggered(mode, &x1);
            let (h_acc, x_acc) = match trig {
                None => (h, x1),
                Some(_) => {
                    let (mut lo, mut hi) = (0.0, h);
                    let mut x_hi = x1;
                    while hi - lo > cfg.event_tol {
                        let mid = 0.5 * (lo + hi);
                        let xm = rk4(f, &x, mid);
                        if self.triggered(mode, &xm).is_some() {
                            hi = mid;
                            x_hi = xm;
                        } else {
                            lo = mid;
                        }
                    }
                    (hi, x_hi)
                }
            };
            t += h_acc;
            x = x_acc;
            if t >= next_grid - 1e-12 {
                t = next_grid;
                k += 1;
            }
            let state = (self.to_state)(&x);
            traj.push(t, state, &self.names[mode]);
            if self.regions {
                let r = region_of(&state);
                if r != region {
                    region = r;
                    traj.events.push(Event {
                        t,
                        kind: EventKind::RegionEntry,
                        detail: format!("region {r}"),
                    });
                }
            }
            match trig.and_then(|_| self.triggered(mode, &x)) {
                None => {}
                Some(Trigger::Stop) => return (Halt::Stop, t, x, mode),
                Some(Trigger::Singular) => return (Halt::Singular, t, x, mode),
                Some(Trigger::Blowup) => {
                    traj.blowup = true;
                    traj.events.push(Event {
                        t,
                        kind: EventKind::BlowupStop,
                        detail: "state magnitude exceeded e_max".into(),
                    });
                    return (Halt::Blowup, t, x, mode);
                }
                Some(Trigger::Switch) => {
                    mode = 1 - mode;
                    traj.events.push(Event {
                        t,
                        kind: EventKind::Switch,
                        detail: format!("{} -> {}", self.names[1 - mode], self.names[mode]),
                    });
                    switches.push_back(t);
                    while switches.front().is_some_and(|s| *s < t - 1.0) {
                        switches.pop_front();
                    }
                    if switches.len() > CHATTER_RATE && !traj.chattering {
                        traj.chattering = true;
                        traj.events.push(Event {
                            t,
                            kind: EventKind::Switch,
                            detail: "chattering: sliding along the switching surface".into(),
                        });
                    }
                }
            }
        }
        (Halt::Horizon, t, x, mode)
    }
}

fn polar_max_step(cfg: &SimConfig) -> impl Fn(&State) -> f64 + '_ {
    move |x: &State| cfg.dt.min(0.001 * x[D].abs())
}

fn polar_blowup(cfg: &SimConfig) -> impl Fn(&State) -> bool + '_ {
    move |x: &State| x.iter().any(|v| v.abs() > cfg.e_max)
}

/// Integrates one mode until `stop` holds or the horizon is reached.
pub fn integrate_mode(
    f: &VectorField,
    x0: State,
    cfg: &SimConfig,
    stop: &dyn Fn(&State) -> bool,
) -> Result<Trajectory, SimError> {
    integrate_mode_named(f, "mode", x0, 0.0, cfg, stop)
}

fn integrate_mode_named(
    f: &VectorField,
    name: &str,
    x0: State,
    t0: f64,
    cfg: &SimConfig,
    stop: &dyn Fn(&State) -> bool,
) -> Result<Trajectory, SimError> {
    let cf = CompiledField::new(f);
    let field = |x: &State| cf.eval(x);
    let max_step = polar_max_step(cfg);
    let blowup = polar_blowup(cfg);
    let id = |x: &State| *x;
    let st = Stepper {
        fields: vec![&field],
        names: vec![name.to_string()],
        guard: None,
        max_step: &max_step,
        to_state: &id,
        stop,
        blowup: &blowup,
        singular: None,
        cfg,
        regions: false,
    };
    let mut traj = Trajectory::default();
    match st.run(x0, t0, 0, &mut traj) {
        (Halt::NonFinite(t), ..) => Err(SimError::NonFinite { t }),
        (Halt::Stop, t, ..) => {
            traj.events.push(Event {
                t,
                kind: EventKind::Stop,
                detail: "stop condition".into(),
            });
            Ok(traj)
        }
        _ => Ok(traj),
    }
}

fn mode_indices(sys: &HybridSystem) -> Result<(usize, usize), SimError> {
    let c = sys.modes.iter().position(|m| m.name == "constant");
    let p = sys.modes.iter().position(|m| m.name == "proportional");
    match (c, p) {
        (Some(c), Some(p)) => Ok((c, p)),
        _ => Err(SimError::UnsupportedModel(
            "expected modes `constant` and `proportional`".into(),
        )),
    }
}

pub fn is_coherent(x: &State, tol: f64) -> bool {
    (x[G] * x[G] + x[H] * x[H] - 1.0).abs() <= tol && (x[D] * x[E] - 1.0).abs() <= tol && x[D] > 0.0
}

fn hybrid(
    sys: &HybridSystem,
    x0: State,
    t0: f64,
    cfg: &SimConfig,
    stop: &dyn Fn(&State) -> bool,
    traj: &mut Trajectory,
) -> Result<(Halt, f64, State), SimError> {
    let (ci, pi) = mode_indices(sys)?;
    let fc = CompiledField::new(&sys.modes[ci].field);
    let fp = CompiledField::new(&sys.modes[pi].field);
    let field_c = |x: &State| fc.eval(x);
    let field_p = |x: &State| fp.eval(x);
    let guard = |x: &State| guard_value(x[G]);
    let max_step = polar_max_step(cfg);
    let blowup = polar_blowup(cfg);
    let singular = |x: &State| x[D] < cfg.d_min;
    let id = |x: &State| *x;
    let st = Stepper {
        fields: vec![&field_c, &field_p],
        names: vec![sys.modes[ci].name.clone(), sys.modes[pi].name.clone()],
        guard: Some(&guard),
        max_step: &max_step,
        to_state: &id,
        stop,
        blowup: &blowup,
        singular: Some(&singular),
        cfg,
        regions: true,
    };
    let mode0 = if guard_value(x0[G]) > 0.0 { 1 } else { 0 };
    let (halt, t, x, _) = st.run(x0, t0, mode0, traj);
    Ok((halt, t, x))
}

/// Simulates the switched system from a coherent state.
pub fn simulate_hybrid(sys: &HybridSystem, x0: State, cfg: &SimConfig) -> Result<Trajectory, SimError> {
    if !is_coherent(&x0, 1e-12) {
        return Err(SimError::Incoherent);
    }
    let mut traj = Trajectory::default();
    match hybrid(sys, x0, 0.0, cfg, &|_| false, &mut traj)? {
        (Halt::NonFinite(t), ..) => Err(SimError::NonFinite { t }),
        (Halt::Singular, t, x) => Err(SimError::SingularApproach {
            t,
            state: x,
            trajectory: Box::new(traj),
        }),
        _ => Ok(traj),
    }
}

/// First time the target holds, or `None` at the horizon.
pub fn time_to_reach(
    sys: &HybridSystem,
    x0: State,
    target: &SemialgSet,
    cfg: &SimConfig,
) -> Result<Option<f64>, SimError> {
    if !is_coherent(&x0, 1e-12) {
        return Err(SimError::Incoherent);
    }
    let inside = |x: &State| target.contains_f64(&state_map(x), 0.0).unwrap_or(false);
    let mut traj = Trajectory::default();
    match hybrid(sys, x0, 0.0, cfg, &inside, &mut traj)? {
        (Halt::Stop, t, _) => Ok(Some(t)),
        (Halt::NonFinite(t), ..) => Err(SimError::NonFinite { t }),
        (Halt::Singular, t, x) => Err(SimError::SingularApproach {
            t,
            state: x,
            trajectory: Box::new(traj),
        }),
        _ => Ok(None),
    }
}

/// The φ = 0 ray: straight run into the origin, the jump φ := π, then the
/// switched system for the rest of the horizon.
pub fn singular_run(sys: &HybridSystem, d0: f64, cfg: &SimConfig) -> Result<Trajectory, SimError> {
    let x0 = [1.0, 0.0, 1.0 / d0, d0, 0.0];
    let mut traj = Trajectory::default();
    let (halt, t, x) = hybrid(sys, x0, 0.0, cfg, &|_| false, &mut traj)?;
    match halt {
        Halt::Singular => {}
        Halt::NonFinite(t) => return Err(SimError::NonFinite { t }),
        _ => return Ok(traj),
    }
    let jumped = [-1.0, 0.0, 1.0 / x[D], x[D], PI];
    traj.events.push(Event {
        t,
        kind: EventKind::SingularJump,
        detail: format!("phi {:.3e} -> pi, d kept at {:.3e}", x[PHI], x[D]),
    });
    // the jump lands at the thresholds; only a further halving of d counts
    let rest = SimConfig {
        horizon: cfg.horizon - t,
        d_min: cfg.d_min.min(0.5 * x[D]),
        e_max: cfg.e_max.max(2.0 / x[D]),
        ..cfg.clone()
    };
    if rest.horizon <= 0.0 {
        return Ok(traj);
    }
    let mut tail = Trajectory::default();
    match hybrid(sys, jumped, t, &rest, &|_| false, &mut tail)? {
        (Halt::NonFinite(t), ..) => Err(SimError::NonFinite { t }),
        (Halt::Singular, t, x) => {
            traj.append(tail);
            Err(SimError::SingularApproach {
                t,
                state: x,
                trajectory: Box::new(traj),
            })
        }
        _ => {
            // the jump sample shares its time with the last pre-jump sample
            tail.samples.retain(|s| s.t > t);
            traj.samples.push(Sample {
                t: t + f64::EPSILON * t.max(1.0),
                state: jumped,
                mode: "constant".into(),
            });
            traj.append(tail);
            Ok(traj)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftMetrics {
    pub max_circle_drift: f64,
    pub max_inverse_drift: f64,
    pub switches: usize,
    pub min_d: f64,
}

pub fn drift_metrics(traj: &Trajectory) -> DriftMetrics {
    let mut m = DriftMetrics {
        max_circle_drift: 0.0,
        max_inverse_drift: 0.0,
        switches: traj.switch_count(),
        min_d: f64::INFINITY,
    };
    for s in &traj.samples {
        let x = &s.state;
        m.max_circle_drift = m.max_circle_drift.max((x[G] * x[G] + x[H] * x[H] - 1.0).abs());
        m.max_inverse_drift = m.max_inverse_drift.max((x[D] * x[E] - 1.0).abs());
        m.min_d = m.min_d.min(x[D]);
    }
    m
}

/// Cartesian pose `[x, y, θ]` simulated with the control law in feedback
/// form, reported in polar state layout (φ in [0, 2π)).
pub fn simulate_cartesian(pose: [f64; 3], cfg: &SimConfig) -> Result<Trajectory, SimError> {
    let phi_of = |p: &[f64; 3]| cartesian_to_polar(p[0], p[1], p[2]).1;
    let straight = |p: &[f64; 3]| [p[2].cos(), p[2].sin(), 0.0];
    let turn = |p: &[f64; 3]| [p[2].cos(), p[2].sin(), 1.0];
    let prop = |p: &[f64; 3]| [p[2].cos(), p[2].sin(), -phi_of(p).sin()];
    let _ = straight;
    let guard = |p: &[f64; 3]| guard_value(phi_of(p).cos());
    let max_step = |p: &[f64; 3]| cfg.dt.min(0.001 * p[0].hypot(p[1]));
    let to_state = |p: &[f64; 3]| {
        let (d, phi, _) = cartesian_to_polar(p[0], p[1], p[2]);
        [phi.cos(), phi.sin(), 1.0 / d, d, phi]
    };
    let blowup = |p: &[f64; 3]| p.iter().any(|v| v.abs() > cfg.e_max);
    let singular = |p: &[f64; 3]| p[0].hypot(p[1]) < cfg.d_min;
    let st = Stepper {
        fields: vec![&turn, &prop],
        names: vec!["constant".into(), "proportional".into()],
        guard: Some(&guard),
        max_step: &max_step,
        to_state: &to_state,
        stop: &|_| false,
        blowup: &blowup,
        singular: Some(&singular),
        cfg,
        regions: true,
    };
    let mode0 = if guard(&pose) > 0.0 { 1 } else { 0 };
    let mut traj = Trajectory::default();
    match st.run(pose, 0.0, mode0, &mut traj) {
        (Halt::NonFinite(t), ..) => Err(SimError::NonFinite { t }),
        (Halt::Singular, t, p, _) => Err(SimError::SingularApproach {
            t,
            state: to_state(&p),
            trajectory: Box::new(traj),
        }),
        _ => Ok(traj),
    }
}

/// Straight-line Cartesian run along the φ = 0 ray (u = 0 there), polar layout.
pub fn cartesian_straight(d0: f64, cfg: &SimConfig) -> Trajectory {
    // heading straight at the origin from (d0, 0)
    let f = |p: &[f64; 3]| [p[2].cos(), p[2].sin(), 0.0];
    let mut p = [d0, 0.0, PI];
    let mut traj = Trajectory::default();
    let mut t = 0.0;
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let polar = |p: &[f64; 3]| {
        let (d, phi, _) = cartesian_to_polar(p[0], p[1], p[2]);
        [phi.cos(), phi.sin(), 1.0 / d, d, phi]
    };
    traj.push(t, polar(&p), "proportional");
    for k in 1..=steps {
        p = rk4(&f, &p, cfg.dt);
        t = k as f64 * cfg.dt;
        traj.push(t, polar(&p), "proportional");
    }
    traj
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{coherent_state, station_keeping_model};

    #[test]
    fn equilibrium_is_fixed() {
        let m = station_keeping_model();
        let x0 = [0.0, -1.0, 1.0, 1.0, 1.5 * PI];
        let cfg = SimConfig::default().with_horizon(10.0);
        let tr = integrate_mode(&m.modes[0].field, x0, &cfg, &|_| false).unwrap();
        let xf = tr.last().state;
        for i in 0..5 {
            assert!((xf[i] - x0[i]).abs() < 1e-9, "{xf:?}");
        }
    }

    #[test]
    fn constant_mode_conserves_v() {
        let m = station_keeping_model();
        let x0 = coherent_state(2.5, 2.0);
        let cfg = SimConfig::default().with_horizon(10.0);
        let tr = integrate_mode(&m.modes[0].field, x0, &cfg, &|_| false).unwrap();
        let v0 = v_cst(&x0);
        let worst = tr.samples.iter().map(|s| (v_cst(&s.state) - v0).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-7, "{worst}");
    }

    #[test]
    fn unit_circle_in_cartesian() {
        let f = |p: &[f64; 3]| [p[2].cos(), p[2].sin(), 1.0];
        let n = (2.0 * PI / 1e-3).ceil() as usize;
        let h = 2.0 * PI / n as f64;
        let mut p = [0.0, 0.0, 0.0];
        for _ in 0..n {
            p = rk4(&f, &p, h);
        }
        assert!(p[0].abs() < 1e-6 && p[1].abs() < 1e-6 && (p[2] - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn hybrid_from_pi_reaches_target() {
        let m = station_keeping_model();
        let cfg = SimConfig::default().with_horizon(100.0);
        let tr = simulate_hybrid(&m, coherent_state(3.0, PI), &cfg).unwrap();
        let hit = tr.samples.iter().position(|s| v_cst(&s.state) <= 0.0).expect("reaches V <= 0");
        assert!(tr.samples[hit..].iter().all(|s| v_cst(&s.state) <= 1e-6));
        for e in tr.events.iter().filter(|e| e.kind == EventKind::Switch && !e.detail.starts_with("chatter")) {
            let s = tr.samples.iter().find(|s| s.t == e.t).unwrap();
            let v = guard_value(s.state[G]);
            assert!((v.abs() - cfg.hysteresis).abs() < 1e-8, "{v}");
        }
        let dm = drift_metrics(&tr);
        assert!(dm.max_circle_drift < 1e-6 && dm.max_inverse_drift < 1e-6, "{dm:?}");
    }

    #[test]
    fn singular_ray() {
        let m = station_keeping_model();
        let cfg = SimConfig::default().with_horizon(20.0);
        let tr = singular_run(&m, 3.0, &cfg).unwrap();
        let jump = tr.events.iter().find(|e| e.kind == EventKind::SingularJump).unwrap();
        assert!((jump.t - 3.0).abs() < 1e-5, "{}", jump.t);
        let pre: Vec<_> = tr.samples.iter().filter(|s| s.t < jump.t).collect();
        assert!(pre.iter().all(|s| (s.state[D] - (3.0 - s.t)).abs() < 1e-6));
        assert!(pre.iter().any(|s| s.state[E] > 1e5));
        let post: Vec<_> = tr.samples.iter().filter(|s| s.t > jump.t).take(5).collect();
        assert!(v_cst(&tr.last().state) <= 0.0, "{:?} {:?} {:?}", tr.last(), post, &tr.events[..tr.events.len().min(8)]);
    }
}
