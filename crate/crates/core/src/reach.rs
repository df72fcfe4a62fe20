//! Staging-set liveness checks and the three-stage reachability chain.

use num_traits::{Signed, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;

use crate::certify::{
    contains, derivative_numerator, equality_rules, interval_eval, invariance_check, sign_certify, Budget,
    Certificate, InvarianceRules, IntervalBox, SemialgSet, SignClaim, Stats, Verdict,
};
use crate::dynamics::{coherence, constant_guard, Mode};
use crate::poly::{format_rational, lie_derivative_expr, parse_expr, Expr, Polynomial, Rational};

/// Slack on `p ≥ 0`: premise 1 proves `p ≥ −τ`.
pub const PROGRESS_SHIFT: f64 = 1e-9;
/// Width of the band that replaces a target set in box arithmetic.
pub const TARGET_WIDTH: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum ReachError {
    #[error("epsilon must be positive")]
    NonPositiveEpsilon,
    #[error("link {index} is broken: {claim}")]
    ChainBroken { index: usize, claim: String },
}

#[derive(Clone, Debug)]
pub struct StageSpec {
    pub name: String,
    pub x0: SemialgSet,
    pub xt: SemialgSet,
    pub s: SemialgSet,
    pub h: SemialgSet,
    pub progress: Expr,
    pub epsilon: Rational,
    pub mode: Mode,
    pub bounds: IntervalBox,
}

impl StageSpec {
    pub fn thick_target(&self) -> SemialgSet {
        self.xt.inflate(TARGET_WIDTH)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StageReport {
    pub stage: String,
    pub premises: Vec<Certificate>,
    pub verdict: Verdict,
    /// Upper bound on the time spent in the staging set, `(P_max + τ) / ε`.
    pub time_bound: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainReport {
    pub stages: Vec<StageReport>,
    pub links: Vec<Certificate>,
    pub verdict: Verdict,
    pub budget_scale: usize,
    pub notes: Vec<String>,
}

impl ChainReport {
    pub fn premise_count(&self) -> usize {
        self.stages.iter().map(|s| s.premises.len()).sum()
    }
}

fn set(src: &str) -> SemialgSet {
    SemialgSet::parse(src).expect("built-in set")
}

fn merge(claim: String, certs: Vec<Certificate>) -> Certificate {
    let mut out = Certificate {
        claim,
        bounds: certs[0].bounds.clone(),
        verdict: Verdict::Proved,
        witness: None,
        stats: Stats::default(),
        method: String::new(),
        notes: Vec::new(),
    };
    let mut methods: Vec<String> = Vec::new();
    for c in certs {
        out.verdict = out.verdict.and(c.verdict);
        if out.witness.is_none() && c.verdict == Verdict::Disproved {
            out.witness = c.witness.clone();
        }
        out.stats.boxes += c.stats.boxes;
        out.stats.max_depth = out.stats.max_depth.max(c.stats.max_depth);
        out.stats.wall_ms += c.stats.wall_ms;
        out.stats.cubes += c.stats.cubes;
        out.stats.symbolic_cubes += c.stats.symbolic_cubes;
        if !methods.contains(&c.method) {
            methods.push(c.method.clone());
        }
        out.notes.push(format!("{}: {}", c.claim, c.verdict));
        out.notes.extend(c.notes);
    }
    out.method = methods.join("+");
    out
}

fn progress_derivative(st: &StageSpec) -> Result<Expr, String> {
    let dp = lie_derivative_expr(&st.progress, &st.mode.field).map_err(|e| e.to_string())?;
    if st.progress.as_poly().is_some() {
        if let Some(num) = derivative_numerator(&st.progress, &st.mode.field) {
            return Ok(Expr::Poly(equality_rules(&st.s).reduce(&num)));
        }
    }
    Ok(dp)
}

/// Checks the four premises of the staging-set rule.
pub fn sp_check(st: &StageSpec, budget: &Budget) -> Result<StageReport, ReachError> {
    if !st.epsilon.is_positive() {
        return Err(ReachError::NonPositiveEpsilon);
    }
    let b = &st.bounds;
    let tau = crate::poly::rational_from_f64(PROGRESS_SHIFT).expect("finite");
    let xt = st.thick_target();

    let p1 = {
        let shifted = Expr::add(st.progress.clone(), Expr::rational(tau));
        let bounded = sign_certify(&shifted, &st.s, b, &SignClaim::NonNegative, budget);
        let decrease = match progress_derivative(st) {
            Ok(dp) => sign_certify(&dp, &st.s, b, &SignClaim::NegativeMargin(st.epsilon.clone()), budget),
            Err(e) => {
                let mut c = sign_certify(&Expr::int(0), &SemialgSet::False, b, &SignClaim::NonPositive, budget);
                c.verdict = Verdict::Undetermined;
                c.notes.push(e);
                c
            }
        };
        merge(
            format!(
                "S -> p >= -{PROGRESS_SHIFT:e} & p' <= -{} (p = {})",
                format_rational(&st.epsilon),
                st.progress
            ),
            vec![bounded, decrease],
        )
    };
    let p2 = {
        let lhs = SemialgSet::and(vec![st.x0.clone(), xt.negate()]);
        let mut c = contains(&lhs, &st.s, b, budget);
        c.claim = "X0 & !XT -> S".into();
        c
    };
    let p3 = {
        let domain = SemialgSet::and(vec![st.h.clone(), xt.clone()]).negate();
        let mut c = invariance_check(&st.s, &st.mode, &domain, b, budget, InvarianceRules::WithDarboux);
        c.claim = format!("S -> [{} & !(H & XT)] S", st.mode.name);
        c
    };
    let p4 = {
        let lhs = SemialgSet::or(vec![st.x0.clone(), st.s.clone()]);
        let mut c = contains(&lhs, &st.h, b, budget);
        c.claim = "X0 | S -> H".into();
        c
    };
    let premises = vec![p1, p2, p3, p4];
    let verdict = premises.iter().fold(Verdict::Proved, |v, c| v.and(c.verdict));
    let time_bound = if premises[0].proved() {
        interval_eval(&st.progress, b).ok().and_then(|iv| {
            let eps = st.epsilon.to_f64()?;
            Some((iv.hi + PROGRESS_SHIFT) / eps)
        })
    } else {
        None
    };
    Ok(StageReport {
        stage: st.name.clone(),
        premises,
        verdict,
        time_bound,
    })
}

/// `√2/2` rounded down to eleven digits.
pub fn sqrt2_over_2_below() -> Rational {
    Rational::new(70_710_678_118i64.into(), 100_000_000_000i64.into())
}

/// V = d² + 2dh.
pub fn v_cst() -> Expr {
    parse_expr("d^2 + 2*d*h").expect("built-in")
}

pub fn proportional_plant() -> Mode {
    Mode::new("u=-h", -Polynomial::var("h"), SemialgSet::True)
}

pub fn constant_plant() -> Mode {
    Mode::new("u=1", Polynomial::int(1), SemialgSet::True)
}

/// The phase-space partition used by the chain.
pub fn regions() -> [SemialgSet; 4] {
    [
        set("0 < phi & phi < pi/4 & d > 0"),
        set("pi/4 <= phi & phi <= 7*pi/4 & d > 0 & d^2 + 2*d*h > 0"),
        set("7*pi/4 < phi & phi < 2*pi & d > 0 & d^2 + 2*d*h > 0"),
        set("d^2 + 2*d*h <= 0"),
    ]
}

/// The three stages ① → ② → ③ → ④ over `bounds`.
pub fn station_keeping_stages_in(bounds: &IntervalBox) -> Vec<StageSpec> {
    let delta = coherence();
    let h = set("d > 0");
    let s1 = SemialgSet::and(vec![set("g > 0 & 2*g^2 - 1 > 0 & h > 0"), delta.clone()]);
    let s2 = SemialgSet::and(vec![constant_guard(), set("d^2 + 2*d*h > 0"), delta.clone()]);
    let xt2 = set("g > 0 & 2*g^2 - 1 > 0 & h < 0");
    let s3 = SemialgSet::and(vec![xt2.clone(), set("d^2 + 2*d*h > 0"), delta.clone()]);
    vec![
        StageSpec {
            name: "1->2".into(),
            x0: s1.clone(),
            xt: set("2*g^2 - 1 = 0 & g > 0 & 2*h^2 - 1 = 0 & h > 0"),
            s: s1,
            h: h.clone(),
            progress: parse_expr("d").expect("built-in"),
            epsilon: sqrt2_over_2_below(),
            mode: proportional_plant(),
            bounds: bounds.clone(),
        },
        StageSpec {
            name: "2->3".into(),
            x0: s2.clone(),
            xt: xt2,
            s: s2,
            h: h.clone(),
            progress: parse_expr("-phi + 7*pi/4").expect("built-in"),
            epsilon: Rational::new(1.into(), 2.into()),
            mode: constant_plant(),
            bounds: bounds.clone(),
        },
        StageSpec {
            name: "3->4".into(),
            x0: s3.clone(),
            xt: set("d^2 + 2*d*h <= 0"),
            s: s3,
            h,
            progress: parse_expr("d").expect("built-in"),
            epsilon: sqrt2_over_2_below(),
            mode: proportional_plant(),
            bounds: bounds.clone(),
        },
    ]
}

pub fn station_keeping_stages() -> Vec<StageSpec> {
    station_keeping_stages_in(&IntervalBox::case_study())
}

/// Checks every stage and the containments linking consecutive stages.
pub fn run_chain(stages: &[StageSpec], budget: &Budget) -> Result<ChainReport, ReachError> {
    let Some(last) = stages.last() else {
        return Ok(ChainReport {
            stages: vec![],
            links: vec![],
            verdict: Verdict::Proved,
            budget_scale: 1,
            notes: vec![],
        });
    };
    let finish = last.xt.clone();
    let links: Vec<Certificate> = stages
        .windows(2)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|w| {
            let lhs = SemialgSet::and(vec![w[0].xt.clone(), coherence(), w[0].h.clone()]);
            let rhs = SemialgSet::or(vec![w[1].x0.clone(), finish.clone()]);
            let mut c = contains(&lhs, &rhs, &w[0].bounds, budget);
            c.claim = format!("XT[{}] -> X0[{}] | final", w[0].name, w[1].name);
            c
        })
        .collect();
    if let Some(i) = links.iter().position(|c| c.verdict == Verdict::Disproved) {
        return Err(ReachError::ChainBroken {
            index: i,
            claim: links[i].claim.clone(),
        });
    }
    let reports = stages
        .par_iter()
        .map(|st| sp_check(st, budget))
        .collect::<Result<Vec<_>, _>>()?;
    let verdict = reports
        .iter()
        .map(|r| r.verdict)
        .chain(links.iter().map(|c| c.verdict))
        .fold(Verdict::Proved, Verdict::and);
    Ok(ChainReport {
        stages: reports,
        links,
        verdict,
        budget_scale: 1,
        notes: vec![],
    })
}

/// [`run_chain`], retried once at ten times the budget when undetermined.
pub fn run_chain_escalating(stages: &[StageSpec], budget: &Budget) -> Result<ChainReport, ReachError> {
    let first = run_chain(stages, budget)?;
    if first.verdict != Verdict::Undetermined {
        return Ok(first);
    }
    let mut second = run_chain(stages, &budget.scaled(10))?;
    second.budget_scale = 10;
    second
        .notes
        .push("undetermined at the default budget; verdict obtained at budget x10".into());
    Ok(second)
}

/// Coverage and disjointness checks for [`regions`].
pub fn partition_sanity(bounds: &IntervalBox, budget: &Budget) -> Vec<Certificate> {
    let [r1, r2, r3, r4] = regions();
    let mut out = Vec::new();
    let domain = SemialgSet::and(vec![set("d > 0 & phi >= 0 & phi < 2*pi"), coherence()]);
    let cover = SemialgSet::or(vec![r1.clone(), r2.clone(), r3.clone(), r4, set("phi = 0")]);
    let mut c = contains(&domain, &cover, bounds, budget);
    c.claim = "regions cover d > 0, phi in [0, 2pi)".into();
    out.push(c);
    for (i, j, a, b) in [(1, 2, &r1, &r2), (1, 3, &r1, &r3), (2, 3, &r2, &r3)] {
        let both = SemialgSet::and(vec![a.clone(), b.clone()]);
        let mut c = contains(&both, &SemialgSet::False, bounds, budget);
        c.claim = format!("region {i} and region {j} are disjoint");
        out.push(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_shapes() {
        let st = station_keeping_stages();
        assert_eq!(st.len(), 3);
        assert_eq!(st[0].progress.to_string(), "d");
        assert_eq!(st[1].progress, parse_expr("-phi + 7*pi/4").unwrap());
        assert_eq!(st[2].xt, set("d^2 + 2*d*h <= 0"));
    }

    #[test]
    fn stage_one_premises() {
        let st = &station_keeping_stages()[0];
        let r = sp_check(st, &Budget::default()).unwrap();
        for c in &r.premises {
            assert_eq!(c.verdict, Verdict::Proved, "{c:#?}");
        }
    }

    #[test]
    fn stage_one_with_large_epsilon_fails() {
        let mut st = station_keeping_stages()[0].clone();
        st.epsilon = Rational::from_integer(2.into());
        let r = sp_check(&st, &Budget::default()).unwrap();
        assert_eq!(r.premises[0].verdict, Verdict::Disproved);
        assert!(r.time_bound.is_none());
    }
}

#[cfg(test)]
mod chain_tests {
    use super::*;

    #[test]
    fn full_chain() {
        let r = run_chain(&station_keeping_stages(), &Budget::default()).unwrap();
        for s in &r.stages {
            for c in &s.premises {
                eprintln!("{} | {} | {} | {} boxes | {:.0} ms", s.stage, c.claim, c.verdict, c.stats.boxes, c.stats.wall_ms);
                if c.verdict != Verdict::Proved {
                    eprintln!("   {:?}", c.notes);
                }
            }
        }
        for c in &r.links {
            eprintln!("{} | {} | {} boxes", c.claim, c.verdict, c.stats.boxes);
        }
        assert_eq!(r.verdict, Verdict::Proved);
        assert_eq!(r.premise_count(), 12);
    }

    #[test]
    fn shifted_progress_is_not_bounded() {
        let mut st = station_keeping_stages()[1].clone();
        st.progress = parse_expr("-phi + 7*pi/4 - 1/100").unwrap();
        let r = sp_check(&st, &Budget::default()).unwrap();
        assert_ne!(r.premises[0].verdict, Verdict::Proved, "{:#?}", r.premises[0]);
    }

    #[test]
    fn wrong_mode_breaks_invariance() {
        let small = Budget {
            max_boxes: 20_000,
            time_limit: Some(std::time::Duration::from_secs(2)),
            ..Budget::default()
        };
        let mut st = station_keeping_stages()[1].clone();
        st.mode = proportional_plant();
        let r = sp_check(&st, &small).unwrap();
        assert_ne!(r.premises[2].verdict, Verdict::Proved, "{:#?}", r.premises[2]);
        let mut st = station_keeping_stages()[2].clone();
        st.mode = constant_plant();
        let r = sp_check(&st, &small).unwrap();
        assert_ne!(r.premises[2].verdict, Verdict::Proved, "{:#?}", r.premises[2]);
    }

    #[test]
    fn stage_one_time_bound() {
        let b = IntervalBox::case_study().with("d", 1e-3, 8.0);
        let st = &station_keeping_stages_in(&b)[0];
        let r = sp_check(st, &Budget::default()).unwrap();
        let t = r.time_bound.unwrap();
        assert!((t / (2f64.sqrt() * 8.0) - 1.0).abs() < 1e-9, "{t}");
    }

    #[test]
    fn partition_is_sane() {
        for c in partition_sanity(&IntervalBox::case_study(), &Budget::default()) {
            assert_eq!(c.verdict, Verdict::Proved, "{c:#?}");
        }
    }
}
