use std::f64::consts::PI;

use hykeep::certify::SemialgSet;
use hykeep::dynamics::{coherent_state, station_keeping_model};
use hykeep::sim::{
    drift_metrics, region_of, rk4, simulate_cartesian, simulate_hybrid, time_to_reach, v_cst, CompiledField,
    EventKind, SimConfig, SimError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn target() -> SemialgSet {
    SemialgSet::parse("d^2 + 2*d*h <= 0").unwrap()
}

#[test]
fn random_starts_reach_and_stay() {
    let m = station_keeping_model();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let starts: Vec<(f64, f64)> = (0..100)
        .map(|_| (rng.gen_range(1e-3..=10.0), rng.gen_range(1e-3..2.0 * PI)))
        .collect();
    let cfg = SimConfig::default().with_horizon(100.0);
    starts.par_iter().for_each(|&(d, phi)| {
        let tr = simulate_hybrid(&m, coherent_state(d, phi), &cfg).unwrap();
        let hit = tr
            .samples
            .iter()
            .position(|s| v_cst(&s.state) <= 0.0)
            .unwrap_or_else(|| panic!("({d}, {phi}) never reaches V <= 0"));
        assert!(tr.samples[hit].t < 100.0);
        let worst = tr.samples[hit..].iter().map(|s| v_cst(&s.state)).fold(f64::MIN, f64::max);
        assert!(worst <= 1e-6, "({d}, {phi}): V rises to {worst}");
        let dm = drift_metrics(&tr);
        assert!(dm.max_circle_drift < 1e-6 && dm.max_inverse_drift < 1e-6, "({d}, {phi}): {dm:?}");
    });
}

#[test]
fn region_one_exit_within_time_bound() {
    let m = station_keeping_model();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = SimConfig::default().with_horizon(20.0);
    for _ in 0..20 {
        let d0 = rng.gen_range(1.0..=8.0);
        let phi0 = rng.gen_range(0.01..PI / 4.0 - 0.01);
        let tr = simulate_hybrid(&m, coherent_state(d0, phi0), &cfg).unwrap();
        let exit = tr
            .samples
            .iter()
            .find(|s| region_of(&s.state) != 1)
            .map(|s| s.t)
            .expect("leaves region 1");
        assert!(exit <= 2f64.sqrt() * d0 * 1.02, "d0 = {d0}: exit at {exit}");
    }
    let tr = simulate_hybrid(&m, coherent_state(5.0, PI / 8.0), &cfg).unwrap();
    let exit = tr.samples.iter().find(|s| region_of(&s.state) != 1).unwrap().t;
    assert!(exit <= 2f64.sqrt() * 5.0 * 1.02);
}

#[test]
fn time_to_reach_examples() {
    let m = station_keeping_model();
    let cfg = SimConfig::default().with_horizon(100.0);
    let inside = coherent_state(1.0, 1.5 * PI);
    assert_eq!(time_to_reach(&m, inside, &target(), &cfg).unwrap(), Some(0.0));
    let t = time_to_reach(&m, coherent_state(3.0, PI), &target(), &cfg).unwrap().unwrap();
    assert!(t > 0.0 && t < 100.0, "{t}");
    // the first sample with V <= 0 lies within one step of the localized time
    let tr = simulate_hybrid(&m, coherent_state(3.0, PI), &cfg).unwrap();
    let first = tr.samples.iter().find(|s| v_cst(&s.state) <= 0.0).unwrap().t;
    assert!(first >= t - 1e-9 && first <= t + cfg.dt, "{first} vs {t}");
    let far = SemialgSet::parse("d >= 1000000").unwrap();
    let short = SimConfig::default().with_horizon(10.0);
    assert_eq!(time_to_reach(&m, coherent_state(3.0, PI), &far, &short).unwrap(), None);
}

#[test]
fn inside_target_stays_inside() {
    let m = station_keeping_model();
    let cfg = SimConfig::default().with_horizon(50.0);
    for (d, phi) in [(1.0, 1.5 * PI), (0.5, 4.0), (1.2, 5.0), (0.3, 3.5)] {
        let x0 = coherent_state(d, phi);
        assert!(v_cst(&x0) <= 0.0);
        let tr = simulate_hybrid(&m, x0, &cfg).unwrap();
        assert!(tr.samples.iter().all(|s| v_cst(&s.state) <= 1e-6));
    }
}

#[test]
fn constant_only_run_has_no_switches() {
    let m = station_keeping_model();
    let cfg = SimConfig::default().with_horizon(20.0);
    // on V = -1 the vehicle circles the origin at g = 0
    let tr = simulate_hybrid(&m, coherent_state(1.0, 1.5 * PI), &cfg).unwrap();
    assert_eq!(drift_metrics(&tr).switches, 0);
}

#[test]
fn sliding_at_seven_quarters_pi_is_flagged() {
    let m = station_keeping_model();
    let cfg = SimConfig::default().with_horizon(5.0);
    let tr = simulate_hybrid(&m, coherent_state(0.95, 7.0 * PI / 4.0 - 0.01), &cfg).unwrap();
    assert!(tr.chattering, "switches: {}", tr.switch_count());
    assert!(tr.events.iter().any(|e| e.kind == EventKind::Switch && e.detail.starts_with("chattering")));
}

#[test]
fn switch_events_sit_on_the_hysteresis_surface() {
    let m = station_keeping_model();
    let cfg = SimConfig::default().with_horizon(30.0);
    let tr = simulate_hybrid(&m, coherent_state(4.0, 0.3), &cfg).unwrap();
    let mut seen = 0;
    for e in tr.events.iter().filter(|e| e.kind == EventKind::Switch && !e.detail.starts_with("chattering")) {
        let s = tr.samples.iter().find(|s| s.t == e.t).unwrap();
        let g = s.state[0];
        let v = if g > 0.0 { 2.0 * g * g - 1.0 } else { -1.0 };
        assert!((v.abs() - cfg.hysteresis).abs() < 1e-8, "{v}");
        seen += 1;
    }
    assert!(seen > 0);
    assert!(tr.samples.windows(2).all(|w| w[0].t < w[1].t));
}

#[test]
fn rk4_is_fourth_order() {
    let m = station_keeping_model();
    let f = CompiledField::new(&m.modes[1].field);
    let rhs = |x: &[f64; 5]| f.eval(x);
    let x0 = coherent_state(4.0, 0.3);
    let t_end = 0.5;
    let run = |n: usize| {
        let h = t_end / n as f64;
        (0..n).fold(x0, |x, _| rk4(&rhs, &x, h))
    };
    let reference = run(1600);
    let err = |n: usize| {
        let x = run(n);
        x.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(25), err(50));
    let ratio = e1 / e2;
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio} ({e1}, {e2})");
}

#[test]
fn polar_and_cartesian_agree() {
    let m = station_keeping_model();
    let cfg = SimConfig::default().with_horizon(20.0);
    for (d, phi) in [(3.0, 2.0), (5.0, 0.4), (2.0, 5.9)] {
        let polar = simulate_hybrid(&m, coherent_state(d, phi), &cfg).unwrap();
        // pose with α = 0: position (d, 0), θ = φ − π
        let cart = simulate_cartesian([d, 0.0, phi - PI], &cfg).unwrap();
        let at = |tr: &hykeep::sim::Trajectory, t: f64| {
            tr.samples.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs())).unwrap().state
        };
        for k in 0..=200 {
            let t = k as f64 * 0.1;
            let (a, b) = (at(&polar, t), at(&cart, t));
            if a[3] < 0.1 || b[3] < 0.1 {
                continue;
            }
            let dphi = (a[4].rem_euclid(2.0 * PI) - b[4]).abs();
            let dphi = dphi.min(2.0 * PI - dphi);
            assert!((a[3] - b[3]).abs() < 1e-3 && dphi < 1e-3, "({d}, {phi}) t={t}: {a:?} vs {b:?}");
        }
    }
}

#[test]
fn incoherent_start_is_rejected() {
    let m = station_keeping_model();
    let r = simulate_hybrid(&m, [1.0, 1.0, 1.0, 1.0, 0.0], &SimConfig::default());
    assert!(matches!(r, Err(SimError::Incoherent)));
}
