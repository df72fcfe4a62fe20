use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use super::{region_of, v_cst, Trajectory};

/// CSV with columns `t,g,h,e,d,phi,mode,V,region`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,g,h,e,d,phi,mode,V,region\n");
    for s in &traj.samples {
        let x = &s.state;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.t,
            x[0],
            x[1],
            x[2],
            x[3],
            x[4],
            s.mode,
            v_cst(x),
            region_of(x)
        );
    }
    out
}

pub fn write_events_json(traj: &Trajectory, path: &Path) -> io::Result<()> {
    let body = serde_json::json!({
        "events": traj.events,
        "blowup": traj.blowup,
        "chattering": traj.chattering,
    });
    std::fs::write(path, serde_json::to_string_pretty(&body)?)
}

const REGION_FILL: [&str; 5] = ["#ffffff", "#f6d7a7", "#c9e4c5", "#a7c7e7", "#c7a7e7"];

/// Phase portrait: φ horizontal over [0, 2π], d vertical over [0, d_max],
/// regions shaded, trajectories overlaid with φ taken mod 2π.
pub fn phase_portrait_svg(trajs: &[&Trajectory], d_max: f64) -> String {
    let (w, h, m) = (720.0, 420.0, 40.0);
    let (nx, ny) = (144usize, 84usize);
    let px = |phi: f64| m + phi / (2.0 * PI) * (w - 2.0 * m);
    let py = |d: f64| h - m - d / d_max * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let (cw, ch) = ((w - 2.0 * m) / nx as f64, (h - 2.0 * m) / ny as f64);
    for i in 0..nx {
        for j in 0..ny {
            let phi = (i as f64 + 0.5) / nx as f64 * 2.0 * PI;
            let d = (j as f64 + 0.5) / ny as f64 * d_max;
            let r = region_of(&crate::dynamics::coherent_state(d, phi));
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                px(phi) - cw / 2.0,
                py(d) - ch / 2.0,
                cw + 0.05,
                ch + 0.05,
                REGION_FILL[r as usize]
            );
        }
    }
    axes(&mut s, w, h, m, d_max);
    for t in trajs {
        let mut pts = String::new();
        let mut prev: Option<f64> = None;
        for smp in &t.samples {
            let (phi, d) = (smp.state[4].rem_euclid(2.0 * PI), smp.state[3]);
            if d > d_max {
                continue;
            }
            // break the polyline at the 0/2π seam
            if prev.is_some_and(|p| (p - phi).abs() > PI) {
                let _ = writeln!(s, r#"<polyline points="{pts}" fill="none" stroke="black" stroke-width="1"/>"#);
                pts.clear();
            }
            let _ = write!(pts, "{:.2},{:.2} ", px(phi), py(d));
            prev = Some(phi);
        }
        let _ = writeln!(s, r#"<polyline points="{pts}" fill="none" stroke="black" stroke-width="1"/>"#);
    }
    s.push_str("</svg>\n");
    s
}

pub fn axes(s: &mut String, w: f64, h: f64, m: f64, d_max: f64) {
    let _ = writeln!(
        s,
        r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * m,
        h - 2.0 * m
    );
    for (k, label) in ["0", "π/2", "π", "3π/2", "2π"].iter().enumerate() {
        let x = m + k as f64 / 4.0 * (w - 2.0 * m);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" font-size="11" text-anchor="middle">{label}</text>"#, h - m + 14.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="11">φ</text>"#, w - m + 6.0, h - m);
    for k in 0..=4 {
        let d = d_max * k as f64 / 4.0;
        let y = h - m - k as f64 / 4.0 * (h - 2.0 * m);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{y:.1}" font-size="11" text-anchor="end">{d}</text>"#, m - 4.0);
    }
    let _ = writeln!(s, r#"<text x="{m}" y="{:.1}" font-size="11">d</text>"#, m - 8.0);
}
