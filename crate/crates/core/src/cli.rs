//! Command-line front end, JSON reports and the region comparison.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::certify::{contains, di_check, Budget, Certificate, IntervalBox, SemialgSet, Verdict};
use crate::darboux::{first_integrals, search, DarbouxPair, SearchConfig};
use crate::dynamics::{coherence, coherent_state, station_keeping_model, sym, HybridSystem};
use crate::poly::{parse_expr, Rational, Symbol};
use crate::reach::{partition_sanity, run_chain_escalating, station_keeping_stages_in, ChainReport};
use crate::sim::{
    drift_metrics, phase_portrait_svg, simulate_hybrid, singular_run, trajectory_csv, v_cst, write_events_json,
    SimConfig, Trajectory,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DISPROVED: i32 = 1;
pub const EXIT_UNDETERMINED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "hykeep", version, about = "Invariants, certificates and simulation for a station-keeping Dubins vehicle")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Override one box axis, e.g. `--box d=0.001:10`
    #[arg(long = "box", global = true, value_name = "K=LO:HI")]
    pub bounds: Vec<String>,
    /// Write the JSON report here
    #[arg(long, global = true)]
    pub json: Option<PathBuf>,
    /// Write a figure here
    #[arg(long, global = true)]
    pub svg: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Maximum number of boxes per branch-and-bound run
    #[arg(long, global = true)]
    pub budget: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the hybrid model as JSON
    Model,
    /// Search Darboux polynomials and first integrals
    Darboux {
        #[arg(long, default_value_t = 2)]
        pdeg: u32,
        #[arg(long, default_value_t = 2)]
        cofdeg: u32,
        #[arg(long, default_value = "-2:2")]
        coeffs: String,
        #[arg(long, default_value_t = 2)]
        maxterms: usize,
        /// Restrict to one mode: u1 (constant) or uh (proportional)
        #[arg(long, value_parser = ["u1", "uh"])]
        mode: Option<String>,
        /// `ghe`, `all` (adds d) or a comma-separated list
        #[arg(long, default_value = "ghe")]
        vars: String,
    },
    /// Certify the invariance of d^2 + 2dh <= 0 and the region containments
    Safety,
    /// Check the staging-set chain
    Reach,
    /// Simulate the switched system
    Simulate {
        #[arg(long, default_value_t = PI)]
        phi: f64,
        #[arg(long, default_value_t = 3.0)]
        d: f64,
        #[arg(long, default_value_t = 100.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        events: Option<PathBuf>,
        /// Simulate this many random coherent starts instead
        #[arg(long)]
        random: Option<usize>,
    },
    /// Run the phi = 0 ray through the singularity
    Singular {
        #[arg(long, default_value_t = 3.0)]
        d0: f64,
        #[arg(long, default_value_t = 30.0)]
        horizon: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Compare V <= 0 with the interval-method region on a grid
    Compare {
        #[arg(long, default_value_t = 500)]
        grid: usize,
    },
    /// Run every check and write one report
    Report,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool_version: String,
    pub model_hash: String,
    #[serde(rename = "box")]
    pub bounds: IntervalBox,
    pub command: String,
    pub certificates: Vec<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<serde_json::Value>,
    pub timings: Timings,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Timings {
    pub total_ms: f64,
}

impl Report {
    fn new(command: &str, bounds: &IntervalBox) -> Self {
        Report {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            model_hash: model_hash(&station_keeping_model()),
            bounds: bounds.clone(),
            command: command.to_string(),
            certificates: Vec::new(),
            chain: None,
            data: None,
            timings: Timings::default(),
        }
    }

    pub fn verdict(&self) -> Verdict {
        let certs = self.certificates.iter().map(|c| c.verdict);
        let chain = self.chain.iter().map(|c| c.verdict);
        certs.chain(chain).fold(Verdict::Proved, Verdict::and)
    }
}

pub fn model_hash(m: &HybridSystem) -> String {
    format!("{:x}", Sha256::digest(m.to_json_string().as_bytes()))
}

pub fn exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Proved => EXIT_OK,
        Verdict::Disproved => EXIT_DISPROVED,
        Verdict::Undetermined => EXIT_UNDETERMINED,
    }
}

/// The interval-method region: three clauses over (φ, d).
pub fn interval_method_region() -> SemialgSet {
    SemialgSet::parse(
        "(d >= 0 & d <= 2) \
         | (((phi >= 0 & phi <= pi/6) | (phi >= 7*pi/4 & phi <= 2*pi)) & d >= 0 & d <= 38/5) \
         | (phi >= pi/2 & phi <= 7*pi/4 & d >= 2 & d <= 38/5 & 112*phi - 25*pi*d - 6*pi >= 0)",
    )
    .expect("built-in set")
}

fn in_interval_region(phi: f64, d: f64) -> bool {
    let c1 = (0.0..=2.0).contains(&d);
    let c2 = ((0.0..=PI / 6.0).contains(&phi) || (7.0 * PI / 4.0..=2.0 * PI).contains(&phi)) && (0.0..=7.6).contains(&d);
    let c3 = (PI / 2.0..=7.0 * PI / 4.0).contains(&phi) && (2.0..=7.6).contains(&d) && 112.0 / PI * phi - 25.0 * d - 6.0 >= 0.0;
    c1 || c2 || c3
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionComparison {
    pub grid: usize,
    pub v0: usize,
    pub v_half: usize,
    pub interval_region: usize,
    pub v0_inside_interval_region: usize,
    pub v_half_inside_v0: usize,
    pub fraction_v0_in_interval_region: f64,
    pub fraction_v_half_in_v0: f64,
}

fn grid_point(grid: usize, i: usize, j: usize) -> (f64, f64) {
    ((i as f64 + 0.5) / grid as f64 * 2.0 * PI, (j as f64 + 1.0) / grid as f64 * 8.0)
}

/// Samples (φ, d) ∈ (0, 2π) × (0, 8] and classifies each point.
pub fn compare_regions(grid: usize) -> (RegionComparison, String) {
    let grid = grid.max(10);
    let mut r = RegionComparison {
        grid,
        v0: 0,
        v_half: 0,
        interval_region: 0,
        v0_inside_interval_region: 0,
        v_half_inside_v0: 0,
        fraction_v0_in_interval_region: 0.0,
        fraction_v_half_in_v0: 0.0,
    };
    for i in 0..grid {
        for j in 0..grid {
            let (phi, d) = grid_point(grid, i, j);
            let v = d * d + 2.0 * d * phi.sin();
            let (a, b, s) = (v <= 0.0, v <= -0.5, in_interval_region(phi, d));
            r.v0 += a as usize;
            r.v_half += b as usize;
            r.interval_region += s as usize;
            r.v0_inside_interval_region += (a && s) as usize;
            r.v_half_inside_v0 += (a && b) as usize;
        }
    }
    r.fraction_v0_in_interval_region = r.v0_inside_interval_region as f64 / r.v0.max(1) as f64;
    r.fraction_v_half_in_v0 = r.v_half_inside_v0 as f64 / r.v_half.max(1) as f64;
    (r, overlay_svg(grid.min(200)))
}

fn overlay_svg(n: usize) -> String {
    let (w, h, m, d_max) = (720.0, 420.0, 40.0, 8.0);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let (cw, ch) = ((w - 2.0 * m) / n as f64, (h - 2.0 * m) / n as f64);
    for i in 0..n {
        for j in 0..n {
            let (phi, d) = grid_point(n, i, j);
            let v = d * d + 2.0 * d * phi.sin();
            let fill = if v <= -0.5 {
                "#6a3d9a"
            } else if v <= 0.0 {
                "#b28dd6"
            } else if in_interval_region(phi, d) {
                "#c8c8c8"
            } else {
                continue;
            };
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                m + i as f64 * cw,
                h - m - (j + 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05
            );
        }
    }
    crate::sim::output_axes(&mut s, w, h, m, d_max);
    s.push_str("</svg>\n");
    s
}

fn parse_coeffs(src: &str) -> Result<Vec<Rational>, String> {
    if let Some((lo, hi)) = src.split_once(':') {
        let lo: i64 = lo.trim().parse().map_err(|_| format!("bad coefficient range `{src}`"))?;
        let hi: i64 = hi.trim().parse().map_err(|_| format!("bad coefficient range `{src}`"))?;
        return Ok((lo..=hi).map(|c| Rational::from_integer(c.into())).collect());
    }
    src.split(',')
        .map(|c| {
            c.trim()
                .parse::<i64>()
                .map(|c| Rational::from_integer(c.into()))
                .map_err(|_| format!("bad coefficient `{c}`"))
        })
        .collect()
}

fn certification_box(global: &Global) -> Result<IntervalBox, String> {
    let mut b = IntervalBox::case_study();
    for spec in &global.bounds {
        let (k, iv) = IntervalBox::parse_axis(spec)?;
        b.set(k, iv);
    }
    Ok(b)
}

fn budget(global: &Global) -> Budget {
    let mut b = Budget::default();
    if let Some(n) = global.budget {
        b.max_boxes = n;
    }
    b
}

#[derive(Clone, Debug, Serialize)]
pub struct DarbouxRow {
    pub mode: String,
    pub pairs: Vec<DarbouxPair>,
    pub first_integrals: Vec<(String, Vec<i64>)>,
    pub elapsed_ms: f64,
}

pub fn darboux_table(cfg: &SearchConfig, vars: &[Symbol]) -> Result<Vec<DarbouxRow>, String> {
    let m = station_keeping_model();
    m.modes
        .iter()
        .map(|mode| {
            let t = Instant::now();
            let pairs = search(&mode.field, vars, cfg).map_err(|e| e.to_string())?;
            let fis = first_integrals(&pairs)
                .into_iter()
                .map(|f| (f.expr.to_string(), f.exponents))
                .collect();
            Ok(DarbouxRow {
                mode: mode.name.clone(),
                pairs,
                first_integrals: fis,
                elapsed_ms: t.elapsed().as_secs_f64() * 1e3,
            })
        })
        .collect()
}

/// The invariance and containment certificates for V ≤ 0.
pub fn safety_certificates(b: &IntervalBox, budget: &Budget) -> Vec<Certificate> {
    let m = station_keeping_model();
    let v = parse_expr("d^2 + 2*d*h").expect("built-in");
    let mut out: Vec<Certificate> = m.modes.iter().map(|mode| di_check(&v, mode, &coherence(), b, budget)).collect();
    let v0 = SemialgSet::parse("d^2 + 2*d*h <= 0 & d > 0").expect("built-in");
    out.push(contains(&v0, &SemialgSet::parse("d <= 2").expect("built-in"), b, budget));
    let lhs = SemialgSet::and(vec![v0, coherence()]);
    let mut c = contains(&lhs, &interval_method_region(), b, budget);
    c.claim = "(d^2 + 2*d*h <= 0 & d > 0) implies interval-method region".into();
    out.push(c);
    out
}

fn print_certs(certs: &[Certificate]) {
    for c in certs {
        println!(
            "{:<13} {:<9} {:>8} boxes {:>9.1} ms  {}",
            c.verdict.to_string(),
            c.method,
            c.stats.boxes,
            c.stats.wall_ms,
            c.claim
        );
    }
}

fn print_chain(r: &ChainReport) {
    for s in &r.stages {
        println!("stage {}", s.stage);
        print_certs(&s.premises);
        if let Some(t) = s.time_bound {
            println!("  time bound: {t:.6} s");
        }
    }
    println!("links");
    print_certs(&r.links);
    for n in &r.notes {
        println!("note: {n}");
    }
    println!("reachability of d^2 + 2dh <= 0: {}", r.verdict);
}

fn write_json<T: Serialize>(path: &Option<PathBuf>, value: &T) -> Result<(), String> {
    if let Some(p) = path {
        let body = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
        std::fs::write(p, body + "\n").map_err(|e| format!("{}: {e}", p.display()))?;
    }
    Ok(())
}

fn write_text(path: &Option<PathBuf>, body: &str) -> Result<(), String> {
    if let Some(p) = path {
        std::fs::write(p, body).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    Ok(())
}

fn summarize(tr: &Trajectory) -> serde_json::Value {
    let hit = tr.samples.iter().find(|s| v_cst(&s.state) <= 0.0).map(|s| s.t);
    serde_json::json!({
        "final": tr.last(),
        "reached_v_nonpositive_at": hit,
        "drift": drift_metrics(tr),
        "blowup": tr.blowup,
        "chattering": tr.chattering,
        "events": tr.events.len(),
    })
}

fn reach_outcome(b: &IntervalBox, budget: &Budget) -> Result<(ChainReport, Vec<Certificate>), String> {
    let chain = run_chain_escalating(&station_keeping_stages_in(b), budget).map_err(|e| e.to_string())?;
    Ok((chain, partition_sanity(b, budget)))
}

/// Runs a parsed command; returns the process exit code.
pub fn run(cli: Cli) -> Result<i32, String> {
    let started = Instant::now();
    let g = &cli.global;
    let b = certification_box(g)?;
    let budget = budget(g);
    let mut report = Report::new(command_name(&cli.command), &b);
    let mut code = EXIT_OK;
    match &cli.command {
        Command::Model => {
            let m = station_keeping_model();
            println!("{}", m.to_json_string());
            println!("sha256 {}", model_hash(&m));
            report.data = Some(serde_json::to_value(m.to_json()).map_err(|e| e.to_string())?);
        }
        Command::Darboux {
            pdeg,
            cofdeg,
            coeffs,
            maxterms,
            mode,
            vars,
        } => {
            let cfg = SearchConfig {
                pdeg: *pdeg,
                cofdeg: *cofdeg,
                coeffs: parse_coeffs(coeffs)?,
                maxterms: *maxterms,
                ..SearchConfig::default()
            };
            let vars: Vec<Symbol> = match vars.as_str() {
                "ghe" => ["g", "h", "e"].iter().map(|v| sym(v)).collect(),
                "all" => ["g", "h", "e", "d"].iter().map(|v| sym(v)).collect(),
                list => list.split(',').map(|v| sym(v.trim())).collect(),
            };
            let keep = match mode.as_deref() {
                Some("u1") => Some("constant"),
                Some("uh") => Some("proportional"),
                _ => None,
            };
            let mut rows = darboux_table(&cfg, &vars)?;
            rows.retain(|r| keep.is_none_or(|k| r.mode == k));
            for row in &rows {
                println!("mode {} ({:.1} ms)", row.mode, row.elapsed_ms);
                for p in &row.pairs {
                    println!("  p = {:<24} cofactor = {}", p.p.to_string(), p.cofactor);
                }
                for (fi, exps) in &row.first_integrals {
                    println!("  first integral {fi}  exponents {exps:?}");
                }
            }
            report.data = Some(serde_json::to_value(&rows).map_err(|e| e.to_string())?);
        }
        Command::Safety => {
            report.certificates = safety_certificates(&b, &budget);
            print_certs(&report.certificates);
            code = exit_code(report.verdict());
        }
        Command::Reach => {
            let (chain, sanity) = reach_outcome(&b, &budget)?;
            print_chain(&chain);
            println!("partition");
            print_certs(&sanity);
            report.certificates = sanity;
            report.chain = Some(chain);
            code = exit_code(report.verdict());
        }
        Command::Simulate {
            phi,
            d,
            horizon,
            dt,
            csv,
            events,
            random,
        } => {
            let cfg = SimConfig {
                dt: *dt,
                horizon: *horizon,
                ..SimConfig::default()
            };
            let m = station_keeping_model();
            if let Some(n) = random {
                let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
                let starts: Vec<(f64, f64)> = (0..*n)
                    .map(|_| (rng.gen_range(1e-3..=10.0), rng.gen_range(1e-3..2.0 * PI)))
                    .collect();
                let runs: Vec<serde_json::Value> = starts
                    .par_iter()
                    .map(|&(d, phi)| match simulate_hybrid(&m, coherent_state(d, phi), &cfg) {
                        Ok(tr) => serde_json::json!({"d": d, "phi": phi, "summary": summarize(&tr)}),
                        Err(e) => serde_json::json!({"d": d, "phi": phi, "error": e.to_string()}),
                    })
                    .collect();
                let failed = runs
                    .iter()
                    .filter(|r| r.get("error").is_some() || r["summary"]["reached_v_nonpositive_at"].is_null())
                    .count();
                println!("{} runs, {} did not reach d^2 + 2dh <= 0", runs.len(), failed);
                if failed > 0 {
                    code = EXIT_DISPROVED;
                }
                report.data = Some(serde_json::Value::Array(runs));
            } else {
                let tr = simulate_hybrid(&m, coherent_state(*d, *phi), &cfg).map_err(|e| e.to_string())?;
                let summary = summarize(&tr);
                println!("{}", serde_json::to_string_pretty(&summary).map_err(|e| e.to_string())?);
                if summary["reached_v_nonpositive_at"].is_null() {
                    code = EXIT_DISPROVED;
                }
                write_text(csv, &trajectory_csv(&tr))?;
                if let Some(p) = events {
                    write_events_json(&tr, p).map_err(|e| e.to_string())?;
                }
                write_text(&g.svg, &phase_portrait_svg(&[&tr], 8.0))?;
                report.data = Some(summary);
            }
        }
        Command::Singular {
            d0,
            horizon,
            csv,
            events,
        } => {
            let cfg = SimConfig::default().with_horizon(*horizon);
            let tr = singular_run(&station_keeping_model(), *d0, &cfg).map_err(|e| e.to_string())?;
            for e in &tr.events {
                if e.kind != crate::sim::EventKind::Switch {
                    println!("t = {:<12.6} {:?} {}", e.t, e.kind, e.detail);
                }
            }
            let summary = summarize(&tr);
            println!("{}", serde_json::to_string_pretty(&summary).map_err(|e| e.to_string())?);
            write_text(csv, &trajectory_csv(&tr))?;
            if let Some(p) = events {
                write_events_json(&tr, p).map_err(|e| e.to_string())?;
            }
            write_text(&g.svg, &phase_portrait_svg(&[&tr], 8.0))?;
            report.data = Some(summary);
        }
        Command::Compare { grid } => {
            if *grid < 10 {
                return Err("--grid must be at least 10".into());
            }
            let (cmp, svg) = compare_regions(*grid);
            println!("{}", serde_json::to_string_pretty(&cmp).map_err(|e| e.to_string())?);
            write_text(&g.svg, &svg)?;
            report.data = Some(serde_json::to_value(&cmp).map_err(|e| e.to_string())?);
            if cmp.fraction_v0_in_interval_region < 1.0 {
                code = EXIT_DISPROVED;
            }
        }
        Command::Report => {
            let rows = darboux_table(&SearchConfig::default(), &[sym("g"), sym("h"), sym("e")])?;
            let mut certs = safety_certificates(&b, &budget);
            let (chain, sanity) = reach_outcome(&b, &budget)?;
            certs.extend(sanity);
            print_certs(&certs);
            print_chain(&chain);
            let (cmp, _) = compare_regions(500);
            let singular = singular_run(&station_keeping_model(), 3.0, &SimConfig::default().with_horizon(30.0))
                .map(|t| summarize(&t))
                .map_err(|e| e.to_string())?;
            report.certificates = certs;
            report.chain = Some(chain);
            report.data = Some(serde_json::json!({
                "darboux": rows,
                "compare": cmp,
                "singular": singular,
            }));
            code = exit_code(report.verdict());
        }
    }
    report.timings.total_ms = started.elapsed().as_secs_f64() * 1e3;
    write_json(&g.json, &report)?;
    Ok(code)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Model => "model",
        Command::Darboux { .. } => "darboux",
        Command::Safety => "safety",
        Command::Reach => "reach",
        Command::Simulate { .. } => "simulate",
        Command::Singular { .. } => "singular",
        Command::Compare { .. } => "compare",
        Command::Report => "report",
    }
}

/// Parses `args`, honours `HYKEEP_THREADS`, runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Some(n) = std::env::var("HYKEEP_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_classification_examples() {
        let (phi, d) = (1.5 * PI, 1.0);
        assert_eq!(d * d + 2.0 * d * phi.sin(), -1.0);
        assert!(in_interval_region(phi, d));
        assert!(!in_interval_region(PI, 5.0));
    }

    #[test]
    fn coefficient_ranges() {
        assert_eq!(parse_coeffs("-2:2").unwrap().len(), 5);
        assert_eq!(parse_coeffs("1, 3").unwrap().len(), 2);
        assert!(parse_coeffs("x").is_err());
    }
}
