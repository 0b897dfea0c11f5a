//! One PASS/FAIL line per acceptance criterion. Failing criteria are
//! reported but only fail the test when `CDFEM_ACCEPTANCE_STRICT` is set.

use std::io::Write;

use cdfem::decompose::{decompose_mesh, DecomposeOptions};
use cdfem::levelset::{LevelSetField, Shape};
use cdfem_bench::drivers::{background, emit};
use cdfem_bench::verify::{monte_carlo_area, oracle_suite};
use cdfem_bench::*;

const ORACLE_ELEMENTS: usize = 500;
const AREA_SAMPLES: usize = 1_000_000;
const SEED: u64 = 20_240_601;

/// Bypasses the test harness capture so the lines show in plain `cargo test`.
macro_rules! say {
    ($($t:tt)*) => {
        let _ = writeln!(std::io::stdout(), $($t)*);
    };
}

struct Criterion {
    number: usize,
    title: &'static str,
    checks: Vec<Check>,
    info: Vec<String>,
}

impl Criterion {
    fn new(number: usize, title: &'static str) -> Self {
        Self { number, title, checks: Vec::new(), info: Vec::new() }
    }

    fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    fn print(&self) {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        say!("criterion {}: {verdict} {} ({} checks)", self.number, self.title, self.checks.len());
        for c in self.checks.iter().filter(|c| !c.passed) {
            say!("    failed: {}: {}", c.name, c.detail);
        }
        for i in &self.info {
            say!("    info: {i}");
        }
    }
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), passed, detail: detail.into() }
}

fn preset(b: Benchmark) -> BenchmarkConfig {
    BenchmarkConfig::preset(b)
}

fn run_ok(cfg: &BenchmarkConfig) -> Outcome {
    run(cfg).unwrap_or_else(|e| panic!("{} failed to run: {e}", cfg.benchmark))
}

/// Slope and conformity checks; conformity is collected separately.
fn slope_checks(cfg: &BenchmarkConfig, out: &Outcome) -> Vec<Check> {
    evaluate(cfg, out).into_iter().filter(|c| !c.name.starts_with("conformity")).collect()
}

fn finer_slopes(mut cfg: BenchmarkConfig) -> String {
    cfg.levels = vec![16, 32, 64, 128];
    cfg.psi.truncate(1);
    let out = run_ok(&cfg);
    let r = &out.reports[0];
    let fmt = |s: Option<f64>| s.map_or("-".into(), |s| format!("{s:.2}"));
    let per_order: Vec<String> = r
        .orders()
        .into_iter()
        .map(|m| match r.rows_for(m)[0].err_he {
            Some(_) => format!("m={m} L2 {} HE {}", fmt(r.slopes_l2(m).fit), fmt(r.slopes_he(m).fit)),
            None => format!("m={m} {}", fmt(r.slopes_l2(m).fit)),
        })
        .collect();
    format!("{} {} over 16..128 cells: {}", cfg.benchmark, cfg.mesh, per_order.join(", "))
}

#[test]
fn acceptance() {
    say!();
    let mut criteria = Vec::new();
    let mut conformity = Criterion::new(7, "conformity of every finest decomposed mesh");
    let mut collect_meshes = |out: &Outcome| {
        for a in &out.meshes {
            conformity.checks.push(check(
                format!("{} m={} {} cells", a.label, a.order, a.lh),
                a.conformity.passed(),
                a.conformity.summary(),
            ));
        }
    };

    let mut c = Criterion::new(1, "flower reconstruction slopes, Cartesian mesh, under 60 s");
    let cfg = preset(Benchmark::Flower);
    let out = run_ok(&cfg);
    c.checks = slope_checks(&cfg, &out);
    collect_meshes(&out);
    if !c.passed() {
        c.info.push(finer_slopes(cfg));
    }
    c.print();
    criteria.push(c);

    let mut c = Criterion::new(2, "flower reconstruction slopes, deformed mesh");
    let mut cfg = preset(Benchmark::Flower);
    cfg.mesh = MeshKind::Deformed;
    let out = run_ok(&cfg);
    c.checks = slope_checks(&cfg, &out);
    collect_meshes(&out);
    if !c.passed() {
        c.info.push(finer_slopes(cfg));
    }
    c.print();
    criteria.push(c);

    let cfg = preset(Benchmark::Projection);
    let out = run_ok(&cfg);
    collect_meshes(&out);
    let checks = slope_checks(&cfg, &out);
    let (blend, rest): (Vec<Check>, Vec<Check>) = checks.into_iter().partition(|c| c.name.starts_with("blend"));
    let mut c = Criterion::new(3, "L2 projection slopes, Lenoir matches the default mapping");
    c.checks = rest;
    if !c.passed() {
        c.info.push(finer_slopes(cfg.clone()));
    }
    c.print();
    criteria.push(c);
    let mut c = Criterion::new(4, "blending on the whole triangle degrades m = 4 at 64 cells");
    c.checks = blend;
    c.print();
    criteria.push(c);

    let mut c = Criterion::new(5, "bi-material slopes m = 1..3, under 10 min");
    let cfg = preset(Benchmark::Bimaterial);
    let out = run_ok(&cfg);
    c.checks = slope_checks(&cfg, &out);
    collect_meshes(&out);
    c.print();
    criteria.push(c);

    let mut c = Criterion::new(6, "plate with hole slopes m = 1..3");
    let cfg = preset(Benchmark::PlateHole);
    let out = run_ok(&cfg);
    c.checks = slope_checks(&cfg, &out);
    collect_meshes(&out);
    if !c.passed() {
        c.info.push(finer_slopes(cfg));
    }
    c.print();
    criteria.push(c);

    let cfg = preset(Benchmark::Condition);
    let condition = run_ok(&cfg);
    collect_meshes(&condition);
    conformity.print();
    criteria.push(conformity);

    let mut c = Criterion::new(8, "root oracles, exact chords and Monte Carlo area");
    let oracle = oracle_suite(ORACLE_ELEMENTS, SEED).expect("oracle suite");
    c.checks.push(check(
        "edge and interior roots",
        oracle.passed(ORACLE_ELEMENTS),
        format!("{oracle:?}"),
    ));
    let flower = preset(Benchmark::Flower);
    let bg = background(&flower, 16, 3).expect("background");
    let shape = Shape::flower(flower.flower.radius, flower.flower.amplitude, flower.flower.frequency);
    let field = LevelSetField::from_fn(&bg, |p| shape.eval(p));
    let mesh = decompose_mesh(&bg, &field, &DecomposeOptions::default()).expect("decomposition").mesh;
    let area = monte_carlo_area(&bg, &field, &mesh, AREA_SAMPLES, SEED).expect("area sampling");
    c.checks.push(check(
        "minus-side area within 3 sigma",
        area.passed(),
        format!("mesh {:.6} sampled {:.6} sigma {:.1e} ({:.2} sigma)", area.mesh_area, area.sampled_area, area.sigma, area.deviation()),
    ));
    c.print();
    criteria.push(c);

    let mut c = Criterion::new(9, "condition sweep completes, monotone in m, series for every order");
    c.checks = slope_checks(&cfg, &condition);
    let dir = tempfile::tempdir().expect("temp dir");
    let written = emit(&condition, dir.path()).expect("emit");
    let report = condition.condition.as_ref().expect("condition report");
    for &m in &cfg.orders {
        let path = dir.path().join(format!("condition_m{m}.dat"));
        let rows = std::fs::read_to_string(&path).map(|t| t.lines().filter(|l| !l.starts_with('#')).count()).unwrap_or(0);
        c.checks.push(check(
            format!("series m={m}"),
            written.contains(&path) && rows == cfg.condition.steps && report.series(m).len() == cfg.condition.steps,
            format!("{rows} rows"),
        ));
    }
    c.print();
    criteria.push(c);

    let failed: Vec<usize> = criteria.iter().filter(|c| !c.passed()).map(|c| c.number).collect();
    say!("acceptance: {} of {} criteria pass", criteria.len() - failed.len(), criteria.len());
    if std::env::var_os("CDFEM_ACCEPTANCE_STRICT").is_some() {
        assert!(failed.is_empty(), "failing criteria: {failed:?}");
    }
}
