use std::path::{Path, PathBuf};
use std::time::Instant;

use cdfem::decompose::{decompose_mesh, DecomposeOptions, PsiVariant};
use cdfem::levelset::{LevelSetField, Shape};
use cdfem::mesh::io::NativeMesh;
use cdfem::mesh::{build_cartesian, deform, vtk, BackgroundMesh, ConformingMesh, Side};
use cdfem::refelem::{line_shape, quadrature, Family};
use cdfem::{BoundingBox, Point2};
use cdfem_fem::exact::{BiMaterial, PlateHole, SinCos};
use cdfem_fem::{
    apply_dirichlet_and_solve, assemble_elasticity, condition_number, error_norms, l2_project, EigenOptions,
    ExactSolution, FemError, Materials,
};

use crate::report::{self, ConditionPoint, ConditionReport, ConvergenceReport, Row};
use crate::verify::ConformityCheck;
use crate::{Benchmark, BenchError, BenchmarkConfig, MeshKind};

/// Decomposed mesh kept for output and verification.
#[derive(Clone, Debug)]
pub struct MeshArtifact {
    pub label: String,
    pub order: usize,
    pub lh: usize,
    pub background: BackgroundMesh<f64>,
    pub phi: Vec<f64>,
    pub mesh: ConformingMesh<f64>,
    pub conformity: ConformityCheck,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub benchmark: Benchmark,
    pub reports: Vec<ConvergenceReport>,
    pub condition: Option<ConditionReport>,
    /// Finest mesh per label and order.
    pub meshes: Vec<MeshArtifact>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

fn context(cfg: &BenchmarkConfig, label: &str, order: usize, lh: usize) -> String {
    format!("{} ({label}, {} mesh, m = {order}, {lh} cells)", cfg.benchmark, cfg.mesh)
}

pub fn background(cfg: &BenchmarkConfig, cells: usize, order: usize) -> Result<BackgroundMesh<f64>, BenchError> {
    let bg = build_cartesian(BoundingBox::symmetric_unit(), cells, cfg.family.0, order)?;
    Ok(match cfg.mesh {
        MeshKind::Cartesian => bg,
        MeshKind::Deformed => deform(&bg, cfg.delta)?,
    })
}

fn options(cfg: &BenchmarkConfig, psi: PsiVariant) -> DecomposeOptions {
    DecomposeOptions { psi, grid_samples: cfg.grid_samples, max_refine: cfg.max_refine, ..DecomposeOptions::default() }
}

struct Cell {
    background: BackgroundMesh<f64>,
    field: LevelSetField<f64>,
    mesh: ConformingMesh<f64>,
}

impl Cell {
    fn new(
        cfg: &BenchmarkConfig,
        ctx: &str,
        background: BackgroundMesh<f64>,
        phi: impl Fn(Point2<f64>) -> f64,
        psi: PsiVariant,
    ) -> Result<Self, BenchError> {
        let field = LevelSetField::from_fn(&background, phi);
        let mesh = decompose_mesh(&background, &field, &options(cfg, psi))
            .map_err(|source| BenchError::Decompose { context: ctx.to_string(), source })?
            .mesh;
        Ok(Self { background, field, mesh })
    }

    fn artifact(self, label: &str, order: usize, lh: usize) -> Result<MeshArtifact, BenchError> {
        let conformity = ConformityCheck::run(&self.background, &self.field, &self.mesh)?;
        Ok(MeshArtifact {
            label: label.to_string(),
            order,
            lh,
            phi: self.field.values().to_vec(),
            background: self.background,
            mesh: self.mesh,
            conformity,
        })
    }
}

fn fem(ctx: &str) -> impl Fn(FemError) -> BenchError + '_ {
    move |source| BenchError::Fem { context: ctx.to_string(), source }
}

/// Sweep over orders and levels; `cell` returns the row and the decomposed
/// cell of one `(m, ℓ)` pair.
fn sweep(
    cfg: &BenchmarkConfig,
    label: &str,
    mut cell: impl FnMut(usize, usize, &str) -> Result<(Row, Cell), BenchError>,
) -> Result<(ConvergenceReport, Vec<MeshArtifact>), BenchError> {
    let mut report = ConvergenceReport::new(label);
    let mut meshes = Vec::new();
    for &m in &cfg.orders {
        for (k, &lh) in cfg.levels.iter().enumerate() {
            let ctx = context(cfg, label, m, lh);
            let start = Instant::now();
            let (mut row, c) = cell(m, lh, &ctx)?;
            row.seconds = start.elapsed().as_secs_f64();
            report.rows.push(row);
            if k + 1 == cfg.levels.len() {
                meshes.push(c.artifact(label, m, lh)?);
            }
        }
    }
    Ok((report, meshes))
}

fn row(cfg: &BenchmarkConfig, label: &str, order: usize, lh: usize) -> Row {
    Row {
        benchmark: label.to_string(),
        mesh: cfg.mesh,
        order,
        lh,
        h: 2.0 / lh as f64,
        ndof: 0,
        err_l2: f64::NAN,
        err_he: None,
        cond: None,
        seconds: 0.0,
    }
}

/// `sqrt(∫_Γ φ² dΓ)` of the analytic level set over the interface facets.
pub fn interface_error(mesh: &ConformingMesh<f64>, phi: impl Fn(Point2<f64>) -> f64) -> Result<f64, BenchError> {
    let mut sum = 0.0;
    for (f, facet) in mesh.facets.iter().enumerate() {
        let q = quadrature::<f64>(Family::Line, 2 * facet.order + 6)?;
        let coords = mesh.facet_coords(f);
        for (p, w) in q.iter() {
            let (n, dn) = line_shape(facet.order, p.x);
            let mut x = Point2::zero();
            let mut dx = Point2::zero();
            for ((c, a), b) in coords.iter().zip(&n).zip(&dn) {
                x += *c * *a;
                dx += *c * *b;
            }
            sum += w * phi(x).powi(2) * dx.norm();
        }
    }
    Ok(sum.sqrt())
}

pub fn run_flower(cfg: &BenchmarkConfig) -> Result<Outcome, BenchError> {
    let start = Instant::now();
    let f = cfg.flower;
    let shape = Shape::flower(f.radius, f.amplitude, f.frequency);
    let label = "flower";
    let psi = cfg.psi[0].0;
    let (report, meshes) = sweep(cfg, label, |m, lh, ctx| {
        let c = Cell::new(cfg, ctx, background(cfg, lh, m)?, |p| shape.eval(p), psi)?;
        let mut r = row(cfg, label, m, lh);
        r.ndof = c.mesh.nodes.len();
        r.err_l2 = interface_error(&c.mesh, |p| shape.eval(p))?;
        Ok((r, c))
    })?;
    Ok(Outcome { benchmark: Benchmark::Flower, reports: vec![report], condition: None, meshes, seconds: start.elapsed().as_secs_f64() })
}

/// `sin 2x cos 3y`.
pub fn projection_target(p: Point2<f64>) -> f64 {
    (2.0 * p.x).sin() * (3.0 * p.y).cos()
}

pub fn run_projection(cfg: &BenchmarkConfig) -> Result<Outcome, BenchError> {
    let start = Instant::now();
    let shape = Shape::circle(cfg.circle_radius);
    let mut reports = Vec::new();
    let mut meshes = Vec::new();
    for psi in cfg.psi_variants() {
        let label = format!("projection:{psi}");
        let (report, mut ms) = sweep(cfg, &label, |m, lh, ctx| {
            let c = Cell::new(cfg, ctx, background(cfg, lh, m)?, |p| shape.eval(p), psi)?;
            let u = l2_project(&c.mesh, &projection_target).map_err(fem(ctx))?;
            let e = error_norms(&u, &SinCos, None).map_err(fem(ctx))?;
            let mut r = row(cfg, &label, m, lh);
            r.ndof = c.mesh.nodes.len();
            r.err_l2 = e.l2;
            r.err_he = Some(e.he);
            Ok((r, c))
        })?;
        reports.push(report);
        meshes.append(&mut ms);
    }
    Ok(Outcome { benchmark: Benchmark::Projection, reports, condition: None, meshes, seconds: start.elapsed().as_secs_f64() })
}

/// Elasticity cell: assemble, impose the exact field on the box, solve and
/// measure. The hole side is dropped when `materials` has no entry for it.
fn elasticity_row(
    cfg: &BenchmarkConfig,
    ctx: &str,
    mesh: &ConformingMesh<f64>,
    materials: &Materials,
    exact: &dyn ExactSolution,
    boundary_side: Side,
    mut r: Row,
) -> Result<Row, BenchError> {
    let mut system = assemble_elasticity(mesh, materials).map_err(fem(ctx))?;
    let failure = std::cell::RefCell::new(None);
    let sol = apply_dirichlet_and_solve(mesh, &mut system, |p| match exact.eval(p, boundary_side) {
        Ok(v) => v.value,
        Err(e) => {
            failure.replace(Some(e));
            [0.0; 2]
        }
    });
    if let Some(e) = failure.into_inner() {
        return Err(fem(ctx)(e));
    }
    let sol = sol.map_err(fem(ctx))?;
    let e = error_norms(&sol.field, exact, Some(materials)).map_err(fem(ctx))?;
    r.ndof = system.ndof();
    r.err_l2 = e.l2;
    r.err_he = Some(e.he);
    if r.lh <= cfg.cond_max_level {
        r.cond = Some(condition_number(&sol.reduced, &sol.factor, &EigenOptions::default()).map_err(fem(ctx))?.kappa);
    }
    Ok(r)
}

pub fn bimaterial_solution(cfg: &BenchmarkConfig) -> Result<BiMaterial, BenchError> {
    let b = &cfg.bimaterial;
    Ok(BiMaterial::new(b.a, b.b, b.inner.build()?, b.outer.build()?)?)
}

pub fn run_bimaterial(cfg: &BenchmarkConfig) -> Result<Outcome, BenchError> {
    let start = Instant::now();
    let exact = bimaterial_solution(cfg)?;
    let materials = Materials::default().with(Side::Minus, exact.inner).with(Side::Plus, exact.outer);
    let shape = Shape::circle(exact.a);
    let label = "bimaterial";
    let psi = cfg.psi[0].0;
    let (report, meshes) = sweep(cfg, label, |m, lh, ctx| {
        let c = Cell::new(cfg, ctx, background(cfg, lh, m)?, |p| shape.eval(p), psi)?;
        let r = elasticity_row(cfg, ctx, &c.mesh, &materials, &exact, Side::Plus, row(cfg, label, m, lh))?;
        Ok((r, c))
    })?;
    Ok(Outcome { benchmark: Benchmark::Bimaterial, reports: vec![report], condition: None, meshes, seconds: start.elapsed().as_secs_f64() })
}

pub fn plate_solution(cfg: &BenchmarkConfig) -> Result<PlateHole, BenchError> {
    let p = &cfg.plate;
    Ok(PlateHole::new(p.a, p.tx, p.material.build()?)?)
}

pub fn run_plate_hole(cfg: &BenchmarkConfig) -> Result<Outcome, BenchError> {
    let start = Instant::now();
    let exact = plate_solution(cfg)?;
    let materials = Materials::default().with(Side::Plus, exact.material);
    let shape = Shape::circle(exact.a);
    let label = "plate-hole";
    let psi = cfg.psi[0].0;
    let (report, meshes) = sweep(cfg, label, |m, lh, ctx| {
        let c = Cell::new(cfg, ctx, background(cfg, lh, m)?, |p| shape.eval(p), psi)?;
        let r = elasticity_row(cfg, ctx, &c.mesh, &materials, &exact, Side::Plus, row(cfg, label, m, lh))?;
        Ok((r, c))
    })?;
    Ok(Outcome { benchmark: Benchmark::PlateHole, reports: vec![report], condition: None, meshes, seconds: start.elapsed().as_secs_f64() })
}

/// Condition numbers of the plate-with-hole system on a coarse mesh while
/// the hole moves up by one cell height in `steps` equal increments
/// (both ends included).
pub fn run_condition_sweep(cfg: &BenchmarkConfig) -> Result<Outcome, BenchError> {
    let start = Instant::now();
    let exact = plate_solution(cfg)?;
    let materials = Materials::default().with(Side::Plus, exact.material);
    let cells = cfg.condition.cells;
    let steps = cfg.condition.steps;
    let psi = cfg.psi[0].0;
    let mut report = ConditionReport::default();
    let mut meshes = Vec::new();
    for &m in &cfg.orders {
        let bg = background(cfg, cells, m)?;
        let h = bg.h;
        for step in 0..steps {
            let t = if steps > 1 { step as f64 / (steps - 1) as f64 } else { 0.0 };
            let ctx = format!("condition (m = {m}, offset {t}h)");
            let shape = Shape::Circle { center: Point2::new(0.0, t * h), radius: exact.a };
            let c = Cell::new(cfg, &ctx, bg.clone(), |p| shape.eval(p), psi)?;
            // the exact field is centered at the origin; only the matrix matters here
            let mut system = assemble_elasticity(&c.mesh, &materials).map_err(fem(&ctx))?;
            let sol = apply_dirichlet_and_solve(&c.mesh, &mut system, |_| [0.0; 2]).map_err(fem(&ctx))?;
            let k = condition_number(&sol.reduced, &sol.factor, &EigenOptions::default()).map_err(fem(&ctx))?;
            report.points.push(ConditionPoint {
                order: m,
                step,
                offset: t,
                kappa: k.kappa,
                lambda_min: k.lambda_min,
                lambda_max: k.lambda_max,
                ndof: system.ndof(),
            });
            if step == 0 {
                meshes.push(c.artifact("condition", m, cells)?);
            }
        }
    }
    Ok(Outcome {
        benchmark: Benchmark::Condition,
        reports: Vec::new(),
        condition: Some(report),
        meshes,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn run(cfg: &BenchmarkConfig) -> Result<Outcome, BenchError> {
    cfg.validate()?;
    match cfg.benchmark {
        Benchmark::Flower => run_flower(cfg),
        Benchmark::Projection => run_projection(cfg),
        Benchmark::Bimaterial => run_bimaterial(cfg),
        Benchmark::PlateHole => run_plate_hole(cfg),
        Benchmark::Condition => run_condition_sweep(cfg),
    }
}

fn window_check(name: String, slope: Option<f64>, m: usize, w: [f64; 2]) -> Check {
    let (lo, hi) = (m as f64 + w[0], m as f64 + w[1]);
    match slope {
        Some(s) => Check::new(name, (lo..=hi).contains(&s), format!("slope {s:.3} in [{lo:.1}, {hi:.1}]")),
        None => Check::new(name, false, "no slope (fewer than two levels)"),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.3}"))
}

/// Threshold checks of the configuration applied to a finished run.
pub fn evaluate(cfg: &BenchmarkConfig, outcome: &Outcome) -> Vec<Check> {
    let t = &cfg.thresholds;
    let mut checks = Vec::new();
    let reference = outcome.reports.first();
    if let Some(r) = reference {
        for m in r.orders() {
            if let Some(w) = t.l2_slope {
                checks.push(window_check(format!("{} m={m} L2 slope", r.benchmark), r.slopes_l2(m).fit, m, w));
            }
            if let Some(w) = t.he_slope {
                checks.push(window_check(format!("{} m={m} HE slope", r.benchmark), r.slopes_he(m).fit, m, w));
            }
        }
    }
    let variant = |psi: PsiVariant| outcome.reports.iter().find(|r| r.benchmark.ends_with(&format!(":{psi}")));
    if let (Some(tol), Some(r), Some(l)) = (t.lenoir_slope_match, reference, variant(PsiVariant::Lenoir)) {
        for m in r.orders() {
            for (kind, a, b) in [
                ("L2", r.slopes_l2(m).fit, l.slopes_l2(m).fit),
                ("HE", r.slopes_he(m).fit, l.slopes_he(m).fit),
            ] {
                let ok = matches!((a, b), (Some(a), Some(b)) if (a - b).abs() <= tol);
                checks.push(Check::new(
                    format!("lenoir m={m} {kind} slope matches"),
                    ok,
                    format!("{} vs {} (tol {tol})", fmt_opt(b), fmt_opt(a)),
                ));
            }
        }
    }
    if let (Some(r), Some(b)) = (reference, variant(PsiVariant::BlendOnT)) {
        if let Some(m) = r.orders().into_iter().max() {
            let (rf, bf) = (r.finest(m), b.finest(m));
            if let (Some(ratio), Some(rf), Some(bf)) = (t.blend_error_ratio, rf, bf) {
                let q = bf.err_l2 / rf.err_l2;
                checks.push(Check::new(
                    format!("blend m={m} error ratio at {} cells", rf.lh),
                    q >= ratio,
                    format!("{q:.2} >= {ratio}"),
                ));
            }
            if let Some(gap) = t.blend_slope_gap {
                let (a, c) = (r.slopes_l2(m).fit, b.slopes_l2(m).fit);
                let ok = matches!((a, c), (Some(a), Some(c)) if a - c >= gap);
                checks.push(Check::new(
                    format!("blend m={m} slope gap"),
                    ok,
                    format!("{} vs reference {} (gap >= {gap})", fmt_opt(c), fmt_opt(a)),
                ));
            }
        }
    }
    if let Some(c) = &outcome.condition {
        let finite = c.points.iter().all(|p| p.kappa.is_finite() && p.kappa >= 1.0);
        checks.push(Check::new("condition finite", finite, format!("{} estimates", c.points.len())));
        if t.kappa_monotone == Some(true) {
            let at_zero: Vec<f64> = c.orders().iter().filter_map(|&m| c.series(m).first().map(|p| p.kappa)).collect();
            let ok = at_zero.windows(2).all(|w| w[1] > w[0]);
            checks.push(Check::new(
                "condition monotone in order",
                ok,
                at_zero.iter().map(|k| format!("{k:.3e}")).collect::<Vec<_>>().join(" < "),
            ));
        }
    }
    for a in &outcome.meshes {
        checks.push(Check::new(
            format!("conformity {} m={} {} cells", a.label, a.order, a.lh),
            a.conformity.passed(),
            a.conformity.summary(),
        ));
    }
    if let Some(s) = t.max_seconds {
        checks.push(Check::new("runtime", outcome.seconds <= s, format!("{:.1} s <= {s} s", outcome.seconds)));
    }
    checks
}

/// Writes the CSV tables, plot series and the finest meshes to `dir`.
pub fn emit(outcome: &Outcome, dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let mut paths = Vec::new();
    let name = outcome.benchmark.to_string();
    if !outcome.reports.is_empty() || outcome.condition.is_none() {
        let csv = dir.join(format!("{name}.csv"));
        report::csv_to(&csv, |w| report::write_csv(w, &outcome.reports))?;
        let slopes = dir.join(format!("{name}_slopes.csv"));
        report::csv_to(&slopes, |w| report::write_slopes(w, &outcome.reports))?;
        paths.push(csv);
        paths.push(slopes);
        paths.extend(report::write_series(dir, &outcome.reports)?);
    }
    if let Some(c) = &outcome.condition {
        let csv = dir.join(format!("{name}.csv"));
        report::csv_to(&csv, |w| c.write_csv(w))?;
        paths.push(csv);
        paths.extend(c.write_series(dir)?);
    }
    for a in &outcome.meshes {
        let stem = format!("{}_m{}_l{}", report::file_stem(&a.label), a.order, a.lh);
        paths.extend(write_mesh(dir, &stem, &a.background, Some(&a.phi), &a.mesh)?);
    }
    Ok(paths)
}

/// Native background and decomposed meshes plus VTK files of the
/// decomposed elements and of the interface facets.
pub fn write_mesh(
    dir: &Path,
    stem: &str,
    background: &BackgroundMesh<f64>,
    phi: Option<&[f64]>,
    mesh: &ConformingMesh<f64>,
) -> Result<Vec<PathBuf>, BenchError> {
    let bg_path = dir.join(format!("{stem}_background.mesh"));
    let path = dir.join(format!("{stem}.mesh"));
    let vtk_path = dir.join(format!("{stem}.vtk"));
    let facet_path = dir.join(format!("{stem}_interface.vtk"));
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |e| BenchError::io(&p, e)
    };
    NativeMesh::from_background(background, phi).write(report::create(&bg_path)?).map_err(io(&bg_path))?;
    NativeMesh::from_conforming(mesh).write(report::create(&path)?).map_err(io(&path))?;
    vtk::write_conforming(report::create(&vtk_path)?, mesh, &[])?;
    vtk::write_facets(report::create(&facet_path)?, mesh)?;
    Ok(vec![bg_path, path, vtk_path, facet_path])
}
