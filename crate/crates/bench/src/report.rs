use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::{BenchError, MeshKind};

pub const CSV_HEADER: [&str; 12] =
    ["benchmark", "mesh", "order", "lh", "h", "ndof", "err_l2", "err_he", "cond", "seconds", "slope_fit", "slope_last"];

/// One `(m, ℓ)` cell of a convergence sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub benchmark: String,
    pub mesh: MeshKind,
    pub order: usize,
    pub lh: usize,
    pub h: f64,
    pub ndof: usize,
    pub err_l2: f64,
    pub err_he: Option<f64>,
    pub cond: Option<f64>,
    pub seconds: f64,
}

/// Least-squares slope of `ln e` against `ln h`. `None` with fewer than two
/// points or a non-positive value.
pub fn fit_slope(h: &[f64], e: &[f64]) -> Option<f64> {
    if h.len() != e.len() || h.len() < 2 || h.iter().chain(e).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let sxx: f64 = x.iter().map(|a| (a - xm) * (a - xm)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Slope over the last two points.
pub fn last_slope(h: &[f64], e: &[f64]) -> Option<f64> {
    let n = h.len().min(e.len());
    if n < 2 {
        return None;
    }
    fit_slope(&h[n - 2..n], &e[n - 2..n])
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Slopes {
    pub fit: Option<f64>,
    pub last: Option<f64>,
}

/// Rows of one benchmark label (one mapping for the projection sweep).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceReport {
    pub benchmark: String,
    pub rows: Vec<Row>,
}

impl ConvergenceReport {
    pub fn new(benchmark: impl Into<String>) -> Self {
        Self { benchmark: benchmark.into(), rows: Vec::new() }
    }

    pub fn orders(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.order).collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Rows of order `m` sorted by level.
    pub fn rows_for(&self, order: usize) -> Vec<&Row> {
        let mut rows: Vec<&Row> = self.rows.iter().filter(|r| r.order == order).collect();
        rows.sort_by_key(|r| r.lh);
        rows
    }

    fn slopes_of(&self, order: usize, err: impl Fn(&Row) -> Option<f64>) -> Slopes {
        let rows = self.rows_for(order);
        let pairs: Vec<(f64, f64)> = rows.iter().filter_map(|r| err(r).map(|e| (r.h, e))).collect();
        if pairs.len() != rows.len() {
            return Slopes::default();
        }
        let (h, e): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        Slopes { fit: fit_slope(&h, &e), last: last_slope(&h, &e) }
    }

    /// Slopes of the L2 (or flower) error of order `m`.
    pub fn slopes_l2(&self, order: usize) -> Slopes {
        self.slopes_of(order, |r| Some(r.err_l2))
    }

    pub fn slopes_he(&self, order: usize) -> Slopes {
        self.slopes_of(order, |r| r.err_he)
    }

    /// Row of order `m` at the finest level.
    pub fn finest(&self, order: usize) -> Option<&Row> {
        self.rows_for(order).last().copied()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV of all rows. The slope columns hold the L2 slopes of the row's
/// `(benchmark, order)` group.
pub fn write_csv<W: Write>(w: W, reports: &[ConvergenceReport]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for report in reports {
        for r in &report.rows {
            let s = report.slopes_l2(r.order);
            out.write_record([
                r.benchmark.clone(),
                r.mesh.to_string(),
                r.order.to_string(),
                r.lh.to_string(),
                r.h.to_string(),
                r.ndof.to_string(),
                r.err_l2.to_string(),
                opt(r.err_he),
                opt(r.cond),
                format!("{:.6}", r.seconds),
                opt(s.fit),
                opt(s.last),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Slope summary with both error measures, one line per `(benchmark, order)`.
pub fn write_slopes<W: Write>(w: W, reports: &[ConvergenceReport]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["benchmark", "order", "l2_fit", "l2_last", "he_fit", "he_last"])?;
    for report in reports {
        for m in report.orders() {
            let (a, b) = (report.slopes_l2(m), report.slopes_he(m));
            out.write_record([report.benchmark.clone(), m.to_string(), opt(a.fit), opt(a.last), opt(b.fit), opt(b.last)])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub(crate) fn file_stem(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>, BenchError> {
    File::create(path).map(BufWriter::new).map_err(|e| BenchError::io(path, e))
}

pub(crate) fn csv_to(path: &Path, f: impl FnOnce(BufWriter<File>) -> Result<(), csv::Error>) -> Result<(), BenchError> {
    f(create(path)?).map_err(|source| BenchError::Csv { path: path.to_path_buf(), source })
}

/// Whitespace-separated series per `(benchmark, order)`:
/// `h lh ndof err_l2 err_he cond`, missing values as `nan`.
pub fn write_series(dir: &Path, reports: &[ConvergenceReport]) -> Result<Vec<PathBuf>, BenchError> {
    let mut paths = Vec::new();
    for report in reports {
        for m in report.orders() {
            let path = dir.join(format!("{}_m{m}.dat", file_stem(&report.benchmark)));
            let mut w = create(&path)?;
            let io = |e| BenchError::io(&path, e);
            writeln!(w, "# {} m={m}\n# h lh ndof err_l2 err_he cond", report.benchmark).map_err(io)?;
            for r in report.rows_for(m) {
                let f = |v: Option<f64>| v.unwrap_or(f64::NAN);
                writeln!(w, "{:e} {} {} {:e} {:e} {:e}", r.h, r.lh, r.ndof, r.err_l2, f(r.err_he), f(r.cond)).map_err(io)?;
            }
            w.flush().map_err(io)?;
            paths.push(path);
        }
    }
    Ok(paths)
}

/// Condition number at one offset of the inclusion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionPoint {
    pub order: usize,
    pub step: usize,
    /// Offset relative to the cell height.
    pub offset: f64,
    pub kappa: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub ndof: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConditionReport {
    pub points: Vec<ConditionPoint>,
}

impl ConditionReport {
    pub fn series(&self, order: usize) -> Vec<&ConditionPoint> {
        self.points.iter().filter(|p| p.order == order).collect()
    }

    pub fn orders(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.order).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["order", "step", "offset", "kappa", "lambda_min", "lambda_max", "ndof"])?;
        for p in &self.points {
            out.write_record([
                p.order.to_string(),
                p.step.to_string(),
                p.offset.to_string(),
                p.kappa.to_string(),
                p.lambda_min.to_string(),
                p.lambda_max.to_string(),
                p.ndof.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// `offset kappa` per order.
    pub fn write_series(&self, dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
        let mut paths = Vec::new();
        for m in self.orders() {
            let path = dir.join(format!("condition_m{m}.dat"));
            let mut w = create(&path)?;
            let io = |e| BenchError::io(&path, e);
            writeln!(w, "# condition m={m}\n# offset/h kappa").map_err(io)?;
            for p in self.series(m) {
                writeln!(w, "{:e} {:e}", p.offset, p.kappa).map_err(io)?;
            }
            w.flush().map_err(io)?;
            paths.push(path);
        }
        Ok(paths)
    }
}
