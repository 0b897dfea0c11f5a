use std::io::Write;
use std::path::{Path, PathBuf};

use cdfem::decompose::{decompose_mesh, DecomposeOptions, PsiVariant};
use cdfem::levelset::{LevelSetField, Shape};
use cdfem::mesh::{build_cartesian, deform, BackgroundMesh};
use cdfem::refelem::Family;
use cdfem::BoundingBox;
use clap::{Args, Parser, Subcommand};

use crate::drivers::{emit, evaluate, run, write_mesh};
use crate::report;
use crate::{Benchmark, BenchError, BenchmarkConfig, MeshKind};

#[derive(Debug, Parser)]
#[command(name = "cdfem", version, about = "Conformal decomposition of level-set cut meshes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a convergence or condition benchmark.
    Bench(BenchArgs),
    /// Decompose one background mesh and write the result.
    Decompose(DecomposeArgs),
    /// Print the default configuration of a benchmark.
    Config {
        #[arg(value_enum)]
        benchmark: Benchmark,
    },
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(value_enum)]
    pub benchmark: Benchmark,
    /// Orders as a list `1,2,3` or a range `1..4`.
    #[arg(long)]
    pub orders: Option<List>,
    /// Cells per side, e.g. `8,16,32,64`.
    #[arg(long)]
    pub levels: Option<List>,
    #[arg(long, value_enum)]
    pub mesh: Option<MeshKind>,
    /// Background family: `quadrilateral` or `triangle`.
    #[arg(long)]
    pub family: Option<Family>,
    /// Deformation amplitude relative to the cell size.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Comma-separated mappings: solin, lenoir, blend.
    #[arg(long, value_delimiter = ',')]
    pub psi: Option<Vec<PsiVariant>>,
    /// Offsets of the condition sweep.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Estimate condition numbers up to this many cells per side.
    #[arg(long)]
    pub cond_max_level: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file laid over the benchmark defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl BenchArgs {
    pub fn config(&self) -> Result<BenchmarkConfig, BenchError> {
        let mut cfg = match &self.config {
            Some(path) => BenchmarkConfig::load(self.benchmark, path)?,
            None => BenchmarkConfig::preset(self.benchmark),
        };
        if let Some(v) = &self.orders {
            cfg.orders = v.0.clone();
        }
        if let Some(v) = &self.levels {
            cfg.levels = v.0.clone();
        }
        if let Some(v) = self.mesh {
            cfg.mesh = v;
        }
        if let Some(v) = self.family {
            cfg.family.0 = v;
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = &self.psi {
            cfg.psi = v.iter().map(|&p| crate::config::Named(p)).collect();
        }
        if let Some(v) = self.steps {
            cfg.condition.steps = v;
        }
        if let Some(v) = self.cond_max_level {
            cfg.cond_max_level = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Integer list argument.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct List(pub Vec<usize>);

impl std::str::FromStr for List {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_list(s).map(List)
    }
}

/// `1,2,4` or `1..4` (inclusive).
pub fn parse_list(s: &str) -> Result<Vec<usize>, String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
        if a > b {
            return Err(format!("empty range `{s}`"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(num).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSpec {
    Cartesian(usize),
    Deformed(usize, f64),
}

impl std::str::FromStr for MeshSpec {
    type Err = String;

    /// `cartesian:ℓ` or `deformed:ℓ,δ`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, args) = s.split_once(':').ok_or_else(|| format!("expected `cartesian:N` or `deformed:N,delta`, got `{s}`"))?;
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        let cells = parts[0].parse::<usize>().map_err(|e| format!("cells `{}`: {e}", parts[0]))?;
        match (kind, parts.len()) {
            ("cartesian", 1) => Ok(MeshSpec::Cartesian(cells)),
            ("deformed", 2) => Ok(MeshSpec::Deformed(cells, parts[1].parse().map_err(|e| format!("delta `{}`: {e}", parts[1]))?)),
            _ => Err(format!("expected `cartesian:N` or `deformed:N,delta`, got `{s}`")),
        }
    }
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    #[arg(long, default_value = "solin")]
    pub psi: PsiVariant,
    #[arg(long, default_value_t = cdfem::levelset::DEFAULT_GRID_SAMPLES)]
    pub grid_samples: usize,
    #[arg(long, default_value_t = 4)]
    pub max_refine: usize,
    /// `circle:r`, `flower:r,a,w`, `linear:a,b,c`, or a file of nodal values.
    #[arg(long)]
    pub levelset: String,
    /// `cartesian:N` or `deformed:N,delta`.
    #[arg(long, default_value = "cartesian:8")]
    pub mesh: MeshSpec,
    #[arg(long, default_value = "quadrilateral")]
    pub family: Family,
    #[arg(long, default_value = "decompose-out")]
    pub out: PathBuf,
}

fn read_nodal(path: &Path, expected: usize) -> Result<Vec<f64>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let values = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| BenchError::Config(format!("{}: `{t}`: {e}", path.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != expected {
        return Err(BenchError::Config(format!("{}: {} values for {expected} nodes", path.display(), values.len())));
    }
    Ok(values)
}

/// Decomposes the requested mesh, writes native and VTK meshes and the
/// topology histogram, and returns the written paths.
pub fn decompose(args: &DecomposeArgs) -> Result<Vec<PathBuf>, BenchError> {
    let domain = BoundingBox::symmetric_unit();
    let bg: BackgroundMesh<f64> = match args.mesh {
        MeshSpec::Cartesian(l) => build_cartesian(domain, l, args.family, args.order)?,
        MeshSpec::Deformed(l, d) => deform(&build_cartesian(domain, l, args.family, args.order)?, d)?,
    };
    let field = match args.levelset.parse::<Shape<f64>>() {
        Ok(shape) => LevelSetField::from_fn(&bg, |p| shape.eval(p)),
        Err(_) if Path::new(&args.levelset).is_file() => {
            LevelSetField::from_nodal(read_nodal(Path::new(&args.levelset), bg.nodes.len())?)
        }
        Err(e) => return Err(BenchError::Config(format!("level set: {e}"))),
    };
    let opts = DecomposeOptions {
        psi: args.psi,
        grid_samples: args.grid_samples,
        max_refine: args.max_refine,
        ..DecomposeOptions::default()
    };
    let d = decompose_mesh(&bg, &field, &opts)
        .map_err(|source| BenchError::Decompose { context: "decompose".into(), source })?;
    std::fs::create_dir_all(&args.out).map_err(|e| BenchError::io(&args.out, e))?;
    let mut paths = write_mesh(&args.out, "decomposed", &bg, Some(field.values()), &d.mesh)?;
    let hist = args.out.join("topology.csv");
    report::csv_to(&hist, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["code", "count", "nonlocal"])?;
        for (code, n) in &d.stats.histogram {
            let nl = d.stats.nonlocal.get(code).copied().unwrap_or(0);
            out.write_record([code.to_string(), n.to_string(), nl.to_string()])?;
        }
        for (code, nl) in d.stats.nonlocal.iter().filter(|(c, _)| !d.stats.histogram.contains_key(c)) {
            out.write_record([code.to_string(), "0".into(), nl.to_string()])?;
        }
        out.flush()?;
        Ok(())
    })?;
    paths.push(hist);
    Ok(paths)
}

/// Runs the command; the result is the process exit status.
pub fn execute(cli: &Cli, out: &mut impl Write) -> Result<bool, BenchError> {
    let io = |e| BenchError::io(Path::new("<stdout>"), e);
    match &cli.command {
        Command::Config { benchmark } => {
            write!(out, "{}", BenchmarkConfig::preset(*benchmark).to_toml()).map_err(io)?;
            Ok(true)
        }
        Command::Decompose(args) => {
            for p in decompose(args)? {
                writeln!(out, "wrote {}", p.display()).map_err(io)?;
            }
            Ok(true)
        }
        Command::Bench(args) => {
            let cfg = args.config()?;
            let outcome = run(&cfg)?;
            emit(&outcome, &cfg.out)?;
            let checks = evaluate(&cfg, &outcome);
            for r in &outcome.reports {
                for m in r.orders() {
                    let (a, b) = (r.slopes_l2(m), r.slopes_he(m));
                    let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
                    writeln!(out, "{} m={m}: L2 slope {} (last {}), HE slope {} (last {})", r.benchmark, f(a.fit), f(a.last), f(b.fit), f(b.last))
                        .map_err(io)?;
                }
            }
            for c in &checks {
                writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail).map_err(io)?;
            }
            writeln!(out, "{:.1} s, output in {}", outcome.seconds, cfg.out.display()).map_err(io)?;
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}
