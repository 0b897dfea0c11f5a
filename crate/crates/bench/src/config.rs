use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cdfem::decompose::PsiVariant;
use cdfem::refelem::Family;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::BenchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Benchmark {
    Flower,
    Projection,
    Bimaterial,
    PlateHole,
    Condition,
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Benchmark::Flower => "flower",
            Benchmark::Projection => "projection",
            Benchmark::Bimaterial => "bimaterial",
            Benchmark::PlateHole => "plate-hole",
            Benchmark::Condition => "condition",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MeshKind {
    Cartesian,
    Deformed,
}

impl fmt::Display for MeshKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeshKind::Cartesian => "cartesian",
            MeshKind::Deformed => "deformed",
        })
    }
}

/// Serde through `Display` / `FromStr` for the core enums.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Named<T>(pub T);

impl<T: fmt::Display> Serialize for Named<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&self.0)
    }
}

impl<'de, T: FromStr> Deserialize<'de> for Named<T>
where
    T::Err: fmt::Display,
{
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map(Named).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowerParams {
    pub radius: f64,
    pub amplitude: f64,
    pub frequency: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    pub youngs: f64,
    pub poisson: f64,
}

impl MaterialParams {
    pub fn build(&self) -> Result<cdfem_fem::Material, BenchError> {
        Ok(cdfem_fem::Material::new(self.youngs, self.poisson)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BimaterialParams {
    /// Inclusion radius.
    pub a: f64,
    /// Outer radius of the analytic solution.
    pub b: f64,
    pub inner: MaterialParams,
    pub outer: MaterialParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateParams {
    /// Hole radius.
    pub a: f64,
    /// Far-field traction.
    pub tx: f64,
    pub material: MaterialParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionParams {
    pub cells: usize,
    pub steps: usize,
}

/// Pass criteria evaluated after a run. Slope windows are offsets from the
/// order `m`: the L2 (or flower) slope must lie in `[m + lo, m + hi]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub l2_slope: Option<[f64; 2]>,
    pub he_slope: Option<[f64; 2]>,
    /// Largest allowed slope difference between the Lenoir mapping and the
    /// reference mapping.
    pub lenoir_slope_match: Option<f64>,
    /// Minimum ratio of the blend error to the reference error at the
    /// highest order and finest level.
    pub blend_error_ratio: Option<f64>,
    /// Minimum amount by which the blend slope falls below the reference.
    pub blend_slope_gap: Option<f64>,
    /// Condition number increasing with the order at zero offset.
    pub kappa_monotone: Option<bool>,
    pub max_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub benchmark: Benchmark,
    pub mesh: MeshKind,
    /// Background element family.
    pub family: Named<Family>,
    /// Deformation amplitude relative to `h` for deformed meshes.
    pub delta: f64,
    /// Cells per side.
    pub levels: Vec<usize>,
    pub orders: Vec<usize>,
    /// Curved-triangle mappings; the first is the reference.
    pub psi: Vec<Named<PsiVariant>>,
    pub out: PathBuf,
    pub max_refine: usize,
    pub grid_samples: usize,
    /// Condition numbers of the solved systems are estimated up to this level.
    pub cond_max_level: usize,
    pub flower: FlowerParams,
    pub circle_radius: f64,
    pub bimaterial: BimaterialParams,
    pub plate: PlateParams,
    pub condition: ConditionParams,
    pub thresholds: Thresholds,
}

const MAX_ORDER: usize = 8;

impl BenchmarkConfig {
    pub fn preset(benchmark: Benchmark) -> Self {
        let optimal = Thresholds {
            l2_slope: Some([0.7, 1.4]),
            he_slope: Some([-0.3, 0.5]),
            max_seconds: Some(600.0),
            ..Thresholds::default()
        };
        let (orders, psi, thresholds) = match benchmark {
            Benchmark::Flower => (
                vec![1, 2, 3, 4],
                vec![PsiVariant::Solin],
                Thresholds { l2_slope: Some([0.7, 1.4]), max_seconds: Some(60.0), ..Thresholds::default() },
            ),
            Benchmark::Projection => (
                vec![1, 2, 3, 4],
                vec![PsiVariant::Solin, PsiVariant::Lenoir, PsiVariant::BlendOnT],
                Thresholds {
                    lenoir_slope_match: Some(0.3),
                    blend_error_ratio: Some(10.0),
                    blend_slope_gap: Some(1.0),
                    ..optimal
                },
            ),
            Benchmark::Bimaterial => (vec![1, 2, 3], vec![PsiVariant::Solin], optimal),
            Benchmark::PlateHole => (vec![1, 2, 3], vec![PsiVariant::Solin], optimal),
            Benchmark::Condition => (
                vec![1, 2, 3, 4, 5],
                vec![PsiVariant::Solin],
                Thresholds { kappa_monotone: Some(true), ..Thresholds::default() },
            ),
        };
        Self {
            benchmark,
            mesh: MeshKind::Cartesian,
            family: Named(Family::Quadrilateral),
            delta: 0.15,
            levels: vec![8, 16, 32, 64],
            orders,
            psi: psi.into_iter().map(Named).collect(),
            out: PathBuf::from("bench-out"),
            max_refine: 4,
            grid_samples: cdfem::levelset::DEFAULT_GRID_SAMPLES,
            cond_max_level: 128,
            flower: FlowerParams { radius: 0.48, amplitude: 0.05, frequency: 6.0 },
            circle_radius: 0.4,
            bimaterial: BimaterialParams {
                a: 0.4,
                b: 2.0,
                inner: MaterialParams { youngs: 10.0, poisson: 0.3 },
                outer: MaterialParams { youngs: 1.0, poisson: 0.25 },
            },
            plate: PlateParams { a: 0.4, tx: 1.0, material: MaterialParams { youngs: 1e4, poisson: 0.3 } },
            condition: ConditionParams { cells: 6, steps: 200 },
            thresholds,
        }
    }

    /// The preset for `benchmark` with the keys of a TOML document laid over
    /// it. Tables merge key by key.
    pub fn from_toml(benchmark: Benchmark, text: &str) -> Result<Self, BenchError> {
        let overrides: toml::Table = text.parse().map_err(|e: toml::de::Error| BenchError::Config(e.to_string()))?;
        if let Some(b) = overrides.get("benchmark") {
            let name = b.as_str().unwrap_or_default();
            if name != benchmark.to_string() {
                return Err(BenchError::Config(format!("config is for `{name}`, not `{benchmark}`")));
            }
        }
        let mut base = toml::Table::try_from(Self::preset(benchmark)).map_err(|e| BenchError::Config(e.to_string()))?;
        merge(&mut base, overrides);
        let config: Self = base.try_into().map_err(|e: toml::de::Error| BenchError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(benchmark: Benchmark, path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_toml(benchmark, &text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        if self.levels.is_empty() || self.levels[0] == 0 || self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("levels must be positive and strictly increasing: {:?}", self.levels));
        }
        if self.orders.is_empty() || self.orders.iter().any(|&m| m == 0 || m > MAX_ORDER) {
            return bad(format!("orders must lie in 1..={MAX_ORDER}: {:?}", self.orders));
        }
        if self.psi.is_empty() {
            return bad("at least one mapping is needed".into());
        }
        if self.family.0 == Family::Line {
            return bad("background family must be triangle or quadrilateral".into());
        }
        if !(0.0..0.5).contains(&self.delta) {
            return bad(format!("deformation {} outside [0, 0.5)", self.delta));
        }
        let f = &self.flower;
        if f.radius <= 0.0 || f.amplitude < 0.0 || f.amplitude >= f.radius || f.radius + f.amplitude >= 1.0 {
            return bad(format!("flower {f:?} must satisfy 0 <= alpha < r and r + alpha < 1"));
        }
        if self.circle_radius <= 0.0 || self.circle_radius >= 1.0 {
            return bad(format!("circle radius {} outside (0, 1)", self.circle_radius));
        }
        let b = &self.bimaterial;
        if b.a <= 0.0 || b.a >= 1.0 || b.b <= b.a {
            return bad(format!("bimaterial radii need 0 < a < 1 and b > a: {b:?}"));
        }
        b.inner.build()?;
        b.outer.build()?;
        if self.plate.a <= 0.0 || self.plate.a >= 1.0 {
            return bad(format!("hole radius {} outside (0, 1)", self.plate.a));
        }
        self.plate.material.build()?;
        if self.condition.cells == 0 || self.condition.steps == 0 {
            return bad("condition sweep needs cells and steps".into());
        }
        Ok(())
    }

    pub fn psi_variants(&self) -> Vec<PsiVariant> {
        self.psi.iter().map(|p| p.0).collect()
    }
}

fn merge(base: &mut toml::Table, overrides: toml::Table) {
    for (k, v) in overrides {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_round_trips_through_toml() {
        for b in [Benchmark::Flower, Benchmark::Projection, Benchmark::Bimaterial, Benchmark::PlateHole, Benchmark::Condition] {
            let c = BenchmarkConfig::preset(b);
            c.validate().unwrap();
            assert_eq!(BenchmarkConfig::from_toml(b, &c.to_toml()).unwrap(), c);
        }
    }

    #[test]
    fn partial_tables_override_single_keys() {
        let text = "orders = [2]\nmesh = \"deformed\"\npsi = [\"lenoir\"]\n[flower]\namplitude = 0.0\n[bimaterial.inner]\nyoungs = 3.0\n";
        let c = BenchmarkConfig::from_toml(Benchmark::Flower, text).unwrap();
        assert_eq!(c.orders, vec![2]);
        assert_eq!(c.mesh, MeshKind::Deformed);
        assert_eq!(c.psi_variants(), vec![PsiVariant::Lenoir]);
        assert_eq!(c.flower.amplitude, 0.0);
        assert_eq!(c.flower.radius, 0.48);
        assert_eq!(c.bimaterial.inner.youngs, 3.0);
        assert_eq!(c.bimaterial.inner.poisson, 0.3);
    }

    #[test]
    fn invalid_settings_are_rejected() {
        for text in [
            "levels = [8, 8]",
            "levels = [16, 8]",
            "orders = [0]",
            "orders = [9]",
            "psi = [\"spline\"]",
            "family = \"line\"",
            "unknown = 1",
            "benchmark = \"projection\"",
            "[bimaterial.outer]\npoisson = 0.5",
        ] {
            assert!(BenchmarkConfig::from_toml(Benchmark::Flower, text).is_err(), "{text}");
        }
    }
}
